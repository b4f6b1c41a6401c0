use super::{Prototype, RowLayout};
use crate::error::{Error, Result};
use crate::gs_model::{hermitian_pinv, EstimateMessage, GsParams, SIGMA_FLOOR};
use crate::linops::gaussian_rows;
use crate::rng::stream;
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use rand::Rng;

pub const DEFAULT_DELTA_SAMPLES: usize = 10_000;
const MIN_DELTA_SAMPLES: usize = 1_000;
const DELTA_RTOL: f64 = 1e-12;

/// Synthetic truth rows for one node, plus row layout and observations.
#[derive(Clone, Debug)]
pub struct SurrogateSample<S: Scalar> {
    pub truth: Vec<DMatrix<S>>,
    pub layout: RowLayout,
    pub obs: Option<DMatrix<S>>,
}

impl<S: Scalar> SurrogateSample<S> {
    /// Inputs `truth·Θ + Z` with Gaussian rows `Z ∼ N(0, Σ)`; returns
    /// `(inputs, errors)`.
    pub fn inputs<G: Rng + ?Sized>(&self, gs: &[&GsParams<S>], rng: &mut G) -> (Vec<DMatrix<S>>, Vec<DMatrix<S>>) {
        let mut inputs = Vec::with_capacity(gs.len());
        let mut errors = Vec::with_capacity(gs.len());
        for (x, g) in self.truth.iter().zip(gs) {
            let z = if g.sigma.iter().all(|v| v.abs2_f64() == 0.0) {
                DMatrix::zeros(x.nrows(), x.ncols())
            } else {
                gaussian_rows(rng, x.nrows(), &g.sigma, SIGMA_FLOOR)
            };
            inputs.push(x * &g.theta + &z);
            errors.push(z);
        }
        (inputs, errors)
    }
}

/// Per-port GSO corrections `Δ_k`.
#[derive(Clone, Debug)]
pub struct DeltaEstimate<S: Scalar> {
    pub deltas: Vec<DMatrix<S>>,
    /// Input error covariance was (numerically) singular at this port.
    pub degenerate: Vec<bool>,
}

/// Coefficient of `z` in the least-squares fit of `out` on `[x, z]`. Its
/// expectation is `[E ZᴴZ]⁻¹ E Zᴴψ̂` since `E XᴴZ = 0`; regressing out `x`
/// removes the signal part from the estimator's variance.
pub(crate) fn delta_from_samples<S: Scalar>(x: &DMatrix<S>, z: &DMatrix<S>, out: &DMatrix<S>) -> (DMatrix<S>, bool) {
    let m = z.ncols();
    if z.iter().all(|v| v.abs2_f64() == 0.0) {
        return (DMatrix::zeros(m, m), true);
    }
    let (ginv, _) = hermitian_pinv(&x.ad_mul(x), DELTA_RTOL);
    let z_res = z - x * (&ginv * x.ad_mul(z));
    let (zinv, degenerate) = hermitian_pinv(&z_res.ad_mul(&z_res), DELTA_RTOL);
    (zinv * z_res.ad_mul(out), degenerate)
}

/// Per-port GSO corrections of `proto` when its inputs follow `input_gs`:
/// closed form for linear prototypes, Monte Carlo otherwise.
pub fn estimate_delta<S: Scalar>(
    proto: &Prototype<S>,
    input_gs: &[&GsParams<S>],
    n_mc: usize,
    seed: u64,
) -> Result<DeltaEstimate<S>> {
    if input_gs.len() != proto.arity() {
        return Err(Error::Dimension(format!(
            "estimator has {} ports, got {} GS models",
            proto.arity(),
            input_gs.len()
        )));
    }
    match proto.linear_delta(input_gs) {
        Some(deltas) => {
            let degenerate = input_gs.iter().map(|g| g.sigma.iter().all(|v| v.abs2_f64() == 0.0)).collect();
            Ok(DeltaEstimate { deltas, degenerate })
        }
        None => estimate_delta_mc(proto, input_gs, n_mc, seed),
    }
}

/// Monte-Carlo estimate of the per-port GSO corrections, by regressing
/// surrogate outputs on their input errors.
pub fn estimate_delta_mc<S: Scalar>(
    proto: &Prototype<S>,
    input_gs: &[&GsParams<S>],
    n_mc: usize,
    seed: u64,
) -> Result<DeltaEstimate<S>> {
    if n_mc < MIN_DELTA_SAMPLES {
        return Err(Error::Config(format!("Δ estimation needs at least {MIN_DELTA_SAMPLES} samples, got {n_mc}")));
    }
    let mut rng = stream(seed);
    let sample = proto.sample_surrogate(n_mc, &mut rng);
    let (inputs, errors) = sample.inputs(input_gs, &mut rng);
    let refs: Vec<&DMatrix<S>> = inputs.iter().collect();
    let outs = proto.evaluate(&refs, input_gs, &sample.layout, sample.obs.as_ref())?;
    let mut deltas = Vec::new();
    let mut degenerate = Vec::new();
    for k in 0..outs.len() {
        let (d, flag) = delta_from_samples(&sample.truth[k], &errors[k], &outs[k]);
        deltas.push(d);
        degenerate.push(flag);
    }
    Ok(DeltaEstimate { deltas, degenerate })
}

/// A prototype together with its current per-port corrections.
#[derive(Clone, Debug)]
pub struct GsoWrapper<S: Scalar> {
    pub prototype: Prototype<S>,
    pub deltas: Vec<DMatrix<S>>,
    pub n_mc: usize,
}

impl<S: Scalar> GsoWrapper<S> {
    pub fn new(prototype: Prototype<S>) -> Self {
        let m = prototype.m();
        let deltas = vec![DMatrix::zeros(m, m); prototype.arity()];
        Self { prototype, deltas, n_mc: DEFAULT_DELTA_SAMPLES }
    }

    /// Re-estimate the corrections for inputs following `input_gs`.
    pub fn refresh(&mut self, input_gs: &[&GsParams<S>], seed: u64) -> Result<Vec<bool>> {
        let est = estimate_delta(&self.prototype, input_gs, self.n_mc, seed)?;
        self.deltas = est.deltas;
        Ok(est.degenerate)
    }
}

/// `out_k = ψ̂_k(inputs) - input_k Δ_k` at every port.
pub fn gso_apply<S: Scalar>(
    wrapper: &GsoWrapper<S>,
    inputs: &[&EstimateMessage<S>],
    obs: Option<&DMatrix<S>>,
) -> Result<Vec<DMatrix<S>>> {
    let proto = &wrapper.prototype;
    if inputs.len() != proto.arity() || wrapper.deltas.len() != proto.arity() {
        return Err(Error::Dimension(format!(
            "GSO wrapper with {} ports given {} inputs and {} corrections",
            proto.arity(),
            inputs.len(),
            wrapper.deltas.len()
        )));
    }
    let values: Vec<&DMatrix<S>> = inputs.iter().map(|m| &m.values).collect();
    let gs: Vec<&GsParams<S>> = inputs.iter().map(|m| &m.gs).collect();
    let outs = proto.evaluate(&values, &gs, &proto.physical_layout(), obs)?;
    Ok(outs.into_iter().zip(values.iter().zip(&wrapper.deltas)).map(|(o, (x, d))| o - *x * d).collect())
}
