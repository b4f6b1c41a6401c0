//! Prototype local estimators, their surrogate samplers and the GSO wrapper.

mod clip;
mod discrete;
mod gaussian;
mod gso;
mod layout;

pub use clip::clip_mmse_pair;
pub use discrete::{denoise_bpsk, denoise_bpsk_correlated, denoise_discrete, hard_decide, DiscretePrior};
pub use gaussian::{awgn_anchor, lmmse_linear_pair};
pub use gso::{
    estimate_delta, estimate_delta_mc, gso_apply, DeltaEstimate, GsoWrapper, SurrogateSample, DEFAULT_DELTA_SAMPLES,
};
pub use layout::{JointRow, RowLayout};

use crate::error::{Error, Result};
use crate::gs_model::GsParams;
use crate::linops::gaussian_rows;
use crate::relay::{eta, ClipSpec};
use crate::scalar::Scalar;
use gaussian::{AnchorModel, PairModel};
use nalgebra::DMatrix;
use rand::Rng;

/// Linear observation of one variable: `r_i = g_i x_i + υ_i` for the first
/// `gains.len()` rows.
#[derive(Clone, Debug)]
pub struct AnchorSpec<S: Scalar> {
    pub dim: usize,
    pub gains: Vec<f64>,
    pub noise_var: f64,
    /// Gaussian prior used by the estimator; `None` is a flat prior.
    pub prior: Option<DMatrix<S>>,
    /// Row covariance of the variable, used to draw surrogate truth.
    pub truth_cov: DMatrix<S>,
    /// Index into the observation list carried with the ground truth.
    pub observation: usize,
}

/// Two variables linked by `b_i = λ_i a_i + υ_i`.
#[derive(Clone, Debug)]
pub struct PairSpec<S: Scalar> {
    pub dims: (usize, usize),
    pub gains: Vec<f64>,
    pub noise_var: f64,
    pub prior_a: Option<DMatrix<S>>,
    pub truth_cov_a: DMatrix<S>,
}

/// `x_η = η(x_r + n_sr)`.
#[derive(Clone, Debug)]
pub struct ClipNodeSpec<S: Scalar> {
    pub dim: usize,
    pub clip: ClipSpec,
    pub v_sr: f64,
    pub prior_r: DMatrix<S>,
    pub prior_eta: DMatrix<S>,
}

/// The prototype (non-orthogonal) estimator attached to a constraint.
#[derive(Clone, Debug)]
pub enum Prototype<S: Scalar> {
    Discrete { dim: usize, prior: DiscretePrior<S> },
    Anchor(AnchorSpec<S>),
    LinearPair(PairSpec<S>),
    Clip(ClipNodeSpec<S>),
}

impl<S: Scalar> Prototype<S> {
    pub fn arity(&self) -> usize {
        match self {
            Prototype::Discrete { .. } | Prototype::Anchor(_) => 1,
            Prototype::LinearPair(_) | Prototype::Clip(_) => 2,
        }
    }

    pub fn port_dims(&self) -> Vec<usize> {
        match self {
            Prototype::Discrete { dim, .. } => vec![*dim],
            Prototype::Anchor(a) => vec![a.dim],
            Prototype::LinearPair(p) => vec![p.dims.0, p.dims.1],
            Prototype::Clip(c) => vec![c.dim, c.dim],
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Prototype::Discrete { prior, .. } => prior.m(),
            Prototype::Anchor(a) => a.truth_cov.nrows(),
            Prototype::LinearPair(p) => p.truth_cov_a.nrows(),
            Prototype::Clip(c) => c.prior_r.nrows(),
        }
    }

    pub fn observation(&self) -> Option<usize> {
        match self {
            Prototype::Anchor(a) => Some(a.observation),
            _ => None,
        }
    }

    /// Prior alphabet of a port with a hard-decision metric.
    pub fn discrete_prior(&self) -> Option<&DiscretePrior<S>> {
        match self {
            Prototype::Discrete { prior, .. } => Some(prior),
            _ => None,
        }
    }

    /// Layout for the actual variables (one row per physical row).
    pub fn physical_layout(&self) -> RowLayout {
        match self {
            Prototype::Discrete { dim, .. } => RowLayout::single(*dim),
            Prototype::Anchor(a) => RowLayout::single(a.dim),
            Prototype::LinearPair(p) => RowLayout::pair(p.dims.0, p.dims.1),
            Prototype::Clip(c) => RowLayout::aligned(c.dim),
        }
    }

    /// Evaluate on per-port inputs. `obs` is row-aligned with port 0 for
    /// anchors.
    pub fn evaluate(
        &self,
        inputs: &[&DMatrix<S>],
        gs: &[&GsParams<S>],
        layout: &RowLayout,
        obs: Option<&DMatrix<S>>,
    ) -> Result<Vec<DMatrix<S>>> {
        if inputs.len() != self.arity() || gs.len() != self.arity() {
            return Err(Error::Dimension(format!("estimator has {} ports, got {} inputs", self.arity(), inputs.len())));
        }
        for (k, x) in inputs.iter().enumerate() {
            if x.nrows() != layout.rows(k) || x.ncols() != self.m() {
                return Err(Error::Dimension(format!("port {k} input {:?} does not match layout", x.shape())));
            }
            if x.iter().any(|v| !(v.re_f64().is_finite() && v.im_f64().is_finite())) {
                return Err(Error::Numerical(format!("non-finite input at port {k}")));
            }
        }
        Ok(match self {
            Prototype::Discrete { prior, .. } => vec![denoise_discrete(inputs[0], gs[0], prior)?],
            Prototype::Anchor(a) => {
                let obs = obs.ok_or_else(|| Error::Config("anchor evaluated without an observation".into()))?;
                let model = AnchorModel { gains: &a.gains, noise_var: a.noise_var, prior: a.prior.as_ref() };
                vec![model.evaluate(inputs[0], gs[0], obs, &layout.phys[0])]
            }
            Prototype::LinearPair(p) => {
                let model = PairModel { gains: &p.gains, noise_var: p.noise_var, prior_a: p.prior_a.as_ref() };
                let (a, b) = model.evaluate(inputs[0], gs[0], inputs[1], gs[1], &layout.joint);
                vec![a, b]
            }
            Prototype::Clip(c) => {
                let model =
                    clip::ClipModel { clip: &c.clip, v_sr: c.v_sr, prior_r: &c.prior_r, prior_eta: &c.prior_eta };
                let (a, b) = model.evaluate(inputs[0], gs[0], inputs[1], gs[1]);
                vec![a, b]
            }
        })
    }

    /// Exact GSO corrections of the linear prototypes on their physical
    /// rows; `None` for nonlinear ones.
    pub fn linear_delta(&self, gs: &[&GsParams<S>]) -> Option<Vec<DMatrix<S>>> {
        match self {
            Prototype::Anchor(a) => {
                let model = AnchorModel { gains: &a.gains, noise_var: a.noise_var, prior: a.prior.as_ref() };
                Some(vec![model.own_coefficient(gs[0], &self.physical_layout().phys[0])])
            }
            Prototype::LinearPair(p) => {
                let model = PairModel { gains: &p.gains, noise_var: p.noise_var, prior_a: p.prior_a.as_ref() };
                let (a, b) = model.own_coefficients(gs[0], gs[1], &self.physical_layout().joint);
                Some(vec![a, b])
            }
            _ => None,
        }
    }

    /// Draw `n_mc` rows of synthetic truth (and observations for anchors)
    /// from the node's prior and constraint.
    pub fn sample_surrogate<G: Rng + ?Sized>(&self, n_mc: usize, rng: &mut G) -> SurrogateSample<S> {
        match self {
            Prototype::Discrete { prior, .. } => {
                SurrogateSample { truth: vec![prior.sample(rng, n_mc)], layout: RowLayout::single(n_mc), obs: None }
            }
            Prototype::Anchor(a) => {
                let layout = RowLayout::cyclic_single(n_mc, a.dim);
                let x = gaussian_rows(rng, n_mc, &a.truth_cov, 0.0);
                let m = x.ncols();
                let mut obs = DMatrix::zeros(n_mc, m);
                for (r, &i) in layout.phys[0].iter().enumerate() {
                    if let Some(&g) = a.gains.get(i) {
                        for c in 0..m {
                            obs[(r, c)] = x[(r, c)] * S::from_re(g) + S::gaussian(rng, a.noise_var);
                        }
                    }
                }
                SurrogateSample { truth: vec![x], layout, obs: Some(obs) }
            }
            Prototype::LinearPair(p) => {
                let (na, nb) = p.dims;
                let layout = RowLayout::cyclic_pair(n_mc, na, nb);
                let m = p.truth_cov_a.nrows();
                let xa = gaussian_rows(rng, layout.rows(0), &p.truth_cov_a, 0.0);
                let mut xb = DMatrix::zeros(layout.rows(1), m);
                for row in &layout.joint {
                    if let Some(ib) = row.rows[1] {
                        let lam = p.gains.get(row.phys).copied().unwrap_or(0.0);
                        for c in 0..m {
                            let base = match row.rows[0] {
                                Some(ia) => xa[(ia, c)] * S::from_re(lam),
                                None => S::zero(),
                            };
                            let noise = if p.noise_var > 0.0 { S::gaussian(rng, p.noise_var) } else { S::zero() };
                            xb[(ib, c)] = base + noise;
                        }
                    }
                }
                SurrogateSample { truth: vec![xa, xb], layout, obs: None }
            }
            Prototype::Clip(c) => {
                let xr = gaussian_rows(rng, n_mc, &c.prior_r, 0.0);
                let m = xr.ncols();
                let y = DMatrix::from_fn(n_mc, m, |i, j| xr[(i, j)] + S::gaussian(rng, c.v_sr));
                let xe = eta(&y, &c.clip);
                SurrogateSample { truth: vec![xr, xe], layout: RowLayout::aligned(n_mc), obs: None }
            }
        }
    }
}
