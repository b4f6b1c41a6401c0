//! Monte-Carlo state evolution of the GS parameters.

use crate::engine::{validate, Side, SystemGraph};
use crate::error::{Error, Result};
use crate::estimators::{estimate_delta, hard_decide, DiscretePrior, Prototype, DEFAULT_DELTA_SAMPLES};
use crate::gs_model::{gs_fit, GsParams};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use std::io::Write;

pub const DEFAULT_SE_SAMPLES: usize = 100_000;
const MIN_SE_SAMPLES: usize = 1_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeOptions {
    /// Surrogate rows per transfer evaluation.
    pub n_mc: usize,
    /// Surrogate rows per GSO correction estimate.
    pub delta_samples: usize,
    pub gso: bool,
}

impl Default for SeOptions {
    fn default() -> Self {
        Self { n_mc: DEFAULT_SE_SAMPLES, delta_samples: DEFAULT_DELTA_SAMPLES, gso: true }
    }
}

/// Result of one transfer evaluation.
#[derive(Clone, Debug)]
pub struct SeTransfer<S: Scalar> {
    pub output: Vec<GsParams<S>>,
    pub deltas: Vec<DMatrix<S>>,
    /// MSE of the prototype (posterior) output per port.
    pub mse: Vec<f64>,
    /// Hard-decision error rate per port, for ports with a discrete prior.
    pub ber: Vec<Option<f64>>,
    pub degenerate: bool,
}

/// Push GS-model inputs through one (GSO-wrapped) node and fit the output
/// GS parameters on synthetic truth.
pub fn se_transfer<S: Scalar>(
    node: &Prototype<S>,
    input_gs: &[&GsParams<S>],
    opts: &SeOptions,
    seed: u64,
) -> Result<SeTransfer<S>> {
    if opts.n_mc < MIN_SE_SAMPLES {
        return Err(Error::Config(format!(
            "state evolution needs at least {MIN_SE_SAMPLES} samples, got {}",
            opts.n_mc
        )));
    }
    if input_gs.len() != node.arity() {
        return Err(Error::Dimension(format!("node has {} ports, got {} GS inputs", node.arity(), input_gs.len())));
    }
    let m = node.m();
    let mut degenerate = false;
    let deltas = if opts.gso {
        let est = estimate_delta(node, input_gs, opts.delta_samples, derive_seed(seed, &[1]))?;
        degenerate |= est.degenerate.iter().any(|&d| d);
        est.deltas
    } else {
        vec![DMatrix::zeros(m, m); node.arity()]
    };
    let mut rng = stream(derive_seed(seed, &[2]));
    let sample = node.sample_surrogate(opts.n_mc, &mut rng);
    let (inputs, _) = sample.inputs(input_gs, &mut rng);
    let refs: Vec<&DMatrix<S>> = inputs.iter().collect();
    let post = node.evaluate(&refs, input_gs, &sample.layout, sample.obs.as_ref())?;
    let mut output = Vec::with_capacity(post.len());
    let mut mse = Vec::with_capacity(post.len());
    let mut ber = Vec::with_capacity(post.len());
    for (k, p) in post.iter().enumerate() {
        let truth = &sample.truth[k];
        let out = p - &inputs[k] * &deltas[k];
        let mut fit = gs_fit(truth, &out)?;
        degenerate |= fit.degenerate | fit.params.clip_sigma();
        output.push(fit.params);
        mse.push(crate::engine::metrics::mse_total(p, truth));
        ber.push(node.discrete_prior().map(|_| crate::engine::ber(&hard_decide(p), truth).unwrap_or(f64::NAN)));
    }
    Ok(SeTransfer { output, deltas, mse, ber, degenerate })
}

/// GS parameters of one port after one iteration.
#[derive(Clone, Debug)]
pub struct SePort<S: Scalar> {
    pub xi_out: GsParams<S>,
    pub x_out: GsParams<S>,
    /// Next-iteration inputs; routed from the other side unchanged.
    pub xi_in: GsParams<S>,
    pub x_in: GsParams<S>,
    /// Predicted MSE of the Φ-side posterior estimate of `X_k`.
    pub mse: f64,
    pub ber: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SeStep<S: Scalar> {
    pub t: usize,
    pub ports: Vec<SePort<S>>,
    /// `deltas[c][pos]` for constraint `c` at port position `pos`.
    pub deltas: Vec<Vec<DMatrix<S>>>,
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct SeTrajectory<S: Scalar> {
    pub m: usize,
    pub opts: SeOptions,
    pub steps: Vec<SeStep<S>>,
}

impl<S: Scalar> SeTrajectory<S> {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    /// GS parameters of the messages entering iteration `t` (1-based) at
    /// `port` on `side`.
    pub fn input_gs(&self, t: usize, port: usize, side: Side) -> GsParams<S> {
        if t <= 1 {
            return GsParams::zeros(self.m);
        }
        let p = &self.steps[t - 2].ports[port];
        match side {
            Side::Gamma => p.xi_in.clone(),
            Side::Phi => p.x_in.clone(),
        }
    }

    pub fn delta(&self, t: usize, constraint: usize, pos: usize) -> Option<&DMatrix<S>> {
        self.steps.get(t.checked_sub(1)?)?.deltas.get(constraint)?.get(pos)
    }

    pub fn mse(&self, port: usize) -> Vec<f64> {
        self.steps.iter().map(|s| s.ports[port].mse).collect()
    }

    /// Trial-less CSV: one row per (t, port, domain, flow).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "port", "domain", "flow", "theta", "sigma", "se_mse", "se_ber"])?;
        for s in &self.steps {
            for (k, p) in s.ports.iter().enumerate() {
                for (domain, flow, g) in
                    [("xi", "out", &p.xi_out), ("xi", "in", &p.xi_in), ("x", "out", &p.x_out), ("x", "in", &p.x_in)]
                {
                    wr.write_record([
                        s.t.to_string(),
                        (k + 1).to_string(),
                        domain.to_string(),
                        flow.to_string(),
                        format_matrix(&g.theta),
                        format_matrix(&g.sigma),
                        p.mse.to_string(),
                        p.ber.map(|b| b.to_string()).unwrap_or_default(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

/// Row-major entries joined by `;`, complex entries as `re:im`.
fn format_matrix<S: Scalar>(m: &DMatrix<S>) -> String {
    let mut parts = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            parts.push(if S::IS_COMPLEX { format!("{}:{}", v.re_f64(), v.im_f64()) } else { v.re_f64().to_string() });
        }
    }
    parts.join(";")
}

/// Iterate the transfer maps of every constraint in the engine's schedule,
/// starting from `Θ = Σ = 0`.
pub fn run_se<S: Scalar>(
    graph: &SystemGraph<S>,
    iterations: usize,
    opts: &SeOptions,
    seed: u64,
) -> Result<SeTrajectory<S>> {
    validate(graph).map_err(Error::Graph)?;
    if iterations == 0 {
        return Err(Error::Config("state evolution needs at least one iteration".into()));
    }
    let k = graph.ports();
    let m = graph.m;
    let mut xi_in = vec![GsParams::zeros(m); k];
    let mut x_in = vec![GsParams::zeros(m); k];
    let mut steps = Vec::with_capacity(iterations);
    for t in 1..=iterations {
        let mut xi_out = vec![GsParams::zeros(m); k];
        let mut x_out = vec![GsParams::zeros(m); k];
        let mut mse = vec![f64::NAN; k];
        let mut ber = vec![None; k];
        let mut deltas = vec![Vec::new(); graph.constraints.len()];
        let mut degenerate = false;
        for (ci, c) in graph.constraints.iter().enumerate() {
            let source = if c.side == Side::Gamma { &xi_in } else { &x_in };
            let gs: Vec<&GsParams<S>> = c.ports.iter().map(|&p| &source[p]).collect();
            let tr = se_transfer(&c.prototype, &gs, opts, derive_seed(seed, &[t as u64, ci as u64]))?;
            degenerate |= tr.degenerate;
            for (pos, &p) in c.ports.iter().enumerate() {
                match c.side {
                    Side::Gamma => xi_out[p] = tr.output[pos].clone(),
                    Side::Phi => {
                        x_out[p] = tr.output[pos].clone();
                        mse[p] = tr.mse[pos];
                        ber[p] = tr.ber[pos];
                    }
                }
            }
            deltas[ci] = tr.deltas;
        }
        // re-group: Ξ_k^out feeds X_k^in and X_k^out feeds Ξ_k^in unchanged
        x_in = xi_out.clone();
        xi_in = x_out.clone();
        let ports = (0..k)
            .map(|p| SePort {
                xi_out: xi_out[p].clone(),
                x_out: x_out[p].clone(),
                xi_in: xi_in[p].clone(),
                x_in: x_in[p].clone(),
                mse: mse[p],
                ber: ber[p],
            })
            .collect();
        steps.push(SeStep { t, ports, deltas, degenerate });
    }
    Ok(SeTrajectory { m, opts: *opts, steps })
}

/// Monte-Carlo hard-decision error rate of the posterior mean under the GS
/// model `x̂ = xΘ + z`, with its standard error.
pub fn ber_under_gs<S: Scalar>(
    gs: &GsParams<S>,
    prior: &DiscretePrior<S>,
    n_mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let node = Prototype::Discrete { dim: n_mc, prior: prior.clone() };
    let mut rng = stream(seed);
    let sample = node.sample_surrogate(n_mc, &mut rng);
    let (inputs, _) = sample.inputs(&[gs], &mut rng);
    let post = node.evaluate(&[&inputs[0]], &[gs], &sample.layout, None)?;
    let truth = &sample.truth[0];
    let p = crate::engine::ber(&hard_decide(&post[0]), truth)?;
    let bits = (truth.len() * if S::IS_COMPLEX { 2 } else { 1 }).max(1) as f64;
    Ok((p, (p * (1.0 - p) / bits).sqrt()))
}

/// Predicted per-iteration BER at `port`, from the GS parameters entering
/// its Φ-side estimator.
pub fn predict_ber<S: Scalar>(
    se: &SeTrajectory<S>,
    port: usize,
    prior: &DiscretePrior<S>,
    n_mc: usize,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    (1..=se.iterations())
        .map(|t| ber_under_gs(&se.input_gs(t, port, Side::Phi), prior, n_mc, derive_seed(seed, &[t as u64])))
        .collect()
}
