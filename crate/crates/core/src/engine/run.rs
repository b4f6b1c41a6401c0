use super::graph::{require_valid, Side, SystemGraph, Truth};
use super::metrics::{ber, mse_total, power};
use crate::error::{Error, Result};
use crate::estimators::{estimate_delta, hard_decide, DEFAULT_DELTA_SAMPLES};
use crate::gs_model::{audit_orthogonality, gs_fit, AuditReport, Domain, ErrorLedger, EstimateMessage, Flow, GsParams};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::state_evolution::SeTrajectory;
use nalgebra::DMatrix;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// MSE above this multiple of the prior power counts as divergence.
const DIVERGENCE_RATIO: f64 = 1e3;

/// Where the estimators get the GS parameters of their inputs and their
/// GSO corrections from.
#[derive(Clone, Debug)]
pub enum Tracking<S: Scalar> {
    /// From a state-evolution run on the same graph.
    Predicted(Arc<SeTrajectory<S>>),
    /// Fitted against the ground truth every iteration, with `Δ` re-estimated
    /// by Monte Carlo from the fitted parameters.
    Oracle { n_mc: usize },
}

impl<S: Scalar> Default for Tracking<S> {
    fn default() -> Self {
        Tracking::Oracle { n_mc: DEFAULT_DELTA_SAMPLES }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig<S: Scalar> {
    pub iterations: usize,
    pub gso: bool,
    pub audit: bool,
    pub seed: u64,
    pub tracking: Tracking<S>,
    pub keep_messages: bool,
}

impl<S: Scalar> RunConfig<S> {
    pub fn new(iterations: usize, tracking: Tracking<S>) -> Self {
        Self { iterations, gso: true, audit: false, seed: 0, tracking, keep_messages: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PortMetrics {
    pub port: usize,
    /// MSE of the Φ-side posterior estimate of `X_k`.
    pub mse: f64,
    pub ber: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Snapshot<S: Scalar> {
    pub xi_out: Vec<EstimateMessage<S>>,
    pub x_out: Vec<EstimateMessage<S>>,
    pub xi_in: Vec<EstimateMessage<S>>,
    pub x_in: Vec<EstimateMessage<S>>,
}

#[derive(Clone, Debug)]
pub struct Trajectory<S: Scalar> {
    /// `metrics[t - 1][k]`.
    pub metrics: Vec<Vec<PortMetrics>>,
    /// Iteration at which the run was cut short.
    pub diverged: Option<usize>,
    pub audits: Vec<AuditReport>,
    pub ledger: Option<ErrorLedger<S>>,
    pub snapshots: Vec<Snapshot<S>>,
    /// Final Φ-side posterior estimate of every `X_k`.
    pub estimates: Vec<DMatrix<S>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRow {
    pub trial: usize,
    pub t: usize,
    pub port: usize,
    pub mse: f64,
    pub ber: Option<f64>,
    pub flags: String,
}

impl<S: Scalar> Trajectory<S> {
    pub fn rows(&self, trial: usize) -> Vec<TrajectoryRow> {
        let mut rows = Vec::new();
        for (i, it) in self.metrics.iter().enumerate() {
            for m in it {
                rows.push(TrajectoryRow {
                    trial,
                    t: i + 1,
                    port: m.port + 1,
                    mse: m.mse,
                    ber: m.ber,
                    flags: String::new(),
                });
            }
        }
        if let Some(t) = self.diverged {
            rows.push(TrajectoryRow { trial, t, port: 0, mse: f64::NAN, ber: None, flags: "diverged".into() });
        }
        rows
    }

    pub fn write_csv<W: Write>(&self, trial: usize, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in self.rows(trial) {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn mse(&self, port: usize) -> Vec<f64> {
        self.metrics.iter().map(|m| m[port].mse).collect()
    }

    pub fn ber(&self, port: usize) -> Vec<Option<f64>> {
        self.metrics.iter().map(|m| m[port].ber).collect()
    }
}

fn check_truth<S: Scalar>(graph: &SystemGraph<S>, truth: &Truth<S>) -> Result<()> {
    let k = graph.ports();
    if truth.x.len() != k || truth.xi.len() != k {
        return Err(Error::Dimension(format!(
            "truth has {} / {} variables for {k} ports",
            truth.x.len(),
            truth.xi.len()
        )));
    }
    for p in 0..k {
        let shape = (graph.dim(p), graph.m);
        if truth.x[p].shape() != shape || truth.xi[p].shape() != shape {
            return Err(Error::Dimension(format!("truth at port {} is not {shape:?}", p + 1)));
        }
    }
    for c in &graph.constraints {
        if let Some(o) = c.prototype.observation() {
            let obs = truth
                .observations
                .get(o)
                .ok_or_else(|| Error::Config(format!("constraint '{}' needs observation {o}", c.name)))?;
            if obs.shape() != truth.x[c.ports[0]].shape() {
                return Err(Error::Dimension(format!("observation {o} does not match port {}", c.ports[0] + 1)));
            }
        }
    }
    Ok(())
}

fn finite<S: Scalar>(m: &DMatrix<S>) -> bool {
    m.iter().all(|v| v.re_f64().is_finite() && v.im_f64().is_finite())
}

fn fitted<S: Scalar>(truth: &DMatrix<S>, values: &DMatrix<S>) -> Result<GsParams<S>> {
    let mut p = gs_fit(truth, values)?.params;
    p.clip_sigma();
    Ok(p)
}

fn messages<S: Scalar>(
    values: &[DMatrix<S>],
    gs: &[GsParams<S>],
    domain: Domain,
    flow: Flow,
    t: usize,
) -> Vec<EstimateMessage<S>> {
    values
        .iter()
        .zip(gs)
        .enumerate()
        .map(|(p, (v, g))| EstimateMessage { values: v.clone(), gs: g.clone(), port: p, domain, flow, iteration: t })
        .collect()
}

/// Run the iterative process: every iteration applies all Γ-side
/// estimators, the adjoint transforms, all Φ-side estimators and the
/// forward transforms, starting from all-zero inputs.
pub fn run<S: Scalar>(graph: &SystemGraph<S>, truth: &Truth<S>, cfg: &RunConfig<S>) -> Result<Trajectory<S>> {
    require_valid(graph)?;
    check_truth(graph, truth)?;
    if cfg.iterations == 0 {
        return Err(Error::Config("run needs at least one iteration".into()));
    }
    if let Tracking::Predicted(se) = &cfg.tracking {
        if se.iterations() < cfg.iterations || se.m != graph.m {
            return Err(Error::Config(format!(
                "state evolution covers {} iterations at M = {}, run needs {} at M = {}",
                se.iterations(),
                se.m,
                cfg.iterations,
                graph.m
            )));
        }
        if se.steps.iter().any(|s| s.deltas.len() != graph.constraints.len()) {
            return Err(Error::Config("state evolution was run on a different graph".into()));
        }
    }
    let k = graph.ports();
    let m = graph.m;
    let mut xi_in: Vec<DMatrix<S>> = (0..k).map(|p| DMatrix::zeros(graph.dim(p), m)).collect();
    let mut x_in = xi_in.clone();
    let mut ledger = if cfg.audit {
        ErrorLedger::new(truth.xi.iter().cloned().zip(truth.x.iter().cloned()).collect(), cfg.iterations)
    } else {
        ErrorLedger::disabled()
    };
    let prior_power: Vec<f64> = truth.x.iter().map(power).collect();
    let mut traj = Trajectory {
        metrics: Vec::with_capacity(cfg.iterations),
        diverged: None,
        audits: Vec::new(),
        ledger: None,
        snapshots: Vec::new(),
        estimates: Vec::new(),
    };
    let mut posterior = x_in.clone();

    'iter: for t in 1..=cfg.iterations {
        let mut xi_out = xi_in.clone();
        let mut x_out = x_in.clone();
        let mut gs_store = [vec![GsParams::zeros(m); k], vec![GsParams::zeros(m); k]];
        for side in [Side::Gamma, Side::Phi] {
            let (inputs, truths, domain) = match side {
                Side::Gamma => (&xi_in, &truth.xi, Domain::Xi),
                Side::Phi => (&x_in, &truth.x, Domain::X),
            };
            for ci in graph.side(side) {
                let c = &graph.constraints[ci];
                let gs: Vec<GsParams<S>> = match &cfg.tracking {
                    Tracking::Predicted(se) => c.ports.iter().map(|&p| se.input_gs(t, p, side)).collect(),
                    Tracking::Oracle { .. } => {
                        c.ports.iter().map(|&p| fitted(&truths[p], &inputs[p])).collect::<Result<_>>()?
                    }
                };
                let gs_refs: Vec<&GsParams<S>> = gs.iter().collect();
                let vals: Vec<&DMatrix<S>> = c.ports.iter().map(|&p| &inputs[p]).collect();
                let obs = c.prototype.observation().map(|o| &truth.observations[o]);
                let post = c.prototype.evaluate(&vals, &gs_refs, &c.prototype.physical_layout(), obs)?;
                let deltas: Option<Vec<DMatrix<S>>> = match (&cfg.tracking, cfg.gso) {
                    (_, false) => None,
                    (Tracking::Predicted(se), true) => Some(
                        (0..c.ports.len())
                            .map(|pos| se.delta(t, ci, pos).cloned().unwrap_or_else(|| DMatrix::zeros(m, m)))
                            .collect(),
                    ),
                    (Tracking::Oracle { n_mc }, true) => Some(
                        estimate_delta(&c.prototype, &gs_refs, *n_mc, derive_seed(cfg.seed, &[t as u64, ci as u64]))?
                            .deltas,
                    ),
                };
                for (pos, &p) in c.ports.iter().enumerate() {
                    let out = match &deltas {
                        Some(d) => &post[pos] - &inputs[p] * &d[pos],
                        None => post[pos].clone(),
                    };
                    if cfg.audit {
                        let z_in = gs_fit(&truths[p], &inputs[p])?.error;
                        let z_out = gs_fit(&truths[p], &out)?.error;
                        ledger.record(p, domain, z_in, z_out)?;
                    }
                    gs_store[usize::from(side == Side::Phi)][p] = gs[pos].clone();
                    match side {
                        Side::Gamma => xi_out[p] = out,
                        Side::Phi => {
                            x_out[p] = out;
                            posterior[p] = post[pos].clone();
                        }
                    }
                }
            }
        }

        let mut row = Vec::with_capacity(k);
        for p in 0..k {
            if !finite(&xi_out[p]) || !finite(&x_out[p]) || !finite(&posterior[p]) {
                traj.diverged = Some(t);
                break 'iter;
            }
            let e = mse_total(&posterior[p], &truth.x[p]);
            if prior_power[p] > 0.0 && e > DIVERGENCE_RATIO * prior_power[p] {
                traj.diverged = Some(t);
                break 'iter;
            }
            let discrete =
                graph.owner(p, Side::Phi).and_then(|(ci, _)| graph.constraints[ci].prototype.discrete_prior());
            let b = match discrete {
                Some(_) => Some(ber(&hard_decide(&posterior[p]), &truth.x[p])?),
                None => None,
            };
            row.push(PortMetrics { port: p, mse: e, ber: b });
        }
        traj.metrics.push(row);

        let next_x: Vec<DMatrix<S>> = (0..k).map(|p| graph.transforms[p].adjoint(&xi_out[p])).collect::<Result<_>>()?;
        let next_xi: Vec<DMatrix<S>> = (0..k).map(|p| graph.transforms[p].forward(&x_out[p])).collect::<Result<_>>()?;
        if cfg.keep_messages {
            let [g_gamma, g_phi] = &gs_store;
            let fit_all = |truths: &[DMatrix<S>], vals: &[DMatrix<S>]| -> Result<Vec<GsParams<S>>> {
                truths.iter().zip(vals).map(|(x, v)| fitted(x, v)).collect()
            };
            traj.snapshots.push(Snapshot {
                xi_in: messages(&xi_in, g_gamma, Domain::Xi, Flow::In, t - 1),
                x_in: messages(&x_in, g_phi, Domain::X, Flow::In, t - 1),
                xi_out: messages(&xi_out, &fit_all(&truth.xi, &xi_out)?, Domain::Xi, Flow::Out, t),
                x_out: messages(&x_out, &fit_all(&truth.x, &x_out)?, Domain::X, Flow::Out, t),
            });
        }
        x_in = next_x;
        xi_in = next_xi;
    }

    if cfg.audit {
        let done = traj.metrics.len();
        for t in 1..=done {
            traj.audits.push(audit_orthogonality(&ledger, t)?);
        }
        traj.ledger = Some(ledger);
    }
    traj.estimates = posterior;
    Ok(traj)
}
