use super::method1::method1_system;
use super::model::{ClipTreatment, RelayConfig, RelayModel, PORT_S};
use crate::engine::{run, PortMetrics, RunConfig, SystemGraph, Tracking, Trajectory, Truth};
use crate::error::Result;
use crate::gs_model::AuditReport;
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::state_evolution::{run_se, SeOptions, SeTrajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Detectors compared on the relay system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Exact clipping model with per-port GSO.
    Aoamp,
    /// Exact clipping model without GSO.
    GipNoGso,
    /// Clipping ignored; whitened single-transform detection.
    Method1,
    /// Clipping as additive IID Gaussian noise.
    Method2,
    /// Clipping as a Bussgang gain plus uncorrelated Gaussian distortion.
    Method3,
    /// Exact clipping model with independent-stream source prior.
    PerStream,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Aoamp => "aoamp",
            Method::GipNoGso => "gip-no-gso",
            Method::Method1 => "method1",
            Method::Method2 => "method2",
            Method::Method3 => "method3",
            Method::PerStream => "per-stream",
        }
    }

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackingMode {
    /// GS parameters and `Δ` from state evolution, shared by all trials.
    Predicted,
    /// Fitted against the truth each iteration, `Δ` from `n_mc` samples.
    Oracle { n_mc: usize },
}

#[derive(Clone, Debug)]
pub struct MethodSettings {
    pub iterations: usize,
    pub trials: usize,
    pub seed: u64,
    pub se: SeOptions,
    pub tracking: TrackingMode,
    pub audit: bool,
}

impl MethodSettings {
    pub fn new(iterations: usize, trials: usize, seed: u64) -> Self {
        Self { iterations, trials, seed, se: SeOptions::default(), tracking: TrackingMode::Predicted, audit: false }
    }
}

/// Per-trial source-port metrics of one method at one operating point.
#[derive(Clone, Debug)]
pub struct MethodOutcome<S: Scalar> {
    pub method: Method,
    /// `trials[i][t - 1]`, truncated at divergence.
    pub trials: Vec<Vec<PortMetrics>>,
    pub diverged: Vec<Option<usize>>,
    pub audits: Vec<Vec<AuditReport>>,
    /// State evolution used for tracking, when there is one.
    pub se: Option<Arc<SeTrajectory<S>>>,
    pub iterations: usize,
}

impl<S: Scalar> MethodOutcome<S> {
    /// Mean and standard error of the source MSE at iteration `t` over
    /// trials that had not diverged by then.
    pub fn mse(&self, t: usize) -> (f64, f64) {
        mean_stderr(self.trials.iter().filter_map(|m| m.get(t - 1).map(|p| p.mse)))
    }

    /// Mean and standard error of the source BER at iteration `t`. Trials
    /// that diverged count as 0.5 from then on.
    pub fn ber(&self, t: usize) -> (f64, f64) {
        mean_stderr(self.trials.iter().map(|m| m.get(t - 1).and_then(|p| p.ber).unwrap_or(0.5)))
    }

    pub fn diverged_by(&self, t: usize) -> usize {
        self.diverged.iter().filter(|d| d.is_some_and(|d| d <= t)).count()
    }
}

pub(crate) fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn trial_seed(seed: u64, trial: usize) -> u64 {
    derive_seed(seed, &[trial as u64])
}

fn engine_config<S: Scalar>(
    s: &MethodSettings,
    se: &Option<Arc<SeTrajectory<S>>>,
    gso: bool,
    seed: u64,
) -> RunConfig<S> {
    let tracking = match (s.tracking, se) {
        (TrackingMode::Predicted, Some(se)) => Tracking::Predicted(se.clone()),
        (TrackingMode::Oracle { n_mc }, _) => Tracking::Oracle { n_mc },
        (TrackingMode::Predicted, None) => Tracking::default(),
    };
    RunConfig { iterations: s.iterations, gso, audit: s.audit, seed, tracking, keep_messages: false }
}

fn source_metrics<S: Scalar>(traj: &Trajectory<S>, port: usize) -> Vec<PortMetrics> {
    traj.metrics.iter().map(|m| m[port].clone()).collect()
}

/// Model assumed by the detector and its treatment of the clipping node.
fn detector_model<S: Scalar>(cfg: &RelayConfig, method: Method) -> Result<(RelayModel<S>, ClipTreatment)> {
    Ok(match method {
        Method::Method2 => (RelayModel::new(cfg)?, ClipTreatment::Awgn),
        Method::Method3 => (RelayModel::new(cfg)?, ClipTreatment::Bussgang),
        Method::PerStream => (RelayModel::with_alpha(cfg, cfg.alpha.map(|_| 0.5))?, ClipTreatment::Exact),
        _ => (RelayModel::new(cfg)?, ClipTreatment::Exact),
    })
}

/// State evolution of `method` as used for tracking by [`run_method`]. The
/// channel spectra are those of the first trial.
pub fn method_se<S: Scalar>(
    cfg: &RelayConfig,
    method: Method,
    settings: &MethodSettings,
) -> Result<Arc<SeTrajectory<S>>> {
    let se_seed = derive_seed(settings.seed, &[u64::MAX, method.tag()]);
    let opts = SeOptions { gso: method != Method::GipNoGso, ..settings.se };
    let data_model = RelayModel::<S>::new(cfg)?;
    let first = data_model.realize(trial_seed(settings.seed, 0))?;
    let graph = if method == Method::Method1 {
        // the whitened channel depends on the draw; its spectrum concentrates
        // at large N
        method1_system(&data_model, &first, se_seed)?.graph
    } else {
        let (model, treatment) = detector_model::<S>(cfg, method)?;
        model.graph(&first, treatment)
    };
    Ok(Arc::new(run_se(&graph, settings.iterations, &opts, se_seed)?))
}

type TrialResult<S> = (Trajectory<S>, Option<Arc<SeTrajectory<S>>>);

/// Run `settings.trials` independent trials of `method` at `cfg`. Trial
/// `i` uses the same channels, data and noise for every method.
pub fn run_method<S: Scalar>(cfg: &RelayConfig, method: Method, settings: &MethodSettings) -> Result<MethodOutcome<S>> {
    let data_model = RelayModel::<S>::new(cfg)?;
    let predicted = settings.tracking == TrackingMode::Predicted;
    let gso = method != Method::GipNoGso;

    let results: Vec<TrialResult<S>> = if method == Method::Method1 {
        let se = if predicted { Some(method_se(cfg, method, settings)?) } else { None };
        (0..settings.trials)
            .into_par_iter()
            .map(|i| {
                let ts = trial_seed(settings.seed, i);
                let sys = method1_system(&data_model, &data_model.realize(ts)?, ts)?;
                let rc = engine_config(settings, &se, true, ts);
                Ok((run(&sys.graph, &sys.truth, &rc)?, None))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|(t, _): (Trajectory<S>, Option<()>)| (t, se.clone()))
            .collect()
    } else {
        let (model, treatment) = detector_model(cfg, method)?;
        let se = if predicted { Some(method_se(cfg, method, settings)?) } else { None };
        (0..settings.trials)
            .into_par_iter()
            .map(|i| {
                let ts = trial_seed(settings.seed, i);
                let real = data_model.realize(ts)?;
                let graph: SystemGraph<S> = model.graph(&real, treatment);
                let truth: &Truth<S> = &real.truth;
                Ok((run(&graph, truth, &engine_config(settings, &se, gso, ts))?, se.clone()))
            })
            .collect::<Result<_>>()?
    };

    let se = results.first().and_then(|r| r.1.clone());
    let mut out = MethodOutcome {
        method,
        trials: Vec::with_capacity(results.len()),
        diverged: Vec::with_capacity(results.len()),
        audits: Vec::with_capacity(results.len()),
        se,
        iterations: settings.iterations,
    };
    for (traj, _) in results {
        out.trials.push(source_metrics(&traj, PORT_S));
        out.diverged.push(traj.diverged);
        out.audits.push(traj.audits);
    }
    Ok(out)
}
