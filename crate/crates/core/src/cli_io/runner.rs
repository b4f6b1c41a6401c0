use super::config::{BaseSystem, ExperimentSpec, MethodChoice};
use crate::engine::{run, RunConfig, Tracking};
use crate::error::{Error, Result};
use crate::relay::{mean_stderr, method_se, run_method, Method, MethodSettings, TrackingMode, PORT_S};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::smv::{build_smv, SmvConfig};
use crate::state_evolution::{run_se, SeOptions, SeTrajectory};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const SCHEMA_HEADER: &str = "# oamp-sim results schema v1";
pub const COMBINED_FILE: &str = "results.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mse,
    Ber,
    SeMse,
    SeBer,
}

/// One line of the results CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub axis: String,
    pub sweep_value: f64,
    pub t: usize,
    pub metric: Metric,
    pub value: f64,
    pub stderr: Option<f64>,
    /// Trials behind `value`; 0 for predictions.
    pub trials: usize,
    pub flags: String,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentSummary {
    pub point_files: Vec<PathBuf>,
    pub combined: PathBuf,
    pub rows: usize,
    /// Points read back from earlier runs instead of recomputed.
    pub reused: usize,
}

pub fn write_rows<W: Write>(mut w: W, rows: &[ResultRow]) -> Result<()> {
    writeln!(w, "{SCHEMA_HEADER}")?;
    let mut wr = csv::Writer::from_writer(w);
    if rows.is_empty() {
        wr.write_record(["method", "axis", "sweep_value", "t", "metric", "value", "stderr", "trials", "flags"])?;
    }
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != SCHEMA_HEADER {
        return Err(Error::Config(format!("{} does not start with the schema header", path.display())));
    }
    let mut rd = csv::Reader::from_reader(reader);
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Write through a temporary file so that a point file is either absent or
/// complete.
fn write_atomic(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let tmp = path.with_extension("csv.partial");
    {
        let f = fs::File::create(&tmp)?;
        let mut w = std::io::BufWriter::new(f);
        write_rows(&mut w, rows)?;
        w.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn point_file(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("point_{index:03}.csv"))
}

fn flags(diverged: usize, trials: usize) -> String {
    if diverged == 0 {
        String::new()
    } else {
        format!("diverged={diverged}/{trials}")
    }
}

fn settings(spec: &ExperimentSpec, seed: u64) -> MethodSettings {
    MethodSettings {
        iterations: spec.iterations,
        trials: spec.trials,
        seed,
        se: spec.se,
        tracking: spec.tracking,
        audit: false,
    }
}

fn se_rows<S: Scalar>(se: &SeTrajectory<S>, port: usize, label: (&str, &str, f64)) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for step in &se.steps {
        let p = &step.ports[port];
        let flag = if step.degenerate { "degenerate" } else { "" };
        for (metric, value) in [(Metric::SeMse, Some(p.mse)), (Metric::SeBer, p.ber)] {
            rows.push(ResultRow {
                method: label.0.into(),
                axis: label.1.into(),
                sweep_value: label.2,
                t: step.t,
                metric,
                value: value.unwrap_or(f64::NAN),
                stderr: None,
                trials: 0,
                flags: flag.into(),
            });
        }
    }
    rows
}

/// Rows for one sweep point of a relay experiment.
fn relay_point<S: Scalar>(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<Vec<ResultRow>> {
    let cfg = spec.relay_at(value).ok_or_else(|| Error::Config("not a relay experiment".into()))?;
    let axis = spec.axis.name();
    let s = settings(spec, seed);
    let mut rows = Vec::new();
    for &choice in &spec.methods {
        log::info!("{axis} = {value}: {}", choice.name());
        match choice.simulated() {
            None => {
                let se = method_se::<S>(&cfg, Method::Aoamp, &s)?;
                rows.extend(se_rows(&se, PORT_S, (choice.name(), axis, value)));
            }
            Some(method) => {
                let out = run_method::<S>(&cfg, method, &s)?;
                for t in 1..=spec.iterations {
                    let d = out.diverged_by(t);
                    let live = out.trials.len() - d;
                    let (mse, mse_se) = out.mse(t);
                    let (ber, ber_se) = out.ber(t);
                    let f = flags(d, out.trials.len());
                    for (metric, v, e, n) in
                        [(Metric::Mse, mse, mse_se, live), (Metric::Ber, ber, ber_se, out.trials.len())]
                    {
                        rows.push(ResultRow {
                            method: choice.name().into(),
                            axis: axis.into(),
                            sweep_value: value,
                            t,
                            metric,
                            value: v,
                            stderr: e.is_finite().then_some(e),
                            trials: n,
                            flags: f.clone(),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Rows for one sweep point of a single-transform experiment. The state
/// evolution is taken from the first trial's channel.
fn smv_point<S: Scalar>(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<Vec<ResultRow>> {
    let axis = spec.axis.name();
    let cfg_for = |trial: usize| -> Result<SmvConfig> {
        spec.smv_at(value, derive_seed(seed, &[trial as u64]))
            .ok_or_else(|| Error::Config("not an smv-st experiment".into()))
    };
    let mut rows = Vec::new();
    for &choice in &spec.methods {
        log::info!("{axis} = {value}: {}", choice.name());
        let gso = choice != MethodChoice::GipNoGso;
        let (graph0, _) = build_smv::<S>(&cfg_for(0)?)?;
        let se_seed = derive_seed(seed, &[u64::MAX, u64::from(gso)]);
        let opts = SeOptions { gso, ..spec.se };
        let se = Arc::new(run_se(&graph0, spec.iterations, &opts, se_seed)?);
        if choice == MethodChoice::SePredict {
            rows.extend(se_rows(&se, 0, (choice.name(), axis, value)));
            continue;
        }
        let tracking = match spec.tracking {
            TrackingMode::Predicted => Tracking::Predicted(se.clone()),
            TrackingMode::Oracle { n_mc } => Tracking::Oracle { n_mc },
        };
        let trajs = (0..spec.trials)
            .into_par_iter()
            .map(|i| {
                let cfg = cfg_for(i)?;
                let (graph, truth) = build_smv::<S>(&cfg)?;
                let rc = RunConfig {
                    iterations: spec.iterations,
                    gso,
                    audit: false,
                    seed: cfg.seed,
                    tracking: tracking.clone(),
                    keep_messages: false,
                };
                run(&graph, &truth, &rc)
            })
            .collect::<Result<Vec<_>>>()?;
        for t in 1..=spec.iterations {
            let d = trajs.iter().filter(|tr| tr.diverged.is_some_and(|x| x <= t)).count();
            let (mse, mse_se) = mean_stderr(trajs.iter().filter_map(|tr| tr.metrics.get(t - 1).map(|m| m[0].mse)));
            let (ber, ber_se) =
                mean_stderr(trajs.iter().map(|tr| tr.metrics.get(t - 1).and_then(|m| m[0].ber).unwrap_or(0.5)));
            let f = flags(d, trajs.len());
            for (metric, v, e, n) in
                [(Metric::Mse, mse, mse_se, trajs.len() - d), (Metric::Ber, ber, ber_se, trajs.len())]
            {
                rows.push(ResultRow {
                    method: choice.name().into(),
                    axis: axis.into(),
                    sweep_value: value,
                    t,
                    metric,
                    value: v,
                    stderr: e.is_finite().then_some(e),
                    trials: n,
                    flags: f.clone(),
                });
            }
        }
    }
    Ok(rows)
}

fn point_rows<S: Scalar>(spec: &ExperimentSpec, value: f64, seed: u64) -> Result<Vec<ResultRow>> {
    match spec.base {
        BaseSystem::Relay(_) => relay_point::<S>(spec, value, seed),
        BaseSystem::Smv(_) => smv_point::<S>(spec, value, seed),
    }
}

/// Run every sweep point in order, writing `point_NNN.csv` after each and a
/// combined `results.csv` at the end. With `resume`, complete point files
/// from an earlier run are kept.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path, resume: bool) -> Result<ExperimentSummary> {
    fs::create_dir_all(out_dir)?;
    let mut summary = ExperimentSummary::default();
    let mut all = Vec::new();
    for (i, &value) in spec.values.iter().enumerate() {
        let path = point_file(out_dir, i);
        let reused = if resume && path.exists() { read_rows(&path).ok() } else { None };
        let rows = match reused {
            Some(rows) => {
                log::info!("reusing {}", path.display());
                summary.reused += 1;
                rows
            }
            None => {
                let seed = derive_seed(spec.seed, &[i as u64]);
                let rows = if spec.complex {
                    point_rows::<Complex64>(spec, value, seed)?
                } else {
                    point_rows::<f64>(spec, value, seed)?
                };
                write_atomic(&path, &rows)?;
                rows
            }
        };
        summary.point_files.push(path);
        all.extend(rows);
    }
    let combined = out_dir.join(COMBINED_FILE);
    write_atomic(&combined, &all)?;
    summary.rows = all.len();
    summary.combined = combined;
    Ok(summary)
}
