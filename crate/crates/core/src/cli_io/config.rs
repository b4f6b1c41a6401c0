use crate::error::{Error, Result};
use crate::relay::{Method, RelayConfig, TrackingMode};
use crate::smv::{OperatorChoice, SmvConfig};
use crate::state_evolution::SeOptions;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Relay,
    SmvSt,
    CustomGraph,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrRd,
    SnrSr,
    CrDb,
    Alpha,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrRd => "snr_rd",
            SweepAxis::SnrSr => "snr_sr",
            SweepAxis::CrDb => "cr_db",
            SweepAxis::Alpha => "alpha",
        }
    }
}

/// A detector to simulate, or the state-evolution prediction of A-OAMP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodChoice {
    Aoamp,
    GipNoGso,
    Method1,
    Method2,
    Method3,
    SePredict,
    PerStream,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::SePredict => "se-predict",
            other => other.simulated().map(Method::name).unwrap_or("se-predict"),
        }
    }

    /// The simulated detector, `None` for the prediction.
    pub fn simulated(self) -> Option<Method> {
        Some(match self {
            MethodChoice::Aoamp => Method::Aoamp,
            MethodChoice::GipNoGso => Method::GipNoGso,
            MethodChoice::Method1 => Method::Method1,
            MethodChoice::Method2 => Method::Method2,
            MethodChoice::Method3 => Method::Method3,
            MethodChoice::PerStream => Method::PerStream,
            MethodChoice::SePredict => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackingChoice {
    #[default]
    Predicted,
    Oracle,
}

/// A number, or `"inf"` for `+∞`. TOML's own `inf` literal is accepted too.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum Value {
    Num(f64),
    Text(InfText),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
enum InfText {
    #[serde(rename = "inf", alias = "+inf", alias = "infinity")]
    Inf,
}

impl Value {
    fn get(self) -> f64 {
        match self {
            Value::Num(v) => v,
            Value::Text(InfText::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: SweepAxis,
    values: Vec<Value>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRelay {
    n_s: Option<usize>,
    n_r: Option<usize>,
    n_d: Option<usize>,
    m: Option<usize>,
    snr_sr_db: Option<f64>,
    snr_rd_db: Option<f64>,
    kappa_sr: Option<f64>,
    kappa_rd: Option<f64>,
    cr_db: Option<Value>,
    alpha: Option<f64>,
    operator: Option<OperatorChoice>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSmv {
    n: Option<usize>,
    rows: Option<usize>,
    m: Option<usize>,
    kappa: Option<f64>,
    snr_db: Option<f64>,
    operator: Option<OperatorChoice>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSe {
    n_mc: Option<usize>,
    delta_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    scenario: Scenario,
    #[serde(default = "one")]
    scale: usize,
    trials: usize,
    #[serde(default = "default_iterations")]
    iterations: usize,
    #[serde(default)]
    seed: u64,
    methods: Vec<MethodChoice>,
    #[serde(default)]
    complex: bool,
    #[serde(default)]
    tracking: TrackingChoice,
    #[serde(default = "default_oracle_samples")]
    oracle_samples: usize,
    output: Option<PathBuf>,
    sweep: RawSweep,
    relay: Option<RawRelay>,
    smv: Option<RawSmv>,
    se: Option<RawSe>,
}

fn one() -> usize {
    1
}

fn default_iterations() -> usize {
    30
}

fn default_oracle_samples() -> usize {
    100_000
}

/// Base system of an experiment before the sweep axis is applied.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseSystem {
    Relay(RelayConfig),
    Smv(SmvConfig),
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub base: BaseSystem,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub trials: usize,
    pub iterations: usize,
    pub seed: u64,
    pub methods: Vec<MethodChoice>,
    pub complex: bool,
    pub tracking: TrackingMode,
    pub se: SeOptions,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Relay configuration at sweep value `v`.
    pub fn relay_at(&self, v: f64) -> Option<RelayConfig> {
        let BaseSystem::Relay(base) = &self.base else { return None };
        let mut cfg = base.clone();
        match self.axis {
            SweepAxis::SnrRd => cfg.snr_rd_db = v,
            SweepAxis::SnrSr => cfg.snr_sr_db = v,
            SweepAxis::CrDb => cfg.cr_db = v,
            SweepAxis::Alpha => cfg.alpha = Some(v),
        }
        Some(cfg)
    }

    /// Single-transform configuration at sweep value `v` (the SNR axis).
    pub fn smv_at(&self, v: f64, seed: u64) -> Option<SmvConfig> {
        let BaseSystem::Smv(base) = &self.base else { return None };
        Some(SmvConfig { snr_db: v, seed, ..base.clone() })
    }
}

/// 1-based line of `key` inside `[section]` (top level when `None`), for
/// error messages.
fn line_of(text: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    for (i, line) in text.lines().enumerate() {
        let l = line.trim();
        if let Some(name) = l.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = Some(name.trim().to_string());
            continue;
        }
        let k = l.split('=').next().unwrap_or("").trim();
        if k == key && current.as_deref() == section {
            return Some(i + 1);
        }
    }
    None
}

struct Issues<'a> {
    text: &'a str,
    list: Vec<String>,
}

impl Issues<'_> {
    fn push(&mut self, section: Option<&str>, key: &str, msg: impl AsRef<str>) {
        let path = match section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        let at = line_of(self.text, section, key).map(|l| format!(" (line {l})")).unwrap_or_default();
        self.list.push(format!("{path}{at}: {}", msg.as_ref()));
    }
}

/// Parse and validate an experiment file. Unknown keys are errors.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let mut issues = Issues { text, list: Vec::new() };

    if raw.scenario == Scenario::CustomGraph {
        issues.push(None, "scenario", "custom graphs are built through the library API, not from a config file");
    }
    if raw.scale == 0 {
        issues.push(None, "scale", "must be at least 1");
    }
    if raw.trials == 0 {
        issues.push(None, "trials", "must be at least 1");
    }
    if raw.iterations == 0 {
        issues.push(None, "iterations", "must be at least 1");
    }
    if raw.methods.is_empty() {
        issues.push(None, "methods", "must list at least one method");
    }
    if raw.sweep.values.is_empty() {
        issues.push(Some("sweep"), "values", "sweep needs at least one value");
    }
    let values: Vec<f64> = raw.sweep.values.iter().map(|v| v.get()).collect();
    if values.iter().any(|v| v.is_nan()) {
        issues.push(Some("sweep"), "values", "NaN is not a sweep value");
    }
    if raw.sweep.axis != SweepAxis::CrDb && values.iter().any(|v| v.is_infinite()) {
        issues.push(Some("sweep"), "values", format!("only the cr_db axis accepts inf, not {}", raw.sweep.axis.name()));
    }

    let reference = RelayConfig::scaled(raw.scale.max(1));
    let base = match raw.scenario {
        Scenario::Relay | Scenario::CustomGraph => {
            if raw.smv.is_some() {
                issues.push(None, "smv", "only valid for the smv-st scenario");
            }
            let r = raw.relay.unwrap_or_default();
            let cfg = RelayConfig {
                n_s: r.n_s.unwrap_or(reference.n_s),
                n_r: r.n_r.unwrap_or(reference.n_r),
                n_d: r.n_d.unwrap_or(reference.n_d),
                m: r.m.unwrap_or(reference.m),
                snr_sr_db: r.snr_sr_db.unwrap_or(reference.snr_sr_db),
                snr_rd_db: r.snr_rd_db.unwrap_or(reference.snr_rd_db),
                kappa_sr: r.kappa_sr.unwrap_or(reference.kappa_sr),
                kappa_rd: r.kappa_rd.unwrap_or(reference.kappa_rd),
                cr_db: r.cr_db.map(Value::get).unwrap_or(reference.cr_db),
                alpha: r.alpha,
                operator: r.operator.unwrap_or(reference.operator),
            };
            if cfg.alpha.is_some() && cfg.m != 2 {
                issues.push(Some("relay"), "alpha", format!("stream correlation needs m = 2, got m = {}", cfg.m));
            }
            if raw.sweep.axis == SweepAxis::Alpha && cfg.m != 2 {
                issues.push(Some("sweep"), "axis", format!("an alpha sweep needs relay.m = 2, got {}", cfg.m));
            }
            if raw.sweep.axis == SweepAxis::Alpha && values.iter().any(|a| !(0.0..=1.0).contains(a)) {
                issues.push(Some("sweep"), "values", "alpha values must lie in [0, 1]");
            }
            let alpha_ok = cfg.alpha.is_none() || cfg.m == 2;
            if let (true, Err(e)) = (alpha_ok, cfg.validate()) {
                issues.push(None, "relay", e.to_string());
            }
            BaseSystem::Relay(cfg)
        }
        Scenario::SmvSt => {
            if raw.relay.is_some() {
                issues.push(None, "relay", "only valid for the relay scenario");
            }
            if raw.sweep.axis != SweepAxis::SnrRd {
                issues.push(Some("sweep"), "axis", "the smv-st scenario sweeps its channel SNR through snr_rd");
            }
            for m in &raw.methods {
                if !matches!(m, MethodChoice::Aoamp | MethodChoice::GipNoGso | MethodChoice::SePredict) {
                    issues.push(None, "methods", format!("{} needs the relay scenario", m.name()));
                }
            }
            let s = raw.smv.unwrap_or_default();
            let cfg = SmvConfig {
                n: s.n.unwrap_or(reference.n_s),
                rows: s.rows.unwrap_or(reference.n_r),
                m: s.m.unwrap_or(1),
                kappa: s.kappa.unwrap_or(reference.kappa_sr),
                snr_db: s.snr_db.unwrap_or(reference.snr_rd_db),
                operator: s.operator.unwrap_or_default(),
                seed: 0,
            };
            if cfg.rows == 0 || cfg.rows > cfg.n || cfg.m == 0 {
                issues.push(
                    Some("smv"),
                    "rows",
                    format!("need 1 <= rows <= n and m >= 1 (rows {}, n {})", cfg.rows, cfg.n),
                );
            }
            if !(cfg.kappa >= 1.0) {
                issues.push(Some("smv"), "kappa", "must be at least 1");
            }
            BaseSystem::Smv(cfg)
        }
    };
    if raw.methods.contains(&MethodChoice::PerStream) {
        if let BaseSystem::Relay(cfg) = &base {
            if cfg.alpha.is_none() && raw.sweep.axis != SweepAxis::Alpha {
                issues.push(
                    None,
                    "methods",
                    "per-stream compares against a correlated source; set relay.alpha or sweep alpha",
                );
            }
        }
    }

    let defaults = SeOptions::default();
    let se_raw = raw.se.unwrap_or_default();
    let se = SeOptions {
        n_mc: se_raw.n_mc.unwrap_or(defaults.n_mc),
        delta_samples: se_raw.delta_samples.unwrap_or(defaults.delta_samples),
        ..defaults
    };
    if se.n_mc < 1000 {
        issues.push(Some("se"), "n_mc", "needs at least 1000 samples");
    }
    if se.delta_samples < 1000 {
        issues.push(Some("se"), "delta_samples", "needs at least 1000 samples");
    }
    if raw.tracking == TrackingChoice::Oracle && raw.oracle_samples < 1000 {
        issues.push(None, "oracle_samples", "needs at least 1000 samples");
    }
    let tracking = match raw.tracking {
        TrackingChoice::Predicted => TrackingMode::Predicted,
        TrackingChoice::Oracle => TrackingMode::Oracle { n_mc: raw.oracle_samples },
    };

    if !issues.list.is_empty() {
        return Err(Error::Config(issues.list.join("; ")));
    }
    let mut methods = Vec::new();
    for m in raw.methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    Ok(ExperimentSpec {
        scenario: raw.scenario,
        base,
        axis: raw.sweep.axis,
        values,
        trials: raw.trials,
        iterations: raw.iterations,
        seed: raw.seed,
        methods,
        complex: raw.complex,
        tracking,
        se,
        output: raw.output,
    })
}

/// Annotated example covering every key.
pub const EXAMPLE_CONFIG: &str = r#"# Clipped relay, BER/MSE against the relay-destination SNR.
scenario = "relay"          # relay | smv-st
scale = 8                   # N_s = 8096 / scale, rounded to a power of two
trials = 200
iterations = 30
seed = 1
methods = ["aoamp", "method3", "method2", "method1", "gip-no-gso", "se-predict"]
complex = false             # real BPSK with a Hartley transform, or complex with the DFT
tracking = "predicted"      # GS parameters from state evolution, or "oracle" (fitted per trial)
oracle_samples = 100000     # Monte-Carlo samples for Δ under oracle tracking
# output = "results"        # output directory; the --out-dir flag takes precedence

[sweep]
axis = "snr_rd"             # snr_rd | snr_sr | cr_db | alpha
values = [8, 11, 14, 17, 20]  # cr_db also takes inf (or "inf")

[relay]                     # every key optional; defaults follow `scale`
snr_sr_db = 11.0
kappa_sr = 5.0
kappa_rd = 5.0
cr_db = 0.0
m = 1
# alpha = 0.1               # stream correlation, needs m = 2
# n_s = 1024
# n_r = 819
# n_d = 655
operator = "dft"            # dft | haar

[se]
n_mc = 100000               # samples per state-evolution step
delta_samples = 10000       # samples for the Monte-Carlo Δ of nonlinear nodes
"#;
