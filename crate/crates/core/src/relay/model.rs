use super::clip::{clip_moments, eta, ClipSpec};
use crate::engine::{Constraint, Side, SystemGraph, Truth};
use crate::error::{Error, Result};
use crate::estimators::{AnchorSpec, ClipNodeSpec, DiscretePrior, PairSpec, Prototype};
use crate::linops::{gaussian_matrix, sample_sources, OrthogonalOperator, SourceKind};
use crate::rng::derive_seed;
use crate::scalar::Scalar;
use crate::smv::{draw_operator, OperatorChoice};
use crate::special::{norm_cdf, norm_pdf};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const PORT_S: usize = 0;
pub const PORT_R: usize = 1;
pub const PORT_ETA: usize = 2;
pub const PORT_D: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelayConfig {
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
    pub m: usize,
    pub snr_sr_db: f64,
    pub snr_rd_db: f64,
    pub kappa_sr: f64,
    pub kappa_rd: f64,
    /// `+∞` disables clipping.
    pub cr_db: f64,
    /// Transition probability between the two streams; `None` is
    /// independent streams.
    pub alpha: Option<f64>,
    pub operator: OperatorChoice,
}

impl Default for RelayConfig {
    fn default() -> Self {
        Self::scaled(1)
    }
}

impl RelayConfig {
    /// The reference operating point (`N_s = 8096`, ratios 0.8, `κ = 5`,
    /// `SNR_sr = 11` dB, CR 0 dB) with `N_s` divided by `scale`. Scaled
    /// sizes round `N_s` to the nearest power of two.
    pub fn scaled(scale: usize) -> Self {
        let base = 8096.0 / scale.max(1) as f64;
        let n_s = if scale <= 1 { 8096 } else { 2f64.powf(base.log2().round()) as usize };
        let n_r = (0.8 * n_s as f64).round() as usize;
        let n_d = (0.8 * n_r as f64).round() as usize;
        Self {
            n_s,
            n_r,
            n_d,
            m: 1,
            snr_sr_db: 11.0,
            snr_rd_db: 14.0,
            kappa_sr: 5.0,
            kappa_rd: 5.0,
            cr_db: 0.0,
            alpha: None,
            operator: OperatorChoice::Dft,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.n_s == 0 || self.n_r == 0 || self.n_d == 0 || self.m == 0 {
            errs.push("antenna counts and M must be positive".to_string());
        }
        if !self.snr_sr_db.is_finite() || !self.snr_rd_db.is_finite() {
            errs.push("SNR values must be finite".to_string());
        }
        if !(self.kappa_sr >= 1.0) || !(self.kappa_rd >= 1.0) {
            errs.push("condition numbers must be at least 1".to_string());
        }
        if self.cr_db.is_nan() || self.cr_db == f64::NEG_INFINITY {
            errs.push("clipping ratio must be a number or +inf".to_string());
        }
        if let Some(a) = self.alpha {
            if self.m != 2 {
                errs.push(format!("alpha needs M = 2, got M = {}", self.m));
            }
            if !(0.0..=1.0).contains(&a) {
                errs.push(format!("alpha {a} outside [0, 1]"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs.join("; ")))
        }
    }

    pub fn v_sr(&self) -> f64 {
        10f64.powf(-self.snr_sr_db / 10.0)
    }

    pub fn v_rd(&self) -> f64 {
        10f64.powf(-self.snr_rd_db / 10.0)
    }

    pub fn source(&self) -> SourceKind {
        match self.alpha {
            Some(alpha) => SourceKind::CorrelatedBpsk { alpha },
            None => SourceKind::Bpsk,
        }
    }
}

/// Geometric ladder `λ_i / λ_{i+1} = κ^{1/n}` normalised to
/// `Σ λ_i² = total_power`, largest first.
pub fn gen_singular_values(n: usize, total_power: f64, kappa: f64) -> Result<Vec<f64>> {
    if !(kappa >= 1.0) {
        return Err(Error::Config(format!("condition number {kappa} must be at least 1")));
    }
    let r = kappa.powf(-1.0 / n as f64);
    let raw: Vec<f64> = (0..n).map(|i| r.powi(i as i32)).collect();
    let sum: f64 = raw.iter().map(|x| x * x).sum();
    let c = (total_power / sum).sqrt();
    Ok(raw.into_iter().map(|x| x * c).collect())
}

/// How the estimator of the clipping constraint models `X_η`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClipTreatment {
    /// Exact clipping posterior.
    Exact,
    /// `η(y) ≈ y + n_η` with IID Gaussian `n_η`.
    Awgn,
    /// `η(y) ≈ θ_B y + f` with `f` uncorrelated with `y`.
    Bussgang,
}

/// `E{clip(y₁) clip(y₂)}` for real zero-mean Gaussian `(y₁, y₂)`, by
/// trapezoid integration over `y₁` of the closed-form `E{clip(y₂) | y₁}`.
fn clip_cross_moment(var1: f64, var2: f64, cov: f64, z: f64) -> f64 {
    if z.is_infinite() {
        return cov;
    }
    let s1 = var1.sqrt();
    let rho = (cov / (s1 * var2.sqrt())).clamp(-1.0, 1.0);
    let cond_sd = (var2 * (1.0 - rho * rho)).max(0.0).sqrt();
    let cond = |y1: f64| {
        let mu = cov / var1 * y1;
        if cond_sd == 0.0 {
            return mu.clamp(-z, z);
        }
        let a = (-z - mu) / cond_sd;
        let b = (z - mu) / cond_sd;
        mu * (norm_cdf(b) - norm_cdf(a)) + cond_sd * (norm_pdf(a) - norm_pdf(b)) + z * (norm_cdf(-b) - norm_cdf(a))
    };
    let points = 20_001;
    let lim = 10.0 * s1;
    let h = 2.0 * lim / (points - 1) as f64;
    let mut acc = 0.0;
    for i in 0..points {
        let y1 = -lim + h * i as f64;
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        acc += w * y1.clamp(-z, z) * cond(y1) * norm_pdf(y1 / s1) / s1;
    }
    acc * h
}

/// Row covariance of `η(Y)` for Gaussian rows of covariance `r_y`.
fn eta_covariance<S: Scalar>(r_y: &DMatrix<S>, clip: &ClipSpec) -> DMatrix<S> {
    let m = r_y.nrows();
    let c2 = clip.scale * clip.scale;
    let parts = if S::IS_COMPLEX { 0.5 } else { 1.0 };
    DMatrix::from_fn(m, m, |i, j| {
        let vi = r_y[(i, i)].re_f64();
        if i == j {
            return S::from_re(clip_moments(vi, clip.threshold, S::IS_COMPLEX).power / c2);
        }
        let vj = r_y[(j, j)].re_f64();
        let cov = r_y[(i, j)].re_f64();
        let e = clip_cross_moment(vi * parts, vj * parts, cov * parts, clip.threshold) / parts;
        S::from_re(e / c2)
    })
}

/// Deterministic part of the relay system: channel spectra, clipping and
/// the per-node statistics the estimators need.
#[derive(Clone, Debug)]
pub struct RelayModel<S: Scalar> {
    pub cfg: RelayConfig,
    pub lambda_sr: Vec<f64>,
    pub lambda_rd: Vec<f64>,
    pub clip: ClipSpec,
    /// Analytic `E{|Y_r|²}`.
    pub power_y: f64,
    pub prior: DiscretePrior<S>,
    pub r_s: DMatrix<S>,
    pub r_r: DMatrix<S>,
    pub r_eta: DMatrix<S>,
    pub r_d: DMatrix<S>,
}

impl<S: Scalar> RelayModel<S> {
    pub fn new(cfg: &RelayConfig) -> Result<Self> {
        Self::with_alpha(cfg, cfg.alpha)
    }

    /// Model whose source prior uses `alpha` (the data may use another).
    pub fn with_alpha(cfg: &RelayConfig, alpha: Option<f64>) -> Result<Self> {
        cfg.validate()?;
        let prior: DiscretePrior<S> = match alpha {
            Some(a) => {
                if cfg.m != 2 {
                    return Err(Error::Config("alpha needs M = 2".into()));
                }
                DiscretePrior::correlated_bpsk(a)?
            }
            None => DiscretePrior::bpsk(cfg.m),
        };
        let lambda_sr = gen_singular_values(cfg.n_r.min(cfg.n_s), cfg.n_s as f64, cfg.kappa_sr)?;
        let lambda_rd = gen_singular_values(cfg.n_d.min(cfg.n_r), cfg.n_r as f64, cfg.kappa_rd)?;
        let v_sr = cfg.v_sr();
        let gain_r = lambda_sr.iter().map(|l| l * l).sum::<f64>() / cfg.n_r as f64;
        let gain_d = lambda_rd.iter().map(|l| l * l).sum::<f64>() / cfg.n_d as f64;
        let r_s = prior.covariance();
        let p_s = (0..cfg.m).map(|i| r_s[(i, i)].re_f64()).sum::<f64>() / cfg.m as f64;
        let power_y = gain_r * p_s + v_sr;
        let clip = ClipSpec::from_cr(cfg.cr_db, power_y, S::IS_COMPLEX)?;
        let r_r = &r_s * S::from_re(gain_r);
        let r_y = &r_r + DMatrix::<S>::identity(cfg.m, cfg.m) * S::from_re(v_sr);
        let r_eta = eta_covariance(&r_y, &clip);
        let r_d = &r_eta * S::from_re(gain_d);
        Ok(Self { cfg: cfg.clone(), lambda_sr, lambda_rd, clip, power_y, prior, r_s, r_r, r_eta, r_d })
    }

    /// Estimator of the clipping constraint under `treatment`.
    fn clip_node(&self, treatment: ClipTreatment) -> Prototype<S> {
        let v_sr = self.cfg.v_sr();
        let c = self.clip.scale;
        let complex = S::IS_COMPLEX;
        let pair = |gain: f64, noise: f64| {
            Prototype::LinearPair(PairSpec {
                dims: (self.cfg.n_r, self.cfg.n_r),
                gains: vec![gain; self.cfg.n_r],
                noise_var: noise,
                prior_a: Some(self.r_r.clone()),
                truth_cov_a: self.r_r.clone(),
            })
        };
        match treatment {
            ClipTreatment::Exact => Prototype::Clip(ClipNodeSpec {
                dim: self.cfg.n_r,
                clip: self.clip,
                v_sr,
                prior_r: self.r_r.clone(),
                prior_eta: self.r_eta.clone(),
            }),
            ClipTreatment::Awgn => {
                // η(y) = y + n_η with E|n_η|² = E|η(y) - y|²
                let mo = clip_moments(self.power_y, self.clip.threshold, complex);
                let d = (mo.power / (c * c) - 2.0 * mo.cross / c + self.power_y).max(0.0);
                pair(1.0, v_sr + d)
            }
            ClipTreatment::Bussgang => {
                let g = self.clip.bussgang_gain(self.power_y, complex);
                pair(g, g * g * v_sr + (1.0 - g * g * self.power_y).max(0.0))
            }
        }
    }

    /// The five constraints on ports `(s, r, η, d)`.
    pub fn constraints(&self, treatment: ClipTreatment) -> Vec<Constraint<S>> {
        let cfg = &self.cfg;
        vec![
            Constraint {
                name: "source".into(),
                side: Side::Phi,
                ports: vec![PORT_S],
                prototype: Prototype::Discrete { dim: cfg.n_s, prior: self.prior.clone() },
            },
            Constraint {
                name: "source-relay".into(),
                side: Side::Gamma,
                ports: vec![PORT_S, PORT_R],
                prototype: Prototype::LinearPair(PairSpec {
                    dims: (cfg.n_s, cfg.n_r),
                    gains: self.lambda_sr.clone(),
                    noise_var: 0.0,
                    prior_a: Some(self.r_s.clone()),
                    truth_cov_a: self.r_s.clone(),
                }),
            },
            Constraint {
                name: "clip".into(),
                side: Side::Phi,
                ports: vec![PORT_R, PORT_ETA],
                prototype: self.clip_node(treatment),
            },
            Constraint {
                name: "relay-destination".into(),
                side: Side::Gamma,
                ports: vec![PORT_ETA, PORT_D],
                prototype: Prototype::LinearPair(PairSpec {
                    dims: (cfg.n_r, cfg.n_d),
                    gains: self.lambda_rd.clone(),
                    noise_var: 0.0,
                    prior_a: Some(self.r_eta.clone()),
                    truth_cov_a: self.r_eta.clone(),
                }),
            },
            Constraint {
                name: "destination".into(),
                side: Side::Phi,
                ports: vec![PORT_D],
                prototype: Prototype::Anchor(AnchorSpec {
                    dim: cfg.n_d,
                    gains: vec![1.0; cfg.n_d],
                    noise_var: cfg.v_rd(),
                    prior: Some(self.r_d.clone()),
                    truth_cov: self.r_d.clone(),
                    observation: 0,
                }),
            },
        ]
    }

    /// Draw channels, sources and noise for one trial.
    pub fn realize(&self, seed: u64) -> Result<RelayRealization<S>> {
        let cfg = &self.cfg;
        let op = |tag: u64, n: usize| draw_operator::<S>(cfg.operator, n, derive_seed(seed, &[tag]));
        let transforms = vec![op(1, cfg.n_s)?, op(2, cfg.n_r)?, op(3, cfg.n_r)?, op(4, cfg.n_d)?];
        let x_s = sample_sources::<S>(cfg.source(), cfg.n_s, cfg.m, derive_seed(seed, &[5]))?;
        let n_sr = gaussian_matrix::<S>(cfg.n_r, cfg.m, cfg.v_sr(), derive_seed(seed, &[6]));
        let n_rd = gaussian_matrix::<S>(cfg.n_d, cfg.m, cfg.v_rd(), derive_seed(seed, &[7]));
        let mut real = RelayRealization {
            transforms,
            x_s,
            n_sr,
            n_rd,
            truth: Truth { x: vec![], xi: vec![], observations: vec![] },
        };
        real.truth = self.forward(&real)?;
        Ok(real)
    }

    /// Every variable of the system, and `Y_d`, from the stored sources,
    /// channels and noise.
    pub fn forward(&self, real: &RelayRealization<S>) -> Result<Truth<S>> {
        let [v_sr, t_r, v_rd, t_d] =
            [&real.transforms[0], &real.transforms[1], &real.transforms[2], &real.transforms[3]];
        let xi_s = v_sr.forward(&real.x_s)?;
        let xi_r = diag_apply(&self.lambda_sr, &xi_s, self.cfg.n_r);
        let x_r = t_r.adjoint(&xi_r)?;
        let y_r = &x_r + &real.n_sr;
        let x_eta = eta(&y_r, &self.clip);
        let xi_eta = v_rd.forward(&x_eta)?;
        let xi_d = diag_apply(&self.lambda_rd, &xi_eta, self.cfg.n_d);
        let x_d = t_d.adjoint(&xi_d)?;
        let y_d = &x_d + &real.n_rd;
        Ok(Truth {
            x: vec![real.x_s.clone(), x_r, x_eta, x_d],
            xi: vec![xi_s, xi_r, xi_eta, xi_d],
            observations: vec![y_d],
        })
    }

    pub fn graph(&self, real: &RelayRealization<S>, treatment: ClipTreatment) -> SystemGraph<S> {
        SystemGraph::new(real.transforms.clone(), self.cfg.m, self.constraints(treatment))
    }
}

/// `out_i = λ_i x_i` for `i < rows`, zero-padded or truncated to `rows`.
fn diag_apply<S: Scalar>(lambda: &[f64], x: &DMatrix<S>, rows: usize) -> DMatrix<S> {
    let mut out = DMatrix::zeros(rows, x.ncols());
    for (i, &l) in lambda.iter().enumerate().take(rows.min(x.nrows())) {
        for j in 0..x.ncols() {
            out[(i, j)] = x[(i, j)] * S::from_re(l);
        }
    }
    out
}

/// One random draw of the relay system.
#[derive(Clone, Debug)]
pub struct RelayRealization<S: Scalar> {
    /// `V_sr`, `U_srᴴ`, `V_rd`, `U_rdᴴ`.
    pub transforms: Vec<OrthogonalOperator<S>>,
    pub x_s: DMatrix<S>,
    pub n_sr: DMatrix<S>,
    pub n_rd: DMatrix<S>,
    pub truth: Truth<S>,
}

/// The relay graph with the exact clipping estimator, plus one draw of
/// its truth and observation.
pub fn build_relay_graph<S: Scalar>(cfg: &RelayConfig, seed: u64) -> Result<(SystemGraph<S>, Truth<S>)> {
    let model = RelayModel::<S>::new(cfg)?;
    let real = model.realize(seed)?;
    let graph = model.graph(&real, ClipTreatment::Exact);
    Ok((graph, real.truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_examples() {
        let l = gen_singular_values(2, 2.0, 4.0).unwrap();
        assert!((l[0] - (8.0f64 / 5.0).sqrt()).abs() < 1e-12);
        assert!((l[1] - (2.0f64 / 5.0).sqrt()).abs() < 1e-12);
        let flat = gen_singular_values(5, 10.0, 1.0).unwrap();
        assert!(flat.iter().all(|x| (x - 2f64.sqrt()).abs() < 1e-12));
        assert!(gen_singular_values(3, 1.0, 0.5).is_err());
    }

    #[test]
    fn scaled_sizes() {
        let c = RelayConfig::scaled(8);
        assert_eq!((c.n_s, c.n_r, c.n_d), (1024, 819, 655));
    }

    #[test]
    fn cross_moment_limits() {
        // no clipping returns the covariance; identical inputs give the power
        assert_eq!(clip_cross_moment(1.0, 1.0, 0.3, f64::INFINITY), 0.3);
        let p = clip_moments(1.0, 1.0, false).power;
        assert!((clip_cross_moment(1.0, 1.0, 1.0, 1.0) - p).abs() < 1e-6);
        assert!(clip_cross_moment(1.0, 1.0, 0.0, 1.0).abs() < 1e-9);
    }
}
