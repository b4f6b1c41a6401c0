use crate::error::{Error, Result};
use crate::gs_model::{EstimateMessage, GsParams};
use crate::scalar::{dot_re, Scalar};
use nalgebra::DMatrix;
use rand::Rng;
use std::f64::consts::FRAC_1_SQRT_2;

/// Finite prior over row vectors of length `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePrior<S: Scalar> {
    m: usize,
    points: Vec<Vec<S>>,
    probs: Vec<f64>,
}

impl<S: Scalar> DiscretePrior<S> {
    pub fn new(points: Vec<Vec<S>>, probs: Vec<f64>) -> Result<Self> {
        let m = points.first().map(|p| p.len()).unwrap_or(0);
        if m == 0 || points.len() != probs.len() || points.iter().any(|p| p.len() != m) {
            return Err(Error::Config("discrete prior needs equally sized points with one probability each".into()));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("prior probabilities must be non-negative and sum to 1 (sum {total})")));
        }
        Ok(Self { m, points, probs })
    }

    /// Build from a prior on real sign vectors. In complex mode the real and
    /// imaginary parts are independent copies, scaled to keep unit power.
    fn from_real(real_points: Vec<Vec<f64>>, probs: Vec<f64>) -> Self {
        if !S::IS_COMPLEX {
            let pts = real_points.iter().map(|p| p.iter().map(|&v| S::from_re(v)).collect()).collect();
            return Self { m: real_points[0].len(), points: pts, probs };
        }
        let mut pts = Vec::new();
        let mut pr = Vec::new();
        for (a, pa) in real_points.iter().zip(&probs) {
            for (b, pb) in real_points.iter().zip(&probs) {
                pts.push(
                    a.iter().zip(b).map(|(&re, &im)| S::from_parts(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)).collect(),
                );
                pr.push(pa * pb);
            }
        }
        Self { m: real_points[0].len(), points: pts, probs: pr }
    }

    /// Independent equiprobable BPSK on each of `m` columns.
    pub fn bpsk(m: usize) -> Self {
        let count = 1usize << m;
        let pts = (0..count).map(|k| (0..m).map(|j| if (k >> j) & 1 == 0 { 1.0 } else { -1.0 }).collect()).collect();
        Self::from_real(pts, vec![1.0 / count as f64; count])
    }

    /// Two BPSK streams with `P(x₂ = -x₁) = α`.
    pub fn correlated_bpsk(alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!("transition probability {alpha} outside [0, 1]")));
        }
        let pts = vec![vec![1.0, 1.0], vec![-1.0, -1.0], vec![1.0, -1.0], vec![-1.0, 1.0]];
        let probs = vec![(1.0 - alpha) / 2.0, (1.0 - alpha) / 2.0, alpha / 2.0, alpha / 2.0];
        Ok(Self::from_real(pts, probs))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `E[xᴴx]` over one row.
    pub fn covariance(&self) -> DMatrix<S> {
        let mut r = DMatrix::zeros(self.m, self.m);
        for (p, &w) in self.points.iter().zip(&self.probs) {
            for i in 0..self.m {
                for j in 0..self.m {
                    r[(i, j)] += p[i].conjugate() * p[j] * S::from_re(w);
                }
            }
        }
        r
    }

    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G, n: usize) -> DMatrix<S> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let mut out = DMatrix::zeros(n, self.m);
        for i in 0..n {
            let u: f64 = rng.random::<f64>() * acc;
            let k = cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1);
            for j in 0..self.m {
                out[(i, j)] = self.points[k][j];
            }
        }
        out
    }
}

/// Posterior mean of each row under `prior`, given the GS observation model
/// `x̂ = xΘ + z`, `z ∼ N(0, Σ)`.
pub fn denoise_discrete<S: Scalar>(
    values: &DMatrix<S>,
    gs: &GsParams<S>,
    prior: &DiscretePrior<S>,
) -> Result<DMatrix<S>> {
    let m = prior.m();
    if values.ncols() != m || gs.m() != m {
        return Err(Error::Dimension(format!("prior has {m} columns, message {}", values.ncols())));
    }
    if values.iter().any(|v| !(v.re_f64().is_finite() && v.im_f64().is_finite())) {
        return Err(Error::Numerical("non-finite input to discrete denoiser".into()));
    }
    let nat = gs.natural();
    let c = if S::IS_COMPLEX { 1.0 } else { 0.5 };
    let quad: Vec<f64> = prior
        .points
        .iter()
        .map(|p| {
            let mut q = 0.0;
            for i in 0..m {
                for j in 0..m {
                    q += (p[i].conjugate() * nat.precision[(i, j)] * p[j]).re_f64();
                }
            }
            q
        })
        .collect();
    let logp: Vec<f64> = prior.probs.iter().map(|p| p.ln()).collect();
    let h_all = values * &nat.gain;
    let mut out = DMatrix::zeros(values.nrows(), m);
    let mut lw = vec![0.0; prior.points.len()];
    let mut h = vec![S::zero(); m];
    for r in 0..values.nrows() {
        for j in 0..m {
            h[j] = h_all[(r, j)];
        }
        let mut top = f64::NEG_INFINITY;
        for (k, p) in prior.points.iter().enumerate() {
            lw[k] = logp[k] + c * (2.0 * dot_re(&h, p) - quad[k]);
            top = top.max(lw[k]);
        }
        let mut norm = 0.0;
        let mut acc = vec![(0.0, 0.0); m];
        for (k, p) in prior.points.iter().enumerate() {
            let w = (lw[k] - top).exp();
            norm += w;
            for j in 0..m {
                acc[j].0 += w * p[j].re_f64();
                acc[j].1 += w * p[j].im_f64();
            }
        }
        for j in 0..m {
            out[(r, j)] = S::from_parts(acc[j].0 / norm, acc[j].1 / norm);
        }
    }
    Ok(out)
}

/// BPSK posterior mean (BPSK per component in complex mode).
pub fn denoise_bpsk<S: Scalar>(msg: &EstimateMessage<S>) -> Result<DMatrix<S>> {
    denoise_discrete(&msg.values, &msg.gs, &DiscretePrior::bpsk(msg.values.ncols()))
}

/// Joint posterior mean of two correlated BPSK streams.
pub fn denoise_bpsk_correlated<S: Scalar>(msg: &EstimateMessage<S>, alpha: f64) -> Result<DMatrix<S>> {
    if msg.values.ncols() != 2 {
        return Err(Error::Dimension(format!("correlated BPSK needs 2 columns, got {}", msg.values.ncols())));
    }
    denoise_discrete(&msg.values, &msg.gs, &DiscretePrior::correlated_bpsk(alpha)?)
}

/// Sign decision per component; zero maps to `+1`. Complex entries map to
/// the nearest unit-power QPSK point.
pub fn hard_decide<S: Scalar>(values: &DMatrix<S>) -> DMatrix<S> {
    let sgn = |v: f64| if v < 0.0 { -1.0 } else { 1.0 };
    values.map(|v| {
        if S::IS_COMPLEX {
            S::from_parts(sgn(v.re_f64()) * FRAC_1_SQRT_2, sgn(v.im_f64()) * FRAC_1_SQRT_2)
        } else {
            S::from_re(sgn(v.re_f64()))
        }
    })
}
