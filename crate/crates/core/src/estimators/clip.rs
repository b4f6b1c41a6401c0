use crate::error::{Error, Result};
use crate::gs_model::{EstimateMessage, GsParams, SIGMA_FLOOR};
use crate::relay::ClipSpec;
use crate::scalar::Scalar;
use crate::special::{log_norm_cdf, log_norm_interval, log_norm_pdf, truncated_mean};
use nalgebra::DMatrix;

/// Scalar observation of one column extracted from an `M`-column GS message
/// by projecting onto that column under the prior covariance.
#[derive(Clone, Copy, Debug)]
struct ColumnView {
    theta: (f64, f64),
    var: f64,
}

fn column_view<S: Scalar>(gs: &GsParams<S>, prior: &DMatrix<S>, col: usize) -> ColumnView {
    let m = gs.m();
    let r = prior[(col, col)].re_f64();
    if r <= 0.0 {
        return ColumnView { theta: (0.0, 0.0), var: 0.0 };
    }
    // (RΘ)_mm / R_mm and (ΘᴴRΘ + Σ)_mm - |θ|² R_mm
    let mut rt = S::zero();
    for k in 0..m {
        rt += prior[(col, k)] * gs.theta[(k, col)];
    }
    let theta = rt * S::from_re(1.0 / r);
    let mut total = gs.sigma[(col, col)].re_f64();
    for i in 0..m {
        for k in 0..m {
            total += (gs.theta[(i, col)].conjugate() * prior[(i, k)] * gs.theta[(k, col)]).re_f64();
        }
    }
    let var = (total - theta.abs2_f64() * r).max(0.0);
    ColumnView { theta: (theta.re_f64(), theta.im_f64()), var }
}

impl ColumnView {
    fn informative(&self) -> bool {
        self.theta.0 != 0.0 || self.theta.1 != 0.0
    }

    /// `w / θ` and its noise variance `var / |θ|²`.
    fn normalise(&self, w: (f64, f64)) -> ((f64, f64), f64) {
        let (a, b) = self.theta;
        let d = a * a + b * b;
        let re = (w.0 * a + w.1 * b) / d;
        let im = (w.1 * a - w.0 * b) / d;
        ((re, im), self.var.max(SIGMA_FLOOR) / d)
    }
}

/// Posterior means `(E{x_r}, E{η(y)})` for one real component, where
/// `x_r ∼ N(u, v_u)`, `y = x_r + n`, `n ∼ N(0, v_n)` and, if present,
/// `w = η(y) + e`, `e ∼ N(0, tau)`. Closed form over the three regions of
/// the clipping function.
pub(crate) fn clip_posterior_1d(u: f64, v_u: f64, v_n: f64, obs: Option<(f64, f64)>, z: f64, c: f64) -> (f64, f64) {
    let s2 = (v_u + v_n).max(1e-300);
    let s = s2.sqrt();
    let alpha = (-z - u) / s;
    let beta = (z - u) / s;
    // (log weight, conditional mean of y) for each region
    let mut regions = [(f64::NEG_INFINITY, 0.0); 3];
    let (ll_lo, ll_hi, mid_lw, m_p, sd_p) = match obs {
        None => (0.0, 0.0, 0.0, u, s),
        Some((w, tau)) => {
            let tau = tau.max(1e-300);
            let ll = |level: f64| -(w - level).powi(2) / (2.0 * tau);
            let a = c * c * tau;
            let v_p = 1.0 / (1.0 / s2 + 1.0 / a);
            let m_p = v_p * (u / s2 + c * w / a);
            let lk = 0.5 * (a / (a + s2)).ln() - (u - c * w).powi(2) / (2.0 * (a + s2));
            (ll(-z / c), ll(z / c), lk, m_p, v_p.sqrt())
        }
    };
    if z.is_finite() {
        let lp = log_norm_cdf(alpha);
        if lp > f64::NEG_INFINITY {
            regions[0] = (ll_lo + lp, u - s * (log_norm_pdf(alpha) - lp).exp());
        }
        let lq = log_norm_cdf(-beta);
        if lq > f64::NEG_INFINITY {
            regions[2] = (ll_hi + lq, u + s * (log_norm_pdf(beta) - lq).exp());
        }
    }
    let ap = (-z - m_p) / sd_p;
    let bp = (z - m_p) / sd_p;
    let lm = log_norm_interval(ap, bp);
    if lm > f64::NEG_INFINITY {
        regions[1] = (mid_lw + lm, m_p + sd_p * truncated_mean(ap, bp));
    }
    let top = regions.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = regions.iter().map(|r| if r.0 == f64::NEG_INFINITY { 0.0 } else { (r.0 - top).exp() }).collect();
    let norm: f64 = w.iter().sum();
    let e_y = (w[0] * regions[0].1 + w[1] * regions[1].1 + w[2] * regions[2].1) / norm;
    let sat = if z.is_finite() { z } else { 0.0 };
    let e_eta = (w[0] * (-sat) + w[1] * regions[1].1 + w[2] * sat) / (norm * c);
    let e_x = u + v_u / s2 * (e_y - u);
    (e_x, e_eta)
}

pub(crate) struct ClipModel<'a, S: Scalar> {
    pub clip: &'a ClipSpec,
    pub v_sr: f64,
    pub prior_r: &'a DMatrix<S>,
    pub prior_eta: &'a DMatrix<S>,
}

impl<S: Scalar> ClipModel<'_, S> {
    pub(crate) fn evaluate(
        &self,
        r: &DMatrix<S>,
        gs_r: &GsParams<S>,
        e: &DMatrix<S>,
        gs_e: &GsParams<S>,
    ) -> (DMatrix<S>, DMatrix<S>) {
        let (n, m) = r.shape();
        let mut out_r = DMatrix::zeros(n, m);
        let mut out_e = DMatrix::zeros(n, m);
        let parts = if S::IS_COMPLEX { 0.5 } else { 1.0 };
        for col in 0..m {
            let cr = column_view(gs_r, self.prior_r, col);
            let ce = column_view(gs_e, self.prior_eta, col);
            let prior_var = self.prior_r[(col, col)].re_f64();
            let (p, v_u) = if cr.informative() {
                let (a, b) = cr.theta;
                let p = (a * a + b * b) / cr.var.max(SIGMA_FLOOR);
                (p, 1.0 / (1.0 / prior_var.max(SIGMA_FLOOR) + p))
            } else {
                (0.0, prior_var)
            };
            for i in 0..n {
                let xr = r[(i, col)];
                let (ur, ui) = if p > 0.0 {
                    // v_u · conj(θ) x̂ / var
                    let (a, b) = cr.theta;
                    let k = v_u / cr.var.max(SIGMA_FLOOR);
                    let (xr_re, xr_im) = (xr.re_f64(), xr.im_f64());
                    (k * (a * xr_re + b * xr_im), k * (a * xr_im - b * xr_re))
                } else {
                    (0.0, 0.0)
                };
                let obs = if ce.informative() {
                    let ev = e[(i, col)];
                    Some(ce.normalise((ev.re_f64(), ev.im_f64())))
                } else {
                    None
                };
                let z = self.clip.threshold;
                let c = self.clip.scale;
                let (xre, ere) =
                    clip_posterior_1d(ur, v_u * parts, self.v_sr * parts, obs.map(|(w, t)| (w.0, t * parts)), z, c);
                let (xim, eim) = if S::IS_COMPLEX {
                    clip_posterior_1d(ui, v_u * parts, self.v_sr * parts, obs.map(|(w, t)| (w.1, t * parts)), z, c)
                } else {
                    (0.0, 0.0)
                };
                out_r[(i, col)] = S::from_parts(xre, xim);
                out_e[(i, col)] = S::from_parts(ere, eim);
            }
        }
        (out_r, out_e)
    }
}

/// Posterior means of `x_r` and `x_η = η(x_r + n_sr)` given GS messages on
/// both, a zero-mean Gaussian prior on `x_r` and `n_sr ∼ N(0, v_sr)`. Each
/// column is processed on its own, using the marginal GS model of that
/// column.
pub fn clip_mmse_pair<S: Scalar>(
    msg_r: &EstimateMessage<S>,
    msg_eta: &EstimateMessage<S>,
    v_sr: f64,
    clip: &ClipSpec,
    prior_r: &DMatrix<S>,
    prior_eta: &DMatrix<S>,
) -> Result<(DMatrix<S>, DMatrix<S>)> {
    if !(v_sr >= 0.0) {
        return Err(Error::Config(format!("noise variance {v_sr} must be non-negative")));
    }
    if !(clip.threshold > 0.0 && clip.scale > 0.0) {
        return Err(Error::Config("clip threshold and scale must be positive".into()));
    }
    if msg_r.values.shape() != msg_eta.values.shape() {
        return Err(Error::Dimension("clip node ports differ in shape".into()));
    }
    let m = msg_r.values.ncols();
    if prior_r.shape() != (m, m) || prior_eta.shape() != (m, m) {
        return Err(Error::Dimension("clip node priors must be M x M".into()));
    }
    let model = ClipModel { clip, v_sr, prior_r, prior_eta };
    Ok(model.evaluate(&msg_r.values, &msg_r.gs, &msg_eta.values, &msg_eta.gs))
}
