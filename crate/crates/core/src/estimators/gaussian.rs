use super::layout::{JointRow, RowLayout};
use crate::error::{Error, Result};
use crate::gs_model::{hermitian_pinv, spectral_map, EstimateMessage, GsParams, NaturalParams, SIGMA_FLOOR};
use crate::scalar::Scalar;
use nalgebra::DMatrix;

const SOLVE_RTOL: f64 = 1e-13;

/// Row vector `pot · J⁺` for a Hermitian PSD `J`.
fn solve_row<S: Scalar>(j: &DMatrix<S>, pot: &[S], out: &mut [S]) {
    let m = pot.len();
    if m == 1 {
        let d = j[(0, 0)].re_f64();
        out[0] = if d > 0.0 { pot[0] * S::from_re(1.0 / d) } else { S::zero() };
        return;
    }
    let (jinv, _) = hermitian_pinv(j, SOLVE_RTOL);
    for c in 0..m {
        let mut acc = S::zero();
        for r in 0..m {
            acc += pot[r] * jinv[(r, c)];
        }
        out[c] = acc;
    }
}

/// Precision of an optional zero-mean Gaussian prior in natural units.
fn prior_precision<S: Scalar>(prior: Option<&DMatrix<S>>, m: usize) -> DMatrix<S> {
    match prior {
        Some(r) => spectral_map(r, |l| 1.0 / l.max(SIGMA_FLOOR)),
        None => DMatrix::zeros(m, m),
    }
}

/// Linear two-variable constraint `b_i = λ_i a_i + υ_i`, `υ ∼ N(0, v)`, with
/// flat priors unless `prior_a` is given. Rows are described by `layout`.
pub(crate) struct PairModel<'a, S: Scalar> {
    pub gains: &'a [f64],
    pub noise_var: f64,
    pub prior_a: Option<&'a DMatrix<S>>,
}

impl<S: Scalar> PairModel<'_, S> {
    pub(crate) fn evaluate(
        &self,
        a: &DMatrix<S>,
        gs_a: &GsParams<S>,
        b: &DMatrix<S>,
        gs_b: &GsParams<S>,
        joint: &[JointRow],
    ) -> (DMatrix<S>, DMatrix<S>) {
        let m = a.ncols();
        let na: NaturalParams<S> = gs_a.natural();
        let nb: NaturalParams<S> = gs_b.natural();
        let pa = &na.precision + prior_precision(self.prior_a, m);
        let ha = a * &na.gain;
        let hb = b * &nb.gain;
        let mut out_a = DMatrix::zeros(a.nrows(), m);
        let mut out_b = DMatrix::zeros(b.nrows(), m);
        let v = self.noise_var;
        let eye = DMatrix::<S>::identity(m, m);
        let mut pot = vec![S::zero(); 2 * m];
        let mut sol = vec![S::zero(); 2 * m];
        for row in joint {
            match row.rows {
                [Some(ia), Some(ib)] => {
                    let lam = self.gains.get(row.phys).copied().unwrap_or(0.0);
                    if v == 0.0 {
                        let j = &pa + &nb.precision * S::from_re(lam * lam);
                        for c in 0..m {
                            pot[c] = ha[(ia, c)] + hb[(ib, c)] * S::from_re(lam);
                        }
                        solve_row(&j, &pot[..m], &mut sol[..m]);
                        for c in 0..m {
                            out_a[(ia, c)] = sol[c];
                            out_b[(ib, c)] = sol[c] * S::from_re(lam);
                        }
                    } else {
                        let mut j = DMatrix::zeros(2 * m, 2 * m);
                        j.view_mut((0, 0), (m, m)).copy_from(&(&pa + &eye * S::from_re(lam * lam / v)));
                        j.view_mut((m, m), (m, m)).copy_from(&(&nb.precision + &eye * S::from_re(1.0 / v)));
                        j.view_mut((0, m), (m, m)).copy_from(&(&eye * S::from_re(-lam / v)));
                        j.view_mut((m, 0), (m, m)).copy_from(&(&eye * S::from_re(-lam / v)));
                        for c in 0..m {
                            pot[c] = ha[(ia, c)];
                            pot[m + c] = hb[(ib, c)];
                        }
                        solve_row(&j, &pot, &mut sol);
                        for c in 0..m {
                            out_a[(ia, c)] = sol[c];
                            out_b[(ib, c)] = sol[m + c];
                        }
                    }
                }
                [Some(ia), None] => {
                    for c in 0..m {
                        pot[c] = ha[(ia, c)];
                    }
                    solve_row(&pa, &pot[..m], &mut sol[..m]);
                    for c in 0..m {
                        out_a[(ia, c)] = sol[c];
                    }
                }
                [None, Some(ib)] => {
                    // Λ has no entry here: b is pure noise (zero when v = 0)
                    if v > 0.0 {
                        let j = &nb.precision + &eye * S::from_re(1.0 / v);
                        for c in 0..m {
                            pot[c] = hb[(ib, c)];
                        }
                        solve_row(&j, &pot[..m], &mut sol[..m]);
                        for c in 0..m {
                            out_b[(ib, c)] = sol[c];
                        }
                    }
                }
                [None, None] => {}
            }
        }
        (out_a, out_b)
    }

    /// Row-averaged coefficient of each port's own input in its output.
    /// The outputs are linear in the inputs, so this is the exact GSO
    /// correction for Gaussian input errors.
    pub(crate) fn own_coefficients(
        &self,
        gs_a: &GsParams<S>,
        gs_b: &GsParams<S>,
        joint: &[JointRow],
    ) -> (DMatrix<S>, DMatrix<S>) {
        let m = gs_a.m();
        let na: NaturalParams<S> = gs_a.natural();
        let nb: NaturalParams<S> = gs_b.natural();
        let pa = &na.precision + prior_precision(self.prior_a, m);
        let v = self.noise_var;
        let eye = DMatrix::<S>::identity(m, m);
        let (mut wa, mut wb) = (DMatrix::zeros(m, m), DMatrix::zeros(m, m));
        let (mut ca, mut cb) = (0usize, 0usize);
        for row in joint {
            match row.rows {
                [Some(_), Some(_)] => {
                    let lam = self.gains.get(row.phys).copied().unwrap_or(0.0);
                    if v == 0.0 {
                        let (jinv, _) = hermitian_pinv(&(&pa + &nb.precision * S::from_re(lam * lam)), SOLVE_RTOL);
                        wa += &na.gain * &jinv;
                        wb += &nb.gain * &jinv * S::from_re(lam * lam);
                    } else {
                        let mut j = DMatrix::zeros(2 * m, 2 * m);
                        j.view_mut((0, 0), (m, m)).copy_from(&(&pa + &eye * S::from_re(lam * lam / v)));
                        j.view_mut((m, m), (m, m)).copy_from(&(&nb.precision + &eye * S::from_re(1.0 / v)));
                        j.view_mut((0, m), (m, m)).copy_from(&(&eye * S::from_re(-lam / v)));
                        j.view_mut((m, 0), (m, m)).copy_from(&(&eye * S::from_re(-lam / v)));
                        let (jinv, _) = hermitian_pinv(&j, SOLVE_RTOL);
                        wa += &na.gain * jinv.view((0, 0), (m, m));
                        wb += &nb.gain * jinv.view((m, m), (m, m));
                    }
                    ca += 1;
                    cb += 1;
                }
                [Some(_), None] => {
                    wa += &na.gain * hermitian_pinv(&pa, SOLVE_RTOL).0;
                    ca += 1;
                }
                [None, Some(_)] => {
                    if v > 0.0 {
                        wb += &nb.gain * hermitian_pinv(&(&nb.precision + &eye * S::from_re(1.0 / v)), SOLVE_RTOL).0;
                    }
                    cb += 1;
                }
                [None, None] => {}
            }
        }
        let avg = |w: DMatrix<S>, c: usize| if c == 0 { w } else { w * S::from_re(1.0 / c as f64) };
        (avg(wa, ca), avg(wb, cb))
    }
}

/// Single-variable observation `r_i = g_i x_i + υ_i` on the first
/// `gains.len()` rows; `obs` is row-aligned with `x`.
pub(crate) struct AnchorModel<'a, S: Scalar> {
    pub gains: &'a [f64],
    pub noise_var: f64,
    pub prior: Option<&'a DMatrix<S>>,
}

impl<S: Scalar> AnchorModel<'_, S> {
    pub(crate) fn evaluate(&self, x: &DMatrix<S>, gs: &GsParams<S>, obs: &DMatrix<S>, phys: &[usize]) -> DMatrix<S> {
        let m = x.ncols();
        let nat = gs.natural();
        let p = &nat.precision + prior_precision(self.prior, m);
        let h = x * &nat.gain;
        let eye = DMatrix::<S>::identity(m, m);
        let v = self.noise_var;
        let mut out = DMatrix::zeros(x.nrows(), m);
        let mut pot = vec![S::zero(); m];
        let mut sol = vec![S::zero(); m];
        for (r, &i) in phys.iter().enumerate() {
            let g = self.gains.get(i).copied();
            match g {
                Some(g) if v == 0.0 && g != 0.0 => {
                    for c in 0..m {
                        out[(r, c)] = obs[(r, c)] * S::from_re(1.0 / g);
                    }
                }
                Some(g) if v > 0.0 => {
                    let j = &p + &eye * S::from_re(g * g / v);
                    for c in 0..m {
                        pot[c] = h[(r, c)] + obs[(r, c)] * S::from_re(g / v);
                    }
                    solve_row(&j, &pot, &mut sol);
                    for c in 0..m {
                        out[(r, c)] = sol[c];
                    }
                }
                _ => {
                    for c in 0..m {
                        pot[c] = h[(r, c)];
                    }
                    solve_row(&p, &pot, &mut sol);
                    for c in 0..m {
                        out[(r, c)] = sol[c];
                    }
                }
            }
        }
        out
    }

    /// Row-averaged coefficient of the input in the output.
    pub(crate) fn own_coefficient(&self, gs: &GsParams<S>, phys: &[usize]) -> DMatrix<S> {
        let m = gs.m();
        let nat = gs.natural();
        let p = &nat.precision + prior_precision(self.prior, m);
        let eye = DMatrix::<S>::identity(m, m);
        let v = self.noise_var;
        let mut w = DMatrix::zeros(m, m);
        for &i in phys {
            match self.gains.get(i).copied() {
                Some(g) if v == 0.0 && g != 0.0 => {}
                Some(g) if v > 0.0 => {
                    w += &nat.gain * hermitian_pinv(&(&p + &eye * S::from_re(g * g / v)), SOLVE_RTOL).0
                }
                _ => w += &nat.gain * hermitian_pinv(&p, SOLVE_RTOL).0,
            }
        }
        if phys.is_empty() {
            w
        } else {
            w * S::from_re(1.0 / phys.len() as f64)
        }
    }
}

/// Joint MMSE of `(ξ_a, ξ_b)` under `ξ_b = Λ ξ_a (+ υ)`, flat priors, with
/// each variable observed through its GS message. Rows of the taller
/// variable beyond `lambda.len()` are handled as described for
/// [`PairModel`].
pub fn lmmse_linear_pair<S: Scalar>(
    msg_a: &EstimateMessage<S>,
    msg_b: &EstimateMessage<S>,
    lambda: &[f64],
    noise_var: f64,
) -> Result<(DMatrix<S>, DMatrix<S>)> {
    let (na, nb) = (msg_a.values.nrows(), msg_b.values.nrows());
    if msg_a.values.ncols() != msg_b.values.ncols() {
        return Err(Error::Dimension("paired messages differ in column count".into()));
    }
    if lambda.len() != na.min(nb) {
        return Err(Error::Dimension(format!("{} gains for variables of {na} and {nb} rows", lambda.len())));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Config(format!("noise variance {noise_var} must be non-negative")));
    }
    let layout = RowLayout::pair(na, nb);
    let model = PairModel { gains: lambda, noise_var, prior_a: None };
    Ok(model.evaluate(&msg_a.values, &msg_a.gs, &msg_b.values, &msg_b.gs, &layout.joint))
}

/// Gaussian posterior mean combining the GS message with `y = x + n`,
/// `n ∼ N(0, v)`, under a flat prior.
pub fn awgn_anchor<S: Scalar>(msg: &EstimateMessage<S>, y_obs: &DMatrix<S>, v: f64) -> Result<DMatrix<S>> {
    if !(v > 0.0) {
        return Err(Error::Config(format!("anchor noise variance {v} must be positive")));
    }
    if y_obs.shape() != msg.values.shape() {
        return Err(Error::Dimension(format!("observation {:?} vs message {:?}", y_obs.shape(), msg.values.shape())));
    }
    let n = y_obs.nrows();
    let gains = vec![1.0; n];
    let phys: Vec<usize> = (0..n).collect();
    let model = AnchorModel { gains: &gains, noise_var: v, prior: None };
    Ok(model.evaluate(&msg.values, &msg.gs, y_obs, &phys))
}
