#![allow(dead_code)]

use gauss_quad::hermite::GaussHermite;
use nalgebra::DMatrix;
use oamp::estimators::{AnchorSpec, Prototype};
use oamp::gs_model::{Domain, EstimateMessage, Flow, GsParams};
use oamp::Scalar;

/// `E f(g)` for `g ∼ N(0, 1)` by Gauss–Hermite quadrature.
pub fn gh_expect(nodes: usize, f: impl Fn(f64) -> f64) -> f64 {
    let quad = GaussHermite::new(nodes.try_into().unwrap());
    quad.integrate(|x| f(std::f64::consts::SQRT_2 * x)) / std::f64::consts::PI.sqrt()
}

/// Composite trapezoid rule with `points` nodes on `[a, b]`.
pub fn trapezoid(a: f64, b: f64, points: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / (points - 1) as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..points - 1 {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// Two-sample Kolmogorov–Smirnov statistic and its asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    (d, p.clamp(0.0, 1.0))
}

pub fn msg<S: Scalar>(values: DMatrix<S>, gs: GsParams<S>) -> EstimateMessage<S> {
    EstimateMessage::new(values, gs, 0, Domain::X, Flow::In, 1).unwrap()
}

pub fn scalar_msg(theta: f64, sigma: f64, obs: &[f64]) -> EstimateMessage<f64> {
    msg(DMatrix::from_column_slice(obs.len(), 1, obs), GsParams::scaled_identity(1, theta, sigma))
}

pub fn max_abs_diff<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (*x - *y).abs2_f64().sqrt()).fold(0.0, f64::max)
}

pub fn power<S: Scalar>(x: &DMatrix<S>) -> f64 {
    x.iter().map(|v| v.abs2_f64()).sum::<f64>() / x.len() as f64
}

pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Posterior mean over the four sign pairs with `P(x₂ = -x₁) = α`, given
/// `x̂ = xΘ + z`, `z ∼ N(0, Σ)`.
pub fn four_point_oracle(obs: [f64; 2], theta: &DMatrix<f64>, sigma: &DMatrix<f64>, alpha: f64) -> [f64; 2] {
    let sinv = sigma.clone().try_inverse().unwrap();
    let mut num = [0.0; 2];
    let mut den = 0.0;
    for a in [-1.0, 1.0] {
        for b in [-1.0, 1.0] {
            let p = 0.5 * if a == b { 1.0 - alpha } else { alpha };
            let x = DMatrix::from_row_slice(1, 2, &[a, b]);
            let r = DMatrix::from_row_slice(1, 2, &obs) - &x * theta;
            let q = (&r * &sinv * r.transpose())[0];
            let w = p * (-0.5 * q).exp();
            num[0] += w * a;
            num[1] += w * b;
            den += w;
        }
    }
    [num[0] / den, num[1] / den]
}

/// Posterior means of `(x_r, η(y))` by trapezoid integration over `y`,
/// with `x_r ∼ N(u, v_u)`, `y = x_r + n`, `n ∼ N(0, v_sr)` and
/// `w = η(y) + e`, `e ∼ N(0, tau)`.
pub fn clip_oracle(u: f64, v_u: f64, v_sr: f64, w: f64, tau: f64, z: f64, c: f64) -> (f64, f64) {
    let s2 = v_u + v_sr;
    let s = s2.sqrt();
    let eta = |y: f64| y.clamp(-z, z) / c;
    let dens = |y: f64| (-(y - u).powi(2) / (2.0 * s2) - (w - eta(y)).powi(2) / (2.0 * tau)).exp();
    let (a, b) = (u - 8.0 * s, u + 8.0 * s);
    let p = 100_000;
    let den = trapezoid(a, b, p, dens);
    let ey = trapezoid(a, b, p, |y| y * dens(y)) / den;
    let ee = trapezoid(a, b, p, |y| eta(y) * dens(y)) / den;
    (u + v_u / s2 * (ey - u), ee)
}

/// Exact marginal posterior means of BPSK `x` given `r = ΛVx + n`, by
/// enumerating all sign vectors.
pub fn exact_posterior(a: &DMatrix<f64>, r: &DMatrix<f64>, v: f64) -> Vec<f64> {
    let n = a.ncols();
    let mut num = vec![0.0; n];
    let mut logs = Vec::with_capacity(1 << n);
    for bits in 0..(1u32 << n) {
        let x = DMatrix::from_fn(n, 1, |i, _| if bits >> i & 1 == 1 { 1.0 } else { -1.0 });
        logs.push(-(r - a * &x).norm_squared() / (2.0 * v));
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut den = 0.0;
    for (bits, l) in logs.iter().enumerate() {
        let w = (l - top).exp();
        den += w;
        for (i, s) in num.iter_mut().enumerate() {
            *s += w * if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
    num.iter().map(|s| s / den).collect()
}

/// Flat-prior anchor with no observation, whose estimator is `x̂Θ⁻¹`.
pub fn flat_anchor(theta: &DMatrix<f64>) -> Prototype<f64> {
    let m = theta.nrows();
    Prototype::Anchor(AnchorSpec {
        dim: 64,
        gains: vec![],
        noise_var: 1.0,
        prior: None,
        truth_cov: DMatrix::identity(m, m),
        observation: 0,
    })
}
