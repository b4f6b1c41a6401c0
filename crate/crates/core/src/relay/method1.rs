use super::model::{RelayModel, RelayRealization};
use crate::engine::{SystemGraph, Truth};
use crate::error::{Error, Result};
use crate::linops::{gaussian_matrix, OrthogonalOperator};
use crate::rng::derive_seed;
use crate::scalar::{Real, Scalar};
use crate::smv::single_transform_graph;
use nalgebra::DMatrix;

const ORTHO_TOL: f64 = 1e-8;

/// The relay treated as one linear channel `Y_d ≈ H_rd H_sr X_s + noise`
/// after noise whitening, rewritten as `r = S Ξ + w`, `Ξ = VX_s`.
#[derive(Clone, Debug)]
pub struct Method1System<S: Scalar> {
    pub graph: SystemGraph<S>,
    pub truth: Truth<S>,
    pub singular_values: Vec<f64>,
}

/// Build the whitened single-transform system for one realization. The
/// combined channel is formed densely.
pub fn method1_system<S: Scalar>(
    model: &RelayModel<S>,
    real: &RelayRealization<S>,
    seed: u64,
) -> Result<Method1System<S>> {
    let cfg = &model.cfg;
    let (n_s, n_r, n_d, m) = (cfg.n_s, cfg.n_r, cfg.n_d, cfg.m);
    if n_d > n_s {
        return Err(Error::Config("the combined channel needs N_d <= N_s".into()));
    }
    // clipping ignored outright: η(y) taken as y
    let c = 1.0;
    let (v_sr, v_rd) = (cfg.v_sr(), cfg.v_rd());
    let [op_sr, t_r, v_rd_op, t_d] =
        [&real.transforms[0], &real.transforms[1], &real.transforms[2], &real.transforms[3]];
    let d: Vec<f64> = (0..n_d).map(|i| v_sr / (c * c) * model.lambda_rd[i].powi(2) + v_rd).collect();

    // B = D^{-1/2} Λ_rd V_rd U_sr Λ_sr
    let mid = v_rd_op.forward(&t_r.adjoint(&DMatrix::identity(n_r, n_r))?)?;
    let mut b = DMatrix::<S>::zeros(n_d, n_s);
    for i in 0..n_d {
        let row = model.lambda_rd[i] / (d[i].sqrt() * c);
        for (j, &ls) in model.lambda_sr.iter().enumerate() {
            b[(i, j)] = mid[(i, j)] * S::from_re(row * ls);
        }
    }

    let eig = (&b * b.adjoint()).symmetric_eigen();
    let mut order: Vec<usize> = (0..n_d).collect();
    order.sort_by(|&a, &b| Real::f64(eig.eigenvalues[b]).total_cmp(&Real::f64(eig.eigenvalues[a])));
    let s: Vec<f64> = order.iter().map(|&k| Real::f64(eig.eigenvalues[k]).max(0.0).sqrt()).collect();
    if s.iter().any(|&x| x <= 0.0) {
        return Err(Error::Numerical("combined channel is rank deficient".into()));
    }
    let p = DMatrix::from_fn(n_d, n_d, |i, k| eig.eigenvectors[(i, order[k])]);
    let mut q_d = b.adjoint() * &p;
    for (k, &sk) in s.iter().enumerate() {
        let col = q_d.column(k) * S::from_re(1.0 / sk);
        q_d.set_column(k, &col);
    }

    // complete Q_d to an orthogonal basis
    let mut full = DMatrix::<S>::zeros(n_s, n_s);
    full.columns_mut(0, n_d).copy_from(&q_d);
    if n_s > n_d {
        full.columns_mut(n_d, n_s - n_d).copy_from(&gaussian_matrix::<S>(n_s, n_s - n_d, 1.0, derive_seed(seed, &[1])));
    }
    let mut q = full.qr().q();
    q.columns_mut(0, n_d).copy_from(&q_d);
    let v_dense = q.adjoint() * op_sr.to_dense();
    let op = OrthogonalOperator::from_dense(v_dense, derive_seed(seed, &[2]), ORTHO_TOL)?;

    // r = Pᴴ D^{-1/2} U_rdᴴ Y_d, padded to N_s rows
    let mut w = t_d.forward(&real.truth.observations[0])?;
    for (i, di) in d.iter().enumerate().take(n_d) {
        let row = w.row(i) * S::from_re(1.0 / di.sqrt());
        w.set_row(i, &row);
    }
    let mut r = DMatrix::zeros(n_s, m);
    r.rows_mut(0, n_d).copy_from(&(p.adjoint() * w));

    let xi = op.forward(&real.x_s)?;
    let graph = single_transform_graph(op, s.clone(), 1.0, model.prior.clone());
    let truth = Truth { x: vec![real.x_s.clone()], xi: vec![xi], observations: vec![r] };
    Ok(Method1System { graph, truth, singular_values: s })
}
