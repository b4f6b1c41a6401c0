mod common;

use common::max_abs_diff;
use nalgebra::DMatrix;
use oamp::estimators::{awgn_anchor, clip_mmse_pair, denoise_discrete, lmmse_linear_pair, DiscretePrior};
use oamp::gs_model::{gs_fit, Domain, EstimateMessage, Flow, GsParams};
use oamp::linops::{gaussian_matrix, permuted_dft, sample_haar};
use oamp::relay::{clip, ClipSpec};
use oamp::C64;
use proptest::prelude::*;

fn msg(values: DMatrix<f64>, gs: GsParams<f64>) -> EstimateMessage<f64> {
    EstimateMessage::new(values, gs, 0, Domain::X, Flow::In, 1).unwrap()
}

fn permute_rows(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(perm[i], j)])
}

/// Row values together with a row permutation of the same length.
fn rows_and_perm(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2..max).prop_flat_map(|n| {
        (prop::collection::vec(-4.0f64..4.0, 2 * n), Just((0..n).collect::<Vec<usize>>()).prop_shuffle())
    })
}

fn two_columns(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(v.len() / 2, 2, v)
}

fn correlated_gs() -> GsParams<f64> {
    GsParams::new(
        DMatrix::from_row_slice(2, 2, &[0.9, 0.2, -0.1, 0.7]),
        DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_denoiser_is_row_separable((v, perm) in rows_and_perm(40), alpha in 0.0f64..1.0) {
        let x = two_columns(&v);
        let gs = correlated_gs();
        let prior = DiscretePrior::<f64>::correlated_bpsk(alpha).unwrap();
        let out = denoise_discrete(&x, &gs, &prior).unwrap();
        let out_p = denoise_discrete(&permute_rows(&x, &perm), &gs, &prior).unwrap();
        prop_assert_eq!(out_p, permute_rows(&out, &perm));
    }

    #[test]
    fn clip_estimator_is_row_separable((v, perm) in rows_and_perm(24), w in prop::collection::vec(-3.0f64..3.0, 48), z in 0.3f64..2.0) {
        let a = two_columns(&v);
        let b = DMatrix::from_fn(a.nrows(), 2, |i, j| w[(2 * i + j) % w.len()]);
        let gs = correlated_gs();
        let spec = ClipSpec::new(z, 1.1).unwrap();
        let prior = DMatrix::identity(2, 2) * 1.3;
        let eta_prior = DMatrix::identity(2, 2);
        let (r, e) = clip_mmse_pair(&msg(a.clone(), gs.clone()), &msg(b.clone(), gs.clone()), 0.1, &spec, &prior, &eta_prior).unwrap();
        let (rp, ep) = clip_mmse_pair(
            &msg(permute_rows(&a, &perm), gs.clone()),
            &msg(permute_rows(&b, &perm), gs),
            0.1,
            &spec,
            &prior,
            &eta_prior,
        )
        .unwrap();
        prop_assert_eq!(rp, permute_rows(&r, &perm));
        prop_assert_eq!(ep, permute_rows(&e, &perm));
    }

    #[test]
    fn linear_nodes_with_constant_gains_are_row_separable((v, perm) in rows_and_perm(40), lambda in 0.1f64..3.0, noise in 0.01f64..1.0) {
        let a = two_columns(&v);
        let b = a.map(|x| 0.5 - x);
        let gs = correlated_gs();
        let gains = vec![lambda; a.nrows()];
        let (pa, pb) = lmmse_linear_pair(&msg(a.clone(), gs.clone()), &msg(b.clone(), gs.clone()), &gains, noise).unwrap();
        let (qa, qb) =
            lmmse_linear_pair(&msg(permute_rows(&a, &perm), gs.clone()), &msg(permute_rows(&b, &perm), gs.clone()), &gains, noise)
                .unwrap();
        prop_assert!(max_abs_diff(&qa, &permute_rows(&pa, &perm)) == 0.0);
        prop_assert!(max_abs_diff(&qb, &permute_rows(&pb, &perm)) == 0.0);
        let y = permute_rows(&b, &perm);
        let anchored = awgn_anchor(&msg(a.clone(), gs.clone()), &b, noise).unwrap();
        let anchored_p = awgn_anchor(&msg(permute_rows(&a, &perm), gs), &y, noise).unwrap();
        prop_assert_eq!(anchored_p, permute_rows(&anchored, &perm));
    }

    #[test]
    fn clipping_is_idempotent(v in prop::collection::vec(-10.0f64..10.0, 1..64), z in 0.01f64..5.0) {
        let spec = ClipSpec::new(z, 1.0).unwrap();
        let y = DMatrix::from_column_slice(v.len(), 1, &v);
        let once = clip(&y, &spec);
        prop_assert_eq!(clip(&once, &spec), once.clone());
        prop_assert!(once.iter().all(|c| c.abs() <= z));
        let yc = y.map(|x| C64::new(x, -0.5 * x));
        let oncec = clip(&yc, &spec);
        prop_assert_eq!(clip(&oncec, &spec), oncec);
    }

    #[test]
    fn fast_transforms_preserve_norms(n in 1usize..300, seed in any::<u64>()) {
        let x = gaussian_matrix::<f64>(n, 2, 1.0, seed);
        let v = permuted_dft::<f64>(n, seed).unwrap();
        let y = v.forward(&x).unwrap();
        prop_assert!((y.norm() - x.norm()).abs() < 1e-10 * x.norm().max(1.0));
        let xc = gaussian_matrix::<C64>(n, 1, 1.0, seed);
        let vc = permuted_dft::<C64>(n, seed).unwrap();
        prop_assert!((vc.forward(&xc).unwrap().norm() - xc.norm()).abs() < 1e-10 * xc.norm().max(1.0));
    }

    #[test]
    fn fit_error_is_orthogonal_to_the_truth(n in 3usize..200, seed in any::<u64>(), scale in 0.1f64..10.0) {
        let x = gaussian_matrix::<f64>(n, 2, 1.0, seed);
        let x_hat = &x * DMatrix::from_row_slice(2, 2, &[scale, 0.3, -0.2, 1.0]) + gaussian_matrix::<f64>(n, 2, 0.7, seed ^ 1);
        let f = gs_fit(&x, &x_hat).unwrap();
        let cross = x.transpose() * &f.error;
        prop_assert!(cross.amax() < 1e-8 * (x.norm() * x_hat.norm()).max(1.0), "{}", cross);
        let xc = gaussian_matrix::<C64>(n, 2, 1.0, seed);
        let hc = &xc * C64::new(0.4, scale) + gaussian_matrix::<C64>(n, 2, 0.5, seed ^ 2);
        let fc = gs_fit(&xc, &hc).unwrap();
        let crossc = xc.adjoint() * &fc.error;
        prop_assert!(crossc.iter().all(|c| c.norm() < 1e-8 * (xc.norm() * hc.norm()).max(1.0)));
    }

    #[test]
    fn fitted_parameters_are_transform_invariant(n in 3usize..120, seed in any::<u64>(), haar in any::<bool>()) {
        let x = gaussian_matrix::<f64>(n, 2, 1.0, seed);
        let x_hat = &x * DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.3, 1.2]) + gaussian_matrix::<f64>(n, 2, 0.3, seed ^ 3);
        let v = if haar { sample_haar::<f64>(n, seed).unwrap() } else { permuted_dft::<f64>(n, seed).unwrap() };
        let a = gs_fit(&x, &x_hat).unwrap().params;
        let b = gs_fit(&v.forward(&x).unwrap(), &v.forward(&x_hat).unwrap()).unwrap().params;
        prop_assert!((&a.theta - &b.theta).amax() < 1e-8);
        prop_assert!((&a.sigma - &b.sigma).amax() < 1e-8);
    }

    #[test]
    fn seeded_draws_are_reproducible(n in 1usize..40, seed in any::<u64>()) {
        prop_assert_eq!(sample_haar::<f64>(n, seed).unwrap().to_dense(), sample_haar::<f64>(n, seed).unwrap().to_dense());
        prop_assert_eq!(permuted_dft::<C64>(n, seed).unwrap().to_dense(), permuted_dft::<C64>(n, seed).unwrap().to_dense());
        prop_assert_eq!(gaussian_matrix::<f64>(n, 3, 2.0, seed), gaussian_matrix::<f64>(n, 3, 2.0, seed));
    }
}
