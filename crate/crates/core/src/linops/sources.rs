use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Scalar;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Source alphabets. In complex mode `Bpsk` is BPSK on each of the real and
/// imaginary parts, scaled to unit power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    Bpsk,
    CorrelatedBpsk { alpha: f64 },
    Gaussian { var: f64 },
}

fn sign<G: Rng + ?Sized>(rng: &mut G) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

pub fn sample_sources<S: Scalar>(kind: SourceKind, n: usize, m: usize, seed: u64) -> Result<DMatrix<S>> {
    let mut rng = stream(seed);
    let amp = if S::IS_COMPLEX { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
    match kind {
        SourceKind::Bpsk => Ok(DMatrix::from_fn(n, m, |_, _| {
            let re = sign(&mut rng);
            let im = if S::IS_COMPLEX { sign(&mut rng) } else { 0.0 };
            S::from_parts(amp * re, amp * im)
        })),
        SourceKind::CorrelatedBpsk { alpha } => {
            if m != 2 {
                return Err(Error::Config(format!("correlated BPSK needs 2 streams, got {m}")));
            }
            if !(0.0..=1.0).contains(&alpha) {
                return Err(Error::Config(format!("transition probability {alpha} outside [0, 1]")));
            }
            let mut out = DMatrix::zeros(n, 2);
            let parts = if S::IS_COMPLEX { 2 } else { 1 };
            for i in 0..n {
                let mut a = [0.0; 2];
                let mut b = [0.0; 2];
                for p in 0..parts {
                    a[p] = sign(&mut rng);
                    b[p] = if rng.random::<f64>() < alpha { -a[p] } else { a[p] };
                }
                out[(i, 0)] = S::from_parts(amp * a[0], amp * a[1]);
                out[(i, 1)] = S::from_parts(amp * b[0], amp * b[1]);
            }
            Ok(out)
        }
        SourceKind::Gaussian { var } => {
            if !(var >= 0.0) {
                return Err(Error::Config(format!("Gaussian source variance {var} must be non-negative")));
            }
            Ok(gaussian_matrix(n, m, var, seed))
        }
    }
}

/// IID zero-mean Gaussian entries of variance `var`.
pub fn gaussian_matrix<S: Scalar>(rows: usize, cols: usize, var: f64, seed: u64) -> DMatrix<S> {
    let mut rng = stream(seed);
    DMatrix::from_fn(rows, cols, |_, _| S::gaussian(&mut rng, var))
}

/// Rows drawn IID from `N(0, R)`, using the Hermitian square root of `R`
/// with eigenvalues below `floor` raised to it.
pub fn gaussian_rows<S: Scalar, G: Rng + ?Sized>(rng: &mut G, rows: usize, cov: &DMatrix<S>, floor: f64) -> DMatrix<S> {
    let m = cov.nrows();
    let g = DMatrix::from_fn(rows, m, |_, _| S::gaussian(rng, 1.0));
    &g * crate::gs_model::hermitian_sqrt(cov, floor)
}
