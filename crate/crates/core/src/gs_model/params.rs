use super::linalg::{hermitian_pinv, hermitize, min_eigenvalue, spectral_map};
use crate::error::{dim_check, Result};
use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Eigenvalue floor applied to `Σ` whenever it is inverted or square-rooted.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Relative eigenvalue cut used for Gram-matrix pseudo-inverses.
pub(crate) const GRAM_RTOL: f64 = 1e-12;

/// GS parameters of a message `X̂ = XΘ + Z`, `Σ = N⁻¹ ZᴴZ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GsParams<S: Scalar> {
    pub theta: DMatrix<S>,
    pub sigma: DMatrix<S>,
}

/// Row likelihood of a GS message in natural form: the exponent is
/// `c·(-x P xᴴ + 2 Re(h xᴴ))` with `h = x̂ B`, `c = 1/2` (real) or `1`
/// (complex).
#[derive(Clone, Debug)]
pub struct NaturalParams<S: Scalar> {
    pub precision: DMatrix<S>,
    pub gain: DMatrix<S>,
}

impl<S: Scalar> GsParams<S> {
    pub fn new(theta: DMatrix<S>, sigma: DMatrix<S>) -> Result<Self> {
        dim_check(theta.is_square() && sigma.shape() == theta.shape(), || {
            format!("GS parameter shapes {:?} and {:?} differ", theta.shape(), sigma.shape())
        })?;
        Ok(Self { theta, sigma })
    }

    /// The zero initialisation `Θ = Σ = 0`.
    pub fn zeros(m: usize) -> Self {
        Self { theta: DMatrix::zeros(m, m), sigma: DMatrix::zeros(m, m) }
    }

    /// Scalar-times-identity parameters.
    pub fn scaled_identity(m: usize, theta: f64, sigma: f64) -> Self {
        Self { theta: DMatrix::identity(m, m) * S::from_re(theta), sigma: DMatrix::identity(m, m) * S::from_re(sigma) }
    }

    pub fn m(&self) -> usize {
        self.theta.nrows()
    }

    pub fn is_uninformative(&self) -> bool {
        self.theta.iter().all(|v| v.abs2_f64() == 0.0)
    }

    pub fn sigma_min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.sigma)
    }

    /// `Σ` with negative eigenvalues clipped to zero. Returns whether any
    /// eigenvalue fell below `-1e-10·trace`.
    pub fn clip_sigma(&mut self) -> bool {
        let tr: f64 = (0..self.m()).map(|i| self.sigma[(i, i)].re_f64()).sum();
        let flagged = self.sigma_min_eigenvalue() < -1e-10 * tr.abs().max(f64::MIN_POSITIVE);
        self.sigma = spectral_map(&self.sigma, |l| l.max(0.0));
        flagged
    }

    pub fn natural(&self) -> NaturalParams<S> {
        let m = self.m();
        if self.is_uninformative() {
            return NaturalParams { precision: DMatrix::zeros(m, m), gain: DMatrix::zeros(m, m) };
        }
        let sinv = spectral_map(&self.sigma, |l| 1.0 / l.max(SIGMA_FLOOR));
        let gain = &sinv * self.theta.adjoint();
        let precision = hermitize(&(&self.theta * &gain));
        NaturalParams { precision, gain }
    }
}

/// Result of an empirical GS fit.
#[derive(Clone, Debug)]
pub struct GsFit<S: Scalar> {
    pub params: GsParams<S>,
    pub error: DMatrix<S>,
    pub degenerate: bool,
}

/// Empirical GS decomposition of `x_hat` against `x_true`:
/// `Θ = (XᴴX)⁺ XᴴX̂`, `Z = X̂ - XΘ`, `Σ = ZᴴZ / N`.
pub fn gs_fit<S: Scalar>(x_true: &DMatrix<S>, x_hat: &DMatrix<S>) -> Result<GsFit<S>> {
    dim_check(x_true.shape() == x_hat.shape(), || {
        format!("truth {:?} and estimate {:?} differ in shape", x_true.shape(), x_hat.shape())
    })?;
    let n = x_true.nrows().max(1) as f64;
    let gram = x_true.ad_mul(x_true);
    let cross = x_true.ad_mul(x_hat);
    let (ginv, degenerate) = hermitian_pinv(&gram, GRAM_RTOL);
    let theta = ginv * cross;
    let error = x_hat - x_true * &theta;
    let sigma = hermitize(&(error.ad_mul(&error) * S::from_re(1.0 / n)));
    Ok(GsFit { params: GsParams { theta, sigma }, error, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::gaussian_matrix;
    use num_complex::Complex64;

    #[test]
    fn perfect_and_scaled_estimates() {
        let x = gaussian_matrix::<f64>(200, 2, 1.0, 1);
        let f = gs_fit(&x, &x).unwrap();
        assert!((&f.params.theta - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(f.params.sigma.amax() < 1e-24);
        let f2 = gs_fit(&x, &(&x * 2.0)).unwrap();
        assert!((&f2.params.theta - DMatrix::identity(2, 2) * 2.0).amax() < 1e-12);
        assert!(!f2.degenerate);
    }

    #[test]
    fn known_generator_recovered() {
        let n = 100_000;
        let v = 0.5;
        let x = gaussian_matrix::<f64>(n, 2, 1.0, 2);
        let w = gaussian_matrix::<f64>(n, 2, v, 3);
        let theta = DMatrix::from_row_slice(2, 2, &[0.8, -0.3, 0.2, 1.1]);
        let f = gs_fit(&x, &(&x * &theta + w)).unwrap();
        assert!((&f.params.theta - &theta).amax() < 5.0 * (v / n as f64).sqrt());
        for i in 0..2 {
            assert!((f.params.sigma[(i, i)] / v - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn zero_truth_is_degenerate() {
        let x = DMatrix::<f64>::zeros(10, 1);
        let xh = gaussian_matrix::<f64>(10, 1, 1.0, 4);
        let f = gs_fit(&x, &xh).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.params.theta[(0, 0)], 0.0);
    }

    #[test]
    fn error_orthogonal_to_truth_complex() {
        let x = gaussian_matrix::<Complex64>(500, 2, 1.0, 5);
        let xh = gaussian_matrix::<Complex64>(500, 2, 1.0, 6) + &x * Complex64::new(0.3, 0.4);
        let f = gs_fit(&x, &xh).unwrap();
        let ip = x.ad_mul(&f.error);
        assert!(ip.iter().all(|v| v.norm() / (x.norm() * f.error.norm()) < 1e-12));
    }

    #[test]
    fn natural_form_of_zero_message_is_zero() {
        let nat = GsParams::<f64>::zeros(2).natural();
        assert_eq!(nat.precision.amax(), 0.0);
        let nat1 = GsParams::<f64>::scaled_identity(1, 2.0, 4.0).natural();
        assert!((nat1.precision[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((nat1.gain[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let a = DMatrix::<f64>::zeros(3, 1);
        let b = DMatrix::<f64>::zeros(4, 1);
        assert!(gs_fit(&a, &b).is_err());
        assert!(GsParams::new(DMatrix::<f64>::zeros(2, 2), DMatrix::zeros(1, 1)).is_err());
    }
}
