use crate::scalar::{Re, Real, Scalar};
use nalgebra::DMatrix;

/// `(M + M^H) / 2`.
pub fn hermitize<S: Scalar>(m: &DMatrix<S>) -> DMatrix<S> {
    let half = S::from_re(0.5);
    (m + m.adjoint()) * half
}

/// Apply `f` to the eigenvalues of a Hermitian matrix.
pub fn spectral_map<S: Scalar>(m: &DMatrix<S>, f: impl Fn(f64) -> f64) -> DMatrix<S> {
    let n = m.nrows();
    if n == 1 {
        return DMatrix::from_element(1, 1, S::from_re(f(m[(0, 0)].re_f64())));
    }
    let eig = hermitize(m).symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let w = S::from_re(f(<Re<S> as Real>::f64(*lam)));
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

pub fn min_eigenvalue<S: Scalar>(m: &DMatrix<S>) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].re_f64();
    }
    hermitize(m).symmetric_eigenvalues().iter().map(|&l: &Re<S>| <Re<S> as Real>::f64(l)).fold(f64::INFINITY, f64::min)
}

/// Hermitian square root with eigenvalues raised to at least `floor`.
pub fn hermitian_sqrt<S: Scalar>(m: &DMatrix<S>, floor: f64) -> DMatrix<S> {
    spectral_map(m, |l| l.max(floor).sqrt())
}

/// Pseudo-inverse of a Hermitian PSD matrix. Eigenvalues below
/// `rel_tol * max(|λ|)` are treated as zero; the flag reports whether any
/// were dropped.
pub fn hermitian_pinv<S: Scalar>(m: &DMatrix<S>, rel_tol: f64) -> (DMatrix<S>, bool) {
    let n = m.nrows();
    if n == 1 {
        let v = m[(0, 0)].re_f64();
        return if v.abs() > 0.0 && v.is_finite() {
            (DMatrix::from_element(1, 1, S::from_re(1.0 / v)), false)
        } else {
            (DMatrix::zeros(1, 1), true)
        };
    }
    let eig = hermitize(m).symmetric_eigen();
    let top = eig.eigenvalues.iter().map(|&l| <Re<S> as Real>::f64(l).abs()).fold(0.0, f64::max);
    let cut = rel_tol * top;
    let mut dropped = false;
    let mut scaled = eig.eigenvectors.clone();
    for (j, lam) in eig.eigenvalues.iter().enumerate() {
        let l = <Re<S> as Real>::f64(*lam);
        let w = if l.abs() > cut && top > 0.0 {
            1.0 / l
        } else {
            dropped = true;
            0.0
        };
        let w = S::from_re(w);
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    (scaled * eig.eigenvectors.adjoint(), dropped)
}
