use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::{FftPlan, Re, Scalar};
use nalgebra::DMatrix;
use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;
use rustfft::FftPlanner;
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    ExplicitDense,
    PermutedDft,
    Identity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

#[derive(Clone)]
struct FastTransform<S: Scalar> {
    perm: Vec<usize>,
    flip: Vec<bool>,
    plan: FftPlan<Re<S>>,
}

#[derive(Clone)]
enum Repr<S: Scalar> {
    Dense(DMatrix<S>),
    Fast(FastTransform<S>),
    Identity,
}

/// Square orthogonal (unitary in complex mode) operator `V`.
#[derive(Clone)]
pub struct OrthogonalOperator<S: Scalar> {
    dim: usize,
    seed: u64,
    repr: Repr<S>,
}

impl<S: Scalar> fmt::Debug for OrthogonalOperator<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrthogonalOperator")
            .field("dim", &self.dim)
            .field("kind", &self.kind())
            .field("seed", &self.seed)
            .finish()
    }
}

pub fn identity<S: Scalar>(n: usize) -> OrthogonalOperator<S> {
    OrthogonalOperator { dim: n, seed: 0, repr: Repr::Identity }
}

/// Haar-distributed orthogonal matrix via QR of an IID Gaussian matrix,
/// with the diagonal of `R` rotated to the positive real axis.
pub fn sample_haar<S: Scalar>(n: usize, seed: u64) -> Result<OrthogonalOperator<S>> {
    if n == 0 {
        return Err(Error::Dimension("Haar dimension must be positive".into()));
    }
    let g = super::gaussian_matrix::<S>(n, n, 1.0, seed);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let mag = d.abs2_f64().sqrt();
        let phase = if mag > 0.0 { S::from_parts(d.re_f64() / mag, d.im_f64() / mag) } else { S::from_re(1.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(OrthogonalOperator { dim: n, seed, repr: Repr::Dense(q) })
}

/// `V = Π F D`: random sign diagonal, unitary transform, random row
/// permutation. Works for every `n >= 1` in `O(n log n)`.
pub fn permuted_dft<S: Scalar>(n: usize, seed: u64) -> Result<OrthogonalOperator<S>> {
    if n == 0 {
        return Err(Error::Dimension("transform dimension must be positive".into()));
    }
    let mut rng = stream(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let flip = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut planner = FftPlanner::<Re<S>>::new();
    let plan = FftPlan { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) };
    Ok(OrthogonalOperator { dim: n, seed, repr: Repr::Fast(FastTransform { perm, flip, plan }) })
}

impl<S: Scalar> OrthogonalOperator<S> {
    /// Wrap an explicit matrix. Orthogonality is checked to `tol` entrywise.
    pub fn from_dense(m: DMatrix<S>, seed: u64, tol: f64) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::Dimension(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let dev = orthogonality_defect(&m);
        if dev > tol {
            return Err(Error::Numerical(format!("matrix is not orthogonal: max |V^H V - I| = {dev:e}")));
        }
        Ok(Self { dim: n, seed, repr: Repr::Dense(m) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> OperatorKind {
        match self.repr {
            Repr::Dense(_) => OperatorKind::ExplicitDense,
            Repr::Fast(_) => OperatorKind::PermutedDft,
            Repr::Identity => OperatorKind::Identity,
        }
    }

    pub fn forward(&self, x: &DMatrix<S>) -> Result<DMatrix<S>> {
        self.apply(x, Direction::Forward)
    }

    pub fn adjoint(&self, x: &DMatrix<S>) -> Result<DMatrix<S>> {
        self.apply(x, Direction::Adjoint)
    }

    pub fn apply(&self, x: &DMatrix<S>, dir: Direction) -> Result<DMatrix<S>> {
        if x.nrows() != self.dim {
            return Err(Error::Dimension(format!("operator of dimension {} applied to {} rows", self.dim, x.nrows())));
        }
        Ok(match (&self.repr, dir) {
            (Repr::Identity, _) => x.clone(),
            (Repr::Dense(v), Direction::Forward) => v * x,
            (Repr::Dense(v), Direction::Adjoint) => v.ad_mul(x),
            (Repr::Fast(f), d) => f.apply(x, d),
        })
    }

    /// Explicit matrix of the operator (`n` transform applications for the
    /// fast kind).
    pub fn to_dense(&self) -> DMatrix<S> {
        match &self.repr {
            Repr::Dense(v) => v.clone(),
            _ => self.forward(&DMatrix::identity(self.dim, self.dim)).expect("identity has matching rows"),
        }
    }
}

impl<S: Scalar> FastTransform<S> {
    fn apply(&self, x: &DMatrix<S>, dir: Direction) -> DMatrix<S> {
        let n = x.nrows();
        let mut out = x.clone();
        let mut buf = vec![S::zero(); n];
        let mut scratch: Vec<Complex<Re<S>>> = Vec::with_capacity(n);
        for col in out.as_mut_slice().chunks_exact_mut(n) {
            match dir {
                Direction::Forward => {
                    for (i, v) in col.iter_mut().enumerate() {
                        if self.flip[i] {
                            *v = -*v;
                        }
                    }
                    S::unitary_transform(col, &mut scratch, &self.plan, false);
                    for (i, b) in buf.iter_mut().enumerate() {
                        *b = col[self.perm[i]];
                    }
                    col.copy_from_slice(&buf);
                }
                Direction::Adjoint => {
                    for (i, &p) in self.perm.iter().enumerate() {
                        buf[p] = col[i];
                    }
                    col.copy_from_slice(&buf);
                    S::unitary_transform(col, &mut scratch, &self.plan, true);
                    for (i, v) in col.iter_mut().enumerate() {
                        if self.flip[i] {
                            *v = -*v;
                        }
                    }
                }
            }
        }
        out
    }
}

/// `max |V^H V - I|` entrywise.
pub(crate) fn orthogonality_defect<S: Scalar>(v: &DMatrix<S>) -> f64 {
    let g = v.ad_mul(v);
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            let e = g[(i, j)];
            let d = ((e.re_f64() - target).powi(2) + e.im_f64().powi(2)).sqrt();
            worst = worst.max(d);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::gaussian_matrix;
    use num_complex::Complex64;

    fn max_abs_diff<S: Scalar>(a: &DMatrix<S>, b: &DMatrix<S>) -> f64 {
        a.iter().zip(b.iter()).map(|(&x, &y)| (x - y).abs2_f64().sqrt()).fold(0.0, f64::max)
    }

    #[test]
    fn haar_is_orthogonal_real_and_complex() {
        for n in [1, 2, 7, 64] {
            let v = sample_haar::<f64>(n, 3).unwrap().to_dense();
            assert!(orthogonality_defect(&v) < 1e-10);
            let u = sample_haar::<Complex64>(n, 3).unwrap().to_dense();
            assert!(orthogonality_defect(&u) < 1e-10);
        }
        assert!(sample_haar::<f64>(0, 1).is_err());
    }

    #[test]
    fn haar_one_by_one_is_a_sign() {
        let mut seen = [false; 2];
        for seed in 0..64 {
            let v = sample_haar::<f64>(1, seed).unwrap().to_dense()[(0, 0)];
            assert_eq!(v.abs(), 1.0);
            seen[(v > 0.0) as usize] = true;
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn fast_transform_is_unitary_for_odd_sizes() {
        for n in [1, 5, 8, 12, 655, 819] {
            let v = permuted_dft::<f64>(n, 11).unwrap();
            let x = gaussian_matrix::<f64>(n, 2, 1.0, 5);
            let y = v.forward(&x).unwrap();
            for j in 0..2 {
                let rel = (y.column(j).norm() - x.column(j).norm()).abs() / x.column(j).norm();
                assert!(rel < 1e-9, "n={n}");
            }
            assert!(max_abs_diff(&v.adjoint(&y).unwrap(), &x) < 1e-9);
            let c = permuted_dft::<Complex64>(n, 11).unwrap();
            let xc = gaussian_matrix::<Complex64>(n, 2, 1.0, 5);
            assert!(max_abs_diff(&c.adjoint(&c.forward(&xc).unwrap()).unwrap(), &xc) < 1e-9);
        }
    }

    #[test]
    fn fast_transform_dense_form_matches() {
        let v = permuted_dft::<f64>(16, 2).unwrap();
        let d = v.to_dense();
        assert!(orthogonality_defect(&d) < 1e-12);
        let x = gaussian_matrix::<f64>(16, 3, 1.0, 9);
        assert!(max_abs_diff(&(&d * &x), &v.forward(&x).unwrap()) < 1e-12);
        assert!(max_abs_diff(&d.ad_mul(&x), &v.adjoint(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn unit_vector_keeps_norm() {
        let v = permuted_dft::<f64>(8, 0).unwrap();
        let mut e1 = DMatrix::zeros(8, 1);
        e1[(0, 0)] = 1.0;
        assert!((v.forward(&e1).unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_precision_transform() {
        let v = permuted_dft::<f32>(64, 1).unwrap();
        let x = gaussian_matrix::<f32>(64, 1, 1.0, 2);
        let back = v.adjoint(&v.forward(&x).unwrap()).unwrap();
        assert!(max_abs_diff(&back, &x) < 1e-5);
        let c = permuted_dft::<Complex<f32>>(64, 1).unwrap();
        let xc = gaussian_matrix::<Complex<f32>>(64, 1, 1.0, 2);
        assert!(max_abs_diff(&c.adjoint(&c.forward(&xc).unwrap()).unwrap(), &xc) < 1e-5);
    }

    #[test]
    fn operators_are_seed_deterministic() {
        let a = permuted_dft::<f64>(32, 4).unwrap().to_dense();
        let b = permuted_dft::<f64>(32, 4).unwrap().to_dense();
        assert_eq!(a, b);
        let c = permuted_dft::<f64>(32, 5).unwrap().to_dense();
        assert_ne!(a, c);
        assert_eq!(sample_haar::<f64>(9, 2).unwrap().to_dense(), sample_haar::<f64>(9, 2).unwrap().to_dense());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = identity::<f64>(4);
        assert!(matches!(v.forward(&DMatrix::zeros(3, 1)), Err(Error::Dimension(_))));
        assert!(OrthogonalOperator::from_dense(DMatrix::<f64>::from_element(2, 2, 1.0), 0, 1e-9).is_err());
    }
}
