//! Scalar abstraction over `f32`, `f64` and their complex counterparts.
//!
//! Matrices are stored in the native scalar type; per-row estimator math is
//! carried out in `f64` through [`Scalar::re_f64`] / [`Scalar::from_parts`].

use nalgebra::{ComplexField, RealField};
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftNum};
use std::fmt::Debug;
use std::sync::Arc;

pub trait Real: RealField + FftNum + FromPrimitive + ToPrimitive + Copy + Default {
    fn of(x: f64) -> Self;
    fn f64(self) -> f64;
}

impl Real for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn f64(self) -> f64 {
        self
    }
}

pub type Re<S> = <S as ComplexField>::RealField;

/// FFT plans shared by the fast operators.
#[derive(Clone)]
pub struct FftPlan<R: FftNum> {
    pub(crate) forward: Arc<dyn Fft<R>>,
    pub(crate) inverse: Arc<dyn Fft<R>>,
}

pub trait Scalar: ComplexField<RealField: Real> + Copy + Default + Send + Sync + Debug + 'static {
    const IS_COMPLEX: bool;

    fn from_parts(re: f64, im: f64) -> Self;
    fn re_f64(self) -> f64;
    fn im_f64(self) -> f64;

    fn abs2_f64(self) -> f64 {
        let (r, i) = (self.re_f64(), self.im_f64());
        r * r + i * i
    }

    fn from_re(x: f64) -> Self {
        Self::from_parts(x, 0.0)
    }

    /// Zero-mean Gaussian draw with total variance `var` (split evenly between
    /// real and imaginary parts in complex mode).
    fn gaussian<G: Rng + ?Sized>(rng: &mut G, var: f64) -> Self {
        if Self::IS_COMPLEX {
            let s = (0.5 * var).sqrt();
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Self::from_parts(s * a, s * b)
        } else {
            let a: f64 = rng.sample(StandardNormal);
            Self::from_parts(var.sqrt() * a, 0.0)
        }
    }

    /// In-place unitary transform of one column. Real mode uses the
    /// orthonormal Hartley transform (self-inverse); complex mode the unitary
    /// DFT or its inverse.
    fn unitary_transform(
        col: &mut [Self],
        scratch: &mut Vec<Complex<Self::RealField>>,
        plan: &FftPlan<Self::RealField>,
        inverse: bool,
    );
}

macro_rules! impl_real_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const IS_COMPLEX: bool = false;
            fn from_parts(re: f64, _im: f64) -> Self {
                re as $t
            }
            fn re_f64(self) -> f64 {
                self as f64
            }
            fn im_f64(self) -> f64 {
                0.0
            }
            fn unitary_transform(col: &mut [Self], scratch: &mut Vec<Complex<$t>>, plan: &FftPlan<$t>, _inverse: bool) {
                let n = col.len();
                scratch.clear();
                scratch.extend(col.iter().map(|&v| Complex::new(v, 0.0)));
                plan.forward.process(scratch);
                let scale = 1.0 / (n as $t).sqrt();
                for (c, z) in col.iter_mut().zip(scratch.iter()) {
                    *c = (z.re - z.im) * scale;
                }
            }
        }
    };
}

macro_rules! impl_complex_scalar {
    ($t:ty) => {
        impl Scalar for Complex<$t> {
            const IS_COMPLEX: bool = true;
            fn from_parts(re: f64, im: f64) -> Self {
                Complex::new(re as $t, im as $t)
            }
            fn re_f64(self) -> f64 {
                self.re as f64
            }
            fn im_f64(self) -> f64 {
                self.im as f64
            }
            fn unitary_transform(col: &mut [Self], _scratch: &mut Vec<Complex<$t>>, plan: &FftPlan<$t>, inverse: bool) {
                let n = col.len();
                if inverse {
                    plan.inverse.process(col);
                } else {
                    plan.forward.process(col);
                }
                let scale = 1.0 / (n as $t).sqrt();
                for c in col.iter_mut() {
                    *c *= scale;
                }
            }
        }
    };
}

impl_real_scalar!(f32);
impl_real_scalar!(f64);
impl_complex_scalar!(f32);
impl_complex_scalar!(f64);

/// Real part of `a^H b` summed over two equally long slices, in f64.
pub fn dot_re<S: Scalar>(a: &[S], b: &[S]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x.re_f64() * y.re_f64() + x.im_f64() * y.im_f64()).sum()
}

pub fn norm2<S: Scalar>(a: &[S]) -> f64 {
    a.iter().map(|x| x.abs2_f64()).sum()
}
