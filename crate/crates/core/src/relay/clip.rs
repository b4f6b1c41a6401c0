use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::{norm_pdf, q_func};
use nalgebra::DMatrix;

/// Per-component clipping at `±threshold` followed by division by `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipSpec {
    pub threshold: f64,
    pub scale: f64,
    pub cr_db: f64,
}

/// Gaussian moments of `clip(y)` for `y` zero-mean with total power `P`
/// (split over two components in complex mode).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClipMoments {
    /// `E{Re(y* clip(y))}`
    pub cross: f64,
    /// `E{|clip(y)|²}`
    pub power: f64,
    /// `E{|clip(y) - y|²}`
    pub distortion: f64,
}

/// Moments for one real component `y ∼ N(0, var)` clipped at `±z`.
fn component_moments(var: f64, z: f64) -> ClipMoments {
    if var <= 0.0 {
        return ClipMoments { cross: 0.0, power: 0.0, distortion: 0.0 };
    }
    if z.is_infinite() {
        return ClipMoments { cross: var, power: var, distortion: 0.0 };
    }
    let s = var.sqrt();
    let a = z / s;
    let q = q_func(a);
    let phi = norm_pdf(a);
    let inner = 1.0 - 2.0 * q;
    ClipMoments {
        cross: var * inner,
        power: var * (inner - 2.0 * a * phi) + 2.0 * z * z * q,
        distortion: 2.0 * var * ((1.0 + a * a) * q - a * phi),
    }
}

pub fn clip_moments(power: f64, threshold: f64, complex: bool) -> ClipMoments {
    if complex {
        let c = component_moments(0.5 * power, threshold);
        ClipMoments { cross: 2.0 * c.cross, power: 2.0 * c.power, distortion: 2.0 * c.distortion }
    } else {
        component_moments(power, threshold)
    }
}

impl ClipSpec {
    /// Threshold from the clipping ratio `CR = 10 log10(Z² / E|y|²)` and the
    /// normalising scale `C = sqrt(E|clip(y)|²)` for Gaussian `y` of power
    /// `power_y`. `cr_db = +∞` disables clipping.
    pub fn from_cr(cr_db: f64, power_y: f64, complex: bool) -> Result<Self> {
        if cr_db.is_nan() || !(power_y > 0.0) {
            return Err(Error::Config(format!("invalid clipping ratio {cr_db} dB or power {power_y}")));
        }
        let threshold =
            if cr_db == f64::INFINITY { f64::INFINITY } else { (10f64.powf(cr_db / 10.0) * power_y).sqrt() };
        if !(threshold > 0.0) {
            return Err(Error::Config(format!("clipping ratio {cr_db} dB gives a zero threshold")));
        }
        let scale = clip_moments(power_y, threshold, complex).power.sqrt();
        Ok(Self { threshold, scale, cr_db })
    }

    pub fn new(threshold: f64, scale: f64) -> Result<Self> {
        if !(threshold > 0.0) || !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Config(format!("clip threshold {threshold} and scale {scale} must be positive")));
        }
        Ok(Self { threshold, scale, cr_db: f64::NAN })
    }

    pub fn is_active(&self) -> bool {
        self.threshold.is_finite()
    }

    pub fn clip_f64(&self, y: f64) -> f64 {
        y.clamp(-self.threshold, self.threshold)
    }

    /// Bussgang gain of `η` for Gaussian input of power `power_y`:
    /// `E{y* η(y)} / E{|y|²}`.
    pub fn bussgang_gain(&self, power_y: f64, complex: bool) -> f64 {
        clip_moments(power_y, self.threshold, complex).cross / (power_y * self.scale)
    }
}

pub fn clip<S: Scalar>(y: &DMatrix<S>, spec: &ClipSpec) -> DMatrix<S> {
    y.map(|v| S::from_parts(spec.clip_f64(v.re_f64()), spec.clip_f64(v.im_f64())))
}

/// Normalised clipping `η(y) = clip(y) / C`.
pub fn eta<S: Scalar>(y: &DMatrix<S>, spec: &ClipSpec) -> DMatrix<S> {
    let c = spec.scale;
    y.map(|v| S::from_parts(spec.clip_f64(v.re_f64()) / c, spec.clip_f64(v.im_f64()) / c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn saturation_and_pass_band() {
        let spec = ClipSpec::new(1.0, 1.0).unwrap();
        assert_eq!(spec.clip_f64(2.5), 1.0);
        assert_eq!(spec.clip_f64(-3.0), -1.0);
        assert_eq!(spec.clip_f64(0.25), 0.25);
    }

    #[test]
    fn zero_db_unit_power_gives_unit_threshold() {
        let spec = ClipSpec::from_cr(0.0, 1.0, false).unwrap();
        assert!((spec.threshold - 1.0).abs() < 1e-15);
        let off = ClipSpec::from_cr(f64::INFINITY, 2.0, false).unwrap();
        assert!(!off.is_active());
        assert!((off.scale - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn moments_are_consistent() {
        for &(p, z) in &[(1.0, 0.5), (2.0, 1.0), (1.25, 3.0)] {
            let m = clip_moments(p, z, false);
            // E|c - y|² = E|y|² - 2E[yc] + E|c|²
            assert!((m.distortion - (p - 2.0 * m.cross + m.power)).abs() < 1e-12);
        }
    }
}
