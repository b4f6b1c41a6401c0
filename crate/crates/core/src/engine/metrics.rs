use crate::error::{dim_check, Result};
use crate::gs_model::EstimateMessage;
use crate::scalar::Scalar;
use nalgebra::DMatrix;

/// Sign decision of every component of a message.
pub fn hard_decide<S: Scalar>(msg: &EstimateMessage<S>) -> DMatrix<S> {
    crate::estimators::hard_decide(&msg.values)
}

/// Per-column mean squared error, averaged over rows.
pub fn mse<S: Scalar>(est: &DMatrix<S>, truth: &DMatrix<S>) -> Result<Vec<f64>> {
    dim_check(est.shape() == truth.shape(), || format!("estimate {:?} vs truth {:?}", est.shape(), truth.shape()))?;
    let n = est.nrows().max(1) as f64;
    Ok((0..est.ncols())
        .map(|c| est.column(c).iter().zip(truth.column(c).iter()).map(|(a, b)| (*a - *b).abs2_f64()).sum::<f64>() / n)
        .collect())
}

/// Mean over all entries of [`mse`].
pub(crate) fn mse_total<S: Scalar>(est: &DMatrix<S>, truth: &DMatrix<S>) -> f64 {
    let n = (est.nrows() * est.ncols()).max(1) as f64;
    est.iter().zip(truth.iter()).map(|(a, b)| (*a - *b).abs2_f64()).sum::<f64>() / n
}

/// Fraction of wrong bits; complex entries carry one bit per component.
pub fn ber<S: Scalar>(decided: &DMatrix<S>, truth: &DMatrix<S>) -> Result<f64> {
    dim_check(decided.shape() == truth.shape(), || {
        format!("decisions {:?} vs truth {:?}", decided.shape(), truth.shape())
    })?;
    let mut errors = 0usize;
    let mut bits = 0usize;
    for (d, x) in decided.iter().zip(truth.iter()) {
        errors += usize::from((d.re_f64() >= 0.0) != (x.re_f64() >= 0.0));
        bits += 1;
        if S::IS_COMPLEX {
            errors += usize::from((d.im_f64() >= 0.0) != (x.im_f64() >= 0.0));
            bits += 1;
        }
    }
    Ok(if bits == 0 { 0.0 } else { errors as f64 / bits as f64 })
}

/// Mean of `|x|²` over all entries.
pub(crate) fn power<S: Scalar>(x: &DMatrix<S>) -> f64 {
    let n = (x.nrows() * x.ncols()).max(1) as f64;
    x.iter().map(|v| v.abs2_f64()).sum::<f64>() / n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elementary_cases() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, -1.0, 1.0, 1.0, 1.0]);
        assert_eq!(mse(&x, &x).unwrap(), vec![0.0, 0.0]);
        assert_eq!(ber(&x, &x).unwrap(), 0.0);
        assert_eq!(ber(&(-&x), &x).unwrap(), 1.0);
        assert_eq!(mse(&DMatrix::zeros(3, 2), &x).unwrap(), vec![1.0, 1.0]);
        assert!(mse(&DMatrix::zeros(2, 2), &x).is_err());
    }
}
