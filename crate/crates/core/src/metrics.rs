use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Frobenius-norm relative error `‖û − u‖ / ‖u‖`.
pub fn relative_error(predicted: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if predicted.shape() != reference.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {:?}, reference is {:?}",
            predicted.shape(),
            reference.shape()
        )));
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::InvalidArgument("reference field has zero norm".into()));
    }
    Ok((predicted - reference).norm() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn field() -> DMatrix<f64> {
        DMatrix::from_fn(7, 5, |i, j| (i as f64 - 2.5) * (j as f64 + 0.5))
    }

    #[test]
    fn reference_values() {
        let u = field();
        assert_eq!(relative_error(&u, &u).unwrap(), 0.0);
        assert_eq!(relative_error(&DMatrix::zeros(7, 5), &u).unwrap(), 1.0);
        assert_eq!(relative_error(&(&u * 2.0), &u).unwrap(), 1.0);
    }

    #[test]
    fn rejects_zero_reference_and_shape_mismatch() {
        let z = DMatrix::zeros(3, 3);
        assert!(relative_error(&z, &z).is_err());
        assert!(relative_error(&DMatrix::zeros(2, 3), &field()).is_err());
    }

    proptest! {
        #[test]
        fn scale_covariant(k in 0u32..8, data in proptest::collection::vec(-5.0f64..5.0, 12)) {
            // powers of two keep the scaling exact in floating point
            let c = 2f64.powi(k as i32 - 4);
            let u = DMatrix::from_fn(3, 2, |i, j| data[i * 2 + j] + 0.1);
            let p = DMatrix::from_fn(3, 2, |i, j| data[6 + i * 2 + j]);
            prop_assert_eq!(relative_error(&(&p * c), &(&u * c)).unwrap(), relative_error(&p, &u).unwrap());
        }
    }
}
