//! The training loss: an L1 term on uniform samples blended with an L1
//! term on partition-boundary samples.

use crate::error::{Error, Result};
use crate::Real;

/// Mean absolute error pooled over all entries (samples x channels).
pub fn l1_mean<T: Real>(pred: &[T], reference: &[T]) -> Result<T> {
    if pred.len() != reference.len() {
        return Err(Error::shape(format!(
            "l1 inputs differ in length: {} vs {}",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = pred
        .iter()
        .zip(reference)
        .map(|(&p, &r)| (p - r).abs())
        .sum();
    Ok(sum / T::from_usize(pred.len()).unwrap())
}

/// Blended training loss
/// `(1 - lambda) * L1(uniform) + lambda * L1(boundary)`.
///
/// An empty boundary pair (single partition) contributes nothing and the
/// blend weight is dropped: the loss is exactly the uniform term.
pub fn loss_total<T: Real>(
    pred_uniform: &[T],
    ref_uniform: &[T],
    pred_boundary: &[T],
    ref_boundary: &[T],
    lambda: T,
) -> Result<T> {
    let u = l1_mean(pred_uniform, ref_uniform)?;
    if pred_boundary.is_empty() && ref_boundary.is_empty() {
        return Ok(u);
    }
    let b = l1_mean(pred_boundary, ref_boundary)?;
    Ok((T::one() - lambda) * u + lambda * b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blends_uniform_and_boundary_terms() {
        // L1_u = 0.2, L1_b = 0.4, lambda 0.5 -> 0.3
        let pu = [0.2f64, 0.2];
        let ru = [0.0, 0.0];
        let pb = [0.4];
        let rb = [0.0];
        let l = loss_total(&pu, &ru, &pb, &rb, 0.5).unwrap();
        assert!((l - 0.3).abs() < 1e-15);
    }

    #[test]
    fn lambda_zero_recovers_uniform_term() {
        let pu = [0.5, 0.1];
        let ru = [0.0, 0.0];
        let pb = [9.0];
        let rb = [0.0];
        let l = loss_total(&pu, &ru, &pb, &rb, 0.0).unwrap();
        assert_eq!(l, l1_mean(&pu, &ru).unwrap());
    }

    #[test]
    fn empty_boundary_set_ignores_lambda() {
        let pu = [0.5, 0.1];
        let ru = [0.0, 0.0];
        let l = loss_total(&pu, &ru, &[], &[], 0.5).unwrap();
        assert_eq!(l, l1_mean(&pu, &ru).unwrap());
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(loss_total(&[0.0], &[0.0, 1.0], &[], &[], 0.5).is_err());
        assert!(loss_total(&[0.0], &[0.0], &[1.0], &[], 0.5).is_err());
    }
}
