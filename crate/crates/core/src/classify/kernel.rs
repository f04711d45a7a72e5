//! The Gaussian (RBF) similarity between two RSSI fingerprints.

use super::{ClassifyError, KernelParams};

/// K(u, v) = exp(−‖u−v‖² / (2σ²)), in (0, 1].
///
/// Small σ² makes the classifier memorize (every training point an island);
/// large σ² smooths everything toward 1 and the decision boundary toward a
/// hyperplane. Inputs must already be dense (imputation upstream).
pub fn gaussian_kernel(u: &[f64], v: &[f64], params: &KernelParams) -> Result<f64, ClassifyError> {
    if u.len() != v.len() {
        return Err(ClassifyError::LengthMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    if !(params.sigma2 > 0.0) {
        return Err(ClassifyError::InvalidSigma(params.sigma2));
    }
    let squared: f64 = u
        .iter()
        .zip(v)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((-squared / (2.0 * params.sigma2)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_vectors_score_one() {
        let u = [-80.0, -95.5, -140.0];
        let k = gaussian_kernel(&u, &u, &KernelParams::new(4.0)).unwrap();
        assert_eq!(k, 1.0);
    }

    #[test]
    fn distance_of_2_sigma2_scores_e_inverse() {
        // ‖u−v‖² = 8 = 2σ² for σ² = 4 → exp(−1).
        let u = [0.0, 0.0];
        let v = [2.0, 2.0];
        let k = gaussian_kernel(&u, &v, &KernelParams::new(4.0)).unwrap();
        assert!((k - (-1f64).exp()).abs() < 1e-15, "got {k}");
        assert!((k - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn widening_sigma_approaches_one_monotonically() {
        let u = [-72.0, -99.0];
        let v = [-75.0, -96.0];
        let mut prev = 0.0;
        for sigma2 in [0.5, 2.0, 8.0, 32.0, 1024.0] {
            let k = gaussian_kernel(&u, &v, &KernelParams::new(sigma2)).unwrap();
            assert!(k > prev && k <= 1.0, "not monotone at sigma2={sigma2}");
            prev = k;
        }
        assert!(prev > 0.99, "large sigma2 should approach 1, got {prev}");
    }

    #[test]
    fn rejects_bad_input() {
        let err = gaussian_kernel(&[1.0, 2.0], &[1.0], &KernelParams::new(1.0)).unwrap_err();
        assert!(matches!(err, ClassifyError::LengthMismatch { .. }));
        let err = gaussian_kernel(&[1.0], &[1.0], &KernelParams::new(0.0)).unwrap_err();
        assert!(matches!(err, ClassifyError::InvalidSigma(_)));
    }
}
