use super::EvalError;
use crate::tree::DepthProfile;

/// Mean absolute per-layer count difference over the shared depth
/// (`eps_min`) and over the larger depth with missing layers as zero
/// (`eps_max`).
pub fn layer_profile_errors(
    sim: &DepthProfile,
    reference: &DepthProfile,
) -> Result<(f64, f64), EvalError> {
    if sim.is_empty() || reference.is_empty() {
        return Err(EvalError::EmptyProfile);
    }
    let d_min = sim.depth().min(reference.depth());
    let d_max = sim.depth().max(reference.depth());
    let diff = |k: usize| sim.layer(k).abs_diff(reference.layer(k)) as f64;
    let shared: f64 = (1..=d_min).map(diff).sum();
    let tail: f64 = (d_min + 1..=d_max).map(diff).sum();
    Ok((shared / d_min as f64, (shared + tail) / d_max as f64))
}

/// `(predicted - actual) / actual`.
pub fn relative_size_error(mean_predicted: f64, true_size: usize) -> f64 {
    (mean_predicted - true_size as f64) / true_size as f64
}

/// Share of the final size not yet observed at the end of the window.
pub fn remaining_fraction(observed_size: usize, true_size: usize) -> f64 {
    (true_size - observed_size) as f64 / true_size as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[usize]) -> DepthProfile {
        DepthProfile::new(v.to_vec())
    }

    #[test]
    fn profile_error_examples() {
        assert_eq!(
            layer_profile_errors(&p(&[3, 2]), &p(&[3, 2])).unwrap(),
            (0.0, 0.0)
        );
        let (lo, hi) = layer_profile_errors(&p(&[2, 2, 1]), &p(&[3, 2])).unwrap();
        assert_eq!(lo, 0.5);
        assert!((hi - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            layer_profile_errors(&p(&[7]), &p(&[7])).unwrap(),
            (0.0, 0.0)
        );
        assert_eq!(
            layer_profile_errors(&p(&[]), &p(&[1])),
            Err(EvalError::EmptyProfile)
        );
    }

    #[test]
    fn size_error_examples() {
        assert_eq!(relative_size_error(100.0, 100), 0.0);
        assert_eq!(relative_size_error(150.0, 100), 0.5);
        assert!((relative_size_error(80.0, 100) + 0.2).abs() < 1e-15);
        assert_eq!(remaining_fraction(10, 10), 0.0);
    }
}
