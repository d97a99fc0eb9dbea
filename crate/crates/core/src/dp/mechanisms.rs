use super::{Epsilon, RandomStream};

/// Inverse CDF of Laplace(0, `scale`) evaluated at `u` in (0, 1).
pub fn laplace_inverse_cdf(u: f64, scale: f64) -> f64 {
    let centered = u - 0.5;
    if centered == 0.0 {
        return 0.0;
    }
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// One draw from Laplace(0, `scale`). Panics unless `scale > 0`.
pub fn laplace(scale: f64, rng: &mut RandomStream) -> f64 {
    assert!(scale > 0.0 && scale.is_finite(), "laplace scale must be finite and > 0, got {scale}");
    laplace_inverse_cdf(rng.uniform_open01(), scale)
}

/// Exponential mechanism: index `i` is chosen with probability proportional
/// to `exp(eps * scores[i] / (2 * sensitivity))`. Panics on an empty score set.
pub fn exp_mechanism(scores: &[f64], eps: Epsilon, sensitivity: f64, rng: &mut RandomStream) -> usize {
    assert!(!scores.is_empty(), "exponential mechanism needs at least one candidate");
    assert!(sensitivity > 0.0, "score sensitivity must be > 0");
    if scores.len() == 1 {
        return 0;
    }
    let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let factor = eps.value() / (2.0 * sensitivity);
    let weights: Vec<f64> = scores.iter().map(|s| ((s - top) * factor).exp()).collect();
    rng.weighted_index(&weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_cdf_closed_form() {
        assert_eq!(laplace_inverse_cdf(0.5, 3.0), 0.0);
        // u = 0.9: -(1) * ln(1 - 0.8) = -ln 0.2
        let v = laplace_inverse_cdf(0.9, 1.0);
        assert!((v - 1.609_437_912_434_100_3).abs() < 1e-12, "{v}");
        assert!((laplace_inverse_cdf(0.9, 2.5) - 2.5 * 1.609_437_912_434_100_3).abs() < 1e-12);
    }

    #[test]
    fn inverse_cdf_is_antisymmetric() {
        for &u in &[0.01, 0.2, 0.37, 0.49, 0.75, 0.999] {
            let a = laplace_inverse_cdf(u, 1.3);
            let b = laplace_inverse_cdf(1.0 - u, 1.3);
            assert!((a + b).abs() < 1e-9, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn laplace_moments() {
        let mut rng = RandomStream::new(2024);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace(1.0, &mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn single_candidate_is_free() {
        let mut rng = RandomStream::new(1);
        let eps = Epsilon::new(1.0).unwrap();
        for _ in 0..10 {
            assert_eq!(exp_mechanism(&[-5.0], eps, 1.0, &mut rng), 0);
        }
    }

    #[test]
    fn equal_scores_are_uniform() {
        let mut rng = RandomStream::new(11);
        let eps = Epsilon::new(4.0).unwrap();
        let mut counts = [0u32; 4];
        for _ in 0..40_000 {
            counts[exp_mechanism(&[2.0; 4], eps, 1.0, &mut rng)] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 / 40_000.0 - 0.25).abs() < 0.01), "{counts:?}");
    }

    #[test]
    fn shift_invariance() {
        let eps = Epsilon::new(2.0).unwrap();
        let mut a = RandomStream::new(8);
        let mut b = RandomStream::new(8);
        for _ in 0..1_000 {
            let i = exp_mechanism(&[0.0, -1.0, -3.0], eps, 1.0, &mut a);
            let j = exp_mechanism(&[100.0, 99.0, 97.0], eps, 1.0, &mut b);
            assert_eq!(i, j);
        }
    }
}
