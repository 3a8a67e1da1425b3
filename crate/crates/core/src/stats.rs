//! Batch-means error bars and small fitting helpers.

/// Mean, batch-means standard error and effective sample size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchMeans {
    pub mean: f64,
    pub se: f64,
    pub ess: f64,
    pub n: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

/// Batch means with `batches` equal batches (remainder dropped from the
/// front). The series variance over the squared error gives the ESS,
/// clamped to `[1, n]`.
pub fn batch_means(xs: &[f64], batches: usize) -> BatchMeans {
    let n = xs.len();
    let m = mean(xs);
    let var = variance(xs);
    if n == 0 {
        return BatchMeans { mean: f64::NAN, se: f64::NAN, ess: 0.0, n };
    }
    if var == 0.0 {
        return BatchMeans { mean: m, se: 0.0, ess: n as f64, n };
    }
    let b = batches.clamp(2, n.max(2));
    let len = n / b;
    if len == 0 {
        let se = (var / n as f64).sqrt();
        return BatchMeans { mean: m, se, ess: n as f64, n };
    }
    let start = n - b * len;
    let bm: Vec<f64> = (0..b)
        .map(|i| mean(&xs[start + i * len..start + (i + 1) * len]))
        .collect();
    let se = (variance(&bm) / b as f64).sqrt();
    let ess = if se > 0.0 { (var / (se * se)).clamp(1.0, n as f64) } else { n as f64 };
    // The naive error is a floor: positive correlations only inflate it.
    let se = se.max((var / ess.max(1.0)).sqrt());
    BatchMeans { mean: m, se, ess, n }
}

/// Merges independent chains: pooled mean, errors added in quadrature.
pub fn combine(parts: &[BatchMeans]) -> BatchMeans {
    let n: usize = parts.iter().map(|p| p.n).sum();
    if n == 0 {
        return BatchMeans { mean: f64::NAN, se: f64::NAN, ess: 0.0, n };
    }
    let mean = parts.iter().map(|p| p.mean * p.n as f64).sum::<f64>() / n as f64;
    let se = parts
        .iter()
        .map(|p| (p.se * p.n as f64 / n as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    let ess = parts.iter().map(|p| p.ess).sum::<f64>();
    BatchMeans { mean, se, ess, n }
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Relative spread `(max − min) / mean`.
pub fn relative_spread(xs: &[f64]) -> f64 {
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / mean(xs).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_series_has_zero_error() {
        let b = batch_means(&[1.0; 500], 20);
        assert_eq!(b.mean, 1.0);
        assert_eq!(b.se, 0.0);
        assert_eq!(b.ess, 500.0);
    }

    #[test]
    fn iid_series_error_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..40_000).map(|_| rng.sample(StandardNormal)).collect();
        let b = batch_means(&xs, 40);
        let naive = (1.0f64 / 40_000.0).sqrt();
        assert!((b.se / naive - 1.0).abs() < 0.35, "{} vs {naive}", b.se);
        assert!(b.ess <= 40_000.0);
    }

    #[test]
    fn correlated_series_inflates_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut x = 0.0;
        let rho: f64 = 0.95;
        let xs: Vec<f64> = (0..100_000)
            .map(|_| {
                let e: f64 = rng.sample(StandardNormal);
                x = rho * x + (1.0 - rho * rho).sqrt() * e;
                x
            })
            .collect();
        let b = batch_means(&xs, 50);
        // Integrated autocorrelation time (1+ρ)/(1−ρ) = 39.
        let expect = (39.0f64 / 100_000.0).sqrt();
        assert!((b.se / expect - 1.0).abs() < 0.4, "{} vs {expect}", b.se);
    }

    #[test]
    fn fit_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let (s, c) = linear_fit(&x, &y);
        assert!((s + 0.5).abs() < 1e-14 && (c - 3.0).abs() < 1e-14);
    }
}
