use serde::{Deserialize, Serialize};

use crate::normal::{fast_cdf, pdf};

/// Kernel contributions beyond this many bandwidths are treated as 0 or 1.
const CUTOFF: f64 = 9.0;

/// Gaussian kernel density on `[0, 1]` fitted to the reflected sample
/// `{-v, v, 2 - v}` and renormalised to unit mass on the interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectedKde {
    extended: Vec<f64>,
    bandwidth: f64,
    base: f64,
    mass: f64,
}

impl ReflectedKde {
    /// Fits the estimator; `sorted` must be ascending values in `(0, 1)`.
    /// Returns `None` for an empty sample.
    pub fn fit(sorted: &[f64], min_bandwidth: f64) -> Option<Self> {
        if sorted.is_empty() {
            return None;
        }
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        let mut extended = Vec::with_capacity(3 * sorted.len());
        extended.extend(sorted.iter().rev().map(|v| -v));
        extended.extend_from_slice(sorted);
        extended.extend(sorted.iter().rev().map(|v| 2.0 - v));
        let bandwidth = silverman(&extended).max(min_bandwidth);
        let mut kde = Self {
            extended,
            bandwidth,
            base: 0.0,
            mass: 1.0,
        };
        kde.base = kde.extended_cdf(0.0);
        kde.mass = kde.extended_cdf(1.0) - kde.base;
        Some(kde)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Number of original (unreflected) sample points.
    pub fn sample_len(&self) -> usize {
        self.extended.len() / 3
    }

    fn window(&self, x: f64) -> (usize, usize) {
        let reach = CUTOFF * self.bandwidth;
        let lo = self.extended.partition_point(|&e| e < x - reach);
        let hi = self.extended.partition_point(|&e| e <= x + reach);
        (lo, hi)
    }

    fn extended_cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.window(x);
        let inv_h = 1.0 / self.bandwidth;
        let partial: f64 = self.extended[lo..hi].iter().map(|&e| fast_cdf((x - e) * inv_h)).sum();
        (lo as f64 + partial) / self.extended.len() as f64
    }

    /// Density on `[0, 1]`; zero outside.
    pub fn pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let (lo, hi) = self.window(x);
        let inv_h = 1.0 / self.bandwidth;
        let total: f64 = self.extended[lo..hi].iter().map(|&e| pdf((x - e) * inv_h)).sum();
        total * inv_h / (self.extended.len() as f64 * self.mass)
    }

    /// Distribution function on `[0, 1]`, clamped outside.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        ((self.extended_cdf(x) - self.base) / self.mass).clamp(0.0, 1.0)
    }
}

/// Silverman's rule of thumb, `0.9 min(sd, IQR / 1.34) n^(-1/5)`.
fn silverman(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let inner: f64 = (1..n)
            .map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
            .sum();
        (f(a) + f(b) + inner) * h / 3.0
    }

    #[test]
    fn integrates_to_one() {
        for sample in [vec![0.5], vec![0.01, 0.02, 0.99], vec![0.9, 0.95, 0.97, 0.99, 0.999]] {
            let kde = ReflectedKde::fit(&sample, 0.05).unwrap();
            let mass = simpson(|x| kde.pdf(x), 0.0, 1.0, 20_000);
            assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
            assert_eq!(kde.cdf(0.0), 0.0);
            assert_eq!(kde.cdf(1.0), 1.0);
        }
    }

    #[test]
    fn cdf_matches_integrated_pdf() {
        let kde = ReflectedKde::fit(&[0.2, 0.25, 0.6, 0.61, 0.8], 0.05).unwrap();
        for x in [0.1, 0.3, 0.55, 0.9] {
            let integral = simpson(|s| kde.pdf(s), 0.0, x, 20_000);
            assert!((integral - kde.cdf(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn bandwidth_is_floored() {
        let kde = ReflectedKde::fit(&[0.5, 0.5, 0.5, 0.5], 0.05).unwrap();
        assert!(kde.bandwidth() >= 0.05);
        assert!(ReflectedKde::fit(&[], 0.05).is_none());
    }
}
