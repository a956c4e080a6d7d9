//! Streaming moments and distribution-comparison statistics.

/// Mergeable running moments up to fourth order (Welford / Chan updates).
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let delta_n = delta / n;
        let delta_n2 = delta_n * delta_n;
        let term1 = delta * delta_n * n1;
        self.mean += delta_n;
        self.m4 += term1 * delta_n2 * (n * n - 3.0 * n + 3.0)
            + 6.0 * delta_n2 * self.m2
            - 4.0 * delta_n * self.m3;
        self.m3 += term1 * delta_n * (n - 2.0) - 3.0 * delta_n * self.m2;
        self.m2 += term1;
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta = other.mean - self.mean;
        let d2 = delta * delta;
        let d3 = d2 * delta;
        let d4 = d2 * d2;
        let m2 = self.m2 + other.m2 + d2 * na * nb / n;
        let m3 = self.m3
            + other.m3
            + d3 * na * nb * (na - nb) / (n * n)
            + 3.0 * delta * (na * other.m2 - nb * self.m2) / n;
        let m4 = self.m4
            + other.m4
            + d4 * na * nb * (na * na - na * nb + nb * nb) / (n * n * n)
            + 6.0 * d2 * (na * na * other.m2 + nb * nb * self.m2) / (n * n)
            + 4.0 * delta * (na * other.m3 - nb * self.m3) / n;
        self.mean += delta * nb / n;
        self.m2 = m2;
        self.m3 = m3;
        self.m4 = m4;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample variance (n - 1 denominator); 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n > 1 {
            self.m2 / (self.n - 1) as f64
        } else {
            0.0
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn se_mean(&self) -> f64 {
        if self.n > 0 {
            (self.variance() / self.n as f64).sqrt()
        } else {
            0.0
        }
    }

    /// Population skewness g1.
    pub fn skewness(&self) -> f64 {
        if self.n < 2 || self.m2 == 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m3 / n) / (self.m2 / n).powf(1.5)
    }

    /// Excess kurtosis g2.
    pub fn kurtosis_excess(&self) -> f64 {
        if self.n < 2 || self.m2 == 0.0 {
            return 0.0;
        }
        let n = self.n as f64;
        (self.m4 / n) / (self.m2 / n).powi(2) - 3.0
    }

    /// Asymptotic standard error of the sample variance (normal theory).
    pub fn se_variance(&self) -> f64 {
        if self.n > 1 {
            self.variance() * (2.0 / (self.n - 1) as f64).sqrt()
        } else {
            0.0
        }
    }
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// One-sample Kolmogorov-Smirnov statistic against the standard normal.
/// `samples` must be sorted ascending.
pub fn ks_statistic_normal(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = std_normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Asymptotic Kolmogorov p-value for a one-sample statistic `d` at sample
/// size `n`: with `lambda = sqrt(n) * d`, the survival function is the
/// alternating series `2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut p = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64 * lambda).powi(2)).exp();
        if term < 1e-18 {
            break;
        }
        p += if k % 2 == 1 { 2.0 * term } else { -2.0 * term };
    }
    p.clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov distance, tie-aware. Inputs sorted.
pub fn two_sample_ks(xs: &[f64], ys: &[f64]) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Snap a value to a grid. Distributions produced by algebraically equal
/// but numerically different routes carry their atoms on slightly different
/// floats; quantizing before an empirical-CDF comparison merges those atoms
/// instead of counting them as displaced mass.
pub fn quantize(x: f64, grid: f64) -> f64 {
    (x / grid).round() * grid
}

/// Pearson correlation of the two coordinates of a point set.
pub fn pearson_correlation(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for p in points {
        let dx = p[0] - mx;
        let dy = p[1] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;

    #[test]
    fn moments_match_direct_formulas() {
        let xs = [1.0, 4.0, -2.0, 8.0, 3.0, 3.5, -1.0];
        let m = Moments::from_slice(&xs);
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let mut rng = Stream::from_seed(1);
        let xs: Vec<f64> = (0..500).map(|_| rng.normal() * 3.0 + 1.0).collect();
        let whole = Moments::from_slice(&xs);
        for split in [1, 100, 250, 499] {
            let mut a = Moments::from_slice(&xs[..split]);
            let b = Moments::from_slice(&xs[split..]);
            a.merge(&b);
            assert!((a.mean() - whole.mean()).abs() < 1e-10);
            assert!((a.variance() - whole.variance()).abs() < 1e-9);
            assert!((a.skewness() - whole.skewness()).abs() < 1e-8);
            assert!((a.kurtosis_excess() - whole.kurtosis_excess()).abs() < 1e-7);
        }
    }

    #[test]
    fn normal_cdf_reference_values() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((std_normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
        assert!((std_normal_cdf(-1.0) - 0.15865525393145707).abs() < 1e-12);
    }

    #[test]
    fn ks_p_value_reference() {
        // standard critical points of the Kolmogorov distribution:
        // Q(1.3581) = 0.05 and Q(1.6276) = 0.01
        assert!((ks_p_value(1.3581, 1) - 0.05).abs() < 5e-4);
        assert!((ks_p_value(1.6276, 1) - 0.01).abs() < 2e-4);
        assert_eq!(ks_p_value(0.001, 100), 1.0);
    }

    #[test]
    fn ks_statistic_on_normal_samples_is_small() {
        let mut rng = Stream::from_seed(2);
        let mut xs: Vec<f64> = (0..4000).map(|_| rng.normal()).collect();
        xs.sort_by(f64::total_cmp);
        let d = ks_statistic_normal(&xs);
        assert!(d < 1.63 / (4000f64).sqrt(), "d = {d}"); // alpha = 0.01
    }

    #[test]
    fn ks_p_value_roughly_uniform_under_null() {
        // self-calibration: p-values of normal samples should not pile up
        let root = Stream::from_seed(3);
        let mut ps = Vec::new();
        for i in 0..200 {
            let mut s = root.child("rep", i);
            let mut xs: Vec<f64> = (0..500).map(|_| s.normal()).collect();
            xs.sort_by(f64::total_cmp);
            ps.push(ks_p_value(ks_statistic_normal(&xs), xs.len()));
        }
        let low = ps.iter().filter(|&&p| p < 0.01).count();
        let mid = ps.iter().filter(|&&p| p > 0.3).count();
        assert!(low <= 6, "too many tiny p-values: {low}");
        assert!(mid >= 100, "p-values asymmetric: {mid}");
    }

    #[test]
    fn two_sample_ks_basics() {
        let xs = [1.0, 2.0, 3.0];
        assert_eq!(two_sample_ks(&xs, &xs), 0.0);
        let ys = [10.0, 11.0, 12.0];
        assert_eq!(two_sample_ks(&xs, &ys), 1.0);
        // ties across samples
        let a = [0.0, 1.0, 1.0, 2.0];
        let b = [0.0, 1.0, 2.0, 2.0];
        assert!((two_sample_ks(&a, &b) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn correlation_signs() {
        let up: Vec<[f64; 2]> = (0..100).map(|i| [i as f64, 2.0 * i as f64]).collect();
        assert!((pearson_correlation(&up) - 1.0).abs() < 1e-12);
        let down: Vec<[f64; 2]> = (0..100).map(|i| [i as f64, -i as f64]).collect();
        assert!((pearson_correlation(&down) + 1.0).abs() < 1e-12);
        let mut rng = Stream::from_seed(4);
        let indep: Vec<[f64; 2]> = (0..50_000).map(|_| [rng.normal(), rng.normal()]).collect();
        assert!(pearson_correlation(&indep).abs() < 3.0 / (50_000f64).sqrt() * 1.5);
    }
}
