//! Sample statistics used by the Monte-Carlo estimators.

use serde::Serialize;

/// A point estimate with its standard error (0 for exact evaluations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, std_error: 0.0 }
    }

    /// `|value| / std_error`, or 0 when both vanish.
    pub fn in_se_units(&self) -> f64 {
        if self.std_error > 0.0 {
            self.value.abs() / self.std_error
        } else if self.value == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// Welford accumulator for mean and variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        Estimate {
            value: self.mean,
            std_error: se,
        }
    }

    /// Chan's parallel merge.
    pub fn merge(&mut self, other: &Running) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }
}

pub fn estimate_of<I: IntoIterator<Item = f64>>(xs: I) -> Estimate {
    let mut r = Running::default();
    for x in xs {
        r.push(x);
    }
    r.estimate()
}

/// One-sample Kolmogorov–Smirnov statistic of `xs` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let mut v: Vec<f64> = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (k, &x)| {
        let f = cdf(x);
        d.max(f - k as f64 / n).max((k + 1) as f64 / n - f)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(|p, q| p.total_cmp(q));
    y.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|k| ((k * 37) % 101) as f64 * 0.1).collect();
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        let mut r = Running::default();
        xs.iter().for_each(|&x| r.push(x));
        assert!((r.mean() - mean).abs() < 1e-12);
        assert!((r.variance() - var).abs() < 1e-10);
    }

    #[test]
    fn merge_is_consistent() {
        let xs: Vec<f64> = (0..500).map(|k| (k as f64).sin()).collect();
        let mut all = Running::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Running::default();
        let mut b = Running::default();
        xs[..200].iter().for_each(|&x| a.push(x));
        xs[200..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn ks_of_perfect_grid() {
        let xs: Vec<f64> = (0..100).map(|k| (k as f64 + 0.5) / 100.0).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.005).abs() < 1e-12);
        assert_eq!(ks_two_sample(&xs, &xs), 0.0);
    }
}
