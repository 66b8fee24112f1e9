//! Order-preserving parallel sampling and streaming moment summaries.

use rayon::prelude::*;

use crate::rng::{SeedRecord, StreamRng};

/// Runs `f` once per stream index `0..n` under key `key`, in parallel,
/// returning results in index order.
pub fn par_streams<T, F>(key: u64, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(SeedRecord, &mut StreamRng) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let rec = SeedRecord::new(key, i);
            let mut rng = rec.rng();
            f(rec, &mut rng)
        })
        .collect()
}

/// Welford accumulator; `merge` combines disjoint batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl Summary {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Summary) -> Summary {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        Summary { n, mean, m2 }
    }

    pub fn from_slice(xs: &[f64]) -> Summary {
        let mut s = Summary::default();
        for &x in xs {
            s.push(x);
        }
        s
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

/// `(estimate - target) / se`, with `0` for an exact zero-variance match.
pub fn z_score(estimate: f64, target: f64, se: f64) -> f64 {
    let diff = estimate - target;
    if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * target.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY * diff.signum()
    }
}

/// Sample median; NaN for an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let all = Summary::from_slice(&xs);
        let merged = Summary::from_slice(&xs[..33]).merge(&Summary::from_slice(&xs[33..]));
        assert_eq!(all.n, merged.n);
        assert!((all.mean - merged.mean).abs() < 1e-14);
        assert!((all.variance() - merged.variance()).abs() < 1e-13);
    }

    #[test]
    fn par_streams_is_ordered() {
        use rand::Rng;
        let a = par_streams(5, 50, |rec, rng| (rec.stream, rng.random::<u32>()));
        let b: Vec<_> = (0..50u64)
            .map(|i| (i, SeedRecord::new(5, i).rng().random::<u32>()))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
