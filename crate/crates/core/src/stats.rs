//! Interval estimates and two-sample tests used by the Monte Carlo harness.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::scalar::Scalar;

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_for_level(level: f64) -> f64 {
    let normal = Normal::standard();
    normal.inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval<T: Scalar>(successes: u64, n: u64, z: T) -> (T, T) {
    if n == 0 {
        return (T::zero(), T::one());
    }
    let nf = T::from_usize(n as usize);
    let p = T::from_usize(successes as usize) / nf;
    let z2 = z * z;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let denom = T::one() + z2 / nf;
    let center = (p + z2 / (two * nf)) / denom;
    let half = z / denom * (p * (T::one() - p) / nf + z2 / (four * nf * nf)).sqrt();
    let lo = (center - half).max(T::zero()).min(p);
    let hi = (center + half).min(T::one()).max(p);
    (lo, hi)
}

/// Monte Carlo probability estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub p_hat: f64,
    pub n: u64,
    pub successes: u64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    pub seed: u64,
}

impl Estimate {
    pub fn from_counts(successes: u64, n: u64, level: f64, seed: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(successes, n, z_for_level(level));
        let p_hat = if n == 0 { 0.0 } else { successes as f64 / n as f64 };
        Self { p_hat, n, successes, ci_lo, ci_hi, level, seed }
    }

    /// Same counts at a different confidence level.
    pub fn at_level(&self, level: f64) -> Self {
        Self::from_counts(self.successes, self.n, level, self.seed)
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_lo <= p && p <= self.ci_hi
    }
}

/// Pearson correlation with a Fisher-z normal approximation interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Correlation {
    Estimate { r: f64, ci_lo: f64, ci_hi: f64, n: usize },
    /// One of the variables has zero sample variance.
    Degenerate { n: usize },
}

impl Correlation {
    pub fn covers_zero(&self) -> Option<bool> {
        match *self {
            Correlation::Estimate { ci_lo, ci_hi, .. } => Some(ci_lo <= 0.0 && 0.0 <= ci_hi),
            Correlation::Degenerate { .. } => None,
        }
    }

    pub fn r(&self) -> Option<f64> {
        match *self {
            Correlation::Estimate { r, .. } => Some(r),
            Correlation::Degenerate { .. } => None,
        }
    }
}

pub fn pearson(xs: &[f64], ys: &[f64], level: f64) -> Correlation {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return Correlation::Degenerate { n };
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Correlation::Degenerate { n };
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    if r.abs() == 1.0 || n <= 3 {
        return Correlation::Estimate { r, ci_lo: r, ci_hi: r, n };
    }
    let z = r.atanh();
    let se = 1.0 / (nf - 3.0).sqrt();
    let q = z_for_level(level);
    Correlation::Estimate { r, ci_lo: (z - q * se).tanh(), ci_hi: (z + q * se).tanh(), n }
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let en = ((na * nb) as f64 / (na + nb) as f64).sqrt();
    (d, kolmogorov_q((en + 0.12 + 0.11 / en) * d))
}

/// `Q_KS(x) = 2 Σ_{j≥1} (-1)^{j-1} exp(-2 j² x²)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let jf = j as f64;
        let term = sign * (-2.0 * jf * jf * x * x).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use num_rational::Ratio;
    use proptest::prelude::*;

    #[test]
    fn z_values() {
        assert_abs_diff_eq!(z_for_level(0.95), 1.959_963_984_540_054, epsilon = 1e-9);
        assert_abs_diff_eq!(z_for_level(0.99), 2.575_829_303_548_901, epsilon = 1e-9);
    }

    #[test]
    fn wilson_examples() {
        let e = Estimate::from_counts(50, 100, 0.95, 0);
        assert_eq!(e.p_hat, 0.5);
        assert_abs_diff_eq!(e.ci_lo, 0.4038, epsilon = 1e-4);
        assert_abs_diff_eq!(e.ci_hi, 0.5962, epsilon = 1e-4);
        let z = Estimate::from_counts(0, 100, 0.95, 0);
        assert_eq!((z.p_hat, z.ci_lo), (0.0, 0.0));
        assert_abs_diff_eq!(z.ci_hi, 0.0370, epsilon = 1e-4);
        let one = Estimate::from_counts(100, 100, 0.95, 0);
        assert_eq!((one.p_hat, one.ci_hi), (1.0, 1.0));
    }

    #[test]
    fn wilson_f32_agrees() {
        let (lo, hi) = wilson_interval(50u64, 100, 1.96f32);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn wilson_matches_textbook_formula() {
        // independent form: (2np + z² ± z sqrt(z² + 4np(1-p))) / (2(n + z²))
        for (k, n) in [(3u64, 10u64), (7, 40), (99, 100), (1, 1000)] {
            let z = 1.959_963_984_540_054;
            let (nf, p) = (n as f64, k as f64 / n as f64);
            let root = z * (z * z + 4.0 * nf * p * (1.0 - p)).sqrt();
            let lo = (2.0 * nf * p + z * z - root) / (2.0 * (nf + z * z));
            let hi = (2.0 * nf * p + z * z + root) / (2.0 * (nf + z * z));
            let (a, b) = wilson_interval(k, n, z);
            assert_abs_diff_eq!(a, lo, epsilon = 1e-12);
            assert_abs_diff_eq!(b, hi, epsilon = 1e-12);
        }
    }

    #[test]
    fn exact_ratio_is_representable() {
        // the Wilson centre at z=2, n=4, k=2 is exactly 1/2
        let n = 4i64;
        let p = Ratio::new(2, n);
        let z2 = Ratio::from_integer(4);
        let center = (p + z2 / (Ratio::from_integer(2) * n)) / (Ratio::from_integer(1) + z2 / n);
        assert_eq!(center, Ratio::new(1, 2));
    }

    #[test]
    fn pearson_cases() {
        let x = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        assert_eq!(pearson(&x, &x, 0.99).r(), Some(1.0));
        assert!(matches!(pearson(&[1.0; 6], &x, 0.99), Correlation::Degenerate { .. }));
        let y = [1.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        assert_eq!(pearson(&x, &y, 0.99).r(), Some(-1.0));
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..500).map(|i| i as f64 / 500.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.2).collect();
        let (d, p) = ks_two_sample(&a, &b);
        assert!((d - 0.2).abs() < 0.01);
        assert!(p < 1e-6);
        let (d0, p0) = ks_two_sample(&a, &a);
        assert_eq!(d0, 0.0);
        assert_eq!(p0, 1.0);
    }

    proptest! {
        #[test]
        fn wilson_contains_phat(n in 1u64..5000, frac in 0.0..=1.0f64, level in 0.5..0.999f64) {
            let k = ((n as f64) * frac).round() as u64;
            let e = Estimate::from_counts(k.min(n), n, level, 0);
            prop_assert!(e.ci_lo <= e.p_hat && e.p_hat <= e.ci_hi);
            prop_assert!(e.ci_lo >= 0.0 && e.ci_hi <= 1.0);
        }

        #[test]
        fn wilson_narrows_with_n(k in 1u64..50) {
            let small = Estimate::from_counts(k, 100, 0.95, 0);
            let big = Estimate::from_counts(k * 10, 1000, 0.95, 0);
            prop_assert!(big.ci_hi - big.ci_lo < small.ci_hi - small.ci_lo);
        }
    }
}
