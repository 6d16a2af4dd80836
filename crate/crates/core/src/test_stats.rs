//! The standardized Neyman-Pearson statistic `V_n` and the Kolmogorov-Smirnov
//! statistic `K_n`.

use crate::alt_model::LocalAlternative;
use crate::error::{Error, Result};
use crate::quad_moments::MomentSet;

/// Observations strictly inside (0,1).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("a sample needs at least one observation"));
        }
        if let Some(x) = values.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
            return Err(Error::domain(format!("observation {x} outside (0,1)")));
        }
        Ok(Sample { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `V_n = (sqrt(n) sigma0)^{-1} sum (log p(X_i) - e0)`.
pub fn np_statistic(s: &Sample, alt: &LocalAlternative, m: &MomentSet) -> Result<f64> {
    if !(m.var0 > 0.0) {
        return Err(Error::Degenerate("null variance of log p is zero".into()));
    }
    let mut sum = 0.0;
    for &x in s.values() {
        let p = alt.spec().mixture_density(alt.theta(), x);
        if !(p > 0.0) {
            return Err(Error::domain(format!("density {p} at observation {x}")));
        }
        sum += alt.log_density(x) - m.e0;
    }
    Ok(sum / ((s.len() as f64).sqrt() * m.sigma0()))
}

/// Sum of `log p(X_i)` over raw values, for the simulation loops.
#[inline]
pub(crate) fn np_from_log_sum(log_sum: f64, n: usize, m: &MomentSet) -> f64 {
    (log_sum - n as f64 * m.e0) / ((n as f64).sqrt() * m.sigma0())
}

/// `K_n = sqrt(n) max_i max(i/n - U_(i), U_(i) - (i-1)/n)`, the exact
/// supremum of `|F_n(t) - t|`.
pub fn ks_statistic(s: &Sample) -> f64 {
    let mut sorted = s.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max);
    n.sqrt() * d
}

/// Sort-free evaluation of the same statistic.
///
/// Values are binned into `n` cells of width `1/n`. Within a cell the gap
/// `i/n - U_(i)` is largest at the cell's largest point and
/// `U_(i) - (i-1)/n` at its smallest, because successive order statistics in
/// one cell differ by less than `1/n`. Count, min and max per cell therefore
/// reproduce the sorted formula exactly in O(n).
#[derive(Debug, Default)]
pub struct KsScratch {
    count: Vec<u32>,
    min: Vec<f64>,
    max: Vec<f64>,
}

impl KsScratch {
    pub fn reset(&mut self, n: usize) {
        self.count.clear();
        self.count.resize(n, 0);
        self.min.clear();
        self.min.resize(n, f64::INFINITY);
        self.max.clear();
        self.max.resize(n, f64::NEG_INFINITY);
    }

    #[inline]
    pub fn push(&mut self, u: f64) {
        let n = self.count.len();
        let cell = ((u * n as f64) as usize).min(n - 1);
        self.count[cell] += 1;
        self.min[cell] = self.min[cell].min(u);
        self.max[cell] = self.max[cell].max(u);
    }

    /// `K_n` of the pushed values; `n` must equal the number pushed.
    pub fn statistic(&self) -> f64 {
        let n = self.count.len();
        let nf = n as f64;
        let mut before = 0u32;
        let mut d = 0.0f64;
        for cell in 0..n {
            let c = self.count[cell];
            if c == 0 {
                continue;
            }
            let upper = (before + c) as f64 / nf - self.max[cell];
            let lower = self.min[cell] - before as f64 / nf;
            d = d.max(upper.max(lower));
            before += c;
        }
        debug_assert_eq!(before as usize, n);
        nf.sqrt() * d
    }
}

pub fn ks_statistic_unsorted(values: &[f64], scratch: &mut KsScratch) -> f64 {
    scratch.reset(values.len());
    for &u in values {
        scratch.push(u);
    }
    scratch.statistic()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad_moments::{log_moments, MOMENT_TOL};
    use crate::rng::{Operation, StreamKey};
    use proptest::prelude::*;

    #[test]
    fn ks_examples() {
        let k = ks_statistic(&Sample::new(vec![0.2, 0.5, 0.9]).unwrap());
        assert!((k - 3f64.sqrt() * (0.7 / 3.0)).abs() < 1e-12);
        assert!((k - 0.40415).abs() < 1e-5);
        for n in [1usize, 2, 7, 100] {
            let comb: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let k = ks_statistic(&Sample::new(comb).unwrap());
            assert!((k - 0.5 / (n as f64).sqrt()).abs() < 1e-12);
        }
        assert!((ks_statistic(&Sample::new(vec![0.999]).unwrap()) - 0.999).abs() < 1e-15);
    }

    #[test]
    fn sample_rejects_boundary() {
        assert!(Sample::new(vec![]).is_err());
        assert!(Sample::new(vec![0.5, 1.0]).is_err());
        assert!(Sample::new(vec![0.0]).is_err());
    }

    proptest! {
        #[test]
        fn ks_permutation_invariant_and_bounded(mut xs in prop::collection::vec(1e-9f64..(1.0 - 1e-9), 1..200), seed in any::<u64>()) {
            let base = ks_statistic(&Sample::new(xs.clone()).unwrap());
            let n = xs.len();
            // deterministic shuffle
            let mut state = seed;
            for i in (1..n).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                xs.swap(i, j);
            }
            let shuffled = ks_statistic(&Sample::new(xs.clone()).unwrap());
            prop_assert_eq!(base, shuffled);
            let d = base / (n as f64).sqrt();
            prop_assert!(d > 0.0 && d <= 1.0);
            if n == 1 {
                prop_assert!((d - xs[0].max(1.0 - xs[0])).abs() < 1e-15);
            }
            let mut scratch = KsScratch::default();
            prop_assert_eq!(ks_statistic_unsorted(&xs, &mut scratch), base);
        }

        #[test]
        fn np_statistic_is_additive(split in 1usize..63, seed in any::<u64>()) {
            let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
            let m = log_moments(&alt, MOMENT_TOL).unwrap();
            let xs = alt.sample_alternative(64, &mut StreamKey::new(seed, Operation::User, 64, 0).stream());
            let whole = np_statistic(&Sample::new(xs.clone()).unwrap(), &alt, &m).unwrap();
            let left = np_statistic(&Sample::new(xs[..split].to_vec()).unwrap(), &alt, &m).unwrap();
            let right = np_statistic(&Sample::new(xs[split..].to_vec()).unwrap(), &alt, &m).unwrap();
            let combined = ((split as f64).sqrt() * left + ((64 - split) as f64).sqrt() * right) / 8.0;
            prop_assert!((whole - combined).abs() < 1e-12);
        }
    }

    #[test]
    fn np_centered_and_single_observation() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        // find t with log p(t) = e0 by bisection (log p increasing toward 0)
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if alt.log_density(mid) > m.e0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let t = 0.5 * (lo + hi);
        let v = np_statistic(&Sample::new(vec![t; 5]).unwrap(), &alt, &m).unwrap();
        assert!(v.abs() < 1e-12);

        let x = 0.3;
        let v1 = np_statistic(&Sample::new(vec![x]).unwrap(), &alt, &m).unwrap();
        let hand = (alt.density_value(x).unwrap().ln() - m.e0) / m.sigma0();
        assert!((v1 - hand).abs() < 1e-12);
    }

    #[test]
    fn np_null_standardization() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let reps = 100_000u64;
        let n = 100;
        let vs: Vec<f64> = (0..reps)
            .map(|rep| {
                let mut s = StreamKey::new(99, Operation::User, n as u64, rep).stream();
                let sum: f64 = (0..n).map(|_| alt.log_density(s.next_open01())).sum();
                np_from_log_sum(sum, n, &m)
            })
            .collect();
        let mean = vs.iter().sum::<f64>() / reps as f64;
        let var = vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() < 4.0 / (reps as f64).sqrt(), "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    /// Anderson-Darling against N(0,1), fully specified.
    fn anderson_darling_normal(xs: &mut [f64]) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let z = Normal::new(0.0, 1.0).unwrap();
        xs.sort_by(f64::total_cmp);
        let n = xs.len();
        let s: f64 = (0..n)
            .map(|i| {
                let lo = z.cdf(xs[i]).max(1e-300).ln();
                let hi = z.sf(xs[n - 1 - i]).max(1e-300).ln();
                (2 * i + 1) as f64 * (lo + hi)
            })
            .sum();
        -(n as f64) - s / n as f64
    }

    #[test]
    fn np_null_is_near_normal_when_n_theta_sq_large() {
        let alt = LocalAlternative::normalized(crate::alt_model::DensitySpec::power_tail(0.3).unwrap(), 0.1).unwrap();
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let n = 4000;
        let mut vs: Vec<f64> = (0..10_000u64)
            .map(|rep| {
                let mut s = StreamKey::new(7, Operation::User, n as u64, rep).stream();
                let sum: f64 = (0..n).map(|_| alt.log_density(s.next_open01())).sum();
                np_from_log_sum(sum, n, &m)
            })
            .collect();
        // 0.1% critical value of the case-0 Anderson-Darling statistic
        let a2 = anderson_darling_normal(&mut vs);
        assert!(a2 < 6.0, "A^2 = {a2}");
    }
}
