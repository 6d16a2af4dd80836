//! Monte Carlo power of the NP and KS tests and the KS sample-size search.
//!
//! Every replicate draws from its own counter-based stream, and every
//! reduction is either an integer hit count or an order-preserving collect
//! followed by a serial fold, so results do not depend on the number of
//! worker threads.

use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::alt_model::LocalAlternative;
use crate::error::{Error, Result};
use crate::ks_null::ks_critical;
use crate::quad_moments::{log_moments, shift_b, MomentSet, MOMENT_TOL};
use crate::rng::{Operation, StreamKey};
use crate::test_stats::{np_from_log_sum, KsScratch};

/// Minimum number of tail hits before the plain level estimate is trusted.
pub const MIN_TAIL_HITS: u64 = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Pool-adjacent-violators projection onto nondecreasing sequences.
    Isotonic,
    /// Centered running mean over `w` evaluated grid points.
    Window(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelMode {
    /// NP critical value is the simulated null `(1 - alpha)` quantile.
    FixedLevel,
    /// NP critical value is `x + b_n`; the KS test runs at the implied level.
    Shift(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Ratio between consecutive grid points.
    pub ratio: f64,
    /// Try the midpoint below the first accepted grid point.
    pub refine: bool,
    /// Largest sample size the search may visit.
    pub ceiling: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { ratio: 1.08, refine: true, ceiling: 100_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub seed: u64,
    pub replicates: usize,
    pub oracle_replicates: usize,
    pub grid: GridSpec,
    pub power_smoothing: Smoothing,
    /// Grid points after the crossing that must also meet the target.
    pub verify_window: usize,
    pub alpha: f64,
    pub mode: LevelMode,
}

impl SimulationConfig {
    pub fn new(seed: u64) -> Self {
        SimulationConfig {
            seed,
            replicates: 20_000,
            oracle_replicates: 1_000_000,
            grid: GridSpec::default(),
            power_smoothing: Smoothing::Isotonic,
            verify_window: 3,
            alpha: 0.05,
            mode: LevelMode::FixedLevel,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1000 {
            return Err(Error::Config(format!("replicates = {} (need at least 1000)", self.replicates)));
        }
        if self.oracle_replicates < 1000 {
            return Err(Error::Config(format!(
                "oracle_replicates = {} (need at least 1000)",
                self.oracle_replicates
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} must lie in (0,1)", self.alpha)));
        }
        if !(self.grid.ratio > 1.0 && self.grid.ratio.is_finite()) {
            return Err(Error::Config(format!("grid ratio {} must exceed 1", self.grid.ratio)));
        }
        if self.grid.ceiling < 2 {
            return Err(Error::Config("grid ceiling must be at least 2".into()));
        }
        if let Smoothing::Window(w) = self.power_smoothing {
            if w == 0 {
                return Err(Error::Config("smoothing window must be positive".into()));
            }
        }
        if let LevelMode::Shift(x) = self.mode {
            if !x.is_finite() {
                return Err(Error::Config(format!("shift x = {x} must be finite")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerEstimate {
    pub power: f64,
    pub stderr: f64,
    pub n: usize,
    pub level: f64,
    pub critical_value: f64,
    pub replicates: usize,
    pub hits: u64,
}

impl PowerEstimate {
    fn from_hits(hits: u64, replicates: usize, n: usize, level: f64, critical_value: f64) -> Self {
        let power = hits as f64 / replicates as f64;
        PowerEstimate {
            power,
            stderr: (power * (1.0 - power) / replicates as f64).sqrt(),
            n,
            level,
            critical_value,
            replicates,
            hits,
        }
    }
}

/// One evaluated point of the KS power curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    pub raw_power: f64,
    pub smoothed_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingDiagnostics {
    /// Full-budget evaluations, ordered by n, with the final smoothing.
    pub curve: Vec<CurvePoint>,
    /// `(n, power)` from the reduced-budget pilot, in visiting order.
    pub pilot: Vec<(usize, f64)>,
    /// Whether the accepted grid point was followed by `verify_window`
    /// points that also met the target.
    pub window_verified: bool,
    /// The grid point accepted before the midpoint refinement.
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSizeResult {
    /// Minimal KS sample size `N`.
    pub n_ks: usize,
    /// `N / n_np`.
    pub ratio: f64,
    pub target_power: f64,
    pub n_np: usize,
    pub np_power: Option<PowerEstimate>,
    pub ks_power: PowerEstimate,
    pub diagnostics: CrossingDiagnostics,
}

fn moments(alt: &LocalAlternative) -> Result<MomentSet> {
    log_moments(alt, MOMENT_TOL)
}

/// Null replicates of `V_n`, in replicate order.
fn np_null_values(alt: &LocalAlternative, m: &MomentSet, n: usize, cfg: &SimulationConfig) -> Vec<f64> {
    (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let mut s = StreamKey::new(cfg.seed, Operation::NpNull, n as u64, rep).stream();
            let mut sum = 0.0;
            for _ in 0..n {
                sum += alt.log_density(s.next_open01());
            }
            np_from_log_sum(sum, n, m)
        })
        .collect()
}

/// Empirical `(1 - alpha)` quantile of `V_n` under the null.
///
/// The value is the order statistic at index `floor((1 - alpha) R)` of the
/// `R` sorted null replicates, so the simulated rejection rate
/// `P(V_n >= q)` is `ceil(alpha R) / R`.
pub fn np_null_quantile(alt: &LocalAlternative, n: usize, alpha: f64, cfg: &SimulationConfig) -> Result<f64> {
    let m = moments(alt)?;
    np_null_quantile_with(alt, &m, n, alpha, cfg)
}

fn np_null_quantile_with(
    alt: &LocalAlternative,
    m: &MomentSet,
    n: usize,
    alpha: f64,
    cfg: &SimulationConfig,
) -> Result<f64> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0,1)")));
    }
    if (cfg.replicates as f64) * alpha < 10.0 {
        return Err(Error::InsufficientTail { replicates: cfg.replicates, alpha });
    }
    let mut values = np_null_values(alt, m, n, cfg);
    values.sort_by(f64::total_cmp);
    let idx = (((1.0 - alpha) * cfg.replicates as f64).floor() as usize).min(values.len() - 1);
    Ok(values[idx])
}

/// Tail probability estimate with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub log_probability: f64,
    /// Replicates that landed in the tail (under the sampling law used).
    pub hits: u64,
    pub replicates: usize,
    pub tilted: bool,
    /// Standard error of the probability estimate divided by the estimate.
    pub relative_stderr: f64,
}

impl TailEstimate {
    pub fn probability(&self) -> f64 {
        self.log_probability.exp()
    }
}

/// `P_0(sum log p(U_i) >= threshold)`: plain Monte Carlo, then importance
/// sampling from `P_theta` (likelihood ratio `exp(-sum log p)`) if the plain
/// run has fewer than [`MIN_TAIL_HITS`] hits.
pub fn null_log_sum_tail(
    alt: &LocalAlternative,
    n: usize,
    threshold: f64,
    cfg: &SimulationConfig,
) -> Result<TailEstimate> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let reps = cfg.replicates;
    let plain_hits: u64 = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut s = StreamKey::new(cfg.seed, Operation::ShiftPlain, n as u64, rep).stream();
            let mut sum = 0.0;
            for _ in 0..n {
                sum += alt.log_density(s.next_open01());
            }
            u64::from(sum >= threshold)
        })
        .sum();
    if plain_hits >= MIN_TAIL_HITS {
        let p = plain_hits as f64 / reps as f64;
        return Ok(TailEstimate {
            log_probability: p.ln(),
            hits: plain_hits,
            replicates: reps,
            tilted: false,
            relative_stderr: ((1.0 - p) / (p * reps as f64)).sqrt(),
        });
    }

    // Under P_theta the likelihood ratio dP_0/dP_theta of the sample is
    // exp(-sum log p). Only tail replicates contribute; keep them in log form.
    let tail_logs: Vec<Option<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut s = StreamKey::new(cfg.seed, Operation::ShiftTilted, n as u64, rep).stream();
            let mut sum = 0.0;
            for _ in 0..n {
                sum += alt.draw_with_log_density(&mut s).1;
            }
            (sum >= threshold).then_some(-sum)
        })
        .collect();
    let logs: Vec<f64> = tail_logs.into_iter().flatten().collect();
    let tilted_hits = logs.len() as u64;
    if tilted_hits < MIN_TAIL_HITS {
        return Err(Error::Estimation {
            plain_hits,
            plain_replicates: reps,
            tilted_hits,
            tilted_replicates: reps,
        });
    }
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s1: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    let s2: f64 = logs.iter().map(|l| (2.0 * (l - max)).exp()).sum();
    let r = reps as f64;
    let mean = s1 / r;
    let var = (s2 / r - mean * mean).max(0.0);
    Ok(TailEstimate {
        log_probability: max + mean.ln(),
        hits: tilted_hits,
        replicates: reps,
        tilted: true,
        relative_stderr: (var / r).sqrt() / mean,
    })
}

/// `P_0(V_n >= x + b_n)` with tail estimate details.
pub fn np_level_from_shift_detailed(
    alt: &LocalAlternative,
    n: usize,
    x: f64,
    cfg: &SimulationConfig,
) -> Result<TailEstimate> {
    let m = moments(alt)?;
    let tau = x + shift_b(&m, n)?;
    let threshold = n as f64 * m.e0 + tau * (n as f64).sqrt() * m.sigma0();
    null_log_sum_tail(alt, n, threshold, cfg)
}

/// Significance level `alpha_n = P_0(V_n >= x + b_n)` of the NP test.
pub fn np_level_from_shift(alt: &LocalAlternative, n: usize, x: f64, cfg: &SimulationConfig) -> Result<f64> {
    Ok(np_level_from_shift_detailed(alt, n, x, cfg)?.probability())
}

fn np_alternative_hits(alt: &LocalAlternative, m: &MomentSet, n: usize, critical: f64, reps: usize, seed: u64) -> u64 {
    (0..reps as u64)
        .into_par_iter()
        .map(|rep| {
            let mut s = StreamKey::new(seed, Operation::NpAlternative, n as u64, rep).stream();
            let mut sum = 0.0;
            for _ in 0..n {
                sum += alt.draw_with_log_density(&mut s).1;
            }
            u64::from(np_from_log_sum(sum, n, m) >= critical)
        })
        .sum()
}

/// Fraction of alternative samples with `V_n >= critical`.
///
/// `level` in the result is `cfg.alpha` in fixed-level mode and NaN in
/// shift mode, where the caller knows the level.
pub fn power_np(alt: &LocalAlternative, n: usize, critical: f64, cfg: &SimulationConfig) -> Result<PowerEstimate> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let m = moments(alt)?;
    let hits = np_alternative_hits(alt, &m, n, critical, cfg.replicates, cfg.seed);
    let level = match cfg.mode {
        LevelMode::FixedLevel => cfg.alpha,
        LevelMode::Shift(_) => f64::NAN,
    };
    Ok(PowerEstimate::from_hits(hits, cfg.replicates, n, level, critical))
}

/// Exact KS critical values, computed once per `n`.
#[derive(Debug)]
pub struct KsCriticalCache {
    alpha: f64,
    values: Mutex<BTreeMap<usize, f64>>,
}

impl KsCriticalCache {
    pub fn new(alpha: f64) -> Self {
        KsCriticalCache { alpha, values: Mutex::new(BTreeMap::new()) }
    }

    pub fn get(&self, n: usize) -> Result<f64> {
        if let Some(v) = self.values.lock().expect("cache poisoned").get(&n) {
            return Ok(*v);
        }
        let v = ks_critical(n, self.alpha)?;
        self.values.lock().expect("cache poisoned").insert(n, v);
        Ok(v)
    }
}

/// Replicates of the KS alternative share one stream per replicate across
/// all `n` (common random numbers): a sample of size `n` is the first `n`
/// draws.
fn ks_alternative_hits(alt: &LocalAlternative, n: usize, critical: f64, reps: usize, seed: u64) -> u64 {
    (0..reps as u64)
        .into_par_iter()
        .map_init(KsScratch::default, |scratch, rep| {
            let mut s = StreamKey::new(seed, Operation::KsAlternative, 0, rep).stream();
            scratch.reset(n);
            for _ in 0..n {
                scratch.push(alt.draw(&mut s));
            }
            u64::from(scratch.statistic() >= critical)
        })
        .sum()
}

/// Power of the KS test at its exact level-`alpha` critical value.
pub fn power_ks(alt: &LocalAlternative, n: usize, alpha: f64, cfg: &SimulationConfig) -> Result<PowerEstimate> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0,1]")));
    }
    let critical = ks_critical(n, alpha)?;
    let hits = ks_alternative_hits(alt, n, critical, cfg.replicates, cfg.seed);
    Ok(PowerEstimate::from_hits(hits, cfg.replicates, n, alpha, critical))
}

/// Least-squares nondecreasing fit (pool adjacent violators).
pub fn isotonic(values: &[f64], weights: &[f64]) -> Vec<f64> {
    assert_eq!(values.len(), weights.len());
    // blocks of (mean, weight, length)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
            let (m2, w2, l2) = blocks.pop().unwrap();
            let (m1, w1, l1) = blocks.pop().unwrap();
            let w = w1 + w2;
            blocks.push(((m1 * w1 + m2 * w2) / w, w, l1 + l2));
        }
    }
    blocks.into_iter().flat_map(|(m, _, l)| std::iter::repeat_n(m, l)).collect()
}

fn running_mean(values: &[f64], w: usize) -> Vec<f64> {
    let half = w / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + w - half).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

fn smooth(raw: &[f64], how: Smoothing) -> Vec<f64> {
    match how {
        Smoothing::Isotonic => isotonic(raw, &vec![1.0; raw.len()]),
        Smoothing::Window(w) => running_mean(raw, w),
    }
}

/// Geometric grid `n0, round(n0 q), ...` (strictly increasing) up to `ceiling`.
pub fn geometric_grid(n0: usize, ratio: f64, ceiling: usize) -> Vec<usize> {
    let mut grid = vec![n0.max(1)];
    loop {
        let last = *grid.last().unwrap();
        let next = ((last as f64 * ratio).round() as usize).max(last + 1);
        if next > ceiling {
            break;
        }
        grid.push(next);
    }
    grid
}

/// Minimal sample size at which a power curve meets `target`.
///
/// `hits(n, replicates)` must be deterministic and use replicate streams
/// that are prefixes of each other, so the pilot at `replicates / 10` is a
/// sub-sample of the full run.
pub fn search_sample_size<F>(
    hits: F,
    n_start: usize,
    target: f64,
    cfg: &SimulationConfig,
) -> Result<(usize, CrossingDiagnostics, u64)>
where
    F: Fn(usize, usize) -> Result<u64>,
{
    cfg.validate()?;
    let grid = geometric_grid(n_start, cfg.grid.ratio, cfg.grid.ceiling);
    let last = grid.len() - 1;
    let full = cfg.replicates;
    let pilot_reps = (full / 10).max(1000).min(full);
    let w = cfg.verify_window;

    // Pilot gallop: step doubles up to 8 grid indices.
    let mut pilot = Vec::new();
    let pilot_power = |j: usize, pilot: &mut Vec<(usize, f64)>| -> Result<f64> {
        let p = hits(grid[j], pilot_reps)? as f64 / pilot_reps as f64;
        pilot.push((grid[j], p));
        Ok(p)
    };
    let (mut lo, mut hi): (Option<usize>, Option<usize>) = (None, None);
    let mut j = 0usize;
    let mut step = 1usize;
    loop {
        if pilot_power(j, &mut pilot)? >= target {
            hi = Some(j);
            break;
        }
        lo = Some(j);
        if j == last {
            break;
        }
        j = (j + step).min(last);
        step = (step * 2).min(8);
    }
    // narrow the pilot crossing by bisection between last miss and first hit
    let pilot_cross = match (lo, hi) {
        (_, None) => last,
        (None, Some(h)) => h,
        (Some(mut l), Some(mut h)) => {
            while h - l > 1 {
                let mid = (l + h) / 2;
                if pilot_power(mid, &mut pilot)? >= target {
                    h = mid;
                } else {
                    l = mid;
                }
            }
            h
        }
    };

    // Full-budget evaluation on a window around the pilot crossing,
    // widened until the acceptance rule is decided inside it.
    let mut evaluated: BTreeMap<usize, u64> = BTreeMap::new();
    let mut a = pilot_cross.saturating_sub(2);
    let mut b = (pilot_cross + 2 + w).min(last);
    let accepted = loop {
        for jj in a..=b {
            if let std::collections::btree_map::Entry::Vacant(e) = evaluated.entry(jj) {
                e.insert(hits(grid[jj], full)?);
            }
        }
        let idx: Vec<usize> = (a..=b).collect();
        let raw: Vec<f64> = idx.iter().map(|jj| evaluated[jj] as f64 / full as f64).collect();
        let sm = smooth(&raw, cfg.power_smoothing);
        let found = (0..idx.len()).find(|&k| k + w < idx.len() && sm[k..=k + w].iter().all(|&p| p >= target));
        match found {
            Some(0) if a > 0 => {
                a = a.saturating_sub(3);
            }
            Some(k) => break Some(idx[k]),
            None => {
                // the tail of the window may already meet the target without
                // room to verify; at the ceiling accept it unverified
                if b == last {
                    let tail = (0..idx.len()).find(|&k| sm[k..].iter().all(|&p| p >= target));
                    break tail.map(|k| idx[k]);
                }
                b = (b + w + 2).min(last);
            }
        }
    };

    let curve_of = |points: &BTreeMap<usize, u64>| -> Vec<CurvePoint> {
        let raw: Vec<f64> = points.values().map(|h| *h as f64 / full as f64).collect();
        let sm = smooth(&raw, cfg.power_smoothing);
        points
            .keys()
            .zip(raw.iter().zip(sm))
            .map(|(&n, (&raw_power, smoothed_power))| CurvePoint { n, raw_power, smoothed_power })
            .collect()
    };
    let by_n: BTreeMap<usize, u64> = evaluated.iter().map(|(jj, h)| (grid[*jj], *h)).collect();

    let Some(jstar) = accepted else {
        let (best_n, best_hits) = by_n
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map(|(n, h)| (*n, *h))
            .unwrap_or((grid[last], 0));
        return Err(Error::SearchExhausted {
            ceiling: cfg.grid.ceiling,
            best_n,
            best_power: best_hits as f64 / full as f64,
        });
    };
    let window_verified = jstar + w <= b;
    let grid_n = grid[jstar];
    let mut chosen = grid_n;
    let mut points = by_n;

    if cfg.grid.refine && jstar > 0 {
        let prev = grid[jstar - 1];
        let mid = (prev + grid_n) / 2;
        if mid > prev && mid < grid_n {
            points.insert(mid, hits(mid, full)?);
            let curve = curve_of(&points);
            let pos = curve.iter().position(|c| c.n == mid).unwrap();
            let rest_ok = curve[pos..].iter().take(w + 2).all(|c| c.smoothed_power >= target);
            if rest_ok {
                chosen = mid;
            }
        }
    }
    let chosen_hits = points[&chosen];
    Ok((
        chosen,
        CrossingDiagnostics { curve: curve_of(&points), pilot, window_verified, grid_n },
        chosen_hits,
    ))
}

/// Smallest `N` (from `n_start` up) at which the KS test at level `alpha`
/// reaches `target_power`, under common random numbers across `N`.
pub fn find_sample_size_ks_from(
    alt: &LocalAlternative,
    target_power: f64,
    alpha: f64,
    n_start: usize,
    cfg: &SimulationConfig,
) -> Result<SampleSizeResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0,1)")));
    }
    if !(target_power > alpha && target_power < 1.0) {
        return Err(Error::domain(format!(
            "target power {target_power} must lie strictly between alpha = {alpha} and 1"
        )));
    }
    let cache = KsCriticalCache::new(alpha);
    let hits = |n: usize, reps: usize| -> Result<u64> {
        let crit = cache.get(n)?;
        Ok(ks_alternative_hits(alt, n, crit, reps, cfg.seed))
    };
    let (n_ks, diagnostics, chosen_hits) = search_sample_size(hits, n_start, target_power, cfg)?;
    let ks_power = PowerEstimate::from_hits(chosen_hits, cfg.replicates, n_ks, alpha, cache.get(n_ks)?);
    Ok(SampleSizeResult {
        n_ks,
        ratio: n_ks as f64 / n_start as f64,
        target_power,
        n_np: n_start,
        np_power: None,
        ks_power,
        diagnostics,
    })
}

/// [`find_sample_size_ks_from`] starting at `n = 1`.
pub fn find_sample_size_ks(
    alt: &LocalAlternative,
    target_power: f64,
    alpha: f64,
    cfg: &SimulationConfig,
) -> Result<SampleSizeResult> {
    find_sample_size_ks_from(alt, target_power, alpha, 1, cfg)
}

/// NP power at `n_np`, then the KS sample size reaching it; `ratio = N / n_np`.
pub fn efficiency_ratio_empirical(
    alt: &LocalAlternative,
    n_np: usize,
    alpha: f64,
    cfg: &SimulationConfig,
) -> Result<SampleSizeResult> {
    cfg.validate()?;
    let m = moments(alt)?;
    let (critical, level) = match cfg.mode {
        LevelMode::FixedLevel => (np_null_quantile_with(alt, &m, n_np, alpha, cfg)?, alpha),
        LevelMode::Shift(x) => {
            let tau = x + shift_b(&m, n_np)?;
            (tau, np_level_from_shift(alt, n_np, x, cfg)?)
        }
    };
    let np_hits = np_alternative_hits(alt, &m, n_np, critical, cfg.replicates, cfg.seed);
    let np = PowerEstimate::from_hits(np_hits, cfg.replicates, n_np, level, critical);
    let mut out = find_sample_size_ks_from(alt, np.power, level, n_np, cfg)?;
    out.np_power = Some(np);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alt_model::DensitySpec;
    use proptest::prelude::*;

    fn cfg(seed: u64) -> SimulationConfig {
        SimulationConfig::new(seed)
    }

    #[test]
    fn config_validation() {
        assert!(cfg(1).validate().is_ok());
        assert!(SimulationConfig { replicates: 999, ..cfg(1) }.validate().is_err());
        assert!(SimulationConfig { alpha: 1.0, ..cfg(1) }.validate().is_err());
        let g = GridSpec { ratio: 1.0, ..GridSpec::default() };
        assert!(SimulationConfig { grid: g, ..cfg(1) }.validate().is_err());
    }

    #[test]
    fn grid_is_strictly_increasing() {
        let g = geometric_grid(3, 1.08, 5000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(&g[..4], &[3, 4, 5, 6]);
        assert!(*g.last().unwrap() <= 5000);
        assert!(g.last().unwrap() * 108 / 100 > 5000 - 100);
    }

    proptest! {
        #[test]
        fn isotonic_is_monotone_and_mean_preserving(v in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let s = isotonic(&v, &vec![1.0; v.len()]);
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1] + 1e-15));
            let (a, b): (f64, f64) = (v.iter().sum(), s.iter().sum());
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn stderr_matches_binomial(hits in 0u64..=5000, reps in 5000usize..20000) {
            let e = PowerEstimate::from_hits(hits, reps, 10, 0.05, 1.0);
            prop_assert!((e.stderr - (e.power * (1.0 - e.power) / reps as f64).sqrt()).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&e.power));
        }
    }

    #[test]
    fn isotonic_pools_violators() {
        assert_eq!(isotonic(&[0.1, 0.3, 0.2, 0.4], &[1.0; 4]), vec![0.1, 0.25, 0.25, 0.4]);
    }

    #[test]
    fn null_quantile_properties() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let c = SimulationConfig { replicates: 5000, ..cfg(11) };
        let q1 = np_null_quantile(&alt, 50, 0.05, &c).unwrap();
        assert_eq!(q1.to_bits(), np_null_quantile(&alt, 50, 0.05, &c).unwrap().to_bits());
        // alpha near 1 gives the smallest simulated value
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let vals = np_null_values(&alt, &m, 50, &c);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(np_null_quantile(&alt, 50, 0.9999, &c).unwrap(), min);
        match np_null_quantile(&alt, 50, 0.001, &c) {
            Err(Error::InsufficientTail { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn null_quantile_approaches_normal_point() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let q = np_null_quantile(&alt, 2000, 0.05, &cfg(5)).unwrap();
        assert!((1.5..=1.8).contains(&q), "{q}");
    }

    #[test]
    fn power_edge_cases() {
        let alt = LocalAlternative::power_tail(0.7, 0.1).unwrap();
        let c = SimulationConfig { replicates: 2000, ..cfg(3) };
        assert_eq!(power_np(&alt, 10, f64::NEG_INFINITY, &c).unwrap().power, 1.0);
        let p = power_ks(&alt, 10, 1.0, &c).unwrap();
        assert_eq!(p.power, 1.0);
    }

    #[test]
    fn shift_level_far_below_is_one() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let b = shift_b(&m, 100).unwrap();
        let a = np_level_from_shift(&alt, 100, -b - 10.0, &SimulationConfig { replicates: 2000, ..cfg(1) }).unwrap();
        assert!(a > 0.999, "{a}");
    }

    #[test]
    fn tilted_estimate_matches_plain_where_both_work() {
        // threshold with tail mass near 1e-2: plain has plenty of hits;
        // force the tilted branch through a direct call on a rarer event
        let alt = LocalAlternative::normalized(DensitySpec::power_tail(0.3).unwrap(), 0.05).unwrap();
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let n = 400;
        let c = cfg(21);
        let thr = |z: f64| n as f64 * m.e0 + z * (n as f64).sqrt() * m.sigma0();
        let plain = null_log_sum_tail(&alt, n, thr(2.3), &c).unwrap();
        assert!(!plain.tilted);
        let rare = null_log_sum_tail(&alt, n, thr(3.6), &c).unwrap();
        assert!(rare.tilted);
        // compare the tilted estimate with a large plain run at the rare threshold
        let big = SimulationConfig { replicates: 1_000_000, ..cfg(22) };
        let plain_big = null_log_sum_tail(&alt, n, thr(3.6), &big).unwrap();
        let diff = (rare.probability() - plain_big.probability()).abs();
        let se = (rare.relative_stderr.powi(2) * rare.probability().powi(2)
            + plain_big.relative_stderr.powi(2) * plain_big.probability().powi(2))
        .sqrt();
        assert!(diff < 4.0 * se, "tilted {} plain {} se {se}", rare.probability(), plain_big.probability());
    }

    #[test]
    fn level_is_monotone_in_shift() {
        let alt = LocalAlternative::power_tail(0.4, 0.1).unwrap();
        let c = SimulationConfig { replicates: 4000, ..cfg(8) };
        let mut prev = 1.0;
        for x in [-2.0, -1.0, 0.0, 0.5, 1.0] {
            let a = np_level_from_shift(&alt, 200, x, &c).unwrap();
            assert!(a <= prev, "x={x}");
            prev = a;
        }
    }

    #[test]
    fn self_comparison_gives_unit_ratio() {
        // NP power curve against itself: the search must land on n_np
        let alt = LocalAlternative::power_tail(0.4, 0.2).unwrap();
        let c = SimulationConfig { replicates: 4000, ..cfg(12) };
        let m = log_moments(&alt, MOMENT_TOL).unwrap();
        let n_np = 100;
        let crit_at = |n: usize| np_null_quantile_with(&alt, &m, n, 0.05, &c);
        let np_hits = |n: usize, reps: usize| -> Result<u64> {
            Ok(np_alternative_hits(&alt, &m, n, crit_at(n)?, reps, c.seed))
        };
        let target = np_hits(n_np, c.replicates).unwrap() as f64 / c.replicates as f64;
        let (n, diag, _) = search_sample_size(np_hits, n_np, target, &c).unwrap();
        assert_eq!(n, n_np, "{diag:?}");
    }

    #[test]
    fn search_on_synthetic_curve() {
        // deterministic logistic power curve; crossing of 0.5 at n = 1000
        let c = SimulationConfig { replicates: 10_000, ..cfg(0) };
        let curve = |n: usize, reps: usize| -> Result<u64> {
            let p = 1.0 / (1.0 + (-(n as f64 / 1000.0).ln() * 6.0).exp());
            Ok((p * reps as f64).round() as u64)
        };
        let (n, diag, _) = search_sample_size(curve, 50, 0.5, &c).unwrap();
        assert!((n as f64 / 1000.0 - 1.0).abs() < 0.05, "{n}");
        assert!(diag.window_verified);
        assert!(diag.curve.windows(2).all(|w| w[0].smoothed_power <= w[1].smoothed_power));
        // unreachable target
        let capped = SimulationConfig { grid: GridSpec { ceiling: 500, ..GridSpec::default() }, ..c };
        match search_sample_size(curve, 50, 0.9, &capped) {
            Err(Error::SearchExhausted { best_n, .. }) => assert!(best_n <= 500),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn search_rejects_degenerate_target() {
        let alt = LocalAlternative::power_tail(0.7, 0.1).unwrap();
        assert!(find_sample_size_ks(&alt, 0.05, 0.05, &cfg(1)).is_err());
    }
}
