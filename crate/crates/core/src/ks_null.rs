//! Null distribution of `K_n = sqrt(n) sup |F_n(t) - t|`.
//!
//! Exact survival probabilities come from two routes:
//!
//! * the Marsaglia-Tsang-Wang matrix power for `P(D_n < d)`, with the
//!   matrix renormalized during squaring and the scale carried in log space;
//! * the Smirnov-Birnbaum-Tingey sum for the one-sided tail `P(D_n^+ >= d)`,
//!   summed in log space.
//!
//! `1 - P(D_n < d)` loses all relative precision once the tail drops below
//! about 1e-7, so there the two-sided tail is taken as `2 P(D_n^+ >= d)`.
//! The neglected overlap `P(D^+ >= d, D^- >= d)` is of relative order
//! `exp(-6 n d^2)`, below 1e-20 at the crossover, and vanishes for
//! `d >= 1/2`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng::{Operation, StreamKey};
use crate::test_stats::KsScratch;

/// Below this tail probability the one-sided route is used.
pub const TAIL_CROSSOVER: f64 = 1e-7;
/// Largest matrix dimension `2k - 1` the exact route accepts.
pub const MAX_EXACT_DIM: usize = 801;
/// Default replicate count for the Monte Carlo route.
pub const DEFAULT_MC_REPLICATES: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KsMethod {
    Exact,
    Asymptotic,
    MonteCarlo { replicates: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KsMethodKind {
    Exact,
    Asymptotic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsTail {
    /// Sample size; ignored by the asymptotic method.
    pub n: usize,
    /// Threshold on the `sqrt(n)` scale.
    pub u: f64,
    pub survival: f64,
    /// `ln(survival)`, accurate even when `survival` underflows.
    pub log_survival: f64,
    pub method: KsMethodKind,
    /// Monte Carlo standard error; zero for the analytic routes.
    pub stderr: f64,
}

/// `P_0(K_n >= u)`.
pub fn ks_sf(n: usize, u: f64, method: KsMethod) -> Result<KsTail> {
    if n == 0 {
        return Err(Error::domain("ks_sf needs n >= 1"));
    }
    if !(u > 0.0) {
        return Err(Error::domain(format!("ks_sf needs u > 0, got {u}")));
    }
    match method {
        KsMethod::Exact => {
            let log_survival = exact_log_sf(n, u / (n as f64).sqrt())?;
            Ok(KsTail {
                n,
                u,
                survival: log_survival.exp(),
                log_survival,
                method: KsMethodKind::Exact,
                stderr: 0.0,
            })
        }
        KsMethod::Asymptotic => {
            let log_survival = ks_log_sf_asymptotic(u);
            Ok(KsTail {
                n,
                u,
                survival: log_survival.exp(),
                log_survival,
                method: KsMethodKind::Asymptotic,
                stderr: 0.0,
            })
        }
        KsMethod::MonteCarlo { replicates, seed } => {
            if replicates == 0 {
                return Err(Error::domain("Monte Carlo KS needs at least one replicate"));
            }
            let hits: usize = (0..replicates as u64)
                .into_par_iter()
                .map_init(KsScratch::default, |scratch, rep| {
                    let mut s = StreamKey::new(seed, Operation::KsNull, n as u64, rep).stream();
                    scratch.reset(n);
                    for _ in 0..n {
                        scratch.push(s.next_open01());
                    }
                    usize::from(scratch.statistic() >= u)
                })
                .sum();
            let p = hits as f64 / replicates as f64;
            Ok(KsTail {
                n,
                u,
                survival: p,
                log_survival: p.ln(),
                method: KsMethodKind::MonteCarlo,
                stderr: (p * (1.0 - p) / replicates as f64).sqrt(),
            })
        }
    }
}

/// `ln P(D_n >= d)` by the exact routes.
pub fn exact_log_sf(n: usize, d: f64) -> Result<f64> {
    let nf = n as f64;
    if d <= 0.5 / nf {
        return Ok(0.0);
    }
    if d >= 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let log_two_sided_tail = std::f64::consts::LN_2 + log_sf_one_sided(n, d);
    if d >= 0.5 || log_two_sided_tail < TAIL_CROSSOVER.ln() {
        return Ok(log_two_sided_tail);
    }
    let log_cdf = log_cdf_matrix(n, d)?;
    let sf = -log_cdf.exp_m1();
    if !(sf > 0.0) {
        // cdf rounded to 1; the one-sided route is the best available
        return Ok(log_two_sided_tail);
    }
    Ok(sf.ln())
}

/// `ln P(D_n^+ >= d)` (Smirnov-Birnbaum-Tingey).
pub fn log_sf_one_sided(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let nf = n as f64;
    let jmax = (nf * (1.0 - d)).floor() as usize;
    let ln_n_fact = ln_gamma(nf + 1.0);
    let mut terms = Vec::with_capacity(jmax + 1);
    for j in 0..=jmax.min(n) {
        let jf = j as f64;
        let gap = 1.0 - d - jf / nf;
        if gap <= 0.0 {
            if n - j > 0 {
                continue;
            }
        }
        let log_gap = if n - j == 0 { 0.0 } else { (n - j) as f64 * gap.ln() };
        let lead = d + jf / nf;
        let t = ln_n_fact - ln_gamma(jf + 1.0) - ln_gamma(nf - jf + 1.0) + log_gap + (jf - 1.0) * lead.ln();
        terms.push(t);
    }
    d.ln() + log_sum_exp(&terms)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `ln P(D_n < d)` by the Marsaglia-Tsang-Wang matrix power.
fn log_cdf_matrix(n: usize, d: f64) -> Result<f64> {
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    if m > MAX_EXACT_DIM {
        return Err(Error::Capability(format!(
            "exact KS distribution at n = {n}, d = {d:.4} needs a {m}x{m} matrix (limit {MAX_EXACT_DIM}); use the Monte Carlo method"
        )));
    }
    let h = k as f64 - nd;
    let mut inv_fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        inv_fact[i] = inv_fact[i - 1] / i as f64;
    }
    let mut hmat = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hmat[(i, j)] = inv_fact[i + 1 - j];
            }
        }
    }
    for i in 0..m {
        hmat[(i, 0)] -= h.powi(i as i32 + 1) * inv_fact[i + 1];
        hmat[(m - 1, i)] -= h.powi((m - i) as i32) * inv_fact[m - i];
    }
    if 2.0 * h - 1.0 > 0.0 {
        hmat[(m - 1, 0)] += (2.0 * h - 1.0).powi(m as i32) * inv_fact[m];
    }

    let (q, log_scale) = matrix_power_scaled(hmat, n);
    let entry = q[(k - 1, k - 1)];
    if !(entry > 0.0) {
        return Err(Error::Numeric(format!(
            "matrix power entry {entry} not positive at n = {n}, d = {d}"
        )));
    }
    let nf = n as f64;
    Ok(ln_gamma(nf + 1.0) - nf * nf.ln() + entry.ln() + log_scale)
}

/// `base^e` as `(matrix, ln scale)`, renormalizing to unit max entry.
fn matrix_power_scaled(base: DMatrix<f64>, mut e: usize) -> (DMatrix<f64>, f64) {
    fn normalize(m: &mut DMatrix<f64>) -> f64 {
        let max = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if max > 0.0 && max.is_finite() {
            *m /= max;
            max.ln()
        } else {
            0.0
        }
    }
    let dim = base.nrows();
    let mut result: Option<DMatrix<f64>> = None;
    let mut result_scale = 0.0;
    let mut b = base;
    let mut b_scale = 0.0;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => {
                    result_scale = b_scale;
                    b.clone()
                }
                Some(r) => {
                    let mut prod = &r * &b;
                    result_scale += b_scale + normalize(&mut prod);
                    prod
                }
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        let mut sq = &b * &b;
        b_scale = 2.0 * b_scale + normalize(&mut sq);
        b = sq;
    }
    (result.unwrap_or_else(|| DMatrix::identity(dim, dim)), result_scale)
}

/// Kolmogorov limit `P(sup |B| >= lambda)`.
pub fn ks_sf_asymptotic(lambda: f64) -> f64 {
    ks_log_sf_asymptotic(lambda).exp()
}

/// `ln P(sup |B| >= lambda)` for a Brownian bridge `B`.
pub fn ks_log_sf_asymptotic(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 0.0;
    }
    if lambda < 1.0 {
        // Jacobi form of the cdf converges fast for small lambda.
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut cdf = 0.0;
        for k in 1..=50 {
            let odd = (2 * k - 1) as f64;
            let term = (-odd * odd * pi2 / (8.0 * lambda * lambda)).exp();
            cdf += term;
            if term < 1e-17 * cdf.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / lambda;
        return (-cdf).ln_1p();
    }
    // 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2} = 2 e^{-2 lambda^2} (1 - e^{-6 lambda^2} + ...)
    let l2 = lambda * lambda;
    let mut rel = 1.0;
    for k in 2..=100 {
        let kf = k as f64;
        let term = (-2.0 * (kf * kf - 1.0) * l2).exp();
        if term < 1e-17 {
            break;
        }
        if k % 2 == 0 {
            rel -= term;
        } else {
            rel += term;
        }
    }
    std::f64::consts::LN_2 - 2.0 * l2 + rel.ln()
}

/// `lambda` with `ks_sf_asymptotic(lambda) = alpha`.
pub fn ks_critical_asymptotic(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0,1)")));
    }
    let target = alpha.ln();
    let (mut lo, mut hi) = (1e-3, 50.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if ks_log_sf_asymptotic(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Working resolution of [`ks_critical`].
pub const CRITICAL_EPS: f64 = 1e-9;

/// Smallest `u` with `P_0(K_n >= u) <= alpha` (exact distribution).
///
/// The result satisfies `sf(u) <= alpha < sf(u - 1e-9)`.
pub fn ks_critical(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("ks_critical needs n >= 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::domain(format!("alpha = {alpha} must lie in (0,1]")));
    }
    let sqrt_n = (n as f64).sqrt();
    let support_lo = 0.5 / sqrt_n;
    if alpha >= 1.0 {
        return Ok(support_lo);
    }
    let target = alpha.ln();
    // g > 0 means the tail is still heavier than alpha
    let g = |u: f64| -> Result<f64> { Ok(exact_log_sf(n, u / sqrt_n)? - target) };

    // bracket around the asymptotic guess
    let guess = ks_critical_asymptotic(alpha)?.clamp(support_lo, sqrt_n);
    let mut step = 0.02;
    let (mut lo, mut hi) = ((guess - step).max(support_lo), (guess + step).min(sqrt_n));
    let mut g_lo = g(lo)?;
    while g_lo <= 0.0 && lo > support_lo {
        step *= 2.0;
        hi = lo;
        lo = (lo - step).max(support_lo);
        g_lo = g(lo)?;
    }
    if g_lo <= 0.0 {
        return Ok(support_lo);
    }
    let mut g_hi = g(hi)?;
    while g_hi > 0.0 {
        if hi >= sqrt_n {
            return Ok(sqrt_n);
        }
        step *= 2.0;
        lo = hi;
        g_lo = g(lo)?;
        hi = (hi + step).min(sqrt_n);
        g_hi = if hi >= sqrt_n { f64::NEG_INFINITY } else { g(hi)? };
    }

    // Illinois regula falsi on the log tail, falling back to bisection
    // whenever an interpolated point would not shrink the bracket enough.
    let mut side = 0i8;
    let mut iterations = 0;
    while hi - lo > CRITICAL_EPS {
        iterations += 1;
        if iterations > 200 {
            return Err(Error::Numeric(format!(
                "ks_critical({n}, {alpha}) failed to converge: bracket [{lo}, {hi}]"
            )));
        }
        let width = hi - lo;
        let mut c = if g_hi.is_finite() { lo - g_lo * (hi - lo) / (g_hi - g_lo) } else { 0.5 * (lo + hi) };
        if !(c > lo && c < hi) || iterations % 4 == 0 {
            c = 0.5 * (lo + hi);
        }
        // keep a margin from the ends so both sides move
        let margin = (0.25 * CRITICAL_EPS).min(0.25 * width);
        c = c.clamp(lo + margin, hi - margin);
        let gc = g(c)?;
        if gc > 0.0 {
            lo = c;
            g_lo = gc;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = c;
            g_hi = gc;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
        // Once the root is pinned, close the bracket from the other side.
        if hi - lo > CRITICAL_EPS && hi - lo < 1e-6 {
            let probe = if side == 1 { hi - 0.9 * CRITICAL_EPS } else { lo + 0.9 * CRITICAL_EPS };
            if probe > lo && probe < hi {
                let gp = g(probe)?;
                if gp > 0.0 {
                    lo = probe;
                    g_lo = gp;
                } else {
                    hi = probe;
                    g_hi = gp;
                }
            }
        }
    }
    Ok(hi)
}

/// `-ln P_0(K_n >= sqrt(n) x) / (n x^2)`; tends to 2 as `x -> 0`, `n x^2 -> inf`.
pub fn moddev_rate_ks(n: usize, x: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::domain(format!("moderate-deviation level x = {x} must lie in (0,1)")));
    }
    if n == 0 {
        return Err(Error::domain("moddev_rate_ks needs n >= 1"));
    }
    let log_sf = exact_log_sf(n, x)?;
    if !log_sf.is_finite() {
        return Err(Error::Numeric(format!("KS tail at n = {n}, x = {x} is zero in working precision")));
    }
    Ok(-log_sf / (n as f64 * x * x))
}
