//! Closed-form efficiencies, intermediate slopes, the Bernstein tail bound
//! and the NP moderate-deviation rate.

use crate::alt_model::{LocalAlternative, NormalizedScore};
use crate::error::{Error, Result};
use crate::power_engine::{null_log_sum_tail, SimulationConfig, TailEstimate};
use crate::quad_moments::{log_moments, MOMENT_TOL};

/// Half-width parameter of the moderate-deviation window for the NP rate.
pub const MODDEV_DELTA: f64 = 0.1;

/// `1 / (4 ||A||_inf^2)`.
pub fn efficiency_from_sup_norm(sup_norm: f64) -> Result<f64> {
    if !(sup_norm > 0.0 && sup_norm.is_finite()) {
        return Err(Error::domain(format!("sup norm {sup_norm} must be positive and finite")));
    }
    Ok(1.0 / (4.0 * sup_norm * sup_norm))
}

/// Intermediate efficiency of NP relative to KS for a square-integrable score.
pub fn efficiency_theoretical(score: &NormalizedScore) -> Result<f64> {
    efficiency_from_sup_norm(score.sup_norm_primitive())
}

/// `(1-r)^(2-2/r) / (4(1-2r))` for `f_r`, `0 < r < 1/2`.
pub fn efficiency_power_family(r: f64) -> Result<f64> {
    if r >= 0.5 && r < 1.0 {
        return Err(Error::InfiniteEfficiency { r });
    }
    if !(r > 0.0 && r < 0.5) {
        return Err(Error::domain(format!("tail exponent r = {r} outside (0, 1/2)")));
    }
    Ok((1.0 - r).powf(2.0 - 2.0 / r) / (4.0 * (1.0 - 2.0 * r)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopePair {
    /// `2 n theta^2 ||A||^2`.
    pub ks_slope: f64,
    /// `n theta^2 / 2`.
    pub np_slope: f64,
    pub n: usize,
    pub theta: f64,
}

/// Slopes for the normalized parametrization `p = 1 + theta a`.
pub fn slopes_from_sup_norm(n: usize, theta: f64, sup_norm: f64) -> Result<SlopePair> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::domain(format!("theta = {theta} must lie in (0,1)")));
    }
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    let nt2 = n as f64 * theta * theta;
    Ok(SlopePair { ks_slope: 2.0 * nt2 * sup_norm * sup_norm, np_slope: nt2 / 2.0, n, theta })
}

pub fn slopes(n: usize, theta: f64, score: &NormalizedScore) -> Result<SlopePair> {
    slopes_from_sup_norm(n, theta, score.sup_norm_primitive())
}

/// `min(1, 2 exp(-x^2 / (2 (1 + x M / sqrt(n)))))`.
pub fn bernstein_bound(x: f64, m: f64, n: usize) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("x = {x} must be nonnegative")));
    }
    if !(m > 0.0) || n == 0 {
        return Err(Error::domain(format!("need M > 0 and n >= 1 (M = {m}, n = {n})")));
    }
    let denom = 2.0 * (1.0 + x * m / (n as f64).sqrt());
    Ok((2.0 * (-x * x / denom).exp()).min(1.0))
}

/// The constant `M_n = 6 r / sigma_0n` used with [`bernstein_bound`].
pub fn bernstein_m(r: f64, sigma0: f64) -> f64 {
    6.0 * r / sigma0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NpModdev {
    /// `-log P_0(V_n >= sqrt(n) x) / (n x^2)`.
    pub rate: f64,
    pub x: f64,
    pub n: usize,
    pub tail: TailEstimate,
}

/// `-log P_0(V_n >= sqrt(n) x) / (n x^2)`; tends to 1/2 inside the window
/// `2 delta sigma_0n < x < 2 (1 - delta) sigma_0n` (delta = 0.1) when the
/// alternative is square integrable. Heavy-tailed alternatives skip the
/// window check; there only positivity of the rate is known.
pub fn np_moddev_rate(alt: &LocalAlternative, n: usize, x: f64, cfg: &SimulationConfig) -> Result<f64> {
    Ok(np_moddev_estimate(alt, n, x, cfg)?.rate)
}

pub fn np_moddev_estimate(alt: &LocalAlternative, n: usize, x: f64, cfg: &SimulationConfig) -> Result<NpModdev> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::domain(format!("x = {x} must be positive")));
    }
    let m = log_moments(alt, MOMENT_TOL)?;
    let sigma0 = m.sigma0();
    if alt.spec().is_square_integrable() {
        let (lo, hi) = (2.0 * MODDEV_DELTA * sigma0, 2.0 * (1.0 - MODDEV_DELTA) * sigma0);
        if !(x > lo && x < hi) {
            return Err(Error::domain(format!(
                "x = {x:.6} outside the moderate-deviation window ({lo:.6}, {hi:.6})"
            )));
        }
    }
    let nf = n as f64;
    let threshold = nf * m.e0 + nf * sigma0 * x;
    let tail = null_log_sum_tail(alt, n, threshold, cfg)?;
    Ok(NpModdev { rate: -tail.log_probability / (nf * x * x), x, n, tail })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alt_model::{normalize_score, DensitySpec};

    #[test]
    fn closed_form_examples() {
        assert!((efficiency_power_family(0.4).unwrap() - 5.787).abs() < 1e-3);
        assert!((efficiency_power_family(0.3).unwrap() - 3.302).abs() < 1e-3);
        let small = efficiency_power_family(1e-4).unwrap();
        assert!((small - std::f64::consts::E.powi(2) / 4.0).abs() < 1e-3, "{small}");
        assert!((efficiency_from_sup_norm(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(efficiency_power_family(0.6), Err(Error::InfiniteEfficiency { r: 0.6 }));
        assert_eq!(efficiency_power_family(0.5), Err(Error::InfiniteEfficiency { r: 0.5 }));
        assert!(matches!(efficiency_power_family(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn closed_form_matches_quadrature_route() {
        for k in 1..=9 {
            let r = 0.05 * k as f64;
            let score = normalize_score(&DensitySpec::power_tail(r).unwrap()).unwrap();
            let q = efficiency_theoretical(&score).unwrap();
            let c = efficiency_power_family(r).unwrap();
            assert!((q - c).abs() < 1e-6, "r={r}: {q} vs {c}");
        }
    }

    #[test]
    fn efficiency_blows_up_near_half() {
        let mut prev = efficiency_power_family(0.26).unwrap();
        for k in 27..50 {
            let v = efficiency_power_family(k as f64 / 100.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(efficiency_power_family(0.49).unwrap() > 50.0);
    }

    #[test]
    fn slope_identities() {
        let s = slopes_from_sup_norm(100, 0.1, 0.5).unwrap();
        assert!((s.ks_slope - 0.5).abs() < 1e-15 && (s.np_slope - 0.5).abs() < 1e-15);
        for r in [0.1, 0.3, 0.4] {
            let score = normalize_score(&DensitySpec::power_tail(r).unwrap()).unwrap();
            let s = slopes(1000, 0.05, &score).unwrap();
            let e = efficiency_theoretical(&score).unwrap();
            assert!((s.ks_slope * e - s.np_slope).abs() <= 1e-12 * s.np_slope);
            let a = score.sup_norm_primitive();
            assert!((s.ks_slope / s.np_slope - 4.0 * a * a).abs() < 1e-14);
        }
        let score = normalize_score(&DensitySpec::power_tail(0.3).unwrap()).unwrap();
        let s = slopes(10_000, 0.05, &score).unwrap();
        assert!((s.ks_slope - 3.786).abs() < 2e-3, "{}", s.ks_slope);
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_bound(0.0, 1.0, 9).unwrap(), 1.0);
        let v = bernstein_bound(3.0, 1.0, 9).unwrap();
        assert!((v - 2.0 * (-2.25f64).exp()).abs() < 1e-15);
        assert!((v - 0.2108).abs() < 1e-3);
        assert!(bernstein_bound(-1.0, 1.0, 9).is_err());
        let mut prev = 1.0;
        for i in 0..50 {
            let b = bernstein_bound(0.2 * i as f64, 2.0, 100).unwrap();
            assert!(b <= prev && (0.0..=1.0).contains(&b));
            prev = b;
        }
    }

    #[test]
    fn moddev_window_is_enforced() {
        let alt = LocalAlternative::normalized(DensitySpec::power_tail(0.3).unwrap(), 0.05).unwrap();
        let s0 = log_moments(&alt, MOMENT_TOL).unwrap().sigma0();
        let cfg = SimulationConfig::new(1);
        match np_moddev_rate(&alt, 1000, 0.1 * s0, &cfg) {
            Err(Error::Domain(msg)) => assert!(msg.contains("window")),
            other => panic!("{other:?}"),
        }
        assert!(np_moddev_rate(&alt, 1000, 1.9 * s0, &cfg).is_err());
    }
}
