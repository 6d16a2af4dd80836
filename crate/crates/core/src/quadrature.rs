//! Quadrature on the unit interval with an integrable singularity at 0.
//!
//! The left piece `(0, t0]` is handled by double-exponential (tanh-sinh)
//! quadrature, which clusters nodes at the endpoint doubly exponentially;
//! the regular piece `[t0, 1]` by globally adaptive 21-point Gauss-Kronrod
//! panels seeded on a log-spaced partition.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Tolerance { abs, rel: 0.0 }
    }

    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_478,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One Gauss-Kronrod 21 panel: (kronrod estimate, |kronrod - gauss|).
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

const MAX_PANELS: usize = 4000;

/// Globally adaptive Gauss-Kronrod over the partition `breaks`
/// (strictly increasing, at least two points).
pub fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (value, error) = gk21(f, w[0], w[1]);
        evaluations += 21;
        heap.push(Panel { a: w[0], b: w[1], value, error });
    }
    // Panels too narrow to split further; their error is final.
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    loop {
        let (value, error) = heap
            .iter()
            .fold((frozen_value, frozen_error), |(v, e), p| (v + p.value, e + p.error));
        if !value.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite integrand on [{}, {}]",
                breaks[0],
                breaks[breaks.len() - 1]
            )));
        }
        if error <= tol.target(value) {
            return Ok(QuadResult { value, error, evaluations });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => return Ok(QuadResult { value, error, evaluations }),
        };
        if heap.len() + 1 >= MAX_PANELS {
            return Err(Error::Numeric(format!(
                "adaptive quadrature did not converge: {} panels, error {:e} > target {:e}, worst panel [{:e}, {:e}]",
                heap.len() + 1,
                error,
                tol.target(value),
                worst.a,
                worst.b
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b || (worst.b - worst.a) < 1e-14 * mid.abs().max(1e-300) {
            frozen_value += worst.value;
            frozen_error += worst.error;
            continue;
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk21(f, a, b);
            evaluations += 21;
            heap.push(Panel { a, b, value, error });
        }
    }
}

/// Tanh-sinh quadrature on `(a, b]` for integrands that may be singular at `a`.
///
/// Nodes are generated from their distance to `a`, so `f` sees arguments
/// arbitrarily close to (but never equal to) `a`.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    const TAU_MAX: f64 = 6.5;
    const MAX_LEVEL: u32 = 12;
    let width = b - a;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut evaluations = 0;

    let node = |tau: f64| -> f64 {
        let s = half_pi * tau.sinh();
        // x - a = width / (1 + e^{-2s}),  dx/dtau = width * pi/2 cosh(tau) / (2 cosh^2 s)
        let dist = width / (1.0 + (-2.0 * s).exp());
        if dist <= 0.0 || !dist.is_finite() {
            return 0.0;
        }
        let x = a + dist;
        if x >= b && tau > 0.0 {
            return 0.0;
        }
        let cs = s.cosh();
        let weight = width * half_pi * tau.cosh() / (2.0 * cs * cs);
        if weight == 0.0 {
            return 0.0;
        }
        let fx = f(x);
        fx * weight
    };

    let mut h = 1.0;
    let n0 = (TAU_MAX / h) as i64;
    let mut sum = 0.0;
    for j in -n0..=n0 {
        sum += node(j as f64 * h);
        evaluations += 1;
    }
    let mut estimate = sum * h;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let n = (TAU_MAX / h) as i64;
        let mut fresh = 0.0;
        let mut j = -n + if n % 2 == 0 { 1 } else { 0 };
        while j <= n {
            fresh += node(j as f64 * h);
            evaluations += 1;
            j += 2;
        }
        sum += fresh;
        let next = sum * h;
        let error = (next - estimate).abs();
        if !next.is_finite() {
            return Err(Error::Numeric(format!("tanh-sinh: non-finite sum on ({a:e}, {b:e}]")));
        }
        estimate = next;
        if level >= 3 && error <= tol.target(estimate) {
            return Ok(QuadResult { value: estimate, error, evaluations });
        }
    }
    Err(Error::Numeric(format!(
        "tanh-sinh did not converge on ({a:e}, {b:e}] after {MAX_LEVEL} levels ({evaluations} evaluations)"
    )))
}

/// Log-spaced breakpoints covering `[t0, 1]`, one per decade plus the ends.
pub fn log_breaks(t0: f64) -> Vec<f64> {
    let mut breaks = vec![t0];
    let mut t = 10f64.powf(t0.log10().floor() + 1.0);
    while t < 1.0 {
        if t > t0 * 1.5 {
            breaks.push(t);
        }
        t *= 10.0;
    }
    if *breaks.last().unwrap() < 0.5 {
        breaks.push(0.5);
    }
    breaks.push(1.0);
    breaks
}

/// `int_0^1 f` for integrands with an integrable singularity at 0,
/// splitting at `t0`.
pub fn integrate_unit<F: Fn(f64) -> f64>(f: &F, t0: f64, tol: Tolerance) -> Result<QuadResult> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::domain(format!("split point {t0} must lie in (0,1)")));
    }
    let half = Tolerance::new(tol.abs * 0.5, tol.rel);
    let left = tanh_sinh(f, 0.0, t0, half)?;
    let right = adaptive_gk(f, &log_breaks(t0), half)?;
    Ok(QuadResult {
        value: left.value + right.value,
        error: left.error + right.error,
        evaluations: left.evaluations + right.evaluations,
    })
}

/// Integral over `[a, b]` with `0 <= a < b <= 1`, singular-aware when `a == 0`.
pub fn integrate_range<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    if a >= b {
        return Ok(QuadResult { value: 0.0, error: 0.0, evaluations: 0 });
    }
    if a == 0.0 {
        let t0 = (b * 1e-3).min(1e-3);
        let left = tanh_sinh(f, 0.0, t0, tol)?;
        let mut breaks = log_breaks(t0 / b);
        for x in breaks.iter_mut() {
            *x *= b;
        }
        *breaks.last_mut().unwrap() = b;
        let right = adaptive_gk(f, &breaks, tol)?;
        return Ok(QuadResult {
            value: left.value + right.value,
            error: left.error + right.error,
            evaluations: left.evaluations + right.evaluations,
        });
    }
    adaptive_gk(f, &[a, b], tol)
}
