//! The local alternative family `p(t) = 1 - theta + theta f(t)` on (0,1).
//!
//! `f` is either the power-tail density `(1-r) t^{-r}` or a user supplied
//! evaluator. Square-integrable members (`r < 1/2`) also admit the
//! normalized score `a = (f - 1)/c` with `c^2 = int (f-1)^2`, whose primitive
//! `A` has sup-norm governing the KS slope.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_range, integrate_unit, Tolerance};
use crate::rng::UniformStream;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Density integrates to one within this tolerance.
pub const NORMALIZATION_TOL: f64 = 1e-8;

#[derive(Clone)]
pub enum DensitySpec {
    /// `f_r(t) = (1-r) t^{-r}`, `0 < r < 1`.
    PowerTail { r: f64 },
    Custom(CustomDensity),
}

#[derive(Clone)]
enum CdfSource {
    Supplied(RealFn),
    Tabulated(Arc<CdfTable>),
}

/// A density given by an evaluator on (0,1).
#[derive(Clone)]
pub struct CustomDensity {
    name: String,
    pdf: RealFn,
    cdf: CdfSource,
    square_integrable: bool,
}

/// Cumulative integrals of a density over a fixed panel partition.
struct CdfTable {
    knots: Vec<f64>,
    cumulative: Vec<f64>,
}

impl CdfTable {
    fn build(pdf: &RealFn) -> Result<Self> {
        let mut knots = vec![0.0];
        let mut t = 1e-12;
        while t < 1e-3 {
            knots.push(t);
            t *= 10.0;
        }
        let panels = 512;
        for i in 0..panels {
            knots.push(1e-3 + (1.0 - 1e-3) * i as f64 / panels as f64);
        }
        knots.push(1.0);
        let f = |x: f64| pdf(x);
        let tol = Tolerance::new(1e-15, 1e-13);
        let mut cumulative = Vec::with_capacity(knots.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += integrate_range(&f, w[0], w[1], tol)?.value;
            cumulative.push(acc);
        }
        Ok(CdfTable { knots, cumulative })
    }

    fn eval(&self, pdf: &RealFn, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return *self.cumulative.last().unwrap();
        }
        let j = self.knots.partition_point(|&k| k <= t) - 1;
        let f = |x: f64| pdf(x);
        let tol = Tolerance::new(1e-15, 1e-13);
        let piece = integrate_range(&f, self.knots[j], t, tol).map(|r| r.value).unwrap_or(f64::NAN);
        self.cumulative[j] + piece
    }
}

impl CustomDensity {
    /// Wraps an evaluator. Without a supplied CDF one is tabulated by
    /// adaptive quadrature. `square_integrable` declares whether
    /// `int f^2 < infinity`.
    pub fn new(
        name: impl Into<String>,
        pdf: RealFn,
        cdf: Option<RealFn>,
        square_integrable: bool,
    ) -> Result<Self> {
        let name = name.into();
        for i in 1..4096 {
            let t = i as f64 / 4096.0;
            let v = pdf(t);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("density {name} is {v} at t = {t}")));
            }
        }
        let cdf = match cdf {
            Some(c) => CdfSource::Supplied(c),
            None => CdfSource::Tabulated(Arc::new(CdfTable::build(&pdf)?)),
        };
        let density = CustomDensity { name, pdf, cdf, square_integrable };
        let f = |t: f64| (density.pdf)(t);
        let total = integrate_unit(&f, 1e-3, Tolerance::abs(1e-11))?.value;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::domain(format!(
                "density {} integrates to {total}, not 1",
                density.name
            )));
        }
        Ok(density)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::PowerTail { r } => write!(f, "PowerTail {{ r: {r} }}"),
            DensitySpec::Custom(c) => write!(f, "Custom({})", c.name),
        }
    }
}

impl DensitySpec {
    pub fn power_tail(r: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::domain(format!("power-tail exponent r = {r} must lie in (0,1)")));
        }
        Ok(DensitySpec::PowerTail { r })
    }

    pub fn custom(density: CustomDensity) -> Self {
        DensitySpec::Custom(density)
    }

    /// Tail exponent when known.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self {
            DensitySpec::PowerTail { r } => Some(*r),
            DensitySpec::Custom(_) => None,
        }
    }

    pub fn is_square_integrable(&self) -> bool {
        match self {
            DensitySpec::PowerTail { r } => *r < 0.5,
            DensitySpec::Custom(c) => c.square_integrable,
        }
    }

    /// Split point between the endpoint-singular and regular quadrature pieces.
    pub fn split_point(&self, theta: f64) -> f64 {
        match self {
            DensitySpec::PowerTail { r } if theta > 0.0 => theta.powf(1.0 / r).clamp(1e-300, 1e-3),
            _ => 1e-3,
        }
    }

    /// `f(t)`.
    #[inline]
    pub fn pdf(&self, t: f64) -> f64 {
        match self {
            DensitySpec::PowerTail { r } => (1.0 - r) * t.powf(-r),
            DensitySpec::Custom(c) => (c.pdf)(t),
        }
    }

    /// `F_f(t) = int_0^t f`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        match self {
            DensitySpec::PowerTail { r } => t.powf(1.0 - r),
            DensitySpec::Custom(c) => match &c.cdf {
                CdfSource::Supplied(cdf) => cdf(t),
                CdfSource::Tabulated(table) => table.eval(&c.pdf, t),
            },
        }
    }

    /// Raw primitive `int_0^t (f - 1) = F_f(t) - t`.
    pub fn primitive_raw(&self, t: f64) -> f64 {
        match self {
            DensitySpec::PowerTail { r } => {
                if t <= 0.0 || t >= 1.0 {
                    0.0
                } else {
                    t.powf(1.0 - r) - t
                }
            }
            _ => self.cdf(t) - t.clamp(0.0, 1.0),
        }
    }

    /// Mixture density `1 - theta + theta f(t)`, `theta` in [0,1].
    #[inline]
    pub fn mixture_density(&self, theta: f64, t: f64) -> f64 {
        1.0 - theta + theta * self.pdf(t)
    }

    /// `log(1 - theta + theta f(t))`, switching between `log1p` and `ln`
    /// at `theta |f - 1| = 0.5`.
    #[inline]
    pub fn mixture_log_density(&self, theta: f64, t: f64) -> f64 {
        mixture_log_from_pdf(theta, self.pdf(t))
    }

    pub fn mixture_cdf(&self, theta: f64, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return 1.0;
        }
        (1.0 - theta) * t + theta * self.cdf(t)
    }

    /// Inverse of [`mixture_cdf`](Self::mixture_cdf) to absolute accuracy 1e-12.
    pub fn mixture_quantile(&self, theta: f64, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::domain(format!("quantile level {u} outside [0,1]")));
        }
        if u == 0.0 || u == 1.0 || theta == 0.0 {
            return Ok(u);
        }
        match self {
            DensitySpec::PowerTail { r } => Ok(power_tail_quantile(*r, theta, u)),
            DensitySpec::Custom(_) => self.bisect_quantile(theta, u),
        }
    }

    /// Bisection down to a 1e-13 bracket, then one guarded Newton step.
    fn bisect_quantile(&self, theta: f64, u: f64) -> Result<f64> {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        let mut iterations = 0;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            let c = self.mixture_cdf(theta, mid);
            if !c.is_finite() {
                return Err(Error::Numeric(format!("cdf is {c} at t = {mid} while inverting u = {u}")));
            }
            if c < u {
                lo = mid;
            } else {
                hi = mid;
            }
            iterations += 1;
            if iterations > 200 {
                return Err(Error::Numeric(format!(
                    "quantile bracket [{lo}, {hi}] for u = {u} failed to shrink"
                )));
            }
        }
        let mid = 0.5 * (lo + hi);
        let slope = self.mixture_density(theta, mid);
        if slope > 0.0 && slope.is_finite() {
            let step = mid - (self.mixture_cdf(theta, mid) - u) / slope;
            if step > lo && step < hi {
                return Ok(step);
            }
        }
        Ok(mid)
    }

    /// Intermediate step of [`sample_alternative`]: one inverse-transform draw.
    #[inline]
    pub fn draw(&self, theta: f64, stream: &mut UniformStream) -> f64 {
        let u = stream.next_open01();
        let t = match self {
            DensitySpec::PowerTail { r } => power_tail_quantile(*r, theta, u),
            DensitySpec::Custom(_) => self.mixture_quantile(theta, u).unwrap_or(u),
        };
        clamp_draw(t)
    }
}

#[inline]
fn mixture_log_from_pdf(theta: f64, f: f64) -> f64 {
    let y = theta * (f - 1.0);
    if y.abs() < 0.5 {
        y.ln_1p()
    } else {
        (1.0 - theta + theta * f).ln()
    }
}

#[inline]
fn clamp_draw(t: f64) -> f64 {
    t.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Solves `(1-theta) t + theta t^{1-r} = u` by Newton's method in `y = ln t`.
///
/// `ln F(e^y)` is a log-sum-exp of affine functions, hence convex and
/// increasing, so Newton started to the right of the root decreases
/// monotonically onto it.
pub fn power_tail_quantile(r: f64, theta: f64, u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    if theta >= 1.0 {
        return u.powf(1.0 / (1.0 - r));
    }
    if theta <= 0.0 {
        return u;
    }
    power_tail_log_quantile(r, theta, u.ln()).exp().min(1.0)
}

/// `ln t` for `ln u = log_u`, `theta` strictly inside (0,1).
fn power_tail_log_quantile(r: f64, theta: f64, log_u: f64) -> f64 {
    let s = 1.0 - r;
    let log_a = (1.0 - theta).ln();
    let log_b = theta.ln();
    let mut y = (log_u - log_a).min((log_u - log_b) / s).min(0.0);
    for _ in 0..60 {
        let ea = (log_a + y).exp();
        let eb = (log_b + s * y).exp();
        let total = ea + eb;
        let h = total.ln() - log_u;
        let slope = (ea + s * eb) / total;
        let step = h / slope;
        y -= step;
        if step.abs() <= 4.0 * f64::EPSILON * y.abs().max(1.0) {
            break;
        }
    }
    y.min(0.0)
}

const TABLE_LOG_U_MIN: f64 = -40.0;
const TABLE_INTERVALS: usize = 2048;

/// Fast inverse transform for a power-tail mixture.
///
/// `y = ln t` is tabulated against `x = ln u` together with `dy/dx`, and a
/// cubic Hermite interpolant (relative error around 1e-9 in `t`) is
/// polished by one Newton step on `(1-theta) t + theta t^{1-r} = u`.
#[derive(Clone)]
struct PowerTailSampler {
    r: f64,
    theta: f64,
    inv_h: f64,
    h: f64,
    y: Vec<f64>,
    dy: Vec<f64>,
}

impl fmt::Debug for PowerTailSampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PowerTailSampler").field("r", &self.r).field("theta", &self.theta).finish()
    }
}

impl PowerTailSampler {
    fn new(r: f64, theta: f64) -> Self {
        let s = 1.0 - r;
        let h = -TABLE_LOG_U_MIN / TABLE_INTERVALS as f64;
        let (mut y, mut dy) = (Vec::with_capacity(TABLE_INTERVALS + 1), Vec::with_capacity(TABLE_INTERVALS + 1));
        for i in 0..=TABLE_INTERVALS {
            let x = TABLE_LOG_U_MIN + i as f64 * h;
            let yi = power_tail_log_quantile(r, theta, x);
            let ea = (1.0 - theta) * yi.exp();
            let eb = theta * (s * yi).exp();
            y.push(yi);
            dy.push((ea + eb) / (ea + s * eb));
        }
        PowerTailSampler { r, theta, inv_h: 1.0 / h, h, y, dy }
    }

    /// `(t, t^{1-r})` with `F(t) = u`.
    #[inline]
    fn invert(&self, u: f64) -> (f64, f64) {
        let s = 1.0 - self.r;
        let x = u.ln();
        let pos = (x - TABLE_LOG_U_MIN) * self.inv_h;
        let y = if pos < 0.0 {
            power_tail_log_quantile(self.r, self.theta, x)
        } else {
            let i = (pos as usize).min(TABLE_INTERVALS - 1);
            let tau = pos - i as f64;
            let (t2, t3) = (tau * tau, tau * tau * tau);
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
                + (t3 - 2.0 * t2 + tau) * self.h * self.dy[i]
                + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
                + (t3 - t2) * self.h * self.dy[i + 1]
        };
        let t = y.exp();
        let ts = (s * y).exp();
        let g = (1.0 - self.theta) * t + self.theta * ts - u;
        let gp = (1.0 - self.theta) + self.theta * s * ts / t;
        let t1 = t - g / gp;
        if !(t1 > 0.0) {
            return (t, ts);
        }
        let t1 = t1.min(1.0);
        // first-order update of t^s, exact to O(step^2)
        (t1, ts * (1.0 + s * (t1 - t) / t))
    }
}

/// A member `p_theta = 1 - theta + theta f` with `theta` strictly in (0,1).
#[derive(Clone, Debug)]
pub struct LocalAlternative {
    spec: DensitySpec,
    theta: f64,
    sampler: Option<Arc<PowerTailSampler>>,
}

impl LocalAlternative {
    pub fn new(spec: DensitySpec, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::domain(format!("theta = {theta} must lie strictly inside (0,1)")));
        }
        let sampler = match spec {
            DensitySpec::PowerTail { r } => Some(Arc::new(PowerTailSampler::new(r, theta))),
            DensitySpec::Custom(_) => None,
        };
        Ok(LocalAlternative { spec, theta, sampler })
    }

    /// Alternative `1 + theta_a a(t)` in the normalized parametrization;
    /// the mixing weight is `theta_a / c`.
    pub fn normalized(spec: DensitySpec, theta_a: f64) -> Result<Self> {
        let score = normalize_score(&spec)?;
        LocalAlternative::new(spec, theta_a / score.c())
    }

    pub fn power_tail(r: f64, theta: f64) -> Result<Self> {
        LocalAlternative::new(DensitySpec::power_tail(r)?, theta)
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn density_value(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::domain(format!("density argument t = {t} outside (0,1]")));
        }
        Ok(self.spec.mixture_density(self.theta, t))
    }

    #[inline]
    pub fn log_density(&self, t: f64) -> f64 {
        self.spec.mixture_log_density(self.theta, t)
    }

    pub fn cdf_value(&self, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::domain(format!("cdf argument t = {t} outside [0,1]")));
        }
        Ok(self.spec.mixture_cdf(self.theta, t))
    }

    pub fn quantile(&self, u: f64) -> Result<f64> {
        self.spec.mixture_quantile(self.theta, u)
    }

    #[inline]
    pub fn draw(&self, stream: &mut UniformStream) -> f64 {
        match &self.sampler {
            Some(sm) => clamp_draw(sm.invert(stream.next_open01()).0),
            None => self.spec.draw(self.theta, stream),
        }
    }

    /// One draw together with `log p` at the drawn point.
    #[inline]
    pub fn draw_with_log_density(&self, stream: &mut UniformStream) -> (f64, f64) {
        match &self.sampler {
            Some(sm) => {
                let (t, ts) = sm.invert(stream.next_open01());
                let t = clamp_draw(t);
                let DensitySpec::PowerTail { r } = self.spec else { unreachable!() };
                let f = (1.0 - r) * ts / t;
                (t, mixture_log_from_pdf(self.theta, f))
            }
            None => {
                let t = self.spec.draw(self.theta, stream);
                (t, self.log_density(t))
            }
        }
    }

    /// `n` i.i.d. inverse-transform draws from `stream`.
    pub fn sample_alternative(&self, n: usize, stream: &mut UniformStream) -> Vec<f64> {
        (0..n).map(|_| self.draw(stream)).collect()
    }
}

/// `a = (f - 1)/c` for square-integrable `f`.
#[derive(Clone, Debug)]
pub struct NormalizedScore {
    spec: DensitySpec,
    c: f64,
}

pub fn normalize_score(spec: &DensitySpec) -> Result<NormalizedScore> {
    if !spec.is_square_integrable() {
        return Err(Error::NotSquareIntegrable(format!("{spec:?}")));
    }
    let c = match spec {
        DensitySpec::PowerTail { r } => r / (1.0 - 2.0 * r).sqrt(),
        DensitySpec::Custom(_) => {
            let g2 = |t: f64| (spec.pdf(t) - 1.0).powi(2);
            integrate_unit(&g2, 1e-3, Tolerance::new(1e-13, 1e-12))?.value.sqrt()
        }
    };
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Degenerate(format!("||f - 1||_2 = {c}; f must differ from uniform")));
    }
    Ok(NormalizedScore { spec: spec.clone(), c })
}

impl NormalizedScore {
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn a(&self, t: f64) -> f64 {
        (self.spec.pdf(t) - 1.0) / self.c
    }

    /// `A(t) = int_0^t a`.
    pub fn primitive(&self, t: f64) -> f64 {
        self.spec.primitive_raw(t) / self.c
    }

    /// Point where `|A|` peaks, with the peak value.
    pub fn primitive_peak(&self) -> (f64, f64) {
        match self.spec {
            DensitySpec::PowerTail { r } => {
                let t = (1.0 - r).powf(1.0 / r);
                let sup = (1.0 - 2.0 * r).sqrt() * (1.0 - r).powf(1.0 / r - 1.0);
                (t, sup)
            }
            DensitySpec::Custom(_) => grid_peak(&|t| self.primitive(t).abs(), 4096),
        }
    }

    /// `||A||_inf` over [0,1].
    pub fn sup_norm_primitive(&self) -> f64 {
        self.primitive_peak().1
    }
}

/// Maximizes `g` on (0,1): uniform grid scan, then golden-section search
/// around the three best grid points.
pub(crate) fn grid_peak(g: &dyn Fn(f64) -> f64, points: usize) -> (f64, f64) {
    let step = 1.0 / points as f64;
    let mut scored: Vec<(usize, f64)> = (1..points).map(|i| (i, g(i as f64 * step))).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut best = (scored[0].0 as f64 * step, scored[0].1);
    for &(i, _) in scored.iter().take(3) {
        let lo = (i as f64 - 1.0) * step;
        let hi = (i as f64 + 1.0) * step;
        let (t, v) = golden_max(g, lo.max(0.0), hi.min(1.0), 1e-8);
        if v > best.1 {
            best = (t, v);
        }
    }
    best
}

fn golden_max(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while b - a > tol {
        if g1 < g2 {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + inv_phi * (b - a);
            g2 = g(x2);
        } else {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - inv_phi * (b - a);
            g1 = g(x1);
        }
    }
    if g1 > g2 {
        (x1, g1)
    } else {
        (x2, g2)
    }
}

/// Rate `kappa_{nr}`: `theta^{1/(2r)}` for `r > 1/2`,
/// `theta sqrt(log(1/theta))` at `r = 1/2`.
pub fn kappa(r: f64, theta: f64) -> Result<f64> {
    if !(0.5..1.0).contains(&r) {
        return Err(Error::domain(format!("kappa needs r in [1/2, 1), got {r}")));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::domain(format!("kappa needs theta in (0,1], got {theta}")));
    }
    if r == 0.5 {
        Ok(theta * (1.0 / theta).ln().sqrt())
    } else {
        Ok(theta.powf(1.0 / (2.0 * r)))
    }
}

/// Constants certifying `C1 t^{-r} <= f(t) <= C2 t^{-r}` below `C1^{1/r}`
/// and `f <= C2` above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavyTailCertificate {
    pub r: f64,
    pub c1: f64,
    pub c2: f64,
    pub grid_points_checked: usize,
    pub t_min: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct HeavyTailGrid {
    pub points: usize,
    pub t_min: f64,
    /// Largest tolerated drift of `ln(f(t) t^r)` per unit `ln t` near 0.
    pub slope_tol: f64,
}

impl Default for HeavyTailGrid {
    fn default() -> Self {
        HeavyTailGrid { points: 10_000, t_min: 1e-12, slope_tol: 0.01 }
    }
}

pub fn check_heavy_tail(spec: &DensitySpec, r: f64) -> Result<HeavyTailCertificate> {
    check_heavy_tail_on(spec, r, HeavyTailGrid::default())
}

pub fn check_heavy_tail_on(spec: &DensitySpec, r: f64, grid: HeavyTailGrid) -> Result<HeavyTailCertificate> {
    if !(0.5..1.0).contains(&r) {
        return Err(Error::domain(format!(
            "heavy-tail check needs r in [1/2, 1), got {r}; smaller r is the square-integrable case"
        )));
    }
    let k = grid.points.max(100);
    let ln_min = grid.t_min.ln();
    let ts: Vec<f64> = (0..k).map(|i| (ln_min * (1.0 - i as f64 / k as f64)).exp()).collect();
    let ratio: Vec<f64> = ts.iter().map(|&t| spec.pdf(t) * t.powf(r)).collect();

    if let Some(i) = ratio.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::ConditionViolated {
            worst_t: ts[i],
            detail: format!("f(t) t^r = {} is not positive and finite", ratio[i]),
        });
    }

    // Drift of ln(f t^r) over the first two decades of the grid.
    let probe = ts.partition_point(|&t| t < grid.t_min * 100.0).min(k - 1);
    let slope = (ratio[probe].ln() - ratio[0].ln()) / (ts[probe].ln() - ts[0].ln());
    if slope.abs() > grid.slope_tol {
        let bound = if slope < 0.0 { "upper bound C2 t^-r" } else { "lower bound C1 t^-r" };
        return Err(Error::ConditionViolated {
            worst_t: ts[0],
            detail: format!(
                "f(t) t^r drifts like t^{slope:.4} as t -> 0, so the {bound} fails for every constant"
            ),
        });
    }

    let c1_cap = (1.0 - r).powf(r);
    let cap_edge = c1_cap.powf(1.0 / r);
    let lower_min = ts
        .iter()
        .zip(&ratio)
        .filter(|(t, _)| **t < cap_edge)
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    let c1 = c1_cap.min(lower_min);
    let edge = c1.powf(1.0 / r);

    let mut upper = 1.0f64;
    for (&t, &v) in ts.iter().zip(&ratio) {
        let needed = if t < edge { v } else { spec.pdf(t) };
        upper = upper.max(needed);
    }
    let c2 = upper * 1.01;

    for (&t, &v) in ts.iter().zip(&ratio) {
        let ok = if t < edge { v >= c1 && v <= c2 } else { spec.pdf(t) <= c2 };
        if !ok {
            return Err(Error::ConditionViolated {
                worst_t: t,
                detail: format!("constants C1 = {c1}, C2 = {c2} fail at this grid point"),
            });
        }
    }
    Ok(HeavyTailCertificate { r, c1, c2, grid_points_checked: k, t_min: grid.t_min })
}
