//! Maximum-modulus growth of `D f` measured against `(-r;q)_inf`.
//!
//! Everything is carried as `y = ln M(r) - ln(-r;q)_inf`; `M(r)` itself is
//! never formed, since `(-r;q)_inf` leaves double range near `r = 1e13` at
//! `q = 0.5`.

use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;

use crate::durrmeyer;
use crate::error::{QError, Result};
use crate::funcspace::GridFunction;
use crate::qcore::{self, QContext};
use crate::scaled::ScaledValue;
use crate::taylor::{self, PowerSeriesRep};

pub const DEFAULT_ANGLES: usize = 1024;
pub const DEFAULT_R_MIN: f64 = 1e1;
pub const DEFAULT_R_MAX: f64 = 1e10;
pub const DEFAULT_R_POINTS: usize = 40;

/// Golden-section steps after the angular scan.
const REFINE_STEPS: usize = 60;

/// How far below `ln M(r_max)` the neglected Taylor terms must sit.
const TRUNCATION_MARGIN: f64 = 30.0;

/// `n` points from `r_min` to `r_max`, equally spaced in `ln r`.
pub fn geometric_grid(r_min: f64, r_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(r_min > 0.0 && r_max > r_min && n >= 2) {
        return Err(QError::InvalidParameter(format!(
            "grid needs 0 < r_min < r_max and at least 2 points, got {r_min}, {r_max}, {n}"
        )));
    }
    let (a, b) = (r_min.ln(), r_max.ln());
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                r_min
            } else if i == n - 1 {
                r_max
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

pub fn default_grid() -> Vec<f64> {
    geometric_grid(DEFAULT_R_MIN, DEFAULT_R_MAX, DEFAULT_R_POINTS).expect("valid default grid")
}

fn check_grid(r_grid: &[f64]) -> Result<()> {
    if r_grid.is_empty() || r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(QError::InvalidParameter(
            "radius grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// An entire function that can be evaluated in log form.
pub trait EntireFunction {
    fn eval_scaled(&self, z: Complex64) -> Result<ScaledValue>;

    /// An angle where `|F|` is maximal on every circle, when coefficient signs
    /// determine one.
    fn max_angle(&self) -> Option<f64> {
        None
    }
}

impl EntireFunction for PowerSeriesRep {
    fn eval_scaled(&self, z: Complex64) -> Result<ScaledValue> {
        Ok(taylor::eval_taylor_scaled(self, z))
    }

    fn max_angle(&self) -> Option<f64> {
        let signs: Vec<(usize, i8)> = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_negligible())
            .map(|(k, t)| (k, t.sign))
            .collect();
        if signs.iter().all(|(_, s)| *s >= 0) {
            Some(0.0)
        } else if signs.iter().all(|(k, s)| if k % 2 == 0 { *s >= 0 } else { *s <= 0 }) {
            Some(PI)
        } else {
            None
        }
    }
}

/// The double series of the operator, for cross-checks at moderate radii.
pub struct DoubleSeries<'a> {
    pub gf: &'a GridFunction,
    pub ctx: &'a QContext,
}

impl EntireFunction for DoubleSeries<'_> {
    fn eval_scaled(&self, z: Complex64) -> Result<ScaledValue> {
        durrmeyer::eval_entire_scaled(self.gf, z, self.ctx)
    }
}

/// `(ln M(r), theta_max)` by an angular scan with golden-section refinement.
pub fn max_modulus_scaled<F: EntireFunction + ?Sized>(f: &F, r: f64, n_angles: usize) -> Result<(f64, f64)> {
    if !(r > 0.0) {
        return Err(QError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if n_angles < 8 {
        return Err(QError::InvalidParameter(format!("need at least 8 angles, got {n_angles}")));
    }
    let ln_abs = |theta: f64| -> Result<f64> { Ok(f.eval_scaled(Complex64::from_polar(r, theta))?.ln_abs()) };
    if let Some(theta) = f.max_angle() {
        return Ok((ln_abs(theta)?, theta));
    }
    let step = 2.0 * PI / n_angles as f64;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for m in 0..n_angles {
        let theta = m as f64 * step;
        let v = ln_abs(theta)?;
        if v > best.0 {
            best = (v, theta);
        }
    }
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let mut c = b - golden * (b - a);
    let mut d = a + golden * (b - a);
    let (mut fc, mut fd) = (ln_abs(c)?, ln_abs(d)?);
    for _ in 0..REFINE_STEPS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - golden * (b - a);
            fc = ln_abs(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + golden * (b - a);
            fd = ln_abs(d)?;
        }
    }
    for (v, t) in [(fc, c), (fd, d)] {
        if v > best.0 {
            best = (v, t);
        }
    }
    Ok((best.0, best.1.rem_euclid(2.0 * PI)))
}

#[derive(Debug, Clone)]
pub struct GrowthProfile {
    pub r_grid: Vec<f64>,
    pub log_m: Vec<f64>,
    pub log_env: Vec<f64>,
    pub y: Vec<f64>,
    pub theta_max: Vec<f64>,
    /// `(lambda_hat, rms residual)` over `window`.
    pub lambda_fit: Option<(f64, f64)>,
    pub window: Range<usize>,
}

impl GrowthProfile {
    /// Indices with `r >= r_max / 10`, widened to at least five points.
    pub fn top_decade(&self) -> Range<usize> {
        let n = self.r_grid.len();
        let cut = self.r_grid[n - 1] / 10.0;
        let start = self.r_grid.iter().position(|&r| r >= cut * (1.0 - 1e-12)).unwrap_or(0);
        start.min(n.saturating_sub(5))..n
    }

    /// CSV with columns `r,log_M,log_env,y,theta_max`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("r,log_M,log_env,y,theta_max\n");
        for i in 0..self.r_grid.len() {
            let row: Vec<String> = [self.r_grid[i], self.log_m[i], self.log_env[i], self.y[i], self.theta_max[i]]
                .iter()
                .map(|v| crate::cli::fmt_float(*v))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Taylor representation accurate on `|z| <= r_max`.
///
/// The order starts from [`taylor::taylor_order_for_radius`] and is doubled
/// until the last retained terms are negligible at `r_max`.
pub fn series_for_radius(gf: &GridFunction, r_max: f64, ctx: &QContext) -> Result<PowerSeriesRep> {
    let mut k = taylor::taylor_order_for_radius(r_max, ctx.q());
    for _ in 0..4 {
        let series = taylor::taylor_coeffs(gf, k, ctx)?;
        if truncation_is_negligible(&series, r_max) {
            return Ok(series);
        }
        k *= 2;
    }
    Err(QError::NonConvergence {
        what: "Taylor order for the radius grid",
        terms: k,
        partial: f64::NAN,
        last_term: f64::NAN,
    })
}

fn truncation_is_negligible(series: &PowerSeriesRep, r: f64) -> bool {
    let ln_r = r.ln();
    let logs: Vec<f64> = series
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| if t.is_negligible() { t.ln_coeff_err } else { t.ln_abs_coeff } + k as f64 * ln_r)
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tail = logs[logs.len() - 3..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // later terms keep falling by a factor q^k r
    let ratio = series.q.ln() * series.order() as f64 + ln_r;
    tail < top - TRUNCATION_MARGIN && ratio < 0.0
}

/// Profile of `D f` over `r_grid` using its Taylor representation.
pub fn growth_profile(gf: &GridFunction, r_grid: &[f64], ctx: &QContext) -> Result<GrowthProfile> {
    growth_profile_with(gf, r_grid, DEFAULT_ANGLES, ctx)
}

pub fn growth_profile_with(gf: &GridFunction, r_grid: &[f64], n_angles: usize, ctx: &QContext) -> Result<GrowthProfile> {
    check_grid(r_grid)?;
    let series = series_for_radius(gf, *r_grid.last().expect("nonempty grid"), ctx)?;
    growth_profile_from_series(&series, r_grid, n_angles, ctx)
}

pub fn growth_profile_from_series(
    series: &PowerSeriesRep,
    r_grid: &[f64],
    n_angles: usize,
    ctx: &QContext,
) -> Result<GrowthProfile> {
    check_grid(r_grid)?;
    let mut log_m = Vec::with_capacity(r_grid.len());
    let mut log_env = Vec::with_capacity(r_grid.len());
    let mut y = Vec::with_capacity(r_grid.len());
    let mut theta_max = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let (lm, theta) = max_modulus_scaled(series, r, n_angles)?;
        let env = qcore::log_qpoch_neg(r, ctx);
        log_m.push(lm);
        log_env.push(env);
        y.push(lm - env);
        theta_max.push(theta);
    }
    let mut profile = GrowthProfile {
        r_grid: r_grid.to_vec(),
        log_m,
        log_env,
        y,
        theta_max,
        lambda_fit: None,
        window: 0..0,
    };
    let window = profile.top_decade();
    if window.len() >= 5 {
        profile.lambda_fit = Some(fit_decay_exponent(&profile, window.clone())?);
        profile.window = window;
    }
    Ok(profile)
}

/// Least-squares slope of `y` against `ln r`; returns `(-slope, rms residual)`.
pub fn fit_decay_exponent(profile: &GrowthProfile, window: Range<usize>) -> Result<(f64, f64)> {
    if window.len() < 5 || window.end > profile.r_grid.len() {
        return Err(QError::InvalidParameter(format!(
            "fit window {window:?} must hold at least 5 grid points"
        )));
    }
    let xs: Vec<f64> = profile.r_grid[window.clone()].iter().map(|r| r.ln()).collect();
    let ys = &profile.y[window];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(QError::InvalidParameter("fit window has no spread in r".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - (my + slope * (x - mx));
            e * e
        })
        .sum();
    Ok((-slope, (rss / n).sqrt()))
}

/// `ln[(-q^mu r;q)_inf / (-r;q)_inf]`, summed pairwise to avoid cancellation.
fn ln_shift_ratio(mu: f64, r: f64, ctx: &QContext) -> f64 {
    let q = ctx.q();
    let shift = (mu * q.ln()).exp_m1(); // q^mu - 1
    let mut sum = 0.0;
    let mut x = r;
    for _ in 0..ctx.max_terms() {
        sum += (x * shift / (1.0 + x)).ln_1p();
        x *= q;
        if x * shift.abs() / (1.0 - q) <= f64::EPSILON * 1e-2 * sum.abs().max(1e-300) || x == 0.0 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone)]
pub struct SandwichReport {
    pub mu: f64,
    /// `(-q^mu r;q)_inf r^mu / (-r;q)_inf` per radius.
    pub ratios: Vec<f64>,
    pub max: f64,
    pub min: f64,
}

pub fn sandwich_zz2(mu: f64, r_grid: &[f64], ctx: &QContext) -> Result<SandwichReport> {
    if !(mu >= 0.0) {
        return Err(QError::Domain(format!("mu must be nonnegative, got {mu}")));
    }
    check_grid(r_grid)?;
    let ratios: Vec<f64> = r_grid
        .iter()
        .map(|&r| (ln_shift_ratio(mu, r, ctx) + mu * r.ln()).exp())
        .collect();
    Ok(SandwichReport {
        mu,
        max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        ratios,
    })
}

/// `(-r;q)_inf exp(-ln^2 r / (2 ln(1/q)) - ln r / 2)`.
pub fn zeng_ratio(r: f64, ctx: &QContext) -> Result<f64> {
    if !(r > 0.0) {
        return Err(QError::Domain(format!("r must be positive, got {r}")));
    }
    let l = r.ln();
    Ok((qcore::log_qpoch_neg(r, ctx) - l * l / (2.0 * ctx.ln_inv_q()) - l / 2.0).exp())
}

/// `ln(sup |f| (-q;q)_inf / (q;q)_inf)`: the explicit bound on `y`.
pub fn crude_bound(gf: &GridFunction, ctx: &QContext) -> Result<f64> {
    let neg_q = qcore::qpoch_inf_re(-ctx.q(), ctx)?;
    Ok((gf.sup_norm() * neg_q / qcore::qq_inf(ctx)?).ln())
}

/// Monotone trend of a sequence over an index range.
#[derive(Debug, Clone)]
pub struct Trend {
    pub range: Range<usize>,
    pub strictly_decreasing: bool,
    /// First minus last value over the range.
    pub fall: f64,
    /// Largest single-step increase (negative when strictly decreasing).
    pub max_step: f64,
}

pub fn trend(values: &[f64], range: Range<usize>) -> Trend {
    let v = &values[range.clone()];
    let max_step = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    Trend {
        strictly_decreasing: max_step < 0.0,
        fall: v[0] - v[v.len() - 1],
        max_step,
        range,
    }
}

/// Trend of `y` over the radii within the top `decades` decades of the grid.
pub fn top_decades_trend(profile: &GrowthProfile, decades: f64) -> Trend {
    let r_max = *profile.r_grid.last().expect("nonempty grid");
    let cut = r_max / 10f64.powf(decades) * (1.0 - 1e-12);
    let start = profile.r_grid.iter().position(|&r| r >= cut).unwrap_or(0);
    trend(&profile.y, start..profile.r_grid.len())
}

#[derive(Debug, Clone)]
pub struct OEstimateReport {
    pub lambda: f64,
    /// `y + lambda ln r` at every grid point.
    pub values: Vec<f64>,
    pub trend: Trend,
}

impl OEstimateReport {
    pub fn passed(&self) -> bool {
        self.trend.strictly_decreasing
    }
}

/// Whether `y + lambda ln r` keeps falling over the top half of the grid.
pub fn o_estimate_from_profile(profile: &GrowthProfile, lambda: f64) -> Result<OEstimateReport> {
    let n = profile.r_grid.len();
    let decades = (profile.r_grid[n - 1] / profile.r_grid[0]).log10();
    if decades < 6.0 - 1e-9 {
        return Err(QError::InvalidParameter(format!(
            "the o-estimate check needs a grid spanning 6 decades, got {decades:.2}"
        )));
    }
    let values: Vec<f64> = profile
        .r_grid
        .iter()
        .zip(&profile.y)
        .map(|(r, y)| y + lambda * r.ln())
        .collect();
    let trend = trend(&values, n / 2..n);
    Ok(OEstimateReport { lambda, values, trend })
}

pub fn o_estimate_check(gf: &GridFunction, lambda: f64, r_grid: &[f64], ctx: &QContext) -> Result<OEstimateReport> {
    let profile = growth_profile(gf, r_grid, ctx)?;
    o_estimate_from_profile(&profile, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{default_nodes, sample, FunctionSpec};

    fn ctx(q: f64) -> QContext {
        QContext::new(q).unwrap()
    }

    fn gf(spec: &str, c: &QContext) -> GridFunction {
        sample(&spec.parse().unwrap(), c, default_nodes(c)).unwrap()
    }

    #[test]
    fn grid_endpoints() {
        let g = default_grid();
        assert_eq!(g.len(), 40);
        assert_eq!(g[39], 1e10);
        assert!((g[0] - 10.0).abs() < 1e-12);
        assert!(geometric_grid(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn max_modulus_examples() {
        let c = ctx(0.5);
        let one = taylor::taylor_coeffs(&gf("monomial:0", &c), 40, &c).unwrap();
        let (lm, _) = max_modulus_scaled(&one, 1e6, 64).unwrap();
        assert!(lm.abs() < 1e-9);
        let id = taylor::taylor_coeffs(&gf("monomial:1", &c), 40, &c).unwrap();
        let (lm, theta) = max_modulus_scaled(&id, 3.0, 64).unwrap();
        assert_eq!(theta, 0.0);
        assert!((lm - 2.0f64.ln()).abs() < 1e-12);
        let h = taylor::taylor_coeffs(&gf("absshift:0.5", &c), 40, &c).unwrap();
        let (lm, _) = max_modulus_scaled(&h, 1e-8, 64).unwrap();
        assert!((lm - h.terms[0].coeff.abs().ln()).abs() < 1e-6);
        assert!(max_modulus_scaled(&h, 1.0, 4).is_err());
    }

    #[test]
    fn scanned_maximum_matches_double_series() {
        let c = ctx(0.5);
        let h = gf("poly:1,-2,0.5,3", &c);
        let s = taylor::taylor_coeffs(&h, 60, &c).unwrap();
        assert_eq!(s.max_angle(), Some(0.0));
        let (a, _) = max_modulus_scaled(&s, 4.0, 256).unwrap();
        let (b, _) = max_modulus_scaled(&DoubleSeries { gf: &h, ctx: &c }, 4.0, 256).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn constant_profile() {
        let c = ctx(0.5);
        let p = growth_profile(&gf("monomial:0", &c), &default_grid(), &c).unwrap();
        for i in 0..p.y.len() {
            assert!((p.y[i] + p.log_env[i]).abs() < 1e-9);
        }
        assert!(trend(&p.y, 0..p.y.len()).strictly_decreasing);
        let a = fit_decay_exponent(&p, 10..15).unwrap().0;
        let b = fit_decay_exponent(&p, 30..35).unwrap().0;
        assert!(b > a);
        assert!(fit_decay_exponent(&p, 0..4).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let c = ctx(0.5);
        let grid = [1.0, 10.0, 1e3, 1e6];
        let s0 = sandwich_zz2(0.0, &grid, &c).unwrap();
        assert!(s0.ratios.iter().all(|r| (r - 1.0).abs() < 1e-15));
        let s1 = sandwich_zz2(1.0, &grid, &c).unwrap();
        for (r, v) in grid.iter().zip(&s1.ratios) {
            assert!((v - r / (1.0 + r)).abs() <= 1e-12 * v);
        }
        let s2 = sandwich_zz2(2.0, &[1e8, 1e12], &c).unwrap();
        assert!((s2.ratios[1] - 2.0).abs() < 1e-9);
        assert!(sandwich_zz2(-1.0, &grid, &c).is_err());
    }

    #[test]
    fn zeng_examples() {
        let c = ctx(0.5);
        let neg_one = qcore::qpoch_inf_re(-1.0, &c).unwrap();
        assert!((zeng_ratio(1.0, &c).unwrap() - neg_one).abs() < 1e-12);
        let vals: Vec<f64> = (3..=12).map(|i| zeng_ratio(10f64.powi(i), &c).unwrap()).collect();
        let hi = vals.iter().copied().fold(0.0, f64::max);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(hi / lo <= 10.0);
        let a = zeng_ratio(1e6, &c).unwrap();
        let b = zeng_ratio(2e6, &c).unwrap();
        assert!((a / b).max(b / a) < 2.0);
    }

    #[test]
    fn o_estimate_examples() {
        let c = ctx(0.5);
        let grid = default_grid();
        let one = o_estimate_check(&gf("monomial:0", &c), 3.0, &grid, &c).unwrap();
        assert!(one.passed());
        let p = growth_profile(&gf("monomial:0", &c), &grid, &c).unwrap();
        let vals: Vec<f64> = grid.iter().zip(&p.y).map(|(r, y)| y + 3.0 * r.ln()).collect();
        assert!(trend(&vals, top_decades_trend(&p, 4.0).range).fall >= 5.0);
        assert!(o_estimate_check(&gf("monomial:2", &c), 10.0, &grid, &c).unwrap().passed());
        assert!(!o_estimate_check(&gf("sharp:2.0", &c), 2.5, &grid, &c).unwrap().passed());
        let short = geometric_grid(10.0, 1e5, 10).unwrap();
        assert!(o_estimate_check(&gf("monomial:0", &c), 3.0, &short, &c).is_err());
    }

    #[test]
    fn crude_bound_holds() {
        let c = ctx(0.5);
        for spec in FunctionSpec::catalog() {
            let h = sample(&spec, &c, default_nodes(&c)).unwrap();
            let p = growth_profile(&h, &default_grid(), &c).unwrap();
            let bound = crude_bound(&h, &c).unwrap();
            assert!(p.y.iter().all(|y| *y <= bound + 1e-6), "{spec}");
        }
    }
}
