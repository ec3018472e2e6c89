//! The extremal family: node data `f(q^j) = (q;q)_j s_j` with
//! `s_j = sum_{k<=j} alpha^k / (q;q)_{j-k}` and `alpha = q^{lambda-1}`, whose
//! image grows exactly like `r^{-lambda} (-r;q)_inf`.

use num_complex::Complex64;

use crate::error::{QError, Result};
use crate::funcspace::{FunctionSpec, GridFunction};
use crate::growth;
use crate::qcore::{self, QContext};
use crate::taylor;

/// Orders at which the divided-difference lower bound is checked.
pub const DIVDIFF_CHECK_ORDERS: usize = 25;

fn alpha(lambda: f64, ctx: &QContext) -> Result<f64> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(QError::Domain(format!("lambda must exceed 1, got {lambda}")));
    }
    Ok(((lambda - 1.0) * ctx.q().ln()).exp())
}

/// `s_j`, summed directly.
pub fn s_seq(j: usize, lambda: f64, ctx: &QContext) -> Result<f64> {
    let a = alpha(lambda, ctx)?;
    let table = qcore::qq_table(j, ctx);
    let mut ak = 1.0;
    let mut sum = 0.0;
    for k in 0..=j {
        sum += ak / table[j - k];
        ak *= a;
    }
    Ok(sum)
}

/// Node count after which `|f(q^j) - f(0)|` is below `eps_tail` relative.
pub fn recommended_nodes(lambda: f64, ctx: &QContext) -> Result<usize> {
    let a = alpha(lambda, ctx)?;
    let slow = a.max(ctx.q());
    Ok((ctx.eps_tail().ln() / slow.ln()).ceil() as usize + 1)
}

#[derive(Debug, Clone)]
pub struct ExtremalFamily {
    pub lambda: f64,
    pub alpha: f64,
    pub s: Vec<f64>,
    pub gf: GridFunction,
}

impl ExtremalFamily {
    pub fn into_grid(self) -> GridFunction {
        self.gf
    }

    /// `1 / ((1 - alpha) (q;q)_inf)`, the limit of `s_j`.
    pub fn s_limit(&self, ctx: &QContext) -> Result<f64> {
        Ok(1.0 / ((1.0 - self.alpha) * qcore::qq_inf(ctx)?))
    }
}

/// Family on `J + 1` nodes, built from `s_j = alpha s_{j-1} + 1/(q;q)_j`.
pub fn make_extremal(lambda: f64, ctx: &QContext, nodes: usize) -> Result<ExtremalFamily> {
    let a = alpha(lambda, ctx)?;
    if nodes < 1 {
        return Err(QError::InvalidParameter("node count J must be at least 1".into()));
    }
    let table = qcore::qq_table(nodes, ctx);
    let mut s = Vec::with_capacity(nodes + 1);
    let mut values = Vec::with_capacity(nodes + 1);
    // v_j = (q;q)_j s_j satisfies v_j = 1 + alpha (1 - q^j) v_{j-1}
    let mut v: f64 = 1.0;
    let mut qj = 1.0;
    for j in 0..=nodes {
        if j > 0 {
            qj *= ctx.q();
            v = 1.0 + a * (1.0 - qj) * v;
        }
        values.push(v);
        s.push(v / table[j]);
    }
    let spec = FunctionSpec::Sharp(lambda);
    let gf = GridFunction::new(ctx.q(), values, 1.0 / (1.0 - a), spec.to_string())?.with_source(spec);
    Ok(ExtremalFamily {
        lambda,
        alpha: a,
        s,
        gf,
    })
}

/// `g(z) = 1 / (1 - alpha q z)`.
pub fn g_closed_form(lambda: f64, z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let beta = alpha(lambda, ctx)? * ctx.q();
    let den = 1.0 - beta * z;
    if den.norm() <= f64::EPSILON {
        return Err(QError::Domain(format!("z = {z} is the pole of g at {}", 1.0 / beta)));
    }
    Ok(1.0 / den)
}

/// `g[1;q;...;q^k] = (alpha q)^k / (alpha q;q)_{k+1}`, exact for this family.
pub fn divdiff_closed_form(lambda: f64, k: usize, ctx: &QContext) -> Result<f64> {
    let beta = alpha(lambda, ctx)? * ctx.q();
    Ok(beta.powi(k as i32) / qcore::qpoch_finite_re(beta, k + 1, ctx))
}

/// Result of [`lower_bound_check`].
#[derive(Debug, Clone)]
pub struct LowerBoundReport {
    pub lambda: f64,
    pub alpha: f64,
    /// `min_k (g[1;...;q^k] - (alpha q)^k)` for `k <= 25`.
    pub min_divdiff_slack: f64,
    pub divdiff_ok: bool,
    pub r_grid: Vec<f64>,
    pub y: Vec<f64>,
    /// `y - [ln (q;q)_inf + ln(-alpha q r;q)_inf - ln(-r;q)_inf]` per radius.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub bound_ok: bool,
    /// `min_r (y + lambda ln r)`: the empirical constant of the lower bound.
    pub c_estimate: f64,
    /// `ln (q;q)_inf + min_r ln[(-q^lambda r;q)_inf r^lambda / (-r;q)_inf]`.
    pub floor: f64,
    pub bounded_below: bool,
}

impl LowerBoundReport {
    pub fn holds(&self) -> bool {
        self.divdiff_ok && self.bound_ok && self.bounded_below
    }
}

/// Slack tolerance of the log-form inequality.
pub const SLACK_TOL: f64 = 1e-9;

/// Divided-difference tolerance.
pub const DIVDIFF_TOL: f64 = 1e-9;

/// Checks the lower-bound chain for the extremal family on `r_grid`.
pub fn lower_bound_check(lambda: f64, r_grid: &[f64], ctx: &QContext) -> Result<LowerBoundReport> {
    let a = alpha(lambda, ctx)?;
    let beta = a * ctx.q();
    let nodes = recommended_nodes(lambda, ctx)?.max(crate::funcspace::default_nodes(ctx));
    let fam = make_extremal(lambda, ctx, nodes)?;
    let r_max = r_grid.iter().copied().fold(1.0, f64::max);
    let k_max = taylor::taylor_order_for_radius(r_max, ctx.q()).max(DIVDIFF_CHECK_ORDERS);
    let series = taylor::taylor_coeffs(&fam.gf, k_max, ctx)?;

    let min_divdiff_slack = series.terms[..=DIVDIFF_CHECK_ORDERS]
        .iter()
        .enumerate()
        .map(|(k, t)| t.divdiff - beta.powi(k as i32))
        .fold(f64::INFINITY, f64::min);

    let profile = growth::growth_profile_from_series(&series, r_grid, growth::DEFAULT_ANGLES, ctx)?;
    let ln_qq = qcore::qq_inf(ctx)?.ln();
    let slack: Vec<f64> = r_grid
        .iter()
        .zip(&profile.y)
        .map(|(&r, &y)| y - (ln_qq + qcore::log_qpoch_neg(beta * r, ctx) - qcore::log_qpoch_neg(r, ctx)))
        .collect();
    let min_slack = slack.iter().copied().fold(f64::INFINITY, f64::min);
    let c_estimate = r_grid
        .iter()
        .zip(&profile.y)
        .map(|(&r, &y)| y + lambda * r.ln())
        .fold(f64::INFINITY, f64::min);
    let sandwich = growth::sandwich_zz2(lambda, r_grid, ctx)?;
    let floor = ln_qq + sandwich.min.ln();
    Ok(LowerBoundReport {
        lambda,
        alpha: a,
        min_divdiff_slack,
        divdiff_ok: min_divdiff_slack >= -DIVDIFF_TOL,
        r_grid: r_grid.to_vec(),
        y: profile.y,
        slack,
        min_slack,
        bound_ok: min_slack >= -SLACK_TOL,
        c_estimate,
        floor,
        bounded_below: c_estimate >= floor - SLACK_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: f64) -> QContext {
        QContext::new(q).unwrap()
    }

    #[test]
    fn s_examples() {
        let c = ctx(0.5);
        assert_eq!(s_seq(0, 2.0, &c).unwrap(), 1.0);
        assert!((s_seq(1, 2.0, &c).unwrap() - 2.5).abs() < 1e-15);
        let lim = 2.0 / qcore::qq_inf(&c).unwrap();
        assert!((s_seq(60, 2.0, &c).unwrap() - lim).abs() < 1e-12);
        assert!((lim - 6.9255).abs() < 1e-4);
        assert!(s_seq(3, 1.0, &c).is_err());
    }

    #[test]
    fn family_examples() {
        let c = ctx(0.5);
        let fam = make_extremal(2.0, &c, 50).unwrap();
        assert_eq!(fam.gf.at_one(), 1.0);
        assert_eq!(fam.gf.limit0(), 2.0);
        for j in 0..=50 {
            assert!((fam.s[j] - s_seq(j, 2.0, &c).unwrap()).abs() <= 1e-13 * fam.s[j]);
        }
        let bound = fam.s_limit(&c).unwrap();
        assert!(fam.s.windows(2).all(|w| w[1] > w[0]) && fam.s.iter().all(|s| *s < bound));
    }

    #[test]
    fn slow_family_converges_geometrically() {
        let c = ctx(0.5);
        let fam = make_extremal(1.5, &c, 50).unwrap();
        let v = fam.gf.values();
        let l = fam.gf.limit0();
        assert!(v.windows(2).all(|w| (w[1] - l).abs() < (w[0] - l).abs()));
        // |v_j - f(0)| shrinks like alpha^j = 2^{-j/2}
        let gap = (v[50] - l).abs();
        assert!(gap < 2e-7 && gap > 1e-8, "{gap}");
        let more = make_extremal(1.5, &c, recommended_nodes(1.5, &c).unwrap()).unwrap();
        assert!((more.gf.values().last().unwrap() - l).abs() <= 1e-14 * l);
    }

    #[test]
    fn closed_form_examples() {
        let c = ctx(0.5);
        assert_eq!(g_closed_form(2.0, Complex64::new(0.0, 0.0), &c).unwrap(), Complex64::new(1.0, 0.0));
        assert!(g_closed_form(2.0, Complex64::new(4.0, 0.0), &c).is_err());
        let fam = make_extremal(2.0, &c, 60).unwrap();
        for k in 0..=20 {
            let z = Complex64::new(0.5f64.powi(k), 0.0);
            let lhs = taylor::g_eval(&fam.gf, z, &c).unwrap();
            let rhs = g_closed_form(2.0, z, &c).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10);
        }
        for z in [Complex64::new(1.9, 0.0), Complex64::new(-1.2, 1.4), Complex64::new(0.0, -1.85)] {
            let lhs = taylor::g_eval(&fam.gf, z, &c).unwrap();
            assert!((lhs - g_closed_form(2.0, z, &c).unwrap()).norm() <= 1e-10);
        }
        assert!((divdiff_closed_form(2.0, 0, &c).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lower_bound_holds_at_the_reference_point() {
        let c = ctx(0.5);
        let report = lower_bound_check(2.0, &[1e2, 1e4, 1e6, 1e8, 1e10], &c).unwrap();
        assert!(report.holds(), "{report:?}");
        assert!(report.slack[1] > 0.0);
    }
}
