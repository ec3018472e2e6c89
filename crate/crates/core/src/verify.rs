//! Named verification suites run by `qdurr verify`.
//!
//! Sample points come from a golden-angle spiral, so every run checks the same
//! points in the same order.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{QError, Result};
use crate::funcspace::{default_nodes, sample, FunctionSpec, GridFunction};
use crate::qcore::{self, QContext};
use crate::{durrmeyer, extremal, growth, taylor};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: Suite,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Identities,
    Operator,
    Taylor,
    Growth,
    Extremal,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Suite::Identities,
        Suite::Operator,
        Suite::Taylor,
        Suite::Growth,
        Suite::Extremal,
    ];
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Identities => "identities",
            Suite::Operator => "operator",
            Suite::Taylor => "taylor",
            Suite::Growth => "growth",
            Suite::Extremal => "extremal",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identities" => Suite::Identities,
            "operator" => Suite::Operator,
            "taylor" => Suite::Taylor,
            "growth" => Suite::Growth,
            "extremal" => Suite::Extremal,
            "all" => Suite::All,
            _ => {
                return Err(QError::InvalidParameter(format!(
                    "unknown suite {s:?}; expected identities, operator, taylor, growth, extremal or all"
                )))
            }
        })
    }
}

/// `n` points filling the disc `|z| <= radius` along a golden-angle spiral.
pub fn spiral(n: usize, radius: f64) -> Vec<Complex64> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| Complex64::from_polar(radius * ((i as f64 + 0.5) / n as f64).sqrt(), golden * i as f64))
        .collect()
}

/// `n` equispaced points of `[0,1]`, both ends included.
pub fn unit_points(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn rel_gap(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn check(suite: Suite, name: impl Into<String>, passed: bool, detail: String) -> Check {
    Check {
        suite,
        name: name.into(),
        passed,
        detail,
    }
}

/// Check whose measured error must stay below `tol`.
fn bounded(suite: Suite, name: &str, err: f64, tol: f64) -> Check {
    check(suite, name, err <= tol, format!("max error {err:.3e} (tolerance {tol:.0e})"))
}

fn catalog_grids(ctx: &QContext) -> Result<Vec<(FunctionSpec, GridFunction)>> {
    FunctionSpec::catalog()
        .into_iter()
        .map(|spec| {
            let gf = sample(&spec, ctx, default_nodes(ctx))?;
            Ok((spec, gf))
        })
        .collect()
}

/// Runs `suite` at the `q` of `ctx`.
pub fn run_suite(suite: Suite, ctx: &QContext) -> Result<Vec<Check>> {
    match suite {
        Suite::Identities => identities(ctx),
        Suite::Operator => operator(ctx),
        Suite::Taylor => taylor_suite(ctx),
        Suite::Growth => growth_suite(ctx),
        Suite::Extremal => extremal_suite(ctx),
        Suite::All => {
            let mut all = Vec::new();
            for s in Suite::EACH {
                all.extend(run_suite(s, ctx)?);
            }
            Ok(all)
        }
    }
}

fn identities(ctx: &QContext) -> Result<Vec<Check>> {
    let s = Suite::Identities;
    let points = spiral(100, 0.9);
    let mut product = 0.0f64;
    let mut recip = 0.0f64;
    for &z in &points {
        let (p, _) = qcore::qpoch_inf(z, ctx)?;
        product = product.max(rel_gap(qcore::euler_series(z, ctx)?, p));
        recip = recip.max((qcore::euler_recip_series(z, ctx)? * p - 1.0).norm());
    }
    let mut functional = 0.0f64;
    for &a in &spiral(100, 2.0) {
        let (lhs, _) = qcore::qpoch_inf(a, ctx)?;
        let (rhs, _) = qcore::qpoch_inf(a * ctx.q(), ctx)?;
        functional = functional.max(rel_gap(lhs, (1.0 - a) * rhs));
    }
    let q = ctx.q();
    let mut jackson = 0.0f64;
    for m in 0..6 {
        let v = qcore::jackson_qintegral(|_, t| t.powi(m), 1.0, ctx)?;
        let exact = (1.0 - q) / (1.0 - q.powi(m + 1));
        jackson = jackson.max((v - exact).abs() / exact);
    }
    let table = qcore::qq_table(8, ctx);
    let mut finite = 0.0f64;
    for (n, t) in table.iter().enumerate() {
        finite = finite.max((t - qcore::qpoch_finite_re(q, n, ctx)).abs() / t);
    }
    Ok(vec![
        bounded(s, "euler product = series", product, 1e-12),
        bounded(s, "euler reciprocal series", recip, 1e-12),
        bounded(s, "functional equation", functional, 1e-13),
        bounded(s, "jackson integral of monomials", jackson, 1e-13),
        bounded(s, "finite pochhammer table", finite, 1e-14),
    ])
}

fn operator(ctx: &QContext) -> Result<Vec<Check>> {
    let s = Suite::Operator;
    let q = ctx.q();
    let nodes = default_nodes(ctx);
    let one = sample(&FunctionSpec::Monomial(0), ctx, nodes)?;
    let id = sample(&FunctionSpec::Monomial(1), ctx, nodes)?;
    let mut e_one = 0.0f64;
    let mut e_id = 0.0f64;
    for x in unit_points(50) {
        e_one = e_one.max((durrmeyer::eval_interval(&one, x, ctx)? - 1.0).abs());
        e_id = e_id.max((durrmeyer::eval_interval(&id, x, ctx)? - (1.0 - q + q * x)).abs());
    }
    let grids = catalog_grids(ctx)?;
    let mut endpoint = 0.0f64;
    let mut qint = 0.0f64;
    for (_, gf) in &grids {
        endpoint = endpoint.max((durrmeyer::eval_interval(gf, 1.0, ctx)? - gf.at_one()).abs());
        for k in 0..5 {
            let a = durrmeyer::coeff_a(k, gf, ctx)?;
            let b = durrmeyer::coeff_a_qintegral(k, gf, ctx)?;
            qint = qint.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    let f = &grids[7].1;
    let h = &grids[8].1;
    let (a, b) = (0.7, -1.3);
    let comb = GridFunction::linear_combination(a, f, b, h)?;
    let mut linear = 0.0f64;
    for &z in &spiral(20, 5.0) {
        let lhs = durrmeyer::eval_entire(&comb, z, ctx)?;
        let rhs = a * durrmeyer::eval_entire(f, z, ctx)? + b * durrmeyer::eval_entire(h, z, ctx)?;
        linear = linear.max((lhs - rhs).norm() / lhs.norm().max(1.0));
    }
    Ok(vec![
        bounded(s, "D1 = 1", e_one, 1e-12),
        bounded(s, "Dt = (1-q) + q t", e_id, 1e-10),
        bounded(s, "endpoint value f(1)", endpoint, 1e-12),
        bounded(s, "coefficients by q-integral", qint, 1e-10),
        bounded(s, "linearity of the continuation", linear, 1e-11),
    ])
}

fn taylor_suite(ctx: &QContext) -> Result<Vec<Check>> {
    let s = Suite::Taylor;
    let grids = catalog_grids(ctx)?;
    let mut oracle_fail = Vec::new();
    let mut worst = 0.0f64;
    for (spec, gf) in &grids {
        for o in taylor::divdiff_oracles(gf, 20, ctx)? {
            if !o.agrees(1e-6, 1e-10) {
                oracle_fail.push(format!("{spec} k={}", o.k));
            }
            if o.scale() > 1e-4 {
                worst = worst.max(o.max_gap() / o.scale());
            }
        }
    }
    let mut degree = 0.0f64;
    for m in 0..=5 {
        let gf = sample(&FunctionSpec::Monomial(m), ctx, default_nodes(ctx))?;
        let series = taylor::taylor_coeffs(&gf, 20, ctx)?;
        for t in &series.terms[m as usize + 1..] {
            degree = degree.max(t.coeff.abs());
        }
    }
    let mut equiv = 0.0f64;
    for (_, gf) in &grids {
        let series = growth::series_for_radius(gf, 5.0, ctx)?;
        for &z in &spiral(25, 5.0) {
            equiv = equiv.max(rel_gap(taylor::eval_taylor(&series, z)?, durrmeyer::eval_entire(gf, z, ctx)?));
        }
    }
    Ok(vec![
        check(
            s,
            "divided-difference oracles agree",
            oracle_fail.is_empty(),
            if oracle_fail.is_empty() {
                format!("worst relative gap {worst:.3e} where |d_k| > 1e-4")
            } else {
                format!("disagreement at {}", oracle_fail.join("; "))
            },
        ),
        bounded(s, "monomials stay polynomials", degree, 1e-9),
        bounded(s, "taylor = double series", equiv, 1e-8),
    ])
}

fn growth_suite(ctx: &QContext) -> Result<Vec<Check>> {
    let s = Suite::Growth;
    let grid = growth::default_grid();
    let mut out = Vec::new();
    let mut over = Vec::new();
    let mut flat = Vec::new();
    for (spec, gf) in catalog_grids(ctx)? {
        let p = growth::growth_profile(&gf, &grid, ctx)?;
        let bound = growth::crude_bound(&gf, ctx)?;
        if p.y.iter().any(|y| *y > bound + 1e-6) {
            over.push(spec.to_string());
        }
        let t = growth::top_decades_trend(&p, 4.0);
        if !(t.strictly_decreasing && t.fall >= 2.0) {
            flat.push(format!("{spec} (fall {:.2})", t.fall));
        }
    }
    out.push(check(s, "crude bound on y", over.is_empty(), list_or_ok(&over)));
    out.push(check(s, "y falls over the top 4 decades", flat.is_empty(), list_or_ok(&flat)));

    let mut telescoping = 0.0f64;
    let r_grid = growth::geometric_grid(1e-1, 1e6, 15)?;
    for mu in 0..4 {
        let rep = growth::sandwich_zz2(mu as f64, &r_grid, ctx)?;
        for (&r, ratio) in r_grid.iter().zip(&rep.ratios) {
            let exact = r.powi(mu) / qcore::qpoch_finite_re(-r, mu as usize, ctx);
            telescoping = telescoping.max((ratio - exact).abs() / exact);
        }
    }
    out.push(bounded(s, "integer-mu telescoping", telescoping, 1e-12));

    let zeng: Vec<f64> = growth::geometric_grid(1e3, 1e12, 28)?
        .iter()
        .map(|&r| growth::zeng_ratio(r, ctx))
        .collect::<Result<_>>()?;
    let hi = zeng.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = zeng.iter().copied().fold(f64::INFINITY, f64::min);
    out.push(check(
        s,
        "zeng ratio bounded",
        hi / lo <= 10.0,
        format!("max/min {:.4} over r in [1e3, 1e12]", hi / lo),
    ));

    for (spec, lambda) in [(FunctionSpec::Power(0.5), 1.4), (FunctionSpec::Exp, 5.0)] {
        let gf = sample(&spec, ctx, default_nodes(ctx))?;
        let rep = growth::o_estimate_check(&gf, lambda, &grid, ctx)?;
        out.push(check(
            s,
            format!("o-estimate {spec} at lambda {lambda}"),
            rep.passed(),
            format!("fall {:.3}, largest step {:.3e}", rep.trend.fall, rep.trend.max_step),
        ));
    }
    Ok(out)
}

fn list_or_ok(items: &[String]) -> String {
    if items.is_empty() {
        "all catalog functions".into()
    } else {
        format!("fails for {}", items.join(", "))
    }
}

fn extremal_suite(ctx: &QContext) -> Result<Vec<Check>> {
    let s = Suite::Extremal;
    let grid = growth::default_grid();
    let mut out = Vec::new();
    for lambda in [1.5, 2.0, 3.0] {
        let rep = extremal::lower_bound_check(lambda, &grid, ctx)?;
        out.push(check(
            s,
            format!("lower bound at lambda {lambda}"),
            rep.holds(),
            format!(
                "min slack {:.3e}, min divided-difference slack {:.3e}, C estimate {:.4}",
                rep.min_slack, rep.min_divdiff_slack, rep.c_estimate
            ),
        ));
        let gf = sample(&FunctionSpec::Sharp(lambda), ctx, default_nodes(ctx))?;
        let p = growth::growth_profile(&gf, &grid, ctx)?;
        let fit = p.lambda_fit.map(|(l, _)| l).unwrap_or(f64::NAN);
        out.push(check(
            s,
            format!("fitted exponent at lambda {lambda}"),
            (fit - lambda).abs() <= 0.25,
            format!("lambda_hat {fit:.4}"),
        ));
    }
    Ok(out)
}
