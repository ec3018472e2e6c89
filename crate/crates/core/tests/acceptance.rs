//! Acceptance suite: one PASS/FAIL line per criterion, each within its time budget.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qdurr::funcspace::{default_nodes, sample};
use qdurr::{durrmeyer, extremal, growth, qcore, taylor, FunctionSpec, GridFunction, QContext, Result};

const SEED: u64 = 0x5eed_d0e5;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome {
        passed,
        detail: detail.into(),
    })
}

fn ctx(q: f64) -> QContext {
    QContext::new(q).expect("valid q")
}

fn rng(stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(SEED);
    r.set_stream(stream);
    r
}

/// Uniform point of the disc `|z| <= radius`.
fn disc_point(r: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    Complex64::from_polar(radius * r.gen::<f64>().sqrt(), 2.0 * PI * r.gen::<f64>())
}

fn rel_gap(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

fn catalog(c: &QContext) -> Result<Vec<(FunctionSpec, GridFunction)>> {
    FunctionSpec::catalog()
        .into_iter()
        .map(|spec| {
            let gf = sample(&spec, c, default_nodes(c))?;
            Ok((spec, gf))
        })
        .collect()
}

fn euler_identities() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for (i, q) in [0.3, 0.5, 0.9].into_iter().enumerate() {
        let c = ctx(q);
        let mut r = rng(1 + i as u64);
        for _ in 0..300 {
            let z = disc_point(&mut r, 0.9);
            let (p, _) = qcore::qpoch_inf(z, &c)?;
            worst = worst.max(rel_gap(qcore::euler_series(z, &c)?, p));
            worst = worst.max(rel_gap(qcore::euler_recip_series(z, &c)?, 1.0 / p));
        }
    }
    outcome(worst <= 1e-12, format!("max relative error {worst:.2e} over 300 points per q"))
}

fn operator_exactness() -> Result<Outcome> {
    let mut e_one = 0.0f64;
    let mut e_id = 0.0f64;
    let mut e_end = 0.0f64;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        let one = sample(&FunctionSpec::Monomial(0), &c, default_nodes(&c))?;
        let id = sample(&FunctionSpec::Monomial(1), &c, default_nodes(&c))?;
        for i in 0..50 {
            let x = i as f64 / 49.0;
            e_one = e_one.max((durrmeyer::eval_interval(&one, x, &c)? - 1.0).abs());
            e_id = e_id.max((durrmeyer::eval_interval(&id, x, &c)? - (1.0 - q + q * x)).abs());
        }
        for (_, gf) in catalog(&c)? {
            e_end = e_end.max((durrmeyer::eval_interval(&gf, 1.0, &c)? - gf.at_one()).abs());
        }
    }
    outcome(
        e_one <= 1e-12 && e_id <= 1e-10 && e_end <= 1e-12,
        format!("D1 {e_one:.2e}, Dt {e_id:.2e}, endpoint {e_end:.2e}"),
    )
}

fn representation_equivalence() -> Result<Outcome> {
    let c = ctx(0.5);
    let mut r = rng(10);
    let zs: Vec<Complex64> = (0..100).map(|_| disc_point(&mut r, 5.0)).collect();
    let xs: Vec<f64> = (0..50).map(|_| r.gen::<f64>()).collect();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for (spec, gf) in catalog(&c)? {
        let series = growth::series_for_radius(&gf, 5.0, &c)?;
        let mut note = |gap: f64, z: Complex64| {
            if gap > worst {
                worst = gap;
                at = format!("{spec} at {z}");
            }
        };
        for &z in &zs {
            let e = durrmeyer::eval_entire(&gf, z, &c)?;
            let t = taylor::eval_taylor(&series, z)?;
            note(rel_gap(e, t), z);
        }
        for &x in &xs {
            let z = Complex64::new(x, 0.0);
            let i = Complex64::new(durrmeyer::eval_interval(&gf, x, &c)?, 0.0);
            let e = durrmeyer::eval_entire(&gf, z, &c)?;
            let t = taylor::eval_taylor(&series, z)?;
            note(rel_gap(i, e).max(rel_gap(i, t)).max(rel_gap(e, t)), z);
        }
    }
    outcome(worst <= 1e-8, format!("max pairwise relative gap {worst:.2e} ({at})"))
}

fn divdiff_oracles() -> Result<Outcome> {
    let mut cases = 0;
    let mut failures = Vec::new();
    let mut floor_cases = 0;
    let mut floor_scale = 0.0f64;
    let mut exact_pair = 0.0f64;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        for (spec, gf) in catalog(&c)? {
            for o in taylor::divdiff_oracles(&gf, 20, &c)? {
                cases += 1;
                if !o.agrees(1e-6, 1e-10) {
                    failures.push(format!("{spec} q={q} k={}", o.k));
                }
                if o.max_gap() > 1e-6 * o.scale() {
                    floor_cases += 1;
                    floor_scale = floor_scale.max(o.scale());
                }
                let size = o.recursive.abs().max(o.explicit.abs());
                if size > 1e-12 {
                    exact_pair = exact_pair.max((o.recursive - o.explicit).abs() / size);
                }
            }
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "{cases} cases agree within 1e-6 relative or 1e-10 absolute; recursive vs explicit \
             relative {exact_pair:.2e} where |d_k| > 1e-12; {floor_cases} near-zero cases (|d_k| <= {floor_scale:.1e}) \
             meet the absolute floor"
        )
    } else {
        format!("disagreement at {}", failures.join("; "))
    };
    outcome(failures.is_empty(), detail)
}

fn degree_preservation() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        for m in 0..=5u32 {
            let gf = sample(&FunctionSpec::Monomial(m), &c, default_nodes(&c))?;
            let series = taylor::taylor_coeffs(&gf, 20, &c)?;
            for t in &series.terms[6..=20] {
                worst = worst.max(t.coeff.abs());
            }
        }
    }
    outcome(worst <= 1e-9, format!("max |c_k| for 5 < k <= 20: {worst:.2e}"))
}

fn growth_bounds() -> Result<Outcome> {
    let grid = growth::geometric_grid(1e1, 1e10, 40)?;
    let mut bad = Vec::new();
    let mut least_fall = f64::INFINITY;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        for (spec, gf) in catalog(&c)? {
            let p = growth::growth_profile(&gf, &grid, &c)?;
            let bound = growth::crude_bound(&gf, &c)?;
            if p.y.iter().any(|y| *y > bound) {
                bad.push(format!("{spec} q={q} exceeds the crude bound"));
            }
            let t = growth::top_decades_trend(&p, 4.0);
            least_fall = least_fall.min(t.fall);
            if !(t.strictly_decreasing && t.fall >= 2.0) {
                bad.push(format!("{spec} q={q} fall {:.2}", t.fall));
            }
        }
    }
    let detail = if bad.is_empty() {
        format!("all catalog functions; least fall {least_fall:.2}")
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

fn sharpness() -> Result<Outcome> {
    let grid = growth::default_grid();
    let mut bad = Vec::new();
    let mut worst_fit = 0.0f64;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        for lambda in [1.5, 2.0, 3.0] {
            let rep = extremal::lower_bound_check(lambda, &grid, &c)?;
            if !(rep.bound_ok && rep.divdiff_ok) {
                bad.push(format!(
                    "lambda={lambda} q={q}: slack {:.2e}, divided-difference slack {:.2e}",
                    rep.min_slack, rep.min_divdiff_slack
                ));
            }
            let gf = sample(&FunctionSpec::Sharp(lambda), &c, default_nodes(&c))?;
            let p = growth::growth_profile(&gf, &grid, &c)?;
            let fit = p.lambda_fit.map(|(l, _)| l).unwrap_or(f64::NAN);
            let off = (fit - lambda).abs();
            worst_fit = worst_fit.max(off);
            if off.is_nan() || off > 0.25 {
                bad.push(format!("lambda={lambda} q={q}: lambda_hat {fit:.3}"));
            }
        }
    }
    let detail = if bad.is_empty() {
        format!("9 cases hold; worst |lambda_hat - lambda| {worst_fit:.2e}")
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

fn sandwich_and_zeng() -> Result<Outcome> {
    let c = ctx(0.5);
    let r_grid = growth::geometric_grid(1e-1, 1e6, 15)?;
    let mut telescoping = 0.0f64;
    for mu in 0..5 {
        let rep = growth::sandwich_zz2(mu as f64, &r_grid, &c)?;
        for (&r, ratio) in r_grid.iter().zip(&rep.ratios) {
            let exact = r.powi(mu) / qcore::qpoch_finite_re(-r, mu as usize, &c);
            telescoping = telescoping.max((ratio - exact).abs() / exact);
        }
    }
    let zeng: Vec<f64> = growth::geometric_grid(1e3, 1e12, 28)?
        .iter()
        .map(|&r| growth::zeng_ratio(r, &c))
        .collect::<Result<_>>()?;
    let hi = zeng.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = zeng.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        telescoping <= 1e-12 && hi / lo <= 10.0,
        format!("telescoping {telescoping:.2e}, zeng max/min {:.4}", hi / lo),
    )
}

fn smoothness_decay() -> Result<Outcome> {
    let grid = growth::default_grid();
    let mut parts = Vec::new();
    let mut passed = true;
    for q in [0.3, 0.5, 0.8] {
        let c = ctx(q);
        for (spec, lambda) in [(FunctionSpec::Power(0.5), 1.4), (FunctionSpec::Exp, 5.0)] {
            let gf = sample(&spec, &c, default_nodes(&c))?;
            let rep = growth::o_estimate_check(&gf, lambda, &grid, &c)?;
            passed &= rep.passed();
            parts.push(format!("{spec}@{lambda} q={q} fall {:.2}", rep.trend.fall));
        }
    }
    outcome(passed, parts.join(", "))
}

struct Run {
    code: Option<i32>,
    stdout: Vec<u8>,
    stderr: String,
}

fn qdurr(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qdurr"))
        .args(args)
        .output()
        .expect("spawn qdurr");
    Run {
        code: out.status.code(),
        stdout: out.stdout,
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn cli_end_to_end() -> Result<Outcome> {
    let mut bad = Vec::new();
    let examples: [(&[&str], i32); 3] = [
        (&["eval", "--q", "0.5", "--f", "monomial:1", "--x", "0.3"], 0),
        (&["verify", "--suite", "identities", "--q", "0.5"], 0),
        (&["eval", "--q", "1.5", "--f", "monomial:1", "--x", "0.3"], 2),
    ];
    for (args, code) in examples {
        let a = qdurr(args);
        let b = qdurr(args);
        if a.stdout != b.stdout || a.stderr != b.stderr {
            bad.push(format!("{} differs between runs", args.join(" ")));
        }
        if a.code != Some(code) {
            bad.push(format!("{} exited {:?}, expected {code}", args.join(" "), a.code));
        }
    }
    if qdurr(examples[0].0).stdout != b"0.65\n" {
        bad.push("eval example does not print 0.65".into());
    }
    let summary = String::from_utf8_lossy(&qdurr(examples[1].0).stdout).into_owned();
    if !summary.ends_with("identities: 5/5 checks passed\n") {
        bad.push("verify example lacks its pass-count summary".into());
    }
    if !qdurr(examples[2].0).stderr.contains("q must lie in (0,1)") {
        bad.push("bad q is not reported".into());
    }

    let dir = tempfile::tempdir()?;
    let csv = |name: &str| {
        let path = dir.path().join(name);
        let run = qdurr(&[
            "coeffs", "--q", "0.5", "--f", "power:0.5", "--k-max", "12", "--out", path.to_str().unwrap(),
        ]);
        (run.code, std::fs::read(&path).unwrap_or_default())
    };
    let (c1, first) = csv("a.csv");
    let (c2, second) = csv("b.csv");
    if c1 != Some(0) || c2 != Some(0) || first.is_empty() || first != second {
        bad.push("coeffs CSV is not reproducible".into());
    }

    let contract: [(&[&str], i32); 4] = [
        (&["eval", "--q", "0.5", "--f", "frobnicate:1", "--x", "0.3"], 2),
        (&["eval", "--q", "0.5", "--f", "monomial:1"], 2),
        (&["eval", "--q", "0.5", "--f", "exp", "--z", "3,1", "--max-terms", "3"], 1),
        (&["eval", "--q", "0.5", "--f", "monomial:1", "--x", "0.3", "--out", "/nonexistent/dir/out.csv"], 3),
    ];
    for (args, code) in contract {
        let run = qdurr(args);
        if run.code != Some(code) || run.stderr.is_empty() {
            bad.push(format!("{} exited {:?}, expected {code}", args.join(" "), run.code));
        }
    }
    let detail = if bad.is_empty() {
        "three examples byte-identical across runs; exit codes 0, 1, 2, 3 as documented".to_string()
    } else {
        bad.join("; ")
    };
    outcome(bad.is_empty(), detail)
}

type Criterion = fn() -> Result<Outcome>;

fn main() {
    let criteria: [(&str, u64, Criterion); 10] = [
        ("euler identities", 5, euler_identities),
        ("operator exactness", 5, operator_exactness),
        ("representation equivalence", 30, representation_equivalence),
        ("divided-difference oracles", 60, divdiff_oracles),
        ("degree preservation", 10, degree_preservation),
        ("growth bounds", 60, growth_bounds),
        ("sharpness of the growth bound", 120, sharpness),
        ("sandwich and zeng ratio", 10, sandwich_and_zeng),
        ("smoothness-driven decay", 60, smoothness_decay),
        ("cli end to end", 5, cli_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(limit);
        let (passed, detail) = match result {
            Ok(o) => (o.passed && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {detail} [{:.2} s of {limit} s]",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
        );
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
