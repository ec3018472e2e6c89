//! The limit q-Durrmeyer operator: basis functions, the coefficient
//! functionals `A_k(f)`, evaluation on `[0,1]` and the entire continuation.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::arith::{Arith, MpArith};
use crate::error::{QError, Result};
use crate::funcspace::GridFunction;
use crate::qcore::{self, PrecisionTier, QContext, TruncationReport};
use crate::scaled::ScaledValue;

/// Radius above which [`eval_entire_scaled`] switches to log-domain summation.
pub const SCALED_RADIUS: f64 = 1e2;

/// Default number of coefficients in a [`CoefficientSequence`].
pub const DEFAULT_COEFFS: usize = 40;

/// `A_0(f), ..., A_K(f)` with per-coefficient truncation diagnostics.
#[derive(Debug, Clone)]
pub struct CoefficientSequence {
    pub q: f64,
    pub coeffs: Vec<f64>,
    pub reports: Vec<TruncationReport>,
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(QError::Domain(format!("x must lie in [0,1], got {x}")));
    }
    Ok(())
}

/// `p_k(x) = (x;q)_inf x^k / (q;q)_k`.
pub fn basis_p(k: usize, x: f64, ctx: &QContext) -> Result<f64> {
    check_unit_interval(x)?;
    let head = qcore::qpoch_inf_re(x, ctx)?;
    let qq_k = qcore::qpoch_finite_re(ctx.q(), k, ctx);
    Ok(head * x.powi(k as i32) / qq_k)
}

/// `A_k(f) = (q;q)_inf / (q;q)_k * sum_j f(q^j) q^{(k+1)j} / (q;q)_j`.
pub fn coeff_a(k: usize, gf: &GridFunction, ctx: &QContext) -> Result<f64> {
    coeff_a_report(k, gf, ctx).map(|(v, _)| v)
}

pub fn coeff_a_report(k: usize, gf: &GridFunction, ctx: &QContext) -> Result<(f64, TruncationReport)> {
    gf.check_q(ctx)?;
    let q = ctx.q();
    // (q;q)_inf / (q;q)_k = (q^{k+1};q)_inf
    let prefactor = qcore::qpoch_inf_re(q.powi(k as i32 + 1), ctx)?;
    let x = q.powi(k as i32 + 1);
    let sup = gf.sup_norm();
    let mut weight = 1.0; // q^{(k+1)j} / (q;q)_j
    let mut qj1 = q; // q^{j+1}
    let mut sum = 0.0;
    let mut abs_sum = 0.0;
    for j in 0..ctx.max_terms() {
        let term = gf.node(j) * weight;
        sum += term;
        abs_sum += term.abs();
        let ratio = x / (1.0 - qj1);
        weight *= ratio;
        qj1 *= q;
        // the weights keep shrinking by at least `ratio` from here on
        let next_ratio = x / (1.0 - qj1);
        if next_ratio >= 1.0 {
            continue;
        }
        let tail = sup * weight / (1.0 - next_ratio);
        if j >= 1 && (tail <= ctx.eps_term() * abs_sum || tail == 0.0) {
            let value = prefactor * sum;
            let report = TruncationReport::new(
                j + 1,
                prefactor * tail,
                value.abs(),
                ctx.eps_tail(),
            );
            return Ok((value, report));
        }
    }
    Err(QError::NonConvergence {
        what: "coefficient A_k",
        terms: ctx.max_terms(),
        partial: prefactor * sum,
        last_term: weight,
    })
}

/// `A_0 ..= A_K`.
pub fn coeff_sequence(gf: &GridFunction, k_max: usize, ctx: &QContext) -> Result<CoefficientSequence> {
    let mut coeffs = Vec::with_capacity(k_max + 1);
    let mut reports = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let (a, rep) = coeff_a_report(k, gf, ctx)?;
        coeffs.push(a);
        reports.push(rep);
    }
    Ok(CoefficientSequence {
        q: ctx.q(),
        coeffs,
        reports,
    })
}

/// `A_k` through the q-integral `q^{-k}/(1-q) int_0^1 f(t) p_k(q t) d_q t`.
pub fn coeff_a_qintegral(k: usize, gf: &GridFunction, ctx: &QContext) -> Result<f64> {
    gf.check_q(ctx)?;
    let q = ctx.q();
    let scale = q.powi(-(k as i32)) / (1.0 - q);
    let mut failure = None;
    let integral = qcore::jackson_qintegral(
        |j, t| match basis_p(k, q * t, ctx) {
            Ok(p) => gf.node(j) * p,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        1.0,
        ctx,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(scale * integral)
}

/// `(D f)(x)` on `[0,1]`: the basis series for `x < 1` and `f(1)` at `x = 1`.
pub fn eval_interval(gf: &GridFunction, x: f64, ctx: &QContext) -> Result<f64> {
    check_unit_interval(x)?;
    gf.check_q(ctx)?;
    if x == 1.0 {
        return Ok(gf.at_one());
    }
    let q = ctx.q();
    let head = qcore::qpoch_inf_re(x, ctx)?;
    let qq_inf = qcore::qq_inf(ctx)?;
    let sup = gf.sup_norm();
    let mut p = head; // p_k(x)
    let mut qk1 = q;
    let mut sum = 0.0;
    let mut xk1 = x; // x^{k+1}
    for k in 0..ctx.max_terms() {
        sum += coeff_a(k, gf, ctx)? * p;
        p *= x / (1.0 - qk1);
        qk1 *= q;
        // sum_{i>k} p_i(x) <= (qx;q)_inf x^{k+1} / (q;q)_inf <= x^{k+1} / (q;q)_inf
        let tail = sup * xk1 / qq_inf;
        xk1 *= x;
        if tail <= ctx.eps_tail() * sum.abs() || tail <= f64::EPSILON * ctx.eps_tail() * sup {
            return Ok(sum);
        }
    }
    Err(QError::NonConvergence {
        what: "basis series",
        terms: ctx.max_terms(),
        partial: sum,
        last_term: p,
    })
}

/// `tau(z) = (1/(q;q)_inf) sum_n (-1)^n q^{n(n+1)/2} (z;q)_n / (q;q)_n`.
pub fn tau_entire(z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let qq_inf = qcore::qq_inf(ctx)?;
    Ok(tau_series(z, ctx)? / qq_inf)
}

/// `sum_n (-1)^n q^{n(n+1)/2} (z;q)_n / (q;q)_n`, i.e. `(q;q)_inf tau(z)`.
fn tau_series(z: Complex64, ctx: &QContext) -> Result<Complex64> {
    tau_series_terms(z, ctx, None).map(|t| t.sum)
}

/// A truncated sum with the sum of its term magnitudes and its length.
struct Partial {
    sum: Complex64,
    abs_sum: f64,
    terms: usize,
}

/// Stops once terms fall below `eps_term` relative to the partial sums, or
/// below `floor` when one is given.
fn tau_series_terms(z: Complex64, ctx: &QContext, floor: Option<f64>) -> Result<Partial> {
    let q = ctx.q();
    let one = Complex64::new(1.0, 0.0);
    let mut term = one;
    let mut sum = one;
    let mut abs_sum = 1.0;
    let mut peak: f64 = 1.0;
    let mut qn = 1.0; // q^n
    for n in 0..ctx.max_terms() {
        // t_{n+1} = t_n * (-q^{n+1}) (1 - z q^n) / (1 - q^{n+1})
        let qn1 = qn * q;
        term *= -(one - z * qn) * qn1 / (1.0 - qn1);
        sum += term;
        qn = qn1;
        let t = term.norm();
        abs_sum += t;
        peak = peak.max(t);
        let bound_ratio = qn * q * (1.0 + z.norm() * qn) / (1.0 - qn * q);
        let small = match floor {
            Some(f) => t <= f,
            None => t <= ctx.eps_term() * sum.norm().max(peak),
        };
        if bound_ratio < 0.5 && (small || t == 0.0) {
            return Ok(Partial {
                sum,
                abs_sum,
                terms: n + 2,
            });
        }
    }
    Err(QError::NonConvergence {
        what: "tau series",
        terms: ctx.max_terms(),
        partial: sum.norm(),
        last_term: term.norm(),
    })
}

/// The entire continuation of `D f`, as a plain complex number.
pub fn eval_entire(gf: &GridFunction, z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let v = eval_entire_scaled(gf, z, ctx)?;
    v.to_complex().ok_or(QError::Overflow { ln_abs: v.ln_abs() })
}

/// Double series
/// `sum_j f(q^j) q^j/(q;q)_j sum_n (-1)^n q^{n(n+1)/2}/(q;q)_n (z;q)_{n+j}`.
///
/// For `|z| > SCALED_RADIUS` the terms are accumulated relative to
/// `(-|z|;q)_inf`. They cancel down to `|D f(z)|`, so relative accuracy there
/// degrades like `(-|z|;q)_inf / |D f(z)|` times the unit roundoff; growth
/// studies use the Taylor representation instead.
pub fn eval_entire_scaled(gf: &GridFunction, z: Complex64, ctx: &QContext) -> Result<ScaledValue> {
    gf.check_q(ctx)?;
    if z.norm() > SCALED_RADIUS {
        eval_entire_log(gf, z, ctx)
    } else {
        eval_entire_plain(gf, z, ctx).map(ScaledValue::unscaled)
    }
}

/// Outer-sum tail bound from the uniform estimate `|(z;q)_m| <= (-|z|;q)_inf`.
struct OuterTail {
    factor: f64,
    q: f64,
}

impl OuterTail {
    fn new(gf: &GridFunction, ln_env: f64, ctx: &QContext) -> Result<Self> {
        let q = ctx.q();
        let neg_q = qcore::qpoch_inf_re(-q, ctx)?;
        let qq_inf = qcore::qq_inf(ctx)?;
        Ok(Self {
            factor: gf.sup_norm() * neg_q / (qq_inf * (1.0 - q)),
            q,
        })
        .map(|mut t: Self| {
            t.factor *= ln_env.exp();
            t
        })
    }

    /// Bound on `sum_{j' > j}` of the outer terms.
    fn after(&self, j: usize) -> f64 {
        self.factor * self.q.powi(j as i32 + 1)
    }
}

/// Double-precision double series, falling back to multiprecision when the
/// terms cancel by more than the tail tolerance allows.
fn eval_entire_plain(gf: &GridFunction, z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let (sum, abs_sum, _) = entire_plain_terms(gf, z, ctx, None)?;
    let lost = abs_sum / sum.norm().max(f64::MIN_POSITIVE);
    if ctx.precision() == PrecisionTier::Standard || f64::EPSILON * lost <= ctx.eps_tail() {
        return Ok(sum);
    }
    // inner sums are cut against the size of the result rather than their own peak
    let target = ctx.eps_tail() * sum.norm().max(f64::EPSILON * abs_sum);
    let (_, _, counts) = entire_plain_terms(gf, z, ctx, Some(target))?;
    let bits = 64 + (lost.log2() - ctx.eps_tail().log2()).ceil().max(0.0) as usize;
    Ok(entire_mp(gf, z, ctx.q(), &counts, bits))
}

/// The double series in doubles, with the magnitude sum and the inner term
/// count per outer index.
fn entire_plain_terms(
    gf: &GridFunction,
    z: Complex64,
    ctx: &QContext,
    target: Option<f64>,
) -> Result<(Complex64, f64, Vec<usize>)> {
    let q = ctx.q();
    let one = Complex64::new(1.0, 0.0);
    let tail = OuterTail::new(gf, qcore::log_qpoch_neg(z.norm(), ctx), ctx)?;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut counts = Vec::new();
    let mut poch_j = one; // (z;q)_j
    let mut weight = 1.0; // q^j / (q;q)_j
    let mut qj = 1.0;
    for j in 0..ctx.max_terms() {
        let fj = gf.node(j);
        let mut count = 0;
        if fj != 0.0 && poch_j != Complex64::new(0.0, 0.0) {
            // sum_n (-1)^n q^{n(n+1)/2}/(q;q)_n (z q^j;q)_n
            let scale = fj * weight * poch_j;
            let floor = target.map(|t| t / scale.norm());
            let inner = tau_series_terms(z * qj, ctx, floor)?;
            sum += scale * inner.sum;
            abs_sum += scale.norm() * inner.abs_sum;
            count = inner.terms;
        }
        counts.push(count);
        poch_j *= one - z * qj;
        qj *= q;
        weight *= q / (1.0 - qj);
        let bound = tail.after(j);
        if j >= gf.last_node() && (bound <= ctx.eps_tail() * sum.norm() || bound == 0.0) {
            return Ok((sum, abs_sum, counts));
        }
    }
    Err(QError::NonConvergence {
        what: "entire double series",
        terms: ctx.max_terms(),
        partial: sum.norm(),
        last_term: tail.after(ctx.max_terms()),
    })
}

/// `sum_j f(q^j) q^j/(q;q)_j sum_{n < counts[j]} (-1)^n q^{n(n+1)/2}/(q;q)_n (z;q)_{n+j}`
/// at `bits` of precision.
fn entire_mp(gf: &GridFunction, z: Complex64, q: f64, counts: &[usize], bits: usize) -> Complex64 {
    let a = MpArith::new(bits);
    let one = a.one();
    let q_t = a.from_f64(q);
    let (zr, zi) = (a.from_f64(z.re), a.from_f64(z.im));
    let m_max = counts.iter().enumerate().map(|(j, n)| j + n).max().unwrap_or(0);
    let n_max = counts.iter().copied().max().unwrap_or(0);

    // (z;q)_m as (re, im)
    let mut poch = Vec::with_capacity(m_max + 1);
    let (mut pr, mut pi) = (one.clone(), a.zero());
    let mut qi = one.clone();
    for _ in 0..=m_max {
        poch.push((pr.clone(), pi.clone()));
        // (pr + i pi)(1 - qi zr - i qi zi)
        let fr = a.sub(&one, &a.mul(&qi, &zr));
        let fi = a.neg(&a.mul(&qi, &zi));
        let nr = a.sub(&a.mul(&pr, &fr), &a.mul(&pi, &fi));
        let ni = a.add(&a.mul(&pr, &fi), &a.mul(&pi, &fr));
        pr = nr;
        pi = ni;
        qi = a.mul(&qi, &q_t);
    }
    // c_n = (-1)^n q^{n(n+1)/2} / (q;q)_n
    let mut c = Vec::with_capacity(n_max + 1);
    let mut cn = one.clone();
    let mut qn = one.clone();
    for _ in 0..=n_max {
        c.push(cn.clone());
        qn = a.mul(&qn, &q_t);
        cn = a.neg(&a.div(&a.mul(&cn, &qn), &a.sub(&one, &qn)));
    }

    let (mut sr, mut si) = (a.zero(), a.zero());
    let mut weight = one.clone(); // q^j / (q;q)_j
    let mut qj = one.clone();
    for (j, &n_terms) in counts.iter().enumerate() {
        if n_terms > 0 {
            let (mut ir, mut ii) = (a.zero(), a.zero());
            for n in 0..n_terms {
                let (r, i) = &poch[n + j];
                ir = a.add(&ir, &a.mul(&c[n], r));
                ii = a.add(&ii, &a.mul(&c[n], i));
            }
            let s = a.mul(&a.from_f64(gf.node(j)), &weight);
            sr = a.add(&sr, &a.mul(&s, &ir));
            si = a.add(&si, &a.mul(&s, &ii));
        }
        qj = a.mul(&qj, &q_t);
        weight = a.div(&a.mul(&weight, &q_t), &a.sub(&one, &qj));
    }
    Complex64::new(a.to_f64(&sr), a.to_f64(&si))
}

fn eval_entire_log(gf: &GridFunction, z: Complex64, ctx: &QContext) -> Result<ScaledValue> {
    let q = ctx.q();
    let ln_q = q.ln();
    let r = z.norm();
    let ln_env = qcore::log_qpoch_neg(r, ctx);
    let tail = OuterTail::new(gf, 0.0, ctx)?;
    let qq_inf_ln = qcore::qq_inf(ctx)?.ln();

    // ln|(z;q)_m| and arg (z;q)_m, extended on demand
    let mut poch_ln = vec![0.0f64];
    let mut poch_arg = vec![0.0f64];
    let extend = |m: usize, poch_ln: &mut Vec<f64>, poch_arg: &mut Vec<f64>| {
        while poch_ln.len() <= m {
            let i = poch_ln.len() - 1;
            let factor = Complex64::new(1.0, 0.0) - z * q.powi(i as i32);
            poch_ln.push(poch_ln[i] + factor.norm().ln());
            poch_arg.push(poch_arg[i] + factor.arg());
        }
    };

    // terms are accumulated relative to (-r;q)_inf, which bounds each |(z;q)_m|
    let mut sum = Complex64::new(0.0, 0.0);
    let mut peak: f64 = 0.0;
    let mut ln_qq_j = 0.0; // ln (q;q)_j
    for j in 0..ctx.max_terms() {
        let fj = gf.node(j);
        if fj != 0.0 {
            let ln_a = fj.abs().ln() + j as f64 * ln_q - ln_qq_j - ln_env;
            let arg_a = if fj < 0.0 { PI } else { 0.0 };
            let mut ln_qq_n = 0.0;
            for n in 0..ctx.max_terms() {
                extend(n + j, &mut poch_ln, &mut poch_arg);
                let ln_c = (n * (n + 1) / 2) as f64 * ln_q - ln_qq_n;
                let ln_t = ln_a + ln_c + poch_ln[n + j];
                let arg_t = arg_a + if n % 2 == 1 { PI } else { 0.0 } + poch_arg[n + j];
                let t = Complex64::from_polar(ln_t.exp(), arg_t);
                sum += t;
                peak = peak.max(t.norm());
                ln_qq_n += (-(q.powi(n as i32 + 1))).ln_1p();
                // remaining n-terms are below |a_j| q^{(n+1)(n+2)/2}/(q;q)_inf
                let rest = (ln_a + ((n + 1) * (n + 2) / 2) as f64 * ln_q - qq_inf_ln).exp();
                if rest <= ctx.eps_term() * peak || rest == 0.0 {
                    break;
                }
            }
        }
        ln_qq_j += (-(q.powi(j as i32 + 1))).ln_1p();
        if j >= gf.last_node() {
            let bound = tail.after(j);
            if bound <= ctx.eps_tail() * sum.norm() || bound <= f64::EPSILON * ctx.eps_tail() * peak {
                return Ok(ScaledValue {
                    ln_scale: ln_env,
                    scaled: sum,
                });
            }
        }
    }
    Err(QError::NonConvergence {
        what: "entire double series (scaled)",
        terms: ctx.max_terms(),
        partial: sum.norm(),
        last_term: tail.after(ctx.max_terms()),
    })
}
