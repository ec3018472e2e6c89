//! q-calculus primitives: Pochhammer symbols, the two Euler expansions and
//! the Jackson q-integral, all under one truncation policy carried by
//! [`QContext`].
//!
//! Infinite products stop at the first factor with `|a| q^j < eps_term (1 - q)`;
//! the neglected log-factors are bounded by `|a| q^j / (1 - q)`. Series stop
//! once the current term is below `eps_term` relative to the partial sum while
//! the term ratio is already below one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::{Arith, MpArith};
use crate::error::{QError, Result};

/// Largest admissible `q`; term counts grow like `1 / (1 - q)`.
pub const Q_MAX: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionTier {
    /// IEEE double, about 16 significant digits.
    Standard,
    /// Arbitrary precision with a working precision chosen from the
    /// conditioning of the computation (never below 32 digits).
    #[default]
    Extended,
}

impl std::str::FromStr for PrecisionTier {
    type Err = QError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "extended" => Ok(Self::Extended),
            other => Err(QError::InvalidParameter(format!(
                "precision must be standard or extended, got {other:?}"
            ))),
        }
    }
}

/// The parameter `q` plus the truncation policy shared by every series and product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QContext {
    q: f64,
    eps_term: f64,
    eps_tail: f64,
    max_terms: usize,
    precision: PrecisionTier,
}

impl QContext {
    pub const DEFAULT_EPS_TERM: f64 = 1e-17;
    pub const DEFAULT_EPS_TAIL: f64 = 1e-15;
    pub const DEFAULT_MAX_TERMS: usize = 200_000;

    pub fn new(q: f64) -> Result<Self> {
        Self::with_policy(
            q,
            Self::DEFAULT_EPS_TERM,
            Self::DEFAULT_EPS_TAIL,
            Self::DEFAULT_MAX_TERMS,
            PrecisionTier::Extended,
        )
    }

    pub fn with_policy(
        q: f64,
        eps_term: f64,
        eps_tail: f64,
        max_terms: usize,
        precision: PrecisionTier,
    ) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(QError::InvalidParameter("q must lie in (0,1)".into()));
        }
        if q > Q_MAX {
            return Err(QError::InvalidParameter(format!(
                "q = {q} exceeds the supported maximum {Q_MAX}"
            )));
        }
        if !(eps_term > 0.0 && eps_term.is_finite()) {
            return Err(QError::InvalidParameter("eps_term must be positive".into()));
        }
        if !(eps_tail > 0.0 && eps_tail.is_finite()) {
            return Err(QError::InvalidParameter("eps_tail must be positive".into()));
        }
        if max_terms == 0 {
            return Err(QError::InvalidParameter("max_terms must be at least 1".into()));
        }
        Ok(Self {
            q,
            eps_term,
            eps_tail,
            max_terms,
            precision,
        })
    }

    pub fn with_precision(mut self, precision: PrecisionTier) -> Self {
        self.precision = precision;
        self
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn eps_term(&self) -> f64 {
        self.eps_term
    }

    pub fn eps_tail(&self) -> f64 {
        self.eps_tail
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }

    pub fn precision(&self) -> PrecisionTier {
        self.precision
    }

    /// `ln(1/q)`, positive.
    pub fn ln_inv_q(&self) -> f64 {
        -self.q.ln()
    }
}

/// Diagnostics attached to a truncated series or product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationReport {
    pub terms_used: usize,
    /// Absolute bound on the neglected part.
    pub tail_bound: f64,
    pub converged: bool,
}

impl TruncationReport {
    pub(crate) fn new(terms_used: usize, tail_bound: f64, value_abs: f64, eps_tail: f64) -> Self {
        let converged = if value_abs == 0.0 {
            tail_bound <= eps_tail
        } else {
            tail_bound <= eps_tail * value_abs
        };
        Self {
            terms_used,
            tail_bound,
            converged,
        }
    }
}

/// `(a;q)_n = prod_{j<n} (1 - a q^j)`; the empty product is 1.
pub fn qpoch_finite(a: Complex64, n: usize, ctx: &QContext) -> Complex64 {
    let mut prod = Complex64::new(1.0, 0.0);
    let mut qj = 1.0;
    for _ in 0..n {
        prod *= Complex64::new(1.0, 0.0) - a * qj;
        qj *= ctx.q;
    }
    prod
}

/// Real-argument version of [`qpoch_finite`].
pub fn qpoch_finite_re(a: f64, n: usize, ctx: &QContext) -> f64 {
    let mut prod = 1.0;
    let mut qj = 1.0;
    for _ in 0..n {
        prod *= 1.0 - a * qj;
        qj *= ctx.q;
    }
    prod
}

/// `(a;q)_inf` with its truncation report.
pub fn qpoch_inf(a: Complex64, ctx: &QContext) -> Result<(Complex64, TruncationReport)> {
    let abs_a = a.norm();
    let q = ctx.q;
    let cut = ctx.eps_term * (1.0 - q);
    let mut prod = Complex64::new(1.0, 0.0);
    let mut aqj = abs_a;
    let mut qj = 1.0;
    let mut j = 0;
    while aqj >= cut {
        if j >= ctx.max_terms {
            return Err(QError::NonConvergence {
                what: "q-Pochhammer product",
                terms: j,
                partial: prod.norm(),
                last_term: aqj,
            });
        }
        prod *= Complex64::new(1.0, 0.0) - a * qj;
        qj *= q;
        aqj = abs_a * qj;
        j += 1;
    }
    let log_tail = aqj / ((1.0 - q) * (1.0 - aqj));
    let value_abs = prod.norm();
    let report = TruncationReport::new(j, value_abs * log_tail.exp_m1(), value_abs, ctx.eps_tail);
    Ok((prod, report))
}

/// Real-argument version of [`qpoch_inf`]; returns only the value.
pub fn qpoch_inf_re(a: f64, ctx: &QContext) -> Result<f64> {
    let q = ctx.q;
    let cut = ctx.eps_term * (1.0 - q);
    let mut prod = 1.0;
    let mut qj = 1.0;
    let mut j = 0;
    while a.abs() * qj >= cut {
        if j >= ctx.max_terms {
            return Err(QError::NonConvergence {
                what: "q-Pochhammer product",
                terms: j,
                partial: prod,
                last_term: a.abs() * qj,
            });
        }
        prod *= 1.0 - a * qj;
        qj *= q;
        j += 1;
    }
    Ok(prod)
}

/// `(q;q)_inf`.
pub fn qq_inf(ctx: &QContext) -> Result<f64> {
    qpoch_inf_re(ctx.q, ctx)
}

/// `(q;q)_j` for `j = 0..=n`.
pub fn qq_table(n: usize, ctx: &QContext) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut prod = 1.0;
    let mut qj = ctx.q;
    out.push(prod);
    for _ in 0..n {
        prod *= 1.0 - qj;
        qj *= ctx.q;
        out.push(prod);
    }
    out
}

/// Shared stopping test for the Euler-type series.
fn series_done(term: f64, sum: f64, peak: f64, ratio: f64, eps: f64) -> bool {
    ratio < 1.0 && (term <= eps * sum || term <= f64::EPSILON * eps * peak)
}

/// `sum_k (-1)^k q^{k(k-1)/2} z^k / (q;q)_k`, the product-to-series identity.
pub fn euler_series(z: Complex64, ctx: &QContext) -> Result<Complex64> {
    let q = ctx.q;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut abs_sum = 1.0;
    let mut peak: f64 = 1.0;
    let mut qk = 1.0;
    for k in 0..ctx.max_terms {
        // t_{k+1} = t_k * (-q^k z) / (1 - q^{k+1})
        let factor = -z * qk / (1.0 - qk * q);
        term *= factor;
        sum += term;
        qk *= q;
        let t = term.norm();
        abs_sum += t;
        peak = peak.max(t);
        let next_ratio = z.norm() * qk / (1.0 - qk * q);
        if series_done(t, sum.norm(), peak, next_ratio, ctx.eps_term) || t == 0.0 {
            return Ok(refine_euler(sum, abs_sum, z, k + 2, true, ctx));
        }
        if k + 1 == ctx.max_terms {
            return Err(QError::NonConvergence {
                what: "Euler series",
                terms: k + 1,
                partial: sum.norm(),
                last_term: t,
            });
        }
    }
    Ok(sum)
}

/// `sum_k z^k / (q;q)_k = 1 / (z;q)_inf`, valid for `|z| < 1`.
pub fn euler_recip_series(z: Complex64, ctx: &QContext) -> Result<Complex64> {
    if z.norm() >= 1.0 {
        return Err(QError::Domain(format!(
            "reciprocal Euler series needs |z| < 1, got |z| = {}",
            z.norm()
        )));
    }
    let q = ctx.q;
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut abs_sum = 1.0;
    let mut qk1 = q;
    for k in 0..ctx.max_terms {
        term *= z / (1.0 - qk1);
        sum += term;
        qk1 *= q;
        let t = term.norm();
        abs_sum += t;
        let ratio = z.norm() / (1.0 - qk1);
        if ratio < 1.0 {
            let tail = t * ratio / (1.0 - ratio);
            if tail <= ctx.eps_term * sum.norm() || t == 0.0 {
                return Ok(refine_euler(sum, abs_sum, z, k + 2, false, ctx));
            }
        }
        if k + 1 == ctx.max_terms {
            return Err(QError::NonConvergence {
                what: "reciprocal Euler series",
                terms: k + 1,
                partial: sum.norm(),
                last_term: t,
            });
        }
    }
    Ok(sum)
}

/// Re-sums the first `n` terms of an Euler series in multiprecision when the
/// double sum has lost more than `eps_tail` to cancellation.
fn refine_euler(sum: Complex64, abs_sum: f64, z: Complex64, n: usize, product_side: bool, ctx: &QContext) -> Complex64 {
    let lost = abs_sum / sum.norm().max(f64::MIN_POSITIVE);
    if ctx.precision == PrecisionTier::Standard || f64::EPSILON * lost <= ctx.eps_tail {
        return sum;
    }
    let bits = 64 + (lost.log2() - ctx.eps_tail.log2()).ceil().max(0.0) as usize;
    let a = MpArith::new(bits);
    let one = a.one();
    let q = a.from_f64(ctx.q);
    let (zr, zi) = (a.from_f64(z.re), a.from_f64(z.im));
    let (mut tr, mut ti) = (one.clone(), a.zero());
    let (mut sr, mut si) = (one.clone(), a.zero());
    let mut qk = one.clone();
    for _ in 1..n {
        // t_{k+1} = t_k * w z / (1 - q^{k+1}), w = -q^k or 1
        let next = a.mul(&qk, &q);
        let d = a.sub(&one, &next);
        let (mut wr, mut wi) = (a.div(&zr, &d), a.div(&zi, &d));
        if product_side {
            wr = a.neg(&a.mul(&wr, &qk));
            wi = a.neg(&a.mul(&wi, &qk));
        }
        let nr = a.sub(&a.mul(&tr, &wr), &a.mul(&ti, &wi));
        let ni = a.add(&a.mul(&tr, &wi), &a.mul(&ti, &wr));
        tr = nr;
        ti = ni;
        sr = a.add(&sr, &tr);
        si = a.add(&si, &ti);
        qk = next;
    }
    Complex64::new(a.to_f64(&sr), a.to_f64(&si))
}

/// `ln (-r;q)_inf = sum_j ln(1 + r q^j)` for `r >= 0`, without forming the product.
pub fn log_qpoch_neg(r: f64, ctx: &QContext) -> f64 {
    log_qpoch_neg_report(r, ctx).0
}

pub fn log_qpoch_neg_report(r: f64, ctx: &QContext) -> (f64, TruncationReport) {
    debug_assert!(r >= 0.0, "log_qpoch_neg needs r >= 0");
    let q = ctx.q;
    let cut = ctx.eps_term * (1.0 - q);
    let mut sum = 0.0;
    let mut rqj = r;
    let mut j = 0;
    while rqj >= cut {
        sum += rqj.ln_1p();
        rqj *= q;
        j += 1;
    }
    // remaining terms: sum_{i>=j} ln(1 + r q^i) <= r q^j / (1 - q)
    let tail = rqj / (1.0 - q);
    (sum, TruncationReport::new(j, tail, sum.abs(), ctx.eps_tail))
}

/// Jackson q-integral `int_0^a f(t) d_q t = (1 - q) a sum_j q^j f(a q^j)`.
///
/// The evaluator receives the node index `j` and the node `a q^j`. The sum
/// stops once `q^{j+1} <= eps_tail` and the sup-norm tail bound
/// `a q^{j+1} max|f|` is below `eps_tail` relative to the partial sum (or
/// below double resolution of the sup norm).
pub fn jackson_qintegral<F>(mut f: F, a: f64, ctx: &QContext) -> Result<f64>
where
    F: FnMut(usize, f64) -> f64,
{
    jackson_qintegral_report(&mut f, a, ctx).map(|(v, _)| v)
}

pub fn jackson_qintegral_report<F>(
    mut f: F,
    a: f64,
    ctx: &QContext,
) -> Result<(f64, TruncationReport)>
where
    F: FnMut(usize, f64) -> f64,
{
    if !(a > 0.0 && a <= 1.0) {
        return Err(QError::Domain(format!("q-integral upper limit must lie in (0,1], got {a}")));
    }
    let q = ctx.q;
    let mut sum = 0.0;
    let mut comp = 0.0;
    let mut sup: f64 = 0.0;
    let mut qj = 1.0;
    for j in 0..ctx.max_terms {
        let v = f(j, a * qj);
        if !v.is_finite() {
            return Err(QError::Domain(format!("integrand is not finite at node {j}")));
        }
        sup = sup.max(v.abs());
        // Neumaier summation of q^j f(a q^j)
        let x = qj * v;
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        qj *= q;
        let total = (1.0 - q) * a * (sum + comp);
        let tail = a * qj * sup;
        if qj <= ctx.eps_tail
            && (tail <= ctx.eps_tail * total.abs() || qj <= f64::EPSILON * ctx.eps_tail)
        {
            let report = TruncationReport::new(j + 1, tail, total.abs(), ctx.eps_tail);
            return Ok((total, report));
        }
    }
    Err(QError::NonConvergence {
        what: "Jackson q-integral",
        terms: ctx.max_terms,
        partial: (1.0 - q) * a * (sum + comp),
        last_term: qj * sup,
    })
}
