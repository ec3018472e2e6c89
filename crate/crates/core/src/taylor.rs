//! Power-series representation of `D f` through divided differences of
//! `g(z) = (qz;q)_inf rho(z)` at the nodes `1, q, ..., q^k`.
//!
//! The coefficients are `c_k = (-1)^k q^{k(k-1)/2} g[1;q;...;q^k]`. The
//! divided differences suffer heavy cancellation (the explicit sum has terms
//! of size about `q^{-k^2/4}`), so the extended tier runs both the explicit
//! sum and the Newton recursion in binary multiprecision with
//! `max(128, 2*ceil(K(K-1)/2 * log2(1/q)) + 128)` bits.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::arith::{neumaier_sum, Arith, F64Arith, Mp, MpArith};
use crate::durrmeyer;
use crate::error::{QError, Result};
use crate::funcspace::{FunctionSpec, GridFunction};
use crate::qcore::{self, PrecisionTier, QContext};
use crate::scaled::ScaledValue;

/// Highest order the standard tier accepts regardless of `q`.
pub const STANDARD_MAX_ORDER: usize = 15;

/// Bits of cancellation tolerated by the standard tier.
const STANDARD_CANCELLATION_BITS: f64 = 26.0;

pub const DEFAULT_QUAD_NODES: usize = 4096;

/// Number of trailing `rho` coefficients used by the root test.
pub const RADIUS_WINDOW: usize = 20;

/// Radius above which [`eval_taylor`] sums in log form.
const HORNER_RADIUS: f64 = 1e2;

/// Largest order the standard tier will compute at this `q`.
pub fn standard_order_cap(q: f64) -> usize {
    let bits_per = (1.0 / q).log2();
    let mut k = 1usize;
    while k < STANDARD_MAX_ORDER && ((k + 1) * k) as f64 / 2.0 * bits_per <= STANDARD_CANCELLATION_BITS {
        k += 1;
    }
    k
}

/// Working precision for divided differences up to order `k_max`.
pub fn working_bits(k_max: usize, q: f64) -> usize {
    let loss = (k_max * k_max.saturating_sub(1)) as f64 / 2.0 * (1.0 / q).log2();
    128usize.max(2 * loss.ceil() as usize + 128)
}

fn check_order(k: usize, ctx: &QContext) -> Result<()> {
    if ctx.precision() == PrecisionTier::Standard {
        let cap = standard_order_cap(ctx.q());
        if k > cap {
            let lost = (k * k.saturating_sub(1)) as f64 / 2.0 * ctx.ln_inv_q() / 10f64.ln();
            return Err(QError::OrderCap {
                what: "divided difference",
                k,
                cap,
                note: format!(
                    "cancellation costs about {lost:.0} of 16 decimal digits at q = {}; use the extended tier",
                    ctx.q()
                ),
            });
        }
    }
    Ok(())
}

/// `a_j = f(q^j) q^j / (q;q)_j` with a root-test estimate of the radius of convergence.
#[derive(Debug, Clone)]
pub struct RhoSeries {
    pub coeffs: Vec<f64>,
    pub radius_estimate: f64,
    /// Smallest and largest single-index estimates over the window.
    pub radius_band: (f64, f64),
}

pub fn rho_coeffs(gf: &GridFunction, ctx: &QContext, j_max: usize) -> Result<RhoSeries> {
    gf.check_q(ctx)?;
    if j_max < 1 {
        return Err(QError::InvalidParameter("rho needs at least two coefficients".into()));
    }
    let q = ctx.q();
    let ln_q = q.ln();
    let mut coeffs = Vec::with_capacity(j_max + 1);
    let mut ln_qq = 0.0;
    let mut weight = 1.0;
    let mut estimates = Vec::new();
    let window_start = (j_max + 1).saturating_sub(RADIUS_WINDOW).max(1);
    for j in 0..=j_max {
        if j > 0 {
            let qj = q.powi(j as i32);
            ln_qq += (-qj).ln_1p();
            weight *= q / (1.0 - qj);
        }
        let v = gf.node(j);
        coeffs.push(v * weight);
        if j >= window_start && v != 0.0 {
            let ln_a = v.abs().ln() + j as f64 * ln_q - ln_qq;
            estimates.push((-ln_a / j as f64).exp());
        }
    }
    let (radius_estimate, radius_band) = if estimates.is_empty() {
        (f64::INFINITY, (f64::INFINITY, f64::INFINITY))
    } else {
        let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = estimates.iter().copied().fold(0.0, f64::max);
        (lo, (lo, hi))
    };
    Ok(RhoSeries {
        coeffs,
        radius_estimate,
        radius_band,
    })
}

/// `g(z) = (qz;q)_inf sum_j a_j z^j` for `|z| < 1/q`.
pub fn g_eval(gf: &GridFunction, z: Complex64, ctx: &QContext) -> Result<Complex64> {
    gf.check_q(ctx)?;
    let q = ctx.q();
    let qz = z.norm() * q;
    if qz >= 1.0 {
        return Err(QError::Domain(format!(
            "g is only evaluated for |z| < 1/q = {}, got |z| = {}",
            1.0 / q,
            z.norm()
        )));
    }
    let qq_inf = qcore::qq_inf(ctx)?;
    let sup = gf.sup_norm();
    let mut u = Complex64::new(1.0, 0.0); // q^j z^j / (q;q)_j
    let mut sum = Complex64::new(0.0, 0.0);
    let mut qz_pow = qz;
    let mut qj = 1.0;
    for j in 0..ctx.max_terms() {
        sum += gf.node(j) * u;
        qj *= q;
        u *= q * z / (1.0 - qj);
        let tail = sup * qz_pow / (qq_inf * (1.0 - qz));
        qz_pow *= qz;
        if j >= gf.last_node()
            && (tail <= ctx.eps_tail() * sum.norm() || tail <= f64::EPSILON * ctx.eps_tail() * sup)
        {
            let (head, _) = qcore::qpoch_inf(q * z, ctx)?;
            return Ok(head * sum);
        }
    }
    Err(QError::NonConvergence {
        what: "rho series",
        terms: ctx.max_terms(),
        partial: sum.norm(),
        last_term: u.norm(),
    })
}

/// Powers of `q` and the factors `1 - q^i` with their inverses, `i = 0..=n`.
struct QTables<A: Arith> {
    pow: Vec<A::T>,
    inv_pow: Vec<A::T>,
    one_minus: Vec<A::T>,
    inv_one_minus: Vec<A::T>,
}

impl<A: Arith> QTables<A> {
    fn new(a: &A, q: f64, n: usize) -> Self {
        let q_t = a.from_f64(q);
        let one = a.one();
        let q_inv = a.div(&one, &q_t);
        let mut pow = vec![one.clone()];
        let mut inv_pow = vec![one.clone()];
        let mut one_minus = vec![a.zero()];
        let mut inv_one_minus = vec![a.zero()];
        for i in 1..=n {
            let p = a.mul(&pow[i - 1], &q_t);
            let om = a.sub(&one, &p);
            inv_one_minus.push(a.div(&one, &om));
            one_minus.push(om);
            inv_pow.push(a.mul(&inv_pow[i - 1], &q_inv));
            pow.push(p);
        }
        Self {
            pow,
            inv_pow,
            one_minus,
            inv_one_minus,
        }
    }
}

/// Top edge `g[x_0], g[x_0;x_1], ..., g[x_0;...;x_k]` of the Newton table at arbitrary distinct nodes.
pub fn newton_divdiff<A: Arith>(a: &A, nodes: &[A::T], values: &[A::T]) -> Vec<A::T> {
    assert_eq!(nodes.len(), values.len());
    let mut table = values.to_vec();
    let mut top = vec![table[0].clone()];
    for level in 1..table.len() {
        for i in (level..table.len()).rev() {
            let num = a.sub(&table[i], &table[i - 1]);
            let den = a.sub(&nodes[i], &nodes[i - level]);
            table[i] = a.div(&num, &den);
        }
        top.push(table[level].clone());
    }
    top
}

/// Newton recursion specialised to the nodes `q^i`, avoiding divisions.
fn qnode_newton<A: Arith>(a: &A, t: &QTables<A>, values: &[A::T]) -> Vec<A::T> {
    let mut table = values.to_vec();
    let mut top = vec![table[0].clone()];
    for level in 1..table.len() {
        for i in (level..table.len()).rev() {
            // q^i - q^{i-l} = -q^{i-l} (1 - q^l)
            let num = a.sub(&table[i - 1], &table[i]);
            let scale = a.mul(&t.inv_pow[i - level], &t.inv_one_minus[level]);
            table[i] = a.mul(&num, &scale);
        }
        top.push(table[level].clone());
    }
    top
}

/// Explicit sum for `g[1;...;q^k]` and `sum_j |w_j| |values_j|`.
fn explicit_sum<A: Arith>(a: &A, t: &QTables<A>, k: usize, values: &[A::T]) -> (A::T, A::T) {
    // w_0 = 1/(q;q)_k, w_j = -w_{j-1} q^{-(k-j)} (1-q^{k-j+1}) / (1-q^j)
    let mut w = a.one();
    for i in 1..=k {
        w = a.mul(&w, &t.inv_one_minus[i]);
    }
    let mut terms = Vec::with_capacity(k + 1);
    let mut abs_terms = Vec::with_capacity(k + 1);
    for j in 0..=k {
        if j > 0 {
            let f = a.mul(&t.inv_pow[k - j], &a.mul(&t.one_minus[k - j + 1], &t.inv_one_minus[j]));
            w = a.neg(&a.mul(&w, &f));
        }
        let term = a.mul(&w, &values[j]);
        abs_terms.push(a.abs(&term));
        terms.push(term);
    }
    (a.sum(&terms), a.sum(&abs_terms))
}

/// `g[1;q;...;q^k]` from the Newton recursion, `k = node_values.len() - 1`.
///
/// The node values are taken as exact; the extended tier computes in
/// multiprecision, the standard tier in doubles up to [`standard_order_cap`].
pub fn divdiff_recursive(node_values: &[f64], ctx: &QContext) -> Result<f64> {
    let k = node_values
        .len()
        .checked_sub(1)
        .ok_or_else(|| QError::InvalidParameter("no node values".into()))?;
    check_order(k, ctx)?;
    Ok(match ctx.precision() {
        PrecisionTier::Standard => {
            let a = F64Arith;
            let t = QTables::new(&a, ctx.q(), k + 1);
            qnode_newton(&a, &t, node_values)[k]
        }
        PrecisionTier::Extended => {
            let a = MpArith::new(working_bits(k, ctx.q()));
            let t = QTables::new(&a, ctx.q(), k + 1);
            let vals: Vec<Mp> = node_values.iter().map(|v| a.from_f64(*v)).collect();
            a.to_f64(&qnode_newton(&a, &t, &vals)[k])
        }
    })
}

/// `g[1;q;...;q^k]` from the closed-form weighted sum of `g(q^j)`, `j = 0..=k`.
pub fn divdiff_explicit(k: usize, node_values: &[f64], ctx: &QContext) -> Result<f64> {
    if node_values.len() <= k {
        return Err(QError::InvalidParameter(format!(
            "order {k} needs {} node values, got {}",
            k + 1,
            node_values.len()
        )));
    }
    check_order(k, ctx)?;
    Ok(match ctx.precision() {
        PrecisionTier::Standard => {
            let a = F64Arith;
            let t = QTables::new(&a, ctx.q(), k + 1);
            explicit_sum(&a, &t, k, &node_values[..=k]).0
        }
        PrecisionTier::Extended => {
            let a = MpArith::new(working_bits(k, ctx.q()));
            let t = QTables::new(&a, ctx.q(), k + 1);
            let vals: Vec<Mp> = node_values[..=k].iter().map(|v| a.from_f64(*v)).collect();
            a.to_f64(&explicit_sum(&a, &t, k, &vals).0)
        }
    })
}

fn check_contour(r: f64, n_quad: usize) -> Result<()> {
    if !(r > 1.0) {
        return Err(QError::Domain(format!(
            "contour radius must exceed 1 to enclose the nodes, got {r}"
        )));
    }
    if (n_quad as f64) * r.ln() < 30.0 {
        return Err(QError::Domain(format!(
            "{n_quad} quadrature nodes are too few for radius {r}; need n_quad * ln R >= 30"
        )));
    }
    Ok(())
}

/// `(1/2 pi i) \oint g(s) ds / prod_{i<=k}(s - q^i)` on `|s| = r` by the trapezoidal rule.
pub fn divdiff_contour<G>(g: G, k: usize, r: f64, n_quad: usize, ctx: &QContext) -> Result<Complex64>
where
    G: FnMut(Complex64) -> Result<Complex64>,
{
    Ok(divdiff_contour_all(g, k, r, n_quad, ctx)?[k])
}

/// All orders `0..=k_max` from one set of samples of `g`.
pub fn divdiff_contour_all<G>(
    mut g: G,
    k_max: usize,
    r: f64,
    n_quad: usize,
    ctx: &QContext,
) -> Result<Vec<Complex64>>
where
    G: FnMut(Complex64) -> Result<Complex64>,
{
    check_contour(r, n_quad)?;
    let q = ctx.q();
    let mut points = Vec::with_capacity(n_quad);
    let mut weighted = Vec::with_capacity(n_quad);
    for m in 0..n_quad {
        let s = Complex64::from_polar(r, 2.0 * PI * m as f64 / n_quad as f64);
        weighted.push(g(s)? * s);
        points.push(s);
    }
    let mut out = Vec::with_capacity(k_max + 1);
    let mut qk = 1.0;
    for _ in 0..=k_max {
        for (w, s) in weighted.iter_mut().zip(&points) {
            *w /= s - qk;
        }
        let re = neumaier_sum(weighted.iter().map(|w| w.re));
        let im = neumaier_sum(weighted.iter().map(|w| w.im));
        out.push(Complex64::new(re, im) / n_quad as f64);
        qk *= q;
    }
    Ok(out)
}

/// `min(1.3, 0.9 min(R_hat, 1/q))`: inside the disc where `g_eval` converges.
pub fn contour_radius(gf: &GridFunction, ctx: &QContext) -> Result<f64> {
    let j = gf.last_node().max(200);
    let rho = rho_coeffs(gf, ctx, j)?;
    Ok(1.3f64.min(0.9 * rho.radius_estimate.min(1.0 / ctx.q())))
}

/// `g[1;...;q^k]` by the three independent routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivDiffOracles {
    pub k: usize,
    pub recursive: f64,
    pub explicit: f64,
    pub contour: Complex64,
}

impl DivDiffOracles {
    /// Largest pairwise gap within `max(rel * scale, abs_floor)`, `scale` being
    /// the largest of the three magnitudes.
    pub fn agrees(&self, rel: f64, abs_floor: f64) -> bool {
        self.max_gap() <= (rel * self.scale()).max(abs_floor)
    }

    pub fn scale(&self) -> f64 {
        self.recursive.abs().max(self.explicit.abs()).max(self.contour.norm())
    }

    pub fn max_gap(&self) -> f64 {
        let vals = [Complex64::new(self.recursive, 0.0), Complex64::new(self.explicit, 0.0), self.contour];
        (0..3)
            .flat_map(|i| (i + 1..3).map(move |j| (i, j)))
            .map(|(i, j)| (vals[i] - vals[j]).norm())
            .fold(0.0, f64::max)
    }
}

/// Orders `0..=k_max` from exact node values through the Newton recursion and
/// the explicit sum at working precision, and by quadrature of [`g_eval`] on
/// the circle of radius [`contour_radius`].
pub fn divdiff_oracles(gf: &GridFunction, k_max: usize, ctx: &QContext) -> Result<Vec<DivDiffOracles>> {
    gf.check_q(ctx)?;
    let a = MpArith::new(working_bits(k_max, ctx.q()));
    let values = mp_node_values(gf, k_max, &a);
    let t = QTables::new(&a, ctx.q(), k_max + 1);
    let recursive = qnode_newton(&a, &t, &values);
    let r = contour_radius(gf, ctx)?;
    let contour = divdiff_contour_all(|z| g_eval(gf, z, ctx), k_max, r, DEFAULT_QUAD_NODES, ctx)?;
    Ok((0..=k_max)
        .map(|k| DivDiffOracles {
            k,
            recursive: a.to_f64(&recursive[k]),
            explicit: a.to_f64(&explicit_sum(&a, &t, k, &values[..=k]).0),
            contour: contour[k],
        })
        .collect())
}

/// One Taylor coefficient with its divided difference and error estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct TaylorTerm {
    pub divdiff: f64,
    pub ln_abs_divdiff: f64,
    pub ln_divdiff_err: f64,
    /// Sign of `c_k`: -1, 0 or 1.
    pub sign: i8,
    pub coeff: f64,
    pub ln_abs_coeff: f64,
    pub ln_coeff_err: f64,
}

impl TaylorTerm {
    pub fn divdiff_err(&self) -> f64 {
        self.ln_divdiff_err.exp()
    }

    pub fn coeff_err(&self) -> f64 {
        self.ln_coeff_err.exp()
    }

    /// Error estimate below a tenth of the magnitude.
    pub fn is_reliable(&self) -> bool {
        self.ln_divdiff_err < self.ln_abs_divdiff - 10f64.ln()
    }

    /// Magnitude not distinguishable from zero.
    pub fn is_negligible(&self) -> bool {
        self.ln_abs_divdiff <= self.ln_divdiff_err
    }
}

/// `c_0, ..., c_K` of `D f` with per-coefficient errors.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSeriesRep {
    pub q: f64,
    pub tier: PrecisionTier,
    /// Working bits of the extended tier.
    pub bits: Option<usize>,
    pub terms: Vec<TaylorTerm>,
}

impl PowerSeriesRep {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    pub fn coeffs(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff).collect()
    }

    pub fn errors(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.coeff_err()).collect()
    }
}

/// `A_k`, `k = 0..=k_max`, at working precision.
///
/// Catalog functions are evaluated from their formulas, which gives the
/// values of the exact function rather than of its stored window; other
/// data use the constant tail through the finite rearrangement
/// `A_k = f(0) + (q^{k+1};q)_inf sum_{j<=J} (f(q^j) - f(0)) q^{(k+1)j} / (q;q)_j`.
pub fn mp_node_values(gf: &GridFunction, k_max: usize, a: &MpArith) -> Vec<Mp> {
    let q = gf.q();
    let ln_u = a.ln_unit_roundoff();
    // terms of exp's series are below 1/m!
    let mut m_exp = 1usize;
    let mut ln_fact = 0.0;
    while ln_fact < 20.0 - ln_u {
        m_exp += 1;
        ln_fact += (m_exp as f64).ln();
    }
    let extra = match gf.source() {
        Some(FunctionSpec::Monomial(m)) => *m as usize,
        Some(FunctionSpec::Poly(c)) => c.len(),
        Some(FunctionSpec::Exp) => m_exp,
        _ => 0,
    };
    let n = (k_max + 1 + extra).max(gf.last_node() + 1);
    let t = QTables::new(a, q, n);
    let one = a.one();

    // P_k = (q^{k+1};q)_inf
    let qq_inf = mp_qpoch_inf(a, &t.pow[1], q);
    let mut tail_prods = Vec::with_capacity(k_max + 1);
    let mut p = qq_inf.clone();
    for k in 0..=k_max {
        if k > 0 {
            p = a.mul(&p, &t.inv_one_minus[k]);
        }
        tail_prods.push(p.clone());
    }
    // (q^{k+1};q)_m
    let shifted = |k: usize, m: usize| -> Mp {
        (0..m).fold(one.clone(), |acc, i| a.mul(&acc, &t.one_minus[k + 1 + i]))
    };

    match gf.source() {
        Some(FunctionSpec::Monomial(m)) => (0..=k_max).map(|k| shifted(k, *m as usize)).collect(),
        Some(FunctionSpec::Poly(c)) => (0..=k_max)
            .map(|k| {
                let mut prod = one.clone();
                let mut acc = a.zero();
                for (m, cm) in c.iter().enumerate() {
                    if m > 0 {
                        prod = a.mul(&prod, &t.one_minus[k + m]);
                    }
                    acc = a.add(&acc, &a.mul(&a.from_f64(*cm), &prod));
                }
                acc
            })
            .collect(),
        Some(FunctionSpec::Exp) => (0..=k_max)
            .map(|k| {
                let mut term = one.clone();
                let mut acc = one.clone();
                for m in 1..m_exp {
                    term = a.div(&a.mul(&term, &t.one_minus[k + m]), &a.from_int(m as i64));
                    acc = a.add(&acc, &term);
                }
                acc
            })
            .collect(),
        Some(FunctionSpec::Power(alpha)) => {
            // A_k = (q^{k+1};q)_inf / (q^{k+1+alpha};q)_inf
            let q_alpha = a.exp(&a.mul(&a.from_f64(*alpha), &a.ln(&a.from_f64(q))));
            let start = a.mul(&q_alpha, &t.pow[1]);
            let mut ak = a.div(&qq_inf, &mp_qpoch_inf(a, &start, q));
            let mut out = Vec::with_capacity(k_max + 1);
            for k in 0..=k_max {
                if k > 0 {
                    let num = a.sub(&one, &a.mul(&q_alpha, &t.pow[k]));
                    ak = a.mul(&a.mul(&ak, &num), &t.inv_one_minus[k]);
                }
                out.push(ak.clone());
            }
            out
        }
        Some(FunctionSpec::AbsShift(c)) => {
            let c_t = a.from_f64(*c);
            if *c <= 0.0 {
                return (0..=k_max).map(|k| a.sub(&t.one_minus[k + 1], &c_t)).collect();
            }
            // nodes with q^j > c
            let mut head = Vec::new();
            let mut inv_qq = one.clone();
            let mut qj = one.clone();
            let mut j = 0;
            while qj > c_t {
                if j > 0 {
                    inv_qq = a.mul(&inv_qq, &t.inv_one_minus[j]);
                }
                head.push(a.mul(&a.sub(&qj, &c_t), &inv_qq));
                j += 1;
                qj = a.mul(&qj, &t.pow[1]);
            }
            (0..=k_max)
                .map(|k| {
                    let x = &t.pow[k + 1];
                    let mut xj = one.clone();
                    let mut s = a.zero();
                    for h in &head {
                        s = a.add(&s, &a.mul(h, &xj));
                        xj = a.mul(&xj, x);
                    }
                    let two_p = a.mul(&a.from_f64(2.0), &tail_prods[k]);
                    a.add(&a.sub(&c_t, &t.one_minus[k + 1]), &a.mul(&two_p, &s))
                })
                .collect()
        }
        Some(FunctionSpec::Sharp(lambda)) => {
            // g(z) = 1/(1 - q^lambda z)
            let beta = a.exp(&a.mul(&a.from_f64(*lambda), &a.ln(&a.from_f64(q))));
            (0..=k_max)
                .map(|k| a.div(&one, &a.sub(&one, &a.mul(&beta, &t.pow[k]))))
                .collect()
        }
        Some(FunctionSpec::File(_)) | None => {
            let l = a.from_f64(gf.limit0());
            let mut diffs = Vec::with_capacity(gf.last_node() + 1);
            let mut inv_qq = one.clone();
            for j in 0..=gf.last_node() {
                if j > 0 {
                    inv_qq = a.mul(&inv_qq, &t.inv_one_minus[j]);
                }
                diffs.push(a.mul(&a.sub(&a.from_f64(gf.node(j)), &l), &inv_qq));
            }
            (0..=k_max)
                .map(|k| {
                    let x = &t.pow[k + 1];
                    let mut xj = one.clone();
                    let mut s = a.zero();
                    for d in &diffs {
                        s = a.add(&s, &a.mul(d, &xj));
                        xj = a.mul(&xj, x);
                    }
                    a.add(&l, &a.mul(&tail_prods[k], &s))
                })
                .collect()
        }
    }
}

/// `(x;q)_inf` at working precision for `0 <= x <= 1`.
fn mp_qpoch_inf(a: &MpArith, x: &Mp, q: f64) -> Mp {
    let q_t = a.from_f64(q);
    let one = a.one();
    let ln_stop = a.ln_unit_roundoff() - 8.0;
    let mut prod = one.clone();
    let mut xq = x.clone();
    let ln_q = q.ln();
    let mut ln_xq = a.ln_abs(x);
    while ln_xq > ln_stop {
        prod = a.mul(&prod, &a.sub(&one, &xq));
        xq = a.mul(&xq, &q_t);
        ln_xq += ln_q;
    }
    prod
}

/// `A_0, ..., A_{k_max}` as doubles, using the tier of `ctx`.
pub fn node_values(gf: &GridFunction, k_max: usize, ctx: &QContext) -> Result<Vec<f64>> {
    gf.check_q(ctx)?;
    match ctx.precision() {
        PrecisionTier::Standard => (0..=k_max).map(|k| durrmeyer::coeff_a(k, gf, ctx)).collect(),
        PrecisionTier::Extended => {
            let a = MpArith::new(working_bits(k_max, ctx.q()));
            Ok(mp_node_values(gf, k_max, &a).iter().map(|v| a.to_f64(v)).collect())
        }
    }
}

fn build_terms<A: Arith>(
    a: &A,
    q: f64,
    values: &[A::T],
    ln_data_scale: f64,
    extra_terms: usize,
) -> Vec<TaylorTerm> {
    let k_max = values.len() - 1;
    let t = QTables::new(a, q, k_max + 1);
    let recursive = qnode_newton(a, &t, values);
    let ln_u = a.ln_unit_roundoff();
    let ln_q = q.ln();
    let mut tri = a.one(); // q^{k(k-1)/2}
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 1 {
            tri = a.mul(&tri, &t.pow[k - 1]);
        }
        let (explicit, abs_sum) = explicit_sum(a, &t, k, &values[..=k]);
        let discrepancy = a.ln_abs(&a.sub(&recursive[k], &explicit));
        // rounding of the weighted sum plus data error of size `ln_data_scale` per node
        let mut ln_weights = f64::NEG_INFINITY;
        if ln_data_scale > f64::NEG_INFINITY {
            let mut w = a.one();
            let mut wsum = Vec::with_capacity(k + 1);
            for i in 1..=k {
                w = a.mul(&w, &t.inv_one_minus[i]);
            }
            for j in 0..=k {
                if j > 0 {
                    let f = a.mul(&t.inv_pow[k - j], &a.mul(&t.one_minus[k - j + 1], &t.inv_one_minus[j]));
                    w = a.abs(&a.mul(&w, &f));
                }
                wsum.push(w.clone());
            }
            ln_weights = a.ln_abs(&a.sum(&wsum)) + ln_data_scale;
        }
        let rounding = ln_u + ((k + extra_terms + 16) as f64).ln() + a.ln_abs(&abs_sum);
        let ln_err = discrepancy.max(rounding).max(ln_weights);
        let sign_d = a.signum(&explicit);
        let sign = if k % 2 == 1 { -sign_d } else { sign_d };
        let ln_tri = (k * k.saturating_sub(1)) as f64 / 2.0 * ln_q;
        let mut coeff = a.to_f64(&a.mul(&tri, &explicit));
        if k % 2 == 1 {
            coeff = -coeff;
        }
        let ln_abs_divdiff = a.ln_abs(&explicit);
        out.push(TaylorTerm {
            divdiff: a.to_f64(&explicit),
            ln_abs_divdiff,
            ln_divdiff_err: ln_err,
            sign,
            coeff,
            ln_abs_coeff: ln_abs_divdiff + ln_tri,
            ln_coeff_err: ln_err + ln_tri,
        });
    }
    out
}

/// Taylor coefficients `c_0..=c_K` of `D f`.
pub fn taylor_coeffs(gf: &GridFunction, k_max: usize, ctx: &QContext) -> Result<PowerSeriesRep> {
    gf.check_q(ctx)?;
    if k_max < 1 {
        return Err(QError::InvalidParameter("K must be at least 1".into()));
    }
    check_order(k_max, ctx)?;
    let q = ctx.q();
    match ctx.precision() {
        PrecisionTier::Standard => {
            let values = node_values(gf, k_max, ctx)?;
            let a = F64Arith;
            // coefficient sums are accurate to a few ulps of the data scale
            let ln_data = (4.0 * f64::EPSILON * gf.sup_norm().max(f64::MIN_POSITIVE)).ln();
            let terms = build_terms(&a, q, &values, ln_data, gf.last_node());
            Ok(PowerSeriesRep {
                q,
                tier: PrecisionTier::Standard,
                bits: None,
                terms,
            })
        }
        PrecisionTier::Extended => {
            let bits = working_bits(k_max, q);
            let a = MpArith::new(bits);
            let values = mp_node_values(gf, k_max, &a);
            let ln_data = a.ln_unit_roundoff() + (gf.sup_norm().max(1.0) * 64.0).ln();
            let terms = build_terms(&a, q, &values, ln_data, gf.last_node());
            Ok(PowerSeriesRep {
                q,
                tier: PrecisionTier::Extended,
                bits: Some(bits),
                terms,
            })
        }
    }
}

/// `sum_k c_k z^k`; Horner for moderate `|z|`, log-domain summation beyond.
pub fn eval_taylor(series: &PowerSeriesRep, z: Complex64) -> Result<Complex64> {
    if z.norm() <= HORNER_RADIUS {
        return Ok(series
            .terms
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, t| acc * z + t.coeff));
    }
    let v = eval_taylor_scaled(series, z);
    v.to_complex().ok_or(QError::Overflow { ln_abs: v.ln_abs() })
}

/// `sum_k c_k z^k` in log form; never overflows.
pub fn eval_taylor_scaled(series: &PowerSeriesRep, z: Complex64) -> ScaledValue {
    let ln_r = z.norm().ln();
    let theta = z.arg();
    if z.norm() == 0.0 {
        return ScaledValue::unscaled(Complex64::new(series.terms[0].coeff, 0.0));
    }
    ScaledValue::log_sum(series.terms.iter().enumerate().filter(|(_, t)| t.sign != 0).map(|(k, t)| {
        let phase = if t.sign < 0 { PI } else { 0.0 };
        (t.ln_abs_coeff + k as f64 * ln_r, phase + k as f64 * theta)
    }))
}

/// Order `K` whose neglected terms are far below the largest term up to `r_max`.
pub fn taylor_order_for_radius(r_max: f64, q: f64) -> usize {
    let l = (1.0 / q).ln();
    let peak = (r_max.max(1.0).ln() / l) + 0.5;
    ((peak + (100.0 / l).sqrt()).ceil() as usize + 10).max(20)
}

/// Result of [`decay_check`].
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub lambda: f64,
    /// `max_k |g[1;...;q^k]| q^{-lambda k}` over the window.
    pub c_star: f64,
    pub ln_c_star: f64,
    /// Orders that took part.
    pub window: Vec<usize>,
    /// `ln(|g[...]| q^{-lambda k})` over the window.
    pub log_ratios: Vec<f64>,
    pub bounded: bool,
    /// Whether the window fell back to upper bounds `|d_k| + err_k`.
    pub used_upper_bounds: bool,
}

fn log_add(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Boundedness of `g[1;...;q^k] q^{-lambda k}` over the reliable orders.
///
/// Bounded means the maximum over the later half of the window exceeds the
/// maximum over the earlier half by less than a factor 2. With fewer than four
/// reliable orders the check uses `|d_k| + err_k` over all orders.
pub fn decay_check(series: &PowerSeriesRep, lambda: f64) -> DecayReport {
    let lam_l = lambda * (1.0 / series.q).ln();
    let mut window: Vec<usize> = (0..series.terms.len())
        .filter(|&k| series.terms[k].is_reliable())
        .collect();
    let mut used_upper_bounds = false;
    let mut log_ratios: Vec<f64> = window
        .iter()
        .map(|&k| series.terms[k].ln_abs_divdiff + lam_l * k as f64)
        .collect();
    if window.len() < 4 {
        used_upper_bounds = true;
        window = (0..series.terms.len()).collect();
        log_ratios = series
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| log_add(t.ln_abs_divdiff, t.ln_divdiff_err) + lam_l * k as f64)
            .collect();
    }
    let half = log_ratios.len() / 2;
    let first = log_ratios[..half.max(1)].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let second = log_ratios[half.max(1)..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_c_star = first.max(second);
    DecayReport {
        lambda,
        c_star: ln_c_star.exp(),
        ln_c_star,
        window,
        log_ratios,
        bounded: second <= first + LN_2,
        used_upper_bounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{default_nodes, sample};

    fn ctx(q: f64) -> QContext {
        QContext::new(q).unwrap()
    }

    fn gf(spec: &str, c: &QContext) -> GridFunction {
        sample(&spec.parse().unwrap(), c, default_nodes(c)).unwrap()
    }

    #[test]
    fn standard_cap_follows_conditioning() {
        assert_eq!(standard_order_cap(0.5), 7);
        assert_eq!(standard_order_cap(0.9), 15);
        let c = ctx(0.5).with_precision(PrecisionTier::Standard);
        let vals = vec![1.0; 12];
        assert!(matches!(divdiff_recursive(&vals, &c), Err(QError::OrderCap { k: 11, .. })));
        assert!(divdiff_recursive(&vals[..8], &c).is_ok());
    }

    #[test]
    fn rho_examples() {
        let c = ctx(0.5);
        let one = rho_coeffs(&gf("monomial:0", &c), &c, 200).unwrap();
        assert!((one.coeffs[1] - 1.0).abs() < 1e-15);
        assert!((one.radius_estimate - 2.0).abs() < 0.05);
        let t = sample(&"power:1.0".parse().unwrap(), &c, 220).unwrap();
        let id = rho_coeffs(&t, &c, 200).unwrap();
        assert!((id.coeffs[2] - 0.0625 / 0.375).abs() < 1e-15);
        assert!((id.radius_estimate - 4.0).abs() < 0.1);
        let sharp = rho_coeffs(&gf("sharp:2.0", &c), &c, 200).unwrap();
        assert!((sharp.radius_estimate - 2.0).abs() < 0.05);
        assert!(sharp.radius_band.0 <= sharp.radius_band.1);
    }

    #[test]
    fn g_examples() {
        let c = ctx(0.5);
        let h = gf("absshift:0.3", &c);
        assert!((g_eval(&h, Complex64::new(0.0, 0.0), &c).unwrap().re - h.at_one()).abs() < 1e-15);
        let one = gf("monomial:0", &c);
        let v = g_eval(&one, Complex64::new(-1.2, 0.7), &c).unwrap();
        assert!((v - 1.0).norm() < 1e-13);
        for k in 0..=30 {
            let z = Complex64::new(0.5f64.powi(k), 0.0);
            let a = durrmeyer::coeff_a(k as usize, &h, &c).unwrap();
            assert!((g_eval(&h, z, &c).unwrap().re - a).abs() <= 1e-11 * a.abs());
        }
        assert!(g_eval(&h, Complex64::new(2.0, 0.0), &c).is_err());
    }

    #[test]
    fn divdiff_examples() {
        let c = ctx(0.5);
        assert_eq!(divdiff_recursive(&[0.7], &c).unwrap(), 0.7);
        assert_eq!(divdiff_explicit(0, &[0.7], &c).unwrap(), 0.7);
        // g(z) = z at 1, q, q^2
        assert!(divdiff_recursive(&[1.0, 0.5, 0.25], &c).unwrap().abs() < 1e-30);
        // g(z) = 1/(1 - z/4)
        let g = |z: f64| 1.0 / (1.0 - 0.25 * z);
        let d1 = divdiff_recursive(&[g(1.0), g(0.5)], &c).unwrap();
        assert!((d1 - (g(1.0) - g(0.5)) / 0.5).abs() < 1e-15);
        assert!(divdiff_explicit(3, &[1.0; 4], &c).unwrap().abs() < 1e-30);
        let vals: Vec<f64> = (0..=10).map(|j| g(0.5f64.powi(j))).collect();
        let r = divdiff_recursive(&vals, &c).unwrap();
        let e = divdiff_explicit(10, &vals, &c).unwrap();
        assert!((r - e).abs() <= 1e-6 * r.abs());
    }

    #[test]
    fn newton_table_is_symmetric_in_the_nodes() {
        let a = MpArith::new(256);
        let q: f64 = 0.5;
        let nodes: Vec<f64> = (0..8).map(|j| q.powi(j)).collect();
        let vals: Vec<f64> = nodes.iter().map(|x| (1.0 + x).ln() + x * x * x).collect();
        let fwd = newton_divdiff(
            &a,
            &nodes.iter().map(|x| a.from_f64(*x)).collect::<Vec<_>>(),
            &vals.iter().map(|x| a.from_f64(*x)).collect::<Vec<_>>(),
        );
        let rev = newton_divdiff(
            &a,
            &nodes.iter().rev().map(|x| a.from_f64(*x)).collect::<Vec<_>>(),
            &vals.iter().rev().map(|x| a.from_f64(*x)).collect::<Vec<_>>(),
        );
        let (x, y) = (a.to_f64(&fwd[7]), a.to_f64(&rev[7]));
        assert!((x - y).abs() <= 1e-10 * x.abs());
        let qn = divdiff_recursive(&vals, &ctx(0.5)).unwrap();
        assert!((qn - x).abs() <= 1e-12 * x.abs());
    }

    #[test]
    fn contour_examples() {
        let c = ctx(0.5);
        let g = |z: Complex64| -> Result<Complex64> { Ok(1.0 / (1.0 - 0.25 * z)) };
        let d0 = divdiff_contour(g, 0, 1.5, DEFAULT_QUAD_NODES, &c).unwrap();
        assert!((d0 - 4.0 / 3.0).norm() < 1e-13);
        let quad = |z: Complex64| -> Result<Complex64> { Ok(z * z - 3.0 * z) };
        assert!(divdiff_contour(quad, 3, 1.3, DEFAULT_QUAD_NODES, &c).unwrap().norm() < 1e-13);
        let d8 = divdiff_contour(g, 8, 1.5, DEFAULT_QUAD_NODES, &c).unwrap();
        // b^k / prod_i (1 - b q^i) for 1/(1 - b z)
        let r = 0.25f64.powi(8) / qcore::qpoch_finite_re(0.25, 9, &c);
        assert!((d8.re - r).abs() < 1e-8 * r.abs() && d8.im.abs() < 1e-12, "{d8} {r}");
        assert!(divdiff_contour(g, 2, 1.0, 64, &c).is_err());
        assert!(divdiff_contour(g, 2, 1.1, 64, &c).is_err());
    }

    #[test]
    fn node_values_match_literal_coefficients() {
        for q in [0.3, 0.5, 0.8] {
            let c = ctx(q);
            for spec in FunctionSpec::catalog() {
                let h = sample(&spec, &c, default_nodes(&c)).unwrap();
                let exact = node_values(&h, 12, &c).unwrap();
                for (k, v) in exact.iter().enumerate() {
                    let lit = durrmeyer::coeff_a(k, &h, &c).unwrap();
                    assert!((v - lit).abs() <= 1e-13 * h.sup_norm(), "{spec} q={q} k={k}: {v} vs {lit}");
                }
            }
        }
    }

    #[test]
    fn data_route_matches_formula_route() {
        let c = ctx(0.5);
        let formula = gf("absshift:0.3", &c);
        let data = GridFunction::new(0.5, formula.values().to_vec(), formula.limit0(), "data").unwrap();
        let a = node_values(&formula, 20, &c).unwrap();
        let b = node_values(&data, 20, &c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn taylor_examples() {
        let c = ctx(0.5);
        let one = taylor_coeffs(&gf("monomial:0", &c), 20, &c).unwrap();
        assert!((one.terms[0].coeff - 1.0).abs() < 1e-15);
        assert!(one.terms[1..].iter().all(|t| t.coeff.abs() <= 1e-10));
        let id = taylor_coeffs(&gf("monomial:1", &c), 20, &c).unwrap();
        assert!((id.terms[0].coeff - 0.5).abs() < 1e-15 && (id.terms[1].coeff - 0.5).abs() < 1e-15);
        assert!(id.terms[2..].iter().all(|t| t.coeff.abs() <= 1e-10));
        let cube = taylor_coeffs(&gf("monomial:3", &c), 20, &c).unwrap();
        assert!(cube.terms[4..].iter().all(|t| t.coeff.abs() <= 1e-9 && t.coeff.abs() <= t.coeff_err()));
    }

    #[test]
    fn taylor_agrees_with_closed_form_for_the_extremal_family() {
        let c = ctx(0.5);
        let s = taylor_coeffs(&gf("sharp:2.0", &c), 25, &c).unwrap();
        let beta: f64 = 0.25;
        let mut poch = 1.0 - beta;
        for (k, t) in s.terms.iter().enumerate() {
            if k > 0 {
                poch *= 1.0 - beta * 0.5f64.powi(k as i32);
            }
            let exact = beta.powi(k as i32) / poch;
            assert!((t.divdiff - exact).abs() <= 1e-12 * exact, "k={k}");
            assert!(t.is_reliable());
            assert_eq!(t.sign, if k % 2 == 0 { 1 } else { -1 });
        }
    }

    #[test]
    fn eval_taylor_examples() {
        let c = ctx(0.5);
        let h = gf("absshift:0.5", &c);
        let s = taylor_coeffs(&h, 60, &c).unwrap();
        assert_eq!(eval_taylor(&s, Complex64::new(0.0, 0.0)).unwrap().re, s.terms[0].coeff);
        let z = Complex64::new(-2.0, 1.0);
        let t = eval_taylor(&s, z).unwrap();
        let e = durrmeyer::eval_entire(&h, z, &c).unwrap();
        assert!((t - e).norm() <= 1e-8 * e.norm());
        let one = taylor_coeffs(&gf("monomial:0", &c), 60, &c).unwrap();
        for z in [Complex64::new(30.0, -4.0), Complex64::new(-1e4, 1e3)] {
            assert!((eval_taylor(&one, z).unwrap() - 1.0).norm() < 1e-9);
        }
        let big = eval_taylor_scaled(&one, Complex64::new(1e9, 0.0));
        assert!(big.ln_abs().abs() < 1e-9);
    }

    #[test]
    fn decay_examples() {
        let c = ctx(0.5);
        let one = taylor_coeffs(&gf("monomial:0", &c), 25, &c).unwrap();
        assert!(decay_check(&one, 5.0).bounded);
        let sharp = taylor_coeffs(&gf("sharp:2.0", &c), 25, &c).unwrap();
        let below = decay_check(&sharp, 0.9);
        assert!(below.bounded && !below.used_upper_bounds);
        assert!(!decay_check(&sharp, 2.5).bounded);
    }

    #[test]
    fn order_for_radius_grows_with_radius() {
        assert!(taylor_order_for_radius(1e10, 0.5) > taylor_order_for_radius(1e5, 0.5));
        assert!(taylor_order_for_radius(1e10, 0.8) > taylor_order_for_radius(1e10, 0.5));
    }
}
