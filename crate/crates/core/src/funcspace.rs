//! Input functions on `[0,1]`.
//!
//! The operator only ever looks at `f(q^j)` and `f(0)`, so a function is
//! stored as exactly that data: a [`GridFunction`]. Past the last stored node
//! the values are extrapolated by the constant `f(0)`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{QError, Result};
use crate::extremal;
use crate::qcore::QContext;

/// Smallest node count used by [`default_nodes`].
pub const MIN_DEFAULT_NODES: usize = 40;

/// Node data of a function on `[0,1]`: `values[j] = f(q^j)` and `limit0 = f(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    q: f64,
    values: Vec<f64>,
    limit0: f64,
    label: String,
    source: Option<FunctionSpec>,
}

impl GridFunction {
    pub fn new(q: f64, values: Vec<f64>, limit0: f64, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(QError::InvalidParameter("a grid function needs at least one node".into()));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(QError::Domain(format!("value at node {j} is not finite")));
        }
        if !limit0.is_finite() {
            return Err(QError::Domain("limit value f(0) is not finite".into()));
        }
        Ok(Self {
            q,
            values,
            limit0,
            label: label.into(),
            source: None,
        })
    }

    /// Attach the catalog formula the node data were sampled from.
    pub fn with_source(mut self, spec: FunctionSpec) -> Self {
        self.source = Some(spec);
        self
    }

    /// The catalog formula behind the data, if any; lets high-precision
    /// routines evaluate `f` past the stored window instead of using the
    /// constant tail.
    pub fn source(&self) -> Option<&FunctionSpec> {
        self.source.as_ref()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn limit0(&self) -> f64 {
        self.limit0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Index of the last stored node.
    pub fn last_node(&self) -> usize {
        self.values.len() - 1
    }

    /// `f(1)`.
    pub fn at_one(&self) -> f64 {
        self.values[0]
    }

    /// `f(q^j)`, with `f(0)` for nodes past the stored window.
    pub fn node(&self, j: usize) -> f64 {
        self.values.get(j).copied().unwrap_or(self.limit0)
    }

    pub fn value_at_node(&self, j: i64) -> Result<f64> {
        if j < 0 {
            return Err(QError::Domain(format!("node index must be nonnegative, got {j}")));
        }
        Ok(self.node(j as usize))
    }

    /// `max(|f(0)|, max_j |f(q^j)|)`.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(self.limit0.abs(), |m, v| m.max(v.abs()))
    }

    /// `a f + b h` node-wise; both inputs are padded with their limits.
    pub fn linear_combination(a: f64, f: &Self, b: f64, h: &Self) -> Result<Self> {
        if f.q != h.q {
            return Err(QError::InvalidParameter("grid functions use different q".into()));
        }
        let n = f.values.len().max(h.values.len());
        let values = (0..n).map(|j| a * f.node(j) + b * h.node(j)).collect();
        Self::new(
            f.q,
            values,
            a * f.limit0 + b * h.limit0,
            format!("{a}*({})+{b}*({})", f.label, h.label),
        )
    }

    pub fn check_q(&self, ctx: &QContext) -> Result<()> {
        if self.q != ctx.q() {
            return Err(QError::InvalidParameter(format!(
                "grid function sampled at q = {} used with q = {}",
                self.q,
                ctx.q()
            )));
        }
        Ok(())
    }

    /// Render in the `j,value` / `limit,<value>` ingestion format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,value\n");
        for (j, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{j},{}\n", crate::cli::fmt_float(*v)));
        }
        out.push_str(&format!("limit,{}\n", crate::cli::fmt_float(self.limit0)));
        out
    }

    /// Read the `j,value` / `limit,<value>` format.
    pub fn from_csv_path(path: &Path, q: f64) -> Result<Self> {
        let input_err = |msg: String| QError::Input {
            path: path.to_path_buf(),
            msg,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| input_err(e.to_string()))?;
        let headers = reader.headers().map_err(|e| input_err(e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "j" || &headers[1] != "value" {
            return Err(input_err("header must be `j,value`".into()));
        }
        let mut values = Vec::new();
        let mut limit = None;
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| input_err(e.to_string()))?;
            let row = line + 2;
            if limit.is_some() {
                return Err(input_err(format!("row {row}: data after the limit row")));
            }
            if rec.len() != 2 {
                return Err(input_err(format!("row {row}: expected 2 fields")));
            }
            let value: f64 = rec[1]
                .parse()
                .map_err(|_| input_err(format!("row {row}: bad value {:?}", &rec[1])))?;
            if &rec[0] == "limit" {
                limit = Some(value);
                continue;
            }
            let j: usize = rec[0]
                .parse()
                .map_err(|_| input_err(format!("row {row}: bad node index {:?}", &rec[0])))?;
            if j != values.len() {
                return Err(input_err(format!(
                    "row {row}: node {j} out of sequence (expected {})",
                    values.len()
                )));
            }
            values.push(value);
        }
        let limit0 = limit.ok_or_else(|| input_err("missing `limit,<value>` row".into()))?;
        if values.is_empty() {
            return Err(input_err("no node rows".into()));
        }
        Self::new(q, values, limit0, format!("file:{}", path.display()))
            .map_err(|e| input_err(e.to_string()))
    }
}

/// A named catalog function or a file source, parsed from e.g. `monomial:2`.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    Monomial(u32),
    /// Coefficients `c0, c1, ..., cm` of `c0 + c1 x + ... + cm x^m`.
    Poly(Vec<f64>),
    /// `x^alpha`, `alpha > 0`.
    Power(f64),
    /// `|x - c|`.
    AbsShift(f64),
    Exp,
    /// Extremal family with decay exponent `lambda > 1`.
    Sharp(f64),
    File(PathBuf),
}

impl FunctionSpec {
    /// Pointwise value for the analytic catalog entries; `None` for data-backed ones.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            Self::Monomial(m) => Some(x.powi(*m as i32)),
            Self::Poly(c) => Some(c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)),
            Self::Power(alpha) => Some(if x == 0.0 { 0.0 } else { x.powf(*alpha) }),
            Self::AbsShift(c) => Some((x - c).abs()),
            Self::Exp => Some(x.exp()),
            Self::Sharp(_) | Self::File(_) => None,
        }
    }

    /// The catalog used by the verification suites (file sources excluded).
    pub fn catalog() -> Vec<FunctionSpec> {
        vec![
            Self::Monomial(0),
            Self::Monomial(1),
            Self::Monomial(2),
            Self::Monomial(3),
            Self::Poly(vec![1.0, -2.0, 0.5, 3.0]),
            Self::Power(0.5),
            Self::Power(1.5),
            Self::AbsShift(0.5),
            Self::Exp,
            Self::Sharp(2.0),
        ]
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Monomial(m) => write!(f, "monomial:{m}"),
            Self::Poly(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "poly:{}", parts.join(","))
            }
            Self::Power(a) => write!(f, "power:{a}"),
            Self::AbsShift(c) => write!(f, "absshift:{c}"),
            Self::Exp => write!(f, "exp"),
            Self::Sharp(l) => write!(f, "sharp:{l}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

fn parse_real(text: &str, pos: usize) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| QError::Parse {
        pos,
        msg: format!("expected a real number, found {text:?}"),
    })?;
    if !v.is_finite() {
        return Err(QError::Parse {
            pos,
            msg: format!("parameter must be finite, found {text:?}"),
        });
    }
    Ok(v)
}

impl FromStr for FunctionSpec {
    type Err = QError;

    fn from_str(text: &str) -> Result<Self> {
        let (name, arg) = match text.find(':') {
            Some(i) => (&text[..i], Some((&text[i + 1..], i + 1))),
            None => (text, None),
        };
        let need_arg = || {
            arg.ok_or_else(|| QError::Parse {
                pos: text.len(),
                msg: format!("`{name}` needs a parameter after ':'"),
            })
        };
        match name {
            "monomial" => {
                let (a, pos) = need_arg()?;
                let m: u32 = a.trim().parse().map_err(|_| QError::Parse {
                    pos,
                    msg: format!("expected a nonnegative integer degree, found {a:?}"),
                })?;
                Ok(Self::Monomial(m))
            }
            "poly" => {
                let (a, pos) = need_arg()?;
                let mut coeffs = Vec::new();
                let mut offset = pos;
                for part in a.split(',') {
                    coeffs.push(parse_real(part, offset)?);
                    offset += part.len() + 1;
                }
                Ok(Self::Poly(coeffs))
            }
            "power" => {
                let (a, pos) = need_arg()?;
                let alpha = parse_real(a, pos)?;
                if alpha <= 0.0 {
                    return Err(QError::Parse {
                        pos,
                        msg: format!("power exponent must be positive, found {alpha}"),
                    });
                }
                Ok(Self::Power(alpha))
            }
            "absshift" => {
                let (a, pos) = need_arg()?;
                Ok(Self::AbsShift(parse_real(a, pos)?))
            }
            "exp" => match arg {
                None => Ok(Self::Exp),
                Some((_, pos)) => Err(QError::Parse {
                    pos,
                    msg: "`exp` takes no parameter".into(),
                }),
            },
            "sharp" => {
                let (a, pos) = need_arg()?;
                let lambda = parse_real(a, pos)?;
                if lambda <= 1.0 {
                    return Err(QError::Parse {
                        pos,
                        msg: format!("extremal exponent must exceed 1, found {lambda}"),
                    });
                }
                Ok(Self::Sharp(lambda))
            }
            "file" => {
                let (a, pos) = need_arg()?;
                let path = PathBuf::from(a);
                if !path.is_file() {
                    return Err(QError::Parse {
                        pos,
                        msg: format!("no such file: {a}"),
                    });
                }
                Ok(Self::File(path))
            }
            _ => Err(QError::Parse {
                pos: 0,
                msg: format!("unknown function name {name:?}"),
            }),
        }
    }
}

/// `max(40, ceil(ln eps_tail / ln q))`, so that `q^{J+1}/(1-q)` stays near `eps_tail`.
pub fn default_nodes(ctx: &QContext) -> usize {
    let n = (ctx.eps_tail().ln() / ctx.q().ln()).ceil();
    MIN_DEFAULT_NODES.max(n as usize)
}

/// Node data for `spec` on `q^0, ..., q^J` plus `f(0)`.
///
/// File sources keep the node count of the file.
pub fn sample(spec: &FunctionSpec, ctx: &QContext, nodes: usize) -> Result<GridFunction> {
    if nodes < 1 {
        return Err(QError::InvalidParameter("node count J must be at least 1".into()));
    }
    let q = ctx.q();
    match spec {
        FunctionSpec::Sharp(lambda) => {
            let nodes = nodes.max(extremal::recommended_nodes(*lambda, ctx)?);
            Ok(extremal::make_extremal(*lambda, ctx, nodes)?.into_grid())
        }
        FunctionSpec::File(path) => GridFunction::from_csv_path(path, q),
        analytic => {
            let mut values = Vec::with_capacity(nodes + 1);
            let mut x = 1.0;
            for _ in 0..=nodes {
                values.push(analytic.eval(x).expect("analytic catalog entry"));
                x *= q;
            }
            let limit0 = analytic.eval(0.0).expect("analytic catalog entry");
            Ok(GridFunction::new(q, values, limit0, analytic.to_string())?.with_source(analytic.clone()))
        }
    }
}
