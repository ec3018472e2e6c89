use num_complex::Complex64;

/// A complex number stored as `exp(ln_scale) * scaled`.
///
/// Used wherever an entire function is evaluated at radii where its raw value
/// leaves double range; `scaled` is typically of modest size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledValue {
    pub ln_scale: f64,
    pub scaled: Complex64,
}

impl ScaledValue {
    pub fn unscaled(value: Complex64) -> Self {
        Self {
            ln_scale: 0.0,
            scaled: value,
        }
    }

    /// `ln |value|`; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.ln_scale + self.scaled.norm().ln()
    }

    pub fn arg(&self) -> f64 {
        self.scaled.arg()
    }

    /// The plain value, or `None` when it does not fit in a double.
    pub fn to_complex(&self) -> Option<Complex64> {
        let ln_abs = self.ln_abs();
        if ln_abs > f64::MAX.ln() {
            return None;
        }
        if ln_abs == f64::NEG_INFINITY {
            return Some(Complex64::new(0.0, 0.0));
        }
        Some(Complex64::from_polar(ln_abs.exp(), self.arg()))
    }

    /// Sum of terms given as `(ln|t|, arg t)`, stored relative to the largest term.
    pub fn log_sum(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let terms: Vec<(f64, f64)> = terms
            .into_iter()
            .filter(|(l, _)| *l > f64::NEG_INFINITY)
            .collect();
        let top = terms
            .iter()
            .map(|(l, _)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return Self {
                ln_scale: 0.0,
                scaled: Complex64::new(0.0, 0.0),
            };
        }
        let scaled = terms
            .iter()
            .map(|(l, a)| Complex64::from_polar((l - top).exp(), *a))
            .sum();
        Self {
            ln_scale: top,
            scaled,
        }
    }

    /// Re-express relative to `exp(ln_scale)`.
    pub fn rescaled(&self, ln_scale: f64) -> Self {
        let shift = self.ln_scale - ln_scale;
        Self {
            ln_scale,
            scaled: self.scaled * shift.exp(),
        }
    }
}
