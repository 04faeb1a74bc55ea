//! Integer partitions, generalized Pochhammer symbols and the multivariate
//! gamma function: the scalar layer under every matrix-argument series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A partition of a non-negative integer: nonincreasing positive parts.
///
/// The empty partition is the unique partition of 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition(Vec<usize>);

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.iter().any(|&p| p == 0) {
            return Err(Error::InvalidParams("partition parts must be positive".into()));
        }
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParams("partition parts must be nonincreasing".into()));
        }
        Ok(Partition(parts))
    }

    pub fn empty() -> Self {
        Partition(Vec::new())
    }

    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// The weight k of kappa ⊢ k.
    pub fn weight(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn num_parts(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `k` with at most `max_parts` parts, in descending
/// lexicographic order. The order is load-bearing: every series in this crate
/// accumulates shells in this order so truncation diagnostics are reproducible.
pub fn enumerate_partitions(k: usize, max_parts: usize) -> Vec<Partition> {
    assert!(max_parts >= 1, "max_parts must be >= 1");
    let mut out = Vec::new();
    let mut acc = Vec::new();
    fn rec(rem: usize, mx: usize, slots: usize, acc: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition(acc.clone()));
            return;
        }
        if slots == 0 {
            return;
        }
        let hi = rem.min(mx);
        for p in (1..=hi).rev() {
            acc.push(p);
            rec(rem - p, p, slots - 1, acc, out);
            acc.pop();
        }
    }
    rec(k, k.max(1), max_parts, &mut acc, &mut out);
    out
}

/// Sign-and-log representation of a real number, for products of gamma
/// ratios that overflow f64 long before they stop being meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogValue {
    /// -1, 0 or +1.
    pub sign: i8,
    /// ln|x|; `f64::NEG_INFINITY` when sign == 0.
    pub log_magnitude: f64,
}

impl LogValue {
    pub const ZERO: LogValue = LogValue { sign: 0, log_magnitude: f64::NEG_INFINITY };
    pub const ONE: LogValue = LogValue { sign: 1, log_magnitude: 0.0 };

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            LogValue::ZERO
        } else {
            LogValue { sign: if x > 0.0 { 1 } else { -1 }, log_magnitude: x.abs().ln() }
        }
    }

    pub fn from_ln(ln: f64) -> Self {
        LogValue { sign: 1, log_magnitude: ln }
    }

    pub fn to_f64(self) -> f64 {
        self.sign as f64 * self.log_magnitude.exp()
    }

    pub fn is_zero(self) -> bool {
        self.sign == 0
    }

    pub fn mul(self, rhs: LogValue) -> LogValue {
        if self.sign == 0 || rhs.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            sign: self.sign * rhs.sign,
            log_magnitude: self.log_magnitude + rhs.log_magnitude,
        }
    }

    pub fn div(self, rhs: LogValue) -> LogValue {
        assert!(rhs.sign != 0, "LogValue division by zero");
        if self.sign == 0 {
            return LogValue::ZERO;
        }
        LogValue {
            sign: self.sign * rhs.sign,
            log_magnitude: self.log_magnitude - rhs.log_magnitude,
        }
    }

    pub fn recip(self) -> LogValue {
        LogValue::ONE.div(self)
    }
}

impl std::ops::Mul for LogValue {
    type Output = LogValue;
    fn mul(self, rhs: LogValue) -> LogValue {
        LogValue::mul(self, rhs)
    }
}

impl std::ops::Div for LogValue {
    type Output = LogValue;
    fn div(self, rhs: LogValue) -> LogValue {
        LogValue::div(self, rhs)
    }
}

/// ln|Gamma(x)| with the sign of Gamma(x).
pub(crate) fn ln_gamma_signed(x: f64) -> (f64, i8) {
    let (ln, sgn) = libm::lgamma_r(x);
    (ln, if sgn >= 0 { 1 } else { -1 })
}

/// ln(n!); table-backed for the small n the series loops hammer.
pub fn factorial_ln(n: usize) -> f64 {
    static TABLE: std::sync::OnceLock<[f64; 64]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = [0.0; 64];
        for (i, slot) in t.iter_mut().enumerate() {
            *slot = libm::lgamma_r(i as f64 + 1.0).0;
        }
        t
    });
    if n < 64 {
        table[n]
    } else {
        libm::lgamma_r(n as f64 + 1.0).0
    }
}

fn is_gamma_pole(x: f64) -> bool {
    x < 0.5 && (x - x.round()).abs() < 1e-12
}

/// Generalized Pochhammer symbol (a)_kappa = prod_i (a - (i-1)/2)_{kappa_i},
/// with (x)_n the rising factorial. Exact product in f64; zeros and negative
/// values are legitimate.
pub fn gen_pochhammer(a: f64, kappa: &Partition) -> f64 {
    let mut prod = 1.0;
    for (i, &ki) in kappa.parts().iter().enumerate() {
        let base = a - i as f64 / 2.0;
        for j in 0..ki {
            prod *= base + j as f64;
        }
    }
    prod
}

/// Sign-and-log form of the generalized Pochhammer symbol.
pub fn gen_pochhammer_ln(a: f64, kappa: &Partition) -> LogValue {
    let mut sign: i8 = 1;
    let mut ln = 0.0;
    for (i, &ki) in kappa.parts().iter().enumerate() {
        let base = a - i as f64 / 2.0;
        for j in 0..ki {
            let t = base + j as f64;
            if t == 0.0 {
                return LogValue::ZERO;
            }
            if t < 0.0 {
                sign = -sign;
            }
            ln += t.abs().ln();
        }
    }
    LogValue { sign, log_magnitude: ln }
}

/// Multivariate gamma function in log space, by the product formula
/// Gamma_m[a] = pi^(m(m-1)/4) prod_{i=1..m} Gamma(a - (i-1)/2).
///
/// Errors with the offending factor index when any argument hits a pole of
/// the scalar gamma function.
pub fn mv_gamma_ln(m: usize, a: f64) -> Result<LogValue> {
    assert!(m >= 1, "dimension must be >= 1");
    let mut sign: i8 = 1;
    let mut ln = (m * (m - 1)) as f64 / 4.0 * std::f64::consts::PI.ln();
    for i in 1..=m {
        let arg = a - (i - 1) as f64 / 2.0;
        if is_gamma_pole(arg) {
            return Err(Error::GammaPole { arg, index: i, m });
        }
        let (l, s) = ln_gamma_signed(arg);
        ln += l;
        sign *= s;
    }
    Ok(LogValue { sign, log_magnitude: ln })
}
