use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::format::fmt17;

/// Arithmetic backend of a computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backend {
    /// Arbitrary-precision integer fractions, no rounding.
    Rational,
    /// IEEE double precision.
    Float,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Rational => "rational",
            Backend::Float => "float",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" => Ok(Backend::Rational),
            "float" => Ok(Backend::Float),
            other => Err(Error::Parse(format!("unknown backend {other:?}"))),
        }
    }
}

/// Field of scalars a recurrence or closed form is evaluated over.
pub trait Scalar:
    Clone + fmt::Debug + PartialOrd + Num + Signed + Send + Sync + 'static
{
    const BACKEND: Backend;

    fn from_i64(v: i64) -> Self;

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num) / Self::from_i64(den)
    }

    fn to_f64(&self) -> f64;

    /// Exact rational value. `None` only for non-finite floats.
    fn to_rational(&self) -> Option<BigRational>;

    /// Converts a double into this backend; exact for the rational backend.
    fn from_f64(v: f64) -> Option<Self>;

    /// Nearest value of this backend; exact for the rational backend.
    fn from_rational(r: &BigRational) -> Self;

    fn is_finite_value(&self) -> bool;

    /// Text form used in exports: `p/q` for rationals, 17 significant
    /// digits for floats.
    fn render(&self) -> String;
}

impl Scalar for f64 {
    const BACKEND: Backend = Backend::Float;

    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<BigRational> {
        BigRational::from_float(*self)
    }

    fn from_f64(v: f64) -> Option<Self> {
        Some(v)
    }

    fn from_rational(r: &BigRational) -> Self {
        Scalar::to_f64(r)
    }

    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }

    fn render(&self) -> String {
        fmt17(*self)
    }
}

impl Scalar for BigRational {
    const BACKEND: Backend = Backend::Rational;

    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn from_f64(v: f64) -> Option<Self> {
        BigRational::from_float(v)
    }

    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn is_finite_value(&self) -> bool {
        true
    }

    fn render(&self) -> String {
        format!("{}/{}", self.numer(), self.denom())
    }
}

/// A CLI or file input: exact when written as an integer or `p/q`, float
/// when written with a decimal point or exponent.
#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(BigRational),
    Float(f64),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(r) => Scalar::to_f64(r),
            Number::Float(x) => *x,
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    /// Exact value; floats are converted bit-exactly.
    pub fn to_rational(&self) -> Option<BigRational> {
        match self {
            Number::Exact(r) => Some(r.clone()),
            Number::Float(x) => BigRational::from_float(*x),
        }
    }

    pub fn render(&self) -> String {
        match self {
            Number::Exact(r) if r.is_integer() => r.numer().to_string(),
            Number::Exact(r) => Scalar::render(r),
            Number::Float(x) => fmt17(*x),
        }
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl FromStr for Number {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_number(s)
    }
}

/// Parses `p/q`, an integer, or a decimal.
pub fn parse_number(text: &str) -> Result<Number> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim())
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let d = BigInt::from_str(d.trim())
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {s:?}")));
        }
        return Ok(Number::Exact(BigRational::new(n, d)));
    }
    if let Ok(n) = BigInt::from_str(s) {
        return Ok(Number::Exact(BigRational::from_integer(n)));
    }
    let x = f64::from_str(s).map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("non-finite number {s:?}")));
    }
    Ok(Number::Float(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_and_decimals() {
        assert_eq!(
            parse_number("21/16").unwrap(),
            Number::Exact(BigRational::ratio(21, 16))
        );
        assert_eq!(parse_number("-3").unwrap(), Number::Exact(BigRational::from_i64(-3)));
        assert_eq!(parse_number("0.5").unwrap(), Number::Float(0.5));
        assert_eq!(parse_number("1e-3").unwrap(), Number::Float(1e-3));
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("abc").is_err());
        assert!(parse_number("").is_err());
    }

    #[test]
    fn rational_render_keeps_fraction() {
        assert_eq!(BigRational::ratio(-6, 4).render(), "-3/2");
        assert_eq!(BigRational::from_i64(2).render(), "2/1");
        assert_eq!(Number::Exact(BigRational::from_i64(2)).render(), "2");
    }
}
