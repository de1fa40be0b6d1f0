//! Exact integers and rationals, dense univariate polynomials, rational
//! functions, small dense linear algebra and mid-rad ball arithmetic.

mod ball;
mod linalg;
mod mag;
mod poly;
mod ratfunc;

pub use ball::{format_decimal, rational_mag_down, rational_mag_up, Ball, BallOp};
pub use linalg::{nullspace, rref, solve};
pub use mag::Mag;
pub use poly::Poly;
pub use ratfunc::RationalFunction;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

/// Exact arbitrary-size rational; always reduced with positive denominator.
pub type Rational = BigRational;

/// Arithmetic operations exposed through [`rat_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn rat_arith(op: RatOp, a: &Rational, b: &Rational) -> Result<Rational> {
    Ok(match op {
        RatOp::Add => a + b,
        RatOp::Sub => a - b,
        RatOp::Mul => a * b,
        RatOp::Div => {
            if b.is_zero() {
                return Err(Error::DivisionByZero);
            }
            a / b
        }
    })
}

pub fn checked_div(a: &Rational, b: &Rational) -> Result<Rational> {
    rat_arith(RatOp::Div, a, b)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn bigint_rat(n: BigInt) -> Rational {
    Rational::from_integer(n)
}

/// Parses `"-7/32"`, `"12"` or `"+3"`. Decimal points are rejected.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let err = || Error::Parse(format!("not an exact rational: `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let n: BigInt = n.trim_start_matches('+').parse().map_err(|_| err())?;
    let d: BigInt = d.parse().map_err(|_| err())?;
    if d.is_zero() {
        return Err(Error::DivisionByZero);
    }
    Ok(Rational::new(n, d))
}

pub fn format_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `base^e` for a possibly negative exponent.
pub fn rat_pow(base: &Rational, e: i64) -> Result<Rational> {
    if e >= 0 {
        Ok(num_traits::pow(base.clone(), e as usize))
    } else {
        if base.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(num_traits::pow(base.recip(), (-e) as usize))
    }
}

/// Binomial coefficient with the convention C(n, k) = 0 unless 0 <= k <= n.
pub fn binomial(n: i64, k: i64) -> BigInt {
    if n < 0 || k < 0 || k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Least common multiple of the denominators of `vals`.
pub fn denominator_lcm<'a>(vals: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    vals.into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Greatest common divisor of the numerators of `vals` (zero when all vanish).
pub fn numerator_gcd<'a>(vals: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    vals.into_iter()
        .fold(BigInt::zero(), |acc, v| acc.gcd(v.numer()))
}

pub fn is_probable_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Integer floor of the `n`-th root of a nonnegative integer.
pub fn iroot(x: &BigInt, n: u32) -> BigInt {
    assert!(!x.is_negative() && n >= 1);
    if x.is_zero() || n == 1 {
        return x.clone();
    }
    x.nth_root(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_examples() {
        assert_eq!(rat_arith(RatOp::Mul, &rat(3, 4), &rat(8, 9)).unwrap(), rat(2, 3));
        assert_eq!(
            rat_arith(RatOp::Add, &rat(-7, 32), &rat(-27, 128)).unwrap(),
            rat(-55, 128)
        );
        assert_eq!(rat_arith(RatOp::Div, &int(1), &int(0)), Err(Error::DivisionByZero));
        assert_eq!(rat(0, 5).denom(), &BigInt::one());
        assert_eq!(rat(6, -4), rat(-3, 2));
    }

    #[test]
    fn parse_and_format() {
        assert_eq!(parse_rational("-7/32").unwrap(), rat(-7, 32));
        assert_eq!(parse_rational(" +12 ").unwrap(), int(12));
        assert!(parse_rational("1.5").is_err());
        assert_eq!(parse_rational("1/0"), Err(Error::DivisionByZero));
        assert_eq!(format_rational(&rat(10, -4)), "-5/2");
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 3), BigInt::from(20));
        assert_eq!(binomial(0, 1), BigInt::zero());
        assert_eq!(binomial(-1, 0), BigInt::zero());
        assert_eq!(binomial(0, 0), BigInt::one());
    }
}
