use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{iroot, Mag, Rational};
use crate::error::{Error, Result};

/// Mid-rad real enclosure `[mid - rad, mid + rad]` with a dyadic midpoint
/// `man * 2^exp` and a [`Mag`] radius.
///
/// Every operation returns a ball containing the exact result for all
/// points of the input balls. `prec` is the relative working precision of
/// the midpoint in bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ball {
    man: BigInt,
    exp: i64,
    rad: Mag,
    prec: u32,
}

/// Operations exposed through [`Ball::arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallOp {
    Add,
    Sub,
    Mul,
    Div,
}

fn round_mid(man: BigInt, exp: i64, prec: u32) -> (BigInt, i64, Mag) {
    let bits = man.bits();
    if bits <= prec as u64 {
        return (man, exp, Mag::ZERO);
    }
    let shift = bits - prec as u64;
    let rounded = &man >> shift as usize;
    let err = if (&rounded << shift as usize) == man {
        Mag::ZERO
    } else {
        Mag::pow2(exp + shift as i64)
    };
    (rounded, exp + shift as i64, err)
}

impl Ball {
    pub fn zero(prec: u32) -> Ball {
        Ball { man: BigInt::zero(), exp: 0, rad: Mag::ZERO, prec }
    }

    pub fn from_int(n: i64, prec: u32) -> Ball {
        Ball::from_bigint(&BigInt::from(n), prec)
    }

    pub fn from_bigint(n: &BigInt, prec: u32) -> Ball {
        let (man, exp, rad) = round_mid(n.clone(), 0, prec);
        Ball { man, exp, rad, prec }
    }

    /// Ball `man * 2^exp +- rad` rounded to `prec` bits.
    pub fn from_dyadic(man: BigInt, exp: i64, rad: Mag, prec: u32) -> Ball {
        let (man, exp, err) = round_mid(man, exp, prec);
        Ball { man, exp, rad: rad.add_up(&err), prec }
    }

    /// Enclosure of a rational; exact when the rational is dyadic and fits.
    pub fn from_rational(r: &Rational, prec: u32) -> Ball {
        let (p, q) = (r.numer(), r.denom());
        if p.is_zero() {
            return Ball::zero(prec);
        }
        let tz = q.trailing_zeros().unwrap_or(0);
        if (q >> tz as usize).is_one() {
            return Ball::from_dyadic(p.clone(), -(tz as i64), Mag::ZERO, prec);
        }
        let s = prec as i64 + q.bits() as i64 - p.bits() as i64 + 2;
        let (num, den) = if s >= 0 {
            (p << s as usize, q.clone())
        } else {
            (p.clone(), q << (-s) as usize)
        };
        let (man, rem) = num.div_mod_floor(&den);
        let rad = if rem.is_zero() { Mag::ZERO } else { Mag::pow2(-s) };
        Ball::from_dyadic(man, -s, rad, prec)
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn radius(&self) -> Mag {
        self.rad
    }

    pub fn mid_dyadic(&self) -> (&BigInt, i64) {
        (&self.man, self.exp)
    }

    pub fn mid_rational(&self) -> Rational {
        dyadic_to_rational(&self.man, self.exp)
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    pub fn with_prec(&self, prec: u32) -> Ball {
        Ball::from_dyadic(self.man.clone(), self.exp, self.rad, prec)
    }

    /// Widens the radius by `err`.
    pub fn add_error(&self, err: &Mag) -> Ball {
        Ball { rad: self.rad.add_up(err), ..self.clone() }
    }

    /// Upper bound of `|x|` over the ball.
    pub fn mag_upper(&self) -> Mag {
        Mag::from_bigint_up(&self.man, self.exp).add_up(&self.rad)
    }

    /// Lower bound of `|x|` over the ball (zero when it contains zero).
    pub fn mag_lower(&self) -> Mag {
        Mag::from_bigint_down(&self.man, self.exp).sub_down(&self.rad)
    }

    /// Exact comparison `|mid| <= rad`.
    pub fn contains_zero(&self) -> bool {
        if self.man.is_zero() {
            return true;
        }
        if self.rad.is_zero() {
            return false;
        }
        cmp_dyadic(self.man.magnitude().clone().into(), self.exp, &self.rad) != std::cmp::Ordering::Greater
    }

    pub fn contains_rational(&self, r: &Rational) -> bool {
        let diff = &self.mid_rational() - r;
        let (rm, re) = self.rad.to_dyadic();
        diff.abs() <= dyadic_to_rational(&rm, re)
    }

    /// True when the two enclosures intersect.
    pub fn overlaps(&self, other: &Ball) -> bool {
        let diff = &self.mid_rational() - &other.mid_rational();
        let total = self.rad.add_up(&other.rad);
        let (rm, re) = total.to_dyadic();
        diff.abs() <= dyadic_to_rational(&rm, re)
    }

    /// True when `other` lies inside `self`.
    pub fn contains_ball(&self, other: &Ball) -> bool {
        let diff = (&self.mid_rational() - &other.mid_rational()).abs();
        let (a, ea) = self.rad.to_dyadic();
        let (b, eb) = other.rad.to_dyadic();
        diff + dyadic_to_rational(&b, eb) <= dyadic_to_rational(&a, ea)
    }

    pub fn neg(&self) -> Ball {
        Ball { man: -&self.man, ..self.clone() }
    }

    pub fn mul_2exp(&self, e: i64) -> Ball {
        Ball { man: self.man.clone(), exp: self.exp + e, rad: self.rad.mul_2exp(e), prec: self.prec }
    }

    fn top_bit(&self) -> i64 {
        self.exp + self.man.bits() as i64
    }

    pub fn add(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        if other.man.is_zero() {
            return Ball::from_dyadic(self.man.clone(), self.exp, self.rad.add_up(&other.rad), prec);
        }
        if self.man.is_zero() {
            return Ball::from_dyadic(other.man.clone(), other.exp, self.rad.add_up(&other.rad), prec);
        }
        let gap = self.top_bit() - other.top_bit();
        if gap > prec as i64 + 64 {
            let rad = self.rad.add_up(&other.rad).add_up(&Mag::from_bigint_up(&other.man, other.exp));
            return Ball::from_dyadic(self.man.clone(), self.exp, rad, prec);
        }
        if -gap > prec as i64 + 64 {
            let rad = self.rad.add_up(&other.rad).add_up(&Mag::from_bigint_up(&self.man, self.exp));
            return Ball::from_dyadic(other.man.clone(), other.exp, rad, prec);
        }
        let e = self.exp.min(other.exp);
        let sum = (&self.man << (self.exp - e) as usize) + (&other.man << (other.exp - e) as usize);
        Ball::from_dyadic(sum, e, self.rad.add_up(&other.rad), prec)
    }

    pub fn sub(&self, other: &Ball) -> Ball {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        let ma = Mag::from_bigint_up(&self.man, self.exp);
        let mb = Mag::from_bigint_up(&other.man, other.exp);
        let rad = ma
            .mul_up(&other.rad)
            .add_up(&mb.mul_up(&self.rad))
            .add_up(&self.rad.mul_up(&other.rad));
        Ball::from_dyadic(&self.man * &other.man, self.exp + other.exp, rad, prec)
    }

    pub fn mul_rational(&self, r: &Rational) -> Ball {
        if r.denom().is_one() {
            let prec = self.prec;
            let mr = Mag::from_bigint_up(r.numer(), 0);
            return Ball::from_dyadic(&self.man * r.numer(), self.exp, self.rad.mul_up(&mr), prec);
        }
        self.mul(&Ball::from_rational(r, self.prec))
    }

    pub fn div(&self, other: &Ball) -> Result<Ball> {
        let prec = self.prec.max(other.prec);
        if other.contains_zero() {
            return Err(Error::DivisorStraddlesZero);
        }
        if self.man.is_zero() && self.rad.is_zero() {
            return Ok(Ball::zero(prec));
        }
        // quotient of midpoints, truncated
        let s = (prec as i64 + other.man.bits() as i64 - self.man.bits() as i64 + 4).max(0);
        let num = &self.man << s as usize;
        let (q, r) = num.div_mod_floor(&other.man);
        let qexp = self.exp - s - other.exp;
        let mut rad = if r.is_zero() { Mag::ZERO } else { Mag::pow2(qexp) };
        // propagated error (|ma| rb + |mb| ra) / (|mb| (|mb| - rb))
        let ma = Mag::from_bigint_up(&self.man, self.exp);
        let mb_up = Mag::from_bigint_up(&other.man, other.exp);
        let mb_dn = Mag::from_bigint_down(&other.man, other.exp);
        let num = ma.mul_up(&other.rad).add_up(&mb_up.mul_up(&self.rad));
        if !num.is_zero() {
            let den = mb_dn.mul_down(&mb_dn.sub_down(&other.rad));
            let prop = num.div_up(&den).ok_or(Error::DivisorStraddlesZero)?;
            rad = rad.add_up(&prop);
        }
        Ok(Ball::from_dyadic(q, qexp, rad, prec))
    }

    pub fn recip(&self) -> Result<Ball> {
        Ball::from_int(1, self.prec).div(self)
    }

    /// Square root; errors when the enclosure reaches below zero, except
    /// for the exact zero ball.
    pub fn sqrt(&self) -> Result<Ball> {
        let prec = self.prec;
        if self.man.is_negative() {
            return Err(Error::SqrtOfNegative);
        }
        if self.man.is_zero() {
            if self.rad.is_zero() {
                return Ok(Ball::zero(prec));
            }
            return Err(Error::SqrtOfNegative);
        }
        let lower = self.mag_lower();
        if lower.is_zero() && !self.rad.is_zero() {
            return Err(Error::SqrtOfNegative);
        }
        // floor(sqrt(man * 2^(exp + 2t))) * 2^-t with even exponent
        let mut t = prec as i64 + 4 - (self.man.bits() as i64 + self.exp) / 2;
        if (self.exp + 2 * t) % 2 != 0 {
            t += 1;
        }
        let shift = self.exp + 2 * t;
        let x = if shift >= 0 {
            &self.man << shift as usize
        } else {
            &self.man >> (-shift) as usize
        };
        let inexact_shift = shift < 0 && (&x << (-shift) as usize) != self.man;
        let r = iroot(&x, 2);
        let mut rad = if inexact_shift || &r * &r != x { Mag::pow2(-t + 1) } else { Mag::ZERO };
        // a floor of the radicand shifts the root by less than one unit
        if !self.rad.is_zero() {
            let prop = self.rad.div_up(&lower.sqrt_down()).ok_or(Error::SqrtOfNegative)?;
            rad = rad.add_up(&prop);
        }
        Ok(Ball::from_dyadic(r, -t, rad, prec))
    }

    pub fn pow_int(&self, e: i64) -> Result<Ball> {
        if e < 0 {
            return self.pow_int(-e)?.recip();
        }
        let mut result = Ball::from_int(1, self.prec);
        let mut base = self.clone();
        let mut e = e as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }

    pub fn arith(op: BallOp, a: &Ball, b: &Ball, prec: u32) -> Result<Ball> {
        let a = a.with_prec(prec);
        let b = b.with_prec(prec);
        match op {
            BallOp::Add => Ok(a.add(&b)),
            BallOp::Sub => Ok(a.sub(&b)),
            BallOp::Mul => Ok(a.mul(&b)),
            BallOp::Div => a.div(&b),
        }
    }

    /// Convex hull of two balls.
    pub fn union(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        let lo_a = self.mid_rational() - mag_to_rational(&self.rad);
        let hi_a = self.mid_rational() + mag_to_rational(&self.rad);
        let lo_b = other.mid_rational() - mag_to_rational(&other.rad);
        let hi_b = other.mid_rational() + mag_to_rational(&other.rad);
        let lo = if lo_a < lo_b { lo_a } else { lo_b };
        let hi = if hi_a > hi_b { hi_a } else { hi_b };
        Ball::from_interval(&lo, &hi, prec)
    }

    /// Smallest convenient ball containing `[lo, hi]`.
    pub fn from_interval(lo: &Rational, hi: &Rational, prec: u32) -> Ball {
        let two = Rational::from_integer(BigInt::from(2));
        let mid = (lo + hi) / &two;
        let half = (hi - lo) / two;
        let b = Ball::from_rational(&mid, prec);
        b.add_error(&rational_mag_up(&half))
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.man.bits() as i64;
        if bits == 0 {
            return 0.0;
        }
        let shift = (bits - 60).max(0);
        let top: BigInt = &self.man >> shift as usize;
        let top: i64 = top.try_into().unwrap_or(0);
        top as f64 * ((self.exp + shift) as f64).exp2()
    }

    /// Approximate `log10` of the radius (`-inf` for exact balls).
    pub fn radius_log10(&self) -> f64 {
        self.rad.log2() * std::f64::consts::LOG10_2
    }

    /// Decimal rendering of the midpoint with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        format_decimal(&self.mid_rational(), digits)
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = ((self.prec as f64) * std::f64::consts::LOG10_2).floor().clamp(1.0, 40.0) as usize;
        write!(f, "[{} +/- {:.2e}]", self.to_decimal(digits), self.rad.to_f64())
    }
}

fn cmp_dyadic(x: BigInt, ex: i64, m: &Mag) -> std::cmp::Ordering {
    let (y, ey) = m.to_dyadic();
    let e = ex.min(ey);
    (x << (ex - e) as usize).cmp(&(y << (ey - e) as usize))
}

pub(crate) fn dyadic_to_rational(man: &BigInt, exp: i64) -> Rational {
    if exp >= 0 {
        Rational::from_integer(man << exp as usize)
    } else {
        Rational::new(man.clone(), BigInt::one() << (-exp) as usize)
    }
}

pub(crate) fn mag_to_rational(m: &Mag) -> Rational {
    let (x, e) = m.to_dyadic();
    dyadic_to_rational(&x, e)
}

/// Upper bound for `|r|` as a [`Mag`].
pub fn rational_mag_up(r: &Rational) -> Mag {
    if r.is_zero() {
        return Mag::ZERO;
    }
    let s = 64 + r.denom().bits() as i64 - r.numer().bits() as i64;
    let (num, den) = if s >= 0 {
        (r.numer().abs() << s as usize, r.denom().clone())
    } else {
        (r.numer().abs(), r.denom() << (-s) as usize)
    };
    let q = num.div_ceil(&den);
    Mag::from_bigint_up(&q, -s)
}

/// Lower bound for `|r|` as a [`Mag`].
pub fn rational_mag_down(r: &Rational) -> Mag {
    if r.is_zero() {
        return Mag::ZERO;
    }
    let s = 64 + r.denom().bits() as i64 - r.numer().bits() as i64;
    let (num, den) = if s >= 0 {
        (r.numer().abs() << s as usize, r.denom().clone())
    } else {
        (r.numer().abs(), r.denom() << (-s) as usize)
    };
    Mag::from_bigint_down(&(num / den), -s)
}

/// Scientific-notation rendering of a rational, truncated to `digits`
/// significant digits.
pub fn format_decimal(r: &Rational, digits: usize) -> String {
    if r.is_zero() {
        return "0".to_string();
    }
    let neg = r.is_negative();
    let a = r.abs();
    let approx_log = (a.numer().bits() as f64 - a.denom().bits() as f64) * std::f64::consts::LOG10_2;
    let mut e10 = approx_log.floor() as i64;
    // adjust so that a / 10^e10 lies in [1, 10)
    let ten = BigInt::from(10);
    let scaled = |e: i64| -> Rational {
        if e >= 0 {
            &a / Rational::from_integer(num_traits::pow(ten.clone(), e as usize))
        } else {
            &a * Rational::from_integer(num_traits::pow(ten.clone(), (-e) as usize))
        }
    };
    let one = Rational::one();
    let tenr = Rational::from_integer(ten.clone());
    let mut m = scaled(e10);
    while m >= tenr {
        e10 += 1;
        m = scaled(e10);
    }
    while m < one {
        e10 -= 1;
        m = scaled(e10);
    }
    let digits = digits.max(1);
    let big = (m * Rational::from_integer(num_traits::pow(ten, digits - 1))).to_integer();
    let s = big.to_string();
    let (head, tail) = s.split_at(1);
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    out.push_str(head);
    if !tail.is_empty() {
        out.push('.');
        out.push_str(tail);
    }
    if e10 != 0 {
        out.push_str(&format!("e{e10}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    #[test]
    fn add_small_integers() {
        let s = Ball::arith(BallOp::Add, &Ball::from_int(1, 64), &Ball::from_int(2, 64), 64).unwrap();
        assert!(s.contains_rational(&int(3)));
        assert!(s.radius() <= Mag::pow2(-60));
    }

    #[test]
    fn sqrt_two() {
        let r = Ball::from_int(2, 128).sqrt().unwrap();
        let sq = r.mul(&r);
        assert!(sq.contains_rational(&int(2)));
        assert!(r.to_decimal(21).starts_with("1.41421356237309504880"));
        assert!(r.radius() < Mag::pow2(-120));
    }

    #[test]
    fn division_errors() {
        let z = Ball::from_int(0, 64).add_error(&Mag::from_bigint_up(&BigInt::from(1), -3));
        assert_eq!(Ball::from_int(1, 64).div(&z), Err(Error::DivisorStraddlesZero));
        assert_eq!(Ball::from_int(-4, 64).sqrt(), Err(Error::SqrtOfNegative));
        assert!(Ball::zero(64).sqrt().unwrap().is_exact());
    }

    #[test]
    fn contains_zero_examples() {
        let b = Ball::from_rational(&rat(1, 2), 64).add_error(&rational_mag_up(&rat(1, 10)));
        assert!(!b.contains_zero());
        let tiny = Ball::from_rational(&Rational::new(1.into(), num_traits::pow(BigInt::from(10), 200)), 64)
            .add_error(&rational_mag_up(&Rational::new(1.into(), num_traits::pow(BigInt::from(10), 150))));
        assert!(tiny.contains_zero());
        assert!(!Ball::from_int(-3, 64).contains_zero());
    }

    #[test]
    fn rational_conversion_contains() {
        let r = rat(-1373, 3);
        let b = Ball::from_rational(&r, 100);
        assert!(b.contains_rational(&r));
        assert!(Ball::from_rational(&rat(3, 8), 10).is_exact());
    }

    #[test]
    fn division_contains() {
        let a = Ball::from_rational(&rat(22, 7), 80);
        let b = Ball::from_rational(&rat(-355, 113), 80);
        let q = a.div(&b).unwrap();
        assert!(q.contains_rational(&(rat(22, 7) / rat(-355, 113))));
    }

    #[test]
    fn decimal_format() {
        assert_eq!(format_decimal(&rat(2, 3), 5), "6.6666e-1");
        assert_eq!(format_decimal(&int(-1234), 3), "-1.23e3");
    }
}
