use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};

/// Mantissa width of a [`Mag`].
const MAG_BITS: u64 = 30;

/// Nonnegative low-precision dyadic `man * 2^exp` used for ball radii.
///
/// Every constructor and operation documents its rounding direction; the
/// `_up` variants never underestimate and the `_down` variants never
/// overestimate the exact result.
#[derive(Debug, Clone, Copy)]
pub struct Mag {
    man: u64,
    exp: i64,
}

impl Mag {
    pub const ZERO: Mag = Mag { man: 0, exp: 0 };

    pub fn is_zero(&self) -> bool {
        self.man == 0
    }

    /// `2^e` exactly.
    pub fn pow2(e: i64) -> Mag {
        Mag { man: 1, exp: e }
    }

    pub fn mantissa(&self) -> u64 {
        self.man
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    fn from_u128(man: u128, exp: i64, up: bool) -> Mag {
        if man == 0 {
            return Mag::ZERO;
        }
        let bits = 128 - man.leading_zeros() as u64;
        if bits <= MAG_BITS {
            return Mag { man: man as u64, exp };
        }
        let shift = bits - MAG_BITS;
        let mut m = man >> shift;
        if up && (m << shift) != man {
            m += 1;
        }
        Mag { man: m as u64, exp: exp + shift as i64 }
    }

    fn from_biguint(x: &BigUint, exp: i64, up: bool) -> Mag {
        let bits = x.bits();
        if bits <= 120 {
            return Mag::from_u128(x.to_u128().unwrap(), exp, up);
        }
        let shift = bits - MAG_BITS;
        let top: BigUint = x >> shift;
        let mut m = top.to_u64().unwrap();
        if up && (&top << shift) != *x {
            m += 1;
        }
        Mag::from_u128(m as u128, exp + shift as i64, up)
    }

    /// Upper bound for `|x| * 2^exp`.
    pub fn from_bigint_up(x: &BigInt, exp: i64) -> Mag {
        Mag::from_biguint(x.magnitude(), exp, true)
    }

    /// Lower bound for `|x| * 2^exp`.
    pub fn from_bigint_down(x: &BigInt, exp: i64) -> Mag {
        Mag::from_biguint(x.magnitude(), exp, false)
    }

    pub fn from_u64(x: u64) -> Mag {
        Mag::from_u128(x as u128, 0, true)
    }

    /// Upper bound for a finite nonnegative float (with one unit of slack
    /// for the float's own rounding).
    pub fn from_f64_up(x: f64) -> Mag {
        if x.is_nan() || x <= 0.0 {
            return Mag::ZERO;
        }
        let e = x.log2().floor() as i64 - MAG_BITS as i64 + 1;
        let m = (x / (e as f64).exp2()).ceil() as u64 + 1;
        Mag::from_u128(m as u128, e, true)
    }

    /// Exact value as `(integer, exponent)`.
    pub fn to_dyadic(&self) -> (BigInt, i64) {
        (BigInt::from(self.man), self.exp)
    }

    pub fn mul_2exp(&self, e: i64) -> Mag {
        if self.is_zero() {
            return *self;
        }
        Mag { man: self.man, exp: self.exp + e }
    }

    pub fn add_up(&self, other: &Mag) -> Mag {
        if self.is_zero() {
            return *other;
        }
        if other.is_zero() {
            return *self;
        }
        let (hi, lo) = if self.exp >= other.exp { (self, other) } else { (other, self) };
        let d = (hi.exp - lo.exp) as u64;
        if d > 80 {
            // lo is far below one unit of hi's last place
            return Mag::from_u128(hi.man as u128 + 1, hi.exp, true);
        }
        let sum = ((hi.man as u128) << d) + lo.man as u128;
        Mag::from_u128(sum, lo.exp, true)
    }

    pub fn mul_up(&self, other: &Mag) -> Mag {
        Mag::from_u128(self.man as u128 * other.man as u128, self.exp + other.exp, true)
    }

    pub fn mul_down(&self, other: &Mag) -> Mag {
        Mag::from_u128(self.man as u128 * other.man as u128, self.exp + other.exp, false)
    }

    /// Upper bound of `self / other`; `None` when `other` is zero.
    pub fn div_up(&self, other: &Mag) -> Option<Mag> {
        if other.is_zero() {
            return None;
        }
        let num = (self.man as u128) << 64;
        let den = other.man as u128;
        let mut q = num / den;
        if q * den != num {
            q += 1;
        }
        Some(Mag::from_u128(q, self.exp - 64 - other.exp, true))
    }

    /// Lower bound of `self / other`; `None` when `other` is zero.
    pub fn div_down(&self, other: &Mag) -> Option<Mag> {
        if other.is_zero() {
            return None;
        }
        let q = ((self.man as u128) << 64) / other.man as u128;
        Some(Mag::from_u128(q, self.exp - 64 - other.exp, false))
    }

    /// Lower bound of `max(self - other, 0)`.
    pub fn sub_down(&self, other: &Mag) -> Mag {
        let (a, ea) = self.to_dyadic();
        let (b, eb) = other.to_dyadic();
        let e = ea.min(eb);
        let diff = (a << (ea - e) as usize) - (b << (eb - e) as usize);
        if diff <= BigInt::zero() {
            return Mag::ZERO;
        }
        Mag::from_bigint_down(&diff, e)
    }

    /// Lower bound of the square root.
    pub fn sqrt_down(&self) -> Mag {
        if self.is_zero() {
            return *self;
        }
        // make the exponent even and keep plenty of mantissa bits
        let mut man = (self.man as u128) << 64;
        let mut exp = self.exp - 64;
        if exp % 2 != 0 {
            man <<= 1;
            exp -= 1;
        }
        let r = isqrt_u128(man);
        Mag::from_u128(r, exp / 2, false)
    }

    /// Upper bound of the square root.
    pub fn sqrt_up(&self) -> Mag {
        if self.is_zero() {
            return *self;
        }
        let mut man = (self.man as u128) << 64;
        let mut exp = self.exp - 64;
        if exp % 2 != 0 {
            man <<= 1;
            exp -= 1;
        }
        let mut r = isqrt_u128(man);
        if r * r != man {
            r += 1;
        }
        Mag::from_u128(r, exp / 2, true)
    }

    /// Approximate value (may under- or overflow to 0 / inf).
    pub fn to_f64(&self) -> f64 {
        self.man as f64 * (self.exp as f64).exp2()
    }

    /// Approximate base-2 logarithm; `-inf` for zero.
    pub fn log2(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        (self.man as f64).log2() + self.exp as f64
    }

    /// Upper bound `2^e >= self`.
    pub fn ceil_pow2_exp(&self) -> i64 {
        let bits = 64 - self.man.leading_zeros() as i64;
        self.exp + bits
    }

    pub fn max(self, other: Mag) -> Mag {
        if self.cmp(&other) == Ordering::Less {
            other
        } else {
            self
        }
    }
}

impl PartialEq for Mag {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Mag {}

impl PartialOrd for Mag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Mag {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let (a, ea) = self.to_dyadic();
        let (b, eb) = other.to_dyadic();
        let e = ea.min(eb);
        let d1 = (ea - e) as u64;
        let d2 = (eb - e) as u64;
        if d1 > 4096 || d2 > 4096 {
            return self.log2().partial_cmp(&other.log2()).unwrap();
        }
        (a << d1 as usize).cmp(&(b << d2 as usize))
    }
}

fn isqrt_u128(n: u128) -> u128 {
    if n < 2 {
        return n;
    }
    let mut x = (n as f64).sqrt() as u128;
    // correct the float estimate in both directions
    while x.checked_mul(x).is_none_or(|sq| sq > n) {
        x -= 1;
    }
    while (x + 1).checked_mul(x + 1).is_some_and(|sq| sq <= n) {
        x += 1;
    }
    x
}

impl Default for Mag {
    fn default() -> Self {
        Mag::ZERO
    }
}

impl From<u32> for Mag {
    fn from(x: u32) -> Self {
        Mag::from_u64(x as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    fn exact(m: &Mag) -> num_rational::BigRational {
        let (x, e) = m.to_dyadic();
        if e >= 0 {
            num_rational::BigRational::from_integer(x << e as usize)
        } else {
            num_rational::BigRational::new(x, BigInt::one() << (-e) as usize)
        }
    }

    #[test]
    fn rounding_directions() {
        let a = Mag::from_bigint_up(&BigInt::from(1_000_000_007u64), -3);
        let b = Mag::from_bigint_down(&BigInt::from(999_999_999_999u64), 5);
        let exact_a = num_rational::BigRational::new(1_000_000_007u64.into(), 8.into());
        assert!(exact(&a) >= exact_a);
        assert!(exact(&a.mul_up(&b)) >= exact(&a) * exact(&b));
        assert!(exact(&a.mul_down(&b)) <= exact(&a) * exact(&b));
        assert!(exact(&a.div_up(&b).unwrap()) >= exact(&a) / exact(&b));
        assert!(exact(&a.div_down(&b).unwrap()) <= exact(&a) / exact(&b));
        assert!(exact(&a.add_up(&b)) >= exact(&a) + exact(&b));
        assert!(exact(&b.sub_down(&a)) <= exact(&b) - exact(&a));
        assert_eq!(a.sub_down(&b), Mag::ZERO);
        let s = Mag::from_u64(2).sqrt_down();
        assert!(exact(&s.mul_up(&s)) <= num_rational::BigRational::from_integer(2.into()));
        let s = Mag::from_u64(2).sqrt_up();
        assert!(exact(&s.mul_down(&s)) >= num_rational::BigRational::from_integer(2.into()));
    }

    #[test]
    fn ordering() {
        assert!(Mag::pow2(-10) < Mag::pow2(-9));
        assert!(Mag::ZERO < Mag::pow2(-1000));
        assert_eq!(Mag::from_u64(4), Mag::pow2(2).max(Mag::from_u64(3)));
    }
}
