//! Exact checks of truncated-sum congruences modulo prime powers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{is_probable_prime, Poly, Rational, RationalFunction};
use crate::sequences::{seq_value, SeqKind};
use crate::series::{Factor, TermSpec};

/// Sign applied to the right-hand side as a function of `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SignRule {
    Plus,
    /// `(-1)^((p+1)/2)`: `+1` for `p = 3 mod 4`, `-1` for `p = 1 mod 4`.
    MinusOnePowHalfPPlusOne,
}

impl SignRule {
    pub fn sign(&self, p: u64) -> i64 {
        match self {
            SignRule::Plus => 1,
            SignRule::MinusOnePowHalfPPlusOne => {
                if p % 4 == 3 {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

/// `sum_{k=lhs.start}^{(p-1)/2} lhs(k) = sign(p) rhs(p) (mod p^modulus_power)`.
#[derive(Debug, Clone)]
pub struct CongruenceSpec {
    pub id: String,
    pub lhs: TermSpec,
    pub sign: SignRule,
    pub rhs: RationalFunction,
    pub modulus_power: u32,
    /// Smallest prime the statement covers.
    pub p_min: u64,
}

/// The companion of the `k^3 C(2k,k)^3 / 256^k` identity:
/// `sum_{k=1}^{(p-1)/2} (6k^2-19k+6) k^3 C(2k,k)^3 / 256^k
///  = (-1)^((p+1)/2) (p + 2p^3) / 48 (mod p^4)`.
pub fn s1_companion() -> CongruenceSpec {
    let lhs = TermSpec::new(
        Poly::from_ints(&[0, 0, 0, 6, -19, 6]),
        Rational::from_integer(256.into()),
        vec![Factor::central(3)],
        1,
    );
    let rhs = RationalFunction::new(Poly::from_ints(&[0, 1, 0, 2]), Poly::from_ints(&[48]))
        .expect("nonzero denominator");
    CongruenceSpec {
        id: "S1-padic".into(),
        lhs,
        sign: SignRule::MinusOnePowHalfPPlusOne,
        rhs,
        modulus_power: 4,
        p_min: 5,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CongruenceReport {
    pub p: u64,
    #[serde(serialize_with = "as_string")]
    pub modulus: BigInt,
    /// Exact partial sum reduced once.
    #[serde(serialize_with = "as_string")]
    pub lhs_residue: BigInt,
    /// Per-term modular accumulation.
    #[serde(serialize_with = "as_string")]
    pub lhs_residue_per_term: BigInt,
    #[serde(serialize_with = "as_string")]
    pub rhs_residue: BigInt,
    pub holds: bool,
    pub strategies_agree: bool,
}

fn as_string<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// Residue of `r` in `[0, modulus)`; errors when `p` divides the denominator.
pub fn reduce_rational(r: &Rational, p: u64, modulus: &BigInt) -> Result<BigInt> {
    let den = r.denom();
    if (den % BigInt::from(p)).is_zero() {
        return Err(Error::Precondition(format!("denominator of {r} is divisible by {p}")));
    }
    let inv = mod_inverse(&den.mod_floor(modulus), modulus)?;
    Ok((r.numer().mod_floor(modulus) * inv).mod_floor(modulus))
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> Result<BigInt> {
    let e = a.extended_gcd(m);
    if !e.gcd.is_one() {
        return Err(Error::DivisionByZero);
    }
    Ok(e.x.mod_floor(m))
}

/// `p^v u` with `u` a unit modulo `p^r`.
#[derive(Debug, Clone)]
struct PadicValue {
    unit: BigInt,
    valuation: i64,
}

struct PadicRing {
    p: BigInt,
    modulus: BigInt,
    power: u32,
}

impl PadicRing {
    fn new(p: u64, power: u32) -> PadicRing {
        let p = BigInt::from(p);
        let modulus = num_traits::pow(p.clone(), power as usize);
        PadicRing { p, modulus, power }
    }

    fn split(&self, x: &BigInt) -> Result<PadicValue> {
        if x.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut x = x.clone();
        let mut v = 0;
        while (&x % &self.p).is_zero() {
            x /= &self.p;
            v += 1;
        }
        Ok(PadicValue { unit: x.mod_floor(&self.modulus), valuation: v })
    }

    fn one(&self) -> PadicValue {
        PadicValue { unit: BigInt::one(), valuation: 0 }
    }

    fn mul_int(&self, acc: &mut PadicValue, x: &BigInt, exponent: i32) -> Result<()> {
        let f = self.split(x)?;
        let unit = if exponent >= 0 { f.unit } else { mod_inverse(&f.unit, &self.modulus)? };
        for _ in 0..exponent.unsigned_abs() {
            acc.unit = (&acc.unit * &unit).mod_floor(&self.modulus);
            acc.valuation += f.valuation * exponent.signum() as i64;
        }
        Ok(())
    }

    fn residue(&self, v: &PadicValue) -> Result<BigInt> {
        if v.valuation < 0 {
            return Err(Error::Precondition(format!("term has a denominator divisible by {}", self.p)));
        }
        if v.valuation >= self.power as i64 {
            return Ok(BigInt::zero());
        }
        let pv = num_traits::pow(self.p.clone(), v.valuation as usize);
        Ok((&v.unit * pv).mod_floor(&self.modulus))
    }
}

/// `C(n, j)` into `acc` as a product of `(n - j + i) / i`.
fn mul_binomial(ring: &PadicRing, acc: &mut PadicValue, n: i64, j: i64, exponent: i32) -> Result<bool> {
    if j < 0 || n < 0 || j > n {
        return Ok(false);
    }
    for i in 1..=j {
        ring.mul_int(acc, &BigInt::from(n - j + i), exponent)?;
        ring.mul_int(acc, &BigInt::from(i), -exponent)?;
    }
    Ok(true)
}

fn mul_factor(ring: &PadicRing, acc: &mut PadicValue, f: &Factor, k: i64) -> Result<bool> {
    let idx = f.index.apply(k);
    match &f.kind {
        SeqKind::AffineBinomial { a, a0, b, b0 } => mul_binomial(ring, acc, a * idx + a0, b * idx + b0, f.exponent),
        SeqKind::Catalan => {
            if !mul_binomial(ring, acc, 2 * idx, idx, f.exponent)? {
                return Ok(false);
            }
            ring.mul_int(acc, &BigInt::from(idx + 1), -f.exponent)?;
            Ok(true)
        }
        other => {
            let v = seq_value(other, idx.max(0) as u64)?;
            if v.is_zero() {
                return Ok(false);
            }
            ring.mul_int(acc, v.numer(), f.exponent)?;
            ring.mul_int(acc, v.denom(), -f.exponent)?;
            Ok(true)
        }
    }
}

/// Per-term modular value of `spec` at `k`.
fn term_residue(ring: &PadicRing, spec: &TermSpec, k: u64) -> Result<BigInt> {
    let kr = Rational::from_integer(BigInt::from(k));
    let num = spec.numer.eval(&kr);
    if num.is_zero() {
        return Ok(BigInt::zero());
    }
    let mut acc = ring.one();
    ring.mul_int(&mut acc, num.numer(), 1)?;
    ring.mul_int(&mut acc, num.denom(), -1)?;
    let den = spec.denom.eval(&kr);
    ring.mul_int(&mut acc, den.numer(), -1)?;
    ring.mul_int(&mut acc, den.denom(), 1)?;
    let g = spec.geometric();
    let kk = k as i32;
    ring.mul_int(&mut acc, g.numer(), kk)?;
    ring.mul_int(&mut acc, g.denom(), -kk)?;
    for f in &spec.factors {
        if !mul_factor(ring, &mut acc, f, k as i64)? {
            return Ok(BigInt::zero());
        }
    }
    ring.residue(&acc)
}

pub fn check_congruence(spec: &CongruenceSpec, p: u64) -> Result<CongruenceReport> {
    if p < spec.p_min {
        return Err(Error::Precondition(format!("{} is stated for primes p >= {}, got {p}", spec.id, spec.p_min)));
    }
    if !is_probable_prime(p) {
        return Err(Error::Precondition(format!("{p} is not prime")));
    }
    let top = (p - 1) / 2;
    let ring = PadicRing::new(p, spec.modulus_power);
    let modulus = ring.modulus.clone();
    let exact = if top < spec.lhs.start { Rational::zero() } else { spec.lhs.partial_sum_exact(top)? };
    let lhs_residue = reduce_rational(&exact, p, &modulus)?;
    let mut per_term = BigInt::zero();
    for k in spec.lhs.start..=top {
        per_term = (per_term + term_residue(&ring, &spec.lhs, k)?).mod_floor(&modulus);
    }
    let pr = Rational::from_integer(BigInt::from(p));
    let rhs = spec.rhs.eval(&pr)? * Rational::from_integer(spec.sign.sign(p).into());
    let rhs_residue = reduce_rational(&rhs, p, &modulus)?;
    Ok(CongruenceReport {
        p,
        holds: lhs_residue == rhs_residue,
        strategies_agree: lhs_residue == per_term,
        modulus,
        lhs_residue,
        lhs_residue_per_term: per_term,
        rhs_residue,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum PrimeVerdict {
    Checked(CongruenceReport),
    Skipped { p: u64, reason: String },
    Error { p: u64, message: String },
}

impl PrimeVerdict {
    pub fn p(&self) -> u64 {
        match self {
            PrimeVerdict::Checked(r) => r.p,
            PrimeVerdict::Skipped { p, .. } | PrimeVerdict::Error { p, .. } => *p,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScanReport {
    pub verdicts: Vec<PrimeVerdict>,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub errors: usize,
    pub disagreements: usize,
}

impl ScanReport {
    pub fn all_pass(&self) -> bool {
        self.failed == 0 && self.errors == 0 && self.disagreements == 0
    }
}

/// Checks every prime in `p_min..=p_max` in parallel.
pub fn scan_primes(spec: &CongruenceSpec, p_min: u64, p_max: u64) -> Result<ScanReport> {
    if p_min > p_max {
        return Err(Error::InvalidParameter(format!("empty prime range {p_min}..{p_max}")));
    }
    let primes: Vec<u64> = (p_min..=p_max).filter(|&p| is_probable_prime(p)).collect();
    let verdicts: Vec<PrimeVerdict> = primes
        .par_iter()
        .map(|&p| {
            if p < spec.p_min {
                return PrimeVerdict::Skipped { p, reason: format!("statement requires p >= {}", spec.p_min) };
            }
            match check_congruence(spec, p) {
                Ok(r) => PrimeVerdict::Checked(r),
                Err(e) => PrimeVerdict::Error { p, message: e.to_string() },
            }
        })
        .collect();
    let mut report = ScanReport::default();
    for v in &verdicts {
        match v {
            PrimeVerdict::Checked(r) => {
                if r.holds {
                    report.passed += 1;
                } else {
                    report.failed += 1;
                }
                if !r.strategies_agree {
                    report.disagreements += 1;
                }
            }
            PrimeVerdict::Skipped { .. } => report.skipped += 1,
            PrimeVerdict::Error { .. } => report.errors += 1,
        }
    }
    report.verdicts = verdicts;
    Ok(report)
}

/// Residue as a machine integer, for display.
pub fn residue_u64(r: &BigInt) -> Option<u64> {
    if r.is_negative() {
        None
    } else {
        r.to_u64()
    }
}
