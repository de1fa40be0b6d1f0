//! Certified enclosures of the closed-form constants on right-hand sides.
//!
//! Each transcendental atom has a production route used by [`atom_eval`]
//! and an independent second route exposed for cross-checking:
//!
//! | atom | production | second route |
//! |------|------------|--------------|
//! | pi   | Machin arctangent formula | Chudnovsky series, binary splitting |
//! | zeta(3) | alternating central-binomial series | Euler-Maclaurin Hurwitz zeta |
//! | G    | log(2+sqrt 3) plus a central-binomial series | Hurwitz zeta at 1/4, 3/4 |
//! | K    | Hurwitz zeta at 1/3, 2/3 | direct partial sums with block bracket |
//! | log r | atanh series after power-of-two reduction | Mercator series |

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numerics::{binomial, format_rational, iroot, rational_mag_up, Ball, Mag, Rational};

/// Extra working bits carried by every atom evaluation.
pub const GUARD_BITS: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstAtom {
    Pi,
    /// `sqrt(r)`, `r > 0`.
    SqrtRat(Rational),
    /// `r^(1/n)`, `r > 0`, `n >= 2`.
    RootRat(Rational, u32),
    /// `sqrt(a + b sqrt(c))`.
    NestedSurd(Rational, Rational, Rational),
    Zeta3,
    CatalanG,
    /// `L(2, (-3/.))`.
    DirichletK,
    /// Natural logarithm of a positive rational.
    LogRat(Rational),
}

/// Product of atom powers; sorted by atom, no repeated atoms, no zero
/// exponents.
pub type Monomial = Vec<(ConstAtom, i32)>;

/// Rational linear combination of monomials in the atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct ConstExpr {
    terms: Vec<(Rational, Monomial)>,
}

impl ConstAtom {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        match self {
            ConstAtom::SqrtRat(r) | ConstAtom::LogRat(r) if !r.is_positive() => {
                bad(format!("{self} needs a positive argument"))
            }
            ConstAtom::RootRat(r, n) if !r.is_positive() || *n < 2 => bad(format!("{self} is not a valid root")),
            ConstAtom::NestedSurd(a, b, c) => {
                if c.is_negative() {
                    return bad(format!("{self} has a negative inner radicand"));
                }
                let inner = Ball::from_rational(c, 64).sqrt()?.mul_rational(b).add(&Ball::from_rational(a, 64));
                if inner.mag_lower().is_zero() || inner.mid_rational().is_negative() {
                    return bad(format!("{self} has a nonpositive radicand"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// True for atoms that are algebraic numbers.
    pub fn is_algebraic(&self) -> bool {
        matches!(self, ConstAtom::SqrtRat(_) | ConstAtom::RootRat(..) | ConstAtom::NestedSurd(..))
    }
}

impl fmt::Display for ConstAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = format_rational;
        match self {
            ConstAtom::Pi => f.write_str("pi"),
            ConstAtom::SqrtRat(x) => write!(f, "sqrt({})", r(x)),
            ConstAtom::RootRat(x, n) => write!(f, "root({},{n})", r(x)),
            ConstAtom::NestedSurd(a, b, c) => write!(f, "surd({},{},{})", r(a), r(b), r(c)),
            ConstAtom::Zeta3 => f.write_str("zeta3"),
            ConstAtom::CatalanG => f.write_str("G"),
            ConstAtom::DirichletK => f.write_str("K"),
            ConstAtom::LogRat(x) => write!(f, "log({})", r(x)),
        }
    }
}

impl ConstExpr {
    pub fn zero() -> ConstExpr {
        ConstExpr::default()
    }

    pub fn rational(c: Rational) -> ConstExpr {
        ConstExpr::from_terms(vec![(c, Vec::new())])
    }

    pub fn atom(a: ConstAtom) -> ConstExpr {
        ConstExpr::from_terms(vec![(Rational::one(), vec![(a, 1)])])
    }

    /// `c * pi^e`.
    pub fn pi_power(c: Rational, e: i32) -> ConstExpr {
        ConstExpr::from_terms(vec![(c, vec![(ConstAtom::Pi, e)])])
    }

    pub fn from_terms(raw: Vec<(Rational, Monomial)>) -> ConstExpr {
        let mut acc: BTreeMap<Monomial, Rational> = BTreeMap::new();
        for (c, mono) in raw {
            let mut merged: BTreeMap<ConstAtom, i32> = BTreeMap::new();
            for (a, e) in mono {
                *merged.entry(a).or_insert(0) += e;
            }
            let mono: Monomial = merged.into_iter().filter(|(_, e)| *e != 0).collect();
            *acc.entry(mono).or_insert_with(Rational::zero) += c;
        }
        ConstExpr { terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).map(|(m, c)| (c, m)).collect() }
    }

    pub fn terms(&self) -> &[(Rational, Monomial)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value when no atoms occur.
    pub fn as_rational(&self) -> Option<Rational> {
        match self.terms.as_slice() {
            [] => Some(Rational::zero()),
            [(c, m)] if m.is_empty() => Some(c.clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Rational) -> ConstExpr {
        ConstExpr::from_terms(self.terms.iter().map(|(a, m)| (a * c, m.clone())).collect())
    }

    pub fn add(&self, other: &ConstExpr) -> ConstExpr {
        ConstExpr::from_terms(self.terms.iter().chain(&other.terms).cloned().collect())
    }

    pub fn sub(&self, other: &ConstExpr) -> ConstExpr {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn mul(&self, other: &ConstExpr) -> ConstExpr {
        let mut raw = Vec::new();
        for (a, ma) in &self.terms {
            for (b, mb) in &other.terms {
                raw.push((a * b, ma.iter().chain(mb).cloned().collect()));
            }
        }
        ConstExpr::from_terms(raw)
    }

    /// Reciprocal of a single-term expression.
    pub fn recip(&self) -> Result<ConstExpr> {
        match self.terms.as_slice() {
            [(c, m)] => Ok(ConstExpr::from_terms(vec![(
                c.recip(),
                m.iter().map(|(a, e)| (a.clone(), -e)).collect(),
            )])),
            [] => Err(Error::DivisionByZero),
            _ => Err(Error::Parse("only single-term expressions can be inverted".into())),
        }
    }

    pub fn pow(&self, e: i32) -> Result<ConstExpr> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let mut acc = ConstExpr::rational(Rational::one());
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base);
        }
        Ok(acc)
    }

    pub fn atoms(&self) -> Vec<ConstAtom> {
        let mut out: Vec<ConstAtom> = self.terms.iter().flat_map(|(_, m)| m.iter().map(|(a, _)| a.clone())).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Parses expressions such as `-1/12*pi^-1`, `(3264 - 4*pi^2)/63`,
    /// `3/(8*pi)*(4255*sqrt(6) + 5904*sqrt(15))` or `surd(8,6,2)+3*root(2,4)`.
    pub fn parse(s: &str) -> Result<ConstExpr> {
        let mut p = ExprParser { src: s, chars: s.chars().collect(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.chars.len() {
            return Err(p.error("unexpected trailing input"));
        }
        for a in e.atoms() {
            a.validate()?;
        }
        Ok(e)
    }
}

fn monomial_string(m: &Monomial) -> String {
    m.iter()
        .map(|(a, e)| if *e == 1 { a.to_string() } else { format!("{a}^{e}") })
        .collect::<Vec<_>>()
        .join("*")
}

impl fmt::Display for ConstExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (c, m)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (i, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.is_empty() {
                f.write_str(&format_rational(&a))?;
            } else if a.is_one() {
                f.write_str(&monomial_string(m))?;
            } else {
                write!(f, "{}*{}", format_rational(&a), monomial_string(m))?;
            }
        }
        Ok(())
    }
}

struct ExprParser<'a> {
    src: &'a str,
    chars: Vec<char>,
    pos: usize,
}

impl ExprParser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at offset {} in `{}`", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<ConstExpr> {
        let mut acc = if self.eat('-') {
            self.term()?.scale(&-Rational::one())
        } else {
            self.eat('+');
            self.term()?
        };
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<ConstExpr> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.pos += 1;
                    acc = acc.mul(&self.power()?);
                }
                Some('/') => {
                    self.pos += 1;
                    acc = acc.mul(&self.power()?.recip()?);
                }
                Some(c) if c == '(' || c.is_ascii_alphanumeric() => acc = acc.mul(&self.power()?),
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<ConstExpr> {
        let base = self.primary()?;
        if self.eat('^') {
            let paren = self.eat('(');
            let neg = self.eat('-');
            let n = self.integer()?;
            if paren && !self.eat(')') {
                return Err(self.error("missing `)` in exponent"));
            }
            let e = i32::try_from(n).map_err(|_| self.error("exponent too large"))?;
            return base.pow(if neg { -e } else { e });
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer"));
        }
        let s: String = self.chars[start..self.pos].iter().collect();
        Ok(s.parse().expect("digits"))
    }

    fn rational_arg(&mut self) -> Result<Rational> {
        let e = self.expr()?;
        e.as_rational().ok_or_else(|| self.error("expected a rational argument"))
    }

    fn args(&mut self, n: usize) -> Result<Vec<Rational>> {
        if !self.eat('(') {
            return Err(self.error("expected `(`"));
        }
        let mut out = Vec::new();
        for i in 0..n {
            if i > 0 && !self.eat(',') {
                return Err(self.error("expected `,`"));
            }
            out.push(self.rational_arg()?);
        }
        if !self.eat(')') {
            return Err(self.error("expected `)`"));
        }
        Ok(out)
    }

    fn primary(&mut self) -> Result<ConstExpr> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(self.error("missing `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => Ok(ConstExpr::rational(Rational::from_integer(self.integer()?))),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.chars.len() && (self.chars[self.pos].is_ascii_alphanumeric()) {
                    self.pos += 1;
                }
                let name: String = self.chars[start..self.pos].iter().collect();
                let atom = match name.as_str() {
                    "pi" => ConstAtom::Pi,
                    "zeta3" => ConstAtom::Zeta3,
                    "G" => ConstAtom::CatalanG,
                    "K" => ConstAtom::DirichletK,
                    "sqrt" => ConstAtom::SqrtRat(self.args(1)?.remove(0)),
                    "log" => ConstAtom::LogRat(self.args(1)?.remove(0)),
                    "root" => {
                        let v = self.args(2)?;
                        let n = v[1].to_integer().to_u32().filter(|_| v[1].is_integer());
                        ConstAtom::RootRat(v[0].clone(), n.ok_or_else(|| self.error("bad root index"))?)
                    }
                    "surd" => {
                        let v = self.args(3)?;
                        ConstAtom::NestedSurd(v[0].clone(), v[1].clone(), v[2].clone())
                    }
                    _ => return Err(self.error(&format!("unknown constant `{name}`"))),
                };
                Ok(ConstExpr::atom(atom))
            }
            _ => Err(self.error("expected a number, constant or `(`")),
        }
    }
}

type AtomCache = Mutex<HashMap<(ConstAtom, u32), Ball>>;

fn atom_cache() -> &'static AtomCache {
    static CACHE: OnceLock<AtomCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Enclosure of an atom; the radius is about `2^-prec` relative to
/// `max(1, |value|)`. Results are memoized per `(atom, prec)`.
pub fn atom_eval(atom: &ConstAtom, prec: u32) -> Result<Ball> {
    let key = (atom.clone(), prec);
    if let Some(b) = atom_cache().lock().expect("atom cache poisoned").get(&key) {
        return Ok(b.clone());
    }
    let b = atom_eval_uncached(atom, prec)?;
    atom_cache().lock().expect("atom cache poisoned").insert(key, b.clone());
    Ok(b)
}

pub fn atom_eval_uncached(atom: &ConstAtom, prec: u32) -> Result<Ball> {
    atom.validate()?;
    let w = prec + GUARD_BITS;
    let b = match atom {
        ConstAtom::Pi => pi_machin(w),
        ConstAtom::SqrtRat(r) => Ball::from_rational(r, w + 8).sqrt()?,
        ConstAtom::RootRat(r, n) => root_rational(r, *n, w),
        ConstAtom::NestedSurd(a, b, c) => {
            let inner = Ball::from_rational(c, w + 16).sqrt()?.mul_rational(b).add(&Ball::from_rational(a, w + 16));
            inner.sqrt()?
        }
        ConstAtom::Zeta3 => zeta3_central(w),
        ConstAtom::CatalanG => catalan_accelerated(w)?,
        ConstAtom::DirichletK => dirichlet_k(w)?,
        ConstAtom::LogRat(r) => log_atanh(r, w)?,
    };
    Ok(b.with_prec(prec + GUARD_BITS))
}

/// Enclosure of a whole right-hand side.
pub fn const_eval(expr: &ConstExpr, prec: u32) -> Result<Ball> {
    let w = prec + 16;
    let mut acc = Ball::zero(w);
    for (c, mono) in expr.terms() {
        let mut t = Ball::from_rational(c, w);
        for (a, e) in mono {
            t = t.mul(&atom_eval(a, w)?.pow_int(*e as i64)?);
        }
        acc = acc.add(&t);
    }
    Ok(acc)
}

fn dyadic_ball(mid: BigInt, w: u32, ulps: u64) -> Ball {
    Ball::from_dyadic(mid, -(w as i64), Mag::from_u64(ulps).mul_2exp(-(w as i64)), w)
}

/// `2^w * atan(1/x)` truncated, with the accumulated error in units.
fn atan_inv_fixed(x: u64, w: u32) -> (BigInt, u64) {
    let x2 = BigInt::from(x) * x;
    let mut p = (BigInt::one() << w as usize) / x;
    let mut sum = BigInt::zero();
    let mut n = 0u64;
    while !p.is_zero() {
        let t = &p / (2 * n + 1);
        if n.is_multiple_of(2) {
            sum += t;
        } else {
            sum -= t;
        }
        p /= &x2;
        n += 1;
    }
    (sum, 3 * n + 2)
}

/// `16 atan(1/5) - 4 atan(1/239)`.
pub fn pi_machin(prec: u32) -> Ball {
    let w = prec + 16;
    let (a, ea) = atan_inv_fixed(5, w);
    let (b, eb) = atan_inv_fixed(239, w);
    dyadic_ball(a * 16 - b * 4, w, 16 * ea + 4 * eb).with_prec(prec)
}

fn chudnovsky_split(a: u64, b: u64) -> (BigInt, BigInt, BigInt) {
    const A: u64 = 13591409;
    const B: u64 = 545140134;
    if b - a == 1 {
        let (p, q) = if a == 0 {
            (BigInt::one(), BigInt::one())
        } else {
            let k = BigInt::from(a);
            let p = -(BigInt::from(6 * a - 5) * (2 * a - 1) * (6 * a - 1));
            let q = k.pow(3) * BigInt::from(10939058860032000u64);
            (p, q)
        };
        let t = &p * (A + B * a);
        return (p, q, t);
    }
    let m = (a + b) / 2;
    let (p1, q1, t1) = chudnovsky_split(a, m);
    let (p2, q2, t2) = chudnovsky_split(m, b);
    (&p1 * &p2, &q1 * &q2, t1 * &q2 + p1 * t2)
}

/// Chudnovsky series summed by binary splitting; tail bounded by the first
/// omitted term of the alternating, decreasing series.
pub fn pi_chudnovsky(prec: u32) -> Result<Ball> {
    let w = prec + 32;
    let n = (w as u64) / 47 + 2;
    let (_, q, t) = chudnovsky_split(0, n);
    let (_, q1, t1) = chudnovsky_split(0, n + 1);
    let s = Rational::new(t.clone(), q.clone());
    let next = Rational::new(t1, q1) - &s;
    let sum = Ball::from_rational(&s, w).add_error(&rational_mag_up(&next));
    let root = Ball::from_int(10005, w).sqrt()?;
    Ok(root.mul_rational(&Rational::from_integer(426880.into())).div(&sum)?.with_prec(prec))
}

fn root_rational(r: &Rational, n: u32, w: u32) -> Ball {
    let s = w as usize + 4;
    let scaled = (r.numer() << (n as usize * s)) / r.denom();
    let low = iroot(&scaled, n);
    // the exact root lies in [low, low + 1] * 2^-s
    Ball::from_dyadic(2 * low + 1, -(s as i64) - 1, Mag::pow2(-(s as i64) - 1), w)
}

/// `(5/2) sum_{k>=1} (-1)^(k-1) / (k^3 C(2k,k))`.
pub fn zeta3_central(prec: u32) -> Ball {
    let w = prec + 16;
    let mut acc = Ball::zero(w);
    let mut central = BigInt::one();
    let mut k: u64 = 1;
    let eps = Mag::pow2(-(w as i64) - 4);
    loop {
        central = central * (4 * k - 2) / k;
        let term = Rational::new(BigInt::one(), BigInt::from(k).pow(3) * &central);
        let tb = Ball::from_rational(&term, w);
        let small = rational_mag_up(&term) < eps;
        if small {
            // alternating with decreasing terms: tail below this term
            acc = acc.add_error(&rational_mag_up(&term));
            break;
        }
        acc = if k % 2 == 1 { acc.add(&tb) } else { acc.sub(&tb) };
        k += 1;
    }
    acc.mul_rational(&Rational::new(5.into(), 2.into())).with_prec(prec)
}

type BernoulliCache = Mutex<Vec<Rational>>;

/// Even-indexed Bernoulli numbers `B_0, B_2, ..., B_{2m}`.
pub fn bernoulli_even(m: usize) -> Vec<Rational> {
    static CACHE: OnceLock<BernoulliCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(vec![Rational::one(), Rational::new(BigInt::from(-1), 2.into())]));
    let mut all = cache.lock().expect("bernoulli cache poisoned");
    // all[i] = B_i for every index computed so far
    while all.len() < 2 * m + 1 {
        let n = all.len();
        let mut s = Rational::zero();
        for (k, bk) in all.iter().enumerate() {
            if !bk.is_zero() {
                s += Rational::from_integer(binomial(n as i64 + 1, k as i64)) * bk;
            }
        }
        all.push(-s / Rational::from_integer(BigInt::from(n + 1)));
    }
    (0..=m).map(|j| all[2 * j].clone()).collect()
}

/// Hurwitz zeta `zeta(s, a)` for integer `s >= 2` and rational `a > 0` by
/// Euler-Maclaurin summation. The integrand is completely monotone, so the
/// remainder is bounded by the first omitted correction term.
pub fn hurwitz_zeta(s: u32, a: &Rational, prec: u32) -> Result<Ball> {
    if s < 2 || !a.is_positive() {
        return Err(Error::InvalidParameter(format!("hurwitz zeta needs s >= 2 and a > 0, got s={s}")));
    }
    let w = prec + 24;
    let n = (w as i64 / 3 + 10).max(16);
    let mut acc = Ball::zero(w);
    for i in 0..n {
        let x = Rational::from_integer(i.into()) + a;
        acc = acc.add(&Ball::from_rational(&rat_pow_u(&x.recip(), s), w));
    }
    let big_n = Rational::from_integer(n.into()) + a;
    let inv = big_n.recip();
    // (N+a)^(1-s)/(s-1) + (N+a)^(-s)/2
    let head = rat_pow_u(&inv, s - 1) / Rational::from_integer((s - 1).into())
        + rat_pow_u(&inv, s) / Rational::from_integer(2.into());
    acc = acc.add(&Ball::from_rational(&head, w));
    let eps = Mag::pow2(-(w as i64) - 4);
    let mut j = 1usize;
    let mut fact = Rational::one();
    loop {
        let bern = bernoulli_even(j + 1);
        // B_{2j}/(2j)! * s(s+1)...(s+2j-2) * (N+a)^(-s-2j+1)
        let rising: BigInt = (0..(2 * j - 1) as u32).map(|i| BigInt::from(s + i)).product();
        fact *= Rational::from_integer(BigInt::from(2 * j - 1) * (2 * j));
        let term = &bern[j] / &fact * Rational::from_integer(rising) * rat_pow_u(&inv, s + 2 * j as u32 - 1);
        let mag = rational_mag_up(&term);
        if mag < eps || j > 4 * w as usize {
            acc = acc.add_error(&mag.mul_2exp(1));
            break;
        }
        acc = acc.add(&Ball::from_rational(&term, w));
        j += 1;
    }
    Ok(acc.with_prec(prec))
}

fn rat_pow_u(x: &Rational, e: u32) -> Rational {
    num_traits::pow(x.clone(), e as usize)
}

/// `zeta(3)` through the Hurwitz route `zeta(3, 1)`.
pub fn zeta3_hurwitz(prec: u32) -> Result<Ball> {
    hurwitz_zeta(3, &Rational::one(), prec)
}

/// `K = (zeta(2, 1/3) - zeta(2, 2/3)) / 9`.
pub fn dirichlet_k(prec: u32) -> Result<Ball> {
    let w = prec + 8;
    let a = hurwitz_zeta(2, &Rational::new(1.into(), 3.into()), w)?;
    let b = hurwitz_zeta(2, &Rational::new(2.into(), 3.into()), w)?;
    Ok(a.sub(&b).mul_rational(&Rational::new(1.into(), 9.into())).with_prec(prec))
}

/// `K` from `blocks` direct blocks `(3m+1)^-2 - (3m+2)^-2`; the remaining
/// blocks are positive and sum to at most `2/(3M+1)^3 + 1/(3(3M+1)^2)`.
pub fn dirichlet_k_direct(blocks: u64, prec: u32) -> Ball {
    let mut acc = Ball::zero(prec);
    for m in 0..blocks {
        let a = BigInt::from(3 * m + 1);
        let b = BigInt::from(3 * m + 2);
        let block = Rational::new(&b * &b - &a * &a, (&a * &a) * (&b * &b));
        acc = acc.add(&Ball::from_rational(&block, prec));
    }
    let q = Rational::from_integer(BigInt::from(3 * blocks + 1));
    let tail = Rational::from_integer(2.into()) / rat_pow_u(&q, 3) + Rational::new(1.into(), 3.into()) / rat_pow_u(&q, 2);
    let half = &tail / Rational::from_integer(2.into());
    acc.add(&Ball::from_rational(&half, prec)).add_error(&rational_mag_up(&half))
}

/// `G = (pi/8) log(2 + sqrt 3) + (3/8) sum_{n>=0} 1/((2n+1)^2 C(2n,n))`.
pub fn catalan_accelerated(prec: u32) -> Result<Ball> {
    let w = prec + 16;
    let eps = Mag::pow2(-(w as i64) - 4);
    // log(2 + sqrt 3) = (2/sqrt 3) sum 3^-n/(2n+1); term ratio below 1/3
    let mut l = Ball::zero(w);
    let mut n = 0u64;
    loop {
        let t = Rational::new(BigInt::one(), num_traits::pow(BigInt::from(3), n as usize) * (2 * n + 1));
        let m = rational_mag_up(&t);
        if m < eps {
            l = l.add_error(&m.mul_2exp(1));
            break;
        }
        l = l.add(&Ball::from_rational(&t, w));
        n += 1;
    }
    let sqrt3 = Ball::from_int(3, w).sqrt()?;
    let log_term = l.mul_2exp(1).div(&sqrt3)?;
    // central-binomial series; term ratio below 1/4
    let mut s = Ball::zero(w);
    let mut central = BigInt::one();
    let mut n = 0u64;
    loop {
        if n > 0 {
            central = central * (4 * n - 2) / n;
        }
        let t = Rational::new(BigInt::one(), BigInt::from(2 * n + 1).pow(2) * &central);
        let m = rational_mag_up(&t);
        if m < eps {
            s = s.add_error(&m.mul_2exp(1));
            break;
        }
        s = s.add(&Ball::from_rational(&t, w));
        n += 1;
    }
    let pi = pi_machin(w);
    let g = pi.mul(&log_term).mul_2exp(-3).add(&s.mul_rational(&Rational::new(3.into(), 8.into())));
    Ok(g.with_prec(prec))
}

/// `G = (zeta(2, 1/4) - zeta(2, 3/4)) / 16`.
pub fn catalan_hurwitz(prec: u32) -> Result<Ball> {
    let w = prec + 8;
    let a = hurwitz_zeta(2, &Rational::new(1.into(), 4.into()), w)?;
    let b = hurwitz_zeta(2, &Rational::new(3.into(), 4.into()), w)?;
    Ok(a.sub(&b).mul_2exp(-4).with_prec(prec))
}

/// `2 atanh(y)` for a rational `|y| <= 1/3`.
fn atanh2(y: &Rational, w: u32) -> Ball {
    let eps = Mag::pow2(-(w as i64) - 4);
    let y2 = y * y;
    let mut p = y.clone();
    let mut acc = Ball::zero(w);
    let mut n = 0u64;
    loop {
        let t = &p / Rational::from_integer(BigInt::from(2 * n + 1));
        let m = rational_mag_up(&t);
        if m < eps {
            acc = acc.add_error(&m.mul_2exp(1));
            break;
        }
        acc = acc.add(&Ball::from_rational(&t, w));
        p *= &y2;
        n += 1;
    }
    acc.mul_2exp(1)
}

/// `log r` as `m log 2 + 2 atanh((r' - 1)/(r' + 1))` with `r = 2^m r'`,
/// `r'` in `[2/3, 4/3)`.
pub fn log_atanh(r: &Rational, prec: u32) -> Result<Ball> {
    if !r.is_positive() {
        return Err(Error::InvalidParameter("log of a nonpositive rational".into()));
    }
    let w = prec + 16;
    let (m, rr) = reduce_pow2(r);
    let one = Rational::one();
    let y = (&rr - &one) / (&rr + &one);
    let mut acc = atanh2(&y, w);
    if m != 0 {
        let log2 = atanh2(&Rational::new(1.into(), 3.into()), w + 8);
        acc = acc.add(&log2.mul_rational(&Rational::from_integer(m.into())));
    }
    Ok(acc.with_prec(prec))
}

/// Power-of-two reduction `r = 2^m r'` with `r'` in `[2/3, 4/3)`.
fn reduce_pow2(r: &Rational) -> (i64, Rational) {
    let scale = |m: i64| -> Rational {
        if m >= 0 {
            r / Rational::from_integer(BigInt::one() << m as usize)
        } else {
            r * Rational::from_integer(BigInt::one() << (-m) as usize)
        }
    };
    let mut m = r.numer().bits() as i64 - r.denom().bits() as i64;
    let mut rr = scale(m);
    let lo = Rational::new(2.into(), 3.into());
    let hi = Rational::new(4.into(), 3.into());
    while rr >= hi {
        m += 1;
        rr = scale(m);
    }
    while rr < lo {
        m -= 1;
        rr = scale(m);
    }
    (m, rr)
}

/// `log r = sum_{k>=1} y^k / k` with `y = (r' - 1)/r'` after the same
/// power-of-two reduction, so that `|y| <= 1/2`.
pub fn log_mercator(r: &Rational, prec: u32) -> Result<Ball> {
    if !r.is_positive() {
        return Err(Error::InvalidParameter("log of a nonpositive rational".into()));
    }
    let w = prec + 16;
    let (m, rr) = reduce_pow2(r);
    let mut acc = mercator_series(&rr, w);
    if m != 0 {
        acc = acc.add(&mercator_series(&Rational::from_integer(2.into()), w + 8).mul_rational(&Rational::from_integer(m.into())));
    }
    Ok(acc.with_prec(prec))
}

fn mercator_series(r: &Rational, w: u32) -> Ball {
    let y = (r - Rational::one()) / r;
    let ya = y.abs();
    let eps = Mag::pow2(-(w as i64) - 4);
    let mut p = y.clone();
    let mut acc = Ball::zero(w);
    let mut k = 1u64;
    loop {
        let t = &p / Rational::from_integer(k.into());
        let m = rational_mag_up(&t);
        if m < eps || t.is_zero() {
            // remaining terms bounded by a geometric series with ratio |y|
            let tail = t.abs() / (Rational::one() - &ya);
            return acc.add_error(&rational_mag_up(&tail));
        }
        acc = acc.add(&Ball::from_rational(&t, w));
        p *= &y;
        k += 1;
    }
}
