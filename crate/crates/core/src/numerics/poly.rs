use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{format_rational, Ball, Rational};
use crate::error::{Error, Result};

/// Dense univariate polynomial over Q, coefficients stored from the
/// constant term upwards with no trailing zeros.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Poly {
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn one() -> Poly {
        Poly::constant(Rational::one())
    }

    /// The variable itself.
    pub fn x() -> Poly {
        Poly::from_coeffs(vec![Rational::zero(), Rational::one()])
    }

    pub fn constant(c: Rational) -> Poly {
        Poly::from_coeffs(vec![c])
    }

    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Poly {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Poly {
        Poly::from_coeffs(coeffs.iter().map(|&c| Rational::from_integer(c.into())).collect())
    }

    pub fn from_bigints(coeffs: &[BigInt]) -> Poly {
        Poly::from_coeffs(coeffs.iter().map(|c| Rational::from_integer(c.clone())).collect())
    }

    /// `a x + b`.
    pub fn linear(a: Rational, b: Rational) -> Poly {
        Poly::from_coeffs(vec![b, a])
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with `-1` for the zero polynomial.
    pub fn deg(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn lc(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_else(Rational::zero)
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_int(&self, x: i64) -> Rational {
        self.eval(&Rational::from_integer(x.into()))
    }

    pub fn eval_ball(&self, x: &Ball) -> Ball {
        let mut acc = Ball::zero(x.prec());
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(&Ball::from_rational(c, x.prec()));
        }
        acc
    }

    pub fn scale(&self, c: &Rational) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|a| a * c).collect())
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        self.scale(&self.lc().recip())
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// `p(a x + b)`.
    pub fn compose_affine(&self, a: &Rational, b: &Rational) -> Poly {
        let lin = Poly::linear(a.clone(), b.clone());
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * &lin) + &Poly::constant(c.clone());
        }
        acc
    }

    /// `p(x + h)`.
    pub fn shift(&self, h: &Rational) -> Poly {
        self.compose_affine(&Rational::one(), h)
    }

    pub fn shift_int(&self, h: i64) -> Poly {
        self.shift(&Rational::from_integer(h.into()))
    }

    pub fn derivative(&self) -> Poly {
        Poly::from_coeffs(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * Rational::from_integer(i.into()))
                .collect(),
        )
    }

    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        if d.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let dd = d.coeffs.len() - 1;
        let lc_inv = d.lc().recip();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let c = &rem[i + dd] * &lc_inv;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    let t = &c * dc;
                    rem[i + j] -= t;
                }
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        Ok((Poly::from_coeffs(quot), Poly::from_coeffs(rem)))
    }

    /// Exact quotient; errors when `d` does not divide `self`.
    pub fn div_exact(&self, d: &Poly) -> Result<Poly> {
        let (q, r) = self.div_rem(d)?;
        if !r.is_zero() {
            return Err(Error::Precondition("polynomial division is not exact".into()));
        }
        Ok(q)
    }

    /// Monic greatest common divisor (zero when both inputs are zero).
    pub fn gcd(&self, other: &Poly) -> Poly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.div_rem(&b).expect("nonzero divisor").1;
            a = b;
            b = r.monic();
        }
        a.monic()
    }

    /// Resultant `Res_x(self, other)`.
    pub fn resultant(&self, other: &Poly) -> Rational {
        if self.is_zero() || other.is_zero() {
            return Rational::zero();
        }
        let da = self.coeffs.len() - 1;
        let db = other.coeffs.len() - 1;
        if db == 0 {
            return num_traits::pow(other.lc(), da);
        }
        if da == 0 {
            return num_traits::pow(self.lc(), db);
        }
        let r = self.div_rem(other).expect("nonzero divisor").1;
        if r.is_zero() {
            return Rational::zero();
        }
        let dr = r.coeffs.len() - 1;
        let sign = if (da * db) % 2 == 1 { -Rational::one() } else { Rational::one() };
        sign * num_traits::pow(other.lc(), da - dr) * other.resultant(&r)
    }

    /// Integer upper bound for the modulus of every complex root
    /// (Fujiwara's bound, rounded outwards).
    pub fn root_bound(&self) -> Rational {
        let n = self.coeffs.len().saturating_sub(1);
        if n == 0 {
            return Rational::zero();
        }
        let lc = self.lc().abs();
        let mut best = f64::NEG_INFINITY;
        for i in 1..=n {
            let c = &self.coeffs[n - i];
            if c.is_zero() {
                continue;
            }
            let mut q = c.abs() / &lc;
            if i == n {
                q /= Rational::from_integer(2.into());
            }
            best = best.max(super::rational_mag_up(&q).log2() / i as f64);
        }
        if best == f64::NEG_INFINITY {
            return Rational::zero();
        }
        let b = (2.0 * (best * (1.0 + 1e-9) + 1e-9).exp2()).ceil() + 1.0;
        Rational::from_integer(BigInt::from(b.min(1e300) as u128).max(BigInt::one()))
    }

    /// All integers `h >= 0` with `gcd(self(x), other(x + h))` nonconstant,
    /// in increasing order.
    pub fn dispersion_set(&self, other: &Poly) -> Vec<i64> {
        if self.deg() < 1 || other.deg() < 1 {
            return Vec::new();
        }
        let n = (self.deg() * other.deg()) as usize;
        let xs: Vec<Rational> = (0..=n as i64).map(|h| Rational::from_integer(h.into())).collect();
        let ys: Vec<Rational> = xs.iter().map(|h| self.resultant(&other.shift(h))).collect();
        let res = Poly::interpolate(&xs, &ys);
        if res.is_zero() {
            // common factor for every shift cannot happen for nonzero inputs
            return Vec::new();
        }
        let limit = (self.root_bound() + other.root_bound()).ceil().to_integer();
        let limit: i64 = limit.try_into().unwrap_or(i64::MAX);
        let mut out = Vec::new();
        let (_, ints) = res.primitive_integer();
        let mut low = 0usize;
        while ints[low].is_zero() {
            low += 1;
        }
        if low > 0 {
            out.push(0);
        }
        let c0 = ints[low].clone();
        let mut h = 1i64;
        while h <= limit {
            if (&c0 % BigInt::from(h)).is_zero() && res.eval_int(h).is_zero() {
                out.push(h);
            }
            h += 1;
        }
        out
    }

    /// Newton interpolation through distinct nodes.
    pub fn interpolate(xs: &[Rational], ys: &[Rational]) -> Poly {
        let n = xs.len();
        let mut dd: Vec<Rational> = ys.to_vec();
        for j in 1..n {
            for i in (j..n).rev() {
                dd[i] = (&dd[i] - &dd[i - 1]) / (&xs[i] - &xs[i - j]);
            }
        }
        let mut acc = Poly::zero();
        for i in (0..n).rev() {
            acc = &(&acc * &Poly::linear(Rational::one(), -xs[i].clone())) + &Poly::constant(dd[i].clone());
        }
        acc
    }

    /// `(c, v)` with `self = c * v`, `v` integer, primitive and with a
    /// positive leading coefficient.
    pub fn primitive_integer(&self) -> (Rational, Vec<BigInt>) {
        if self.is_zero() {
            return (Rational::zero(), Vec::new());
        }
        let l = self.coeffs.iter().fold(BigInt::one(), |a, c| a.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * Rational::from_integer(l.clone())).to_integer())
            .collect();
        let mut g = ints.iter().fold(BigInt::zero(), |a, c| a.gcd(c));
        if ints.last().expect("nonzero").is_negative() {
            g = -g;
        }
        let ints = ints.into_iter().map(|c| c / &g).collect();
        (Rational::new(g, l), ints)
    }

    /// Integer coefficients when every coefficient is an integer.
    pub fn integer_coeffs(&self) -> Option<Vec<BigInt>> {
        self.coeffs.iter().map(|c| c.is_integer().then(|| c.to_integer())).collect()
    }

    /// Integer roots, found among the divisors of the lowest nonzero
    /// coefficient of the primitive integer form.
    pub fn integer_roots(&self) -> Vec<i64> {
        if self.deg() < 1 {
            return Vec::new();
        }
        let (_, ints) = self.primitive_integer();
        let limit: i64 = self.root_bound().ceil().to_integer().try_into().unwrap_or(i64::MAX);
        let mut low = 0usize;
        while ints[low].is_zero() {
            low += 1;
        }
        let c0 = &ints[low];
        let mut out = Vec::new();
        for h in -limit..=limit {
            if h == 0 {
                if low > 0 {
                    out.push(0);
                }
                continue;
            }
            if (c0 % BigInt::from(h)).is_zero() && self.eval_int(h).is_zero() {
                out.push(h);
            }
        }
        out
    }

    /// Parses polynomial expressions in one variable (`k`, `n`, `j` or `x`)
    /// with `+ - * / ^`, parentheses and implicit multiplication, e.g.
    /// `"(2k+1)^3 - 3/4 k"`. Division is only allowed by constants.
    pub fn parse(s: &str) -> Result<Poly> {
        let tokens = tokenize(s)?;
        let mut p = Parser { tokens, pos: 0, src: s };
        let out = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(out)
    }

    /// Rendering with a chosen variable name.
    pub fn display_var(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let a = c.abs();
            if out.is_empty() {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let coef = format_rational(&a);
            match i {
                0 => out.push_str(&coef),
                _ => {
                    if !a.is_one() {
                        if a.is_integer() {
                            out.push_str(&coef);
                        } else {
                            out.push_str(&format!("({coef})"));
                        }
                        out.push('*');
                    }
                    out.push_str(var);
                    if i > 1 {
                        out.push_str(&format!("^{i}"));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_var("k"))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_coeffs((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_coeffs((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::from_coeffs(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|c| -c).collect())
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for Poly {
            type Output = Poly;
            fn $m(self, rhs: Poly) -> Poly { (&self).$m(&rhs) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Var,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = s.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => {}
            '0'..='9' => {
                let start = i;
                while i + 1 < chars.len() && chars[i + 1].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..=i].iter().collect();
                out.push(Tok::Num(digits.parse().expect("digits")));
            }
            'k' | 'n' | 'j' | 'x' => out.push(Tok::Var),
            '+' => out.push(Tok::Plus),
            '-' | '\u{2212}' => out.push(Tok::Minus),
            '*' | '\u{b7}' => out.push(Tok::Star),
            '/' => out.push(Tok::Slash),
            '^' => out.push(Tok::Caret),
            '(' => out.push(Tok::LParen),
            ')' => out.push(Tok::RParen),
            _ => return Err(Error::Parse(format!("unexpected character `{c}` in polynomial `{s}`"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    src: &'a str,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse(format!("{msg} at token {} in polynomial `{}`", self.pos, self.src))
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn expr(&mut self) -> Result<Poly> {
        let mut acc = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -&self.term()?
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Poly> {
        let mut acc = self.power()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    acc = &acc * &self.power()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let d = self.power()?;
                    if d.deg() != 0 {
                        return Err(self.error("division by a non-constant or zero"));
                    }
                    acc = acc.scale(&d.lc().recip());
                }
                Some(Tok::Num(_)) | Some(Tok::Var) | Some(Tok::LParen) => {
                    acc = &acc * &self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn power(&mut self) -> Result<Poly> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            let Some(Tok::Num(e)) = self.peek().cloned() else {
                return Err(self.error("expected a nonnegative integer exponent"));
            };
            self.pos += 1;
            let e: u32 = e.try_into().map_err(|_| self.error("exponent too large"))?;
            return Ok(base.pow(e));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(Poly::constant(Rational::from_integer(n)))
            }
            Some(Tok::Var) => {
                self.pos += 1;
                Ok(Poly::x())
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.error("missing `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-&self.power()?)
            }
            _ => Err(self.error("expected a number, variable or `(`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    #[test]
    fn parse_forms() {
        let p = Poly::parse("(2k+1)^2 - 3/4 k").unwrap();
        assert_eq!(p, Poly::from_coeffs(vec![int(1), rat(13, 4), int(4)]));
        assert_eq!(Poly::parse("-k^2+3").unwrap(), Poly::from_ints(&[3, 0, -1]));
        assert_eq!(Poly::parse("2(k+1)(k+2)").unwrap(), Poly::from_ints(&[4, 6, 2]));
        assert!(Poly::parse("k/(k+1)").is_err());
        assert!(Poly::parse("k$").is_err());
    }

    #[test]
    fn display_roundtrip() {
        let p = Poly::from_coeffs(vec![rat(-1, 2), int(0), int(-3), int(1)]);
        assert_eq!(Poly::parse(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn gcd_and_shift() {
        let a = &Poly::parse("(k+1)(k+2)").unwrap() * &Poly::parse("2k+1").unwrap();
        let b = &Poly::parse("(k+2)(k-5)").unwrap() * &Poly::parse("3").unwrap();
        assert_eq!(a.gcd(&b), Poly::parse("k+2").unwrap());
        assert_eq!(Poly::parse("k^2").unwrap().shift_int(1), Poly::parse("k^2+2k+1").unwrap());
    }

    #[test]
    fn resultant_and_dispersion() {
        let a = Poly::parse("(k+1)(k-2)").unwrap();
        let b = Poly::parse("k-2").unwrap();
        assert!(a.resultant(&b).is_zero());
        assert_eq!(Poly::parse("k").unwrap().resultant(&Poly::parse("k+3").unwrap()), int(3));
        // gcd(a(k), b(k+h)) nontrivial for h with -1 = r - h or 2 = r - h, r = 5
        let b = Poly::parse("k-5").unwrap();
        assert_eq!(a.dispersion_set(&b), vec![3, 6]);
        assert_eq!(Poly::parse("(2k+1)").unwrap().dispersion_set(&Poly::parse("k").unwrap()), Vec::<i64>::new());
    }

    #[test]
    fn integer_roots_found() {
        let p = Poly::parse("k(k-3)(2k+1)(k+7)").unwrap();
        assert_eq!(p.integer_roots(), vec![-7, 0, 3]);
    }

    #[test]
    fn interpolation() {
        let p = Poly::parse("3k^3 - k + 7/2").unwrap();
        let xs: Vec<Rational> = (0..5).map(int).collect();
        let ys: Vec<Rational> = xs.iter().map(|x| p.eval(x)).collect();
        assert_eq!(Poly::interpolate(&xs, &ys), p);
    }
}
