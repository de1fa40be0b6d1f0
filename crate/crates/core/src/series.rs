//! Term specifications, exact partial sums and certified evaluation of
//! infinite series.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::constants::{const_eval, ConstExpr};
use crate::error::{Error, Result};
use crate::numerics::{binomial, rational_mag_down, rational_mag_up, Ball, Mag, Poly, Rational, RationalFunction};
use crate::sequences::{cached_values, SeqKind};

/// Index substitution `k -> scale * k + offset` applied to a factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexMap {
    pub scale: i64,
    pub offset: i64,
}

impl IndexMap {
    pub const IDENTITY: IndexMap = IndexMap { scale: 1, offset: 0 };

    pub fn apply(&self, k: i64) -> i64 {
        self.scale * k + self.offset
    }
}

impl Default for IndexMap {
    fn default() -> Self {
        IndexMap::IDENTITY
    }
}

/// `kind(index(k))^exponent`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Factor {
    pub kind: SeqKind,
    pub exponent: i32,
    pub index: IndexMap,
}

impl Factor {
    pub fn new(kind: SeqKind, exponent: i32) -> Factor {
        Factor { kind, exponent, index: IndexMap::IDENTITY }
    }

    pub fn central(exponent: i32) -> Factor {
        Factor::new(SeqKind::central_binomial(), exponent)
    }

    /// `C(a k + a0, b k + b0)^exponent`.
    pub fn binom(a: i64, a0: i64, b: i64, b0: i64, exponent: i32) -> Factor {
        Factor::new(SeqKind::AffineBinomial { a, a0, b, b0 }, exponent)
    }

    /// Sequence value at the mapped index, before the exponent.
    fn base_value(&self, k: i64) -> Result<Rational> {
        let j = self.index.apply(k);
        if j < 0 {
            return Err(Error::InvalidParameter(format!("negative index {j} for {}", self.kind)));
        }
        Ok(match self.kind {
            SeqKind::AffineBinomial { a, a0, b, b0 } => Rational::from_integer(binomial(a * j + a0, b * j + b0)),
            SeqKind::Catalan => Rational::new(binomial(2 * j, j), BigInt::from(j + 1)),
            _ => cached_values(&self.kind, j as u64)?[j as usize].clone(),
        })
    }

    fn value(&self, k: i64) -> Result<Rational> {
        let v = self.base_value(k)?;
        if self.exponent < 0 {
            if v.is_zero() {
                return Err(Error::DivisionByZero);
            }
            Ok(num_traits::pow(v.recip(), self.exponent.unsigned_abs() as usize))
        } else {
            Ok(num_traits::pow(v, self.exponent as usize))
        }
    }

    /// `f(k+1)/f(k)` as polynomials in `k` for hypergeometric factors.
    fn ratio(&self) -> Result<Option<(Poly, Poly)>> {
        let IndexMap { scale: mu, offset: nu } = self.index;
        let (num, den) = match self.kind {
            SeqKind::AffineBinomial { a, a0, b, b0 } => binomial_ratio(a * mu, a * nu + a0, b * mu, b * nu + b0)?,
            SeqKind::Catalan => {
                let (n, d) = binomial_ratio(2 * mu, 2 * nu, mu, nu)?;
                let here = Poly::from_ints(&[nu + 1, mu]);
                let next = Poly::from_ints(&[nu + mu + 1, mu]);
                (&n * &here, &d * &next)
            }
            _ => return Ok(None),
        };
        let e = self.exponent;
        let (num, den) = if e >= 0 { (num, den) } else { (den, num) };
        let e = e.unsigned_abs();
        Ok(Some((num.pow(e), den.pow(e))))
    }
}

/// Ratio `C(a(k+1)+a0, b(k+1)+b0) / C(ak+a0, bk+b0)` as `(num, den)`.
fn binomial_ratio(a: i64, a0: i64, b: i64, b0: i64) -> Result<(Poly, Poly)> {
    if a < b || b < 0 {
        return Err(Error::InvalidParameter(format!(
            "binomial C({a}k+{a0}, {b}k+{b0}) is not hypergeometric with a valid ratio"
        )));
    }
    let mut num = Poly::one();
    for i in 1..=a {
        num = &num * &Poly::from_ints(&[a0 + i, a]);
    }
    let mut den = Poly::one();
    for i in 1..=b {
        den = &den * &Poly::from_ints(&[b0 + i, b]);
    }
    for i in 1..=(a - b) {
        den = &den * &Poly::from_ints(&[a0 - b0 + i, a - b]);
    }
    Ok((num, den))
}

/// General term `numer(k)/denom(k) * m^(-k or +k) * prod factors`,
/// summed for `k >= start`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TermSpec {
    pub numer: Poly,
    pub denom: Poly,
    /// The base `m`.
    pub base: Rational,
    /// `true` when `m^k` divides the term.
    pub base_divides: bool,
    pub factors: Vec<Factor>,
    pub start: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailClass {
    /// Ratio bound proved from the exact rational term ratio.
    Rigorous,
    /// Decay rate measured on computed terms, with a safety margin.
    RatioAssumed,
    /// Slowly convergent alternating series; repeated averaging of
    /// partial sums with an error estimate from successive levels.
    Extrapolated,
}

impl fmt::Display for TailClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailClass::Rigorous => "rigorous",
            TailClass::RatioAssumed => "ratio-assumed",
            TailClass::Extrapolated => "extrapolated",
        })
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub value: Ball,
    pub terms_used: u64,
    pub tail_bound: Mag,
    pub tail_class: TailClass,
    pub wall_time: Duration,
    /// Set when the requested accuracy was not reached.
    pub note: Option<String>,
}

impl TermSpec {
    /// `numer(k) * factors / m^k` from `start`.
    pub fn new(numer: Poly, base: Rational, factors: Vec<Factor>, start: u64) -> TermSpec {
        TermSpec { numer, denom: Poly::one(), base, base_divides: true, factors, start }
    }

    pub fn with_denom(mut self, denom: Poly) -> TermSpec {
        self.denom = denom;
        self
    }

    /// Makes `m^k` multiply the term instead of dividing it.
    pub fn base_multiplies(mut self) -> TermSpec {
        self.base_divides = false;
        self
    }

    /// Per-index geometric factor `g` with `m^(+-k) = g^k`.
    pub fn geometric(&self) -> Rational {
        if self.base_divides {
            self.base.recip()
        } else {
            self.base.clone()
        }
    }

    pub fn with_numer(&self, numer: Poly) -> TermSpec {
        TermSpec { numer, ..self.clone() }
    }

    pub fn is_hypergeometric(&self) -> bool {
        self.factors.iter().all(|f| f.kind.is_hypergeometric())
    }

    pub fn validate(&self) -> Result<()> {
        if self.base.is_zero() {
            return Err(Error::InvalidParameter("base must be nonzero".into()));
        }
        if self.denom.is_zero() {
            return Err(Error::DivisionByZero);
        }
        for f in &self.factors {
            f.kind.validate()?;
            if f.index.apply(self.start as i64) < 0 || f.index.scale < 0 {
                return Err(Error::InvalidParameter(format!("factor {} has a negative index", f.kind)));
            }
        }
        Ok(())
    }

    /// Exact value of the `k`-th term.
    pub fn term_exact(&self, k: u64) -> Result<Rational> {
        let ki = k as i64;
        let kr = Rational::from_integer(ki.into());
        let num = self.numer.eval(&kr);
        if num.is_zero() {
            return Ok(Rational::zero());
        }
        let den = self.denom.eval(&kr);
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut t = num / den * num_traits::pow(self.geometric(), k as usize);
        for f in &self.factors {
            t *= f.value(ki)?;
        }
        Ok(t)
    }

    /// Ratio of the factor part `g^k prod factors`, when it is a rational
    /// function of `k`.
    pub fn factor_ratio(&self) -> Result<Option<RationalFunction>> {
        let mut num = Poly::constant(self.geometric());
        let mut den = Poly::one();
        for f in &self.factors {
            match f.ratio()? {
                Some((n, d)) => {
                    num = &num * &n;
                    den = &den * &d;
                }
                None => return Ok(None),
            }
        }
        Ok(Some(RationalFunction::new(num, den)?))
    }

    /// Full term ratio `t(k+1)/t(k)` for hypergeometric specs.
    pub fn ratio(&self) -> Result<Option<RationalFunction>> {
        let Some(fr) = self.factor_ratio()? else { return Ok(None) };
        if self.numer.is_zero() {
            return Ok(Some(RationalFunction::from_poly(Poly::zero())));
        }
        let one = Rational::one();
        let poly_part = RationalFunction::new(&self.numer.shift(&one) * &self.denom, &self.numer * &self.denom.shift(&one))?;
        Ok(Some(fr.mul(&poly_part)))
    }

    /// Exact `sum_{k=start}^{n} t(k)`; binary splitting for hypergeometric
    /// specs.
    pub fn partial_sum_exact(&self, n: u64) -> Result<Rational> {
        if n < self.start {
            return Err(Error::Precondition(format!("partial sum end {n} precedes start {}", self.start)));
        }
        if self.numer.is_zero() {
            return Ok(Rational::zero());
        }
        if let Some(split) = HyperSplit::new(self)? {
            return split.sum_to(self, n);
        }
        self.partial_sum_naive(n)
    }

    pub fn partial_sum_naive(&self, n: u64) -> Result<Rational> {
        let mut acc = Rational::zero();
        for k in self.start..=n {
            acc += self.term_exact(k)?;
        }
        Ok(acc)
    }

    /// Bound for `|sum_{k > k0} t(k)|`.
    pub fn tail_bound(&self, k0: u64) -> Result<(Mag, TailClass)> {
        if self.numer.is_zero() {
            return Ok((Mag::ZERO, TailClass::Rigorous));
        }
        if let Some(r) = self.ratio()? {
            return rigorous_tail(self, &r, k0).map(|m| (m, TailClass::Rigorous));
        }
        let terms: Vec<Mag> = (self.start..=k0).map(|k| self.term_exact(k).map(|t| rational_mag_up(&t))).collect::<Result<_>>()?;
        empirical_tail(&terms).map(|m| (m, TailClass::RatioAssumed))
    }

    /// Certified value with absolute radius below `10^-digits` when the
    /// tail policy allows it.
    pub fn evaluate(&self, digits: u32) -> Result<EvalReport> {
        let t0 = Instant::now();
        self.validate()?;
        let work_prec = digits_to_bits(digits) + 64;
        if self.numer.is_zero() {
            return Ok(EvalReport {
                value: Ball::zero(work_prec),
                terms_used: 0,
                tail_bound: Mag::ZERO,
                tail_class: TailClass::Rigorous,
                wall_time: t0.elapsed(),
                note: None,
            });
        }
        let target = rational_mag_down(&Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits as usize + 5)));
        let (value, n, tail, class) = match self.ratio()? {
            Some(r) => {
                let lim = r.limit_at_infinity().ok_or_else(|| Error::NoDecay("term ratio is unbounded".into()))?;
                let l = lim.abs();
                if l > Rational::one() {
                    return Err(Error::NoDecay(format!("term ratio tends to {lim}")));
                }
                if l == Rational::one() {
                    if lim.is_negative() {
                        return self.evaluate_alternating_slow(digits, t0);
                    }
                    return Err(Error::NoDecay("term ratio tends to 1".into()));
                }
                let rate = l.to_f64().unwrap_or(0.0).max(1e-300);
                let mut n = self.start + 16 + ((digits as f64 + 8.0) * std::f64::consts::LN_10 / -rate.ln()).ceil() as u64;
                let split = HyperSplit::new(self)?;
                loop {
                    let tail = rigorous_tail(self, &r, n)?;
                    if tail < target {
                        let sum = match &split {
                            Some(s) => s.sum_to(self, n)?,
                            None => self.partial_sum_naive(n)?,
                        };
                        let mag_bits = rational_mag_up(&sum).log2().max(0.0) as u32;
                        break (Ball::from_rational(&sum, work_prec + mag_bits), n, tail, TailClass::Rigorous);
                    }
                    n = 2 * n + 16;
                    if n > 4_000_000 {
                        return Err(Error::NoDecay("tail bound does not reach the target".into()));
                    }
                }
            }
            None => self.evaluate_by_terms(digits, work_prec, &target)?,
        };
        let value = value.add_error(&tail);
        Ok(EvalReport {
            value,
            terms_used: n - self.start + 1,
            tail_bound: tail,
            tail_class: class,
            wall_time: t0.elapsed(),
            note: None,
        })
    }

    /// Ratio-assumed evaluation for specs with non-hypergeometric factors:
    /// terms are summed as balls, and the precision is raised until the
    /// rounding error is below the target.
    fn evaluate_by_terms(&self, digits: u32, work_prec: u32, target: &Mag) -> Result<(Ball, u64, Mag, TailClass)> {
        let mut prec = work_prec + 64;
        loop {
            let mut acc = TermAccumulator::new(self, prec)?;
            let mut n = self.start + 63;
            acc.extend_to(n)?;
            // terms may grow for a while before the geometric decay shows
            let rate = loop {
                if let Some(rate) = empirical_rate(&acc.mags) {
                    break rate;
                }
                if n > self.start + 8192 {
                    return Err(Error::NoDecay("terms do not decay".into()));
                }
                n = 2 * n + 16;
                acc.extend_to(n)?;
            };
            n = n.max(self.start + 16 + ((digits as f64 + 8.0) * std::f64::consts::LN_10 / -rate).ceil() as u64);
            let tail = loop {
                acc.extend_to(n)?;
                let tail = empirical_tail(&acc.mags)?;
                if tail < *target {
                    break tail;
                }
                n += n / 4 + 16;
                if n > 200_000 {
                    return Err(Error::NoDecay("tail bound does not reach the target".into()));
                }
            };
            let rad = acc.sum.radius();
            if rad < *target {
                return Ok((acc.sum, n, tail, TailClass::RatioAssumed));
            }
            prec += (rad.log2() - target.log2()).ceil().max(0.0) as u32 + 32;
        }
    }

    /// Alternating series whose terms decay only polynomially: repeated
    /// averaging of consecutive exact partial sums.
    fn evaluate_alternating_slow(&self, digits: u32, t0: Instant) -> Result<EvalReport> {
        const LEVELS: usize = 40;
        let n = self.start + 4096;
        let mut sums = Vec::with_capacity(LEVELS + 1);
        let mut s = self.partial_sum_exact(n)?;
        sums.push(s.clone());
        for i in 1..=LEVELS as u64 {
            s += self.term_exact(n + i)?;
            sums.push(s.clone());
        }
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut level = sums;
        let mut prev_first = level[0].clone();
        let mut diffs = Vec::new();
        while level.len() > 1 {
            level = level.windows(2).map(|w| (&w[0] + &w[1]) * &half).collect();
            diffs.push((&level[0] - &prev_first).abs());
            prev_first = level[0].clone();
        }
        let est = level.remove(0);
        // error estimate: largest of the last few level-to-level changes
        let last = diffs.iter().rev().take(4).max().cloned().unwrap_or_default();
        let err = rational_mag_up(&(last * Rational::from_integer(BigInt::from(16))));
        let work_prec = digits_to_bits(digits) + 64;
        let value = Ball::from_rational(&est, work_prec).add_error(&err);
        let target = rational_mag_down(&Rational::new(BigInt::one(), num_traits::pow(BigInt::from(10), digits as usize)));
        let note = (err >= target).then(|| {
            format!(
                "alternating series with polynomial decay; about {:.0} digits reachable",
                -err.log2() * std::f64::consts::LOG10_2
            )
        });
        Ok(EvalReport {
            value,
            terms_used: n + LEVELS as u64 - self.start + 1,
            tail_bound: err,
            tail_class: TailClass::Extrapolated,
            wall_time: t0.elapsed(),
            note,
        })
    }
}

/// Difference between a certified series value and a closed form.
#[derive(Debug, Clone)]
pub struct IdentityCheck {
    pub report: EvalReport,
    pub residual: Ball,
}

impl IdentityCheck {
    /// Residual contains zero with radius below `10^-digits`.
    pub fn holds_to(&self, digits: u32) -> bool {
        self.residual.contains_zero() && self.residual.radius_log10() < -(digits as f64)
    }
}

/// Evaluates `spec` to `digits` and subtracts `rhs`.
pub fn check_identity(spec: &TermSpec, rhs: &ConstExpr, digits: u32) -> Result<IdentityCheck> {
    let report = spec.evaluate(digits)?;
    let headroom = report.value.mag_upper().log2().max(0.0).ceil() as u32;
    let closed = const_eval(rhs, digits_to_bits(digits) + 64 + headroom)?;
    let residual = report.value.sub(&closed);
    Ok(IdentityCheck { report, residual })
}

pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32
}

/// Rigorous geometric tail beyond `k0` for a hypergeometric spec.
fn rigorous_tail(spec: &TermSpec, r: &RationalFunction, k0: u64) -> Result<Mag> {
    let lim = r.limit_at_infinity().ok_or_else(|| Error::NoDecay("term ratio is unbounded".into()))?;
    let (num, den) = (r.num(), r.den());
    // beyond these bounds R has no zeros, poles or critical points, so |R|
    // is monotone and its supremum is attained at an end
    let w = &(&num.derivative() * den) - &(num * &den.derivative());
    let bound = [num.root_bound(), den.root_bound(), w.root_bound()]
        .into_iter()
        .fold(Rational::zero(), |a, b| if b > a { b } else { a });
    let mono_from = bound.ceil().to_integer().to_u64().unwrap_or(u64::MAX).max(spec.start);
    let first = (k0 + 1).max(mono_from);
    let at_first = r.eval(&Rational::from_integer(first.into()))?.abs();
    let rho = if at_first > lim.abs() { at_first } else { lim.abs() };
    if rho >= Rational::one() {
        return Err(Error::NoDecay(format!("ratio bound {} at index {first} is not below 1", rho)));
    }
    let mut total = Mag::ZERO;
    for k in (k0 + 1)..first {
        total = total.add_up(&rational_mag_up(&spec.term_exact(k)?));
    }
    let t_first = rational_mag_up(&spec.term_exact(first)?);
    let factor = rational_mag_up(&(Rational::one() / (Rational::one() - rho)));
    Ok(total.add_up(&t_first.mul_up(&factor)))
}

fn log2_mag(m: &Mag) -> f64 {
    if m.is_zero() {
        f64::NEG_INFINITY
    } else {
        m.log2()
    }
}

/// Window-maxima decay rate (natural log per index) of the last terms.
fn empirical_rate(terms: &[Mag]) -> Option<f64> {
    let n = terms.len();
    if n < 32 {
        return None;
    }
    let w = (n / 8).max(12);
    let max_in = |a: usize, b: usize| terms[a..b].iter().map(log2_mag).fold(f64::NEG_INFINITY, f64::max);
    let m1 = max_in(n - 2 * w, n - w);
    let m2 = max_in(n - w, n);
    let rate = (m2 - m1) / w as f64 * std::f64::consts::LN_2;
    (rate.is_finite() && rate < 0.0).then_some(rate)
}

/// Tail estimate from the measured decay rate: the rate is halved and the
/// result doubled before summing the geometric majorant.
fn empirical_tail(terms: &[Mag]) -> Result<Mag> {
    let rate = empirical_rate(terms).ok_or_else(|| Error::NoDecay("terms do not decay".into()))?;
    let n = terms.len();
    let w = (n / 8).max(12);
    let last_max = terms[n - w..].iter().copied().fold(Mag::ZERO, Mag::max);
    let q = (rate / 2.0).exp();
    let factor = 2.0 * q / (1.0 - q);
    Ok(last_max.mul_up(&Mag::from_f64_up(factor)))
}

/// Running ball sum of consecutive terms with their magnitudes.
struct TermAccumulator<'a> {
    spec: &'a TermSpec,
    prec: u32,
    next: u64,
    g: Ball,
    g_pow: Ball,
    sum: Ball,
    mags: Vec<Mag>,
    /// Integer ratios `f(k+1)/f(k)` of binomial factors before the
    /// exponent, with the exact values at `next`.
    ratios: Vec<Option<(Poly, Poly)>>,
    current: Vec<Option<BigInt>>,
}

impl<'a> TermAccumulator<'a> {
    fn new(spec: &'a TermSpec, prec: u32) -> Result<TermAccumulator<'a>> {
        let g = Ball::from_rational(&spec.geometric(), prec);
        let g_pow = Ball::from_rational(&num_traits::pow(spec.geometric(), spec.start as usize), prec);
        let ratios: Vec<_> = spec
            .factors
            .iter()
            .map(|f| match f.kind {
                SeqKind::AffineBinomial { .. } => Factor { exponent: 1, ..f.clone() }.ratio().ok().flatten(),
                _ => None,
            })
            .collect();
        let current = vec![None; ratios.len()];
        Ok(TermAccumulator { spec, prec, next: spec.start, g, g_pow, sum: Ball::zero(prec), mags: Vec::new(), ratios, current })
    }

    fn extend_to(&mut self, n: u64) -> Result<()> {
        while self.next <= n {
            let k = self.next;
            let t = self.term(k)?;
            self.advance_factors(k)?;
            self.mags.push(t.mag_upper());
            self.sum = self.sum.add(&t);
            self.g_pow = self.g_pow.mul(&self.g);
            self.next += 1;
        }
        Ok(())
    }

    fn term(&self, k: u64) -> Result<Ball> {
        let kr = Rational::from_integer((k as i64).into());
        let num = self.spec.numer.eval(&kr);
        if num.is_zero() {
            return Ok(Ball::zero(self.prec));
        }
        let den = self.spec.denom.eval(&kr);
        if den.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut t = self.g_pow.mul_rational(&(num / den));
        for (f, cur) in self.spec.factors.iter().zip(&self.current) {
            let v = match cur {
                Some(v) => Ball::from_bigint(v, self.prec),
                None => Ball::from_rational(&f.base_value(k as i64)?, self.prec),
            };
            if v.is_exact() && v.mid_dyadic().0.is_zero() {
                return if f.exponent < 0 { Err(Error::DivisionByZero) } else { Ok(Ball::zero(self.prec)) };
            }
            t = t.mul(&v.pow_int(f.exponent as i64)?);
        }
        Ok(t)
    }

    /// Moves exact hypergeometric factor values from `k` to `k + 1`.
    fn advance_factors(&mut self, k: u64) -> Result<()> {
        let kr = Rational::from_integer((k as i64).into());
        for (i, f) in self.spec.factors.iter().enumerate() {
            let Some((num, den)) = &self.ratios[i] else { continue };
            let v = match self.current[i].take() {
                Some(v) => v,
                None => f.base_value(k as i64)?.to_integer(),
            };
            let (n, d) = (num.eval(&kr).to_integer(), den.eval(&kr).to_integer());
            self.current[i] = (!v.is_zero() && !n.is_zero() && !d.is_zero()).then(|| v * n / d);
        }
        Ok(())
    }
}

type IntPoly = Vec<BigInt>;

fn eval_int(p: &IntPoly, x: u64) -> BigInt {
    let mut acc = BigInt::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Binary splitting data for `t(k+1)/t(k) = p(k)/q(k)` with integer
/// polynomials, valid from `k0` on.
struct HyperSplit {
    p: IntPoly,
    q: IntPoly,
    k0: u64,
}

impl HyperSplit {
    fn new(spec: &TermSpec) -> Result<Option<HyperSplit>> {
        let Some(r) = spec.ratio()? else { return Ok(None) };
        if r.is_zero() {
            return Ok(None);
        }
        let (cn, pn) = r.num().primitive_integer();
        let (cd, qd) = r.den().primitive_integer();
        let c = cn / cd;
        let p: IntPoly = pn.iter().map(|x| x * c.numer()).collect();
        let q: IntPoly = qd.iter().map(|x| x * c.denom()).collect();
        let roots = r.num().integer_roots().into_iter().chain(r.den().integer_roots());
        let k0 = roots.filter(|&x| x >= 0).map(|x| x as u64 + 1).max().unwrap_or(0).max(spec.start);
        Ok(Some(HyperSplit { p, q, k0 }))
    }

    fn split(&self, a: u64, b: u64) -> (BigInt, BigInt, BigInt) {
        if b - a == 1 {
            let q = eval_int(&self.q, a);
            return (eval_int(&self.p, a), q.clone(), q);
        }
        let m = a + (b - a) / 2;
        let ((p1, q1, t1), (p2, q2, t2)) = if b - a > 512 {
            rayon::join(|| self.split(a, m), || self.split(m, b))
        } else {
            (self.split(a, m), self.split(m, b))
        };
        let t = t1 * &q2 + &p1 * t2;
        (p1 * p2, q1 * q2, t)
    }

    fn sum_to(&self, spec: &TermSpec, n: u64) -> Result<Rational> {
        let naive_end = n.min(self.k0.saturating_sub(1));
        let mut acc = Rational::zero();
        if self.k0 > spec.start {
            for k in spec.start..=naive_end {
                acc += spec.term_exact(k)?;
            }
        }
        if n >= self.k0 {
            let head = spec.term_exact(self.k0)?;
            let (_, q, t) = self.split(self.k0, n + 1);
            acc += head * Rational::new(t, q);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{int, rat};

    fn s1() -> TermSpec {
        let numer = &Poly::parse("6k^2-19k+6").unwrap() * &Poly::parse("k^3").unwrap();
        TermSpec::new(numer, int(256), vec![Factor::central(3)], 0)
    }

    #[test]
    fn term_values() {
        assert_eq!(s1().term_exact(1).unwrap(), rat(-7, 32));
        let t1 = TermSpec::new(Poly::parse("198k^2-227k+47").unwrap(), int(1), vec![Factor::central(-3)], 0);
        assert_eq!(t1.term_exact(0).unwrap(), int(47));
        assert_eq!(s1().with_numer(Poly::zero()).term_exact(0).unwrap(), int(0));
    }

    #[test]
    fn ratio_of_central_cube() {
        let spec = TermSpec::new(Poly::one(), int(256), vec![Factor::central(3)], 0);
        let r = spec.ratio().unwrap().unwrap();
        let expect = RationalFunction::new(Poly::parse("(2k+1)^3").unwrap(), Poly::parse("32(k+1)^3").unwrap()).unwrap();
        assert_eq!(r, expect);
    }

    #[test]
    fn split_matches_naive() {
        let specs = [
            s1(),
            TermSpec::new(Poly::parse("24k^3-12k^2-6k-1").unwrap(), int(256), vec![Factor::central(3)], 0),
            TermSpec::new(Poly::parse("k+1").unwrap(), int(-27), vec![Factor::binom(2, 0, 1, 1, 2), Factor::binom(3, 0, 1, 1, 1)], 1),
            TermSpec::new(Poly::parse("3k+2").unwrap(), int(8), vec![Factor::new(SeqKind::Catalan, 2)], 0),
            TermSpec::new(Poly::parse("k^2").unwrap(), int(1), vec![Factor::central(-3)], 1)
                .with_denom(Poly::parse("(2k-1)^3").unwrap()),
        ];
        for spec in &specs {
            for n in [spec.start, spec.start + 1, 7, 40, 200] {
                assert_eq!(spec.partial_sum_exact(n).unwrap(), spec.partial_sum_naive(n).unwrap());
            }
        }
    }

    #[test]
    fn dd_partial_sums() {
        let spec = TermSpec::new(Poly::parse("24k^3-12k^2-6k-1").unwrap(), int(256), vec![Factor::central(3)], 0);
        for n in 0..=50u64 {
            let c = Rational::from_integer(binomial(2 * n as i64, n as i64));
            let closed = -num_traits::pow(int(2 * n as i64 + 1), 3) * num_traits::pow(c, 3)
                / num_traits::pow(int(256), n as usize);
            assert_eq!(spec.partial_sum_exact(n).unwrap(), closed);
        }
    }

    #[test]
    fn s1_evaluates() {
        let rep = s1().evaluate(50).unwrap();
        assert_eq!(rep.tail_class, TailClass::Rigorous);
        let rhs = const_eval(&ConstExpr::parse("-1/(12 pi)").unwrap(), 200).unwrap();
        let diff = rep.value.sub(&rhs);
        assert!(diff.contains_zero());
        assert!(diff.radius_log10() < -50.0);
    }

    #[test]
    fn zero_spec() {
        let rep = s1().with_numer(Poly::zero()).evaluate(20).unwrap();
        assert!(rep.value.is_exact() && rep.value.contains_zero());
        assert_eq!(rep.terms_used, 0);
    }

    #[test]
    fn domb_series_is_ratio_assumed() {
        let spec = TermSpec::new(Poly::parse("5k+1").unwrap(), int(64), vec![Factor::new(SeqKind::Domb, 1)], 0);
        let rep = spec.evaluate(40).unwrap();
        assert_eq!(rep.tail_class, TailClass::RatioAssumed);
        let rhs = const_eval(&ConstExpr::parse("8/(sqrt(3)*pi)").unwrap(), 200).unwrap();
        assert!(rep.value.sub(&rhs).contains_zero());
    }

    #[test]
    fn divergent_series_reported() {
        let spec = TermSpec::new(Poly::one(), int(2), vec![Factor::central(1)], 0);
        assert!(matches!(spec.evaluate(20), Err(Error::NoDecay(_))));
    }

    #[test]
    fn bauer_slow_series() {
        let spec = TermSpec::new(Poly::parse("4k+1").unwrap(), int(-64), vec![Factor::central(3)], 0);
        let rep = spec.evaluate(12).unwrap();
        assert_eq!(rep.tail_class, TailClass::Extrapolated);
        let rhs = const_eval(&ConstExpr::parse("2/pi").unwrap(), 100).unwrap();
        let diff = rep.value.sub(&rhs);
        assert!(diff.contains_zero(), "{diff}");
        assert!(diff.radius_log10() < -12.0, "{}", diff.radius_log10());
    }
}
