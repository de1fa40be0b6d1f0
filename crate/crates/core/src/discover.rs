//! Integer-relation detection over certified values.
//!
//! [`pslq`] is a fixed-point PSLQ with a norm-based exclusion bound; a
//! candidate becomes a [`Discovery`] only after the values are recomputed
//! at higher precision and the residual ball still contains zero.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::constants::{atom_eval, ConstAtom, ConstExpr, Monomial};
use crate::error::{Error, Result};
use crate::numerics::{iroot, Ball, Poly, Rational};
use crate::series::{digits_to_bits, TermSpec};

/// Extra bits carried by the fixed-point iteration.
const EXTRA_BITS: u32 = 64;

#[derive(Debug, Clone)]
pub struct RelationProblem {
    pub values: Vec<Ball>,
    /// Largest coefficient magnitude searched for.
    pub max_norm: BigInt,
    /// Working precision in decimal digits.
    pub digits: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    /// Primitive, first nonzero entry positive.
    pub coefficients: Vec<BigInt>,
    /// Enclosure of `sum a_i x_i` over the input balls.
    pub residual: Ball,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PslqOutcome {
    Found(Relation),
    /// No relation with norm below `norm_bound` exists among the values.
    Excluded { norm_bound: f64 },
}

/// Smallest working precision for `n` values and coefficients below `max_norm`.
pub fn required_digits(n: usize, max_norm: &BigInt) -> u32 {
    let coeff_digits = max_norm.to_string().trim_start_matches('-').len() as u32;
    20 + n as u32 * coeff_digits
}

/// Scales to gcd 1 and makes the first nonzero entry positive.
pub fn normalize(v: &[BigInt]) -> Vec<BigInt> {
    let g = v.iter().fold(BigInt::zero(), |g, x| g.gcd(x));
    if g.is_zero() {
        return v.to_vec();
    }
    let sign = match v.iter().find(|x| !x.is_zero()).map(|x| x.sign()) {
        Some(Sign::Minus) => -BigInt::one(),
        _ => BigInt::one(),
    };
    v.iter().map(|x| x / &g * &sign).collect()
}

/// Primitive integer vector proportional to a rational vector.
pub fn integer_direction(v: &[Rational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |l, x| l.lcm(x.denom()));
    let ints: Vec<BigInt> = v.iter().map(|x| (x * Rational::from_integer(lcm.clone())).to_integer()).collect();
    normalize(&ints)
}

pub fn residual(coefficients: &[BigInt], values: &[Ball]) -> Ball {
    let prec = values.iter().map(Ball::prec).max().unwrap_or(64);
    coefficients
        .iter()
        .zip(values)
        .fold(Ball::zero(prec), |acc, (a, x)| acc.add(&x.mul(&Ball::from_bigint(a, prec))))
}

fn to_fixed(b: &Ball, prec: u32) -> BigInt {
    let (man, exp) = b.mid_dyadic();
    let shift = exp + prec as i64;
    if shift >= 0 {
        man << shift as usize
    } else {
        man >> (-shift) as usize
    }
}

fn sqrt_fixed(x: &BigInt, prec: u32) -> BigInt {
    iroot(&(x << prec as usize), 2)
}

fn round_fixed(x: &BigInt, prec: u32) -> BigInt {
    (x + (BigInt::one() << (prec as usize - 1))) >> prec as usize
}

fn relation_from(col: Vec<BigInt>, values: &[Ball]) -> Relation {
    let coefficients = normalize(&col);
    let residual = residual(&coefficients, values);
    Relation { coefficients, residual }
}

/// Searches for integers `a` with `sum a_i x_i = 0`, `max |a_i| <= max_norm`,
/// detected when a reduced coordinate drops below `10^(-0.6 digits)`.
pub fn pslq(problem: &RelationProblem) -> Result<PslqOutcome> {
    let n = problem.values.len();
    if n < 2 {
        return Err(Error::InvalidParameter("PSLQ needs at least two values".into()));
    }
    if !problem.max_norm.is_positive() {
        return Err(Error::InvalidParameter("max_norm must be positive".into()));
    }
    for (i, v) in problem.values.iter().enumerate() {
        if v.radius_log10() > -(problem.digits as f64) {
            return Err(Error::InvalidParameter(format!(
                "value {i} is known only to 10^{:.1}, above the working precision",
                v.radius_log10()
            )));
        }
    }
    let needed = required_digits(n, &problem.max_norm);
    if problem.digits < needed {
        return Err(Error::InsufficientPrecision { required_digits: needed });
    }
    let prec = digits_to_bits(problem.digits) + EXTRA_BITS;
    let tol_bits = (0.6 * problem.digits as f64 * std::f64::consts::LOG2_10) as u32;
    let tol = BigInt::one() << (prec - tol_bits) as usize;
    let one = BigInt::one() << prec as usize;
    let x: Vec<BigInt> = problem.values.iter().map(|b| to_fixed(b, prec)).collect();
    if let Some(i) = x.iter().position(|xi| xi.abs() < tol) {
        let mut unit = vec![BigInt::zero(); n];
        unit[i] = BigInt::one();
        return Ok(PslqOutcome::Found(relation_from(unit, &problem.values)));
    }

    let mut b = vec![vec![BigInt::zero(); n]; n];
    for (i, row) in b.iter_mut().enumerate() {
        row[i] = BigInt::one();
    }
    let mut s = vec![BigInt::zero(); n];
    for k in 0..n {
        let t: BigInt = x[k..].iter().map(|xj| (xj * xj) >> prec as usize).sum();
        s[k] = sqrt_fixed(&t, prec);
    }
    let t = s[0].clone();
    let mut y: Vec<BigInt> = x.iter().map(|xk| (xk << prec as usize) / &t).collect();
    for sk in s.iter_mut() {
        *sk = (&*sk << prec as usize) / &t;
    }
    let mut h = vec![vec![BigInt::zero(); n - 1]; n];
    for i in 0..n {
        if i + 1 < n && !s[i].is_zero() {
            h[i][i] = (&s[i + 1] << prec as usize) / &s[i];
        }
        for j in 0..i.min(n - 1) {
            let sjj = &s[j] * &s[j + 1];
            if !sjj.is_zero() {
                h[i][j] = ((-&y[i] * &y[j]) << prec as usize) / sjj;
            }
        }
    }
    let reduce = |i: usize, j: usize, h: &mut [Vec<BigInt>], y: &mut [BigInt], b: &mut [Vec<BigInt>]| -> bool {
        if h[j][j].is_zero() {
            return false;
        }
        let t = round_fixed(&((&h[i][j] << prec as usize) / &h[j][j]), prec);
        if t.is_zero() {
            return true;
        }
        y[j] = &y[j] + &t * &y[i];
        for k in 0..=j {
            h[i][k] = &h[i][k] - &t * &h[j][k];
        }
        for row in b.iter_mut() {
            row[j] = &row[j] + &t * &row[i];
        }
        true
    };
    for i in 1..n {
        for j in (0..i).rev() {
            reduce(i, j, &mut h, &mut y, &mut b);
        }
    }

    let g = sqrt_fixed(&((BigInt::from(4) << prec as usize) / 3), prec);
    let max_steps = 2000 * n * n;
    let mut norm_bound = 0.0f64;
    for _ in 0..max_steps {
        let mut m = 0;
        let mut best = BigInt::from(-1);
        let mut gpow = g.clone();
        for (i, row) in h.iter().enumerate().take(n - 1) {
            let sz = (&gpow * row[i].abs()) >> prec as usize;
            if sz > best {
                best = sz;
                m = i;
            }
            gpow = (&gpow * &g) >> prec as usize;
        }
        y.swap(m, m + 1);
        h.swap(m, m + 1);
        for row in b.iter_mut() {
            row.swap(m, m + 1);
        }
        if m + 2 < n {
            let t0 = sqrt_fixed(&((&h[m][m] * &h[m][m] + &h[m][m + 1] * &h[m][m + 1]) >> prec as usize), prec);
            if t0.is_zero() {
                break;
            }
            let t1 = (&h[m][m] << prec as usize) / &t0;
            let t2 = (&h[m][m + 1] << prec as usize) / &t0;
            for row in h.iter_mut().skip(m) {
                let (t3, t4) = (row[m].clone(), row[m + 1].clone());
                row[m] = (&t1 * &t3 + &t2 * &t4) >> prec as usize;
                row[m + 1] = (-&t2 * &t3 + &t1 * &t4) >> prec as usize;
            }
        }
        for i in m + 1..n {
            for j in (0..=(i - 1).min(m + 1)).rev() {
                if !reduce(i, j, &mut h, &mut y, &mut b) {
                    break;
                }
            }
        }
        for i in 0..n {
            if y[i].abs() < tol {
                let col: Vec<BigInt> = (0..n).map(|j| b[j][i].clone()).collect();
                if col.iter().all(|c| c.abs() <= problem.max_norm) {
                    return Ok(PslqOutcome::Found(relation_from(col, &problem.values)));
                }
            }
        }
        let rec = h.iter().flatten().map(|v| v.abs()).max().unwrap_or_default();
        if rec.is_zero() {
            break;
        }
        let bound = (&one / &rec).to_f64().unwrap_or(f64::INFINITY);
        norm_bound = norm_bound.max(bound);
        if bound >= problem.max_norm.to_f64().unwrap_or(f64::INFINITY) {
            break;
        }
    }
    Ok(PslqOutcome::Excluded { norm_bound })
}

#[derive(Debug, Clone)]
pub struct Discovery {
    pub outcome: PslqOutcome,
    /// Precision of the independent re-evaluation, when a candidate was found.
    pub recheck_digits: Option<u32>,
    /// Candidate residual still contains zero after re-evaluation.
    pub accepted: bool,
}

/// Runs PSLQ on `values(digits)` and re-verifies any candidate on
/// `values(digits + margin)`.
pub fn find_relation(
    values: &(dyn Fn(u32) -> Result<Vec<Ball>> + Sync),
    digits: u32,
    max_norm: &BigInt,
    margin: u32,
) -> Result<Discovery> {
    let problem = RelationProblem { values: values(digits)?, max_norm: max_norm.clone(), digits };
    let outcome = pslq(&problem)?;
    let PslqOutcome::Found(rel) = &outcome else {
        return Ok(Discovery { outcome, recheck_digits: None, accepted: false });
    };
    let hi = digits + margin;
    let check = residual(&rel.coefficients, &values(hi)?);
    let threshold = -0.6 * hi as f64;
    let accepted = rel.residual.contains_zero() && check.contains_zero() && check.radius_log10() < threshold;
    Ok(Discovery { outcome, recheck_digits: Some(hi), accepted })
}

/// Coefficient budget that keeps `n` values within the precision heuristic.
pub fn max_norm_for(n: usize, digits: u32) -> BigInt {
    let coeff_digits = ((digits.saturating_sub(20)) / n as u32).clamp(1, 40);
    BigInt::from(10).pow(coeff_digits) - 1
}

/// Basis used to rediscover `sum numer(k) t(k) = rhs`: the monomial sums
/// `sum k^j t(k)` over the support of `numer`, then the monomials of `rhs`.
#[derive(Debug, Clone)]
pub struct RelationBasis {
    pub sums: Vec<TermSpec>,
    pub exponents: Vec<usize>,
    pub constants: Vec<Monomial>,
    /// Normalized relation implied by the identity.
    pub expected: Vec<BigInt>,
}

impl RelationBasis {
    pub fn for_identity(spec: &TermSpec, rhs: &ConstExpr) -> Result<RelationBasis> {
        let coeffs = spec.numer.coeffs();
        let lo = coeffs.iter().position(|c| !c.is_zero());
        let Some(lo) = lo else {
            return Err(Error::InvalidParameter("identity has a zero summand".into()));
        };
        let exponents: Vec<usize> = (lo..coeffs.len()).collect();
        let sums = exponents.iter().map(|&j| spec.with_numer(Poly::x().pow(j as u32))).collect();
        let mut expected: Vec<Rational> = exponents.iter().map(|&j| coeffs[j].clone()).collect();
        let mut constants = Vec::new();
        for (c, mono) in rhs.terms() {
            constants.push(mono.clone());
            expected.push(-c);
        }
        if constants.is_empty() {
            constants.push(Vec::new());
            expected.push(Rational::zero());
        }
        Ok(RelationBasis { sums, exponents, constants, expected: integer_direction(&expected) })
    }

    pub fn len(&self) -> usize {
        self.sums.len() + self.constants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Values at `digits`, with atoms supplied by `atom_value`.
    pub fn values_with(
        &self,
        digits: u32,
        atom_value: &(dyn Fn(&ConstAtom, u32) -> Result<Ball> + Sync),
    ) -> Result<Vec<Ball>> {
        let eval_digits = digits + 10;
        let mut out: Vec<Ball> =
            self.sums.par_iter().map(|s| s.evaluate(eval_digits).map(|r| r.value)).collect::<Result<_>>()?;
        let prec = digits_to_bits(eval_digits) + 32;
        for mono in &self.constants {
            out.push(monomial_value(mono, prec, atom_value)?);
        }
        Ok(out)
    }

    pub fn values(&self, digits: u32) -> Result<Vec<Ball>> {
        self.values_with(digits, &atom_eval)
    }
}

pub fn monomial_value(
    mono: &Monomial,
    prec: u32,
    atom_value: &(dyn Fn(&ConstAtom, u32) -> Result<Ball> + Sync),
) -> Result<Ball> {
    let mut acc = Ball::from_int(1, prec);
    for (atom, e) in mono {
        acc = acc.mul(&atom_value(atom, prec)?.pow_int(*e as i64)?);
    }
    Ok(acc)
}

#[derive(Debug, Clone)]
pub struct Rediscovery {
    pub basis: RelationBasis,
    pub discovery: Discovery,
    /// Accepted relation equals the expected one up to scalar.
    pub matches: bool,
}

/// Rebuilds the identity's coefficient vector from numerics alone.
pub fn rediscover(spec: &TermSpec, rhs: &ConstExpr, digits: u32) -> Result<Rediscovery> {
    let basis = RelationBasis::for_identity(spec, rhs)?;
    let max_norm = max_norm_for(basis.len(), digits);
    let values = |d: u32| basis.values(d);
    let discovery = find_relation(&values, digits, &max_norm, (digits / 5).max(10))?;
    let matches = match &discovery.outcome {
        PslqOutcome::Found(rel) => discovery.accepted && rel.coefficients == basis.expected,
        PslqOutcome::Excluded { .. } => false,
    };
    Ok(Rediscovery { basis, discovery, matches })
}

/// Replacement for `pi` used by a decoy problem.
#[derive(Debug, Clone, PartialEq)]
pub enum PiPerturbation {
    /// `pi + 10^-e`.
    Add(u32),
    /// `pi - 10^-e`.
    Sub(u32),
    /// `pi (1 + 10^-e)`.
    Relative(u32),
}

impl PiPerturbation {
    fn apply(&self, pi: &Ball) -> Ball {
        let prec = pi.prec();
        let eps = |e: u32| Ball::from_rational(&Rational::new(BigInt::one(), BigInt::from(10).pow(e)), prec);
        match self {
            PiPerturbation::Add(e) => pi.add(&eps(*e)),
            PiPerturbation::Sub(e) => pi.sub(&eps(*e)),
            PiPerturbation::Relative(e) => pi.add(&pi.mul(&eps(*e))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecoyResult {
    pub label: String,
    pub perturbation: PiPerturbation,
    pub basis: RelationBasis,
    pub discovery: Discovery,
}

impl DecoyResult {
    /// Accepted relation with a nonzero coefficient on a monomial in `pi`.
    pub fn involves_pi(&self) -> bool {
        let PslqOutcome::Found(rel) = &self.discovery.outcome else { return false };
        let offset = self.basis.sums.len();
        self.basis
            .constants
            .iter()
            .zip(&rel.coefficients[offset..])
            .any(|(mono, c)| !c.is_zero() && mono.iter().any(|(a, _)| *a == ConstAtom::Pi))
    }

    /// An accepted relation among the series sums alone holds whatever the
    /// value of `pi` and is not counted.
    pub fn false_positive(&self) -> bool {
        self.discovery.accepted && self.involves_pi()
    }
}

/// Runs every identity against every perturbation of `pi`; an accepted
/// relation that uses `pi` is a false positive.
pub fn decoy_suite(
    identities: &[(String, TermSpec, ConstExpr)],
    perturbations: &[PiPerturbation],
    digits: u32,
) -> Result<Vec<DecoyResult>> {
    let jobs: Vec<(&(String, TermSpec, ConstExpr), &PiPerturbation)> =
        identities.iter().flat_map(|id| perturbations.iter().map(move |p| (id, p))).collect();
    jobs.par_iter()
        .map(|((label, spec, rhs), pert)| {
            if !rhs.atoms().contains(&ConstAtom::Pi) {
                return Err(Error::InvalidParameter(format!("{label} has no pi to perturb")));
            }
            let basis = RelationBasis::for_identity(spec, rhs)?;
            let max_norm = max_norm_for(basis.len(), digits);
            let atom_value = |a: &ConstAtom, prec: u32| -> Result<Ball> {
                let v = atom_eval(a, prec)?;
                Ok(if *a == ConstAtom::Pi { pert.apply(&v) } else { v })
            };
            let values = |d: u32| basis.values_with(d, &atom_value);
            let discovery = find_relation(&values, digits, &max_norm, (digits / 5).max(10))?;
            Ok(DecoyResult { label: label.clone(), perturbation: (*pert).clone(), basis, discovery })
        })
        .collect()
}
