//! Derivation of type-S and type-T identities from a base identity by
//! exact elimination against the telescoping relation space.

use num_traits::Zero;

use crate::constants::ConstExpr;
use crate::error::{Error, Result};
use crate::numerics::{rat_pow, solve, Poly, Rational};
use crate::sequences::SeqKind;
use crate::series::{check_identity, Factor, TermSpec};
use crate::telescope::{summable_space, SummableRelation};

/// Digits used to confirm every derived identity numerically.
pub const CONFIRM_DIGITS: u32 = 60;

/// `sum_{k >= start} spec(k) = rhs`.
#[derive(Debug, Clone)]
pub struct BaseIdentity {
    pub spec: TermSpec,
    pub rhs: ConstExpr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeriveMode {
    /// `sum P(k) q(k) t(k) = rhs` with `t` the base term.
    TypeS,
    /// `sum_{k >= 0} q(k) m^k / a(k) = rhs` from a base whose term carries a
    /// polynomial denominator; the target polynomial is that denominator.
    TypeT,
}

#[derive(Debug, Clone)]
pub struct DerivationRequest {
    pub base: BaseIdentity,
    pub target: Poly,
    pub mode: DeriveMode,
    /// Allows `deg q` up to `2d + 2` when no solution of degree `2d` exists.
    pub escalate: bool,
}

#[derive(Debug, Clone)]
pub struct DerivedIdentity {
    pub q: Poly,
    pub rhs: ConstExpr,
    /// Summand of the derived identity.
    pub spec: TermSpec,
    /// Elimination record: coefficients of the base and relation polynomials.
    pub provenance: Vec<String>,
    /// Dimension of the solution space at the chosen degree.
    pub solution_dim: usize,
    /// Largest radius exponent (base 10) reached by the numeric confirmation.
    pub confirmed_digits: u32,
}

/// `(q, rhs)` scaled so that `q` is primitive integer with a positive
/// leading coefficient.
pub fn canonicalize(q: &Poly, rhs: &ConstExpr) -> Result<(Poly, ConstExpr)> {
    if q.is_zero() {
        return Err(Error::Precondition("cannot canonicalize the zero polynomial".into()));
    }
    let (c, _) = q.primitive_integer();
    let inv = c.recip();
    Ok((q.scale(&inv), rhs.scale(&inv)))
}

/// `2d` for a base term whose binomial part is a product of `2d + 1`
/// binomial-type factors (counted with multiplicity).
fn binomial_count(spec: &TermSpec) -> u32 {
    spec.factors
        .iter()
        .map(|f| match f.kind {
            SeqKind::AffineBinomial { .. } | SeqKind::Catalan => f.exponent.unsigned_abs(),
            _ => 0,
        })
        .sum()
}

struct Solution {
    q: Poly,
    rhs: ConstExpr,
    provenance: Vec<String>,
    dim: usize,
}

/// Finds `q` of minimal degree with `p * q = lambda0 * base + sum lambda_i z_i`,
/// `lambda0 = 1`, over the relation space of `t`.
fn eliminate(
    base_numer: &Poly,
    base_value: &ConstExpr,
    p: &Poly,
    relations: &[SummableRelation],
    max_q_deg: i64,
) -> Result<Option<Solution>> {
    let top = relations
        .iter()
        .map(|r| r.q.deg())
        .chain([base_numer.deg(), p.deg() + max_q_deg])
        .max()
        .unwrap_or(0);
    let rows = (top + 1) as usize;
    for dq in 0..=max_q_deg {
        // unknowns: q_0..q_dq, lambda_1..lambda_r
        let nq = (dq + 1) as usize;
        let ncols = nq + relations.len();
        let mut matrix = vec![vec![Rational::zero(); ncols]; rows];
        for j in 0..nq {
            let col = p * &Poly::x().pow(j as u32);
            for (i, row) in matrix.iter_mut().enumerate() {
                row[j] = col.coeff(i);
            }
        }
        for (r, rel) in relations.iter().enumerate() {
            for (i, row) in matrix.iter_mut().enumerate() {
                row[nq + r] = -rel.q.coeff(i);
            }
        }
        let target: Vec<Rational> = (0..rows).map(|i| base_numer.coeff(i)).collect();
        let Some(x) = solve(&matrix, &target, ncols) else { continue };
        let q = Poly::from_coeffs(x[..nq].to_vec());
        if q.deg() < dq {
            continue;
        }
        let kernel = crate::numerics::nullspace(&matrix, ncols);
        let dim = kernel.iter().filter(|v| v[..nq].iter().any(|c| !c.is_zero())).count() + 1;
        let mut value = base_value.clone();
        let mut provenance = vec![format!("p*q = base + sum lambda_i z_i with deg q = {dq}")];
        for (rel, lambda) in relations.iter().zip(&x[nq..]) {
            if lambda.is_zero() {
                continue;
            }
            value = value.add(&ConstExpr::rational(lambda * &rel.value));
            provenance.push(format!("lambda = {lambda} for z = {} (sum {})", rel.q, rel.value));
        }
        return Ok(Some(Solution { q, rhs: value, provenance, dim }));
    }
    Ok(None)
}

fn solve_request(
    t: &TermSpec,
    base_numer: &Poly,
    base_value: &ConstExpr,
    p: &Poly,
    two_d: u32,
    escalate: bool,
) -> Result<Solution> {
    let limits: Vec<i64> = if escalate { vec![two_d as i64, two_d as i64 + 2] } else { vec![two_d as i64] };
    let mut profile = Vec::new();
    for &max_q in &limits {
        let space_deg = (p.deg() + max_q).max(base_numer.deg()).max(0) as u32;
        let relations = summable_space(t, space_deg)?;
        profile.push(format!("deg q <= {max_q}: relation space of dimension {}", relations.len()));
        if let Some(sol) = eliminate(base_numer, base_value, p, &relations, max_q)? {
            return Ok(sol);
        }
    }
    Err(Error::Precondition(format!("no polynomial q found ({})", profile.join("; "))))
}

fn finish(sol: Solution, spec_of: impl Fn(&Poly) -> TermSpec, rhs_shift: impl Fn(&Poly) -> Rational) -> Result<DerivedIdentity> {
    let rhs = sol.rhs.add(&ConstExpr::rational(rhs_shift(&sol.q)));
    let (q, rhs) = canonicalize(&sol.q, &rhs)?;
    let spec = spec_of(&q);
    let check = check_identity(&spec, &rhs, CONFIRM_DIGITS)?;
    if !check.holds_to(CONFIRM_DIGITS) {
        return Err(Error::Inconsistent(format!(
            "derived identity fails numeric confirmation (residual {})",
            check.residual
        )));
    }
    Ok(DerivedIdentity {
        q,
        rhs,
        spec,
        provenance: sol.provenance,
        solution_dim: sol.dim,
        confirmed_digits: CONFIRM_DIGITS,
    })
}

/// The general algorithm: from `sum B(k) t(k) = rho` and a target `P`,
/// finds `q` with `deg q <= 2d` and the value of `sum P q t`.
pub fn derive(req: &DerivationRequest) -> Result<DerivedIdentity> {
    let base = &req.base;
    base.spec.validate()?;
    if !base.spec.is_hypergeometric() {
        return Err(Error::Precondition("the base term must be a product of binomial factors".into()));
    }
    let t = base.spec.with_numer(Poly::one());
    let two_d = binomial_count(&t).saturating_sub(1);
    match req.mode {
        DeriveMode::TypeS => {
            if req.target.is_zero() {
                return Err(Error::Precondition("target polynomial must be nonzero".into()));
            }
            let sol = solve_request(&t, &base.spec.numer, &base.rhs, &req.target, two_d, req.escalate)?;
            let p = req.target.clone();
            finish(sol, |q| t.with_numer(&p * q), |_| Rational::zero())
        }
        DeriveMode::TypeT => {
            if t.denom.deg() < 1 || t.start == 0 {
                return Err(Error::Precondition(
                    "type-T derivation needs a base with a polynomial denominator summed from k = 1".into(),
                ));
            }
            let p = t.denom.clone();
            let sol = solve_request(&t, &base.spec.numer, &base.rhs, &p, two_d, req.escalate)?;
            let plain = TermSpec { denom: Poly::one(), start: 0, ..t.clone() };
            // terms below the base start index are added back
            let plain_head = plain.clone();
            let start = t.start;
            finish(
                sol,
                |q| plain.with_numer(q.clone()),
                move |q| {
                    let head = plain_head.with_numer(q.clone());
                    (0..start).map(|k| head.term_exact(k).unwrap_or_default()).sum()
                },
            )
        }
    }
}

/// Reindexes `sum B(k) C(2k,k)^e / ((2k-1)^e m^k)` through
/// `C(2k,k)/(2k-1) = (2/k) C(2k-2,k-1)` and derives
/// `sum q(k) P(k) C(2k,k)^e / ((k+1)^e m^k)`; for `P = k^e` the result is
/// presented as `sum q(k) C(2k,k+1)^e / m^k`.
pub fn derive_catalan_variant(base: &BaseIdentity, target: &Poly) -> Result<DerivedIdentity> {
    if target.deg() < 1 {
        return Err(Error::Precondition("target polynomial must have positive degree".into()));
    }
    let spec = &base.spec;
    let e = match spec.factors.as_slice() {
        [f] if f.kind == SeqKind::central_binomial() && f.exponent > 0 && f.index == Default::default() => f.exponent,
        _ => return Err(Error::Precondition("base must carry a single positive power of C(2k,k)".into())),
    };
    let expected_denom = Poly::parse("2k-1")?.pow(e as u32);
    if spec.denom != expected_denom || spec.start != 0 || !spec.base_divides {
        return Err(Error::Precondition(format!("base denominator must be (2k-1)^{e} with m^k dividing, from k = 0")));
    }
    let m = spec.base.clone();
    let two_e = rat_pow(&Rational::from_integer(2.into()), e as i64)?;
    // sum_{j>=0} (2^e/m) B(j+1) C(2j,j)^e / ((j+1)^e m^j) = rho - B(0) (-1)^e
    let shifted = spec.numer.shift_int(1).scale(&(&two_e / &m));
    let k0 = spec.term_exact(0)?;
    let value = base.rhs.sub(&ConstExpr::rational(k0));
    let t = TermSpec::new(Poly::one(), m.clone(), vec![Factor::central(e)], 0)
        .with_denom(Poly::parse("k+1")?.pow(e as u32));
    let sol = solve_request(&t, &shifted, &value, target, (e - 1) as u32, false)?;
    let mut sol = sol;
    sol.provenance.insert(0, format!("reindexed base: sum ({shifted}) C(2k,k)^{e}/((k+1)^{e} m^k) = {value}"));
    let plain_power = *target == Poly::x().pow(e as u32);
    let p = target.clone();
    finish(
        sol,
        |q| {
            if plain_power {
                TermSpec::new(q.clone(), m.clone(), vec![Factor::binom(2, 0, 1, 1, e)], 0)
            } else {
                t.with_numer(&p * q)
            }
        },
        |_| Rational::zero(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::int;

    fn poly(s: &str) -> Poly {
        Poly::parse(s).unwrap()
    }

    fn expr(s: &str) -> ConstExpr {
        ConstExpr::parse(s).unwrap()
    }

    fn central_base(numer: &str, m: i64, rhs: &str) -> BaseIdentity {
        BaseIdentity { spec: TermSpec::new(poly(numer), int(m), vec![Factor::central(3)], 0), rhs: expr(rhs) }
    }

    fn type_s(base: BaseIdentity, target: &str) -> DerivedIdentity {
        derive(&DerivationRequest { base, target: poly(target), mode: DeriveMode::TypeS, escalate: false }).unwrap()
    }

    #[test]
    fn example_with_k2_plus_1() {
        let d = type_s(central_base("6k+1", 256, "4/pi"), "k^2+1");
        assert_eq!(d.q, poly("192k^2-626k-103"));
        assert_eq!(d.rhs, expr("-1373/(3 pi)"));
    }

    #[test]
    fn s3_from_ramanujan_4096() {
        let d = type_s(central_base("42k+5", 4096, "16/pi"), "k^3");
        assert_eq!(d.q, poly("198k^2-425k+210"));
        assert_eq!(d.rhs, expr("-1/(21 pi)"));
    }

    #[test]
    fn s1_s2_and_example_companions() {
        let d = type_s(central_base("6k+1", 256, "4/pi"), "k^3");
        assert_eq!((d.q, d.rhs), (poly("6k^2-19k+6"), expr("-1/(12 pi)")));
        let d = type_s(central_base("6k+1", -512, "2 sqrt(2)/pi"), "k^3");
        assert_eq!((d.q, d.rhs), (poly("18k^2-29k+16"), expr("sqrt(2)/(24 pi)")));
        let d = type_s(central_base("6k+1", -512, "2 sqrt(2)/pi"), "k^2+1");
        assert_eq!((d.q, d.rhs), (poly("6k+1"), expr("11 sqrt(2)/(6 pi)")));
        let d = type_s(central_base("42k+5", 4096, "16/pi"), "k^2+1");
        assert_eq!((d.q, d.rhs), (poly("126504k^2-921334k-109205"), expr("-1063412/(3 pi)")));
    }

    #[test]
    fn catalan_variant_s1p() {
        let spec = TermSpec::new(poly("6k^2-k"), int(256), vec![Factor::central(3)], 0)
            .with_denom(poly("2k-1").pow(3));
        let base = BaseIdentity { spec, rhs: expr("1/(2 pi)") };
        let d = derive_catalan_variant(&base, &poly("k^3")).unwrap();
        assert_eq!((d.q, d.rhs), (poly("13608k^2+25050k+10589"), expr("27296 - 84604/pi")));
    }

    #[test]
    fn unit_target_returns_base() {
        let d = type_s(central_base("42k+5", 4096, "16/pi"), "1");
        assert_eq!(d.q, poly("42k+5"));
        assert_eq!(d.rhs, expr("16/pi"));
    }

    #[test]
    fn scalar_invariance() {
        let a = type_s(central_base("6k+1", 256, "4/pi"), "k^3");
        let b = type_s(central_base("-18k-3", 256, "-12/pi"), "k^3");
        assert_eq!(a.q, b.q);
        assert_eq!(a.rhs, b.rhs);
    }

    #[test]
    fn canonical_forms() {
        let (q, r) = canonicalize(&poly("-396k^2+850k-420"), &expr("2/(21 pi)")).unwrap();
        assert_eq!(q, poly("198k^2-425k+210"));
        assert_eq!(r, expr("-1/(21 pi)"));
        let (q, r) = canonicalize(&poly("3/2 k + 3"), &expr("1")).unwrap();
        assert_eq!(q, poly("k+2"));
        assert_eq!(r, expr("2/3"));
    }

    #[test]
    fn catalan_variant_s3p() {
        let spec = TermSpec::new(poly("42k^2-3k-1"), int(4096), vec![Factor::central(3)], 0)
            .with_denom(poly("2k-1").pow(3));
        let base = BaseIdentity { spec, rhs: expr("27/(8 pi)") };
        let d = derive_catalan_variant(&base, &poly("k^3")).unwrap();
        assert_eq!(d.q, poly("32473224k^2+58012446k+24235261"));
        assert_eq!(d.rhs, expr("667628032 - 2097324016/pi"));
        assert!(derive_catalan_variant(&base, &Poly::one()).is_err());
    }

    #[test]
    fn type_t_from_zeta2() {
        let spec = TermSpec::new(poly("21k-8"), int(1), vec![Factor::central(-3)], 1)
            .with_denom(poly("k^3"))
            .base_multiplies();
        let base = BaseIdentity { spec, rhs: expr("pi^2/6") };
        let d = derive(&DerivationRequest { base, target: Poly::one(), mode: DeriveMode::TypeT, escalate: false })
            .unwrap();
        assert_eq!(d.q, poly("198k^2-227k+47"));
        assert_eq!(d.rhs, expr("3264/63 - 4/63 pi^2"));
    }
}
