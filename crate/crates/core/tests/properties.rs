use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use proptest::prelude::*;

use piforge::catalog::{verify, Catalog};
use piforge::congruence::{check_congruence, s1_companion, CongruenceSpec, SignRule};
use piforge::constants::{atom_eval, const_eval, ConstAtom, ConstExpr};
use piforge::derive::{derive, BaseIdentity, DerivationRequest, DeriveMode};
use piforge::discover::{find_relation, normalize, PslqOutcome};
use piforge::numerics::{
    int, is_probable_prime, rat, rat_arith, rref, Ball, BallOp, Mag, Poly, RatOp, Rational, RationalFunction,
};
use piforge::series::{digits_to_bits, Factor, TermSpec};
use piforge::telescope::{find_zero_sum, gosper, lemma_registry, verify_lemma_in_m};

fn mag_rational(m: &Mag) -> Rational {
    let (man, exp) = m.to_dyadic();
    let two = Rational::from_integer(BigInt::from(2));
    Rational::from_integer(man) * piforge::numerics::rat_pow(&two, exp).unwrap()
}

fn rational() -> impl Strategy<Value = Rational> {
    (any::<i64>(), 1i64..=i64::MAX, -80i64..80).prop_map(|(n, d, e)| {
        let two = Rational::from_integer(BigInt::from(2));
        rat(n, d) * piforge::numerics::rat_pow(&two, e).unwrap()
    })
}

fn nonzero_rational() -> impl Strategy<Value = Rational> {
    rational().prop_filter("nonzero", |r| !r.is_zero())
}

fn small_poly(max_deg: usize) -> impl Strategy<Value = Poly> {
    prop::collection::vec(-20i64..=20, 0..=max_deg + 1).prop_map(|c| Poly::from_ints(&c))
}

fn op() -> impl Strategy<Value = (BallOp, RatOp)> {
    prop_oneof![
        Just((BallOp::Add, RatOp::Add)),
        Just((BallOp::Sub, RatOp::Sub)),
        Just((BallOp::Mul, RatOp::Mul)),
        Just((BallOp::Div, RatOp::Div)),
    ]
}

fn central_cube(m: i64) -> TermSpec {
    TermSpec::new(Poly::one(), int(m), vec![Factor::central(3)], 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn ball_arith_contains_exact_result(a in rational(), b in rational(), (bop, rop) in op(), prec in 8u32..300) {
        let (x, y) = (Ball::from_rational(&a, prec), Ball::from_rational(&b, prec));
        prop_assert!(x.contains_rational(&a) && y.contains_rational(&b));
        match rat_arith(rop, &a, &b) {
            Ok(exact) => {
                let ball = Ball::arith(bop, &x, &y, prec).unwrap();
                prop_assert!(ball.contains_rational(&exact), "{bop:?} {a} {b} at {prec}: {ball}");
            }
            Err(_) => prop_assert!(b.is_zero() && Ball::arith(bop, &x, &y, prec).is_err()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn product_error_grows_linearly(xs in prop::collection::vec(nonzero_rational(), 1..48), prec in 24u32..400) {
        let exact: Rational = xs.iter().cloned().product();
        let mut ball = Ball::from_rational(&xs[0], prec);
        for x in &xs[1..] {
            ball = ball.mul(&Ball::from_rational(x, prec));
        }
        prop_assert!(ball.contains_rational(&exact));
        let k = xs.len() as i64;
        let bound = rat(4 * k, 1) * piforge::numerics::rat_pow(&int(2), -(prec as i64)).unwrap() * exact.abs();
        prop_assert!(mag_rational(&ball.radius()) <= bound, "k = {k}, prec = {prec}");
    }

    #[test]
    fn poly_gcd_recovers_common_factor(a in small_poly(4), b in small_poly(4), g in small_poly(3)) {
        prop_assume!(!g.is_zero() && !(a.is_zero() && b.is_zero()));
        let h = (&a * &g).gcd(&(&b * &g));
        let (_, rem) = h.div_rem(&g).unwrap();
        prop_assert!(rem.is_zero());
        prop_assert_eq!(h.monic(), (&g * &a.gcd(&b)).monic());
    }

    #[test]
    fn doubling_precision_refines(x in nonzero_rational(), y in nonzero_rational(), prec in 32u32..600) {
        let eval = |p: u32| {
            let (bx, by) = (Ball::from_rational(&x, p), Ball::from_rational(&y, p));
            let s = bx.mul(&bx).add(&by).div(&by.sub(&bx).add(&Ball::from_int(3, p))).ok()?;
            Some(s.mul(&atom_eval(&ConstAtom::Pi, p).unwrap()))
        };
        let (Some(lo), Some(hi)) = (eval(prec), eval(2 * prec)) else { return Ok(()) };
        prop_assert!(lo.overlaps(&hi));
        if !lo.radius().is_zero() {
            prop_assert!(hi.radius().log2() <= lo.radius().log2() - (prec / 2) as f64);
        }
    }

    #[test]
    fn radicals_powered_back_enclose_radicand(n in 1i64..10_000, d in 1i64..10_000, root in 2u32..7, prec in 32u32..500) {
        let r = rat(n, d);
        let sqrt = atom_eval(&ConstAtom::SqrtRat(r.clone()), prec).unwrap();
        prop_assert!(Ball::arith(BallOp::Mul, &sqrt, &sqrt, prec).unwrap().contains_rational(&r));
        let nth = atom_eval(&ConstAtom::RootRat(r.clone(), root), prec).unwrap();
        prop_assert!(nth.pow_int(root as i64).unwrap().contains_rational(&r));
        let (a, b, c) = (rat(n + d, 1), rat(1, 1), rat(n, d));
        let nested = atom_eval(&ConstAtom::NestedSurd(a.clone(), b.clone(), c.clone()), prec).unwrap();
        let inner = Ball::from_rational(&a, prec).add(&atom_eval(&ConstAtom::SqrtRat(c), prec).unwrap().mul_rational(&b));
        prop_assert!(nested.mul(&nested).overlaps(&inner));
    }

    #[test]
    fn const_eval_distributes(c in prop::collection::vec((-50i64..50, 1i64..20), 4), i in 0usize..4, j in 0usize..4) {
        let atoms = ["pi", "sqrt(2)", "log(3)", "K", "G", "zeta3", "pi^2", "1/pi"];
        let expr = |k: usize, s: usize| {
            ConstExpr::parse(&format!("{}/{} {}", c[k].0, c[k].1, atoms[(s + 2 * k) % atoms.len()])).unwrap()
        };
        let (e1, e2) = (expr(0, i).add(&expr(1, j)), expr(2, j).add(&expr(3, i)));
        let prec = 300;
        let v = |e: &ConstExpr| const_eval(e, prec).unwrap();
        prop_assert!(v(&e1.add(&e2)).overlaps(&v(&e1).add(&v(&e2))));
        prop_assert!(v(&e1.mul(&e2)).overlaps(&v(&e1).mul(&v(&e2))));
    }
}

#[test]
fn atoms_overlap_across_precisions() {
    let atoms = [
        ConstAtom::Pi,
        ConstAtom::Zeta3,
        ConstAtom::CatalanG,
        ConstAtom::DirichletK,
        ConstAtom::LogRat(int(2)),
        ConstAtom::LogRat(rat(3, 7)),
        ConstAtom::SqrtRat(int(3)),
        ConstAtom::RootRat(int(2), 3),
        ConstAtom::NestedSurd(int(2), int(1), int(2)),
    ];
    for a in &atoms {
        for p in [64u32, 200, 700] {
            let (lo, hi) = (atom_eval(a, p).unwrap(), atom_eval(a, 2 * p).unwrap());
            assert!(lo.overlaps(&hi), "{a:?} at {p}");
            assert!(hi.radius().log2() < lo.radius().log2(), "{a:?} at {p}");
        }
    }
}

#[test]
fn evaluation_refines_monotonically() {
    let catalog = Catalog::shipped().unwrap();
    for id in ["S1", "T1", "S3", "R-m512-6k1", "thm1.4-D-32"] {
        let entry = catalog.get(id).unwrap();
        let coarse = entry.lhs.evaluate(30).unwrap().value;
        let fine = entry.lhs.evaluate(60).unwrap().value;
        assert!(coarse.overlaps(&fine), "{id}");
        assert!(fine.radius().log2() < coarse.radius().log2(), "{id}");
    }
}

#[test]
fn alternating_partial_sums_bracket_the_value() {
    let spec = TermSpec::new(Poly::parse("6k+1").unwrap(), int(-512), vec![Factor::central(3)], 0);
    let value = spec.evaluate(50).unwrap().value;
    let limit = value.mid_rational();
    let slack = mag_rational(&value.radius());
    for n in 2..60 {
        let (a, b) = (spec.partial_sum_exact(n).unwrap(), spec.partial_sum_exact(n + 1).unwrap());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        assert!(lo - &slack <= limit && limit <= hi + &slack, "n = {n}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gosper_certificates_pass_spot_checks(idx in any::<prop::sample::Index>(), mi in any::<prop::sample::Index>(), ks in prop::collection::vec(0u64..400, 20)) {
        let lemmas = lemma_registry();
        let lemma = idx.get(&lemmas);
        let m = int(*mi.get(lemma.m_values));
        let base = lemma.base_spec(&m).unwrap();
        let q = lemma.multiplier(&m).unwrap();
        let ratio = base.ratio().unwrap().unwrap();
        let result = gosper(&ratio, &q).unwrap();
        prop_assume!(result.found);
        let y = result.certificate.unwrap();
        for k in ks.into_iter().map(|k| k + base.start) {
            let (x0, x1) = (int(k as i64), int(k as i64 + 1));
            let (Ok(y0), Ok(y1)) = (y.eval(&x0), y.eval(&x1)) else { continue };
            let lhs = q.eval(&x0) * base.term_exact(k).unwrap();
            let rhs = y1 * base.term_exact(k + 1).unwrap() - y0 * base.term_exact(k).unwrap();
            prop_assert_eq!(lhs, rhs, "{} at m = {}, k = {}", lemma.id, m, k);
        }
    }

    #[test]
    fn zero_sum_spaces_nest(mi in 0usize..6, d in 1u32..4) {
        let m = [256i64, -512, 4096, -64, 1, 16][mi];
        let small: Vec<Poly> = find_zero_sum(&central_cube(m), d).unwrap().into_iter().map(|(q, _)| q).collect();
        let large: Vec<Poly> = find_zero_sum(&central_cube(m), d + 1).unwrap().into_iter().map(|(q, _)| q).collect();
        let rank = |qs: &[Poly]| {
            let width = d as usize + 2;
            let rows: Vec<Vec<Rational>> = qs.iter().map(|q| (0..width).map(|i| q.coeff(i)).collect()).collect();
            rref(rows).1.len()
        };
        prop_assert_eq!(rank(&small), small.len());
        prop_assert_eq!(rank(&large), large.len());
        let mut joined = large.clone();
        joined.extend(small.iter().cloned());
        prop_assert_eq!(rank(&joined), large.len());
    }

    #[test]
    fn derivation_ignores_base_scaling(num in -40i64..40, den in 1i64..40, target in 0usize..4) {
        prop_assume!(num != 0);
        let c = rat(num, den);
        let spec = TermSpec::new(Poly::parse("6k+1").unwrap(), int(256), vec![Factor::central(3)], 0);
        let rhs = ConstExpr::parse("4/pi").unwrap();
        let target = Poly::parse(["k^3", "k^2+1", "k^4-k", "k"][target]).unwrap();
        let run = |spec: TermSpec, rhs: ConstExpr| {
            derive(&DerivationRequest { base: BaseIdentity { spec, rhs }, target: target.clone(), mode: DeriveMode::TypeS, escalate: false }).unwrap()
        };
        let plain = run(spec.clone(), rhs.clone());
        let scaled = run(spec.with_numer(spec.numer.scale(&c)), rhs.scale(&c));
        prop_assert_eq!(plain.q, scaled.q);
        prop_assert_eq!(plain.rhs, scaled.rhs);
    }

    #[test]
    fn pslq_relations_are_sound_and_stable(a in -30i64..30, b in -30i64..30, c in 1i64..30) {
        prop_assume!(a != 0 || b != 0);
        let values = |digits: u32| -> piforge::Result<Vec<Ball>> {
            let p = digits_to_bits(digits) + 32;
            let pi = atom_eval(&ConstAtom::Pi, p)?;
            let log2 = atom_eval(&ConstAtom::LogRat(int(2)), p)?;
            let combo = pi.mul_rational(&rat(a, c)).add(&log2.mul_rational(&rat(b, c)));
            Ok(vec![pi, log2, combo])
        };
        let expected = normalize(&[BigInt::from(a), BigInt::from(b), BigInt::from(-c)]);
        let mut found = Vec::new();
        for digits in [40u32, 70] {
            let d = find_relation(&values, digits, &BigInt::from(1000), 10).unwrap();
            let PslqOutcome::Found(rel) = d.outcome else { return Err(TestCaseError::fail("no relation")) };
            prop_assert!(d.accepted && d.recheck_digits == Some(digits + 10));
            found.push(rel.coefficients);
        }
        prop_assert_eq!(&found[0], &found[1]);
        prop_assert_eq!(&found[0], &expected);
    }

    #[test]
    fn congruence_strategies_agree(p in 5u64..400, coeffs in prop::collection::vec(-30i64..30, 1..6), sign in any::<bool>()) {
        prop_assume!(is_probable_prime(p));
        let companion = check_congruence(&s1_companion(), p).unwrap();
        let modulus = BigInt::from(p).pow(4);
        for r in [&companion.lhs_residue, &companion.lhs_residue_per_term, &companion.rhs_residue] {
            prop_assert!(!r.is_negative() && *r < modulus);
        }
        prop_assert!(companion.strategies_agree && companion.holds);
        let spec = CongruenceSpec {
            id: "random".into(),
            lhs: TermSpec::new(Poly::from_ints(&coeffs), int(256), vec![Factor::central(3)], 0),
            sign: if sign { SignRule::MinusOnePowHalfPPlusOne } else { SignRule::Plus },
            rhs: RationalFunction::from_poly(Poly::from_ints(&[1, 1])),
            modulus_power: 3,
            p_min: 5,
        };
        let r = check_congruence(&spec, p).unwrap();
        let modulus = BigInt::from(p).pow(3);
        prop_assert!(r.strategies_agree);
        prop_assert!(!r.lhs_residue.is_negative() && r.lhs_residue < modulus);
        prop_assert_eq!(r.holds, r.lhs_residue == r.rhs_residue);
    }
}

#[test]
fn parametric_lemmas_hold_as_polynomials_in_m() {
    for lemma in lemma_registry().iter().filter(|l| l.parametric) {
        assert!(verify_lemma_in_m(lemma.id, 10).unwrap(), "{}", lemma.id);
    }
}

#[test]
fn catalog_round_trips() {
    let catalog = Catalog::shipped().unwrap();
    let text = catalog.to_toml().unwrap();
    let again = Catalog::from_toml(&text, "round trip").unwrap();
    assert_eq!(catalog.entries(), again.entries());
    assert_eq!(text, again.to_toml().unwrap());
}

#[test]
fn reports_are_deterministic() {
    let catalog = Catalog::shipped().unwrap();
    for id in ["S1", "T1", "S12", "conj-II11S"] {
        let entry = catalog.get(id).unwrap();
        let strip = |mut r: piforge::catalog::VerificationReport| {
            r.wall_ms = 0;
            r
        };
        assert_eq!(strip(verify(entry, 40)), strip(verify(entry, 40)), "{id}");
    }
}

#[test]
fn shipped_catalog_passes_self_test() {
    let failures = Catalog::shipped().unwrap().self_test();
    assert!(failures.is_empty(), "{:?}", failures.iter().map(|r| r.to_text()).collect::<Vec<_>>());
}
