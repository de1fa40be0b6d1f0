//! One line per acceptance criterion; exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use piforge::catalog::{run_decoys, verify, verify_many, Catalog, EvalClass, Identity, IdentityClass, Verdict};
use piforge::congruence::{s1_companion, scan_primes, PrimeVerdict};
use piforge::constants::ConstExpr;
use piforge::derive::{canonicalize, derive, derive_catalan_variant, BaseIdentity, DerivationRequest, DeriveMode};
use piforge::discover::{rediscover, DecoyResult, PslqOutcome};
use piforge::numerics::{rat_arith, Ball, BallOp, Poly, RatOp, Rational};
use piforge::sequences::{seq_crosscheck, seq_value, CrossCheck, SeqKind};
use piforge::series::TailClass;
use piforge::telescope::{gosper, lemma_registry, verify_lemma, verify_lemma_as_printed, Certificate, GosperResult};

/// Conjectural entries known to fail as stored; each is recorded as a finding.
const KNOWN_CONJECTURE_FINDINGS: [&str; 3] = ["conj-II12S", "conj-III-k2", "conj-V-k1"];

/// Extra parameters checked for every lemma that holds for all `m`.
const EXTRA_M: [i64; 13] = [1, -1, 8, -8, 16, -27, 64, -64, 81, -144, 256, -512, 4096];

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

fn binom(n: i64, k: i64) -> BigInt {
    if k < 0 || n < 0 || k > n {
        return BigInt::zero();
    }
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

fn lemma_suite() -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut printed_failing = 0;
    let mut printed_total = 0;
    for lemma in lemma_registry() {
        let mut ms: Vec<i64> = lemma.m_values.to_vec();
        if lemma.parametric {
            ms.extend(EXTRA_M);
        }
        ms.sort_unstable();
        ms.dedup();
        for &m in &ms {
            checked += 1;
            match verify_lemma(lemma.id, &int(m), 50) {
                Ok(r) if r.passed() => {}
                Ok(r) => failures.push(format!("{} m={m} n={}", lemma.id, r.first_failure.unwrap().0)),
                Err(e) => failures.push(format!("{} m={m}: {e}", lemma.id)),
            }
        }
        if lemma.as_printed.is_some() {
            printed_total += 1;
            let m = int(lemma.m_values[0]);
            if verify_lemma_as_printed(lemma.id, &m, 50).is_ok_and(|r| !r.passed()) {
                printed_failing += 1;
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{checked} (identity, m) pairs exact for n <= 50; {printed_failing}/{printed_total} printed variants differ from exact sums{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {}", failures.join(", ")) }
        ),
    )
}

fn proved_at_100(catalog: &Catalog) -> Outcome {
    let proved = catalog.select(None, Some(IdentityClass::Proved));
    let reports = verify_many(&proved, 100, rayon::current_num_threads()).expect("worker pool");
    let bad: Vec<String> = reports.iter().filter(|r| r.verdict != Verdict::Verified).map(|r| r.id.clone()).collect();
    let fast = proved.iter().filter(|e| e.eval_class() == EvalClass::Fast).count();
    let weakest_fast = reports
        .iter()
        .filter(|r| r.digits_target == 100)
        .map(|r| r.digits_achieved)
        .fold(f64::INFINITY, f64::min);
    let slow: Vec<String> = reports
        .iter()
        .filter(|r| r.digits_target < 100)
        .map(|r| format!("{} to {} digits", r.id, r.digits_target))
        .collect();
    let bauer_ok = reports.iter().any(|r| r.id == "R-Bauer" && r.verdict == Verdict::Verified && r.digits_target == 12);
    let suspects: Vec<String> =
        catalog.select(None, Some(IdentityClass::TranscriptionSuspect)).iter().map(|e| e.id().to_string()).collect();
    outcome(
        bad.is_empty() && bauer_ok && weakest_fast > 100.0,
        format!(
            "{} of {} proved entries verified ({fast} fast, all residual radii < 1e-{:.0}); slow: {}; transcription-suspect entries (not proved): {}{}",
            reports.len() - bad.len(),
            reports.len(),
            weakest_fast.floor(),
            slow.join(", "),
            suspects.join(", "),
            if bad.is_empty() { String::new() } else { format!("; failed: {}", bad.join(", ")) }
        ),
    )
}

fn same_up_to_scalar(q: &Poly, rhs: &ConstExpr, q2: &Poly, rhs2: &ConstExpr) -> bool {
    match (canonicalize(q, rhs), canonicalize(q2, rhs2)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn derivations(catalog: &Catalog) -> Outcome {
    let base = |id: &str| {
        let e = catalog.get(id).expect("base id");
        BaseIdentity { spec: e.lhs.clone(), rhs: e.rhs.clone() }
    };
    let mut results = Vec::new();
    let type_s = [
        ("S1", "R-256-6k1", "k^3"),
        ("S2", "R-m512-6k1", "k^3"),
        ("S3", "R-4096-42k5", "k^3"),
        ("ex1.1-256", "R-256-6k1", "k^2+1"),
    ];
    for (target_id, base_id, p) in type_s {
        let target = Poly::parse(p).unwrap();
        let req = DerivationRequest { base: base(base_id), target: target.clone(), mode: DeriveMode::TypeS, escalate: false };
        let expected = catalog.get(target_id).unwrap();
        let ok = derive(&req).is_ok_and(|d| {
            let q = expected.lhs.numer.div_exact(&target).unwrap();
            same_up_to_scalar(&d.q, &d.rhs, &q, &expected.rhs) && d.spec.numer == expected.lhs.numer
        });
        results.push((target_id, ok));
    }
    let example = derive(&DerivationRequest {
        base: base("R-256-6k1"),
        target: Poly::parse("k^2+1").unwrap(),
        mode: DeriveMode::TypeS,
        escalate: false,
    })
    .is_ok_and(|d| d.q == Poly::parse("192k^2-626k-103").unwrap() && d.rhs == ConstExpr::parse("-1373/(3 pi)").unwrap());
    results.push(("192k^2-626k-103 | -1373/(3 pi)", example));
    for (target_id, base_id, q) in
        [("S1p", "lem2.2-256", "13608k^2+25050k+10589"), ("S3p", "lem2.2-4096", "32473224k^2+58012446k+24235261")]
    {
        let expected = catalog.get(target_id).unwrap();
        let ok = derive_catalan_variant(&base(base_id), &Poly::parse("k^3").unwrap())
            .is_ok_and(|d| d.q == Poly::parse(q).unwrap() && d.rhs == expected.rhs && d.spec == expected.lhs);
        results.push((target_id, ok));
    }
    let t1 = catalog.get("T1").unwrap();
    let ok = derive(&DerivationRequest { base: base("Z-zeta2"), target: Poly::one(), mode: DeriveMode::TypeT, escalate: false })
        .is_ok_and(|d| d.q == Poly::parse("198k^2-227k+47").unwrap() && d.rhs == t1.rhs && d.spec == t1.lhs);
    results.push(("T1", ok));
    let failed: Vec<&str> = results.iter().filter(|(_, ok)| !ok).map(|(id, _)| *id).collect();
    outcome(
        failed.is_empty(),
        format!(
            "reproduced {}/{}: {}",
            results.len() - failed.len(),
            results.len(),
            results.iter().map(|(id, ok)| format!("{id} {}", if *ok { "ok" } else { "MISMATCH" })).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn rediscovery(catalog: &Catalog) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for id in ["S1", "T1"] {
        let e = catalog.get(id).unwrap();
        let r = rediscover(&e.lhs, &e.rhs, 150).expect("rediscover");
        pass &= r.matches;
        let coeffs: Vec<String> = r.basis.expected.iter().map(ToString::to_string).collect();
        parts.push(format!("{id} [{}] {}", coeffs.join(", "), if r.matches { "matched" } else { "NOT matched" }));
    }
    let decoys = run_decoys(catalog, 150).expect("decoys");
    let false_positives: Vec<String> =
        decoys.iter().filter(|d| d.false_positive()).map(|d| format!("{} {:?}", d.label, d.perturbation)).collect();
    pass &= decoys.len() >= 20 && false_positives.is_empty();
    parts.push(format!("{} decoy problems, {} false positives", decoys.len(), false_positives.len()));
    if !false_positives.is_empty() {
        parts.push(false_positives.join(", "));
    }
    let pi_free: Vec<&DecoyResult> = decoys.iter().filter(|d| d.discovery.accepted && !d.involves_pi()).collect();
    if !pi_free.is_empty() {
        let certified = pi_free.iter().filter(|d| zero_sum_certified(catalog, d)).count();
        pass &= certified == pi_free.len();
        let labels: Vec<String> = pi_free.iter().map(|d| format!("{} {:?}", d.label, d.perturbation)).collect();
        parts.push(format!(
            "{} accepted relations free of pi ({}), {certified} certified as exact zero sums by telescoping",
            pi_free.len(),
            labels.join(", ")
        ));
    }
    outcome(pass, format!("at 150 digits: {}", parts.join("; ")))
}

/// A relation among the monomial sums alone: `q(k) = sum c_j k^j` must
/// telescope with limit zero.
fn zero_sum_certified(catalog: &Catalog, decoy: &DecoyResult) -> bool {
    let PslqOutcome::Found(rel) = &decoy.discovery.outcome else { return false };
    let n = decoy.basis.sums.len();
    if rel.coefficients[n..].iter().any(|c| !c.is_zero()) {
        return false;
    }
    let q = decoy
        .basis
        .exponents
        .iter()
        .zip(&rel.coefficients)
        .fold(Poly::zero(), |acc, (&j, c)| &acc + &Poly::x().pow(j as u32).scale(&Rational::from_integer(c.clone())));
    let t = catalog.get(&decoy.label).expect("decoy id").lhs.with_numer(Poly::one());
    let Ok(Some(ratio)) = t.ratio() else { return false };
    let Ok(GosperResult { certificate: Some(y), .. }) = gosper(&ratio, &q) else { return false };
    Certificate::build(&t, &q, y, 60).is_ok_and(|c| c.limit_value(&t).is_ok_and(|v| v == Some(Rational::zero())))
}

/// Independent residue of the companion sum at `p`: exact rational sum, then
/// reduction with an inverse from the extended Euclidean algorithm.
fn companion_residue(p: u64) -> BigInt {
    let modulus = BigInt::from(p).pow(4);
    let mut sum = Rational::zero();
    for k in 1..=((p - 1) / 2) as i64 {
        let q = 6 * k * k - 19 * k + 6;
        let c = binom(2 * k, k);
        sum += Rational::new(BigInt::from(q * k * k * k) * &c * &c * &c, BigInt::from(256).pow(k as u32));
    }
    let den = sum.denom().mod_floor(&modulus);
    let inv = den.extended_gcd(&modulus).x.mod_floor(&modulus);
    (sum.numer().mod_floor(&modulus) * inv).mod_floor(&modulus)
}

fn congruences() -> Outcome {
    let report = scan_primes(&s1_companion(), 5, 199).expect("scan");
    let p5 = report.verdicts.iter().find_map(|v| match v {
        PrimeVerdict::Checked(r) if r.p == 5 => Some(r.clone()),
        _ => None,
    });
    let oracle = companion_residue(5);
    let p5_ok = p5.as_ref().is_some_and(|r| r.lhs_residue == oracle && r.lhs_residue_per_term == oracle && r.holds);
    outcome(
        report.all_pass() && report.passed == 44 && p5_ok,
        format!(
            "{} primes in [5, 199] pass mod p^4, {} failed, {} strategy disagreements; p = 5 residue {} mod 625 (independent oracle {oracle})",
            report.passed,
            report.failed,
            report.disagreements,
            p5.map(|r| r.lhs_residue.to_string()).unwrap_or_else(|| "missing".into()),
        ),
    )
}

fn sequence_oracles() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (name, kind) in [("Domb", SeqKind::Domb), ("Franel4", SeqKind::Franel4)] {
        let equal = matches!(seq_crosscheck(&kind, 100), Ok(CrossCheck::Equal { n_max: 100 }));
        pass &= equal;
        parts.push(format!("{name} recurrence = definition on [0,100]: {equal}"));
    }
    let b = |n: i64, k: i64| binom(n, k);
    let sum = |n: i64, f: &dyn Fn(i64) -> BigInt| (0..=n).map(f).sum::<BigInt>();
    let small: [(&str, SeqKind, i64, BigInt); 6] = [
        ("Domb(3)", SeqKind::Domb, 3, sum(3, &|k| b(3, k).pow(2) * b(2 * k, k) * b(6 - 2 * k, 3 - k))),
        ("f_2^(4)", SeqKind::Franel4, 2, sum(2, &|k| b(2, k).pow(4))),
        ("beta_2", SeqKind::AperyBeta, 2, sum(2, &|k| b(2, k).pow(2) * b(2 + k, k))),
        ("Co(1)", SeqKind::CooperCo, 1, sum(1, &|k| b(1, k).pow(2) * b(1 + k, k) * b(2 * k, 1))),
        ("Z_2", SeqKind::Zagier, 2, sum(2, &|k| b(2, k) * b(2 * k, k) * b(4 - 2 * k, 2 - k))),
        ("T_2(1,1)", SeqKind::Trinomial { b: 1, c: 1 }, 2, sum(1, &|j| b(2, 2 * j) * b(2 * j, j))),
    ];
    let mut values = Vec::new();
    for (label, kind, n, oracle) in small {
        let got = seq_value(&kind, n as u64).expect("sequence value");
        pass &= got == Rational::from_integer(oracle.clone());
        values.push(format!("{label}={got} (oracle {oracle})"));
    }
    parts.push(values.join(", "));
    outcome(pass, parts.join("; "))
}

fn conjectures(catalog: &Catalog) -> Outcome {
    let entries = catalog.select(None, Some(IdentityClass::Conjectural));
    let reports = verify_many(&entries, 60, rayon::current_num_threads()).expect("worker pool");
    let failing: Vec<&str> = reports.iter().filter(|r| !r.ok()).map(|r| r.id.as_str()).collect();
    let unexpected: Vec<&str> = failing.iter().copied().filter(|id| !KNOWN_CONJECTURE_FINDINGS.contains(id)).collect();
    let ratio_assumed = reports.iter().filter(|r| r.tail_class.as_deref() == Some(&TailClass::RatioAssumed.to_string())).count();
    let printed_suspect: Vec<String> = catalog
        .select(None, Some(IdentityClass::TranscriptionSuspect))
        .iter()
        .filter(|e| e.id().starts_with("conj-"))
        .map(|e| e.id().to_string())
        .collect();
    outcome(
        unexpected.is_empty(),
        format!(
            "{} of {} conjectural entries conjecture-consistent at 60 digits ({ratio_assumed} with ratio-assumed tails); findings (fail as stored): {}; printed forms repaired and kept as suspect: {}{}",
            reports.len() - failing.len(),
            reports.len(),
            if failing.is_empty() { "none".to_string() } else { failing.join(", ") },
            printed_suspect.join(", "),
            if unexpected.is_empty() { String::new() } else { format!("; UNEXPECTED failures: {}", unexpected.join(", ")) }
        ),
    )
}

fn random_rational(rng: &mut StdRng) -> Rational {
    let n: i64 = rng.gen();
    let d: i64 = rng.gen_range(1..=i64::MAX);
    let e: i32 = rng.gen_range(-60..60);
    let r = Rational::new(BigInt::from(n), BigInt::from(d));
    if e >= 0 {
        r * Rational::from_integer(BigInt::one() << e as usize)
    } else {
        r / Rational::from_integer(BigInt::one() << (-e) as usize)
    }
}

fn mutated(entry: &Identity, position: usize) -> Identity {
    let mut coeffs = entry.lhs.numer.coeffs().to_vec();
    coeffs.resize(coeffs.len().max(position + 1), Rational::zero());
    coeffs[position] += Rational::one();
    let mut m = entry.clone();
    m.lhs.numer = Poly::from_coeffs(coeffs);
    m
}

fn properties(catalog: &Catalog) -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let ops = [(BallOp::Add, RatOp::Add), (BallOp::Sub, RatOp::Sub), (BallOp::Mul, RatOp::Mul), (BallOp::Div, RatOp::Div)];
    let mut contained = 0;
    let cases = 10_000;
    for i in 0..cases {
        let (a, b) = (random_rational(&mut rng), random_rational(&mut rng));
        let (bop, rop) = ops[i % 4];
        let prec = rng.gen_range(8..300);
        let ball = Ball::arith(bop, &Ball::from_rational(&a, prec), &Ball::from_rational(&b, prec), prec);
        match (ball, rat_arith(rop, &a, &b)) {
            (Ok(ball), Ok(exact)) if ball.contains_rational(&exact) => contained += 1,
            (Err(_), Err(_)) => contained += 1,
            _ => {}
        }
    }

    let mut split_specs = 0;
    let mut split_mismatch = Vec::new();
    for e in catalog.entries().iter().filter(|e| e.eval_class() == EvalClass::Fast && e.lhs.is_hypergeometric()) {
        split_specs += 1;
        let mut naive = Rational::zero();
        for n in e.lhs.start..=200 {
            naive += e.lhs.term_exact(n).expect("term");
            let sampled = n < e.lhs.start + 8 || n % 16 == 0 || n == 199 || n == 200;
            if sampled && e.lhs.partial_sum_exact(n).expect("split sum") != naive {
                split_mismatch.push(format!("{} at N={n}", e.id()));
                break;
            }
        }
    }

    let mut mutations = 0;
    let mut survivors = Vec::new();
    let mutated_ids = ["S1", "S2", "S3", "T1", "ex1.1-256", "S1p", "R-4096-42k5", "thm1.4-D-32"];
    for id in mutated_ids {
        let e = catalog.get(id).unwrap();
        for position in 0..e.lhs.numer.coeffs().len() {
            mutations += 1;
            if verify(&mutated(e, position), 30).verdict != Verdict::Failed {
                survivors.push(format!("{id}[k^{position}]"));
            }
        }
    }

    outcome(
        contained == cases && split_mismatch.is_empty() && survivors.is_empty(),
        format!(
            "ball containment {contained}/{cases}; binary splitting = naive on {split_specs} fast hypergeometric specs at N = start..start+7, every multiple of 16, 199 and 200{}; {} single-coefficient mutations over {} identities, {} survived{}",
            if split_mismatch.is_empty() { String::new() } else { format!(" except {}", split_mismatch.join(", ")) },
            mutations,
            mutated_ids.len(),
            survivors.len(),
            if survivors.is_empty() { String::new() } else { format!(" ({})", survivors.join(", ")) }
        ),
    )
}

fn main() -> ExitCode {
    let catalog = Catalog::shipped().expect("shipped catalog");
    let criteria: [Criterion; 8] = [
        ("exact lemma suite", Box::new(lemma_suite)),
        ("proved identities at 100 digits", Box::new(|| proved_at_100(&catalog))),
        ("derivation regressions", Box::new(|| derivations(&catalog))),
        ("PSLQ rediscovery and decoys", Box::new(|| rediscovery(&catalog))),
        ("congruence sweep", Box::new(congruences)),
        ("sequence oracles", Box::new(sequence_oracles)),
        ("conjecture consistency", Box::new(|| conjectures(&catalog))),
        ("property suites", Box::new(|| properties(&catalog))),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = run();
        all &= o.pass;
        println!(
            "criterion {} {name}: {} ({:.1} s) {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
