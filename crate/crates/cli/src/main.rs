use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use piforge::catalog::{
    self, verify, verify_many, Catalog, DiscoverOutcome, Family, Identity, IdentityClass, VerifySummary,
};
use piforge::congruence::{s1_companion, scan_primes, CongruenceSpec, PrimeVerdict};
use piforge::constants::{self, const_eval, ConstExpr};
use piforge::derive::{derive, derive_catalan_variant, BaseIdentity, DerivationRequest, DeriveMode, DerivedIdentity};
use piforge::discover::PslqOutcome;
use piforge::numerics::{Ball, Poly};
use piforge::sequences::{cached_values, SeqKind};
use piforge::series::digits_to_bits;
use piforge::Error;

const VERIFY_DIGITS: u32 = 60;
const DISCOVER_DIGITS: u32 = 150;

#[derive(Parser)]
#[command(name = "pi-forge", version, about = "Certified checks of series for powers of pi")]
struct Cli {
    /// Catalog file; defaults to the shipped catalog.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    /// One JSON object per line instead of text.
    #[arg(long, global = true)]
    machine_output: bool,
    /// Decimal digits of precision.
    #[arg(long, global = true, env = "PI_FORGE_DIGITS")]
    digits: Option<u32>,
    /// Worker threads for parallel commands.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List catalog entries.
    List {
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        class: Option<IdentityClass>,
    },
    /// Verify one identity.
    Verify {
        #[arg(long)]
        id: String,
    },
    /// Verify every selected identity.
    VerifyAll {
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        class: Option<IdentityClass>,
    },
    /// Derive a type-S or type-T companion of a catalog identity.
    Derive {
        #[arg(long)]
        base: String,
        /// Target polynomial P(k).
        #[arg(long)]
        poly: Option<String>,
        /// Derivation route; inferred from the base when omitted.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Rediscover an identity's coefficients by integer-relation search.
    Discover {
        #[arg(long)]
        id: String,
    },
    /// Scan primes for a p-adic congruence.
    Congruence {
        #[arg(long, default_value = "S1-padic")]
        spec: String,
        #[arg(long)]
        pmin: Option<u64>,
        #[arg(long, default_value_t = 199)]
        pmax: u64,
    },
    /// Print the first terms of a sequence.
    EvalSeq {
        /// Sequence name, e.g. `domb`, `franel4`, `trinomial(1,1)`.
        #[arg(long)]
        seq: String,
        #[arg(long, default_value_t = 10)]
        count: u64,
    },
    /// Evaluate constants, or the expression given with --expr.
    Constants {
        #[arg(long)]
        expr: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    S,
    T,
    Catalan,
}

enum Failure {
    Usage(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

struct Ctx {
    catalog: Option<PathBuf>,
    machine: bool,
    digits: Option<u32>,
    workers: usize,
}

impl Ctx {
    fn load(&self) -> Result<Catalog, Error> {
        match &self.catalog {
            Some(p) => Catalog::load(p),
            None => Catalog::shipped(),
        }
    }

    fn digits(&self, default: u32) -> u32 {
        self.digits.unwrap_or(default)
    }

    fn emit(&self, object: Value, text: impl FnOnce() -> String) {
        let line = if self.machine { object.to_string() } else { text() };
        if writeln!(std::io::stdout().lock(), "{line}").is_err() {
            // reader went away (e.g. piped into `head`)
            std::process::exit(0);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx {
        catalog: cli.catalog,
        machine: cli.machine_output,
        digits: cli.digits,
        workers: cli.workers.unwrap_or_else(rayon::current_num_threads).max(1),
    };
    let result = match cli.command {
        Command::List { family, class } => list(&ctx, family, class),
        Command::Verify { id } => verify_one(&ctx, &id),
        Command::VerifyAll { family, class } => verify_all(&ctx, family, class),
        Command::Derive { base, poly, mode } => derive_cmd(&ctx, &base, poly.as_deref(), mode),
        Command::Discover { id } => discover_cmd(&ctx, &id),
        Command::Congruence { spec, pmin, pmax } => congruence_cmd(&ctx, &spec, pmin, pmax),
        Command::EvalSeq { seq, count } => eval_seq(&ctx, &seq, count),
        Command::Constants { expr } => constants_cmd(&ctx, expr.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(message)) => {
            if ctx.machine {
                println!("{}", json!({ "error": message }));
            }
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn list(ctx: &Ctx, family: Option<Family>, class: Option<IdentityClass>) -> Outcome {
    let catalog = ctx.load()?;
    for e in catalog.select(family, class) {
        let r = &e.record;
        ctx.emit(
            json!({
                "id": r.id, "family": r.family, "class": r.class, "eval_class": r.eval_class,
                "source": r.source, "rhs": e.rhs.to_string(),
            }),
            || format!("{:<18} {:<9} {:<22} {:<5} {}", r.id, r.family, r.class, r.eval_class, r.source),
        );
    }
    Ok(())
}

fn verify_one(ctx: &Ctx, id: &str) -> Outcome {
    let catalog = ctx.load()?;
    let entry = catalog.get(id)?;
    let report = verify(entry, ctx.digits(VERIFY_DIGITS));
    ctx.emit(serde_json::to_value(&report).unwrap_or(Value::Null), || report.to_text());
    if report.ok() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn verify_all(ctx: &Ctx, family: Option<Family>, class: Option<IdentityClass>) -> Outcome {
    let catalog = ctx.load()?;
    let selected = catalog.select(family, class);
    let reports = verify_many(&selected, ctx.digits(VERIFY_DIGITS), ctx.workers)?;
    for r in &reports {
        ctx.emit(serde_json::to_value(r).unwrap_or(Value::Null), || r.to_text());
    }
    let summary = VerifySummary::of(&reports);
    ctx.emit(json!({ "summary": summary }), || {
        format!(
            "total {}  verified {}  conjecture-consistent {}  failed {}  skipped {}  proved failures {}",
            summary.total,
            summary.verified,
            summary.conjecture_consistent,
            summary.failed,
            summary.skipped,
            summary.proved_failures
        )
    });
    if summary.proved_failures == 0 {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn infer_mode(entry: &Identity) -> ModeArg {
    let spec = &entry.lhs;
    if spec.factors.iter().any(|f| f.exponent < 0) {
        ModeArg::T
    } else if spec.denom.deg() > 0 && Poly::parse("2k-1").is_ok_and(|p| spec.denom.div_rem(&p).is_ok_and(|(_, r)| r.is_zero())) {
        ModeArg::Catalan
    } else {
        ModeArg::S
    }
}

fn derive_cmd(ctx: &Ctx, base_id: &str, poly: Option<&str>, mode: Option<ModeArg>) -> Outcome {
    let catalog = ctx.load()?;
    let entry = catalog.get(base_id)?;
    let base = BaseIdentity { spec: entry.lhs.clone(), rhs: entry.rhs.clone() };
    let target = poly.map(Poly::parse).transpose()?;
    let derived: DerivedIdentity = match mode.unwrap_or_else(|| infer_mode(entry)) {
        ModeArg::S => {
            let target = target.ok_or_else(|| Failure::Usage("type-S derivation needs --poly".into()))?;
            derive(&DerivationRequest { base, target, mode: DeriveMode::TypeS, escalate: true })?
        }
        ModeArg::T => {
            let target = target.unwrap_or_else(Poly::one);
            derive(&DerivationRequest { base, target, mode: DeriveMode::TypeT, escalate: true })?
        }
        ModeArg::Catalan => {
            let e = entry.lhs.factors.first().map(|f| f.exponent.unsigned_abs()).unwrap_or(1);
            let target = target.unwrap_or_else(|| Poly::x().pow(e));
            derive_catalan_variant(&base, &target)?
        }
    };
    ctx.emit(
        json!({
            "base": base_id,
            "q": derived.q.to_string(),
            "rhs": derived.rhs.to_string(),
            "numerator": derived.spec.numer.to_string(),
            "confirmed_digits": derived.confirmed_digits,
            "solution_dim": derived.solution_dim,
            "provenance": derived.provenance,
        }),
        || {
            let mut out = format!(
                "q(k) = {}\nrhs = {}\nsummand numerator = {}\nconfirmed to {} digits",
                derived.q, derived.rhs, derived.spec.numer, derived.confirmed_digits
            );
            for step in &derived.provenance {
                out.push_str(&format!("\n  {step}"));
            }
            out
        },
    );
    Ok(())
}

fn discover_cmd(ctx: &Ctx, id: &str) -> Outcome {
    let catalog = ctx.load()?;
    let entry = catalog.get(id)?;
    let digits = ctx.digits(DISCOVER_DIGITS);
    match catalog::discover_entry(entry, digits)? {
        DiscoverOutcome::Skipped(reason) => {
            ctx.emit(json!({ "id": id, "status": "skipped", "reason": reason }), || format!("{id}: skipped ({reason})"));
            Ok(())
        }
        DiscoverOutcome::Done(r) => {
            let expected: Vec<String> = r.basis.expected.iter().map(ToString::to_string).collect();
            let (found, norm_bound) = match &r.discovery.outcome {
                PslqOutcome::Found(rel) => (Some(rel.coefficients.iter().map(ToString::to_string).collect::<Vec<_>>()), None),
                PslqOutcome::Excluded { norm_bound } => (None, Some(*norm_bound)),
            };
            ctx.emit(
                json!({
                    "id": id, "digits": digits, "status": if r.matches { "match" } else { "mismatch" },
                    "expected": expected, "found": found, "accepted": r.discovery.accepted,
                    "recheck_digits": r.discovery.recheck_digits, "norm_bound": norm_bound,
                }),
                || match &found {
                    Some(f) => format!(
                        "{id}: {} at {digits} digits\n  expected ({})\n  found    ({})",
                        if r.matches { "relation match" } else { "relation mismatch" },
                        expected.join(", "),
                        f.join(", ")
                    ),
                    None => format!("{id}: no relation below norm {:.3e} at {digits} digits", norm_bound.unwrap_or(0.0)),
                },
            );
            if r.matches {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
    }
}

fn congruence_spec(name: &str) -> Result<CongruenceSpec, Failure> {
    let spec = s1_companion();
    if spec.id == name {
        Ok(spec)
    } else {
        Err(Failure::Usage(format!("unknown congruence `{name}`; known: {}", spec.id)))
    }
}

fn congruence_cmd(ctx: &Ctx, name: &str, pmin: Option<u64>, pmax: u64) -> Outcome {
    let spec = congruence_spec(name)?;
    let pmin = pmin.unwrap_or(spec.p_min);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    let report = pool.install(|| scan_primes(&spec, pmin, pmax))?;
    for v in &report.verdicts {
        ctx.emit(serde_json::to_value(v).unwrap_or(Value::Null), || match v {
            PrimeVerdict::Checked(r) => format!(
                "p = {:>4}  mod {}  lhs {}  rhs {}  {}{}",
                r.p,
                r.modulus,
                r.lhs_residue,
                r.rhs_residue,
                if r.holds { "holds" } else { "FAILS" },
                if r.strategies_agree { "" } else { "  (strategies disagree)" }
            ),
            PrimeVerdict::Skipped { p, reason } => format!("p = {p:>4}  skipped: {reason}"),
            PrimeVerdict::Error { p, message } => format!("p = {p:>4}  error: {message}"),
        });
    }
    let summary = json!({
        "spec": spec.id, "passed": report.passed, "failed": report.failed, "skipped": report.skipped,
        "errors": report.errors, "disagreements": report.disagreements,
    });
    ctx.emit(json!({ "summary": summary }), || {
        format!(
            "{}: {} passed, {} failed, {} skipped, {} errors, {} disagreements",
            spec.id, report.passed, report.failed, report.skipped, report.errors, report.disagreements
        )
    });
    if report.all_pass() {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn eval_seq(ctx: &Ctx, name: &str, count: u64) -> Outcome {
    let kind = SeqKind::parse(name)?;
    if count == 0 {
        return Ok(());
    }
    let values = cached_values(&kind, count - 1)?;
    for (n, v) in values.iter().take(count as usize).enumerate() {
        ctx.emit(json!({ "seq": kind.to_string(), "n": n, "value": v.to_string() }), || format!("{n:>4}  {v}"));
    }
    Ok(())
}

fn dual_route(a: &Ball, b: &Ball) -> bool {
    a.sub(b).contains_zero()
}

fn constants_cmd(ctx: &Ctx, expr: Option<&str>) -> Outcome {
    let digits = ctx.digits(VERIFY_DIGITS);
    let prec = digits_to_bits(digits) + 16;
    let show = |name: &str, value: &Ball, agree: Option<bool>| {
        let text = value.to_decimal(digits as usize);
        ctx.emit(json!({ "name": name, "value": text, "routes_agree": agree }), || match agree {
            Some(a) => format!("{name:<8} {text}  [{}]", if a { "two routes agree" } else { "ROUTES DISAGREE" }),
            None => format!("{name:<8} {text}"),
        });
    };
    if let Some(e) = expr {
        let e = ConstExpr::parse(e)?;
        show(&e.to_string(), &const_eval(&e, prec)?, None);
        return Ok(());
    }
    let pi = constants::pi_chudnovsky(prec)?;
    let pi_ok = dual_route(&pi, &constants::pi_machin(prec));
    show("pi", &pi, Some(pi_ok));
    let z3 = constants::zeta3_central(prec);
    let z3_ok = dual_route(&z3, &constants::zeta3_hurwitz(prec)?);
    show("zeta3", &z3, Some(z3_ok));
    let g = constants::catalan_accelerated(prec)?;
    let g_ok = dual_route(&g, &constants::catalan_hurwitz(prec)?);
    show("G", &g, Some(g_ok));
    show("K", &constants::dirichlet_k(prec)?, None);
    for name in ["log(2)", "log(3)", "sqrt(2)", "sqrt(3)"] {
        show(name, &const_eval(&ConstExpr::parse(name)?, prec)?, None);
    }
    if pi_ok && z3_ok && g_ok {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
