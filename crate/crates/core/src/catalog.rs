//! Identity catalog: schema, loading, canonical serialization and
//! verification reports.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{ConstAtom, ConstExpr};
use crate::discover::{self, PiPerturbation, Rediscovery};
use crate::error::{Error, Result};
use crate::numerics::{format_rational, parse_rational, rat_pow, Poly};
use crate::sequences::SeqKind;
use crate::series::{check_identity, Factor, IndexMap, TailClass, TermSpec};

/// The shipped catalog.
pub const DEFAULT_CATALOG: &str = include_str!("../data/identities.toml");

/// Digits used by the load-time self-test of proved entries.
pub const SELF_TEST_DIGITS: u32 = 30;

/// Digits reachable for conditionally convergent series.
pub const SLOW_DIGITS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    R,
    S,
    Sprime,
    T,
    Tprime,
    Z,
    #[serde(rename = "zero-sum")]
    ZeroSum,
    #[serde(rename = "mixed")]
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityClass {
    Proved,
    Conjectural,
    TranscriptionSuspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalClass {
    Fast,
    Slow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasePosition {
    /// `m^k` in the denominator.
    #[default]
    Divides,
    /// `m^k` in the numerator.
    Multiplies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Verified,
    ConjectureConsistent,
    Failed,
    Skipped,
}

macro_rules! text_enum {
    ($t:ty) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(v.as_str().unwrap_or_default())
            }
        }

        impl FromStr for $t {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .map_err(|_| Error::Parse(format!("unknown value `{s}`")))
            }
        }
    };
}

text_enum!(Family);
text_enum!(IdentityClass);
text_enum!(EvalClass);
text_enum!(Verdict);

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// One catalog document as written in the file. Polynomials are kept in
/// their written (often factored) form; numbers are exact strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityRecord {
    pub id: String,
    pub family: Family,
    pub class: IdentityClass,
    pub eval_class: EvalClass,
    pub source: String,
    pub numer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub denom: Option<String>,
    pub base: String,
    #[serde(default, skip_serializing_if = "is_default")]
    pub base_position: BasePosition,
    /// Exponent shift: the term carries `m^(k + base_offset)`.
    #[serde(default, skip_serializing_if = "is_default")]
    pub base_offset: i64,
    #[serde(default)]
    pub factors: Vec<String>,
    pub start: u64,
    pub rhs: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Identity {
    pub record: IdentityRecord,
    pub lhs: TermSpec,
    pub rhs: ConstExpr,
}

/// Semantic equality: the compiled series and constant, plus metadata.
/// Spelling differences in polynomials, bases or constants are ignored.
impl PartialEq for Identity {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (&self.record, &other.record);
        self.lhs == other.lhs
            && self.rhs == other.rhs
            && a.id == b.id
            && a.family == b.family
            && a.class == b.class
            && a.eval_class == b.eval_class
            && a.source == b.source
            && a.note == b.note
    }
}

impl Identity {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn family(&self) -> Family {
        self.record.family
    }

    pub fn class(&self) -> IdentityClass {
        self.record.class
    }

    pub fn eval_class(&self) -> EvalClass {
        self.record.eval_class
    }

    /// Whether the right-hand side involves `pi`.
    pub fn mentions_pi(&self) -> bool {
        self.rhs.atoms().contains(&ConstAtom::Pi)
    }
}

/// `kind[index]^exponent`, e.g. `binom(2k,k)^3`, `trinomial(8,-2)[k-1]`.
pub fn parse_factor(s: &str) -> Result<Factor> {
    let s = s.trim();
    let (body, exponent) = match s.rfind('^') {
        Some(i) if !s[i..].contains(')') && !s[i..].contains(']') => {
            let e = s[i + 1..].trim().parse::<i32>().map_err(|_| Error::Parse(format!("bad exponent in `{s}`")))?;
            (&s[..i], e)
        }
        _ => (s, 1),
    };
    if exponent == 0 {
        return Err(Error::Parse(format!("zero exponent in `{s}`")));
    }
    let (kind_str, index) = match body.strip_suffix(']') {
        Some(rest) => {
            let open = rest.rfind('[').ok_or_else(|| Error::Parse(format!("unbalanced `]` in `{s}`")))?;
            let p = Poly::parse(&rest[open + 1..])?;
            let ints = p.integer_coeffs().filter(|_| p.deg() <= 1);
            let Some(ints) = ints else {
                return Err(Error::Parse(format!("index in `{s}` must be affine with integer coefficients")));
            };
            let get = |i: usize| ints.get(i).and_then(|v| i64::try_from(v).ok()).unwrap_or(0);
            (&rest[..open], IndexMap { scale: get(1), offset: get(0) })
        }
        None => (body, IndexMap::IDENTITY),
    };
    if index.scale < 1 {
        return Err(Error::Parse(format!("index in `{s}` must increase with k")));
    }
    let kind = SeqKind::parse(kind_str)?;
    Ok(Factor { kind, exponent, index })
}

pub fn factor_to_string(f: &Factor) -> String {
    let mut out = f.kind.to_string();
    if f.index != IndexMap::IDENTITY {
        let p = Poly::from_ints(&[f.index.offset, f.index.scale]);
        out.push_str(&format!("[{}]", p.to_string().replace(' ', "")));
    }
    if f.exponent != 1 {
        out.push_str(&format!("^{}", f.exponent));
    }
    out
}

fn compile(record: &IdentityRecord) -> std::result::Result<(TermSpec, ConstExpr), (String, Error)> {
    fn field(name: &'static str) -> impl Fn(Error) -> (String, Error) {
        move |e| (name.to_string(), e)
    }
    let mut numer = Poly::parse(&record.numer).map_err(field("numer"))?;
    let denom = match &record.denom {
        Some(d) => Poly::parse(d).map_err(field("denom"))?,
        None => Poly::one(),
    };
    let base = parse_rational(&record.base).map_err(field("base"))?;
    if base.is_zero() {
        return Err(("base".into(), Error::InvalidParameter("base must be nonzero".into())));
    }
    if record.base_offset != 0 {
        let shift = match record.base_position {
            BasePosition::Divides => -record.base_offset,
            BasePosition::Multiplies => record.base_offset,
        };
        numer = numer.scale(&rat_pow(&base, shift).map_err(field("base_offset"))?);
    }
    let factors = record.factors.iter().map(|f| parse_factor(f)).collect::<Result<Vec<_>>>().map_err(field("factors"))?;
    // (+-1)^k is its own inverse; one spelling keeps equal series equal
    let base_divides = record.base_position == BasePosition::Divides || base.abs().is_one();
    let spec = TermSpec {
        numer,
        denom,
        base,
        base_divides,
        factors,
        start: record.start,
    };
    spec.validate().map_err(field("lhs"))?;
    let rhs = ConstExpr::parse(&record.rhs).map_err(field("rhs"))?;
    Ok((spec, rhs))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Catalog {
    entries: Vec<Identity>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    identity: Vec<IdentityRecord>,
}

impl Catalog {
    /// Parses and checks a catalog document; `origin` names it in errors.
    pub fn from_toml(text: &str, origin: &str) -> Result<Catalog> {
        let file: CatalogFile = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let line = text[..span.start.min(text.len())].lines().count().max(1);
                    format!("{origin}:{line}")
                }
                None => origin.to_string(),
            };
            Error::Schema { location, message: e.message().to_string() }
        })?;
        Catalog::from_records(file.identity, origin)
    }

    pub fn from_records(records: Vec<IdentityRecord>, origin: &str) -> Result<Catalog> {
        let mut seen = HashSet::new();
        let mut entries = Vec::with_capacity(records.len());
        for record in records {
            if !seen.insert(record.id.clone()) {
                return Err(Error::DuplicateId(record.id));
            }
            let (lhs, rhs) = compile(&record).map_err(|(field, e)| Error::Schema {
                location: format!("{origin}: identity `{}` field `{field}`", record.id),
                message: e.to_string(),
            })?;
            entries.push(Identity { record, lhs, rhs });
        }
        Ok(Catalog { entries })
    }

    pub fn load(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Catalog::from_toml(&text, &path.display().to_string())
    }

    pub fn shipped() -> Result<Catalog> {
        Catalog::from_toml(DEFAULT_CATALOG, "shipped catalog")
    }

    /// Canonical document: entries in file order, `rhs` and `base` in
    /// normal form.
    pub fn to_toml(&self) -> Result<String> {
        let identity = self
            .entries
            .iter()
            .map(|e| IdentityRecord {
                base: format_rational(&e.lhs.base),
                rhs: e.rhs.to_string(),
                factors: e.lhs.factors.iter().map(factor_to_string).collect(),
                ..e.record.clone()
            })
            .collect();
        toml::to_string(&CatalogFile { identity }).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn entries(&self) -> &[Identity] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Result<&Identity> {
        self.entries.iter().find(|e| e.id() == id).ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn select(&self, family: Option<Family>, class: Option<IdentityClass>) -> Vec<&Identity> {
        self.entries
            .iter()
            .filter(|e| family.is_none_or(|f| e.family() == f) && class.is_none_or(|c| e.class() == c))
            .collect()
    }

    /// Proved entries failing verification at [`SELF_TEST_DIGITS`]
    /// (or [`SLOW_DIGITS`] for slow series).
    pub fn self_test(&self) -> Vec<VerificationReport> {
        let proved = self.select(None, Some(IdentityClass::Proved));
        let mut bad: Vec<VerificationReport> = proved
            .par_iter()
            .map(|e| verify(e, SELF_TEST_DIGITS))
            .filter(|r| r.verdict != Verdict::Verified)
            .collect();
        bad.sort_by(|a, b| a.id.cmp(&b.id));
        bad
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub id: String,
    pub family: Family,
    pub class: IdentityClass,
    pub digits_requested: u32,
    /// Target actually attempted (capped for slow series).
    pub digits_target: u32,
    /// `-log10` of the residual radius.
    pub digits_achieved: f64,
    pub residual: String,
    pub verdict: Verdict,
    pub tail_class: Option<String>,
    pub terms_used: u64,
    pub wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl VerificationReport {
    /// Success in the sense of the exit status.
    pub fn ok(&self) -> bool {
        matches!(self.verdict, Verdict::Verified | Verdict::ConjectureConsistent)
    }

    pub fn to_text(&self) -> String {
        let mut line = format!(
            "{:<14} {:<22} digits {:>4}/{:<4} achieved {:>7.1}  tail {:<14} terms {:>6}  {:>6} ms  residual {}",
            self.id,
            self.verdict.to_string(),
            self.digits_target,
            self.digits_requested,
            self.digits_achieved,
            self.tail_class.as_deref().unwrap_or("-"),
            self.terms_used,
            self.wall_ms,
            self.residual
        );
        if let Some(n) = &self.note {
            line.push_str(&format!("  [{n}]"));
        }
        line
    }
}

/// Evaluates the left side and compares with the right side.
pub fn verify(entry: &Identity, digits: u32) -> VerificationReport {
    let t0 = Instant::now();
    let target = match entry.eval_class() {
        EvalClass::Fast => digits,
        EvalClass::Slow => digits.min(SLOW_DIGITS),
    };
    let mut report = VerificationReport {
        id: entry.id().to_string(),
        family: entry.family(),
        class: entry.class(),
        digits_requested: digits,
        digits_target: target,
        digits_achieved: 0.0,
        residual: String::new(),
        verdict: Verdict::Failed,
        tail_class: None,
        terms_used: 0,
        wall_ms: 0,
        note: (target < digits).then(|| format!("slow series: target capped at {SLOW_DIGITS} digits")),
    };
    match check_identity(&entry.lhs, &entry.rhs, target) {
        Ok(check) => {
            report.digits_achieved = -check.residual.radius_log10();
            report.residual = check.residual.to_string();
            report.tail_class = Some(check.report.tail_class.to_string());
            report.terms_used = check.report.terms_used;
            report.verdict = if check.holds_to(target) {
                match entry.class() {
                    IdentityClass::Proved => Verdict::Verified,
                    _ => Verdict::ConjectureConsistent,
                }
            } else {
                Verdict::Failed
            };
            let reason = if !check.residual.contains_zero() {
                Some("residual excludes zero".to_string())
            } else if report.verdict == Verdict::Failed {
                Some("residual radius above target".to_string())
            } else {
                None
            };
            let notes: Vec<String> = [report.note.take(), check.report.note.clone(), reason].into_iter().flatten().collect();
            report.note = (!notes.is_empty()).then(|| notes.join("; "));
            if check.report.tail_class == TailClass::Extrapolated && entry.eval_class() == EvalClass::Fast {
                report.verdict = Verdict::Failed;
                report.note = Some("fast entry needed extrapolation".into());
            }
        }
        Err(e) => {
            report.note = Some(e.to_string());
        }
    }
    report.wall_ms = t0.elapsed().as_millis();
    report
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct VerifySummary {
    pub total: usize,
    pub verified: usize,
    pub conjecture_consistent: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Proved entries that did not verify.
    pub proved_failures: usize,
}

impl VerifySummary {
    pub fn of(reports: &[VerificationReport]) -> VerifySummary {
        let mut s = VerifySummary { total: reports.len(), ..Default::default() };
        for r in reports {
            match r.verdict {
                Verdict::Verified => s.verified += 1,
                Verdict::ConjectureConsistent => s.conjecture_consistent += 1,
                Verdict::Failed => s.failed += 1,
                Verdict::Skipped => s.skipped += 1,
            }
            if r.class == IdentityClass::Proved && r.verdict != Verdict::Verified {
                s.proved_failures += 1;
            }
        }
        s
    }
}

/// Verifies `entries` on at most `workers` threads; reports sorted by id.
pub fn verify_many(entries: &[&Identity], digits: u32, workers: usize) -> Result<Vec<VerificationReport>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {workers} workers: {e}")))?;
    let mut reports: Vec<VerificationReport> = pool.install(|| entries.par_iter().map(|e| verify(e, digits)).collect());
    reports.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(reports)
}

#[derive(Debug, Clone)]
pub enum DiscoverOutcome {
    Done(Box<Rediscovery>),
    Skipped(String),
}

/// Rediscovers an entry's coefficient vector by PSLQ; slow series are skipped.
pub fn discover_entry(entry: &Identity, digits: u32) -> Result<DiscoverOutcome> {
    if entry.eval_class() == EvalClass::Slow {
        return Ok(DiscoverOutcome::Skipped(format!(
            "{} converges too slowly for {digits}-digit values",
            entry.id()
        )));
    }
    Ok(DiscoverOutcome::Done(Box::new(discover::rediscover(&entry.lhs, &entry.rhs, digits)?)))
}

/// Ids whose right side is a single power of `pi` times algebraic numbers,
/// used as decoy problems.
pub const DECOY_IDS: [&str; 11] = [
    "S1", "S2", "S3", "T1", "T4", "R-256-6k1", "R-m512-6k1", "R-4096-42k5", "R-m192-5k1", "lem2.2-256", "ex1.1-256",
];

pub fn decoy_perturbations() -> Vec<PiPerturbation> {
    vec![PiPerturbation::Add(20), PiPerturbation::Relative(40)]
}

/// Runs the decoy suite over [`DECOY_IDS`].
pub fn run_decoys(catalog: &Catalog, digits: u32) -> Result<Vec<discover::DecoyResult>> {
    let ids = DECOY_IDS
        .iter()
        .map(|id| catalog.get(id).map(|e| (e.id().to_string(), e.lhs.clone(), e.rhs.clone())))
        .collect::<Result<Vec<_>>>()?;
    discover::decoy_suite(&ids, &decoy_perturbations(), digits)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[[identity]]
id = "S1"
family = "S"
class = "proved"
eval_class = "fast"
source = "sample"
numer = "(6k^2-19k+6) k^3"
base = "256"
factors = ["binom(2k,k)^3"]
start = 0
rhs = "-1/(12 pi)"

[[identity]]
id = "T5p"
family = "Tprime"
class = "proved"
eval_class = "fast"
source = "sample"
numer = "3391155k^2-3249747k+646792"
base = "-27"
base_position = "multiplies"
base_offset = -1
factors = ["binom(2k,k+1)^-2", "binom(3k,k+1)^-1"]
start = 1
rhs = "(2344210 - 5115501 K)/30"
"#;

    #[test]
    fn load_and_verify_sample() {
        let c = Catalog::from_toml(SAMPLE, "sample").unwrap();
        assert_eq!(c.len(), 2);
        let t = c.get("T5p").unwrap();
        assert_eq!(t.lhs.numer, Poly::parse("(3391155k^2-3249747k+646792)/(-27)").unwrap());
        for e in c.entries() {
            let r = verify(e, 40);
            assert_eq!(r.verdict, Verdict::Verified, "{}", r.to_text());
        }
    }

    #[test]
    fn round_trip() {
        let c = Catalog::from_toml(SAMPLE, "sample").unwrap();
        let text = c.to_toml().unwrap();
        let again = Catalog::from_toml(&text, "again").unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_toml().unwrap(), text);
    }

    #[test]
    fn duplicate_and_empty() {
        let doubled = format!("{SAMPLE}\n{}", &SAMPLE[SAMPLE.find("[[identity]]").unwrap()..SAMPLE.find("\n\n[[identity]]\nid = \"T5p\"").unwrap()]);
        assert_eq!(Catalog::from_toml(&doubled, "dup"), Err(Error::DuplicateId("S1".into())));
        assert!(Catalog::from_toml("", "empty").unwrap().is_empty());
    }

    #[test]
    fn schema_errors_name_the_field() {
        let bad = SAMPLE.replace("rhs = \"-1/(12 pi)\"", "rhs = \"-1/(12 foo)\"");
        match Catalog::from_toml(&bad, "bad") {
            Err(Error::Schema { location, .. }) => assert!(location.contains("`S1`") && location.contains("rhs"), "{location}"),
            other => panic!("{other:?}"),
        }
        let unknown = SAMPLE.replace("start = 0", "start = 0\ncolour = 1");
        match Catalog::from_toml(&unknown, "bad") {
            Err(Error::Schema { location, message }) => {
                assert!(location.starts_with("bad:"), "{location}");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn factor_syntax() {
        for s in ["binom(2k,k)^3", "trinomial(8,-2)[k-1]", "domb", "binom(2k,k+1)^-7", "trinomial-stride(62,1,3)"] {
            let f = parse_factor(s).unwrap();
            assert_eq!(parse_factor(&factor_to_string(&f)).unwrap(), f);
        }
        assert_eq!(parse_factor("trinomial(8,-2)[k-1]").unwrap().index, IndexMap { scale: 1, offset: -1 });
        assert!(parse_factor("binom(2k,k)^0").is_err());
        assert!(parse_factor("domb[k^2]").is_err());
    }

    #[test]
    fn base_offset_follows_the_base_position() {
        // sum_{k>=1} T_{k-1} (105k-44)/(k^2 C(2k,k)^2 3^(k-1)): term 1 is 61/4 * 3^0
        let text = r#"
[[identity]]
id = "log3"
family = "T"
class = "conjectural"
eval_class = "fast"
source = "sample"
numer = "105k-44"
denom = "k^2"
base = "3"
base_offset = -1
factors = ["trinomial(1,1)[k-1]", "binom(2k,k)^-2"]
start = 1
rhs = "6 log(3) + 5 sqrt(3) pi/3"
"#;
        let c = Catalog::from_toml(text, "offset").unwrap();
        let e = c.get("log3").unwrap();
        assert_eq!(e.lhs.term_exact(1).unwrap(), crate::numerics::rat(61, 4));
        // k = 2: T_1 = 1, (210-44)/(4 * 36 * 3) = 166/432
        assert_eq!(e.lhs.term_exact(2).unwrap(), crate::numerics::rat(166, 432));
        assert_eq!(verify(e, 30).verdict, Verdict::ConjectureConsistent);
        let t = Catalog::from_toml(SAMPLE, "sample").unwrap();
        // multiplying base: (-27)^(k-1) at k = 1 is 1, and C(2,2)^2 C(3,2) = 3
        let t5p = t.get("T5p").unwrap();
        assert_eq!(t5p.lhs.term_exact(1).unwrap(), crate::numerics::rat(3391155 - 3249747 + 646792, 3));
    }

    #[test]
    fn mutated_entry_fails() {
        let c = Catalog::from_toml(&SAMPLE.replace("(6k^2-19k+6)", "(6k^2-19k+7)"), "m").unwrap();
        assert_eq!(verify(c.get("S1").unwrap(), 30).verdict, Verdict::Failed);
    }
}
