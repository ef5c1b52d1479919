//! Batch command-line surface over `hindman-core`.
//!
//! Every command prints one JSON report on stdout (with a `schema` field) and
//! maps its outcome onto a fixed exit-code contract, see [`exit`].

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use base64::Engine as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use hindman_core::extract::{extract_basis, partition_via_types, ExtractOptions, PartitionConfig};
use hindman_core::forge::{
    quotient_idempotent_type, read_transcript, verify_transcript, write_transcript, Forge, ForgeConfig, OracleMode,
    TranscriptHeader, TypeOracle,
};
use hindman_core::formula::{Formula, StructureContext, Term, Var};
use hindman_core::ip::{
    dip_witness_bounded, hindman_window, iip_witness_bounded, ip_witness_bounded, is_ip_quotient,
    verify_window_certificate, OracleVerdict, QuotientOptions, SearchOptions, WindowOutcome,
};
use hindman_core::semigroup::HomRule;
use hindman_core::spec::{HomSpec, NamedPredicateSpec, PredicateSpec, SemigroupSpec, StructureSpec};
use hindman_core::{Element, Error, SemigroupHandle, SCHEMA_VERSION};

pub mod exit {
    pub const OK: i32 = 0;
    pub const NEGATIVE: i32 = 1;
    pub const EXHAUSTED: i32 = 2;
    pub const TRUNCATED: i32 = 3;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Parser)]
#[command(name = "hindman-forge", version, about = "IP-set search, idempotent-type forging and basis extraction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// IP-set decisions.
    #[command(subcommand)]
    Ip(IpCommand),
    /// Forge an idempotent type containing X, or replay a transcript.
    Forge(ForgeArgs),
    /// Extract a basis from an idempotent-type oracle.
    Extract(ExtractArgs),
    /// Least N such that every r-colouring of [1, N] has a monochromatic FS set of k distinct generators.
    Window(WindowArgs),
}

#[derive(Debug, Subcommand)]
pub enum IpCommand {
    /// Search for a witness basis, or decide exactly through the quotient.
    Find(IpFindArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IpMode {
    Ip,
    Iip,
    Dip,
}

#[derive(Debug, Args)]
pub struct IpFindArgs {
    /// Short name (nat-add, nat-mul, free-word:ab, left-zero:3, …) or path to a JSON semigroup spec.
    #[arg(long)]
    pub semigroup: String,
    /// mod:d:r1,r2,… or elems:e1,e2,…
    #[arg(long)]
    pub pred: String,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long = "N", default_value_t = 64)]
    pub n: u64,
    /// Decide exactly through the predicate's quotient homomorphism.
    #[arg(long)]
    pub quotient: bool,
    #[arg(long)]
    pub skip_identity: bool,
    #[arg(long, value_enum, default_value_t = IpMode::Ip)]
    pub mode: IpMode,
    /// Distinct FP values required in iip mode.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    #[arg(long, default_value = "nat-add")]
    pub semigroup: String,
    /// NAME=mod:d:r1,… or NAME=elems:e1,… (repeatable).
    #[arg(long = "pred")]
    pub preds: Vec<String>,
    /// Shorthand for P0=mod:d:0 … P{d-1}=mod:d:{d-1} over nat-add.
    #[arg(long)]
    pub preds_mod: Option<u64>,
    /// JSON structure spec; overrides --semigroup/--pred.
    #[arg(long)]
    pub structure: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForgeArgs {
    #[command(flatten)]
    pub structure: StructureArgs,
    /// Predicate name whose set is X.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 8)]
    pub stages: usize,
    /// Bounded oracle instead of the exact quotient criterion.
    #[arg(long)]
    pub bounded: bool,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long = "N", default_value_t = 64)]
    pub n: u64,
    #[arg(long)]
    pub skip_identity: bool,
    /// Write the JSON-lines transcript here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replay and re-check a transcript instead of forging.
    #[arg(long, conflicts_with_all = ["x", "out"])]
    pub verify: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleSource {
    /// The type of an idempotent class of the quotient.
    Quotient,
    /// The decided part of a forge transcript.
    Forge,
    /// A forge transcript completed by its least idempotent class.
    ForgeCompleted,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub structure: StructureArgs,
    #[arg(long, value_enum, default_value_t = OracleSource::Quotient)]
    pub oracle: OracleSource,
    /// Idempotent class for the quotient oracle.
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// Predicate name of Y.
    #[arg(long)]
    pub y: String,
    /// Predicate name of X; used when Y is outside the type.
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 4)]
    pub k: usize,
    #[arg(long)]
    pub distinct: bool,
    #[arg(long)]
    pub skip_identity: bool,
    /// Forge a type containing X first and extract for Y or X∖Y.
    #[arg(long)]
    pub partition: bool,
    #[arg(long, default_value_t = 8)]
    pub stages: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 64)]
    pub n_max: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a command produced: the exit code, the stdout report and any diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn report(code: i32, report: &Value, out: Option<&Path>) -> Result<Outcome, Failure> {
        let text = format!("{}\n", serde_json::to_string(report).expect("reports are plain JSON"));
        if let Some(path) = out {
            fs::write(path, &text).map_err(|e| Failure::io(path, e))?;
        }
        Ok(Outcome { code, stdout: text, stderr: String::new() })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: exit::USAGE, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::usage(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Spec(_)
            | Error::InvalidTable(_)
            | Error::InvalidPredicate(_)
            | Error::InvalidHomomorphism(_)
            | Error::Decode(_)
            | Error::WrongArity { .. }
            | Error::UnregisteredPredicate(_)
            | Error::NotSubset(_) => exit::USAGE,
            Error::Undecided { .. } => exit::TRUNCATED,
            _ => exit::NEGATIVE,
        };
        Failure { code, message: e.to_string() }
    }
}

type CmdResult = Result<Outcome, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code, stdout: String::new(), stderr: text }
            } else {
                Outcome { code, stdout: text, stderr: String::new() }
            };
        }
    };
    let result = match &cli.command {
        Command::Ip(IpCommand::Find(a)) => ip_find(a),
        Command::Forge(a) => forge(a),
        Command::Extract(a) => extract(a),
        Command::Window(a) => window(a),
    };
    result.unwrap_or_else(|f| Outcome { code: f.code, stdout: String::new(), stderr: format!("error: {}\n", f.message) })
}

/// Caps rayon's global pool from `HINDMAN_FORGE_THREADS`.
pub fn configure_threads() {
    if let Some(n) = std::env::var("HINDMAN_FORGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // fails only if the pool is already initialised, which is harmless
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn semigroup_spec(s: &str) -> Result<SemigroupSpec, Failure> {
    match SemigroupSpec::parse_short(s) {
        Ok(spec) => Ok(spec),
        Err(short_err) => {
            let path = Path::new(s);
            if !path.is_file() {
                return Err(short_err.into());
            }
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{s}: {e}")))
        }
    }
}

/// `mod:…` predicates go through the core parser; `elems:…` become an identity
/// quotient on finite tables and an explicit bitset elsewhere.
fn predicate_spec(semigroup: &SemigroupSpec, s: &str) -> Result<PredicateSpec, Failure> {
    let Some(list) = s.strip_prefix("elems:") else {
        return Ok(PredicateSpec::parse_short(s)?);
    };
    let handle = semigroup.build()?;
    let elems = list
        .split(',')
        .filter(|e| !e.trim().is_empty())
        .map(|e| handle.parse_element(e.trim()))
        .collect::<hindman_core::Result<Vec<Element>>>()?;
    match &handle {
        SemigroupHandle::FiniteTable(t) => Ok(PredicateSpec::Quotient {
            hom: HomSpec {
                source: semigroup.clone(),
                target: semigroup.clone(),
                rule: HomRule::Table { map: (0..t.order()).collect() },
            },
            subset: elems.iter().map(|e| e.0 as usize).collect(),
        }),
        _ => {
            let window = elems.iter().map(|e| e.0 + 1).max().unwrap_or(0);
            let mut bits = vec![0u8; window.div_ceil(8) as usize];
            for e in &elems {
                bits[(e.0 / 8) as usize] |= 1 << (e.0 % 8);
            }
            Ok(PredicateSpec::ExplicitBitset { window, bits: base64::engine::general_purpose::STANDARD.encode(bits) })
        }
    }
}

fn structure_spec(a: &StructureArgs) -> Result<StructureSpec, Failure> {
    if let Some(path) = &a.structure {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        return serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())));
    }
    if let Some(d) = a.preds_mod {
        if d == 0 {
            return Err(Failure::usage("--preds-mod must be positive"));
        }
        let mut spec = StructureSpec::residue_family(d);
        spec.semigroup = semigroup_spec(&a.semigroup)?;
        return Ok(spec);
    }
    let semigroup = semigroup_spec(&a.semigroup)?;
    let predicates = a
        .preds
        .iter()
        .map(|p| {
            let (name, spec) =
                p.split_once('=').ok_or_else(|| Failure::usage(format!("predicate {p:?} must be NAME=SPEC")))?;
            Ok(NamedPredicateSpec { name: name.into(), pred: predicate_spec(&semigroup, spec)? })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    if predicates.is_empty() {
        return Err(Failure::usage("no predicates given (use --pred, --preds-mod or --structure)"));
    }
    Ok(StructureSpec { semigroup, predicates })
}

fn atom(ctx: &StructureContext, name: &str) -> Result<Formula, Failure> {
    let i = ctx.predicate_index(name).ok_or_else(|| Failure::usage(format!("unknown predicate {name:?}")))?;
    Ok(Formula::atom(i, Term::var(Var::X)))
}

fn positive(name: &str, v: usize) -> Result<(), Failure> {
    if v == 0 {
        return Err(Failure::usage(format!("--{name} must be positive")));
    }
    Ok(())
}

/// Checks `FP(basis) ⊆ X` by enumerating index subsets as bitmasks, independently
/// of the search that produced the basis.
fn recheck_basis(sem: &SemigroupHandle, basis: &[Element], member: impl Fn(Element) -> hindman_core::Result<bool>) -> hindman_core::Result<bool> {
    if basis.is_empty() || basis.len() > 24 {
        return Ok(false);
    }
    for mask in 1u32..(1 << basis.len()) {
        let chosen: Vec<Element> = (0..basis.len()).filter(|i| mask & (1 << i) != 0).map(|i| basis[i]).collect();
        if !member(sem.product_all(&chosen)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn ip_find(a: &IpFindArgs) -> CmdResult {
    positive("k", a.k)?;
    if a.n == 0 {
        return Err(Failure::usage("--N must be positive"));
    }
    let semigroup = semigroup_spec(&a.semigroup)?;
    let spec = StructureSpec {
        semigroup: semigroup.clone(),
        predicates: vec![NamedPredicateSpec { name: "X".into(), pred: predicate_spec(&semigroup, &a.pred)? }],
    };
    let ctx = spec.build()?;
    let sem = ctx.semigroup().clone();
    let x = ctx.predicates()[0].pred.clone();
    let opts = SearchOptions { skip_identity: a.skip_identity, parallel: true };

    let verdict = if a.quotient {
        if a.mode != IpMode::Ip {
            return Err(Failure::usage("--quotient decides plain IP only"));
        }
        is_ip_quotient(&x, QuotientOptions { depth: a.k, skip_identity: a.skip_identity })?
    } else {
        match a.mode {
            IpMode::Ip => ip_witness_bounded(&sem, &x, a.k, a.n, opts)?,
            IpMode::Iip => {
                let m = a.m.ok_or_else(|| Failure::usage("--mode iip needs --m"))?;
                iip_witness_bounded(&sem, &x, a.k, m, a.n, opts)?
            }
            IpMode::Dip => dip_witness_bounded(&sem, &x, a.k, a.n, opts)?,
        }
    };
    let verified = match verdict.witness() {
        Some(w) => {
            let mut ok = recheck_basis(&sem, &w.basis, |e| x.contains(e))?;
            if a.mode == IpMode::Dip {
                ok &= w.basis.windows(2).all(|p| p[0] != p[1]) && {
                    let mut b = w.basis.clone();
                    b.sort();
                    b.dedup();
                    b.len() == w.basis.len()
                };
            }
            if let (IpMode::Iip, Some(m)) = (a.mode, a.m) {
                ok &= w.fp.len() >= m;
            }
            Some(ok)
        }
        None => None,
    };
    let mut report = serde_json::to_value(&verdict).expect("verdicts serialise");
    let obj = report.as_object_mut().expect("verdicts are objects");
    obj.insert("schema".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!("ip-find"));
    obj.insert("semigroup".into(), json!(a.semigroup));
    obj.insert("pred".into(), json!(a.pred));
    obj.insert("mode".into(), json!(if a.quotient { "quotient" } else { mode_name(a.mode) }));
    obj.insert("verified".into(), json!(verified));
    if let Some(w) = verdict.witness() {
        let shown: Vec<String> = w.basis.iter().map(|&e| sem.display(e)).collect();
        obj.insert("basis_display".into(), json!(shown));
    }
    let code = match (&verdict, verified) {
        (OracleVerdict::Ip(_), Some(true)) => exit::OK,
        (OracleVerdict::Ip(_), _) => exit::NEGATIVE,
        (OracleVerdict::NotIpExact, _) => exit::NEGATIVE,
        (OracleVerdict::Exhausted(_), _) => exit::EXHAUSTED,
    };
    Outcome::report(code, &report, a.out.as_deref())
}

fn mode_name(m: IpMode) -> &'static str {
    match m {
        IpMode::Ip => "ip",
        IpMode::Iip => "iip",
        IpMode::Dip => "dip",
    }
}

fn forge(a: &ForgeArgs) -> CmdResult {
    if let Some(path) = &a.verify {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let (_, state, report) = verify_transcript(&text)?;
        let summary = json!({
            "schema": SCHEMA_VERSION,
            "command": "forge-verify",
            "ok": report.ok,
            "stages": report.stages,
            "final_stage": state.stage,
            "failures": report.failures,
        });
        return Outcome::report(if report.ok { exit::OK } else { exit::NEGATIVE }, &summary, None);
    }
    positive("stages", a.stages)?;
    let spec = structure_spec(&a.structure)?;
    let ctx = spec.build()?;
    let x_name = a.x.as_deref().ok_or_else(|| Failure::usage("--x is required unless --verify is given"))?;
    let x = atom(&ctx, x_name)?;
    let mode = if a.bounded {
        positive("k", a.k)?;
        OracleMode::Bounded { k: a.k, n: a.n }
    } else {
        OracleMode::ExactQuotient
    };
    let config = ForgeConfig { mode, skip_identity: a.skip_identity, ..Default::default() };
    let forge = Forge::new(ctx.clone(), x.clone(), config)?;
    let state = forge.run(a.stages)?;
    let header = TranscriptHeader::new(spec, &ctx, &x, config, a.stages);
    let transcript = write_transcript(&header, &ctx, &state.records)?;
    if let Some(path) = &a.out {
        fs::write(path, &transcript).map_err(|e| Failure::io(path, e))?;
    }
    let (_, lines) = read_transcript(&transcript)?;
    let all_pass = lines.iter().all(|r| r["invariants"]["pass"] == Value::Bool(true));
    let summary = json!({
        "schema": SCHEMA_VERSION,
        "command": "forge",
        "stages": a.stages,
        "x": ctx.render(&x),
        "mode": config.mode,
        "invariants_pass": all_pass,
        "a": state.a_formulas().map(|f| ctx.render(f)).collect::<Vec<_>>(),
        "J": state.j,
        "records": lines,
    });
    Outcome::report(if all_pass { exit::OK } else { exit::NEGATIVE }, &summary, None)
}

fn extract(a: &ExtractArgs) -> CmdResult {
    positive("k", a.k)?;
    let (spec, forge_state) = match (a.oracle, &a.transcript) {
        (OracleSource::Quotient, _) => (structure_spec(&a.structure)?, None),
        (_, Some(path)) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
            let (header, _) = read_transcript(&text)?;
            let (forge, state, report) = verify_transcript(&text)?;
            if !report.ok {
                return Err(Failure { code: exit::NEGATIVE, message: format!("transcript fails replay: {:?}", report.failures) });
            }
            (header.structure, Some((forge, state)))
        }
        (_, None) => return Err(Failure::usage("forge oracles need --transcript")),
    };
    let ctx = match &forge_state {
        Some((forge, _)) => forge.context().clone(),
        None => spec.build()?,
    };
    let y = atom(&ctx, &a.y)?;
    let x = a.x.as_deref().map(|n| atom(&ctx, n)).transpose()?;
    let opts = ExtractOptions { distinct: a.distinct };

    let mut report = json!({ "schema": SCHEMA_VERSION, "command": "extract" });
    let result = if a.partition {
        let x = x.ok_or_else(|| Failure::usage("--partition needs --x"))?;
        positive("stages", a.stages)?;
        let cfg = PartitionConfig { stages: a.stages, skip_identity: a.skip_identity, distinct: a.distinct };
        let out = partition_via_types(&ctx, &x, &y, a.k, cfg)?;
        report["side"] = json!(out.side);
        report["class"] = json!(out.class);
        report["oracle"] = json!({ "type": "forge-completed", "stages": out.stages, "class": out.class });
        out.result
    } else {
        let oracle: Box<dyn TypeOracle> = match (a.oracle, forge_state) {
            (OracleSource::Quotient, _) => {
                let class = a.class.ok_or_else(|| Failure::usage("--oracle quotient needs --class"))?;
                Box::new(quotient_idempotent_type(&ctx, class, a.skip_identity)?)
            }
            (OracleSource::Forge, Some((forge, state))) => Box::new(forge.oracle(&state)),
            (OracleSource::ForgeCompleted, Some((forge, state))) => Box::new(forge.completion(&state)?),
            _ => unreachable!("forge sources carry a replayed state"),
        };
        report["oracle"] = json!(oracle.provenance());
        extract_basis(&ctx, oracle.as_ref(), &y, x.as_ref(), a.k, opts)?
    };
    report["side_formula"] = json!(ctx.render(&result.side));
    let body = serde_json::to_value(&result).expect("results serialise");
    for (k, v) in body.as_object().expect("results are objects") {
        report[k] = v.clone();
    }
    let code = if result.truncated_at.is_some() {
        exit::TRUNCATED
    } else if result.verified {
        exit::OK
    } else {
        exit::NEGATIVE
    };
    Outcome::report(code, &report, a.out.as_deref())
}

fn window(a: &WindowArgs) -> CmdResult {
    positive("r", a.r)?;
    positive("k", a.k)?;
    if a.n_max == 0 {
        return Err(Failure::usage("--n-max must be positive"));
    }
    let outcome = hindman_window(a.r, a.k, a.n_max);
    let mut report = json!({ "schema": SCHEMA_VERSION, "command": "window", "r": a.r, "k": a.k, "n_max": a.n_max });
    let code = match &outcome {
        WindowOutcome::Found { n, certificate } => {
            let ok = certificate.len() as u64 == n - 1 && verify_window_certificate(certificate, a.r, a.k);
            report["outcome"] = json!("found");
            report["n"] = json!(n);
            report["certificate"] = json!(certificate);
            report["certificate_verified"] = json!(ok);
            if ok {
                exit::OK
            } else {
                exit::NEGATIVE
            }
        }
        WindowOutcome::Exhausted { .. } => {
            report["outcome"] = json!("exhausted");
            exit::EXHAUSTED
        }
    };
    Outcome::report(code, &report, a.out.as_deref())
}
