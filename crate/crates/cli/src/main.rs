//! `coarse-sigma`: σ windows, sequence comparison, direct limits and the
//! example verification harness.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input,
//! 3 truncation too thin, 4 oracle guard exceeded.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use coarse_sigma::dirseq::{
    cardinality_obstruction, check_equivalence, direct_limit, Cardinality, ConcreteSequence, DirectSequence, Morphism,
    MorphismSpec, ObstructionVerdict, Verdict,
};
use coarse_sigma::examples::{verify_paper, write_goldens, GoldenStatus, Goldens};
use coarse_sigma::functor::{
    verify_coarse_equivalence, ControlFunction, ControlledMap, ControlledMapSpec, FunctorError, PointMap,
};
use coarse_sigma::rips::{RipsError, TruncationParams};
use coarse_sigma::seqcore::{compare_with_sigma, oracle_classes_converged, OracleGuard, OracleModel, SeqError};
use coarse_sigma::sigma::{ind_sigma, ScaleWindow, SigmaError};
use coarse_sigma::space::{Rational, SpaceSpec};

const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_THIN: u8 = 3;
const EXIT_GUARD: u8 = 4;

#[derive(Parser)]
#[command(name = "coarse-sigma", version, about = "Scale-N ends, direct sequences and coarse maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute σ_N for every N in a window.
    Sigma(SigmaArgs),
    /// Compare two direct sequences or two spaces.
    Compare(CompareArgs),
    /// Direct limit of a direct sequence.
    Limit(LimitArgs),
    /// Run the bundled examples and compare them with their goldens.
    VerifyPaper(VerifyArgs),
}

#[derive(Args, Clone)]
struct TruncationArgs {
    /// Scale window `A:B`.
    #[arg(long, default_value = "1:6")]
    window: ScaleWindow,
    /// Outer radius R; defaults to 8 (B + 1).
    #[arg(long)]
    radius: Option<Rational>,
    /// Inner radius r; defaults to R/4.
    #[arg(long)]
    inner: Option<Rational>,
    /// Shell margin W; defaults to N + 1.
    #[arg(long)]
    margin: Option<Rational>,
}

impl TruncationArgs {
    fn truncation(&self) -> Result<TruncationParams> {
        let outer = self.radius.unwrap_or_else(|| Rational::integer(8 * (i64::from(self.window.max) + 1)));
        let mut t = TruncationParams::new(outer);
        if let Some(r) = self.inner {
            t = t.with_inner(r);
        }
        if let Some(w) = self.margin {
            t = t.with_margin(w);
        }
        t.validate()?;
        Ok(t)
    }
}

#[derive(Args)]
struct Output {
    /// Write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the summary.
    #[arg(long)]
    json: bool,
}

impl Output {
    fn emit(&self, report: &impl serde::Serialize, summary: &[String]) -> Result<()> {
        let text = serde_json::to_string_pretty(report)? + "\n";
        if let Some(path) = &self.out {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        }
        let mut stdout = io::stdout().lock();
        let written = if self.json {
            stdout.write_all(text.as_bytes())
        } else {
            summary.iter().try_for_each(|line| writeln!(stdout, "{line}"))
        };
        match written {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
            _ => Ok(()),
        }
    }
}

#[derive(Args)]
struct SigmaArgs {
    /// Space specification (JSON).
    #[arg(long)]
    space: PathBuf,
    #[command(flatten)]
    trunc: TruncationArgs,
    /// Cross-check every level against the exhaustive sequence oracle.
    #[arg(long)]
    oracle: bool,
    /// Write one Graphviz file per level into this directory.
    #[arg(long)]
    dot: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct CompareArgs {
    /// First input: a direct sequence or a space specification.
    a: PathBuf,
    /// Second input, of the same kind.
    b: PathBuf,
    /// Morphism A -> B (sequences) or controlled map A -> B (spaces).
    #[arg(long)]
    forward: Option<PathBuf>,
    /// Morphism B -> A (sequences) or controlled map B -> A (spaces).
    #[arg(long)]
    backward: Option<PathBuf>,
    #[command(flatten)]
    trunc: TruncationArgs,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct LimitArgs {
    /// A direct sequence, or a report written by `sigma --out`.
    input: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Args)]
struct VerifyArgs {
    /// Only run the example with this name, or else those whose name contains it.
    #[arg(long)]
    filter: Option<String>,
    /// Compare with the goldens in this directory instead of the built-in ones.
    #[arg(long, conflicts_with = "no_goldens")]
    goldens: Option<PathBuf>,
    /// Skip the golden comparison.
    #[arg(long)]
    no_goldens: bool,
    /// Regenerate all goldens into this directory and exit.
    #[arg(long)]
    write_goldens: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sigma(args) => cmd_sigma(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Limit(args) => cmd_limit(args),
        Command::VerifyPaper(args) => cmd_verify_paper(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_of(&e))
        }
    }
}

fn exit_code_of(e: &anyhow::Error) -> u8 {
    let thin_sigma = |s: &SigmaError| matches!(s, SigmaError::Rips(RipsError::ThinTruncation { .. }));
    for cause in e.chain() {
        if let Some(RipsError::ThinTruncation { .. }) = cause.downcast_ref::<RipsError>() {
            return EXIT_THIN;
        }
        if cause.downcast_ref::<SigmaError>().is_some_and(thin_sigma) {
            return EXIT_THIN;
        }
        match cause.downcast_ref::<FunctorError>() {
            Some(FunctorError::Sigma(s)) if thin_sigma(s) => return EXIT_THIN,
            Some(FunctorError::RebaseTooFar { .. }) => return EXIT_THIN,
            _ => {}
        }
        if let Some(SeqError::TooManyVertices { .. } | SeqError::TooManyWalks { .. } | SeqError::NoConvergence(_)) =
            cause.downcast_ref::<SeqError>()
        {
            return EXIT_GUARD;
        }
    }
    EXIT_INPUT
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_as<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_value(read_json(path)?).with_context(|| format!("interpreting {}", path.display()))
}

fn cmd_sigma(args: SigmaArgs) -> Result<u8> {
    let spec: SpaceSpec = read_as(&args.space)?;
    let space = spec.build()?;
    let trunc = args.trunc.truncation()?;
    let window = ind_sigma(&space, args.trunc.window, trunc)?;
    let report = window.report();
    let mut summary = vec![format!("{}  R={}  r={}  window {}", space.name(), trunc.outer, trunc.inner_radius(), args.trunc.window)];
    for level in &report.levels {
        summary.push(format!("N={:<3} |σ_N| = {}", level.scale, level.count));
    }
    summary.push(format!("stability: {}", report.stability.verdict));

    if let Some(dir) = &args.dot {
        fs::create_dir_all(dir)?;
        for level in window.levels() {
            let path = dir.join(format!("sigma_{}.dot", level.scale()));
            fs::write(&path, level.graph().to_dot()).with_context(|| format!("writing {}", path.display()))?;
        }
    }

    let mut code = 0;
    let mut out = json!({
        "report": report,
        "sequence": DirectSequence::Concrete(window.to_direct_sequence()),
    });
    if args.oracle {
        let model = OracleModel::from_truncation(&space, trunc, OracleGuard::default())?;
        let mut agreements = Vec::new();
        for level in window.levels() {
            let partition = oracle_classes_converged(&model, level.scale())?;
            let agreement = compare_with_sigma(&partition, level);
            summary.push(format!(
                "oracle N={}: {} classes from {} walks (length cap {}), σ has {}: {}",
                agreement.scale,
                agreement.oracle_classes,
                agreement.walks,
                agreement.length_cap,
                agreement.sigma_classes,
                if agreement.agrees() { "agree" } else { "DISAGREE" }
            ));
            if !agreement.agrees() {
                code = EXIT_FAIL;
            }
            agreements.push(agreement);
        }
        out["oracle"] = serde_json::to_value(agreements)?;
    }
    args.output.emit(&out, &summary)?;
    Ok(code)
}

enum Input {
    Sequence(DirectSequence),
    Space(SpaceSpec),
}

fn read_input(path: &Path) -> Result<Input> {
    let value = read_json(path)?;
    let context = || format!("interpreting {}", path.display());
    if value.get("type").is_some() {
        let seq: DirectSequence = serde_json::from_value(value).with_context(context)?;
        seq.validate()?;
        Ok(Input::Sequence(seq))
    } else if value.get("kind").is_some() {
        Ok(Input::Space(serde_json::from_value(value).with_context(context)?))
    } else {
        bail!("{}: expected a direct sequence (`type`) or a space specification (`kind`)", path.display())
    }
}

fn obstruction_json(a: &DirectSequence, b: &DirectSequence) -> (Value, Option<String>) {
    let ab = cardinality_obstruction(a, b);
    let ba = cardinality_obstruction(b, a);
    let reason = [&ab, &ba].into_iter().find_map(|v| match v {
        ObstructionVerdict::NotEquivalent { reason, .. } => Some(reason.clone()),
        ObstructionVerdict::Inconclusive => None,
    });
    (json!({ "a_to_b": ab, "b_to_a": ba }), reason)
}

fn verdict_code(verdict: &str) -> String {
    format!("verdict: {verdict}")
}

fn cmd_compare(args: CompareArgs) -> Result<u8> {
    match (read_input(&args.a)?, read_input(&args.b)?) {
        (Input::Sequence(a), Input::Sequence(b)) => compare_sequences(&args, a, b),
        (Input::Space(a), Input::Space(b)) => compare_spaces(&args, a, b),
        _ => bail!("both inputs must be sequences or both must be spaces"),
    }
}

fn concrete(seq: &DirectSequence, window: ScaleWindow) -> Result<ConcreteSequence> {
    Ok(match seq {
        DirectSequence::Concrete(c) => c.clone(),
        DirectSequence::Symbolic(s) => s.window(window.min.max(s.start), window.max)?,
    })
}

fn compare_sequences(args: &CompareArgs, a: DirectSequence, b: DirectSequence) -> Result<u8> {
    let (obstruction, reason) = obstruction_json(&a, &b);
    let mut out = json!({ "inputs": "sequences", "obstruction": obstruction });
    let mut summary = Vec::new();
    let verdict;
    let mut code = 0;
    if let Some(reason) = reason {
        verdict = "not_equivalent";
        summary.push(format!("cardinality obstruction: {reason}"));
    } else {
        let morphisms = match (&args.forward, &args.backward) {
            (Some(f), Some(g)) => Some((read_as::<MorphismSpec>(f)?, read_as::<MorphismSpec>(g)?)),
            (None, None) => None,
            _ => bail!("--forward and --backward must be given together"),
        };
        if morphisms.is_none() && a != b {
            verdict = "inconclusive";
            summary.push("no obstruction found and no morphisms supplied".into());
        } else {
            let ca = concrete(&a, args.trunc.window)?;
            let cb = concrete(&b, args.trunc.window)?;
            let (f, g) = match morphisms {
                Some((f, g)) => (Morphism::from_spec(&f, &cb)?, Morphism::from_spec(&g, &ca)?),
                None => (Morphism::identity(&ca), Morphism::identity(&cb)),
            };
            let report = check_equivalence(&f, &g, &ca, &cb);
            verdict = match report.verdict {
                Verdict::Pass => "equivalent-verified",
                Verdict::Fail => {
                    code = EXIT_FAIL;
                    "inconclusive"
                }
                Verdict::Inconclusive => "inconclusive",
            };
            summary.push(format!(
                "composite laws: {:?} ({} violations, {} inconclusive levels)",
                report.verdict,
                report.violations.len(),
                report.inconclusive.len()
            ));
            out["equivalence"] = serde_json::to_value(report)?;
        }
    }
    out["verdict"] = json!(verdict);
    summary.push(verdict_code(verdict));
    args.output.emit(&out, &summary)?;
    Ok(code)
}

fn compare_spaces(args: &CompareArgs, a: SpaceSpec, b: SpaceSpec) -> Result<u8> {
    let (x, y) = (a.build()?, b.build()?);
    let trunc = args.trunc.truncation()?;
    let window = args.trunc.window;
    let mut summary = vec![format!("{} vs {}  window {}  R={}", x.name(), y.name(), window, trunc.outer)];
    let mut code = 0;
    let mut out = json!({ "inputs": "spaces", "scope": "window-relative" });
    let maps = match (&args.forward, &args.backward) {
        (Some(fp), Some(gp)) => Some((
            ControlledMap::from_spec(read_as::<ControlledMapSpec>(fp)?, x.clone(), y.clone())?,
            ControlledMap::from_spec(read_as::<ControlledMapSpec>(gp)?, y.clone(), x.clone())?,
        )),
        (None, None) if a == b => {
            let id = || {
                ControlledMap::new(x.clone(), y.clone(), PointMap::Identity, ControlFunction::identity())
                    .with_closeness(Rational::ZERO)
            };
            Some((id(), id()))
        }
        (None, None) => None,
        _ => bail!("--forward and --backward must be given together"),
    };
    let verdict = match maps {
        Some((f, g)) => {
            let report = verify_coarse_equivalence(&f, &g, window, trunc, trunc)?;
            summary.push(format!(
                "control: forward {} violations, backward {}; closeness drift {} / {} (K = {})",
                report.forward_control.violation_count,
                report.backward_control.violation_count,
                report.closeness.max_source_drift,
                report.closeness.max_target_drift,
                report.closeness.k
            ));
            summary.push(format!(
                "composite laws: {:?}; interleaving witnesses: {}/{} hold",
                report.equivalence.verdict,
                report.witnesses.iter().filter(|w| w.holds()).count(),
                report.witnesses.len()
            ));
            let verdict = match report.verdict {
                Verdict::Pass => "equivalent-verified",
                Verdict::Fail => {
                    code = EXIT_FAIL;
                    "inconclusive"
                }
                Verdict::Inconclusive => "inconclusive",
            };
            out["equivalence"] = serde_json::to_value(report)?;
            verdict
        }
        None => {
            let xs = ind_sigma(&x, window, trunc)?;
            let ys = ind_sigma(&y, window, trunc)?;
            summary.push(format!("sizes A: {:?}", xs.sizes()));
            summary.push(format!("sizes B: {:?}", ys.sizes()));
            let a = DirectSequence::Concrete(xs.to_direct_sequence());
            let b = DirectSequence::Concrete(ys.to_direct_sequence());
            let (obstruction, reason) = obstruction_json(&a, &b);
            out["sizes"] = json!({ "a": xs.sizes(), "b": ys.sizes() });
            out["obstruction"] = obstruction;
            match reason {
                Some(reason) => {
                    summary.push(format!("cardinality obstruction (window read as eventually constant): {reason}"));
                    "not_equivalent"
                }
                None => "inconclusive",
            }
        }
    };
    out["verdict"] = json!(verdict);
    summary.push(verdict_code(verdict));
    args.output.emit(&out, &summary)?;
    Ok(code)
}

fn cmd_limit(args: LimitArgs) -> Result<u8> {
    let mut value = read_json(&args.input)?;
    if let Some(seq) = value.get_mut("sequence") {
        value = seq.take();
    }
    let seq: DirectSequence =
        serde_json::from_value(value).with_context(|| format!("interpreting {}", args.input.display()))?;
    seq.validate()?;
    let limit = direct_limit(&seq)?;
    let cardinality = match limit.cardinality {
        Cardinality::Finite(n) => n.to_string(),
        Cardinality::Omega => "countably infinite".to_string(),
    };
    let mut summary = vec![format!("cardinality: {cardinality}")];
    for class in limit.classes.iter().take(50) {
        summary.push(format!("  [{}] at level {}: {}", class.element, class.level, class.name));
    }
    if limit.classes.len() > 50 {
        summary.push(format!("  ... {} more", limit.classes.len() - 50));
    }
    args.output.emit(&limit, &summary)?;
    Ok(0)
}

fn cmd_verify_paper(args: VerifyArgs) -> Result<u8> {
    if let Some(dir) = &args.write_goldens {
        let written = write_goldens(dir).map_err(|e| anyhow!("{e}"))?;
        for path in written {
            println!("wrote {}", path.display());
        }
        return Ok(0);
    }
    let goldens = match (&args.goldens, args.no_goldens) {
        (_, true) => Goldens::Skip,
        (Some(dir), false) => Goldens::Directory(dir.clone()),
        (None, false) => Goldens::Embedded,
    };
    let report = verify_paper(args.filter.as_deref(), &goldens);
    if report.examples.is_empty() {
        bail!("no example matches the filter");
    }
    let mut summary = Vec::new();
    for e in &report.examples {
        let mut line = format!("{} {}", if e.passed { "PASS" } else { "FAIL" }, e.name);
        if let Some(err) = &e.error {
            line += &format!(": {err}");
        }
        if let Some(q) = e.report.as_ref().and_then(|r| r.first_divergence.as_ref()) {
            line += &format!(": first diverging quantity `{q}`");
        }
        match (&e.golden.status, &e.golden.first_difference) {
            (GoldenStatus::Mismatch, Some(path)) => line += &format!(": golden differs at {path}"),
            (GoldenStatus::Missing, _) => line += ": golden missing",
            _ => {}
        }
        summary.push(line);
    }
    args.output.emit(&report, &summary)?;
    Ok(if report.passed { 0 } else { EXIT_FAIL })
}
