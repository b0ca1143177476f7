use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dirseq::{
    cardinality_obstruction, direct_limit, BondingDescriptor, DirSeqError, DirectSequence, SizeFormula,
    SymbolicSequence, Verdict,
};
use crate::functor::{rebase, verify_coarse_equivalence, ControlFunction, ControlledMap, FunctorError, PointMap};
use crate::rips::TruncationParams;
use crate::sigma::{ind_sigma, sigma_stability, ScaleWindow, SigmaError, SigmaWindow};
use crate::space::{PointLabel, Rational, SpaceError, SpacePresentation};

pub const GOLDEN_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExampleError {
    #[error("unknown example `{0}`")]
    Unknown(String),
    #[error("parameter `{0}` does not apply to this example")]
    Inapplicable(&'static str),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
    #[error(transparent)]
    DirSeq(#[from] DirSeqError),
    #[error(transparent)]
    Functor(#[from] FunctorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleName {
    DiscreteOpenBook,
    OpenBook,
    SymbolicComparison,
    RealVsInt,
    RebaseDemo,
}

impl ExampleName {
    pub const ALL: [ExampleName; 5] = [
        ExampleName::DiscreteOpenBook,
        ExampleName::OpenBook,
        ExampleName::SymbolicComparison,
        ExampleName::RealVsInt,
        ExampleName::RebaseDemo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExampleName::DiscreteOpenBook => "discrete_open_book",
            ExampleName::OpenBook => "open_book",
            ExampleName::SymbolicComparison => "symbolic_comparison",
            ExampleName::RealVsInt => "real_vs_int",
            ExampleName::RebaseDemo => "rebase_demo",
        }
    }
}

impl fmt::Display for ExampleName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleName {
    type Err = ExampleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExampleName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| ExampleError::Unknown(s.to_string()))
    }
}

/// Overrides for an example's defaults. Unset fields keep the default.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<ScaleWindow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net_spacing: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<PointLabel>,
}

/// A named example with its default parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct WorkedExample {
    pub name: ExampleName,
    pub description: &'static str,
    pub defaults: ExampleParams,
}

fn window(min: u32, max: u32) -> ScaleWindow {
    ScaleWindow::new(min, max).expect("valid default window")
}

pub fn worked_examples() -> Vec<WorkedExample> {
    let half = Rational::new(1, 2);
    ExampleName::ALL
        .into_iter()
        .map(|name| {
            let (description, defaults) = match name {
                ExampleName::DiscreteOpenBook => (
                    "discrete open book: σ_N has one class per ray of spacing at most N, bondings are inclusions, never stable",
                    ExampleParams { rays: Some(25), radius: Some(Rational::integer(200)), window: Some(window(1, 10)), ..Default::default() },
                ),
                ExampleName::OpenBook => (
                    "open book net: one class per ray at every scale, bijective bondings, stable from the first level",
                    ExampleParams {
                        rays: Some(10),
                        radius: Some(Rational::integer(100)),
                        window: Some(window(1, 8)),
                        net_spacing: Some(half),
                        ..Default::default()
                    },
                ),
                ExampleName::SymbolicComparison => (
                    "infinite books: the sequences are separated by the cardinality obstruction while both limits are countably infinite",
                    ExampleParams::default(),
                ),
                ExampleName::RealVsInt => (
                    "line net and integers: floor and inclusion induce mutually inverse morphisms",
                    ExampleParams {
                        radius: Some(Rational::integer(40)),
                        window: Some(window(1, 6)),
                        net_spacing: Some(half),
                        ..Default::default()
                    },
                ),
                ExampleName::RebaseDemo => (
                    "discrete open book with the basepoint moved onto ray 3: prepending the other basepoint gives an equivalence",
                    ExampleParams {
                        rays: Some(25),
                        radius: Some(Rational::integer(200)),
                        window: Some(window(1, 10)),
                        basepoint: Some(PointLabel::summand(3, PointLabel::Coord(Rational::integer(9)))),
                        ..Default::default()
                    },
                ),
            };
            WorkedExample { name, description, defaults }
        })
        .collect()
}

/// One compared quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub quantity: String,
    pub expected: Value,
    pub actual: Value,
    pub passed: bool,
}

impl Check {
    fn new(quantity: &str, expected: impl Serialize, actual: impl Serialize) -> Self {
        let expected = serde_json::to_value(expected).expect("serializable");
        let actual = serde_json::to_value(actual).expect("serializable");
        let passed = expected == actual;
        Check { quantity: quantity.to_string(), expected, actual, passed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleReport {
    pub name: ExampleName,
    pub params: ExampleParams,
    pub checks: Vec<Check>,
    pub results: Value,
    pub passed: bool,
    /// Name of the first failing check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_divergence: Option<String>,
}

impl ExampleReport {
    fn new(name: ExampleName, params: ExampleParams, checks: Vec<Check>, results: Value) -> Self {
        let first_divergence = checks.iter().find(|c| !c.passed).map(|c| c.quantity.clone());
        ExampleReport { name, params, passed: first_divergence.is_none(), checks, results, first_divergence }
    }
}

/// Runs the full pipeline of one example and compares it with the values
/// expected for its parameters.
pub fn run_example(name: ExampleName, overrides: &ExampleParams) -> Result<ExampleReport, ExampleError> {
    let example = worked_examples().into_iter().find(|e| e.name == name).expect("every name has an entry");
    let d = example.defaults;
    let params = ExampleParams {
        rays: merge(overrides.rays, d.rays, "rays")?,
        radius: merge(overrides.radius, d.radius, "radius")?,
        window: merge(overrides.window, d.window, "window")?,
        net_spacing: merge(overrides.net_spacing, d.net_spacing, "net_spacing")?,
        basepoint: merge(overrides.basepoint.clone(), d.basepoint, "basepoint")?,
    };
    match name {
        ExampleName::DiscreteOpenBook => run_book(name, params, false),
        ExampleName::OpenBook => run_book(name, params, true),
        ExampleName::SymbolicComparison => run_symbolic(params),
        ExampleName::RealVsInt => run_real_vs_int(params),
        ExampleName::RebaseDemo => run_rebase(params),
    }
}

fn merge<T>(given: Option<T>, default: Option<T>, field: &'static str) -> Result<Option<T>, ExampleError> {
    match (given, default) {
        (Some(_), None) => Err(ExampleError::Inapplicable(field)),
        (given, default) => Ok(given.or(default)),
    }
}

/// Ray index of each class endpoint, level by level.
fn ray_sets(w: &SigmaWindow) -> Vec<Vec<usize>> {
    w.levels()
        .iter()
        .map(|level| {
            level
                .classes()
                .iter()
                .map(|c| match w.space().label(*c.representative.last().expect("nonempty")) {
                    Ok(PointLabel::Summand(k, _)) => k,
                    _ => 0,
                })
                .collect()
        })
        .collect()
}

fn sorted(sets: &[Vec<usize>]) -> Vec<Vec<usize>> {
    sets.iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s
        })
        .collect()
}

fn run_book(name: ExampleName, params: ExampleParams, continuous: bool) -> Result<ExampleReport, ExampleError> {
    let k = params.rays.expect("default");
    let win = params.window.expect("default");
    let space = if continuous {
        SpacePresentation::open_book(k, params.net_spacing.expect("default"))?
    } else {
        SpacePresentation::discrete_open_book(Some(k))?
    };
    let w = ind_sigma(&space, win, TruncationParams::new(params.radius.expect("default")))?;
    let rays = ray_sets(&w);
    let stability = sigma_stability(&w);

    // ray i has spacing i in the discrete book and is visible once N >= i
    let visible = |n: u32| if continuous { k } else { k.min(n as usize) };
    let expected_rays: Vec<Vec<usize>> = win.scales().map(|n| (1..=visible(n)).collect()).collect();
    let expected_stable = if continuous || k as u32 <= win.min {
        Some(win.min)
    } else if (k as u32) < win.max {
        Some(k as u32)
    } else {
        None
    };
    let mut ray_preserving = true;
    for (i, b) in w.bondings().iter().enumerate() {
        ray_preserving &= (0..b.domain()).all(|c| rays[i + 1][b.apply(c)] == rays[i][c]);
    }
    let bondings: Vec<&[usize]> = w.bondings().iter().map(|b| b.table()).collect();
    let checks = vec![
        Check::new("sizes", win.scales().map(visible).collect::<Vec<_>>(), w.sizes()),
        Check::new("rays", &expected_rays, sorted(&rays)),
        Check::new("bondings_preserve_rays", true, ray_preserving),
        Check::new("bondings_injective", true, w.bondings().iter().all(|b| b.is_injective())),
        Check::new(
            "bondings_bijective",
            continuous || k as u32 <= win.min,
            w.bondings().iter().all(|b| b.is_bijective()),
        ),
        Check::new("stable_from", expected_stable, stability.stable_from),
    ];
    let results = json!({
        "space": space.name(),
        "sizes": w.sizes(),
        "rays": rays,
        "bondings": bondings,
        "stability": stability,
    });
    Ok(ExampleReport::new(name, params, checks, results))
}

fn run_symbolic(params: ExampleParams) -> Result<ExampleReport, ExampleError> {
    let b = DirectSequence::Symbolic(SymbolicSequence::new(1, SizeFormula::Omega, BondingDescriptor::Identity)?);
    let d = DirectSequence::Symbolic(SymbolicSequence::new(
        1,
        SizeFormula::Linear { slope: 1, offset: 0 },
        BondingDescriptor::InclusionOfPrefix,
    )?);
    let b_to_d = cardinality_obstruction(&b, &d);
    let d_to_b = cardinality_obstruction(&d, &b);
    let limit_b = direct_limit(&b)?.cardinality;
    let limit_d = direct_limit(&d)?.cardinality;
    let checks = vec![
        Check::new("obstruction_b_to_d_fires", true, b_to_d.fires()),
        Check::new("obstruction_d_to_b_fires", false, d_to_b.fires()),
        Check::new("limit_b", "omega", limit_b),
        Check::new("limit_d", "omega", limit_d),
    ];
    let results = json!({
        "b": b,
        "d": d,
        "obstruction_b_to_d": b_to_d,
        "obstruction_d_to_b": d_to_b,
        "limit_b": limit_b,
        "limit_d": limit_d,
    });
    Ok(ExampleReport::new(ExampleName::SymbolicComparison, params, checks, results))
}

fn run_real_vs_int(params: ExampleParams) -> Result<ExampleReport, ExampleError> {
    let reals = SpacePresentation::delta_net(1, params.net_spacing.expect("default"))?;
    let ints = SpacePresentation::lattice(1)?;
    let k = Rational::ONE;
    let f = ControlledMap::new(reals.clone(), ints.clone(), PointMap::Floor, ControlFunction::shift(1)).with_closeness(k);
    let g = ControlledMap::new(ints, reals, PointMap::Inclusion, ControlFunction::identity()).with_closeness(k);
    let trunc = TruncationParams::new(params.radius.expect("default"));
    let focus = params.window.expect("default");
    let report = verify_coarse_equivalence(&f, &g, focus, trunc, trunc)?;
    let ends = ind_sigma(f.target(), focus, trunc)?.sizes();
    let checks = vec![
        Check::new("verdict", Verdict::Pass, report.verdict),
        Check::new("law_violations", 0, report.equivalence.violations.len()),
        Check::new("control_violations", 0, report.forward_control.violation_count + report.backward_control.violation_count),
        Check::new("closeness_holds", true, report.closeness.holds),
        Check::new("witnesses_hold", true, report.witnesses.iter().all(|w| w.holds())),
        Check::new("integer_ends", vec![2; focus.scales().count()], &ends),
    ];
    let results = json!({
        "verdict": report.verdict,
        "source_window": report.source_window,
        "target_window": report.target_window,
        "forward": report.forward,
        "backward": report.backward,
        "checked_source_levels": report.equivalence.checked_source_levels,
        "checked_target_levels": report.equivalence.checked_target_levels,
        "max_source_drift": report.closeness.max_source_drift,
        "max_target_drift": report.closeness.max_target_drift,
        "witnesses": report.witnesses.len(),
    });
    Ok(ExampleReport::new(ExampleName::RealVsInt, params, checks, results))
}

fn run_rebase(params: ExampleParams) -> Result<ExampleReport, ExampleError> {
    let k = params.rays.expect("default");
    let space = SpacePresentation::discrete_open_book(Some(k))?;
    let label = params.basepoint.clone().expect("default");
    let y0 = space.point(&label)?;
    let win = params.window.expect("default");
    let rb = rebase(&space, y0, win, TruncationParams::new(params.radius.expect("default")))?;
    let expected_shift = match &label {
        PointLabel::Summand(_, inner) => match inner.as_ref() {
            PointLabel::Coord(t) => Some(t.ceil() as u32),
            _ => None,
        },
        PointLabel::Base => Some(0),
        _ => None,
    };
    let (orig, moved) = (rb.original.sizes(), rb.moved.sizes());
    let start = rb.shift.max(win.min);
    let tail = |sizes: &[usize]| sizes[(start - win.min) as usize..].to_vec();
    let bijective_above_shift = (start..=rb.forward.end())
        .all(|n| rb.forward.map(n).is_some_and(|m| m.is_bijective()) && rb.backward.map(n).is_some_and(|m| m.is_bijective()));
    let checks = vec![
        Check::new("shift", expected_shift, Some(rb.shift)),
        Check::new("verdict", Verdict::Pass, rb.report.verdict),
        Check::new("sizes_from_shift", tail(&orig), tail(&moved)),
        Check::new("bijective_from_shift", true, bijective_above_shift),
        Check::new(
            "index_map",
            rb.original.window().scales().map(|n| n.max(rb.shift)).collect::<Vec<_>>(),
            rb.forward.index_map(),
        ),
    ];
    let results = json!({
        "space": space.name(),
        "moved_space": rb.moved.space().name(),
        "shift": rb.shift,
        "original_sizes": orig,
        "moved_sizes": moved,
        "forward": rb.forward.to_spec(),
        "backward": rb.backward.to_spec(),
        "verdict": rb.report.verdict,
    });
    Ok(ExampleReport::new(ExampleName::RebaseDemo, params, checks, results))
}

/// Where reference reports come from.
#[derive(Clone, Debug)]
pub enum Goldens {
    /// The reports compiled into the library.
    Embedded,
    /// `<dir>/<name>.json`.
    Directory(std::path::PathBuf),
    Skip,
}

macro_rules! golden {
    ($name:literal) => {
        include_str!(concat!("../../goldens/v1/", $name, ".json"))
    };
}

fn embedded_golden(name: ExampleName) -> &'static str {
    match name {
        ExampleName::DiscreteOpenBook => golden!("discrete_open_book"),
        ExampleName::OpenBook => golden!("open_book"),
        ExampleName::SymbolicComparison => golden!("symbolic_comparison"),
        ExampleName::RealVsInt => golden!("real_vs_int"),
        ExampleName::RebaseDemo => golden!("rebase_demo"),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldenStatus {
    Match,
    Mismatch,
    Missing,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GoldenComparison {
    pub status: GoldenStatus,
    /// JSON path of the first differing value.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_difference: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExampleOutcome {
    pub name: ExampleName,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<ExampleReport>,
    pub golden: GoldenComparison,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorkedReport {
    pub golden_version: &'static str,
    pub passed: bool,
    pub examples: Vec<ExampleOutcome>,
}

impl WorkedReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }
}

/// Canonical on-disk form of a report.
pub fn golden_text(report: &ExampleReport) -> String {
    serde_json::to_string_pretty(report).expect("serializable") + "\n"
}

/// Runs the example named `filter`, or every example whose name contains it,
/// on its defaults and compares each report with its golden.
pub fn verify_paper(filter: Option<&str>, goldens: &Goldens) -> WorkedReport {
    let selected: Vec<ExampleName> = match filter.map(str::parse::<ExampleName>) {
        Some(Ok(exact)) => vec![exact],
        _ => ExampleName::ALL
            .into_iter()
            .filter(|n| filter.is_none_or(|f| n.as_str().contains(f)))
            .collect(),
    };
    let examples: Vec<ExampleOutcome> = selected
        .par_iter()
        .map(|&name| match run_example(name, &ExampleParams::default()) {
            Ok(report) => {
                let golden = compare_golden(&report, goldens);
                let passed = report.passed && matches!(golden.status, GoldenStatus::Match | GoldenStatus::Skipped);
                ExampleOutcome { name, passed, error: None, report: Some(report), golden }
            }
            Err(e) => ExampleOutcome {
                name,
                passed: false,
                error: Some(e.to_string()),
                report: None,
                golden: GoldenComparison { status: GoldenStatus::Skipped, first_difference: None },
            },
        })
        .collect();
    WorkedReport { golden_version: GOLDEN_VERSION, passed: examples.iter().all(|e| e.passed), examples }
}

fn compare_golden(report: &ExampleReport, goldens: &Goldens) -> GoldenComparison {
    let text = match goldens {
        Goldens::Skip => return GoldenComparison { status: GoldenStatus::Skipped, first_difference: None },
        Goldens::Embedded => Some(embedded_golden(report.name).to_string()),
        Goldens::Directory(dir) => std::fs::read_to_string(dir.join(format!("{}.json", report.name))).ok(),
    };
    let Some(expected) = text.and_then(|t| serde_json::from_str::<Value>(&t).ok()) else {
        return GoldenComparison { status: GoldenStatus::Missing, first_difference: None };
    };
    let actual = serde_json::to_value(report).expect("serializable");
    match first_difference(&expected, &actual, "$") {
        None => GoldenComparison { status: GoldenStatus::Match, first_difference: None },
        Some(path) => GoldenComparison { status: GoldenStatus::Mismatch, first_difference: Some(path) },
    }
}

/// Writes the golden of every example into `dir`.
pub fn write_goldens(dir: &Path) -> Result<Vec<std::path::PathBuf>, Box<dyn std::error::Error + Send + Sync>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for name in ExampleName::ALL {
        let report = run_example(name, &ExampleParams::default())?;
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, golden_text(&report))?;
        written.push(path);
    }
    Ok(written)
}

/// Path of the first place where `a` and `b` differ, in document order.
pub fn first_difference(a: &Value, b: &Value, path: &str) -> Option<String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let keys: BTreeMap<&String, ()> = x.keys().chain(y.keys()).map(|k| (k, ())).collect();
            keys.into_keys().find_map(|k| match (x.get(k), y.get(k)) {
                (Some(u), Some(v)) => first_difference(u, v, &format!("{path}.{k}")),
                _ => Some(format!("{path}.{k}")),
            })
        }
        (Value::Array(x), Value::Array(y)) => x
            .iter()
            .zip(y)
            .enumerate()
            .find_map(|(i, (u, v))| first_difference(u, v, &format!("{path}[{i}]")))
            .or_else(|| (x.len() != y.len()).then(|| format!("{path}[{}]", x.len().min(y.len())))),
        _ => (a != b).then(|| path.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in ExampleName::ALL {
            assert_eq!(name.as_str().parse::<ExampleName>().unwrap(), name);
        }
        assert!("book".parse::<ExampleName>().is_err());
    }

    #[test]
    fn small_discrete_book_follows_the_formula() {
        let params = ExampleParams { rays: Some(4), radius: Some(Rational::integer(60)), window: Some(window(1, 6)), ..Default::default() };
        let report = run_example(ExampleName::DiscreteOpenBook, &params).unwrap();
        assert!(report.passed, "{:?}", report.checks);
        assert_eq!(report.results["sizes"], json!([1, 2, 3, 4, 4, 4]));
        assert_eq!(report.results["stability"]["stable_from"], json!(4));
    }

    #[test]
    fn inapplicable_parameter_is_rejected() {
        let params = ExampleParams { net_spacing: Some(Rational::ONE), ..Default::default() };
        assert_eq!(
            run_example(ExampleName::DiscreteOpenBook, &params),
            Err(ExampleError::Inapplicable("net_spacing"))
        );
    }

    #[test]
    fn symbolic_comparison_passes() {
        let report = run_example(ExampleName::SymbolicComparison, &ExampleParams::default()).unwrap();
        assert!(report.passed, "{:?}", report.checks);
    }

    #[test]
    fn first_difference_finds_the_path() {
        let a = json!({"x": [1, 2, {"y": 3}], "z": 0});
        let b = json!({"x": [1, 2, {"y": 4}], "z": 0});
        assert_eq!(first_difference(&a, &b, "$"), Some("$.x[2].y".into()));
        assert_eq!(first_difference(&a, &a, "$"), None);
        assert_eq!(first_difference(&json!([1]), &json!([1, 2]), "$"), Some("$[1]".into()));
    }

    #[test]
    fn corrupted_golden_is_reported() {
        let dir = std::env::temp_dir().join(format!("coarse-sigma-goldens-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let mut report = run_example(ExampleName::SymbolicComparison, &ExampleParams::default()).unwrap();
        report.results["limit_d"] = json!(7);
        std::fs::write(dir.join("symbolic_comparison.json"), golden_text(&report)).unwrap();
        let out = verify_paper(Some("symbolic"), &Goldens::Directory(dir.clone()));
        std::fs::remove_dir_all(&dir).unwrap();
        assert!(!out.passed);
        assert_eq!(out.examples.len(), 1);
        assert_eq!(out.examples[0].golden.first_difference.as_deref(), Some("$.results.limit_d"));
    }
}
