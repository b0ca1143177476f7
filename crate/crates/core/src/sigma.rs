//! σ_N levels as persistent scale-N components, bonding maps between scales,
//! scale windows and window-relative stability.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dirseq::{ConcreteSequence, SetFunction};
use crate::rips::{Ball, ComponentId, Persistence, RipsError, RipsGraph, TruncationParams};
use crate::space::{PointId, PointLabel, Rational, SpaceError, SpacePresentation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SigmaError {
    #[error(transparent)]
    Rips(#[from] RipsError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("invalid scale window: {0}")]
    Window(String),
    #[error("empty path")]
    EmptyPath,
    #[error("step {index} of the path has length {distance} > N = {scale}")]
    StepTooLong { index: usize, distance: Rational, scale: u32 },
    #[error("path never enters the truncation ball")]
    NoAnchor,
    #[error("path ends at {anchor}, which is {reason}")]
    Unanchored { anchor: PointLabel, reason: &'static str },
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

/// A class of σ_N with its canonical representative path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SigmaClass {
    pub id: usize,
    pub scale: u32,
    pub component: ComponentId,
    /// Lexicographically least shortest path from the basepoint to the
    /// component's part of the witness shell.
    pub representative: Vec<PointId>,
}

/// σ_N computed on one truncation.
#[derive(Clone, Debug)]
pub struct SigmaLevel {
    graph: RipsGraph,
    persistence: Persistence,
    classes: Vec<SigmaClass>,
    by_component: BTreeMap<ComponentId, usize>,
}

/// σ_N of `space` on the truncation `trunc`.
pub fn sigma_level(space: &SpacePresentation, scale: u32, trunc: TruncationParams) -> Result<SigmaLevel, SigmaError> {
    let graph = crate::rips::build_rips(space, scale, trunc)?;
    SigmaLevel::from_graph(graph)
}

impl SigmaLevel {
    pub fn from_graph(graph: RipsGraph) -> Result<Self, SigmaError> {
        let persistence = graph.persistence()?;
        let scale = graph.scale();
        let mut classes = Vec::with_capacity(persistence.persistent.len());
        let mut by_component = BTreeMap::new();
        for (id, (&component, shell)) in persistence.persistent.iter().enumerate() {
            let path = graph
                .shortest_path(0, shell, |_| true)
                .ok_or_else(|| SigmaError::Internal(format!("persistent component {} is unreachable", component.0)))?;
            let ball = graph.ball();
            classes.push(SigmaClass {
                id,
                scale,
                component,
                representative: path.into_iter().map(|v| ball.point(v)).collect(),
            });
            by_component.insert(component, id);
        }
        Ok(SigmaLevel { graph, persistence, classes, by_component })
    }

    pub fn scale(&self) -> u32 {
        self.graph.scale()
    }

    pub fn truncation(&self) -> TruncationParams {
        self.graph.truncation()
    }

    pub fn graph(&self) -> &RipsGraph {
        &self.graph
    }

    pub fn persistence(&self) -> &Persistence {
        &self.persistence
    }

    pub fn classes(&self) -> &[SigmaClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    fn ball(&self) -> &Arc<Ball> {
        self.graph.ball()
    }

    /// Class of the persistent component containing ball vertex `v`.
    pub fn class_of_vertex(&self, v: usize) -> Option<usize> {
        let c = self.persistence.partition.component(v)?;
        self.by_component.get(&c).copied()
    }

    pub fn class_of_point(&self, p: PointId) -> Option<usize> {
        self.class_of_vertex(self.ball().vertex(p)?)
    }

    /// Class of a finite N-sequence read as the beginning of a sequence going
    /// to infinity. The class is decided by the path's anchor: its last point
    /// if that lies in the truncation ball, otherwise the last ball point
    /// before the final run outside the ball.
    pub fn classify_path(&self, path: &[PointId]) -> Result<usize, SigmaError> {
        if path.is_empty() {
            return Err(SigmaError::EmptyPath);
        }
        let space = self.ball().space();
        let scale = Rational::integer(i64::from(self.scale()));
        for (index, w) in path.windows(2).enumerate() {
            let distance = space.distance(w[0], w[1])?;
            if distance > scale {
                return Err(SigmaError::StepTooLong { index, distance, scale: self.scale() });
            }
        }
        let anchor = path
            .iter()
            .rev()
            .find_map(|&p| self.ball().vertex(p))
            .ok_or(SigmaError::NoAnchor)?;
        let label = || space.label(self.ball().point(anchor)).expect("ball point");
        if self.persistence.partition.component(anchor).is_none() {
            return Err(SigmaError::Unanchored { anchor: label(), reason: "inside the inner ball" });
        }
        self.class_of_vertex(anchor)
            .ok_or_else(|| SigmaError::Unanchored { anchor: label(), reason: "in a component that does not persist" })
    }
}

/// Map from the classes of `lower` to those of `upper` (`lower.scale() <=
/// upper.scale()`, same truncation): each persistent component is contained
/// in a persistent component at the larger scale.
pub fn bonding_between(lower: &SigmaLevel, upper: &SigmaLevel) -> Result<SetFunction, SigmaError> {
    if lower.scale() > upper.scale() || !Arc::ptr_eq(lower.ball(), upper.ball()) && lower.truncation() != upper.truncation() {
        return Err(SigmaError::Internal("bonding needs levels on one truncation, in increasing scale".into()));
    }
    let mut table = Vec::with_capacity(lower.len());
    for class in lower.classes() {
        let v = class.component.0 as usize;
        let target = upper.class_of_point(lower.ball().point(v)).ok_or_else(|| {
            SigmaError::Internal(format!(
                "scale-{} class {} lies in a non-persistent scale-{} component",
                lower.scale(),
                class.id,
                upper.scale()
            ))
        })?;
        let via_path = upper.classify_path(&class.representative)?;
        if via_path != target {
            return Err(SigmaError::Internal(format!(
                "class {} at scale {}: component inclusion gives {target}, representative gives {via_path}",
                class.id,
                lower.scale()
            )));
        }
        table.push(target);
    }
    SetFunction::new(table, upper.len()).map_err(|e| SigmaError::Internal(e.to_string()))
}

/// φ_N : σ_N -> σ_{N+1} on one truncation.
pub fn bonding_map(space: &SpacePresentation, scale: u32, trunc: TruncationParams) -> Result<SetFunction, SigmaError> {
    let window = ind_sigma(space, ScaleWindow::new(scale, scale + 1)?, trunc)?;
    Ok(window.bondings[0].clone())
}

/// An inclusive range of scales `min..=max`, written `min:max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaleWindow {
    pub min: u32,
    pub max: u32,
}

impl ScaleWindow {
    pub fn new(min: u32, max: u32) -> Result<Self, SigmaError> {
        if min == 0 {
            return Err(SigmaError::Window("scales start at 1".into()));
        }
        if min > max {
            return Err(SigmaError::Window(format!("{min} > {max}")));
        }
        Ok(ScaleWindow { min, max })
    }

    pub fn scales(&self) -> std::ops::RangeInclusive<u32> {
        self.min..=self.max
    }
}

impl fmt::Display for ScaleWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.min, self.max)
    }
}

impl FromStr for ScaleWindow {
    type Err = SigmaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SigmaError::Window(format!("`{s}` is not of the form A:B"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        ScaleWindow::new(a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?)
    }
}

/// The levels σ_N for N in a window, with the bonding maps between
/// consecutive levels.
#[derive(Clone, Debug)]
pub struct SigmaWindow {
    window: ScaleWindow,
    levels: Vec<SigmaLevel>,
    bondings: Vec<SetFunction>,
}

/// Computes every level of the window on one shared truncation ball.
pub fn ind_sigma(space: &SpacePresentation, window: ScaleWindow, trunc: TruncationParams) -> Result<SigmaWindow, SigmaError> {
    trunc.check_thickness(window.max)?;
    let ball = Arc::new(Ball::new(space, trunc.outer));
    let edges = ball.edges_within(Rational::integer(i64::from(window.max)));
    let levels = window
        .scales()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|n| {
            let graph = RipsGraph::from_edges(Arc::clone(&ball), &edges, n, trunc)?;
            SigmaLevel::from_graph(graph)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bondings = levels
        .windows(2)
        .map(|pair| bonding_between(&pair[0], &pair[1]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SigmaWindow { window, levels, bondings })
}

impl SigmaWindow {
    pub fn window(&self) -> ScaleWindow {
        self.window
    }

    pub fn levels(&self) -> &[SigmaLevel] {
        &self.levels
    }

    pub fn level(&self, scale: u32) -> Option<&SigmaLevel> {
        scale.checked_sub(self.window.min).and_then(|k| self.levels.get(k as usize))
    }

    pub fn bondings(&self) -> &[SetFunction] {
        &self.bondings
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(SigmaLevel::len).collect()
    }

    pub fn space(&self) -> &SpacePresentation {
        self.levels[0].ball().space()
    }

    /// The window as a concrete direct sequence; elements are named by the
    /// label of their representative's endpoint.
    pub fn to_direct_sequence(&self) -> ConcreteSequence {
        let space = self.space();
        let names = self
            .levels
            .iter()
            .map(|level| {
                level
                    .classes()
                    .iter()
                    .map(|c| space.label(*c.representative.last().unwrap()).expect("ball point").to_string())
                    .collect()
            })
            .collect();
        ConcreteSequence::new(self.window.min, names, self.bondings.clone()).expect("bondings match level sizes")
    }

    pub fn report(&self) -> SigmaReport {
        let space = self.space();
        let label = |p: PointId| space.label(p).expect("ball point");
        let trunc = self.levels[0].truncation();
        SigmaReport {
            space: space.name().to_string(),
            basepoint: label(space.basepoint()),
            truncation: TruncationReport {
                outer: trunc.outer,
                inner: trunc.inner_radius(),
                margin: trunc.margin.map_or_else(|| "N+1".to_string(), |w| w.to_string()),
            },
            window: self.window,
            levels: self
                .levels
                .iter()
                .map(|level| LevelReport {
                    scale: level.scale(),
                    vertices: level.graph().vertex_count(),
                    edges: level.graph().edge_count(),
                    shell_threshold: level.persistence().shell_threshold,
                    count: level.len(),
                    classes: level
                        .classes()
                        .iter()
                        .map(|c| ClassReport {
                            id: c.id,
                            component: label(level.ball().point(c.component.0 as usize)),
                            representative: c.representative.iter().map(|&p| label(p)).collect(),
                        })
                        .collect(),
                })
                .collect(),
            bondings: self
                .bondings
                .iter()
                .enumerate()
                .map(|(k, b)| BondingReport {
                    from: self.window.min + k as u32,
                    to: self.window.min + k as u32 + 1,
                    map: b.table().to_vec(),
                    bijective: b.is_bijective(),
                })
                .collect(),
            stability: sigma_stability(self),
        }
    }
}

/// Window-relative stability evidence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StabilityReport {
    /// Least K in the window with every bonding at N >= K a bijection.
    pub stable_from: Option<u32>,
    pub verdict: String,
    pub scope: &'static str,
}

impl StabilityReport {
    pub fn is_stable(&self) -> bool {
        self.stable_from.is_some()
    }
}

pub fn sigma_stability(window: &SigmaWindow) -> StabilityReport {
    let bijective: Vec<bool> = window.bondings.iter().map(SetFunction::is_bijective).collect();
    let tail = bijective.iter().rev().take_while(|&&b| b).count();
    let stable_from = if tail == bijective.len() {
        Some(window.window.min)
    } else if tail == 0 {
        None
    } else {
        Some(window.window.max - tail as u32)
    };
    let verdict = match stable_from {
        Some(k) => format!("stable within window from K={k}"),
        None => "not stable within window".to_string(),
    };
    StabilityReport { stable_from, verdict, scope: "window-relative" }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SigmaReport {
    pub space: String,
    pub basepoint: PointLabel,
    pub truncation: TruncationReport,
    pub window: ScaleWindow,
    pub levels: Vec<LevelReport>,
    pub bondings: Vec<BondingReport>,
    pub stability: StabilityReport,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TruncationReport {
    pub outer: Rational,
    pub inner: Rational,
    pub margin: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelReport {
    pub scale: u32,
    pub vertices: usize,
    pub edges: usize,
    pub shell_threshold: Rational,
    pub count: usize,
    pub classes: Vec<ClassReport>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassReport {
    pub id: usize,
    pub component: PointLabel,
    pub representative: Vec<PointLabel>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BondingReport {
    pub from: u32,
    pub to: u32,
    pub map: Vec<usize>,
    pub bijective: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn int(n: i64) -> Rational {
        Rational::integer(n)
    }

    fn trunc(r: i64) -> TruncationParams {
        TruncationParams::new(int(r))
    }

    #[test]
    fn discrete_book_level_four() {
        let d = SpacePresentation::discrete_open_book(Some(6)).unwrap();
        let level = sigma_level(&d, 4, trunc(100)).unwrap();
        assert_eq!(level.len(), 4);
        for class in level.classes() {
            let scale = int(4);
            for w in class.representative.windows(2) {
                assert!(d.distance(w[0], w[1]).unwrap() <= scale);
            }
            assert_eq!(class.representative[0], d.basepoint());
            let last = *class.representative.last().unwrap();
            assert!(d.norm(last).unwrap() > level.persistence().shell_threshold);
        }
    }

    #[test]
    fn open_book_nine_rays() {
        let b = SpacePresentation::open_book(9, Rational::new(1, 2)).unwrap();
        assert_eq!(sigma_level(&b, 1, trunc(100)).unwrap().len(), 9);
    }

    #[test]
    fn one_point_space_is_empty() {
        let p = SpacePresentation::point_cloud(vec![vec![int(0)]], 0).unwrap();
        let w = ind_sigma(&p, ScaleWindow::new(1, 3).unwrap(), trunc(8)).unwrap();
        assert_eq!(w.sizes(), vec![0, 0, 0]);
        assert!(w.bondings().iter().all(|b| b.domain() == 0));
        assert_eq!(sigma_stability(&w).stable_from, Some(1));
    }

    #[test]
    fn discrete_book_bonding_is_injective() {
        let d = SpacePresentation::discrete_open_book(Some(5)).unwrap();
        let phi = bonding_map(&d, 2, trunc(60)).unwrap();
        assert_eq!((phi.domain(), phi.codomain()), (2, 3));
        assert!(phi.is_injective());
    }

    #[test]
    fn two_integer_rays_bijective_bonding() {
        let w = crate::space::metric_wedge(vec![SpacePresentation::integer_ray(); 2]).unwrap();
        let phi = bonding_map(&w, 1, trunc(20)).unwrap();
        assert!(phi.is_bijective());
        assert_eq!(phi.domain(), 2);
    }

    #[test]
    fn classify_rejects_bad_paths() {
        let d = SpacePresentation::discrete_open_book(Some(3)).unwrap();
        let level = sigma_level(&d, 1, trunc(20)).unwrap();
        let p = |s: &str| d.point(&s.parse().unwrap()).unwrap();
        assert!(matches!(level.classify_path(&[]), Err(SigmaError::EmptyPath)));
        assert!(matches!(level.classify_path(&[p("*"), p("2:2")]), Err(SigmaError::StepTooLong { .. })));
        assert!(matches!(level.classify_path(&[p("*"), p("1:1")]), Err(SigmaError::Unanchored { .. })));
        let far = p("1:25");
        assert!(matches!(level.classify_path(&[far]), Err(SigmaError::NoAnchor)));
        let run: Vec<PointId> = (10..=22).map(|t| p(&format!("1:{t}"))).collect();
        assert_eq!(level.classify_path(&run).unwrap(), 0);
    }

    #[test]
    fn window_parse() {
        assert_eq!("2:7".parse::<ScaleWindow>().unwrap(), ScaleWindow { min: 2, max: 7 });
        assert!("0:3".parse::<ScaleWindow>().is_err());
        assert!("5:3".parse::<ScaleWindow>().is_err());
        assert!("5".parse::<ScaleWindow>().is_err());
    }

    #[test]
    fn stability_tail() {
        let d = SpacePresentation::discrete_open_book(Some(3)).unwrap();
        let w = ind_sigma(&d, ScaleWindow::new(1, 6).unwrap(), trunc(60)).unwrap();
        assert_eq!(w.sizes(), vec![1, 2, 3, 3, 3, 3]);
        assert_eq!(sigma_stability(&w).stable_from, Some(3));
    }
}
