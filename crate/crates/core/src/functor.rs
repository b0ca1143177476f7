//! Controlled maps between presentations and the morphisms they induce on
//! σ windows: forward and partner directions, basepoint change, and
//! verification of coarse equivalences with explicit interleaving witnesses.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dirseq::{
    check_equivalence, check_equivalence_within, ConcreteSequence, DirSeqError, EquivalenceReport, Morphism,
    MorphismSpec, SetFunction, Verdict,
};
use crate::rips::{Ball, TruncationParams};
use crate::seqcore::is_subsequence;
use crate::sigma::{ind_sigma, ScaleWindow, SigmaError, SigmaLevel, SigmaWindow};
use crate::space::{PointId, PointLabel, Rational, SpaceError, SpacePresentation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FunctorError {
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
    #[error(transparent)]
    DirSeq(#[from] DirSeqError),
    #[error("map is undefined at {label}: {reason}")]
    Undefined { label: PointLabel, reason: String },
    #[error("invalid control function: {0}")]
    InvalidControl(String),
    #[error("control function has no value at N = {0}")]
    ControlOutOfRange(u32),
    #[error("forward direction needs f(x0) = y0, but f(x0) = {image}")]
    BasepointNotPreserved { image: PointLabel },
    #[error("level {level} must map to level {needed}, but the target window ends at {end}")]
    TargetWindowTooShort { level: u32, needed: u32, end: u32 },
    #[error("image of class {class} at N = {scale} (representative {representative}) has no class at level {level}: {source}")]
    ImageNotClassified {
        scale: u32,
        class: usize,
        level: u32,
        representative: String,
        #[source]
        source: SigmaError,
    },
    #[error("d(x0, y0) = {distance} is not below the inner radius {inner}; the truncation is too thin to rebase")]
    RebaseTooFar { distance: Rational, inner: Rational },
    #[error("no closeness constant declared for the pair")]
    MissingCloseness,
}

/// Declared control `N ↦ M(N)`: a formula `aN+b` or a table of `M(1), M(2), ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ControlFunction {
    Linear { slope: u32, offset: u32 },
    Table(Vec<u32>),
    /// `outer(inner(N))`, the control of a composite map.
    Compose(Box<ControlFunction>, Box<ControlFunction>),
}

impl ControlFunction {
    pub fn identity() -> Self {
        ControlFunction::Linear { slope: 1, offset: 0 }
    }

    pub fn shift(offset: u32) -> Self {
        ControlFunction::Linear { slope: 1, offset }
    }

    pub fn table(values: Vec<u32>) -> Result<Self, FunctorError> {
        let c = ControlFunction::Table(values);
        c.validate()?;
        Ok(c)
    }

    pub fn eval(&self, n: u32) -> Result<u32, FunctorError> {
        match self {
            ControlFunction::Linear { slope, offset } => Ok(slope * n + offset),
            ControlFunction::Table(values) => n
                .checked_sub(1)
                .and_then(|i| values.get(i as usize))
                .copied()
                .ok_or(FunctorError::ControlOutOfRange(n)),
            ControlFunction::Compose(outer, inner) => outer.eval(inner.eval(n)?),
        }
    }

    pub fn validate(&self) -> Result<(), FunctorError> {
        match self {
            ControlFunction::Linear { slope: 0, .. } => {
                Err(FunctorError::InvalidControl("slope 0 violates M(N) >= N".into()))
            }
            ControlFunction::Linear { .. } => Ok(()),
            ControlFunction::Table(values) => {
                if values.is_empty() {
                    return Err(FunctorError::InvalidControl("empty table".into()));
                }
                for (i, &m) in values.iter().enumerate() {
                    let n = i as u32 + 1;
                    if m < n {
                        return Err(FunctorError::InvalidControl(format!("M({n}) = {m} < {n}")));
                    }
                    if i > 0 && m < values[i - 1] {
                        return Err(FunctorError::InvalidControl(format!("M({n}) = {m} < M({}) = {}", n - 1, values[i - 1])));
                    }
                }
                Ok(())
            }
            ControlFunction::Compose(outer, inner) => {
                outer.validate()?;
                inner.validate()
            }
        }
    }

    /// `self` after `inner`.
    pub fn after(&self, inner: &ControlFunction) -> ControlFunction {
        ControlFunction::Compose(Box::new(self.clone()), Box::new(inner.clone()))
    }
}

impl fmt::Display for ControlFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlFunction::Linear { slope, offset } => {
                match slope {
                    1 => write!(f, "N")?,
                    s => write!(f, "{s}N")?,
                }
                if *offset > 0 {
                    write!(f, "+{offset}")?;
                }
                Ok(())
            }
            ControlFunction::Table(values) => {
                let parts: Vec<String> = values.iter().map(u32::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
            ControlFunction::Compose(outer, inner) => write!(f, "({outer})∘({inner})"),
        }
    }
}

impl FromStr for ControlFunction {
    type Err = FunctorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || FunctorError::InvalidControl(format!("expected aN+b, got `{s}`"));
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (head, offset) = match compact.split_once('+') {
            Some((h, o)) => (h, o.parse::<u32>().map_err(|_| bad())?),
            None => (compact.as_str(), 0),
        };
        let slope = match head.strip_suffix('N') {
            Some("") => 1,
            Some(a) => a.parse::<u32>().map_err(|_| bad())?,
            None => return Err(bad()),
        };
        let c = ControlFunction::Linear { slope, offset };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ControlRepr {
    Formula(String),
    Table(Vec<u32>),
}

impl<'de> Deserialize<'de> for ControlFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match ControlRepr::deserialize(d)? {
            ControlRepr::Formula(s) => s.parse().map_err(serde::de::Error::custom),
            ControlRepr::Table(values) => ControlFunction::table(values).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for ControlFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ControlFunction::Table(values) => values.serialize(s),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

/// How a map acts on points, expressed through labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PointMap {
    /// Same label in the target.
    Identity,
    /// Same label in the target, for a subspace of the target.
    Inclusion,
    /// Coordinates rounded down to the target's net, ray by ray.
    Floor,
    Table(BTreeMap<PointLabel, PointLabel>),
}

impl PointMap {
    fn apply(&self, source: &SpacePresentation, target: &SpacePresentation, p: PointId) -> Result<PointId, FunctorError> {
        let label = source.label(p)?;
        let undefined = |e: SpaceError| FunctorError::Undefined { label: label.clone(), reason: e.to_string() };
        match self {
            PointMap::Identity | PointMap::Inclusion => target.point(&label).map_err(undefined),
            PointMap::Floor => target.snap_label(&label).map_err(undefined),
            PointMap::Table(table) => {
                let image = table.get(&label).ok_or_else(|| FunctorError::Undefined {
                    label: label.clone(),
                    reason: "no table entry".into(),
                })?;
                target.point(image).map_err(undefined)
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PointMapRepr {
    Tag(String),
    Table(BTreeMap<PointLabel, PointLabel>),
}

impl<'de> Deserialize<'de> for PointMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match PointMapRepr::deserialize(d)? {
            PointMapRepr::Tag(tag) => match tag.as_str() {
                "identity" => Ok(PointMap::Identity),
                "inclusion" => Ok(PointMap::Inclusion),
                "floor" => Ok(PointMap::Floor),
                other => Err(serde::de::Error::custom(format!("unknown builtin map `{other}`"))),
            },
            PointMapRepr::Table(t) => Ok(PointMap::Table(t)),
        }
    }
}

impl Serialize for PointMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            PointMap::Identity => s.serialize_str("identity"),
            PointMap::Inclusion => s.serialize_str("inclusion"),
            PointMap::Floor => s.serialize_str("floor"),
            PointMap::Table(t) => t.serialize(s),
        }
    }
}

/// On-disk form of a controlled map; the spaces are supplied separately.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlledMapSpec {
    pub map: PointMap,
    pub control: ControlFunction,
    #[serde(rename = "closeness_K", default, skip_serializing_if = "Option::is_none")]
    pub closeness: Option<Rational>,
}

#[derive(Clone, Debug)]
enum Action {
    Points(PointMap),
    Compose(Box<ControlledMap>, Box<ControlledMap>),
}

/// A point map `source -> target` with its declared control function and,
/// when paired with a partner, the closeness constant `K` of both composites
/// to the identities.
#[derive(Clone, Debug)]
pub struct ControlledMap {
    source: SpacePresentation,
    target: SpacePresentation,
    action: Action,
    control: ControlFunction,
    closeness: Option<Rational>,
}

impl ControlledMap {
    pub fn new(source: SpacePresentation, target: SpacePresentation, map: PointMap, control: ControlFunction) -> Self {
        ControlledMap { source, target, action: Action::Points(map), control, closeness: None }
    }

    pub fn from_spec(spec: ControlledMapSpec, source: SpacePresentation, target: SpacePresentation) -> Result<Self, FunctorError> {
        spec.control.validate()?;
        let mut m = ControlledMap::new(source, target, spec.map, spec.control);
        m.closeness = spec.closeness;
        Ok(m)
    }

    pub fn with_closeness(mut self, k: Rational) -> Self {
        self.closeness = Some(k);
        self
    }

    pub fn source(&self) -> &SpacePresentation {
        &self.source
    }

    pub fn target(&self) -> &SpacePresentation {
        &self.target
    }

    pub fn control(&self) -> &ControlFunction {
        &self.control
    }

    pub fn closeness(&self) -> Option<Rational> {
        self.closeness
    }

    /// `next ∘ self`, with the composed control.
    pub fn then(&self, next: &ControlledMap) -> ControlledMap {
        ControlledMap {
            source: self.source.clone(),
            target: next.target.clone(),
            action: Action::Compose(Box::new(self.clone()), Box::new(next.clone())),
            control: next.control.after(&self.control),
            closeness: None,
        }
    }

    pub fn apply(&self, p: PointId) -> Result<PointId, FunctorError> {
        match &self.action {
            Action::Points(map) => map.apply(&self.source, &self.target, p),
            Action::Compose(first, second) => second.apply(first.apply(p)?),
        }
    }

    pub fn apply_path(&self, path: &[PointId]) -> Result<Vec<PointId>, FunctorError> {
        path.iter().map(|&p| self.apply(p)).collect()
    }

    /// Target level of scale `n`: `max(M(n), n+1, K+1)`.
    pub fn index_at(&self, n: u32, closeness: Option<Rational>) -> Result<u32, FunctorError> {
        let mut m = self.control.eval(n)?.max(n + 1);
        if let Some(k) = closeness.or(self.closeness) {
            m = m.max(k.ceil() as u32 + 1);
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlViolation {
    pub a: PointLabel,
    pub b: PointLabel,
    pub distance: Rational,
    pub image_distance: Rational,
    pub bound: u32,
}

/// Truncation stand-in for metric properness: points of the sample ball whose
/// images lie within `probe_radius` of the target basepoint must stay within
/// half the sample radius.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PropernessProxy {
    pub probe_radius: Rational,
    pub preimage_points: usize,
    pub max_preimage_norm: Rational,
    pub bounded: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ControlReport {
    pub sample_radius: Rational,
    pub max_scale: u32,
    pub points: usize,
    pub pairs_checked: usize,
    pub violation_count: usize,
    /// First violations found, at most [`MAX_REPORTED`].
    pub violations: Vec<ControlViolation>,
    pub properness: PropernessProxy,
}

impl ControlReport {
    pub fn passes(&self) -> bool {
        self.violation_count == 0 && self.properness.bounded
    }
}

pub const MAX_REPORTED: usize = 20;

/// Checks `d(f a, f b) <= M(⌈d(a, b)⌉)` on every pair of the source ball of
/// radius `sample_radius` at distance at most `max_scale`, and the properness
/// proxy on the same ball.
pub fn validate_controlled(map: &ControlledMap, sample_radius: Rational, max_scale: u32) -> Result<ControlReport, FunctorError> {
    let ball = Ball::new(map.source(), sample_radius);
    let images = ball.points().iter().map(|&p| map.apply(p)).collect::<Result<Vec<_>, _>>()?;
    let target = map.target();
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let edges = ball.edges_within(Rational::integer(i64::from(max_scale)));
    for e in edges.edges() {
        let (a, b) = (e.a as usize, e.b as usize);
        let bound = map.control.eval(e.distance.ceil() as u32)?;
        let image_distance = target.distance(images[a], images[b])?;
        if image_distance > Rational::integer(i64::from(bound)) {
            violation_count += 1;
            if violations.len() < MAX_REPORTED {
                violations.push(ControlViolation {
                    a: map.source().label(ball.point(a))?,
                    b: map.source().label(ball.point(b))?,
                    distance: e.distance,
                    image_distance,
                    bound,
                });
            }
        }
    }
    let probe_radius = sample_radius / Rational::integer(4);
    let mut preimage_points = 0;
    let mut max_preimage_norm = Rational::ZERO;
    for (v, &image) in images.iter().enumerate() {
        if target.norm(image)? <= probe_radius {
            preimage_points += 1;
            max_preimage_norm = max_preimage_norm.max(ball.norm(v));
        }
    }
    let properness = PropernessProxy {
        probe_radius,
        preimage_points,
        max_preimage_norm,
        bounded: max_preimage_norm <= sample_radius / Rational::integer(2),
    };
    Ok(ControlReport {
        sample_radius,
        max_scale,
        points: ball.len(),
        pairs_checked: edges.edges().len(),
        violation_count,
        violations,
        properness,
    })
}

/// How class representatives are pushed through a map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `x0, x1, ... ↦ f(x0), f(x1), ...`; needs `f(x0) = y0`.
    Forward,
    /// `y0, y1, ... ↦ x0, g(y0), g(y1), ...`.
    Partner,
}

/// The morphism of σ windows induced by `map` on every level of `source`.
pub fn induced_morphism(
    map: &ControlledMap,
    direction: Direction,
    source: &SigmaWindow,
    target: &SigmaWindow,
) -> Result<Morphism, FunctorError> {
    induced_morphism_on(map, direction, source, target, source.window().scales(), None)
}

/// As [`induced_morphism`], on the source levels in `levels`, with the
/// closeness constant `closeness` overriding the map's own.
pub fn induced_morphism_on(
    map: &ControlledMap,
    direction: Direction,
    source: &SigmaWindow,
    target: &SigmaWindow,
    levels: RangeInclusive<u32>,
    closeness: Option<Rational>,
) -> Result<Morphism, FunctorError> {
    let prefix = match direction {
        Direction::Forward => {
            let image = map.apply(map.source().basepoint())?;
            if image != map.target().basepoint() {
                return Err(FunctorError::BasepointNotPreserved { image: map.target().label(image)? });
            }
            None
        }
        Direction::Partner => Some(map.target().basepoint()),
    };
    let mut index_map = Vec::new();
    let mut maps = Vec::new();
    for n in levels.clone() {
        let level = source
            .level(n)
            .ok_or(DirSeqError::OutOfWindow { index: n, start: source.window().min, end: source.window().max })?;
        let m = map.index_at(n, closeness)?;
        let upper = target.level(m).ok_or(FunctorError::TargetWindowTooShort {
            level: n,
            needed: m,
            end: target.window().max,
        })?;
        let table = push_classes(level, upper, prefix, |p| map.apply(p))?;
        index_map.push(m);
        maps.push(SetFunction::new(table, upper.len())?);
    }
    Ok(Morphism::new(*levels.start(), index_map, maps)?)
}

fn push_classes(
    level: &SigmaLevel,
    upper: &SigmaLevel,
    prefix: Option<PointId>,
    f: impl Fn(PointId) -> Result<PointId, FunctorError>,
) -> Result<Vec<usize>, FunctorError> {
    let space = level.graph().ball().space();
    level
        .classes()
        .iter()
        .map(|class| {
            let mut path: Vec<PointId> = prefix.into_iter().collect();
            for &p in &class.representative {
                path.push(f(p)?);
            }
            upper.classify_path(&path).map_err(|source| FunctorError::ImageNotClassified {
                scale: level.scale(),
                class: class.id,
                level: upper.scale(),
                representative: render_path(space, &class.representative),
                source,
            })
        })
        .collect()
}

fn render_path(space: &SpacePresentation, path: &[PointId]) -> String {
    let labels: Vec<String> = space.labels(path).iter().map(ToString::to_string).collect();
    labels.join(" ")
}

/// Both basepoint-change morphisms on one space.
#[derive(Clone, Debug)]
pub struct Rebase {
    /// `⌈d(x0, y0)⌉`.
    pub shift: u32,
    pub original: SigmaWindow,
    pub moved: SigmaWindow,
    pub forward: Morphism,
    pub backward: Morphism,
    pub report: EquivalenceReport,
}

/// Moves the basepoint of `space` to `new_basepoint`. Each direction prepends
/// the other basepoint to class representatives and lands at level
/// `max(N, ⌈d(x0, y0)⌉)`. Both windows are extended to reach that level.
pub fn rebase(
    space: &SpacePresentation,
    new_basepoint: PointId,
    window: ScaleWindow,
    trunc: TruncationParams,
) -> Result<Rebase, FunctorError> {
    let x0 = space.basepoint();
    let distance = space.distance(x0, new_basepoint)?;
    let inner = trunc.inner_radius();
    if distance >= inner {
        return Err(FunctorError::RebaseTooFar { distance, inner });
    }
    let moved_space = space.with_basepoint(new_basepoint)?;
    let shift = distance.ceil() as u32;
    let extended = ScaleWindow::new(window.min, window.max.max(shift))?;
    let original = ind_sigma(space, extended, trunc)?;
    let moved = ind_sigma(&moved_space, extended, trunc)?;
    let forward = prepend_morphism(&original, &moved, new_basepoint, shift)?;
    let backward = prepend_morphism(&moved, &original, x0, shift)?;
    let report = check_equivalence(
        &forward,
        &backward,
        &original.to_direct_sequence(),
        &moved.to_direct_sequence(),
    );
    Ok(Rebase { shift, original, moved, forward, backward, report })
}

fn prepend_morphism(from: &SigmaWindow, to: &SigmaWindow, base: PointId, shift: u32) -> Result<Morphism, FunctorError> {
    let mut index_map = Vec::new();
    let mut maps = Vec::new();
    for level in from.levels() {
        let m = level.scale().max(shift);
        let upper = to.level(m).ok_or(FunctorError::TargetWindowTooShort {
            level: level.scale(),
            needed: m,
            end: to.window().max,
        })?;
        let table = push_classes(level, upper, Some(base), Ok)?;
        index_map.push(m);
        maps.push(SetFunction::new(table, upper.len())?);
    }
    Ok(Morphism::new(from.window().min, index_map, maps)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClosenessReport {
    pub k: Rational,
    pub source_points: usize,
    pub target_points: usize,
    /// `max d(g(f(x)), x)` over the source sample.
    pub max_source_drift: Rational,
    /// `max d(f(g(y)), y)` over the target sample.
    pub max_target_drift: Rational,
    pub holds: bool,
}

/// Explicit supersequence witness for one class: the interleaving
/// `x0, h(x0), x0, x1, h(x1), x1, ...` of a representative with its image
/// under the round trip `h`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InterleavingWitness {
    /// `"source"` for `g∘f` on X, `"target"` for `f∘g` on Y.
    pub side: &'static str,
    pub scale: u32,
    pub class: usize,
    pub level: u32,
    pub length: usize,
    pub contains_representative: bool,
    pub contains_round_trip: bool,
    pub class_by_bonding: usize,
    pub class_of_interleaving: usize,
    pub class_of_round_trip: usize,
}

impl InterleavingWitness {
    pub fn holds(&self) -> bool {
        self.contains_representative
            && self.contains_round_trip
            && self.class_by_bonding == self.class_of_interleaving
            && self.class_of_interleaving == self.class_of_round_trip
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoarseEquivalenceReport {
    pub verdict: Verdict,
    pub focus: ScaleWindow,
    pub source_window: ScaleWindow,
    pub target_window: ScaleWindow,
    pub forward_control: ControlReport,
    pub backward_control: ControlReport,
    pub closeness: ClosenessReport,
    pub forward: MorphismSpec,
    pub backward: MorphismSpec,
    pub equivalence: EquivalenceReport,
    pub witnesses: Vec<InterleavingWitness>,
}

/// Verifies that `f : X -> Y` and `g : Y -> X` induce mutually inverse
/// morphisms of σ windows on the levels of `focus`. `trunc_x` and `trunc_y`
/// truncate X and Y; the windows actually computed extend beyond `focus` as
/// far as the composites require.
pub fn verify_coarse_equivalence(
    f: &ControlledMap,
    g: &ControlledMap,
    focus: ScaleWindow,
    trunc_x: TruncationParams,
    trunc_y: TruncationParams,
) -> Result<CoarseEquivalenceReport, FunctorError> {
    let k = match (f.closeness(), g.closeness()) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Err(FunctorError::MissingCloseness),
    };
    let (x, y) = (f.source(), f.target());
    let forward_control = validate_controlled(f, trunc_x.outer, focus.max)?;
    let backward_control = validate_controlled(g, trunc_y.outer, focus.max)?;
    let closeness = check_closeness(f, g, k, trunc_x.outer, trunc_y.outer)?;

    let uf = |n| f.index_at(n, Some(k));
    let vg = |n| g.index_at(n, Some(k));
    let fx_end = focus.max.max(vg(focus.max)?);
    let gy_end = focus.max.max(uf(focus.max)?);
    let x_end = fx_end.max(vg(gy_end)?);
    let y_end = gy_end.max(uf(fx_end)?);
    let source_window = ScaleWindow::new(focus.min, x_end)?;
    let target_window = ScaleWindow::new(focus.min, y_end)?;
    let xs = ind_sigma(x, source_window, trunc_x)?;
    let ys = ind_sigma(y, target_window, trunc_y)?;

    let f_dir = if f.apply(x.basepoint())? == y.basepoint() { Direction::Forward } else { Direction::Partner };
    let fm = induced_morphism_on(f, f_dir, &xs, &ys, focus.min..=fx_end, Some(k))?;
    let gm = induced_morphism_on(g, Direction::Partner, &ys, &xs, focus.min..=gy_end, Some(k))?;
    let (a, b) = (xs.to_direct_sequence(), ys.to_direct_sequence());
    let equivalence = check_equivalence_within(&fm, &gm, &a, &b, focus.scales());

    let mut witnesses = Vec::new();
    for n in focus.scales() {
        let level = vg(uf(n)?)?;
        witnesses.extend(interleavings("source", &xs, &a, n, level, |p| g.apply(f.apply(p)?))?);
        let level = uf(vg(n)?)?;
        witnesses.extend(interleavings("target", &ys, &b, n, level, |p| f.apply(g.apply(p)?))?);
    }

    let verdict = if !forward_control.passes()
        || !backward_control.passes()
        || !closeness.holds
        || equivalence.verdict == Verdict::Fail
        || !witnesses.iter().all(InterleavingWitness::holds)
    {
        Verdict::Fail
    } else {
        equivalence.verdict
    };
    Ok(CoarseEquivalenceReport {
        verdict,
        focus,
        source_window,
        target_window,
        forward_control,
        backward_control,
        closeness,
        forward: fm.to_spec(),
        backward: gm.to_spec(),
        equivalence,
        witnesses,
    })
}

fn check_closeness(
    f: &ControlledMap,
    g: &ControlledMap,
    k: Rational,
    radius_x: Rational,
    radius_y: Rational,
) -> Result<ClosenessReport, FunctorError> {
    let drift = |space: &SpacePresentation, radius, there: &ControlledMap, back: &ControlledMap| {
        let points = space.enumerate_ball(radius);
        let mut worst = Rational::ZERO;
        for &p in &points {
            let q = back.apply(there.apply(p)?)?;
            worst = worst.max(space.distance(p, q)?);
        }
        Ok::<_, FunctorError>((points.len(), worst))
    };
    let (source_points, max_source_drift) = drift(f.source(), radius_x, f, g)?;
    let (target_points, max_target_drift) = drift(g.source(), radius_y, g, f)?;
    Ok(ClosenessReport {
        k,
        source_points,
        target_points,
        max_source_drift,
        max_target_drift,
        holds: max_source_drift <= k && max_target_drift <= k,
    })
}

fn interleavings(
    side: &'static str,
    window: &SigmaWindow,
    seq: &ConcreteSequence,
    n: u32,
    level: u32,
    round_trip: impl Fn(PointId) -> Result<PointId, FunctorError>,
) -> Result<Vec<InterleavingWitness>, FunctorError> {
    let (Some(lower), Some(upper)) = (window.level(n), window.level(level)) else {
        return Ok(Vec::new());
    };
    let bonding = seq.compose(n, level)?;
    let base = window.space().basepoint();
    let mut out = Vec::new();
    for class in lower.classes() {
        let rep = &class.representative;
        let images = rep.iter().map(|&p| round_trip(p)).collect::<Result<Vec<_>, _>>()?;
        let mut interleaving = Vec::with_capacity(3 * rep.len());
        for (&p, &q) in rep.iter().zip(&images) {
            interleaving.extend([p, q, p]);
        }
        let mut trip = vec![base];
        trip.extend(&images);
        let classify = |path: &[PointId]| {
            upper.classify_path(path).map_err(|source| FunctorError::ImageNotClassified {
                scale: n,
                class: class.id,
                level,
                representative: render_path(window.space(), rep),
                source,
            })
        };
        out.push(InterleavingWitness {
            side,
            scale: n,
            class: class.id,
            level,
            length: interleaving.len(),
            contains_representative: is_subsequence(rep, &interleaving),
            contains_round_trip: is_subsequence(&images, &interleaving),
            class_by_bonding: bonding.apply(class.id),
            class_of_interleaving: classify(&interleaving)?,
            class_of_round_trip: classify(&trip)?,
        });
    }
    Ok(out)
}

/// Whether two morphisms into `target` agree after pushing both to the larger
/// of their target levels, on every common source level.
pub fn agree_up_to_bonding(m1: &Morphism, m2: &Morphism, target: &ConcreteSequence) -> Result<bool, FunctorError> {
    let lo = m1.start().max(m2.start());
    let hi = m1.end().min(m2.end());
    for i in lo..=hi {
        let (u1, u2) = (m1.index(i).expect("in window"), m2.index(i).expect("in window"));
        let top = u1.max(u2);
        let a = m1.map(i).expect("in window").then(&target.compose(u1, top)?)?;
        let b = m2.map(i).expect("in window").then(&target.compose(u2, top)?)?;
        if a != b {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirseq::check_morphism;

    fn r(n: i64) -> Rational {
        Rational::integer(n)
    }

    fn half() -> Rational {
        Rational::new(1, 2)
    }

    fn reals() -> SpacePresentation {
        SpacePresentation::delta_net(1, half()).unwrap()
    }

    fn ints() -> SpacePresentation {
        SpacePresentation::lattice(1).unwrap()
    }

    fn floor_pair() -> (ControlledMap, ControlledMap) {
        let f = ControlledMap::new(reals(), ints(), PointMap::Floor, ControlFunction::shift(1)).with_closeness(r(1));
        let g = ControlledMap::new(ints(), reals(), PointMap::Inclusion, ControlFunction::identity()).with_closeness(r(1));
        (f, g)
    }

    #[test]
    fn control_parses_formulas_and_tables() {
        assert_eq!("N+1".parse::<ControlFunction>().unwrap(), ControlFunction::shift(1));
        assert_eq!("2N".parse::<ControlFunction>().unwrap(), ControlFunction::Linear { slope: 2, offset: 0 });
        assert!("0N+3".parse::<ControlFunction>().is_err());
        assert!(ControlFunction::table(vec![2, 1]).is_err());
        let c: ControlFunction = serde_json::from_str("[2,3,5]").unwrap();
        assert_eq!(c.eval(3).unwrap(), 5);
        assert!(c.eval(4).is_err());
        assert_eq!(serde_json::to_string(&ControlFunction::shift(2)).unwrap(), "\"N+2\"");
    }

    #[test]
    fn spec_round_trip() {
        let spec: ControlledMapSpec =
            serde_json::from_str(r#"{"map":"floor","control":"N+1","closeness_K":"1"}"#).unwrap();
        assert_eq!(spec.map, PointMap::Floor);
        assert_eq!(spec.closeness, Some(r(1)));
        let table: ControlledMapSpec =
            serde_json::from_str(r##"{"map":{"#0":"#0","#1":"#0"},"control":[1,2]}"##).unwrap();
        assert!(matches!(table.map, PointMap::Table(ref t) if t.len() == 2));
    }

    #[test]
    fn floor_is_controlled() {
        let (f, g) = floor_pair();
        let report = validate_controlled(&f, r(20), 6).unwrap();
        assert!(report.passes(), "{report:?}");
        assert!(report.pairs_checked > 0);
        assert!(validate_controlled(&g, r(20), 6).unwrap().passes());
        // |⌊a⌋ - ⌊b⌋| <= ⌈|a - b|⌉, so floor is already controlled by M(N) = N
        let tight = ControlledMap::new(reals(), ints(), PointMap::Floor, ControlFunction::identity());
        assert!(validate_controlled(&tight, r(20), 3).unwrap().passes());
    }

    #[test]
    fn stretching_table_is_reported() {
        let line = |n: i64| {
            let d = (0..n).map(|i| (0..n).map(|j| r((i - j).abs())).collect()).collect();
            SpacePresentation::point_cloud(d, 0).unwrap()
        };
        let swap: BTreeMap<PointLabel, PointLabel> =
            [(0, 0), (1, 2), (2, 1)].into_iter().map(|(a, b)| (PointLabel::Index(a), PointLabel::Index(b))).collect();
        let f = ControlledMap::new(line(3), line(3), PointMap::Table(swap), ControlFunction::identity());
        let report = validate_controlled(&f, r(2), 2).unwrap();
        assert_eq!(report.violation_count, 1);
        let v = &report.violations[0];
        assert_eq!((v.distance, v.image_distance, v.bound), (r(1), r(2), 1));
    }

    #[test]
    fn undefined_map_is_an_error() {
        let f = ControlledMap::new(reals(), ints(), PointMap::Identity, ControlFunction::identity());
        assert!(matches!(validate_controlled(&f, r(2), 1), Err(FunctorError::Undefined { .. })));
    }

    #[test]
    fn wedge_inclusion_is_isometric() {
        let d = SpacePresentation::discrete_open_book(Some(6)).unwrap();
        let b = SpacePresentation::open_book(6, half()).unwrap();
        let f = ControlledMap::new(d, b, PointMap::Inclusion, ControlFunction::identity());
        assert!(validate_controlled(&f, r(30), 8).unwrap().passes());
    }

    #[test]
    fn identity_induces_bonding() {
        let z = ints();
        let trunc = TruncationParams::new(r(40));
        let w = ind_sigma(&z, ScaleWindow::new(1, 5).unwrap(), trunc).unwrap();
        let id = ControlledMap::new(z.clone(), z, PointMap::Identity, ControlFunction::identity());
        let m = induced_morphism_on(&id, Direction::Forward, &w, &w, 1..=4, None).unwrap();
        let seq = w.to_direct_sequence();
        for i in 1..=4 {
            assert_eq!(m.index(i), Some(i + 1));
            assert_eq!(m.map(i).unwrap(), &seq.compose(i, i + 1).unwrap());
        }
        assert!(matches!(
            induced_morphism(&id, Direction::Forward, &w, &w),
            Err(FunctorError::TargetWindowTooShort { level: 5, needed: 6, end: 5 })
        ));
    }

    #[test]
    fn integers_include_into_reals_end_by_end() {
        let trunc = TruncationParams::new(r(40));
        let zw = ind_sigma(&ints(), ScaleWindow::new(1, 5).unwrap(), trunc).unwrap();
        let rw = ind_sigma(&reals(), ScaleWindow::new(1, 6).unwrap(), trunc).unwrap();
        let (_, g) = floor_pair();
        let m = induced_morphism_on(&g, Direction::Forward, &zw, &rw, 1..=5, None).unwrap();
        assert!(check_morphism(&m, &zw.to_direct_sequence(), &rw.to_direct_sequence()).passes());
        for i in 1..=5 {
            assert!(m.map(i).unwrap().is_bijective());
            let level = zw.level(i).unwrap();
            let upper = rw.level(i + 1).unwrap();
            // negative end goes to negative end
            for class in level.classes() {
                let last = *class.representative.last().unwrap();
                let image = upper.classes()[m.map(i).unwrap().apply(class.id)].representative.last().copied().unwrap();
                let sign = |s: &SpacePresentation, p| match s.label(p).unwrap() {
                    PointLabel::Coord(t) => t.is_negative(),
                    other => panic!("{other}"),
                };
                assert_eq!(sign(&ints(), last), sign(&reals(), image));
            }
        }
    }

    #[test]
    fn reals_and_integers_are_equivalent() {
        let (f, g) = floor_pair();
        let trunc = TruncationParams::new(r(40));
        let report = verify_coarse_equivalence(&f, &g, ScaleWindow::new(1, 6).unwrap(), trunc, trunc).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{:?}", report.equivalence);
        assert!(report.equivalence.violations.is_empty());
        assert_eq!(report.equivalence.checked_source_levels, (1..=6).collect::<Vec<_>>());
        assert_eq!(report.witnesses.len(), 2 * 6 * 2);
        assert!(report.witnesses.iter().all(InterleavingWitness::holds));
    }

    #[test]
    fn identity_pair_is_equivalent() {
        let z = SpacePresentation::lattice(2).unwrap();
        let id = ControlledMap::new(z.clone(), z, PointMap::Identity, ControlFunction::identity()).with_closeness(Rational::ZERO);
        let trunc = TruncationParams::new(r(24));
        let report = verify_coarse_equivalence(&id, &id, ScaleWindow::new(1, 3).unwrap(), trunc, trunc).unwrap();
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn missing_closeness_is_rejected() {
        let z = ints();
        let id = ControlledMap::new(z.clone(), z, PointMap::Identity, ControlFunction::identity());
        let trunc = TruncationParams::new(r(24));
        assert!(matches!(
            verify_coarse_equivalence(&id, &id, ScaleWindow::new(1, 2).unwrap(), trunc, trunc),
            Err(FunctorError::MissingCloseness)
        ));
    }

    #[test]
    fn finite_books_are_equivalent() {
        let b = SpacePresentation::open_book(4, half()).unwrap();
        let d = SpacePresentation::discrete_open_book(Some(4)).unwrap();
        let f = ControlledMap::new(b.clone(), d.clone(), PointMap::Floor, ControlFunction::shift(4)).with_closeness(r(4));
        let g = ControlledMap::new(d, b, PointMap::Inclusion, ControlFunction::identity());
        let trunc = TruncationParams::new(r(60));
        let report = verify_coarse_equivalence(&f, &g, ScaleWindow::new(1, 3).unwrap(), trunc, trunc).unwrap();
        assert_eq!(report.verdict, Verdict::Pass, "{:?}", report.equivalence);
    }

    #[test]
    fn discrete_book_injects_into_book() {
        let d = SpacePresentation::discrete_open_book(Some(8)).unwrap();
        let b = SpacePresentation::open_book(8, half()).unwrap();
        let trunc = TruncationParams::new(r(60));
        let dw = ind_sigma(&d, ScaleWindow::new(1, 5).unwrap(), trunc).unwrap();
        let bw = ind_sigma(&b, ScaleWindow::new(1, 6).unwrap(), trunc).unwrap();
        let f = ControlledMap::new(d, b, PointMap::Inclusion, ControlFunction::identity());
        let m = induced_morphism_on(&f, Direction::Forward, &dw, &bw, 1..=5, None).unwrap();
        for n in 1..=5 {
            let level = m.map(n).unwrap();
            assert_eq!(level.domain(), n as usize);
            assert_eq!(level.codomain(), 8);
            assert!(level.is_injective());
        }
    }

    #[test]
    fn rebase_on_same_point_is_identity_shaped() {
        let d = SpacePresentation::discrete_open_book(Some(5)).unwrap();
        let trunc = TruncationParams::new(r(60));
        let rb = rebase(&d, d.basepoint(), ScaleWindow::new(1, 4).unwrap(), trunc).unwrap();
        assert_eq!(rb.shift, 0);
        assert_eq!(rb.report.verdict, Verdict::Pass);
        for i in 1..=4 {
            assert_eq!(rb.forward.index(i), Some(i));
            assert_eq!(rb.forward.map(i).unwrap(), &SetFunction::identity(rb.original.level(i).unwrap().len()));
        }
    }

    #[test]
    fn rebase_along_a_ray() {
        let d = SpacePresentation::discrete_open_book(Some(5)).unwrap();
        let y0 = d.point(&"3:9".parse().unwrap()).unwrap();
        let trunc = TruncationParams::new(r(80));
        let rb = rebase(&d, y0, ScaleWindow::new(1, 10).unwrap(), trunc).unwrap();
        assert_eq!(rb.shift, 9);
        assert_eq!(rb.report.verdict, Verdict::Pass, "{:?}", rb.report);
        assert_eq!(rb.forward.index(3), Some(9));
        assert_eq!(rb.forward.index(10), Some(10));
        // scales 1 and 2 cannot leave 3:9
        assert!(rb.moved.level(1).unwrap().is_empty());
        for n in 9..=10 {
            assert!(rb.forward.map(n).unwrap().is_bijective());
        }
        let far = d.point(&"1:30".parse().unwrap()).unwrap();
        assert!(matches!(rebase(&d, far, ScaleWindow::new(1, 2).unwrap(), trunc), Err(FunctorError::RebaseTooFar { .. })));
    }

    #[test]
    fn composition_agrees_up_to_bonding() {
        let (f, g) = floor_pair();
        let gf = f.then(&g);
        let trunc = TruncationParams::new(r(40));
        let xw = ind_sigma(&reals(), ScaleWindow::new(1, 8).unwrap(), trunc).unwrap();
        let yw = ind_sigma(&ints(), ScaleWindow::new(1, 8).unwrap(), trunc).unwrap();
        let fm = induced_morphism_on(&f, Direction::Forward, &xw, &yw, 1..=3, None).unwrap();
        let gm = induced_morphism_on(&g, Direction::Forward, &yw, &xw, 2..=7, None).unwrap();
        let direct = induced_morphism_on(&gf, Direction::Forward, &xw, &xw, 1..=3, None).unwrap();
        let composite = fm.then(&gm).unwrap();
        assert!(agree_up_to_bonding(&direct, &composite, &xw.to_direct_sequence()).unwrap());
    }

    #[test]
    fn close_maps_induce_equal_morphisms() {
        let b = SpacePresentation::open_book(3, half()).unwrap();
        let id = ControlledMap::new(b.clone(), b.clone(), PointMap::Identity, ControlFunction::shift(3));
        let d = SpacePresentation::discrete_open_book(Some(3)).unwrap();
        let to_d = ControlledMap::new(b.clone(), d.clone(), PointMap::Floor, ControlFunction::shift(3));
        let back = ControlledMap::new(d, b.clone(), PointMap::Inclusion, ControlFunction::identity());
        let rounded = to_d.then(&back);
        let trunc = TruncationParams::new(r(40));
        let w = ind_sigma(&b, ScaleWindow::new(1, 8).unwrap(), trunc).unwrap();
        let m1 = induced_morphism_on(&id, Direction::Forward, &w, &w, 1..=4, Some(r(3))).unwrap();
        let m2 = induced_morphism_on(&rounded, Direction::Forward, &w, &w, 1..=4, Some(r(3))).unwrap();
        assert_eq!(m1, m2);
    }
}
