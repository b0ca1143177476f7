//! Exact, finitely queryable presentations of pointed metric spaces.
//!
//! A [`SpacePresentation`] answers three questions exactly: the distance between
//! two points, the list of points in a closed ball about the basepoint, and the
//! label of a point. Every supported space is locally finite, so balls are
//! finite lists. Continuous spaces (the half-line, the line, the open book) are
//! replaced by δ-nets, which are coarsely equivalent to them.

mod label;
mod rational;
mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use label::{ParseLabelError, PointLabel};
pub use rational::{ParseRationalError, Rational};
pub use spec::{SpaceSpec, SpecKind};

/// Opaque identifier of a point, unique within one presentation.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(u64);

impl PointId {
    pub fn raw(self) -> u64 {
        self.0
    }
}

impl fmt::Display for PointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("distance matrix is not square (row {row} has {len} entries, expected {expected})")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("distance matrix is empty")]
    EmptyCloud,
    #[error("d({a},{a}) = {value}, expected 0")]
    NonZeroDiagonal { a: usize, value: Rational },
    #[error("d({a},{b}) = {value} must be positive for distinct points")]
    NonPositiveDistance { a: usize, b: usize, value: Rational },
    #[error("d({a},{b}) = {ab} differs from d({b},{a}) = {ba}")]
    NotSymmetric { a: usize, b: usize, ab: Rational, ba: Rational },
    #[error("triangle inequality fails on ({a},{b},{c}): d(a,c) = {ac} > d(a,b) + d(b,c) = {ab} + {bc}")]
    TriangleViolation { a: usize, b: usize, c: usize, ab: Rational, bc: Rational, ac: Rational },
    #[error("basepoint index {0} is outside the point cloud")]
    BasepointOutOfRange(usize),
    #[error("net spacing must be positive, got {0}")]
    NonPositiveSpacing(Rational),
    #[error("a book needs at least one ray, got {0}")]
    NoRays(usize),
    #[error("lattice dimension must be 1, 2 or 3, got {0}")]
    UnsupportedDimension(usize),
    #[error("a metric wedge needs at least one summand")]
    EmptyWedge,
    #[error("unsupported construction: {0}")]
    Unsupported(String),
    #[error("point {0} does not belong to this space")]
    UnknownPoint(PointId),
    #[error("label `{0}` does not name a point of this space")]
    UnknownLabel(PointLabel),
}

/// Which construction a presentation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    PointCloud,
    Ray,
    DiscreteRay,
    Wedge,
    Lattice,
    DeltaNet,
}

const SUMMAND_SHIFT: u32 = 40;
const SUMMAND_MASK: u64 = (1 << SUMMAND_SHIFT) - 1;
const MAX_SUMMANDS: usize = 1 << 23;

#[derive(Clone, Debug)]
enum Kind {
    Cloud(Arc<Vec<Vec<Rational>>>),
    /// `{ n * spacing : n >= 0 }` on the half-line.
    Ray { spacing: Rational },
    /// `spacing * Z^dim` with the l1 metric.
    Grid { dim: usize, spacing: Rational },
    Wedge(Summands),
}

#[derive(Clone, Debug)]
enum Summands {
    Finite(Arc<Vec<SpacePresentation>>),
    /// Summand `k` is `{ k * n : n >= 0 }`, for every `k >= 1`.
    ArithmeticRays,
}

impl Summands {
    fn dist(&self, k: usize, a: u64, b: u64) -> Rational {
        match self {
            Summands::Finite(parts) => parts[k - 1].dist(a, b),
            Summands::ArithmeticRays => Rational::integer((k as u64 * a.abs_diff(b)) as i64),
        }
    }

    fn norm(&self, k: usize, inner: u64) -> Rational {
        match self {
            Summands::Finite(parts) => {
                let part = &parts[k - 1];
                part.dist(part.basepoint.0, inner)
            }
            Summands::ArithmeticRays => Rational::integer((k as u64 * inner) as i64),
        }
    }
}

/// A locally finite pointed metric space with exact distances.
///
/// Presentations are immutable; every query is a pure function of the
/// presentation and its arguments.
#[derive(Clone, Debug)]
pub struct SpacePresentation {
    kind: Kind,
    tag: SpaceKind,
    basepoint: PointId,
    name: String,
}

impl SpacePresentation {
    /// A finite metric space given by its distance matrix.
    pub fn point_cloud(distances: Vec<Vec<Rational>>, basepoint: usize) -> Result<Self, SpaceError> {
        validate_matrix(&distances)?;
        if basepoint >= distances.len() {
            return Err(SpaceError::BasepointOutOfRange(basepoint));
        }
        let name = format!("point_cloud{{n={}}}", distances.len());
        Ok(SpacePresentation {
            kind: Kind::Cloud(Arc::new(distances)),
            tag: SpaceKind::PointCloud,
            basepoint: PointId(basepoint as u64),
            name,
        })
    }

    /// δ-net `{0, δ, 2δ, ...}` of the half-line `[0, ∞)`.
    pub fn ray(net_spacing: Rational) -> Result<Self, SpaceError> {
        let mut s = Self::progression(net_spacing)?;
        s.tag = SpaceKind::Ray;
        s.name = format!("ray{{delta={net_spacing}}}");
        Ok(s)
    }

    /// `{0, s, 2s, ...}` with its own metric.
    pub fn discrete_ray(spacing: Rational) -> Result<Self, SpaceError> {
        let mut s = Self::progression(spacing)?;
        s.name = format!("discrete_ray{{spacing={spacing}}}");
        Ok(s)
    }

    /// The natural numbers.
    pub fn integer_ray() -> Self {
        let mut s = Self::progression(Rational::ONE).expect("unit spacing is valid");
        s.name = "integer_ray".to_string();
        s
    }

    fn progression(spacing: Rational) -> Result<Self, SpaceError> {
        if !spacing.is_positive() {
            return Err(SpaceError::NonPositiveSpacing(spacing));
        }
        Ok(SpacePresentation {
            kind: Kind::Ray { spacing },
            tag: SpaceKind::DiscreteRay,
            basepoint: PointId(0),
            name: String::new(),
        })
    }

    /// `spacing * Z^dim` with the l1 metric, based at the origin.
    pub fn delta_net(dim: usize, spacing: Rational) -> Result<Self, SpaceError> {
        if !(1..=3).contains(&dim) {
            return Err(SpaceError::UnsupportedDimension(dim));
        }
        if !spacing.is_positive() {
            return Err(SpaceError::NonPositiveSpacing(spacing));
        }
        Ok(SpacePresentation {
            kind: Kind::Grid { dim, spacing },
            tag: SpaceKind::DeltaNet,
            basepoint: PointId(0),
            name: format!("delta_net{{dim={dim},delta={spacing}}}"),
        })
    }

    /// `Z^dim` with the l1 metric.
    pub fn lattice(dim: usize) -> Result<Self, SpaceError> {
        let mut s = Self::delta_net(dim, Rational::ONE)?;
        s.tag = SpaceKind::Lattice;
        s.name = format!("lattice{{dim={dim}}}");
        Ok(s)
    }

    /// Metric wedge of `num_rays` half-lines, each presented as a δ-net.
    pub fn open_book(num_rays: usize, net_spacing: Rational) -> Result<Self, SpaceError> {
        if num_rays < 1 {
            return Err(SpaceError::NoRays(num_rays));
        }
        let ray = Self::ray(net_spacing)?;
        let mut s = metric_wedge(vec![ray; num_rays])?;
        s.name = format!("open_book{{k={num_rays},delta={net_spacing}}}");
        Ok(s)
    }

    /// Metric wedge of the rays `{ i * n : n >= 0 }` for `i = 1..=num_rays`,
    /// or for every `i >= 1` when `num_rays` is `None`.
    pub fn discrete_open_book(num_rays: Option<usize>) -> Result<Self, SpaceError> {
        match num_rays {
            Some(0) => Err(SpaceError::NoRays(0)),
            Some(k) => {
                let parts = (1..=k)
                    .map(|i| Self::discrete_ray(Rational::integer(i as i64)))
                    .collect::<Result<Vec<_>, _>>()?;
                let mut s = metric_wedge(parts)?;
                s.name = format!("discrete_open_book{{k={k}}}");
                Ok(s)
            }
            None => Ok(SpacePresentation {
                kind: Kind::Wedge(Summands::ArithmeticRays),
                tag: SpaceKind::Wedge,
                basepoint: PointId(0),
                name: "discrete_open_book{k=inf}".to_string(),
            }),
        }
    }

    pub fn kind(&self) -> SpaceKind {
        self.tag
    }

    /// Short description of the construction, e.g. `open_book{k=10,delta=1/2}`.
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn basepoint(&self) -> PointId {
        self.basepoint
    }

    /// The same metric space, pointed at `point`.
    pub fn with_basepoint(&self, point: PointId) -> Result<Self, SpaceError> {
        if !self.contains(point) {
            return Err(SpaceError::UnknownPoint(point));
        }
        let mut s = self.clone();
        s.basepoint = point;
        if point != self.canonical_center() {
            let label = self.label_unchecked(point.0);
            s.name = format!("{}@{}", self.name, label);
        }
        Ok(s)
    }

    pub fn contains(&self, p: PointId) -> bool {
        self.contains_raw(p.0)
    }

    pub fn distance(&self, a: PointId, b: PointId) -> Result<Rational, SpaceError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.dist(a.0, b.0))
    }

    /// Distance to the basepoint.
    pub fn norm(&self, p: PointId) -> Result<Rational, SpaceError> {
        self.distance(self.basepoint, p)
    }

    /// Points within `radius` of the basepoint, sorted by distance to the
    /// basepoint and then by label.
    pub fn enumerate_ball(&self, radius: Rational) -> Vec<PointId> {
        if radius.is_negative() {
            return Vec::new();
        }
        let center = self.canonical_center();
        let raw = if self.basepoint == center {
            self.ball_raw(center.0, radius)
        } else {
            let shift = self.dist(center.0, self.basepoint.0);
            let bp = self.basepoint.0;
            self.ball_raw(center.0, radius + shift)
                .into_iter()
                .filter(|&p| self.dist(bp, p) <= radius)
                .collect()
        };
        let bp = self.basepoint.0;
        let mut keyed: Vec<(Rational, PointLabel, u64)> = raw
            .into_iter()
            .map(|p| (self.dist(bp, p), self.label_unchecked(p), p))
            .collect();
        keyed.sort();
        keyed.into_iter().map(|(_, _, p)| PointId(p)).collect()
    }

    pub fn label(&self, p: PointId) -> Result<PointLabel, SpaceError> {
        self.check(p)?;
        Ok(self.label_unchecked(p.0))
    }

    pub fn point(&self, label: &PointLabel) -> Result<PointId, SpaceError> {
        self.raw_of(label)
            .map(PointId)
            .ok_or_else(|| SpaceError::UnknownLabel(label.clone()))
    }

    /// Labels of a list of points; unknown points render as their raw id.
    pub fn labels(&self, points: &[PointId]) -> Vec<PointLabel> {
        points
            .iter()
            .map(|&p| self.label(p).unwrap_or(PointLabel::Index(p.0 as usize)))
            .collect()
    }

    /// The point whose coordinates are the coordinates of `label` rounded down
    /// to this space's net, summand by summand. Point clouds only accept
    /// their own labels.
    pub fn snap_label(&self, label: &PointLabel) -> Result<PointId, SpaceError> {
        let unknown = || SpaceError::UnknownLabel(label.clone());
        let floor_to = |t: Rational, s: Rational| (t / s).floor();
        match (&self.kind, label) {
            (Kind::Ray { spacing }, PointLabel::Coord(t)) => {
                let n = floor_to(*t, *spacing);
                if n < 0 || n as u64 > SUMMAND_MASK {
                    return Err(unknown());
                }
                Ok(PointId(n as u64))
            }
            (Kind::Grid { dim: 1, spacing }, PointLabel::Coord(t)) => {
                grid_encode(&[floor_to(*t, *spacing)]).map(PointId).ok_or_else(unknown)
            }
            (Kind::Grid { dim, spacing }, PointLabel::Coords(ts)) if ts.len() == *dim => {
                let coords: Vec<i64> = ts.iter().map(|t| floor_to(*t, *spacing)).collect();
                grid_encode(&coords).map(PointId).ok_or_else(unknown)
            }
            (Kind::Wedge(_), PointLabel::Base) => Ok(PointId(0)),
            (Kind::Wedge(_), PointLabel::Summand(k, inner)) => {
                let part = self.summand(*k).ok_or_else(unknown)?;
                let raw = part.snap_label(inner)?.0;
                if raw == part.basepoint.0 {
                    Ok(PointId(0))
                } else {
                    Ok(PointId(join_summand(*k, raw)))
                }
            }
            _ => self.point(label),
        }
    }

    fn check(&self, p: PointId) -> Result<(), SpaceError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(SpaceError::UnknownPoint(p))
        }
    }

    fn canonical_center(&self) -> PointId {
        match &self.kind {
            Kind::Wedge(_) => PointId(0),
            _ => self.basepoint,
        }
    }

    fn summand(&self, k: usize) -> Option<SpacePresentation> {
        match &self.kind {
            Kind::Wedge(Summands::Finite(parts)) => k.checked_sub(1).and_then(|i| parts.get(i)).cloned(),
            Kind::Wedge(Summands::ArithmeticRays) => {
                (1..MAX_SUMMANDS).contains(&k).then(|| Self::discrete_ray(Rational::integer(k as i64)).unwrap())
            }
            _ => None,
        }
    }

    fn contains_raw(&self, p: u64) -> bool {
        match &self.kind {
            Kind::Cloud(d) => (p as usize) < d.len(),
            Kind::Ray { .. } => p <= SUMMAND_MASK,
            Kind::Grid { dim, .. } => grid_decode(*dim, p).is_some(),
            Kind::Wedge(_) => {
                if p == 0 {
                    return true;
                }
                let (k, inner) = split_summand(p);
                match self.summand(k) {
                    Some(part) => part.contains_raw(inner) && inner != part.basepoint.0,
                    None => false,
                }
            }
        }
    }

    fn dist(&self, a: u64, b: u64) -> Rational {
        if a == b {
            return Rational::ZERO;
        }
        match &self.kind {
            Kind::Cloud(d) => d[a as usize][b as usize],
            Kind::Ray { spacing } => Rational::integer(a.abs_diff(b) as i64) * *spacing,
            Kind::Grid { dim, spacing } => {
                let ca = grid_decode(*dim, a).expect("valid grid point");
                let cb = grid_decode(*dim, b).expect("valid grid point");
                let l1: i64 = ca.iter().zip(&cb).map(|(x, y)| (x - y).abs()).sum();
                Rational::integer(l1) * *spacing
            }
            Kind::Wedge(summands) => {
                if a == 0 {
                    let (k, inner) = split_summand(b);
                    return summands.norm(k, inner);
                }
                if b == 0 {
                    let (k, inner) = split_summand(a);
                    return summands.norm(k, inner);
                }
                let (ka, ia) = split_summand(a);
                let (kb, ib) = split_summand(b);
                if ka == kb {
                    summands.dist(ka, ia, ib)
                } else {
                    summands.norm(ka, ia) + summands.norm(kb, ib)
                }
            }
        }
    }

    /// Raw ids within `radius` of `center` (unsorted). For wedges, `center`
    /// must be the wedge point.
    fn ball_raw(&self, center: u64, radius: Rational) -> Vec<u64> {
        match &self.kind {
            Kind::Cloud(d) => (0..d.len() as u64)
                .filter(|&p| d[center as usize][p as usize] <= radius)
                .collect(),
            Kind::Ray { spacing } => {
                let steps = (radius / *spacing).floor().max(0) as u64;
                let lo = center.saturating_sub(steps);
                let hi = center.saturating_add(steps).min(SUMMAND_MASK);
                (lo..=hi).collect()
            }
            Kind::Grid { dim, spacing } => {
                let steps = (radius / *spacing).floor().max(0);
                let c = grid_decode(*dim, center).expect("valid grid point");
                let mut out = Vec::new();
                let mut cur = c.clone();
                grid_ball(&c, 0, steps, &mut cur, &mut out);
                out.into_iter().filter_map(|coords| grid_encode(&coords)).collect()
            }
            Kind::Wedge(summands) => {
                debug_assert_eq!(center, 0);
                let count = match summands {
                    Summands::Finite(parts) => parts.len(),
                    // summand k has no point other than its base within distance < k
                    Summands::ArithmeticRays => (radius.floor().max(0) as usize).min(MAX_SUMMANDS - 1),
                };
                let mut out = vec![0];
                for k in 1..=count {
                    let part = self.summand(k).expect("valid summand");
                    let base = part.basepoint.0;
                    for inner in part.ball_raw(part.canonical_center().0, radius) {
                        if inner == base {
                            continue;
                        }
                        if part.canonical_center() != part.basepoint && part.dist(base, inner) > radius {
                            continue;
                        }
                        out.push(join_summand(k, inner));
                    }
                }
                out
            }
        }
    }

    fn label_unchecked(&self, p: u64) -> PointLabel {
        match &self.kind {
            Kind::Cloud(_) => PointLabel::Index(p as usize),
            Kind::Ray { spacing } => PointLabel::Coord(Rational::integer(p as i64) * *spacing),
            Kind::Grid { dim, spacing } => {
                let c = grid_decode(*dim, p).expect("valid grid point");
                if *dim == 1 {
                    PointLabel::Coord(Rational::integer(c[0]) * *spacing)
                } else {
                    PointLabel::Coords(c.iter().map(|&x| Rational::integer(x) * *spacing).collect())
                }
            }
            Kind::Wedge(_) => {
                if p == 0 {
                    return PointLabel::Base;
                }
                let (k, inner) = split_summand(p);
                let part = self.summand(k).expect("valid summand");
                PointLabel::summand(k, part.label_unchecked(inner))
            }
        }
    }

    fn raw_of(&self, label: &PointLabel) -> Option<u64> {
        match (&self.kind, label) {
            (Kind::Cloud(d), PointLabel::Index(i)) => (*i < d.len()).then_some(*i as u64),
            (Kind::Ray { spacing }, PointLabel::Coord(t)) => {
                let n = t.exact_multiple_of(*spacing)?;
                (n >= 0 && (n as u64) <= SUMMAND_MASK).then_some(n as u64)
            }
            (Kind::Grid { dim: 1, spacing }, PointLabel::Coord(t)) => {
                grid_encode(&[t.exact_multiple_of(*spacing)?])
            }
            (Kind::Grid { dim, spacing }, PointLabel::Coords(ts)) if ts.len() == *dim => {
                let coords = ts
                    .iter()
                    .map(|t| t.exact_multiple_of(*spacing))
                    .collect::<Option<Vec<_>>>()?;
                grid_encode(&coords)
            }
            (Kind::Wedge(_), PointLabel::Base) => Some(0),
            (Kind::Wedge(_), PointLabel::Summand(k, inner)) => {
                let part = self.summand(*k)?;
                let raw = part.raw_of(inner)?;
                if raw == part.basepoint.0 {
                    Some(0)
                } else {
                    Some(join_summand(*k, raw))
                }
            }
            _ => None,
        }
    }
}

/// Metric wedge of pointed spaces: within a summand the summand's own metric,
/// across summands the sum of the distances to the respective basepoints. The
/// wedge point becomes the new basepoint.
pub fn metric_wedge(parts: Vec<SpacePresentation>) -> Result<SpacePresentation, SpaceError> {
    if parts.is_empty() {
        return Err(SpaceError::EmptyWedge);
    }
    let mut flat = Vec::with_capacity(parts.len());
    for part in parts {
        match &part.kind {
            Kind::Wedge(Summands::Finite(inner)) if part.basepoint.0 == 0 => {
                flat.extend(inner.iter().cloned());
            }
            Kind::Wedge(_) => {
                return Err(SpaceError::Unsupported(
                    "nested wedge summands must be finite wedges pointed at their wedge point".into(),
                ))
            }
            _ => flat.push(part),
        }
    }
    if flat.len() >= MAX_SUMMANDS {
        return Err(SpaceError::Unsupported(format!("too many wedge summands ({})", flat.len())));
    }
    let name = format!("wedge{{{}}}", flat.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(","));
    Ok(SpacePresentation {
        kind: Kind::Wedge(Summands::Finite(Arc::new(flat))),
        tag: SpaceKind::Wedge,
        basepoint: PointId(0),
        name,
    })
}

/// Builds a presentation from its JSON-level description.
pub fn build_space(spec: &SpaceSpec) -> Result<SpacePresentation, SpaceError> {
    spec.build()
}

fn validate_matrix(d: &[Vec<Rational>]) -> Result<(), SpaceError> {
    let n = d.len();
    if n == 0 {
        return Err(SpaceError::EmptyCloud);
    }
    for (row, r) in d.iter().enumerate() {
        if r.len() != n {
            return Err(SpaceError::NotSquare { row, len: r.len(), expected: n });
        }
    }
    for a in 0..n {
        if !d[a][a].is_zero() {
            return Err(SpaceError::NonZeroDiagonal { a, value: d[a][a] });
        }
        for b in 0..n {
            if a != b && !d[a][b].is_positive() {
                return Err(SpaceError::NonPositiveDistance { a, b, value: d[a][b] });
            }
            if d[a][b] != d[b][a] {
                return Err(SpaceError::NotSymmetric { a, b, ab: d[a][b], ba: d[b][a] });
            }
        }
    }
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                if d[a][c] > d[a][b] + d[b][c] {
                    return Err(SpaceError::TriangleViolation {
                        a,
                        b,
                        c,
                        ab: d[a][b],
                        bc: d[b][c],
                        ac: d[a][c],
                    });
                }
            }
        }
    }
    Ok(())
}

fn split_summand(p: u64) -> (usize, u64) {
    ((p >> SUMMAND_SHIFT) as usize, p & SUMMAND_MASK)
}

fn join_summand(k: usize, inner: u64) -> u64 {
    debug_assert!(inner <= SUMMAND_MASK);
    ((k as u64) << SUMMAND_SHIFT) | inner
}

fn grid_bits(dim: usize) -> u32 {
    SUMMAND_SHIFT / dim as u32
}

fn zigzag(x: i64) -> u64 {
    ((x << 1) ^ (x >> 63)) as u64
}

fn unzigzag(z: u64) -> i64 {
    ((z >> 1) as i64) ^ -((z & 1) as i64)
}

fn grid_encode(coords: &[i64]) -> Option<u64> {
    let bits = grid_bits(coords.len());
    let mask = (1u64 << bits) - 1;
    let mut out = 0u64;
    for (i, &c) in coords.iter().enumerate() {
        let z = zigzag(c);
        if z > mask {
            return None;
        }
        out |= z << (bits * i as u32);
    }
    Some(out)
}

fn grid_decode(dim: usize, p: u64) -> Option<Vec<i64>> {
    let bits = grid_bits(dim);
    if p >> (bits * dim as u32) != 0 {
        return None;
    }
    let mask = (1u64 << bits) - 1;
    Some((0..dim).map(|i| unzigzag((p >> (bits * i as u32)) & mask)).collect())
}

fn grid_ball(center: &[i64], axis: usize, budget: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    if axis == center.len() {
        out.push(cur.clone());
        return;
    }
    for off in -budget..=budget {
        cur[axis] = center[axis] + off;
        grid_ball(center, axis + 1, budget - off.abs(), cur, out);
    }
    cur[axis] = center[axis];
}
