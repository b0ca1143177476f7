//! Scale-N neighbourhood graphs on ball truncations and their components
//! outside an inner ball.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::space::{PointId, Rational, SpacePresentation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RipsError {
    #[error("scale must be a positive integer")]
    ZeroScale,
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
    #[error("truncation too thin at scale {scale}: R - W = {outer} - {margin} <= r = {inner}")]
    ThinTruncation { scale: u32, outer: Rational, margin: Rational, inner: Rational },
}

/// Outer radius `R`, inner radius `r` and witness margin `W`.
///
/// `r` defaults to `R/4`; `W` defaults to `N + 1` at scale `N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationParams {
    pub outer: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<Rational>,
}

impl TruncationParams {
    pub fn new(outer: Rational) -> Self {
        TruncationParams { outer, inner: None, margin: None }
    }

    pub fn with_inner(mut self, inner: Rational) -> Self {
        self.inner = Some(inner);
        self
    }

    pub fn with_margin(mut self, margin: Rational) -> Self {
        self.margin = Some(margin);
        self
    }

    pub fn inner_radius(&self) -> Rational {
        self.inner.unwrap_or(self.outer / Rational::integer(4))
    }

    pub fn margin_at(&self, scale: u32) -> Rational {
        self.margin.unwrap_or(Rational::integer(i64::from(scale) + 1))
    }

    /// Points with norm strictly above this value form the witness shell.
    pub fn shell_threshold(&self, scale: u32) -> Rational {
        self.outer - self.margin_at(scale)
    }

    pub fn validate(&self) -> Result<(), RipsError> {
        let r = self.inner_radius();
        if r.is_negative() {
            return Err(RipsError::InvalidTruncation(format!("inner radius {r} is negative")));
        }
        if r >= self.outer {
            return Err(RipsError::InvalidTruncation(format!("inner radius {r} is not below outer radius {}", self.outer)));
        }
        if let Some(w) = self.margin {
            if !w.is_positive() {
                return Err(RipsError::InvalidTruncation(format!("witness margin {w} is not positive")));
            }
        }
        Ok(())
    }

    /// Fails when the shell at `scale` does not clear the inner ball.
    pub fn check_thickness(&self, scale: u32) -> Result<(), RipsError> {
        self.validate()?;
        if self.shell_threshold(scale) <= self.inner_radius() {
            return Err(RipsError::ThinTruncation {
                scale,
                outer: self.outer,
                margin: self.margin_at(scale),
                inner: self.inner_radius(),
            });
        }
        Ok(())
    }
}

/// The points of a closed ball about the basepoint, in canonical order.
/// Index 0 is always the basepoint.
#[derive(Debug)]
pub struct Ball {
    space: SpacePresentation,
    radius: Rational,
    points: Vec<PointId>,
    norms: Vec<Rational>,
    index: HashMap<PointId, u32>,
}

impl Ball {
    pub fn new(space: &SpacePresentation, radius: Rational) -> Self {
        let points = space.enumerate_ball(radius);
        let norms = points.iter().map(|&p| space.norm(p).expect("ball point")).collect();
        let index = points.iter().enumerate().map(|(i, &p)| (p, i as u32)).collect();
        Ball { space: space.clone(), radius, points, norms, index }
    }

    pub fn space(&self) -> &SpacePresentation {
        &self.space
    }

    pub fn radius(&self) -> Rational {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[PointId] {
        &self.points
    }

    pub fn point(&self, v: usize) -> PointId {
        self.points[v]
    }

    pub fn norm(&self, v: usize) -> Rational {
        self.norms[v]
    }

    pub fn vertex(&self, p: PointId) -> Option<usize> {
        self.index.get(&p).map(|&v| v as usize)
    }

    pub fn distance(&self, u: usize, v: usize) -> Rational {
        self.space.distance(self.points[u], self.points[v]).expect("ball point")
    }

    /// All pairs `u < v` (by index) with distance at most `scale`, with their
    /// distances. Candidate pairs are cut off by norm difference, which bounds
    /// the distance from below.
    pub fn edges_within(&self, scale: Rational) -> EdgeList {
        let mut order: Vec<u32> = (0..self.len() as u32).collect();
        order.sort_by_key(|&v| self.norms[v as usize]);
        let mut edges = Vec::new();
        for (i, &u) in order.iter().enumerate() {
            let nu = self.norms[u as usize];
            for &v in &order[i + 1..] {
                if self.norms[v as usize] - nu > scale {
                    break;
                }
                let d = self.distance(u as usize, v as usize);
                if d <= scale {
                    edges.push(Edge { a: u.min(v), b: u.max(v), distance: d });
                }
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        EdgeList { scale, edges }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub distance: Rational,
}

/// Edges of a ball up to some maximal scale; lower scales filter it.
#[derive(Clone, Debug)]
pub struct EdgeList {
    scale: Rational,
    edges: Vec<Edge>,
}

impl EdgeList {
    pub fn max_scale(&self) -> Rational {
        self.scale
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }
}

/// The scale-N neighbourhood graph on `ball(R)`.
#[derive(Clone, Debug)]
pub struct RipsGraph {
    ball: Arc<Ball>,
    scale: u32,
    trunc: TruncationParams,
    adj: Vec<Vec<u32>>,
    edge_count: usize,
}

/// Builds the scale-`scale` graph on the truncation of `space`.
pub fn build_rips(space: &SpacePresentation, scale: u32, trunc: TruncationParams) -> Result<RipsGraph, RipsError> {
    if scale == 0 {
        return Err(RipsError::ZeroScale);
    }
    trunc.validate()?;
    let ball = Arc::new(Ball::new(space, trunc.outer));
    let edges = ball.edges_within(Rational::integer(i64::from(scale)));
    RipsGraph::from_edges(ball, &edges, scale, trunc)
}

impl RipsGraph {
    /// Restricts a precomputed edge list to `scale`.
    pub fn from_edges(ball: Arc<Ball>, edges: &EdgeList, scale: u32, trunc: TruncationParams) -> Result<Self, RipsError> {
        if scale == 0 {
            return Err(RipsError::ZeroScale);
        }
        let n = Rational::integer(i64::from(scale));
        assert!(n <= edges.max_scale(), "edge list computed below the requested scale");
        let mut adj = vec![Vec::new(); ball.len()];
        let mut edge_count = 0;
        for e in edges.edges().iter().filter(|e| e.distance <= n) {
            adj[e.a as usize].push(e.b);
            adj[e.b as usize].push(e.a);
            edge_count += 1;
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(RipsGraph { ball, scale, trunc, adj, edge_count })
    }

    pub fn ball(&self) -> &Arc<Ball> {
        &self.ball
    }

    pub fn scale(&self) -> u32 {
        self.scale
    }

    pub fn truncation(&self) -> TruncationParams {
        self.trunc
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().map(|&w| w as usize)
    }

    /// Edges as index pairs `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for (a, list) in self.adj.iter().enumerate() {
            out.extend(list.iter().map(|&b| b as usize).filter(|&b| b > a).map(|b| (a, b)));
        }
        out
    }

    /// Components of the subgraph induced on `{ v : norm(v) > inner }`.
    pub fn components_outside(&self, inner: Rational) -> ComponentPartition {
        let outside: Vec<bool> = (0..self.vertex_count()).map(|v| self.ball.norm(v) > inner).collect();
        let mut dsu = Dsu::new(self.vertex_count());
        for (a, b) in self.edges() {
            if outside[a] && outside[b] {
                dsu.union(a, b);
            }
        }
        let component = (0..self.vertex_count())
            .map(|v| outside[v].then(|| ComponentId(dsu.find(v) as u32)))
            .collect();
        ComponentPartition { inner, component }
    }

    /// Hop distances from the basepoint (vertex 0); `None` when unreachable.
    pub fn hops_from_basepoint(&self) -> Vec<Option<usize>> {
        self.bfs(&[0], |_| true)
    }

    fn bfs(&self, sources: &[usize], allowed: impl Fn(usize) -> bool) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if allowed(s) && dist[s].is_none() {
                dist[s] = Some(0);
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v].unwrap();
            for w in self.neighbors(v) {
                if dist[w].is_none() && allowed(w) {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Lexicographically least shortest path from `from` to any vertex of
    /// `targets`, using only vertices accepted by `allowed`.
    pub fn shortest_path(&self, from: usize, targets: &[usize], allowed: impl Fn(usize) -> bool + Copy) -> Option<Vec<usize>> {
        let to_target = self.bfs(targets, allowed);
        let mut cur = from;
        let mut remaining = to_target[from]?;
        let mut path = vec![cur];
        while remaining > 0 {
            cur = self
                .neighbors(cur)
                .find(|&w| to_target[w] == Some(remaining - 1))
                .expect("bfs layers are consistent");
            remaining -= 1;
            path.push(cur);
        }
        Some(path)
    }

    /// A path between two vertices of the same outside component that stays
    /// outside the inner ball.
    pub fn path_witness(&self, partition: &ComponentPartition, a: usize, b: usize) -> Option<Vec<usize>> {
        let c = partition.component(a)?;
        if partition.component(b) != Some(c) {
            return None;
        }
        self.shortest_path(a, &[b], |v| partition.component(v) == Some(c))
    }

    /// Persistent components: outside components that meet the witness shell
    /// and are reachable from the basepoint at this scale.
    pub fn persistence(&self) -> Result<Persistence, RipsError> {
        self.trunc.check_thickness(self.scale)?;
        let inner = self.trunc.inner_radius();
        let partition = self.components_outside(inner);
        let threshold = self.trunc.shell_threshold(self.scale);
        let hops = self.hops_from_basepoint();
        let mut shell: BTreeMap<ComponentId, Vec<usize>> = BTreeMap::new();
        let mut reached: BTreeMap<ComponentId, bool> = BTreeMap::new();
        for v in 0..self.vertex_count() {
            let Some(c) = partition.component(v) else { continue };
            if self.ball.norm(v) > threshold {
                shell.entry(c).or_default().push(v);
            }
            *reached.entry(c).or_default() |= hops[v].is_some();
        }
        let persistent: BTreeMap<ComponentId, Vec<usize>> = shell
            .into_iter()
            .filter(|(c, _)| reached.get(c).copied().unwrap_or(false))
            .collect();
        Ok(Persistence { partition, shell_threshold: threshold, persistent })
    }

    /// Graphviz rendering with point labels; outside vertices are boxed.
    pub fn to_dot(&self) -> String {
        let space = self.ball.space();
        let inner = self.trunc.inner_radius();
        let mut out = format!("graph rips_{} {{\n", self.scale);
        for v in 0..self.vertex_count() {
            let label = space.label(self.ball.point(v)).expect("ball point");
            let shape = if self.ball.norm(v) > inner { "box" } else { "ellipse" };
            writeln!(out, "  v{v} [label=\"{label}\", shape={shape}];").unwrap();
        }
        for (a, b) in self.edges() {
            writeln!(out, "  v{a} -- v{b};").unwrap();
        }
        out.push_str("}\n");
        out
    }
}

/// Components are named by their least vertex index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentId(pub u32);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentPartition {
    inner: Rational,
    component: Vec<Option<ComponentId>>,
}

impl ComponentPartition {
    pub fn inner_radius(&self) -> Rational {
        self.inner
    }

    /// `None` for vertices inside the inner ball.
    pub fn component(&self, v: usize) -> Option<ComponentId> {
        self.component[v]
    }

    /// Members of each component, in canonical order.
    pub fn components(&self) -> BTreeMap<ComponentId, Vec<usize>> {
        let mut out: BTreeMap<ComponentId, Vec<usize>> = BTreeMap::new();
        for (v, c) in self.component.iter().enumerate() {
            if let Some(c) = c {
                out.entry(*c).or_default().push(v);
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.components().len()
    }

    pub fn is_empty(&self) -> bool {
        self.component.iter().all(Option::is_none)
    }
}

#[derive(Clone, Debug)]
pub struct Persistence {
    pub partition: ComponentPartition,
    pub shell_threshold: Rational,
    /// Persistent components with their shell vertices.
    pub persistent: BTreeMap<ComponentId, Vec<usize>>,
}

impl Persistence {
    pub fn ids(&self) -> Vec<ComponentId> {
        self.persistent.keys().copied().collect()
    }

    pub fn is_persistent(&self, c: ComponentId) -> bool {
        self.persistent.contains_key(&c)
    }
}

/// Persistent components of the scale-`scale` graph on the truncation.
pub fn persistent_components(space: &SpacePresentation, scale: u32, trunc: TruncationParams) -> Result<Persistence, RipsError> {
    build_rips(space, scale, trunc)?.persistence()
}

/// Union-find whose roots are always the least member.
struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}
