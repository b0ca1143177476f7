//! Finite N-sequences, the subsequence relation, and an exhaustive oracle for
//! the chain equivalence on small truncations.
//!
//! The oracle works on walks from the basepoint (points may repeat, but no
//! point is immediately repeated) that end in the witness shell. Two walks are
//! related when one embeds into the other so that the last point of the
//! shorter one lands in the longer one's terminal excursion, the maximal
//! suffix outside the inner ball. The oracle's classes are the connected
//! components of this relation. They are computed from deletions of single
//! contiguous blocks, which connect exactly the same walks as the full
//! relation.

use std::collections::{HashMap, VecDeque};

use petgraph::unionfind::UnionFind;
use serde::Serialize;

use crate::rips::{Ball, TruncationParams};
use crate::sigma::SigmaLevel;
use crate::space::{PointId, Rational, SpaceError, SpacePresentation};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeqError {
    #[error("a sequence must be nonempty")]
    Empty,
    #[error("a sequence must start at the basepoint")]
    NotBased,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("oracle refused: {vertices} vertices exceed the limit of {limit}")]
    TooManyVertices { vertices: usize, limit: usize },
    #[error("oracle refused: more than {limit} walks enumerated at length cap {length_cap}")]
    TooManyWalks { limit: usize, length_cap: usize },
    #[error("oracle refused: class count did not settle below length cap {0}")]
    NoConvergence(usize),
}

/// A nonempty finite sequence of points starting at the basepoint.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FinSeq(Vec<PointId>);

impl FinSeq {
    pub fn new(space: &SpacePresentation, points: Vec<PointId>) -> Result<Self, SeqError> {
        match points.first() {
            None => Err(SeqError::Empty),
            Some(&p) if p != space.basepoint() => Err(SeqError::NotBased),
            Some(_) => {
                for &p in &points {
                    if !space.contains(p) {
                        return Err(SpaceError::UnknownPoint(p).into());
                    }
                }
                Ok(FinSeq(points))
            }
        }
    }

    pub fn points(&self) -> &[PointId] {
        &self.0
    }
}

/// Whether every pair of consecutive terms is at distance at most `scale`.
pub fn is_n_sequence(s: &FinSeq, scale: u32, space: &SpacePresentation) -> bool {
    let n = Rational::integer(i64::from(scale));
    s.0.windows(2).all(|w| space.distance(w[0], w[1]).is_ok_and(|d| d <= n))
}

/// Whether `s` is obtained from `t` by deleting terms.
pub fn is_subsequence<T: PartialEq>(s: &[T], t: &[T]) -> bool {
    let mut rest = t.iter();
    s.iter().all(|x| rest.any(|y| y == x))
}

/// Start of the terminal excursion of `t`: the least index from which every
/// term lies outside the inner ball.
pub fn terminal_excursion_start<T>(t: &[T], outside: impl Fn(&T) -> bool) -> usize {
    t.len() - t.iter().rev().take_while(|x| outside(x)).count()
}

/// Whether `s` embeds into `t` with its last term inside `t`'s terminal
/// excursion.
pub fn tail_related<T: PartialEq>(s: &[T], t: &[T], outside: impl Fn(&T) -> bool) -> bool {
    let Some((last, head)) = s.split_last() else { return false };
    let mut pos = 0;
    for x in head {
        match t[pos..].iter().position(|y| y == x) {
            Some(k) => pos += k + 1,
            None => return false,
        }
    }
    let from = pos.max(terminal_excursion_start(t, outside));
    t.get(from..).is_some_and(|rest| rest.contains(last))
}

/// Refusal thresholds for the exhaustive oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleGuard {
    pub max_vertices: usize,
    pub max_walks: usize,
    /// Largest length cap tried while waiting for the class count to settle.
    pub max_length: usize,
}

impl Default for OracleGuard {
    fn default() -> Self {
        OracleGuard { max_vertices: 16, max_walks: 2_000_000, max_length: 40 }
    }
}

/// A truncation small enough for exhaustive enumeration. Vertex 0 is the
/// basepoint.
#[derive(Clone, Debug)]
pub struct OracleModel {
    points: Vec<PointId>,
    dist: Vec<Vec<Rational>>,
    norms: Vec<Rational>,
    trunc: TruncationParams,
    guard: OracleGuard,
}

impl OracleModel {
    pub fn from_truncation(space: &SpacePresentation, trunc: TruncationParams, guard: OracleGuard) -> Result<Self, SeqError> {
        let ball = Ball::new(space, trunc.outer);
        if ball.len() > guard.max_vertices {
            return Err(SeqError::TooManyVertices { vertices: ball.len(), limit: guard.max_vertices });
        }
        let n = ball.len();
        let dist = (0..n).map(|u| (0..n).map(|v| ball.distance(u, v)).collect()).collect();
        let norms = (0..n).map(|v| ball.norm(v)).collect();
        Ok(OracleModel { points: ball.points().to_vec(), dist, norms, trunc, guard })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, v: usize) -> PointId {
        self.points[v]
    }

    fn scale_graph(&self, scale: u32) -> Vec<Vec<u8>> {
        let n = Rational::integer(i64::from(scale));
        (0..self.len())
            .map(|u| (0..self.len()).filter(|&v| v != u && self.dist[u][v] <= n).map(|v| v as u8).collect())
            .collect()
    }

    fn shell(&self, scale: u32) -> Vec<bool> {
        let t = self.trunc.shell_threshold(scale);
        self.norms.iter().map(|&d| d > t).collect()
    }

    fn outside(&self) -> Vec<bool> {
        let r = self.trunc.inner_radius();
        self.norms.iter().map(|&d| d > r).collect()
    }
}

/// The oracle's partition of shell-reaching walks.
#[derive(Clone, Debug)]
pub struct OraclePartition {
    pub scale: u32,
    pub length_cap: usize,
    /// Class counts at the length caps tried, in order.
    pub history: Vec<usize>,
    walks: Vec<Vec<u8>>,
    class_of: Vec<usize>,
    class_count: usize,
    points: Vec<PointId>,
    outside: Vec<bool>,
    scale_graph: Vec<Vec<u8>>,
    shell: Vec<bool>,
}

impl OraclePartition {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn walk_count(&self) -> usize {
        self.walks.len()
    }

    pub fn walk(&self, k: usize) -> Vec<PointId> {
        self.walks[k].iter().map(|&v| self.points[v as usize]).collect()
    }

    pub fn walks(&self) -> impl Iterator<Item = Vec<PointId>> + '_ {
        (0..self.walks.len()).map(|k| self.walk(k))
    }

    pub fn class_of(&self, k: usize) -> usize {
        self.class_of[k]
    }

    pub fn index_of(&self, walk: &[PointId]) -> Option<usize> {
        let pos: HashMap<PointId, u8> = self.points.iter().enumerate().map(|(i, &p)| (p, i as u8)).collect();
        let w: Vec<u8> = walk.iter().map(|p| pos.get(p).copied()).collect::<Option<_>>()?;
        self.walks.iter().position(|x| *x == w)
    }

    /// A chain `s = w_0, w_1, ..., w_m = t` in which each consecutive pair
    /// differs by one block deletion, so one is a subsequence of the other.
    pub fn chain_witness(&self, s: usize, t: usize) -> Option<Vec<Vec<PointId>>> {
        if self.class_of[s] != self.class_of[t] {
            return None;
        }
        let index: HashMap<&[u8], usize> = self.walks.iter().enumerate().map(|(i, w)| (w.as_slice(), i)).collect();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.walks.len()];
        for (k, w) in self.walks.iter().enumerate() {
            for del in block_deletions(w, &self.outside, &self.scale_graph, &self.shell) {
                let d = index[del.as_slice()];
                adj[k].push(d);
                adj[d].push(k);
            }
        }
        let mut prev = vec![usize::MAX; self.walks.len()];
        prev[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            if x == t {
                break;
            }
            for &y in &adj[x] {
                if prev[y] == usize::MAX {
                    prev[y] = x;
                    queue.push_back(y);
                }
            }
        }
        let mut chain = vec![t];
        while *chain.last().unwrap() != s {
            chain.push(prev[*chain.last().unwrap()]);
        }
        chain.reverse();
        Some(chain.into_iter().map(|k| self.walk(k)).collect())
    }
}

/// Single contiguous block deletions of `w` that stay in the walk universe
/// and keep the deleted walk tail-related to `w`.
fn block_deletions(w: &[u8], outside: &[bool], graph: &[Vec<u8>], shell: &[bool]) -> Vec<Vec<u8>> {
    let k = w.len();
    let lam = terminal_excursion_start(w, |&v| outside[v as usize]);
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..=k {
            if i == 0 && (j == k || w[j] != 0) {
                continue;
            }
            if j == k {
                // the new last term must lie in the old terminal excursion, in the shell
                if i - 1 < lam || !shell[w[i - 1] as usize] {
                    continue;
                }
            } else if i > 0 {
                let (a, b) = (w[i - 1], w[j]);
                if a == b || !graph[a as usize].contains(&b) {
                    continue;
                }
            }
            let mut s = Vec::with_capacity(k - (j - i));
            s.extend_from_slice(&w[..i]);
            s.extend_from_slice(&w[j..]);
            out.push(s);
        }
    }
    out
}

/// Exhaustive classes of shell-reaching N-walks with at most `length_cap` points.
pub fn oracle_classes(model: &OracleModel, scale: u32, length_cap: usize) -> Result<OraclePartition, SeqError> {
    let graph = model.scale_graph(scale);
    let shell = model.shell(scale);
    let outside = model.outside();
    let walks = enumerate_walks(&graph, &shell, length_cap, model.guard.max_walks)?;
    let index: HashMap<&[u8], usize> = walks.iter().enumerate().map(|(i, w)| (w.as_slice(), i)).collect();
    let mut uf = UnionFind::<usize>::new(walks.len());
    for (k, w) in walks.iter().enumerate() {
        for del in block_deletions(w, &outside, &graph, &shell) {
            uf.union(k, index[del.as_slice()]);
        }
    }
    let mut root_class = HashMap::new();
    let class_of: Vec<usize> = (0..walks.len())
        .map(|k| {
            let next = root_class.len();
            *root_class.entry(uf.find(k)).or_insert(next)
        })
        .collect();
    let class_count = root_class.len();
    drop(index);
    Ok(OraclePartition {
        scale,
        length_cap,
        history: vec![class_count],
        walks,
        class_of,
        class_count,
        points: model.points.clone(),
        outside,
        scale_graph: graph,
        shell,
    })
}

/// Runs the oracle from `L = |V|` upward until the class count is unchanged
/// over two successive increments of the length cap.
pub fn oracle_classes_converged(model: &OracleModel, scale: u32) -> Result<OraclePartition, SeqError> {
    let mut history = Vec::new();
    let mut length_cap = model.len().max(1);
    loop {
        if length_cap > model.guard.max_length {
            return Err(SeqError::NoConvergence(model.guard.max_length));
        }
        let mut partition = oracle_classes(model, scale, length_cap)?;
        history.push(partition.class_count);
        let k = history.len();
        if k >= 3 && history[k - 1] == history[k - 2] && history[k - 2] == history[k - 3] {
            partition.history = history;
            return Ok(partition);
        }
        length_cap += 1;
    }
}

fn enumerate_walks(graph: &[Vec<u8>], shell: &[bool], length_cap: usize, limit: usize) -> Result<Vec<Vec<u8>>, SeqError> {
    let n = graph.len();
    // hop distance to the shell, for pruning prefixes that cannot finish in time
    let mut hops = vec![usize::MAX; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| shell[v]).collect();
    for &v in &queue {
        hops[v] = 0;
    }
    while let Some(v) = queue.pop_front() {
        for &u in &graph[v] {
            if hops[u as usize] == usize::MAX {
                hops[u as usize] = hops[v] + 1;
                queue.push_back(u as usize);
            }
        }
    }
    let mut walks = Vec::new();
    if n == 0 {
        return Ok(walks);
    }
    let mut visited = 0usize;
    // depth-first, children in increasing vertex order
    let mut walk = vec![0u8];
    let mut next_child = vec![0usize];
    let admissible = |w: &[u8]| {
        let last = *w.last().unwrap() as usize;
        hops[last] != usize::MAX && w.len() + hops[last] <= length_cap
    };
    if !admissible(&walk) {
        return Ok(walks);
    }
    visited += 1;
    if shell[0] {
        walks.push(walk.clone());
    }
    while let Some(child) = next_child.last_mut() {
        let last = *walk.last().unwrap() as usize;
        if walk.len() == length_cap || *child >= graph[last].len() {
            walk.pop();
            next_child.pop();
            continue;
        }
        let u = graph[last][*child];
        *child += 1;
        walk.push(u);
        if !admissible(&walk) {
            walk.pop();
            continue;
        }
        visited += 1;
        if visited > limit {
            return Err(SeqError::TooManyWalks { limit, length_cap });
        }
        if shell[u as usize] {
            walks.push(walk.clone());
        }
        next_child.push(0);
    }
    Ok(walks)
}

/// Comparison of the oracle's partition with a σ_N level on the same truncation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Agreement {
    pub scale: u32,
    pub oracle_classes: usize,
    pub sigma_classes: usize,
    pub walks: usize,
    pub length_cap: usize,
    /// Oracle classes and σ classes correspond one-to-one through the walks.
    pub partition_agrees: bool,
}

impl Agreement {
    pub fn agrees(&self) -> bool {
        self.oracle_classes == self.sigma_classes && self.partition_agrees
    }
}

pub fn compare_with_sigma(partition: &OraclePartition, level: &SigmaLevel) -> Agreement {
    let mut oracle_to_sigma: HashMap<usize, usize> = HashMap::new();
    let mut sigma_to_oracle: HashMap<usize, usize> = HashMap::new();
    let mut consistent = true;
    for k in 0..partition.walk_count() {
        let o = partition.class_of(k);
        let Ok(s) = level.classify_path(&partition.walk(k)) else {
            consistent = false;
            break;
        };
        if *oracle_to_sigma.entry(o).or_insert(s) != s || *sigma_to_oracle.entry(s).or_insert(o) != o {
            consistent = false;
            break;
        }
    }
    Agreement {
        scale: partition.scale,
        oracle_classes: partition.class_count(),
        sigma_classes: level.len(),
        walks: partition.walk_count(),
        length_cap: partition.length_cap,
        partition_agrees: consistent && oracle_to_sigma.len() == level.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::metric_wedge;

    fn int(n: i64) -> Rational {
        Rational::integer(n)
    }

    fn model(space: &SpacePresentation, outer: i64, inner: i64) -> OracleModel {
        let trunc = TruncationParams::new(int(outer)).with_inner(int(inner));
        OracleModel::from_truncation(space, trunc, OracleGuard::default()).unwrap()
    }

    #[test]
    fn n_sequences() {
        let n = SpacePresentation::integer_ray();
        let p = |t: i64| n.point(&crate::space::PointLabel::Coord(int(t))).unwrap();
        let s = FinSeq::new(&n, vec![p(0), p(1), p(2), p(3)]).unwrap();
        assert!(is_n_sequence(&s, 1, &n));
        let d = SpacePresentation::discrete_open_book(Some(3)).unwrap();
        let jump = FinSeq::new(&d, vec![d.basepoint(), d.point(&"2:2".parse().unwrap()).unwrap()]).unwrap();
        assert!(!is_n_sequence(&jump, 1, &d));
        assert!(matches!(FinSeq::new(&n, vec![p(1)]), Err(SeqError::NotBased)));
    }

    #[test]
    fn subsequences() {
        assert!(is_subsequence(&['a', 'c'], &['a', 'b', 'c']));
        assert!(!is_subsequence(&['c', 'a'], &['a', 'b', 'c']));
        assert!(is_subsequence::<char>(&[], &['a']));
    }

    #[test]
    fn interleaving_is_a_common_supersequence() {
        let xs = [0, 1, 2, 3];
        let gf = [10, 11, 12, 13];
        let interleaved: Vec<i32> = xs.iter().zip(&gf).flat_map(|(&x, &y)| [x, y, x]).collect();
        assert!(is_subsequence(&xs, &interleaved));
        assert!(is_subsequence(&gf, &interleaved));
    }

    #[test]
    fn tail_relation_needs_anchor() {
        let outside = |x: &i32| *x >= 10;
        assert!(tail_related(&[0, 11], &[0, 1, 11, 12], outside));
        // going back to the basepoint and out another way breaks the anchor
        assert!(!tail_related(&[0, 11], &[0, 11, 0, 21], outside));
        assert!(is_subsequence(&[0, 11], &[0, 11, 0, 21]));
    }

    #[test]
    fn two_short_rays() {
        let ray = SpacePresentation::point_cloud(
            vec![vec![int(0), int(1), int(2), int(3)], vec![int(1), int(0), int(1), int(2)], vec![int(2), int(1), int(0), int(1)], vec![
                int(3),
                int(2),
                int(1),
                int(0),
            ]],
            0,
        )
        .unwrap();
        let wedge = metric_wedge(vec![ray.clone(), ray]).unwrap();
        let m = model(&wedge, 3, 0);
        let p = oracle_classes_converged(&m, 1).unwrap();
        assert_eq!(p.class_count(), 2);
        let single = metric_wedge(vec![SpacePresentation::integer_ray()]).unwrap();
        assert_eq!(oracle_classes_converged(&model(&single, 4, 1), 1).unwrap().class_count(), 1);
    }

    #[test]
    fn spacing_two_ray_contributes_nothing_at_scale_one() {
        let d = SpacePresentation::discrete_open_book(Some(2)).unwrap();
        let m = model(&d, 4, 1);
        let p = oracle_classes_converged(&m, 1).unwrap();
        assert_eq!(p.class_count(), 1);
        assert!(p.walks().all(|w| d.label(*w.last().unwrap()).unwrap().to_string().starts_with("1:")));
    }

    #[test]
    fn guard_refuses() {
        let b = SpacePresentation::open_book(3, Rational::new(1, 2)).unwrap();
        let trunc = TruncationParams::new(int(10));
        let err = OracleModel::from_truncation(&b, trunc, OracleGuard::default()).unwrap_err();
        assert!(matches!(err, SeqError::TooManyVertices { .. }));
        let tiny = OracleGuard { max_walks: 3, ..OracleGuard::default() };
        let m = OracleModel::from_truncation(&SpacePresentation::integer_ray(), TruncationParams::new(int(6)), tiny).unwrap();
        assert!(matches!(oracle_classes(&m, 2, 7), Err(SeqError::TooManyWalks { .. })));
    }

    #[test]
    fn chain_witness_links_walks_of_one_class() {
        let w = metric_wedge(vec![SpacePresentation::integer_ray(); 2]).unwrap();
        let m = model(&w, 4, 1);
        let p = oracle_classes_converged(&m, 1).unwrap();
        let (s, t) = (0..p.walk_count())
            .flat_map(|s| (0..p.walk_count()).map(move |t| (s, t)))
            .find(|&(s, t)| s != t && p.class_of(s) == p.class_of(t) && p.walk(s).len() != p.walk(t).len())
            .unwrap();
        let chain = p.chain_witness(s, t).unwrap();
        assert_eq!(chain.first().unwrap(), &p.walk(s));
        assert_eq!(chain.last().unwrap(), &p.walk(t));
        for pair in chain.windows(2) {
            assert!(is_subsequence(&pair[0], &pair[1]) || is_subsequence(&pair[1], &pair[0]));
        }
    }
}
