use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::{
    compose_bonding, BondingDescriptor, Cardinality, ConcreteSequence, DirSeqError, DirectSequence, Morphism,
    SetFunction, SizeFormula,
};

/// One class of a direct limit, named by its earliest member.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LimitClass {
    pub level: u32,
    pub element: usize,
    pub name: String,
}

/// The direct limit of a sequence. For concrete windows the classes are
/// listed; for symbolic sequences only the cardinality is known.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LimitSet {
    pub cardinality: Cardinality,
    pub classes: Vec<LimitClass>,
    #[serde(skip)]
    membership: Option<Membership>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Membership {
    start: u32,
    class_of: Vec<Vec<usize>>,
}

impl LimitSet {
    /// Class of element `x` at level `i`, for concrete limits.
    pub fn class_of(&self, i: u32, x: usize) -> Option<usize> {
        let m = self.membership.as_ref()?;
        m.class_of.get(i.checked_sub(m.start)? as usize)?.get(x).copied()
    }

    pub fn len(&self) -> Option<usize> {
        self.membership.as_ref().map(|_| self.classes.len())
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality == Cardinality::Finite(0)
    }
}

/// Quotient of the disjoint union of the levels by `x_i ~ φ_i(x_i)`.
pub fn direct_limit(seq: &DirectSequence) -> Result<LimitSet, DirSeqError> {
    match seq {
        DirectSequence::Concrete(c) => Ok(concrete_limit(c)),
        DirectSequence::Symbolic(s) => {
            let cardinality = match (&s.bonding, s.size) {
                (BondingDescriptor::Identity, size) => size.eval(s.start),
                (BondingDescriptor::InclusionOfPrefix, size) => size.supremum(s.start).0,
                (BondingDescriptor::Table(_), _) => {
                    return Err(DirSeqError::Unsupported(
                        "direct limits of table-described symbolic sequences are not computed; list them as a concrete window".into(),
                    ))
                }
            };
            Ok(LimitSet { cardinality, classes: Vec::new(), membership: None })
        }
    }
}

fn concrete_limit(c: &ConcreteSequence) -> LimitSet {
    let sizes = c.sizes();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let total: usize = sizes.iter().sum();
    let mut uf = UnionFind::<usize>::new(total);
    for (k, b) in c.bondings().iter().enumerate() {
        for (x, y) in b.pairs() {
            uf.union(offsets[k] + x, offsets[k + 1] + y);
        }
    }
    let mut root_class = vec![usize::MAX; total];
    let mut classes = Vec::new();
    let mut class_of = Vec::with_capacity(sizes.len());
    for (k, level) in c.levels().enumerate() {
        let names = c.names(level).expect("level in window");
        let mut row = Vec::with_capacity(sizes[k]);
        for (x, name) in names.iter().enumerate() {
            let root = uf.find(offsets[k] + x);
            if root_class[root] == usize::MAX {
                root_class[root] = classes.len();
                classes.push(LimitClass { level, element: x, name: name.clone() });
            }
            row.push(root_class[root]);
        }
        class_of.push(row);
    }
    LimitSet {
        cardinality: classes.len().into(),
        classes,
        membership: Some(Membership { start: c.start(), class_of }),
    }
}

/// `[x_i] ↦ [f_i(x_i)]` between the limits of two concrete windows. Every
/// member of every class in the morphism's window is checked to land in the
/// same target class.
pub fn induced_limit_map(m: &Morphism, a: &ConcreteSequence, b: &ConcreteSequence) -> Result<SetFunction, DirSeqError> {
    let la = concrete_limit(a);
    let lb = concrete_limit(b);
    let mut image: Vec<Option<usize>> = vec![None; la.classes.len()];
    for i in m.levels() {
        let u = m.index(i).unwrap();
        let f = m.map(i).unwrap();
        if !a.contains_level(i) {
            return Err(DirSeqError::OutOfWindow { index: i, start: a.start(), end: a.end() });
        }
        if !b.contains_level(u) {
            return Err(DirSeqError::OutOfWindow { index: u, start: b.start(), end: b.end() });
        }
        for x in 0..f.domain() {
            let source = la.class_of(i, x).expect("element in window");
            let target = lb.class_of(u, f.apply(x)).ok_or_else(|| {
                DirSeqError::ShapeMismatch(format!("f_{i}({x}) is not an element of level {u}"))
            })?;
            match image[source] {
                None => image[source] = Some(target),
                Some(t) if t == target => {}
                Some(t) => {
                    return Err(DirSeqError::NotWellDefined(format!(
                        "limit class {source} is sent to both {t} and {target} (via level {i}, element {x})"
                    )))
                }
            }
        }
    }
    let table = image
        .into_iter()
        .enumerate()
        .map(|(k, t)| {
            t.ok_or_else(|| DirSeqError::NotWellDefined(format!("limit class {k} has no member in the morphism's window")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    SetFunction::new(table, lb.classes.len())
}

/// Outcome of the cardinality obstruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ObstructionVerdict {
    /// Level `level` of the first sequence keeps `image` elements in all its
    /// forward images, and every level of the second sequence is smaller.
    NotEquivalent { level: u32, image: Cardinality, reason: String },
    Inconclusive,
}

impl ObstructionVerdict {
    pub fn fires(&self) -> bool {
        matches!(self, ObstructionVerdict::NotEquivalent { .. })
    }
}

/// Bound on the level sizes of a sequence.
enum Bound {
    /// The largest level has this size.
    Max(Cardinality),
    /// Every level is finite, with no finite bound.
    FiniteUnbounded,
}

impl Bound {
    fn all_below(&self, c: Cardinality) -> bool {
        match self {
            Bound::Max(m) => *m < c,
            Bound::FiniteUnbounded => c == Cardinality::Omega,
        }
    }
}

fn bound_of(seq: &DirectSequence) -> Result<Bound, DirSeqError> {
    Ok(match seq {
        DirectSequence::Concrete(c) => Bound::Max(c.sizes().into_iter().max().unwrap_or(0).into()),
        DirectSequence::Symbolic(s) => match (&s.bonding, s.end()) {
            (BondingDescriptor::Table(_), Some(end)) => bound_of(&DirectSequence::Concrete(s.window(s.start, end)?))?,
            _ => match s.size.supremum(s.start) {
                (c, true) => Bound::Max(c),
                (_, false) => Bound::FiniteUnbounded,
            },
        },
    })
}

/// Fires when some level of `a` has more surviving elements, in every later
/// level, than any level of `b` holds. An equivalence would factor those
/// bondings through a level of `b`, so `a` and `b` cannot be equivalent.
///
/// Concrete windows are read as constant beyond their last level.
pub fn cardinality_obstruction(a: &DirectSequence, b: &DirectSequence) -> ObstructionVerdict {
    let Ok(bound) = bound_of(b) else { return ObstructionVerdict::Inconclusive };
    let describe = |level: u32, image: Cardinality| ObstructionVerdict::NotEquivalent {
        level,
        image,
        reason: match &bound {
            Bound::Max(m) => format!("level {level} keeps {image} elements in every later level; the other sequence never exceeds {m}"),
            Bound::FiniteUnbounded => {
                format!("level {level} keeps {image} elements in every later level; every level of the other sequence is finite")
            }
        },
    };
    match a {
        DirectSequence::Concrete(c) => {
            for level in c.levels() {
                let Ok(phi) = c.compose(level, c.end()) else { continue };
                let image = Cardinality::from(phi.image_size());
                if bound.all_below(image) {
                    return describe(level, image);
                }
            }
            ObstructionVerdict::Inconclusive
        }
        DirectSequence::Symbolic(s) => match (&s.bonding, s.end()) {
            (BondingDescriptor::Table(_), Some(end)) => match s.window(s.start, end) {
                Ok(w) => cardinality_obstruction(&DirectSequence::Concrete(w), b),
                Err(_) => ObstructionVerdict::Inconclusive,
            },
            // identity and prefix inclusions are injective, so the image size is the level size
            _ => match first_level_exceeding(s.start, s.size, &bound) {
                Some(level) => {
                    let image = compose_bonding(a, level, level).map(|m| m.image_size()).unwrap_or(s.size.eval(level));
                    describe(level, image)
                }
                None => ObstructionVerdict::Inconclusive,
            },
        },
    }
}

fn first_level_exceeding(start: u32, size: SizeFormula, bound: &Bound) -> Option<u32> {
    match (size, bound) {
        (SizeFormula::Linear { slope, offset }, Bound::Max(Cardinality::Finite(m))) if slope > 0 => {
            // least N >= start with slope * N + offset > m
            let need = (*m as i64 + 1 - offset).max(0) as u64;
            let n = need.div_ceil(slope).max(u64::from(start));
            u32::try_from(n).ok()
        }
        (size, bound) => bound.all_below(size.eval(start)).then_some(start),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirseq::SymbolicSequence;

    fn sym(size: &str, bonding: BondingDescriptor) -> DirectSequence {
        DirectSequence::Symbolic(SymbolicSequence::new(1, size.parse().unwrap(), bonding).unwrap())
    }

    fn d_window(n: usize) -> ConcreteSequence {
        let sizes: Vec<usize> = (1..=n).collect();
        let bondings = (1..n).map(|k| SetFunction::prefix_inclusion(k, k + 1)).collect();
        ConcreteSequence::from_sizes(1, &sizes, bondings).unwrap()
    }

    #[test]
    fn constant_identity_limit() {
        let c = ConcreteSequence::from_sizes(1, &[3, 3, 3], vec![SetFunction::identity(3); 2]).unwrap();
        let l = direct_limit(&DirectSequence::Concrete(c)).unwrap();
        assert_eq!(l.cardinality, Cardinality::Finite(3));
        assert!(l.classes.iter().all(|k| k.level == 1));
    }

    #[test]
    fn growing_window_limit() {
        let l = direct_limit(&DirectSequence::Concrete(d_window(10))).unwrap();
        assert_eq!(l.len(), Some(10));
        for (k, class) in l.classes.iter().enumerate() {
            assert_eq!((class.level, class.element), (k as u32 + 1, k));
        }
    }

    #[test]
    fn symbolic_limits() {
        let d = sym("N", BondingDescriptor::InclusionOfPrefix);
        assert_eq!(direct_limit(&d).unwrap().cardinality, Cardinality::Omega);
        let b = sym("omega", BondingDescriptor::Identity);
        assert_eq!(direct_limit(&b).unwrap().cardinality, Cardinality::Omega);
        let t = sym("2", BondingDescriptor::Table(vec![vec![0, 0]]));
        assert!(matches!(direct_limit(&t), Err(DirSeqError::Unsupported(_))));
    }

    #[test]
    fn obstruction_separates_b_from_d() {
        let b = sym("omega", BondingDescriptor::Identity);
        let d = sym("N", BondingDescriptor::InclusionOfPrefix);
        assert!(cardinality_obstruction(&b, &d).fires());
        assert!(!cardinality_obstruction(&d, &b).fires());
        assert!(!cardinality_obstruction(&b, &b).fires());
        assert!(!cardinality_obstruction(&d, &d).fires());
    }

    #[test]
    fn collapsing_bondings_never_fire() {
        let sizes = [5, 4, 1];
        let a = ConcreteSequence::from_sizes(
            1,
            &sizes,
            vec![SetFunction::new(vec![0, 1, 2, 3, 0], 4).unwrap(), SetFunction::new(vec![0; 4], 1).unwrap()],
        )
        .unwrap();
        let any_b = ConcreteSequence::from_sizes(1, &[1], vec![]).unwrap();
        assert!(!cardinality_obstruction(&DirectSequence::Concrete(a), &DirectSequence::Concrete(any_b)).fires());
    }

    #[test]
    fn linear_against_bounded_window() {
        let d = sym("N", BondingDescriptor::InclusionOfPrefix);
        let small = DirectSequence::Concrete(ConcreteSequence::from_sizes(1, &[3, 3], vec![SetFunction::identity(3)]).unwrap());
        match cardinality_obstruction(&d, &small) {
            ObstructionVerdict::NotEquivalent { level, image, .. } => {
                assert_eq!((level, image), (4, Cardinality::Finite(4)));
            }
            other => panic!("expected obstruction, got {other:?}"),
        }
    }

    #[test]
    fn induced_map_of_identity() {
        let d = d_window(5);
        let f = Morphism::identity(&d);
        assert_eq!(induced_limit_map(&f, &d, &d).unwrap(), SetFunction::identity(5));
    }
}
