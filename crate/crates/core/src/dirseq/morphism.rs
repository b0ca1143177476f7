use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{ConcreteSequence, DirSeqError, SetFunction};

/// A morphism of direct sequences: an index map `u` and functions
/// `f_i : X_i -> Y_{u(i)}` for `i` in the morphism's window.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Morphism {
    start: u32,
    index_map: Vec<u32>,
    maps: Vec<SetFunction>,
}

/// File form of a morphism; codomain sizes come from the target sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismSpec {
    #[serde(default = "one")]
    pub start: u32,
    pub index_map: Vec<u32>,
    pub maps: Vec<Vec<usize>>,
}

fn one() -> u32 {
    1
}

impl Morphism {
    pub fn new(start: u32, index_map: Vec<u32>, maps: Vec<SetFunction>) -> Result<Self, DirSeqError> {
        if index_map.is_empty() || index_map.len() != maps.len() {
            return Err(DirSeqError::ShapeMismatch(format!(
                "index map has {} entries for {} level functions",
                index_map.len(),
                maps.len()
            )));
        }
        Ok(Morphism { start, index_map, maps })
    }

    /// `u(i) = i`, `f_i = id` on the whole window.
    pub fn identity(seq: &ConcreteSequence) -> Self {
        Morphism {
            start: seq.start(),
            index_map: seq.levels().collect(),
            maps: seq.sizes().into_iter().map(SetFunction::identity).collect(),
        }
    }

    /// `u(i) = j(i)`, `f_i = φ_{i j(i)}` for a target index choice `j(i) >= i`.
    pub fn from_bondings(seq: &ConcreteSequence, target: impl Fn(u32) -> u32) -> Result<Self, DirSeqError> {
        let mut index_map = Vec::new();
        let mut maps = Vec::new();
        for i in seq.levels() {
            let j = target(i).min(seq.end());
            index_map.push(j);
            maps.push(seq.compose(i, j.max(i))?);
        }
        Morphism::new(seq.start(), index_map, maps)
    }

    pub fn from_spec(spec: &MorphismSpec, target: &ConcreteSequence) -> Result<Self, DirSeqError> {
        if spec.index_map.len() != spec.maps.len() {
            return Err(DirSeqError::ShapeMismatch("index_map and maps differ in length".into()));
        }
        let maps = spec
            .index_map
            .iter()
            .zip(&spec.maps)
            .map(|(&u, table)| SetFunction::new(table.clone(), target.size(u)?))
            .collect::<Result<Vec<_>, _>>()?;
        Morphism::new(spec.start, spec.index_map.clone(), maps)
    }

    pub fn to_spec(&self) -> MorphismSpec {
        MorphismSpec {
            start: self.start,
            index_map: self.index_map.clone(),
            maps: self.maps.iter().map(|f| f.table().to_vec()).collect(),
        }
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.start + self.index_map.len() as u32 - 1
    }

    pub fn levels(&self) -> RangeInclusive<u32> {
        self.start..=self.end()
    }

    pub fn index(&self, i: u32) -> Option<u32> {
        i.checked_sub(self.start).and_then(|k| self.index_map.get(k as usize)).copied()
    }

    pub fn map(&self, i: u32) -> Option<&SetFunction> {
        i.checked_sub(self.start).and_then(|k| self.maps.get(k as usize))
    }

    pub fn index_map(&self) -> &[u32] {
        &self.index_map
    }

    /// `(g ∘ f)_i = g_{u(i)} ∘ f_i`, on the levels where `g` is defined at `u(i)`.
    pub fn then(&self, g: &Morphism) -> Result<Morphism, DirSeqError> {
        let mut index_map = Vec::new();
        let mut maps = Vec::new();
        for i in self.levels() {
            let u = self.index(i).unwrap();
            let (Some(v), Some(gu)) = (g.index(u), g.map(u)) else { break };
            index_map.push(v);
            maps.push(self.map(i).unwrap().then(gu)?);
        }
        if index_map.is_empty() {
            return Err(DirSeqError::ShapeMismatch("composite is empty: second morphism misses every image level".into()));
        }
        Morphism::new(self.start, index_map, maps)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommutationViolation {
    pub i: u32,
    pub j: u32,
    pub element: usize,
    /// Common target level `max(u(i), u(j))`.
    pub level: u32,
    /// `ψ_{u(i),k}(f_i(x))`.
    pub via_i: usize,
    /// `ψ_{u(j),k}(f_j(φ_{ij}(x)))`.
    pub via_j: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct MorphismReport {
    pub shape_errors: Vec<String>,
    pub violations: Vec<CommutationViolation>,
    /// Source levels whose image level lies outside the target window.
    pub unchecked: Vec<u32>,
}

impl MorphismReport {
    pub fn passes(&self) -> bool {
        self.shape_errors.is_empty() && self.violations.is_empty()
    }
}

/// Checks `ψ_{u(i),k} ∘ f_i = ψ_{u(j),k} ∘ f_j ∘ φ_{ij}` with `k = max(u(i), u(j))`
/// for every `i < j` in the morphism's window.
pub fn check_morphism(m: &Morphism, source: &ConcreteSequence, target: &ConcreteSequence) -> MorphismReport {
    let mut report = MorphismReport::default();
    let mut live = Vec::new();
    for i in m.levels() {
        let u = m.index(i).unwrap();
        let f = m.map(i).unwrap();
        let Ok(n) = source.size(i) else {
            report.shape_errors.push(format!("level {i} is outside the source window"));
            continue;
        };
        if f.domain() != n {
            report.shape_errors.push(format!("f_{i} has domain {} but X_{i} has {n} elements", f.domain()));
            continue;
        }
        match target.size(u) {
            Ok(m_u) if f.codomain() == m_u => live.push(i),
            Ok(m_u) => report.shape_errors.push(format!("f_{i} has codomain {} but Y_{u} has {m_u} elements", f.codomain())),
            Err(_) => report.unchecked.push(i),
        }
    }
    if !report.shape_errors.is_empty() {
        return report;
    }
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            let (ui, uj) = (m.index(i).unwrap(), m.index(j).unwrap());
            let k = ui.max(uj);
            let (Ok(psi_i), Ok(psi_j), Ok(phi)) = (target.compose(ui, k), target.compose(uj, k), source.compose(i, j)) else {
                report.shape_errors.push(format!("cannot form composites for levels {i}, {j}"));
                continue;
            };
            let fi = m.map(i).unwrap();
            let fj = m.map(j).unwrap();
            for x in 0..fi.domain() {
                let via_i = psi_i.apply(fi.apply(x));
                let via_j = psi_j.apply(fj.apply(phi.apply(x)));
                if via_i != via_j {
                    report.violations.push(CommutationViolation { i, j, element: x, level: k, via_i, via_j });
                }
            }
        }
    }
    report
}

/// Rewrites `m` so that `u(i) >= i` and `u` is strictly increasing:
/// `u'(i) = max(u(i), i, u'(i-1) + 1)` and `f'_i = ψ_{u(i) u'(i)} ∘ f_i`.
pub fn normalize_morphism(m: &Morphism, target: &ConcreteSequence) -> Result<Morphism, DirSeqError> {
    let mut index_map = Vec::new();
    let mut maps = Vec::new();
    let mut prev: Option<u32> = None;
    for i in m.levels() {
        let u = m.index(i).unwrap();
        let new_u = [Some(u), Some(i), prev.map(|p| p + 1)].into_iter().flatten().max().unwrap();
        if new_u > target.end() {
            return Err(DirSeqError::WindowTooShort { level: i, needed: new_u, end: target.end() });
        }
        maps.push(m.map(i).unwrap().then(&target.compose(u, new_u)?)?);
        index_map.push(new_u);
        prev = Some(new_u);
    }
    Morphism::new(m.start(), index_map, maps)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Which composite law a witness refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    /// `g_{u(i)} ∘ f_i = φ_{i, v(u(i))}`
    GAfterF,
    /// `f_{v(i)} ∘ g_i = ψ_{i, u(v(i))}`
    FAfterG,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LawViolation {
    pub law: Law,
    pub level: u32,
    pub element: usize,
    pub target_level: u32,
    pub composite: usize,
    pub bonding: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquivalenceReport {
    pub verdict: Verdict,
    pub forward: MorphismReport,
    pub backward: MorphismReport,
    pub violations: Vec<LawViolation>,
    /// Why some required composite could not be formed inside the windows.
    pub inconclusive: Vec<String>,
    /// Levels at which the composite laws were verified, per side.
    pub checked_source_levels: Vec<u32>,
    pub checked_target_levels: Vec<u32>,
}

/// Checks both composite laws for `f : A -> B` and `g : B -> A` on every level
/// of the morphisms' windows.
pub fn check_equivalence(f: &Morphism, g: &Morphism, a: &ConcreteSequence, b: &ConcreteSequence) -> EquivalenceReport {
    check_equivalence_within(f, g, a, b, 0..=u32::MAX)
}

/// As [`check_equivalence`], restricted to source and target levels in `focus`.
/// Levels whose composites leave the windows make the verdict inconclusive,
/// never failing.
pub fn check_equivalence_within(
    f: &Morphism,
    g: &Morphism,
    a: &ConcreteSequence,
    b: &ConcreteSequence,
    focus: RangeInclusive<u32>,
) -> EquivalenceReport {
    let forward = check_morphism(f, a, b);
    let backward = check_morphism(g, b, a);
    let mut inconclusive = Vec::new();
    for (name, report) in [("f", &forward), ("g", &backward)] {
        for i in report.unchecked.iter().filter(|i| focus.contains(i)) {
            inconclusive.push(format!("{name}_{i} lands outside the target window"));
        }
    }
    let mut violations = Vec::new();
    let mut checked_source_levels = Vec::new();
    let mut checked_target_levels = Vec::new();
    if !forward.shape_errors.is_empty() || !backward.shape_errors.is_empty() {
        return EquivalenceReport {
            verdict: Verdict::Fail,
            forward,
            backward,
            violations,
            inconclusive,
            checked_source_levels,
            checked_target_levels,
        };
    }
    for (law, first, second, home, checked) in [
        (Law::GAfterF, f, g, a, &mut checked_source_levels),
        (Law::FAfterG, g, f, b, &mut checked_target_levels),
    ] {
        for i in home.levels().filter(|i| focus.contains(i)) {
            match law_at(first, second, home, i) {
                Ok(found) => {
                    checked.push(i);
                    violations.extend(found.into_iter().map(|(element, target_level, composite, bonding)| LawViolation {
                        law,
                        level: i,
                        element,
                        target_level,
                        composite,
                        bonding,
                    }));
                }
                Err(reason) => inconclusive.push(reason),
            }
        }
    }
    let verdict = if !forward.passes() || !backward.passes() || !violations.is_empty() {
        Verdict::Fail
    } else if !inconclusive.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::Pass
    };
    EquivalenceReport { verdict, forward, backward, violations, inconclusive, checked_source_levels, checked_target_levels }
}

type Mismatch = (usize, u32, usize, usize);

/// Compares `second_{u(i)} ∘ first_i` with the bonding `φ_{i, v(u(i))}` of `home`.
fn law_at(first: &Morphism, second: &Morphism, home: &ConcreteSequence, i: u32) -> Result<Vec<Mismatch>, String> {
    let (Some(u), Some(fi)) = (first.index(i), first.map(i)) else {
        return Err(format!("level {i} is outside the first morphism's window"));
    };
    let (Some(v), Some(gu)) = (second.index(u), second.map(u)) else {
        return Err(format!("level {i}: second morphism undefined at {u}"));
    };
    if v < i {
        return Err(format!("level {i}: composite lands at lower level {v}"));
    }
    let bonding = home.compose(i, v).map_err(|e| format!("level {i}: {e}"))?;
    let composite = fi.then(gu).map_err(|e| format!("level {i}: {e}"))?;
    Ok((0..composite.domain())
        .filter(|&x| composite.apply(x) != bonding.apply(x))
        .map(|x| (x, v, composite.apply(x), bonding.apply(x)))
        .collect())
}
