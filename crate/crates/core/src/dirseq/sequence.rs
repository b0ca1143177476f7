use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Cardinality, DirSeqError, SetFunction};

/// A finite window `X_start, ..., X_end` of a direct sequence of finite sets.
///
/// Elements of level `i` are `0..size(i)`, optionally with display names.
/// Beyond `end` the sequence is read as constant with identity bondings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConcreteSequence {
    start: u32,
    names: Vec<Vec<String>>,
    bondings: Vec<SetFunction>,
}

impl ConcreteSequence {
    pub fn new(start: u32, names: Vec<Vec<String>>, bondings: Vec<SetFunction>) -> Result<Self, DirSeqError> {
        if names.is_empty() {
            return Err(DirSeqError::ShapeMismatch("a window needs at least one level".into()));
        }
        if bondings.len() + 1 != names.len() {
            return Err(DirSeqError::ShapeMismatch(format!(
                "{} levels need {} bondings, got {}",
                names.len(),
                names.len() - 1,
                bondings.len()
            )));
        }
        for (k, b) in bondings.iter().enumerate() {
            if b.domain() != names[k].len() || b.codomain() != names[k + 1].len() {
                return Err(DirSeqError::ShapeMismatch(format!(
                    "bonding at level {} maps {} -> {} elements, levels have {} and {}",
                    start as usize + k,
                    b.domain(),
                    b.codomain(),
                    names[k].len(),
                    names[k + 1].len()
                )));
            }
        }
        Ok(ConcreteSequence { start, names, bondings })
    }

    /// Levels with elements named by their indices.
    pub fn from_sizes(start: u32, sizes: &[usize], bondings: Vec<SetFunction>) -> Result<Self, DirSeqError> {
        let names = sizes.iter().map(|&n| (0..n).map(|x| x.to_string()).collect()).collect();
        Self::new(start, names, bondings)
    }

    pub fn start(&self) -> u32 {
        self.start
    }

    pub fn end(&self) -> u32 {
        self.start + self.names.len() as u32 - 1
    }

    pub fn contains_level(&self, i: u32) -> bool {
        (self.start..=self.end()).contains(&i)
    }

    pub fn levels(&self) -> impl Iterator<Item = u32> {
        self.start..=self.end()
    }

    pub fn size(&self, i: u32) -> Result<usize, DirSeqError> {
        self.check_level(i)?;
        Ok(self.names[(i - self.start) as usize].len())
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.names.iter().map(Vec::len).collect()
    }

    pub fn names(&self, i: u32) -> Result<&[String], DirSeqError> {
        self.check_level(i)?;
        Ok(&self.names[(i - self.start) as usize])
    }

    /// The bonding `X_i -> X_{i+1}`; `i < end`.
    pub fn bonding(&self, i: u32) -> Result<&SetFunction, DirSeqError> {
        if i < self.start || i >= self.end() {
            return Err(DirSeqError::OutOfWindow { index: i, start: self.start, end: self.end() });
        }
        Ok(&self.bondings[(i - self.start) as usize])
    }

    pub fn bondings(&self) -> &[SetFunction] {
        &self.bondings
    }

    /// `φ_{ij} = φ_{j-1} ∘ ... ∘ φ_i`, with `φ_{ii}` the identity.
    pub fn compose(&self, i: u32, j: u32) -> Result<SetFunction, DirSeqError> {
        self.check_level(i)?;
        self.check_level(j)?;
        if i > j {
            return Err(DirSeqError::Backwards { from: i, to: j });
        }
        let mut acc = SetFunction::identity(self.size(i)?);
        for k in i..j {
            acc = acc.then(self.bonding(k)?)?;
        }
        Ok(acc)
    }

    fn check_level(&self, i: u32) -> Result<(), DirSeqError> {
        if self.contains_level(i) {
            Ok(())
        } else {
            Err(DirSeqError::OutOfWindow { index: i, start: self.start, end: self.end() })
        }
    }
}

/// Size formulas `k`, `N`, `aN`, `N+b`, `aN+b` and `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeFormula {
    Constant(u64),
    Linear { slope: u64, offset: i64 },
    Omega,
}

impl SizeFormula {
    pub fn eval(&self, n: u32) -> Cardinality {
        match *self {
            SizeFormula::Constant(k) => Cardinality::Finite(k),
            SizeFormula::Linear { slope, offset } => {
                Cardinality::Finite((slope as i64 * i64::from(n) + offset).max(0) as u64)
            }
            SizeFormula::Omega => Cardinality::Omega,
        }
    }

    /// Whether the size is the same at every level.
    pub fn is_constant(&self) -> bool {
        matches!(self, SizeFormula::Constant(_) | SizeFormula::Omega | SizeFormula::Linear { slope: 0, .. })
    }

    /// Supremum of the sizes over all levels from `start` on, and whether it
    /// is attained at some level.
    pub fn supremum(&self, start: u32) -> (Cardinality, bool) {
        match *self {
            SizeFormula::Linear { slope, .. } if slope > 0 => (Cardinality::Omega, false),
            other => (other.eval(start), true),
        }
    }
}

impl fmt::Display for SizeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SizeFormula::Constant(k) => write!(f, "{k}"),
            SizeFormula::Omega => f.write_str("omega"),
            SizeFormula::Linear { slope, offset } => {
                if slope != 1 {
                    write!(f, "{slope}")?;
                }
                f.write_str("N")?;
                match offset {
                    0 => Ok(()),
                    b if b > 0 => write!(f, "+{b}"),
                    b => write!(f, "{b}"),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid size formula `{0}`: expected an integer, `omega`, or `aN+b`")]
pub struct ParseSizeError(pub String);

impl FromStr for SizeFormula {
    type Err = ParseSizeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseSizeError(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "omega" {
            return Ok(SizeFormula::Omega);
        }
        if let Ok(k) = t.parse::<u64>() {
            return Ok(SizeFormula::Constant(k));
        }
        let (slope, rest) = t.split_once('N').ok_or_else(err)?;
        let slope = if slope.is_empty() { 1 } else { slope.trim_end_matches('*').parse().map_err(|_| err())? };
        let offset = if rest.is_empty() { 0 } else { rest.trim_start_matches('+').parse().map_err(|_| err())? };
        Ok(SizeFormula::Linear { slope, offset })
    }
}

impl Serialize for SizeFormula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SizeFormula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(k) => Ok(SizeFormula::Constant(k)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How level `N` maps into level `N+1` of a symbolic sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondingDescriptor {
    Identity,
    #[serde(alias = "inclusion")]
    InclusionOfPrefix,
    /// Explicit bonding tables for levels `start, start+1, ...`; the sequence
    /// is only defined as far as the tables reach.
    Table(Vec<Vec<usize>>),
}

/// A direct sequence given by a size formula and a bonding descriptor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolicSequence {
    #[serde(default = "one")]
    pub start: u32,
    pub size: SizeFormula,
    pub bonding: BondingDescriptor,
}

fn one() -> u32 {
    1
}

impl SymbolicSequence {
    pub fn new(start: u32, size: SizeFormula, bonding: BondingDescriptor) -> Result<Self, DirSeqError> {
        let seq = SymbolicSequence { start, size, bonding };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<(), DirSeqError> {
        if let SizeFormula::Linear { slope, offset } = self.size {
            if slope as i64 * i64::from(self.start) + offset < 0 {
                return Err(DirSeqError::Invalid(format!("size {} is negative at level {}", self.size, self.start)));
            }
        }
        match &self.bonding {
            BondingDescriptor::Identity if !self.size.is_constant() => Err(DirSeqError::Invalid(format!(
                "identity bondings need a constant size, got {}",
                self.size
            ))),
            BondingDescriptor::Table(tables) => {
                for (k, t) in tables.iter().enumerate() {
                    let i = self.start + k as u32;
                    let (Some(n), Some(m)) = (self.size.eval(i).finite(), self.size.eval(i + 1).finite()) else {
                        return Err(DirSeqError::Invalid("table bondings need finite sizes".into()));
                    };
                    if t.len() as u64 != n {
                        return Err(DirSeqError::Invalid(format!("table at level {i} has {} entries, expected {n}", t.len())));
                    }
                    SetFunction::new(t.clone(), m as usize)?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn size(&self, i: u32) -> Result<Cardinality, DirSeqError> {
        if i < self.start {
            return Err(DirSeqError::OutOfWindow { index: i, start: self.start, end: u32::MAX });
        }
        if let BondingDescriptor::Table(t) = &self.bonding {
            let end = self.start + t.len() as u32;
            if i > end {
                return Err(DirSeqError::OutOfWindow { index: i, start: self.start, end });
            }
        }
        Ok(self.size.eval(i))
    }

    /// Last level the sequence is defined at, if bounded.
    pub fn end(&self) -> Option<u32> {
        match &self.bonding {
            BondingDescriptor::Table(t) => Some(self.start + t.len() as u32),
            _ => None,
        }
    }

    /// The levels `lo..=hi` as a concrete window; sizes must be finite.
    pub fn window(&self, lo: u32, hi: u32) -> Result<ConcreteSequence, DirSeqError> {
        if lo > hi {
            return Err(DirSeqError::Backwards { from: lo, to: hi });
        }
        let mut sizes = Vec::new();
        for i in lo..=hi {
            let n = self.size(i)?.finite().ok_or_else(|| {
                DirSeqError::Unsupported(format!("level {i} is infinite and cannot be listed"))
            })?;
            sizes.push(n as usize);
        }
        let mut bondings = Vec::new();
        for i in lo..hi {
            let (n, m) = (sizes[(i - lo) as usize], sizes[(i - lo + 1) as usize]);
            bondings.push(match &self.bonding {
                BondingDescriptor::Identity => SetFunction::identity(n),
                BondingDescriptor::InclusionOfPrefix => SetFunction::prefix_inclusion(n, m),
                BondingDescriptor::Table(t) => SetFunction::new(t[(i - self.start) as usize].clone(), m)?,
            });
        }
        ConcreteSequence::from_sizes(lo, &sizes, bondings)
    }
}

/// Either form of direct sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DirectSequence {
    Concrete(ConcreteSequence),
    Symbolic(SymbolicSequence),
}

/// A composite bonding `φ_{ij}`, kept structural when levels are infinite.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LevelMap {
    Table(SetFunction),
    Identity(Cardinality),
    PrefixInclusion { from: Cardinality, to: Cardinality },
}

impl LevelMap {
    pub fn image_size(&self) -> Cardinality {
        match self {
            LevelMap::Table(f) => f.image_size().into(),
            LevelMap::Identity(c) => *c,
            LevelMap::PrefixInclusion { from, .. } => *from,
        }
    }

    pub fn apply(&self, x: u64) -> Option<u64> {
        let inside = |c: &Cardinality| c.finite().is_none_or(|n| x < n);
        match self {
            LevelMap::Table(f) => ((x as usize) < f.domain()).then(|| f.apply(x as usize) as u64),
            LevelMap::Identity(c) => inside(c).then_some(x),
            LevelMap::PrefixInclusion { from, .. } => inside(from).then_some(x),
        }
    }

    pub fn as_table(&self) -> Option<SetFunction> {
        match self {
            LevelMap::Table(f) => Some(f.clone()),
            LevelMap::Identity(Cardinality::Finite(n)) => Some(SetFunction::identity(*n as usize)),
            LevelMap::PrefixInclusion { from: Cardinality::Finite(n), to: Cardinality::Finite(m) } => {
                Some(SetFunction::prefix_inclusion(*n as usize, *m as usize))
            }
            _ => None,
        }
    }
}

impl DirectSequence {
    pub fn start(&self) -> u32 {
        match self {
            DirectSequence::Concrete(c) => c.start(),
            DirectSequence::Symbolic(s) => s.start,
        }
    }

    /// Last defined level; `None` for unbounded symbolic sequences.
    pub fn end(&self) -> Option<u32> {
        match self {
            DirectSequence::Concrete(c) => Some(c.end()),
            DirectSequence::Symbolic(s) => s.end(),
        }
    }

    pub fn size(&self, i: u32) -> Result<Cardinality, DirSeqError> {
        match self {
            DirectSequence::Concrete(c) => c.size(i).map(Cardinality::from),
            DirectSequence::Symbolic(s) => s.size(i),
        }
    }

    pub fn validate(&self) -> Result<(), DirSeqError> {
        match self {
            DirectSequence::Concrete(_) => Ok(()),
            DirectSequence::Symbolic(s) => s.validate(),
        }
    }
}

/// `φ_{ij}` for `i <= j`.
pub fn compose_bonding(seq: &DirectSequence, i: u32, j: u32) -> Result<LevelMap, DirSeqError> {
    if i > j {
        return Err(DirSeqError::Backwards { from: i, to: j });
    }
    match seq {
        DirectSequence::Concrete(c) => c.compose(i, j).map(LevelMap::Table),
        DirectSequence::Symbolic(s) => {
            let (from, to) = (s.size(i)?, s.size(j)?);
            match &s.bonding {
                _ if i == j => Ok(LevelMap::Identity(from)),
                BondingDescriptor::Identity => Ok(LevelMap::Identity(from)),
                BondingDescriptor::InclusionOfPrefix => Ok(LevelMap::PrefixInclusion { from, to }),
                BondingDescriptor::Table(_) => s.window(i, j)?.compose(i, j).map(LevelMap::Table),
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawLevel {
    Size(usize),
    Names(Vec<String>),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum RawSequence {
    Concrete {
        #[serde(default = "one")]
        start: u32,
        levels: Vec<RawLevel>,
        #[serde(default)]
        bondings: Vec<Vec<usize>>,
    },
    Symbolic(SymbolicSequence),
}

impl Serialize for DirectSequence {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = match self {
            DirectSequence::Concrete(c) => RawSequence::Concrete {
                start: c.start,
                levels: c.names.iter().map(|n| RawLevel::Names(n.clone())).collect(),
                bondings: c.bondings.iter().map(|b| b.table().to_vec()).collect(),
            },
            DirectSequence::Symbolic(s) => RawSequence::Symbolic(s.clone()),
        };
        raw.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DirectSequence {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        match RawSequence::deserialize(deserializer)? {
            RawSequence::Concrete { start, levels, bondings } => {
                let names: Vec<Vec<String>> = levels
                    .into_iter()
                    .map(|l| match l {
                        RawLevel::Size(n) => (0..n).map(|x| x.to_string()).collect(),
                        RawLevel::Names(names) => names,
                    })
                    .collect();
                let bondings = bondings
                    .into_iter()
                    .enumerate()
                    .map(|(k, t)| SetFunction::new(t, names.get(k + 1).map_or(0, Vec::len)))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(D::Error::custom)?;
                ConcreteSequence::new(start, names, bondings).map(DirectSequence::Concrete).map_err(D::Error::custom)
            }
            RawSequence::Symbolic(s) => {
                s.validate().map_err(D::Error::custom)?;
                Ok(DirectSequence::Symbolic(s))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(size: &str, bonding: BondingDescriptor) -> DirectSequence {
        DirectSequence::Symbolic(SymbolicSequence::new(1, size.parse().unwrap(), bonding).unwrap())
    }

    #[test]
    fn size_formula_text() {
        for text in ["omega", "7", "N", "2N", "N+3", "3N-1"] {
            assert_eq!(text.parse::<SizeFormula>().unwrap().to_string(), text);
        }
        assert_eq!("N".parse::<SizeFormula>().unwrap().eval(5), Cardinality::Finite(5));
        assert!("N^2".parse::<SizeFormula>().is_err());
    }

    #[test]
    fn identity_composite_on_diagonal() {
        let seq = ConcreteSequence::from_sizes(1, &[2, 3], vec![SetFunction::new(vec![2, 0], 3).unwrap()]).unwrap();
        assert_eq!(seq.compose(2, 2).unwrap(), SetFunction::identity(3));
        assert!(seq.compose(2, 1).is_err());
        assert!(seq.compose(1, 3).is_err());
    }

    #[test]
    fn symbolic_inclusion_composite() {
        let d = sym("N", BondingDescriptor::InclusionOfPrefix);
        let phi = compose_bonding(&d, 2, 5).unwrap();
        assert_eq!(phi.as_table().unwrap(), SetFunction::prefix_inclusion(2, 5));
        assert_eq!(phi.image_size(), Cardinality::Finite(2));
        let b = sym("omega", BondingDescriptor::Identity);
        assert_eq!(compose_bonding(&b, 1, 9).unwrap(), LevelMap::Identity(Cardinality::Omega));
    }

    #[test]
    fn identity_needs_constant_size() {
        assert!(SymbolicSequence::new(1, SizeFormula::Linear { slope: 1, offset: 0 }, BondingDescriptor::Identity).is_err());
    }

    #[test]
    fn json_forms() {
        let concrete: DirectSequence = serde_json::from_str(
            r#"{"type":"concrete","start":1,"levels":[1,["a","b"]],"bondings":[[1]]}"#,
        )
        .unwrap();
        assert_eq!(concrete.size(2).unwrap(), Cardinality::Finite(2));
        let back: DirectSequence = serde_json::from_str(&serde_json::to_string(&concrete).unwrap()).unwrap();
        assert_eq!(back, concrete);

        let symbolic: DirectSequence =
            serde_json::from_str(r#"{"type":"symbolic","size":"N","bonding":"inclusion_of_prefix"}"#).unwrap();
        assert_eq!(symbolic.size(4).unwrap(), Cardinality::Finite(4));
        let json = serde_json::to_string(&symbolic).unwrap();
        assert_eq!(json, r#"{"type":"symbolic","start":1,"size":"N","bonding":"inclusion_of_prefix"}"#);

        let bad = r#"{"type":"concrete","levels":[1,1],"bondings":[[1]]}"#;
        assert!(serde_json::from_str::<DirectSequence>(bad).is_err());
    }

    #[test]
    fn table_descriptor_is_bounded() {
        let s = SymbolicSequence::new(1, SizeFormula::Constant(2), BondingDescriptor::Table(vec![vec![1, 0], vec![0, 0]])).unwrap();
        assert_eq!(s.end(), Some(3));
        let w = s.window(1, 3).unwrap();
        assert_eq!(w.compose(1, 3).unwrap().table(), &[0, 0]);
        assert!(s.size(4).is_err());
    }
}
