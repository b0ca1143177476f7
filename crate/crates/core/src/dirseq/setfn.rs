use std::cmp::Ordering;
use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::DirSeqError;

/// A total function `{0..domain} -> {0..codomain}` stored as a table.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SetFunction {
    codomain: usize,
    table: Vec<usize>,
}

impl SetFunction {
    pub fn new(table: Vec<usize>, codomain: usize) -> Result<Self, DirSeqError> {
        if let Some((x, &y)) = table.iter().enumerate().find(|(_, &y)| y >= codomain) {
            return Err(DirSeqError::NotTotal { element: x, value: y, codomain });
        }
        Ok(SetFunction { codomain, table })
    }

    pub fn identity(n: usize) -> Self {
        SetFunction { codomain: n, table: (0..n).collect() }
    }

    /// The inclusion of `{0..n}` into `{0..m}`; `n <= m`.
    pub fn prefix_inclusion(n: usize, m: usize) -> Self {
        assert!(n <= m, "prefix inclusion needs n <= m");
        SetFunction { codomain: m, table: (0..n).collect() }
    }

    pub fn domain(&self) -> usize {
        self.table.len()
    }

    pub fn codomain(&self) -> usize {
        self.codomain
    }

    pub fn apply(&self, x: usize) -> usize {
        self.table[x]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    /// `then ∘ self`.
    pub fn then(&self, then: &SetFunction) -> Result<SetFunction, DirSeqError> {
        if self.codomain != then.domain() {
            return Err(DirSeqError::ShapeMismatch(format!(
                "cannot compose: codomain {} vs domain {}",
                self.codomain,
                then.domain()
            )));
        }
        Ok(SetFunction { codomain: then.codomain, table: self.table.iter().map(|&y| then.table[y]).collect() })
    }

    pub fn image_size(&self) -> usize {
        let mut seen = vec![false; self.codomain];
        self.table.iter().filter(|&&y| !std::mem::replace(&mut seen[y], true)).count()
    }

    pub fn is_injective(&self) -> bool {
        self.image_size() == self.domain()
    }

    pub fn is_surjective(&self) -> bool {
        self.image_size() == self.codomain
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.is_surjective()
    }

    /// Inverse of a bijection.
    pub fn inverse(&self) -> Option<SetFunction> {
        if !self.is_bijective() {
            return None;
        }
        let mut table = vec![0; self.codomain];
        for (x, &y) in self.table.iter().enumerate() {
            table[y] = x;
        }
        Some(SetFunction { codomain: self.domain(), table })
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.table.iter().copied().enumerate()
    }
}

/// Cardinalities of countable sets: finite or `omega`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cardinality {
    Finite(u64),
    Omega,
}

impl Cardinality {
    pub fn is_finite(&self) -> bool {
        matches!(self, Cardinality::Finite(_))
    }

    pub fn finite(&self) -> Option<u64> {
        match self {
            Cardinality::Finite(n) => Some(*n),
            Cardinality::Omega => None,
        }
    }
}

impl Ord for Cardinality {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cardinality::Finite(a), Cardinality::Finite(b)) => a.cmp(b),
            (Cardinality::Finite(_), Cardinality::Omega) => Ordering::Less,
            (Cardinality::Omega, Cardinality::Finite(_)) => Ordering::Greater,
            (Cardinality::Omega, Cardinality::Omega) => Ordering::Equal,
        }
    }
}

impl PartialOrd for Cardinality {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<usize> for Cardinality {
    fn from(n: usize) -> Self {
        Cardinality::Finite(n as u64)
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cardinality::Finite(n) => write!(f, "{n}"),
            Cardinality::Omega => f.write_str("omega"),
        }
    }
}

impl Serialize for Cardinality {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cardinality::Finite(n) => serializer.serialize_u64(*n),
            Cardinality::Omega => serializer.serialize_str("omega"),
        }
    }
}

impl<'de> Deserialize<'de> for Cardinality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl de::Visitor<'_> for Visitor {
            type Value = Cardinality;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative integer or \"omega\"")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Cardinality, E> {
                Ok(Cardinality::Finite(v))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Cardinality, E> {
                match v {
                    "omega" => Ok(Cardinality::Omega),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_and_images() {
        let f = SetFunction::new(vec![0, 2, 2], 3).unwrap();
        let g = SetFunction::new(vec![1, 1, 0], 2).unwrap();
        let gf = f.then(&g).unwrap();
        assert_eq!(gf.table(), &[1, 0, 0]);
        assert_eq!(f.image_size(), 2);
        assert!(!f.is_injective());
        assert!(gf.is_surjective());
        assert!(SetFunction::new(vec![3], 3).is_err());
    }

    #[test]
    fn inverse_of_bijection() {
        let p = SetFunction::new(vec![2, 0, 1], 3).unwrap();
        let q = p.inverse().unwrap();
        assert_eq!(p.then(&q).unwrap(), SetFunction::identity(3));
        assert!(SetFunction::prefix_inclusion(2, 3).inverse().is_none());
    }

    #[test]
    fn cardinality_order_and_json() {
        assert!(Cardinality::Finite(1_000_000) < Cardinality::Omega);
        assert_eq!(serde_json::to_string(&Cardinality::Omega).unwrap(), "\"omega\"");
        let c: Cardinality = serde_json::from_str("7").unwrap();
        assert_eq!(c, Cardinality::Finite(7));
    }
}
