use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::rational::Rational;

/// Human-readable name of a point.
///
/// Text forms: `*` (wedge point), `#3` (point-cloud index), `3/2` (coordinate on
/// a ray or line), `(1,-2)` (lattice coordinates) and `k:inner` (point `inner`
/// on wedge summand `k`, e.g. `2:4` is the point at coordinate 4 on ray 2).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointLabel {
    Base,
    Index(usize),
    Coord(Rational),
    Coords(Vec<Rational>),
    Summand(usize, Box<PointLabel>),
}

impl PointLabel {
    pub fn summand(part: usize, inner: PointLabel) -> Self {
        PointLabel::Summand(part, Box::new(inner))
    }

    /// Shorthand for `part:coord` on a wedge of rays.
    pub fn on_ray(part: usize, coord: Rational) -> Self {
        PointLabel::summand(part, PointLabel::Coord(coord))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid point label `{0}`")]
pub struct ParseLabelError(pub String);

impl fmt::Display for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointLabel::Base => f.write_str("*"),
            PointLabel::Index(i) => write!(f, "#{i}"),
            PointLabel::Coord(c) => write!(f, "{c}"),
            PointLabel::Coords(cs) => {
                f.write_str("(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str(")")
            }
            PointLabel::Summand(k, inner) => write!(f, "{k}:{inner}"),
        }
    }
}

impl fmt::Debug for PointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PointLabel {
    type Err = ParseLabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseLabelError(s.to_string());
        let t = s.trim();
        if t == "*" {
            return Ok(PointLabel::Base);
        }
        if let Some(rest) = t.strip_prefix('#') {
            return rest.parse().map(PointLabel::Index).map_err(|_| err());
        }
        if let Some(inner) = t.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let coords = inner
                .split(',')
                .map(|c| c.parse::<Rational>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| err())?;
            return Ok(PointLabel::Coords(coords));
        }
        if let Some((k, rest)) = t.split_once(':') {
            let k: usize = k.trim().parse().map_err(|_| err())?;
            let inner: PointLabel = rest.parse().map_err(|_| err())?;
            return Ok(PointLabel::summand(k, inner));
        }
        t.parse::<Rational>().map(PointLabel::Coord).map_err(|_| err())
    }
}

impl Serialize for PointLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PointLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        for text in ["*", "#4", "3/2", "-2", "(1,-2,0)", "2:4", "3:1/2", "1:#0"] {
            let label: PointLabel = text.parse().unwrap();
            assert_eq!(label.to_string(), text);
        }
    }

    #[test]
    fn wedge_labels_order_by_part_then_coordinate() {
        let a = PointLabel::on_ray(1, Rational::integer(2));
        let b = PointLabel::on_ray(2, Rational::integer(1));
        assert!(PointLabel::Base < a);
        assert!(a < b);
    }

    #[test]
    fn rejects_garbage() {
        assert!("x:1".parse::<PointLabel>().is_err());
        assert!("#a".parse::<PointLabel>().is_err());
        assert!("(1,,2)".parse::<PointLabel>().is_err());
    }
}
