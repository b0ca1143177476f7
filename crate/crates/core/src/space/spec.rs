use serde::{Deserialize, Serialize};

use super::{metric_wedge, PointLabel, Rational, SpaceError, SpacePresentation};

/// JSON description of a space: `{"kind": "...", "params": {...}}`, with an
/// optional top-level `"basepoint"` label that re-points the built space.
///
/// ```
/// use coarse_sigma::space::SpaceSpec;
/// let spec: SpaceSpec = serde_json::from_str(
///     r#"{"kind": "open_book", "params": {"num_rays": 3, "net_spacing": "1/2"}}"#,
/// ).unwrap();
/// let space = spec.build().unwrap();
/// assert_eq!(space.name(), "open_book{k=3,delta=1/2}");
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(flatten)]
    pub kind: SpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basepoint: Option<PointLabel>,
}

fn half() -> Rational {
    Rational::new(1, 2)
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SpecKind {
    PointCloud {
        distances: Vec<Vec<Rational>>,
        #[serde(default)]
        basepoint: usize,
    },
    Ray {
        #[serde(default = "half")]
        net_spacing: Rational,
    },
    IntegerRay,
    DiscreteRay {
        spacing: Rational,
    },
    Lattice {
        #[serde(default = "one")]
        dim: usize,
    },
    DeltaNet {
        #[serde(default = "one")]
        dim: usize,
        #[serde(default = "half")]
        net_spacing: Rational,
    },
    Wedge {
        parts: Vec<SpaceSpec>,
    },
    OpenBook {
        num_rays: usize,
        #[serde(default = "half")]
        net_spacing: Rational,
    },
    DiscreteOpenBook {
        #[serde(default)]
        num_rays: Option<usize>,
    },
}

impl SpaceSpec {
    pub fn new(kind: SpecKind) -> Self {
        SpaceSpec { kind, basepoint: None }
    }

    pub fn build(&self) -> Result<SpacePresentation, SpaceError> {
        let space = match &self.kind {
            SpecKind::PointCloud { distances, basepoint } => {
                SpacePresentation::point_cloud(distances.clone(), *basepoint)?
            }
            SpecKind::Ray { net_spacing } => SpacePresentation::ray(*net_spacing)?,
            SpecKind::IntegerRay => SpacePresentation::integer_ray(),
            SpecKind::DiscreteRay { spacing } => SpacePresentation::discrete_ray(*spacing)?,
            SpecKind::Lattice { dim } => SpacePresentation::lattice(*dim)?,
            SpecKind::DeltaNet { dim, net_spacing } => SpacePresentation::delta_net(*dim, *net_spacing)?,
            SpecKind::Wedge { parts } => {
                let parts = parts.iter().map(SpaceSpec::build).collect::<Result<Vec<_>, _>>()?;
                metric_wedge(parts)?
            }
            SpecKind::OpenBook { num_rays, net_spacing } => SpacePresentation::open_book(*num_rays, *net_spacing)?,
            SpecKind::DiscreteOpenBook { num_rays } => SpacePresentation::discrete_open_book(*num_rays)?,
        };
        match &self.basepoint {
            Some(label) => {
                let p = space.point(label)?;
                space.with_basepoint(p)
            }
            None => Ok(space),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> SpaceSpec {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn parses_every_kind() {
        let cases = [
            r#"{"kind":"point_cloud","params":{"distances":[["0","3/2"],["3/2","0"]]}}"#,
            r#"{"kind":"ray","params":{}}"#,
            r#"{"kind":"integer_ray"}"#,
            r#"{"kind":"discrete_ray","params":{"spacing":3}}"#,
            r#"{"kind":"lattice","params":{"dim":2}}"#,
            r#"{"kind":"delta_net","params":{"dim":1,"net_spacing":"1/4"}}"#,
            r#"{"kind":"wedge","params":{"parts":[{"kind":"integer_ray"},{"kind":"ray","params":{}}]}}"#,
            r#"{"kind":"open_book","params":{"num_rays":2}}"#,
            r#"{"kind":"discrete_open_book","params":{"num_rays":5}}"#,
            r#"{"kind":"discrete_open_book","params":{}}"#,
        ];
        for json in cases {
            let spec = parse(json);
            spec.build().unwrap_or_else(|e| panic!("{json}: {e}"));
            let back: SpaceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn basepoint_override() {
        let spec = parse(r#"{"kind":"discrete_open_book","params":{"num_rays":3},"basepoint":"3:9"}"#);
        let space = spec.build().unwrap();
        assert_eq!(space.label(space.basepoint()).unwrap().to_string(), "3:9");
    }

    #[test]
    fn invalid_parameters_are_errors() {
        let bad = parse(r#"{"kind":"open_book","params":{"num_rays":0}}"#);
        assert!(matches!(bad.build(), Err(SpaceError::NoRays(0))));
        let bad = parse(r#"{"kind":"ray","params":{"net_spacing":"-1/2"}}"#);
        assert!(matches!(bad.build(), Err(SpaceError::NonPositiveSpacing(_))));
        assert!(serde_json::from_str::<SpaceSpec>(r#"{"kind":"hyperbolic_plane"}"#).is_err());
    }
}
