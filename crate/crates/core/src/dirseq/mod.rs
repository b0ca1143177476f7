//! Direct sequences of sets, their morphisms, equivalences and direct limits.
//!
//! Sequences come in two forms. A [`ConcreteSequence`] lists a finite window
//! of levels with explicit bonding tables. A [`SymbolicSequence`] describes
//! every level at once through a size formula and a bonding descriptor, which
//! is how infinitely many levels (or infinite levels) are handled.

mod limit;
mod morphism;
mod sequence;
mod setfn;

pub use limit::{cardinality_obstruction, direct_limit, induced_limit_map, LimitClass, LimitSet, ObstructionVerdict};
pub use morphism::{
    check_equivalence, check_equivalence_within, check_morphism, normalize_morphism, CommutationViolation,
    EquivalenceReport, Law, LawViolation, Morphism, MorphismReport, MorphismSpec, Verdict,
};
pub use sequence::{
    compose_bonding, BondingDescriptor, ConcreteSequence, DirectSequence, LevelMap, ParseSizeError, SizeFormula,
    SymbolicSequence,
};
pub use setfn::{Cardinality, SetFunction};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DirSeqError {
    #[error("element {element} maps to {value}, outside a codomain of size {codomain}")]
    NotTotal { element: usize, value: usize, codomain: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("level {index} is outside the window {start}..={end}")]
    OutOfWindow { index: u32, start: u32, end: u32 },
    #[error("bonding from level {from} to lower level {to}")]
    Backwards { from: u32, to: u32 },
    #[error("invalid sequence: {0}")]
    Invalid(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("window too short: level {level} must map to level {needed}, target window ends at {end}")]
    WindowTooShort { level: u32, needed: u32, end: u32 },
    #[error("induced map is not well defined: {0}")]
    NotWellDefined(String),
}
