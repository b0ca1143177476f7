//! Computable scale-N end invariants of locally finite pointed metric spaces.
//!
//! The pipeline: a [`space::SpacePresentation`] is truncated to a ball, the
//! scale-N neighbourhood graph is built on it ([`rips`]), its persistent
//! components at infinity give the classes of σ_N ([`sigma`]), and the levels
//! with their bonding maps form a direct sequence ([`dirseq`]). Coarse maps act
//! on these sequences through [`functor`]. [`seqcore`] holds the literal
//! sequence-level definitions used as a brute-force oracle.

pub mod space;
pub mod rips;
pub mod dirseq;
pub mod sigma;
pub mod seqcore;
pub mod functor;
pub mod examples;
