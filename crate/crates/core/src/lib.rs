//! Single-qubit gates from relativistic motion of a two-level detector
//! through a cavity field.
//!
//! The detector couples to a massless scalar field in a one-dimensional
//! Dirichlet cavity through its monopole moment. Along a chosen worldline
//! the perturbative evolution of the reduced qubit state is assembled from
//! oscillatory phase integrals; with a coherent state in one mode the
//! leading order is a pure Bloch-sphere rotation whose axis is steered by
//! the acceleration. An exact truncated-Fock-space solver cross-checks the
//! perturbative results.

pub mod cavity;
pub mod error;
pub mod oracle;
pub mod oscillatory;
pub mod perturbation;
pub mod rotation;
pub mod synthesis;
pub mod worldline;

pub use cavity::CavityConfig;
pub use error::{Error, Result};
pub use oscillatory::{QuadratureOptions, Sign};
pub use worldline::{SegmentKind, TrajectorySegment, UnitSystem};
