//! SAGE core: conceptual representations, the `.abm` language, verification,
//! simulation, objective criteria, text generation, the two-stage pipeline and
//! evaluation metrics.

pub mod criteria;
pub mod defect;
pub mod dsl;
pub mod eval;
pub mod generator;
pub mod pipeline;
pub mod representation;
pub mod simulator;
pub mod verifier1;

pub use defect::Defect;
