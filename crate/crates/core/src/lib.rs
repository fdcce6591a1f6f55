//! Closed-form fidelity projections of positive semidefinite matrices onto
//! channel-defined constraint sets, and the constructions built on them:
//! pretty-good measurements, prior–channel decompositions, Petz recovery,
//! state-over-time assignments, minimal-change reverse channels, and
//! channel distances — all cross-checked by brute-force numerical oracles.

pub mod chanrep;
pub mod decomp;
pub mod error;
pub mod matcore;
pub mod oracle;
pub mod projector;

pub use chanrep::{ChannelClass, ChannelRep, HpMap};
pub use error::{Error, Result};
pub use matcore::{CMat, CVec, PsdMatrix, Tolerances};
