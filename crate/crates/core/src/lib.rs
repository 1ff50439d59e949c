//! Maximum error impact estimation for tasksets with data-driven dependencies.
//!
//! Task instances become nodes of an error-propagation graph (EPG). An edge
//! points from a producer to every consumer of its output, so an error in a
//! task can reach exactly its descendants. Under the worst-case assumption
//! that any erroneous input yields erroneous output, the global impact of a
//! node is its own local impact plus the local impact of every distinct
//! descendant.
//!
//! The crate is organized as:
//!
//! - [`epg`]: graph construction and sealing.
//! - [`impact`]: the three impact backends (traversal oracle, chunked bitset
//!   closure, and a cheap over-approximating bound).
//! - [`builder`]: task/channel front end with epoch management.
//! - [`h264`]: macroblock dependency rules and the trace-to-EPG fold.
//! - [`trace`]: dependency trace format and a seeded synthetic generator.
//! - [`fault_sim`]: fault injection used to validate the estimate.
//! - [`report`] and [`histogram`]: tabular outputs.

pub mod builder;
pub mod epg;
pub mod fault_sim;
pub mod h264;
pub mod histogram;
pub mod impact;
pub mod report;
pub mod trace;

pub use builder::{open_epoch, BuildError, Epoch, TaskRecord};
pub use epg::{EpgBuilder, EpgError, NodeId, SealedEpg};
pub use fault_sim::{FaultSimulator, InjectionOutcome, SimError, SweepReport};
pub use impact::{
    impact_exact, impact_exact_chunked, impact_fast_bound, impact_oracle, ImpactBackend,
    ImpactVector, DEFAULT_CHUNK_NODES,
};
