//! File-based SPMD message passing, node-aware collectives and partitioned
//! global arrays.
//!
//! Ranks exchange messages by writing files into per-rank mailbox
//! directories, either on a shared filesystem or staged locally and shipped
//! with a remote-copy command. On top of that sit a communicator with
//! broadcast, gather and barrier, distributed arrays with block, cyclic and
//! block-cyclic maps, a local SPMD launcher and a benchmark harness.

pub mod array;
pub mod bench;
pub mod collectives;
pub mod comm;
pub mod launcher;
pub mod pgas;
pub mod transport;

/// Process index within an SPMD job, `0..size`.
pub type Rank = usize;
/// Message tag. User tags are below `2^30`.
pub type Tag = u32;

pub use array::{DenseArray, Element, Fill};
pub use collectives::{bcast, gather_tree, BcastVariant};
pub use comm::{CommContext, CommError, NodeMap, NodeTopology, Triples};
pub use pgas::{agg, halo_sync, redistribute, DimDist, DistArray, DistMap, GridOrder};
pub use transport::{Payload, TransportConfig, TransportMode};

pub use launcher::run_threads;
