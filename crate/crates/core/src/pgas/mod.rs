//! Partitioned global arrays.
//!
//! A [`DistMap`] says how a global array of up to four dimensions is cut over
//! a processor grid. A [`DistArray`] holds one rank's piece of such an array,
//! including halo cells for block dimensions with overlap. Collective
//! operations ([`halo_sync`], [`redistribute`], [`agg`]) must be called by
//! every rank of the world in the same order; ranks outside the maps involved
//! return without communicating.

pub mod array;
pub mod exchange;
pub mod map;

use thiserror::Error;

pub use array::{dist_constant, Constructed, DistArray};
pub use exchange::{agg, halo_sync, redistribute};
pub use map::{DimDist, DistMap, Extent, GridOrder, MAX_DIMS};

use crate::comm::CommError;
use crate::Rank;

#[derive(Debug, Error)]
pub enum PgasError {
    #[error("maps support 1 to {MAX_DIMS} dimensions, got {0}")]
    BadDimCount(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("grid holds {grid} processors but the processor list has {plist}")]
    GridPlistMismatch { grid: usize, plist: usize },
    #[error("rank {0} appears twice in the processor list")]
    DuplicateRank(Rank),
    #[error("grid position {position} out of range for {len} processors")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },
    #[error("rank {0} is not in the map")]
    RankNotInMap(Rank),
    #[error("unexpected payload: {0}")]
    UnexpectedPayload(String),
    #[error(transparent)]
    Comm(#[from] CommError),
}

pub type Result<T> = std::result::Result<T, PgasError>;
