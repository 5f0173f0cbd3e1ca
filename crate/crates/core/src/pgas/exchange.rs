//! Collective operations on distributed arrays.
//!
//! Each call draws one reserved tag on every rank. A message between a given
//! sender and receiver is unique within a call, so the tag plus the pair in
//! the message file name identify it without further numbering.

use super::array::{pack, unpack, DistArray};
use super::map::{DistMap, Extent};
use super::{PgasError, Result};
use crate::array::DenseArray;
use crate::collectives::gather_group;
use crate::comm::CommContext;
use crate::transport::ArrayPayload;
use crate::{Rank, Tag};

fn send_block<T: ArrayPayload>(ctx: &CommContext, dest: Rank, tag: Tag, values: Vec<T>) -> Result<()> {
    let n = values.len();
    let dense = DenseArray::from_vec(vec![n], values).expect("1-D length matches");
    ctx.send_internal(dest, tag, &T::wrap(dense))?;
    Ok(())
}

fn recv_block<T: ArrayPayload>(ctx: &CommContext, source: Rank, tag: Tag, expected: usize) -> Result<Vec<T>> {
    let payload = ctx.recv_internal(source, tag)?;
    let dense = T::unwrap(payload)
        .ok_or_else(|| PgasError::UnexpectedPayload(format!("block from rank {source} has the wrong element type")))?;
    if dense.len() != expected {
        return Err(PgasError::UnexpectedPayload(format!(
            "block from rank {source} has {} elements, expected {expected}",
            dense.len()
        )));
    }
    Ok(dense.into_vec())
}

/// Refreshes every halo cell from the rank that owns it.
///
/// Array-edge margins have no owner and are left alone. Maps without overlap
/// communicate nothing.
pub fn halo_sync<T: ArrayPayload>(ctx: &CommContext, darr: &mut DistArray<T>) -> Result<()> {
    let tag = ctx.next_reserved_tag();
    let map = darr.map().clone();
    let me = ctx.rank();
    if !map.has_overlap() || !map.contains(me) {
        return Ok(());
    }
    let dims = darr.global_dims().to_vec();
    let my_owned = darr.owned_extent().clone();
    let my_stored = darr.stored_extent().clone();
    for &r in map.plist() {
        if r == me {
            continue;
        }
        let region = my_owned.intersect(&map.stored_extent(&dims, r)?);
        if !region.is_empty() {
            send_block(ctx, r, tag, pack(darr.local(), &my_stored.positions_of(&region)))?;
        }
    }
    for &s in map.plist() {
        if s == me {
            continue;
        }
        let region = map.owned_extent(&dims, s)?.intersect(&my_stored);
        if !region.is_empty() {
            let values = recv_block::<T>(ctx, s, tag, region.len())?;
            unpack(darr.local_mut(), &my_stored.positions_of(&region), &values);
        }
    }
    Ok(())
}

/// Moves the owned data of `darr` onto `new_map`.
///
/// Every rank whose old owned extent intersects another rank's new owned
/// extent sends that intersection, packed row-major, in a single message.
/// Halos of the result are then filled by [`halo_sync`] if the new map has
/// overlap.
pub fn redistribute<T: ArrayPayload>(ctx: &CommContext, darr: &DistArray<T>, new_map: &DistMap) -> Result<DistArray<T>> {
    let tag = ctx.next_reserved_tag();
    let old_map = darr.map();
    if new_map.ndim() != old_map.ndim() {
        return Err(PgasError::DimensionMismatch { expected: old_map.ndim(), got: new_map.ndim() });
    }
    if new_map == old_map {
        return Ok(darr.clone());
    }
    let me = ctx.rank();
    let dims = darr.global_dims().to_vec();
    let mut out = DistArray::<T>::zeros(&dims, new_map.clone(), me)?;
    let old_owned = darr.owned_extent().clone();
    let old_stored = darr.stored_extent().clone();
    let new_owned = out.owned_extent().clone();
    let new_stored = out.stored_extent().clone();

    if !old_owned.is_empty() {
        for &r in new_map.plist() {
            let region = old_owned.intersect(&new_map.owned_extent(&dims, r)?);
            if region.is_empty() {
                continue;
            }
            let values = pack(darr.local(), &old_stored.positions_of(&region));
            if r == me {
                unpack(out.local_mut(), &new_stored.positions_of(&region), &values);
            } else {
                send_block(ctx, r, tag, values)?;
            }
        }
    }
    if !new_owned.is_empty() {
        for &s in old_map.plist() {
            if s == me {
                continue;
            }
            let region = old_map.owned_extent(&dims, s)?.intersect(&new_owned);
            if region.is_empty() {
                continue;
            }
            let values = recv_block::<T>(ctx, s, tag, region.len())?;
            unpack(out.local_mut(), &new_stored.positions_of(&region), &values);
        }
    }
    if new_map.has_overlap() {
        halo_sync(ctx, &mut out)?;
    }
    Ok(out)
}

/// Assembles the global array at the smallest rank of the map's processor
/// list. Every other rank returns `None`.
pub fn agg<T: ArrayPayload>(ctx: &CommContext, darr: &DistArray<T>) -> Result<Option<DenseArray<T>>> {
    let tag = ctx.next_reserved_tag();
    let map = darr.map();
    let (part, _) = darr.local_part();
    let Some(parts) = gather_group(ctx, tag, map.plist(), &T::wrap(part))? else {
        return Ok(None);
    };
    let dims = darr.global_dims().to_vec();
    let full = Extent::full(&dims);
    let mut out = DenseArray::filled(dims.clone(), T::zero());
    let mut ranks: Vec<Rank> = map.plist().to_vec();
    ranks.sort_unstable();
    for (r, payload) in ranks.into_iter().zip(parts) {
        let owned = map.owned_extent(&dims, r)?;
        let block = T::unwrap(payload)
            .ok_or_else(|| PgasError::UnexpectedPayload(format!("agg block from rank {r} has the wrong element type")))?;
        if block.len() != owned.len() {
            return Err(PgasError::UnexpectedPayload(format!(
                "agg block from rank {r} has {} elements, expected {}",
                block.len(),
                owned.len()
            )));
        }
        unpack(&mut out, &full.positions_of(&owned), block.as_slice());
    }
    Ok(Some(out))
}
