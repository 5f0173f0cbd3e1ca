//! One rank's piece of a distributed array.

use super::map::{DistMap, Extent};
use super::{PgasError, Result};
use crate::array::{row_major_strides, DenseArray, Element, Fill};
use crate::Rank;

/// Calls `f(local_offset)` for every cell of the Cartesian product of the
/// per-dimension position lists, in row-major order.
pub(crate) fn for_each_offset(positions: &[Vec<usize>], local_dims: &[usize], mut f: impl FnMut(usize)) {
    if positions.iter().any(Vec::is_empty) {
        return;
    }
    let strides = row_major_strides(local_dims);
    let d = positions.len();
    let mut digit = vec![0usize; d];
    loop {
        let off: usize = (0..d).map(|k| positions[k][digit[k]] * strides[k]).sum();
        f(off);
        let mut k = d;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            digit[k] += 1;
            if digit[k] < positions[k].len() {
                break;
            }
            digit[k] = 0;
        }
    }
}

/// Sums `lists[0][i0] + lists[1][i1] + ...` over the Cartesian product, in
/// row-major order.
fn cartesian_sums(lists: &[Vec<usize>]) -> Vec<u64> {
    let mut out = vec![0u64];
    for list in lists {
        out = out.iter().flat_map(|&base| list.iter().map(move |&v| base + v as u64)).collect();
    }
    out
}

/// Copies the selected cells out of `local` in row-major order.
pub(crate) fn pack<T: Element>(local: &DenseArray<T>, positions: &[Vec<usize>]) -> Vec<T> {
    let data = local.as_slice();
    let mut out = Vec::with_capacity(positions.iter().map(Vec::len).product());
    for_each_offset(positions, local.dims(), |off| out.push(data[off]));
    out
}

/// Inverse of [`pack`]. Returns the number of values consumed.
pub(crate) fn unpack<T: Element>(local: &mut DenseArray<T>, positions: &[Vec<usize>], values: &[T]) -> usize {
    let dims = local.dims().to_vec();
    let data = local.as_mut_slice();
    let mut at = 0;
    for_each_offset(positions, &dims, |off| {
        data[off] = values[at];
        at += 1;
    });
    at
}

/// A global array's map plus this rank's stored block.
///
/// The stored block covers the owned extent widened by the overlap on block
/// dimensions; its local dimensions are the per-dimension index counts of the
/// stored extent. Ranks outside the map hold an empty block.
#[derive(Debug, Clone, PartialEq)]
pub struct DistArray<T> {
    global_dims: Vec<usize>,
    map: DistMap,
    rank: Rank,
    owned: Extent,
    stored: Extent,
    local: DenseArray<T>,
}

/// Result of a constructor that may or may not be given a map.
#[derive(Debug, Clone, PartialEq)]
pub enum Constructed<T> {
    Plain(DenseArray<T>),
    Distributed(DistArray<T>),
}

impl<T> Constructed<T> {
    pub fn into_plain(self) -> Option<DenseArray<T>> {
        match self {
            Constructed::Plain(a) => Some(a),
            Constructed::Distributed(_) => None,
        }
    }

    pub fn into_distributed(self) -> Option<DistArray<T>> {
        match self {
            Constructed::Distributed(a) => Some(a),
            Constructed::Plain(_) => None,
        }
    }
}

/// Builds a filled array: distributed when a map is given, plain otherwise.
pub fn dist_constant<T: Element>(
    global_dims: &[usize],
    fill: Fill,
    map: Option<&DistMap>,
    rank: Rank,
) -> Result<Constructed<T>> {
    match map {
        None => Ok(Constructed::Plain(DenseArray::constant(global_dims.to_vec(), fill))),
        Some(m) => DistArray::constant(global_dims, fill, m.clone(), rank).map(Constructed::Distributed),
    }
}

impl<T: Element> DistArray<T> {
    /// Every stored cell, halo included, gets the value the serial
    /// construction would hold at the same global index.
    pub fn constant(global_dims: &[usize], fill: Fill, map: DistMap, rank: Rank) -> Result<Self> {
        let mut a = Self::zeros(global_dims, map, rank)?;
        if fill == Fill::Zero {
            return Ok(a);
        }
        let global_strides = row_major_strides(global_dims);
        let indices = a.stored.indices();
        // global positions along each dimension, pre-multiplied by stride
        let scaled: Vec<Vec<usize>> = indices
            .iter()
            .zip(&global_strides)
            .map(|(ix, &s)| ix.iter().map(|&i| i * s).collect())
            .collect();
        let linear = cartesian_sums(&scaled);
        let data = a.local.as_mut_slice();
        for (v, g) in data.iter_mut().zip(linear) {
            *v = fill.value_at(g);
        }
        Ok(a)
    }

    pub fn zeros(global_dims: &[usize], map: DistMap, rank: Rank) -> Result<Self> {
        let owned = map.owned_or_empty(global_dims, rank)?;
        let stored = map.stored_extent(global_dims, rank)?;
        let local = DenseArray::filled(stored.counts(), T::zero());
        Ok(Self { global_dims: global_dims.to_vec(), map, rank, owned, stored, local })
    }

    pub fn ones(global_dims: &[usize], map: DistMap, rank: Rank) -> Result<Self> {
        Self::constant(global_dims, Fill::One, map, rank)
    }

    pub fn rand(global_dims: &[usize], map: DistMap, rank: Rank, seed: u64) -> Result<Self> {
        Self::constant(global_dims, Fill::Random { seed }, map, rank)
    }

    pub fn global_dims(&self) -> &[usize] {
        &self.global_dims
    }

    pub fn map(&self) -> &DistMap {
        &self.map
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn owned_extent(&self) -> &Extent {
        &self.owned
    }

    pub fn stored_extent(&self) -> &Extent {
        &self.stored
    }

    /// Stored block, halo included.
    pub fn local(&self) -> &DenseArray<T> {
        &self.local
    }

    pub fn local_mut(&mut self) -> &mut DenseArray<T> {
        &mut self.local
    }

    /// Copy of the owned cells (halo excluded) and their global extent.
    pub fn local_part(&self) -> (DenseArray<T>, Extent) {
        let positions = self.stored.positions_of(&self.owned);
        let data = pack(&self.local, &positions);
        let dense = DenseArray::from_vec(self.owned.counts(), data).expect("owned counts match packed length");
        (dense, self.owned.clone())
    }

    /// Applies `f` to every owned cell, passing its global index.
    pub fn map_owned(&mut self, mut f: impl FnMut(&[usize], T) -> T) {
        let positions = self.stored.positions_of(&self.owned);
        let indices = self.owned.indices();
        let dims = self.local.dims().to_vec();
        let d = indices.len();
        let mut digit = vec![0usize; d];
        let mut index = vec![0usize; d];
        let data = self.local.as_mut_slice();
        for_each_offset(&positions, &dims, |off| {
            for k in 0..d {
                index[k] = indices[k][digit[k]];
            }
            data[off] = f(&index, data[off]);
            for k in (0..d).rev() {
                digit[k] += 1;
                if digit[k] < indices[k].len() {
                    break;
                }
                digit[k] = 0;
            }
        });
    }

    fn local_index(&self, global: &[usize]) -> Option<Vec<usize>> {
        if global.len() != self.global_dims.len() || !self.stored.contains(global) {
            return None;
        }
        let single = Extent { dims: global.iter().map(|&i| vec![i..i + 1]).collect() };
        Some(self.stored.positions_of(&single).into_iter().map(|p| p[0]).collect())
    }

    /// Value at a global index if it is stored here (owned or halo).
    pub fn get(&self, global: &[usize]) -> Option<T> {
        self.local_index(global).map(|ix| self.local.get(&ix))
    }

    /// Writes a stored cell. Fails if the index is not stored on this rank.
    pub fn set(&mut self, global: &[usize], value: T) -> Result<()> {
        let ix = self.local_index(global).ok_or_else(|| PgasError::IndexOutOfRange {
            index: global.to_vec(),
            dims: self.global_dims.clone(),
        })?;
        self.local.set(&ix, value);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgas::{DimDist, GridOrder};

    fn block4() -> DistMap {
        DistMap::block(vec![4], vec![0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn plain_without_map() {
        let a = dist_constant::<f64>(&[4, 4], Fill::Zero, None, 0).unwrap().into_plain().unwrap();
        assert_eq!(a.dims(), &[4, 4]);
        assert!(a.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_layout_sizes() {
        for r in 0..4 {
            let a = DistArray::<f64>::zeros(&[8], block4(), r).unwrap();
            assert_eq!(a.local_part().0.len(), 2);
        }
        let a = DistArray::<f64>::zeros(&[10], block4(), 1).unwrap();
        let (part, ext) = a.local_part();
        assert_eq!(part.len(), 3);
        assert_eq!(ext.dims, vec![vec![2..5]]);
    }

    #[test]
    fn serial_map_holds_everything() {
        let m = DistMap::serial(2, 0).unwrap();
        let a = DistArray::<i64>::rand(&[3, 5], m, 0, 9).unwrap();
        let (part, ext) = a.local_part();
        assert_eq!(ext, Extent::full(&[3, 5]));
        assert_eq!(part, DenseArray::rand(vec![3, 5], 9));
    }

    #[test]
    fn halo_is_stored_but_not_owned() {
        let m = DistMap::new(vec![3], Some(vec![DimDist::Block { overlap: 1 }]), vec![0, 1, 2], GridOrder::RowMajor)
            .unwrap();
        let a = DistArray::<f64>::rand(&[9], m, 1, 3).unwrap();
        assert_eq!(a.local().len(), 5);
        assert_eq!(a.local_part().0.len(), 3);
        let serial = DenseArray::<f64>::rand(vec![9], 3);
        for i in 2..7 {
            assert_eq!(a.get(&[i]), Some(serial.get(&[i])));
        }
        assert_eq!(a.get(&[1]), None);
    }

    #[test]
    fn non_member_is_empty() {
        let a = DistArray::<f64>::ones(&[8], block4(), 9).unwrap();
        assert!(a.local().is_empty());
        assert!(a.owned_extent().is_empty());
    }

    #[test]
    fn random_fill_matches_serial_on_cyclic() {
        let m = DistMap::new(
            vec![2, 2],
            Some(vec![DimDist::Cyclic, DimDist::BlockCyclic { block: 2 }]),
            vec![0, 1, 2, 3],
            GridOrder::ColumnMajor,
        )
        .unwrap();
        let serial = DenseArray::<u8>::rand(vec![5, 7], 11);
        for r in 0..4 {
            let a = DistArray::<u8>::rand(&[5, 7], m.clone(), r, 11).unwrap();
            for i in 0..5 {
                for j in 0..7 {
                    if let Some(v) = a.get(&[i, j]) {
                        assert_eq!(v, serial.get(&[i, j]));
                    }
                }
            }
        }
    }

    #[test]
    fn map_owned_sees_global_indices() {
        let mut a = DistArray::<i64>::zeros(&[4, 4], DistMap::block(vec![2, 2], vec![0, 1, 2, 3]).unwrap(), 3).unwrap();
        a.map_owned(|ix, _| (ix[0] * 10 + ix[1]) as i64);
        assert_eq!(a.get(&[2, 3]), Some(23));
        assert_eq!(a.get(&[3, 2]), Some(32));
        assert!(a.set(&[0, 0], 1).is_err());
    }

    #[test]
    fn pack_unpack_round_trip() {
        let mut local = DenseArray::<i64>::from_vec(vec![3, 4], (0..12).collect()).unwrap();
        let pos = vec![vec![0, 2], vec![1, 3]];
        assert_eq!(pack(&local, &pos), vec![1, 3, 9, 11]);
        assert_eq!(unpack(&mut local, &pos, &[-1, -3, -9, -11]), 4);
        assert_eq!(local.get(&[2, 3]), -11);
    }
}
