//! Maps: how a global array is cut up and which rank owns which piece.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::ops::Range;
use std::str::FromStr;

use super::{PgasError, Result};
use crate::comm::cut_points;
use crate::Rank;

pub const MAX_DIMS: usize = 4;

/// Per-dimension distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DimDist {
    /// Contiguous slabs, with `overlap` halo cells on each side.
    Block { overlap: usize },
    /// Index `i` goes to grid coordinate `i mod g`.
    Cyclic,
    /// Blocks of `block` indices dealt round-robin.
    BlockCyclic { block: usize },
}

impl DimDist {
    pub const BLOCK: DimDist = DimDist::Block { overlap: 0 };

    pub fn overlap(&self) -> usize {
        match *self {
            DimDist::Block { overlap } => overlap,
            _ => 0,
        }
    }

    /// Grid coordinate owning index `i` of a dimension of length `n` split `g` ways.
    pub fn coord_of(&self, n: usize, g: usize, i: usize) -> usize {
        match *self {
            DimDist::Block { .. } => {
                // largest j with floor(j*n/g) <= i
                let mut j = ((i + 1) * g).saturating_sub(1) / n.max(1);
                while j > 0 && j * n / g > i {
                    j -= 1;
                }
                while j + 1 < g && (j + 1) * n / g <= i {
                    j += 1;
                }
                j
            }
            DimDist::Cyclic => i % g,
            DimDist::BlockCyclic { block } => (i / block) % g,
        }
    }

    /// Maximal contiguous ranges owned by grid coordinate `coord`.
    pub fn ranges(&self, n: usize, g: usize, coord: usize) -> Vec<Range<usize>> {
        match *self {
            DimDist::Block { .. } => {
                let cuts = cut_points(n, g);
                let r = cuts[coord]..cuts[coord + 1];
                if r.is_empty() {
                    Vec::new()
                } else {
                    vec![r]
                }
            }
            DimDist::Cyclic => DimDist::BlockCyclic { block: 1 }.ranges(n, g, coord),
            DimDist::BlockCyclic { block } => {
                let mut out: Vec<Range<usize>> = Vec::new();
                let mut k = coord;
                while k * block < n {
                    let r = k * block..((k + 1) * block).min(n);
                    match out.last_mut() {
                        Some(last) if last.end == r.start => last.end = r.end,
                        _ => out.push(r),
                    }
                    k += g;
                }
                out
            }
        }
    }
}

impl FromStr for DimDist {
    type Err = String;

    /// `block`, `block:<overlap>`, `cyclic`, or `bc:<block>`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> std::result::Result<usize, String> {
            a.ok_or_else(|| format!("{s:?} needs a number"))?
                .parse()
                .map_err(|_| format!("bad number in {s:?}"))
        };
        match head {
            "block" => Ok(DimDist::Block { overlap: arg.map_or(Ok(0), |a| num(Some(a)))? }),
            "cyclic" if arg.is_none() => Ok(DimDist::Cyclic),
            "bc" | "block-cyclic" => Ok(DimDist::BlockCyclic { block: num(arg)? }),
            _ => Err(format!("unknown distribution {s:?} (block[:overlap]|cyclic|bc:<block>)")),
        }
    }
}

impl fmt::Display for DimDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DimDist::Block { overlap: 0 } => f.write_str("block"),
            DimDist::Block { overlap } => write!(f, "block:{overlap}"),
            DimDist::Cyclic => f.write_str("cyclic"),
            DimDist::BlockCyclic { block } => write!(f, "bc:{block}"),
        }
    }
}

/// Ordering of processor positions onto the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum GridOrder {
    /// Last grid dimension varies fastest.
    #[default]
    RowMajor,
    /// First grid dimension varies fastest.
    ColumnMajor,
}

impl FromStr for GridOrder {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "row" | "row-major" | "C" => Ok(GridOrder::RowMajor),
            "col" | "column" | "column-major" | "F" => Ok(GridOrder::ColumnMajor),
            _ => Err(format!("unknown grid order {s:?} (row|column)")),
        }
    }
}

/// A set of global indices written as one list of sorted disjoint ranges per
/// dimension; the set is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extent {
    pub dims: Vec<Vec<Range<usize>>>,
}

fn intersect_ranges(a: &[Range<usize>], b: &[Range<usize>]) -> Vec<Range<usize>> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        let lo = a[i].start.max(b[j].start);
        let hi = a[i].end.min(b[j].end);
        if lo < hi {
            out.push(lo..hi);
        }
        if a[i].end < b[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }
    out
}

impl Extent {
    pub fn empty(ndim: usize) -> Self {
        Self { dims: vec![Vec::new(); ndim] }
    }

    pub fn full(global_dims: &[usize]) -> Self {
        Self {
            dims: global_dims.iter().map(|&n| if n == 0 { Vec::new() } else { vec![0..n] }).collect(),
        }
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Number of indices per dimension.
    pub fn counts(&self) -> Vec<usize> {
        self.dims.iter().map(|rs| rs.iter().map(|r| r.len()).sum()).collect()
    }

    pub fn len(&self) -> usize {
        self.counts().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, index: &[usize]) -> bool {
        self.dims.iter().zip(index).all(|(rs, &i)| rs.iter().any(|r| r.contains(&i)))
    }

    pub fn intersect(&self, other: &Extent) -> Extent {
        Extent {
            dims: self.dims.iter().zip(&other.dims).map(|(a, b)| intersect_ranges(a, b)).collect(),
        }
    }

    /// Positions of `subset`'s indices within this extent's compressed
    /// per-dimension numbering. `subset` must lie inside `self`.
    pub fn positions_of(&self, subset: &Extent) -> Vec<Vec<usize>> {
        if subset.is_empty() {
            return vec![Vec::new(); subset.ndim()];
        }
        self.dims
            .iter()
            .zip(&subset.dims)
            .map(|(mine, sub)| {
                let mut out = Vec::new();
                let mut base = 0;
                let mut k = 0;
                for r in sub {
                    while !(mine[k].start <= r.start && r.end <= mine[k].end) {
                        base += mine[k].len();
                        k += 1;
                    }
                    out.extend((r.start..r.end).map(|g| base + g - mine[k].start));
                }
                out
            })
            .collect()
    }

    /// Global indices per dimension, expanded.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        self.dims.iter().map(|rs| rs.iter().flat_map(|r| r.clone()).collect()).collect()
    }

    fn fmt_dim(rs: &[Range<usize>], out: &mut String) {
        if rs.is_empty() {
            out.push_str("{}");
        }
        for (k, r) in rs.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            let _ = write!(out, "[{},{})", r.start, r.end);
        }
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (k, rs) in self.dims.iter().enumerate() {
            if k > 0 {
                s.push_str(" x ");
            }
            Extent::fmt_dim(rs, &mut s);
        }
        f.write_str(&s)
    }
}

/// Grid, per-dimension distributions, processor list and grid order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistMap {
    grid: Vec<usize>,
    dists: Vec<DimDist>,
    plist: Vec<Rank>,
    order: GridOrder,
}

impl DistMap {
    /// Validates and builds a map. `dists = None` means block in every
    /// dimension without overlap.
    pub fn new(grid: Vec<usize>, dists: Option<Vec<DimDist>>, plist: Vec<Rank>, order: GridOrder) -> Result<Self> {
        let d = grid.len();
        if d == 0 || d > MAX_DIMS {
            return Err(PgasError::BadDimCount(d));
        }
        let dists = dists.unwrap_or_else(|| vec![DimDist::BLOCK; d]);
        if dists.len() != d {
            return Err(PgasError::DimensionMismatch { expected: d, got: dists.len() });
        }
        for (k, (&g, dist)) in grid.iter().zip(&dists).enumerate() {
            if g == 0 {
                return Err(PgasError::InvalidMap(format!("grid dimension {k} is zero")));
            }
            if let DimDist::BlockCyclic { block: 0 } = dist {
                return Err(PgasError::InvalidMap(format!("block size 0 in dimension {k}")));
            }
        }
        let product: usize = grid.iter().product();
        if product != plist.len() {
            return Err(PgasError::GridPlistMismatch { grid: product, plist: plist.len() });
        }
        let mut seen = HashSet::new();
        for &r in &plist {
            if !seen.insert(r) {
                return Err(PgasError::DuplicateRank(r));
            }
        }
        Ok(Self { grid, dists, plist, order })
    }

    /// Default block map over `plist` in row-major order.
    pub fn block(grid: Vec<usize>, plist: Vec<Rank>) -> Result<Self> {
        Self::new(grid, None, plist, GridOrder::RowMajor)
    }

    /// Everything on one rank: parallelism switched off.
    pub fn serial(ndim: usize, rank: Rank) -> Result<Self> {
        Self::new(vec![1; ndim], None, vec![rank], GridOrder::RowMajor)
    }

    pub fn ndim(&self) -> usize {
        self.grid.len()
    }

    pub fn grid(&self) -> &[usize] {
        &self.grid
    }

    pub fn dists(&self) -> &[DimDist] {
        &self.dists
    }

    pub fn plist(&self) -> &[Rank] {
        &self.plist
    }

    pub fn order(&self) -> GridOrder {
        self.order
    }

    pub fn has_overlap(&self) -> bool {
        self.dists.iter().any(|d| d.overlap() > 0)
    }

    /// Smallest rank in the processor list; target of `agg`.
    pub fn leader(&self) -> Rank {
        *self.plist.iter().min().expect("plist is non-empty")
    }

    pub fn contains(&self, rank: Rank) -> bool {
        self.plist.contains(&rank)
    }

    /// Grid coordinates of the `position`-th entry of the processor list.
    pub fn grid_coord(&self, position: usize) -> Result<Vec<usize>> {
        if position >= self.plist.len() {
            return Err(PgasError::PositionOutOfRange { position, len: self.plist.len() });
        }
        let mut coord = vec![0; self.ndim()];
        let mut rest = position;
        let dims: Vec<usize> = match self.order {
            GridOrder::RowMajor => (0..self.ndim()).rev().collect(),
            GridOrder::ColumnMajor => (0..self.ndim()).collect(),
        };
        for k in dims {
            coord[k] = rest % self.grid[k];
            rest /= self.grid[k];
        }
        Ok(coord)
    }

    /// Inverse of [`grid_coord`](Self::grid_coord).
    pub fn grid_position(&self, coord: &[usize]) -> usize {
        let dims: Vec<usize> = match self.order {
            GridOrder::RowMajor => (0..self.ndim()).collect(),
            GridOrder::ColumnMajor => (0..self.ndim()).rev().collect(),
        };
        dims.into_iter().fold(0, |acc, k| acc * self.grid[k] + coord[k])
    }

    fn check_dims(&self, global_dims: &[usize]) -> Result<()> {
        if global_dims.len() != self.ndim() {
            return Err(PgasError::DimensionMismatch { expected: self.ndim(), got: global_dims.len() });
        }
        Ok(())
    }

    pub fn owner_of(&self, global_dims: &[usize], index: &[usize]) -> Result<Rank> {
        self.check_dims(global_dims)?;
        if index.len() != global_dims.len() || index.iter().zip(global_dims).any(|(&i, &n)| i >= n) {
            return Err(PgasError::IndexOutOfRange { index: index.to_vec(), dims: global_dims.to_vec() });
        }
        let coord: Vec<usize> = (0..self.ndim())
            .map(|k| self.dists[k].coord_of(global_dims[k], self.grid[k], index[k]))
            .collect();
        Ok(self.plist[self.grid_position(&coord)])
    }

    /// Indices owned by `rank`, halo excluded.
    pub fn owned_extent(&self, global_dims: &[usize], rank: Rank) -> Result<Extent> {
        self.check_dims(global_dims)?;
        let pos = self.plist.iter().position(|&r| r == rank).ok_or(PgasError::RankNotInMap(rank))?;
        let coord = self.grid_coord(pos)?;
        Ok(Extent {
            dims: (0..self.ndim())
                .map(|k| self.dists[k].ranges(global_dims[k], self.grid[k], coord[k]))
                .collect(),
        })
    }

    /// Owned extent, or empty for ranks outside the map.
    pub fn owned_or_empty(&self, global_dims: &[usize], rank: Rank) -> Result<Extent> {
        match self.owned_extent(global_dims, rank) {
            Err(PgasError::RankNotInMap(_)) => Ok(Extent::empty(self.ndim())),
            other => other,
        }
    }

    /// Indices stored by `rank`: the owned extent widened by the overlap on
    /// block dimensions, clamped to the array. Empty if nothing is owned.
    pub fn stored_extent(&self, global_dims: &[usize], rank: Rank) -> Result<Extent> {
        let owned = self.owned_or_empty(global_dims, rank)?;
        if owned.is_empty() {
            return Ok(Extent::empty(self.ndim()));
        }
        let dims = owned
            .dims
            .iter()
            .enumerate()
            .map(|(k, rs)| match self.dists[k] {
                DimDist::Block { overlap } if overlap > 0 => {
                    let r = &rs[0];
                    vec![r.start.saturating_sub(overlap)..(r.end + overlap).min(global_dims[k])]
                }
                _ => rs.clone(),
            })
            .collect();
        Ok(Extent { dims })
    }

    /// One line per rank in processor-list order: `rank R: [lo,hi) x ...`.
    pub fn dump_extents(&self, global_dims: &[usize]) -> Result<String> {
        let mut out = String::new();
        for &r in &self.plist {
            let _ = writeln!(out, "rank {r}: {}", self.owned_extent(global_dims, r)?);
        }
        Ok(out)
    }
}
