//! Dense row-major arrays and the element types that can travel in a message.

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::transport::frame::ElementType;

/// A scalar type that can be stored in a [`DenseArray`] and encoded on the wire.
pub trait Element: Copy + PartialEq + Debug + Send + Sync + 'static {
    const TYPE: ElementType;
    /// Encoded width in bytes.
    const SIZE: usize;

    fn zero() -> Self;
    fn one() -> Self;
    fn write_le(self, out: &mut Vec<u8>);
    /// `bytes` is exactly `SIZE` long.
    fn read_le(bytes: &[u8]) -> Self;
    /// Maps one 64-bit draw of the keyed generator onto this type.
    fn from_random_bits(rng: &mut ChaCha8Rng) -> Self;
}

impl Element for f64 {
    const TYPE: ElementType = ElementType::Float64;
    const SIZE: usize = 8;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }
    fn from_random_bits(rng: &mut ChaCha8Rng) -> Self {
        rng.gen::<f64>()
    }
}

impl Element for i64 {
    const TYPE: ElementType = ElementType::Int64;
    const SIZE: usize = 8;

    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        i64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }
    fn from_random_bits(rng: &mut ChaCha8Rng) -> Self {
        rng.gen::<i64>()
    }
}

impl Element for u8 {
    const TYPE: ElementType = ElementType::UInt8;
    const SIZE: usize = 1;

    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }
    fn read_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
    fn from_random_bits(rng: &mut ChaCha8Rng) -> Self {
        rng.gen::<u8>()
    }
}

/// Value at global row-major position `index` of a seeded random array.
///
/// The stream is keyed by `(seed, index)` so any rank can generate any cell
/// without generating the cells before it.
pub fn keyed_random<T: Element>(seed: u64, index: u64) -> T {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // two 32-bit words per index leaves room for one u64 draw per cell
    rng.set_word_pos(u128::from(index) * 2);
    T::from_random_bits(&mut rng)
}

/// Contents used to initialize a constructed array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fill {
    Zero,
    One,
    Random { seed: u64 },
}

impl Fill {
    pub fn value_at<T: Element>(self, global_linear: u64) -> T {
        match self {
            Fill::Zero => T::zero(),
            Fill::One => T::one(),
            Fill::Random { seed } => keyed_random(seed, global_linear),
        }
    }
}

/// Row-major strides for `dims`.
pub fn row_major_strides(dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    strides
}

/// An owned, row-major, up-to-4-D array. A zero-dimensional array is a scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Element> DenseArray<T> {
    pub fn from_vec(dims: Vec<usize>, data: Vec<T>) -> Option<Self> {
        let expected: usize = dims.iter().product();
        (expected == data.len()).then_some(Self { dims, data })
    }

    pub fn filled(dims: Vec<usize>, value: T) -> Self {
        let n = dims.iter().product();
        Self { dims, data: vec![value; n] }
    }

    /// Serial construction; random fills are keyed by row-major position.
    pub fn constant(dims: Vec<usize>, fill: Fill) -> Self {
        let n: usize = dims.iter().product();
        let data = (0..n as u64).map(|i| fill.value_at(i)).collect();
        Self { dims, data }
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        Self::constant(dims, Fill::Zero)
    }

    pub fn ones(dims: Vec<usize>) -> Self {
        Self::constant(dims, Fill::One)
    }

    pub fn rand(dims: Vec<usize>, seed: u64) -> Self {
        Self::constant(dims, Fill::Random { seed })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.dims.len(), "index rank mismatch");
        let mut off = 0;
        for (k, (&i, &n)) in index.iter().zip(&self.dims).enumerate() {
            assert!(i < n, "index {i} out of bounds {n} in dimension {k}");
            off = off * n + i;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> T {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: T) {
        let off = self.offset(index);
        self.data[off] = value;
    }

    /// Little-endian element bytes in row-major order.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() * T::SIZE);
        for &v in &self.data {
            v.write_le(&mut out);
        }
        out
    }

    pub fn from_le_bytes(dims: Vec<usize>, bytes: &[u8]) -> Option<Self> {
        let n: usize = dims.iter().product();
        if bytes.len() != n * T::SIZE {
            return None;
        }
        let data = bytes.chunks_exact(T::SIZE).map(T::read_le).collect();
        Some(Self { dims, data })
    }
}
