//! On-disk payload frame.
//!
//! Every message file holds exactly one frame:
//!
//! ```text
//! offset  size        field
//! 0       4           magic  "FCMF"
//! 4       2           version (u16 LE, currently 1)
//! 6       1           kind (0 = raw bytes, 1 = numeric array)
//! 7       1           element type (0 = f64, 1 = i64, 2 = u8)
//! 8       1           ndim (0..=4)
//! 9       8 * ndim    dims (u64 LE each)
//! ..      rest        body, row-major little-endian elements
//! ```
//!
//! A raw-bytes frame has `ndim = 0` and its body is the remainder of the
//! file. A numeric frame's body is exactly `element size * product(dims)`
//! bytes, so a zero-dimensional numeric frame carries one scalar.

use thiserror::Error;

use crate::array::{DenseArray, Element};

pub const MAGIC: [u8; 4] = *b"FCMF";
pub const VERSION: u16 = 1;
pub const MAX_DIMS: usize = 4;
/// Fixed prefix before the dims.
pub const HEADER_LEN: usize = 9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("body length {actual} does not match dims (expected {expected} bytes)")]
    DimensionMismatch { expected: u64, actual: u64 },
    #[error("too many dimensions: {0} (max 4)")]
    TooManyDims(usize),
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("truncated frame: need {needed} bytes, have {have}")]
    Truncated { needed: u64, have: u64 },
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u16),
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("{0} trailing bytes after numeric body")]
    TrailingBytes(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum PayloadKind {
    RawBytes = 0,
    NumericArray = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ElementType {
    Float64 = 0,
    Int64 = 1,
    UInt8 = 2,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::Float64 | ElementType::Int64 => 8,
            ElementType::UInt8 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ElementType::Float64),
            1 => Some(ElementType::Int64),
            2 => Some(ElementType::UInt8),
            _ => None,
        }
    }
}

impl PayloadKind {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(PayloadKind::RawBytes),
            1 => Some(PayloadKind::NumericArray),
            _ => None,
        }
    }
}

/// A decoded frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: PayloadKind,
    pub element_type: ElementType,
    pub dims: Vec<u64>,
    pub body: Vec<u8>,
}

fn expected_body_len(element_type: ElementType, dims: &[u64]) -> Option<u64> {
    dims.iter()
        .try_fold(element_type.size() as u64, |acc, &d| acc.checked_mul(d))
}

pub fn encode_payload(
    kind: PayloadKind,
    element_type: ElementType,
    dims: &[u64],
    body: &[u8],
) -> Result<Vec<u8>, FrameError> {
    if dims.len() > MAX_DIMS {
        return Err(FrameError::TooManyDims(dims.len()));
    }
    match kind {
        PayloadKind::RawBytes if !dims.is_empty() => {
            return Err(FrameError::InvalidHeader("raw-bytes frames carry no dims".into()));
        }
        PayloadKind::NumericArray => {
            let expected = expected_body_len(element_type, dims)
                .ok_or_else(|| FrameError::InvalidHeader("dims overflow".into()))?;
            if expected != body.len() as u64 {
                return Err(FrameError::DimensionMismatch {
                    expected,
                    actual: body.len() as u64,
                });
            }
        }
        PayloadKind::RawBytes => {}
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * dims.len() + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind as u8);
    out.push(element_type as u8);
    out.push(dims.len() as u8);
    for d in dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(body);
    Ok(out)
}

/// Parses the header and returns the frame plus the body offset.
fn decode_header(bytes: &[u8]) -> Result<(PayloadKind, ElementType, Vec<u64>, usize), FrameError> {
    let have = bytes.len() as u64;
    if bytes.len() < MAGIC.len() {
        return Err(FrameError::Truncated { needed: HEADER_LEN as u64, have });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(FrameError::Truncated { needed: HEADER_LEN as u64, have });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FrameError::UnsupportedVersion(version));
    }
    let kind = PayloadKind::from_code(bytes[6])
        .ok_or_else(|| FrameError::InvalidHeader(format!("kind code {}", bytes[6])))?;
    let element_type = ElementType::from_code(bytes[7])
        .ok_or_else(|| FrameError::InvalidHeader(format!("element type code {}", bytes[7])))?;
    let ndim = bytes[8] as usize;
    if ndim > MAX_DIMS {
        return Err(FrameError::TooManyDims(ndim));
    }
    if kind == PayloadKind::RawBytes && ndim != 0 {
        return Err(FrameError::InvalidHeader("raw-bytes frames carry no dims".into()));
    }
    let body_at = HEADER_LEN + 8 * ndim;
    if bytes.len() < body_at {
        return Err(FrameError::Truncated { needed: body_at as u64, have });
    }
    let dims = bytes[HEADER_LEN..body_at]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((kind, element_type, dims, body_at))
}

pub fn decode_payload(bytes: &[u8]) -> Result<Frame, FrameError> {
    let (kind, element_type, dims, body_at) = decode_header(bytes)?;
    let body = &bytes[body_at..];
    if kind == PayloadKind::NumericArray {
        let expected = expected_body_len(element_type, &dims)
            .ok_or_else(|| FrameError::InvalidHeader("dims overflow".into()))?;
        let actual = body.len() as u64;
        if actual < expected {
            return Err(FrameError::Truncated {
                needed: body_at as u64 + expected,
                have: bytes.len() as u64,
            });
        }
        if actual > expected {
            return Err(FrameError::TrailingBytes(actual - expected));
        }
    }
    Ok(Frame { kind, element_type, dims, body: body.to_vec() })
}

/// A typed message value, the unit exchanged by `send`/`recv`.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Bytes(Vec<u8>),
    F64(DenseArray<f64>),
    I64(DenseArray<i64>),
    U8(DenseArray<u8>),
}

impl Payload {
    pub fn empty() -> Self {
        Payload::Bytes(Vec::new())
    }

    pub fn encode(&self) -> Vec<u8> {
        fn array<T: Element>(a: &DenseArray<T>) -> Vec<u8> {
            let dims: Vec<u64> = a.dims().iter().map(|&d| d as u64).collect();
            encode_payload(PayloadKind::NumericArray, T::TYPE, &dims, &a.to_le_bytes())
                .expect("dense arrays are consistent with their dims")
        }
        match self {
            Payload::Bytes(b) => encode_payload(PayloadKind::RawBytes, ElementType::UInt8, &[], b)
                .expect("raw frames always encode"),
            Payload::F64(a) => array(a),
            Payload::I64(a) => array(a),
            Payload::U8(a) => array(a),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        Self::try_from(decode_payload(bytes)?)
    }

    /// Size of the body in bytes, excluding the header.
    pub fn body_len(&self) -> usize {
        match self {
            Payload::Bytes(b) => b.len(),
            Payload::F64(a) => a.len() * 8,
            Payload::I64(a) => a.len() * 8,
            Payload::U8(a) => a.len(),
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Payload::Bytes(b) => Some(b),
            _ => None,
        }
    }

    pub fn into_bytes(self) -> Option<Vec<u8>> {
        match self {
            Payload::Bytes(b) => Some(b),
            _ => None,
        }
    }
}

impl TryFrom<Frame> for Payload {
    type Error = FrameError;

    fn try_from(frame: Frame) -> Result<Self, FrameError> {
        if frame.kind == PayloadKind::RawBytes {
            return Ok(Payload::Bytes(frame.body));
        }
        let dims: Vec<usize> = frame.dims.iter().map(|&d| d as usize).collect();
        let bad = || FrameError::InvalidHeader("body does not fit dims".into());
        Ok(match frame.element_type {
            ElementType::Float64 => {
                Payload::F64(DenseArray::from_le_bytes(dims, &frame.body).ok_or_else(bad)?)
            }
            ElementType::Int64 => {
                Payload::I64(DenseArray::from_le_bytes(dims, &frame.body).ok_or_else(bad)?)
            }
            ElementType::UInt8 => {
                Payload::U8(DenseArray::from_le_bytes(dims, &frame.body).ok_or_else(bad)?)
            }
        })
    }
}

/// Conversion between typed arrays and [`Payload`] variants.
pub trait ArrayPayload: Element {
    fn wrap(a: DenseArray<Self>) -> Payload;
    fn unwrap(p: Payload) -> Option<DenseArray<Self>>;
}

macro_rules! array_payload {
    ($t:ty, $variant:ident) => {
        impl ArrayPayload for $t {
            fn wrap(a: DenseArray<Self>) -> Payload {
                Payload::$variant(a)
            }
            fn unwrap(p: Payload) -> Option<DenseArray<Self>> {
                match p {
                    Payload::$variant(a) => Some(a),
                    _ => None,
                }
            }
        }

        impl From<DenseArray<$t>> for Payload {
            fn from(a: DenseArray<$t>) -> Self {
                Payload::$variant(a)
            }
        }
    };
}

array_payload!(f64, F64);
array_payload!(i64, I64);
array_payload!(u8, U8);

impl From<Vec<u8>> for Payload {
    fn from(b: Vec<u8>) -> Self {
        Payload::Bytes(b)
    }
}
