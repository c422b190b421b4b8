//! Little-endian binary container for packed ternary weights and f32 test
//! matrices.
//!
//! Layout (16-byte header, then payload):
//!
//! ```text
//! 0  magic       b"TLMW"
//! 4  version     u8 (1)
//! 5  dtype       u8 (1 = packed ternary, 1-byte indices;
//!                    2 = packed ternary, 2-byte indices; 3 = f32)
//! 6  group_size  u8 (0 for f32)
//! 7  reserved    u8 (0)
//! 8  rows        u32
//! 12 cols        u32
//! 16 payload     rows * ceil(cols / group_size) indices, or rows * cols f32
//! ```

use std::io::{Read, Write};

use crate::attention::Matrix;
use crate::error::{Error, Result};
use crate::tlmm::PackedWeights;

pub const MAGIC: [u8; 4] = *b"TLMW";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    Ternary8 = 1,
    Ternary16 = 2,
    F32 = 3,
}

impl DType {
    fn from_u8(v: u8) -> Result<Self> {
        match v {
            1 => Ok(DType::Ternary8),
            2 => Ok(DType::Ternary16),
            3 => Ok(DType::F32),
            other => Err(Error::format("container header", format!("unknown dtype {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub dtype: DType,
    pub group_size: u8,
    pub rows: u32,
    pub cols: u32,
}

impl Header {
    fn to_bytes(self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&MAGIC);
        b[4] = VERSION;
        b[5] = self.dtype as u8;
        b[6] = self.group_size;
        b[8..12].copy_from_slice(&self.rows.to_le_bytes());
        b[12..16].copy_from_slice(&self.cols.to_le_bytes());
        b
    }

    fn from_bytes(b: &[u8; HEADER_LEN]) -> Result<Self> {
        if b[..4] != MAGIC {
            return Err(Error::format("container header", "bad magic"));
        }
        if b[4] != VERSION {
            return Err(Error::format("container header", format!("unsupported version {}", b[4])));
        }
        Ok(Header {
            dtype: DType::from_u8(b[5])?,
            group_size: b[6],
            rows: u32::from_le_bytes(b[8..12].try_into().unwrap()),
            cols: u32::from_le_bytes(b[12..16].try_into().unwrap()),
        })
    }
}

fn dim_u32(v: usize, name: &'static str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::param(name, "does not fit in u32"))
}

fn io_err(e: std::io::Error) -> Error {
    Error::format("container", e.to_string())
}

pub fn write_packed<W: Write>(mut out: W, w: &PackedWeights) -> Result<()> {
    let wide = 3usize.pow(w.group_size() as u32) > 256;
    let header = Header {
        dtype: if wide { DType::Ternary16 } else { DType::Ternary8 },
        group_size: w.group_size() as u8,
        rows: dim_u32(w.rows(), "rows")?,
        cols: dim_u32(w.cols(), "cols")?,
    };
    out.write_all(&header.to_bytes()).map_err(io_err)?;
    let mut payload = Vec::with_capacity(w.indices().len() * if wide { 2 } else { 1 });
    for &idx in w.indices() {
        if wide {
            payload.extend_from_slice(&idx.to_le_bytes());
        } else {
            payload.push(idx as u8);
        }
    }
    out.write_all(&payload).map_err(io_err)
}

pub fn write_matrix<W: Write>(mut out: W, m: &Matrix) -> Result<()> {
    let header = Header {
        dtype: DType::F32,
        group_size: 0,
        rows: dim_u32(m.rows(), "rows")?,
        cols: dim_u32(m.cols(), "cols")?,
    };
    out.write_all(&header.to_bytes()).map_err(io_err)?;
    let payload: Vec<u8> = m.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    out.write_all(&payload).map_err(io_err)
}

fn read_header<R: Read>(input: &mut R) -> Result<Header> {
    let mut b = [0u8; HEADER_LEN];
    input.read_exact(&mut b).map_err(io_err)?;
    Header::from_bytes(&b)
}

fn read_payload<R: Read>(input: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf).map_err(io_err)?;
    if buf.len() != len {
        return Err(Error::format(
            "container payload",
            format!("expected {len} bytes, found {}", buf.len()),
        ));
    }
    Ok(buf)
}

pub fn read_packed<R: Read>(mut input: R) -> Result<PackedWeights> {
    let h = read_header(&mut input)?;
    let width = match h.dtype {
        DType::Ternary8 => 1,
        DType::Ternary16 => 2,
        DType::F32 => return Err(Error::format("container", "expected packed ternary, found f32")),
    };
    if h.group_size == 0 {
        return Err(Error::format("container header", "group_size 0"));
    }
    let (rows, cols, g) = (h.rows as usize, h.cols as usize, h.group_size as usize);
    let count = rows * cols.div_ceil(g);
    let bytes = read_payload(&mut input, count * width)?;
    let indices = if width == 1 {
        bytes.iter().map(|&b| b as u16).collect()
    } else {
        bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect()
    };
    PackedWeights::from_indices(rows, cols, g, indices)
}

pub fn read_matrix<R: Read>(mut input: R) -> Result<Matrix> {
    let h = read_header(&mut input)?;
    if h.dtype != DType::F32 {
        return Err(Error::format("container", "expected f32 matrix"));
    }
    let (rows, cols) = (h.rows as usize, h.cols as usize);
    let bytes = read_payload(&mut input, rows * cols * 4)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Matrix::from_vec(rows, cols, data)
}
