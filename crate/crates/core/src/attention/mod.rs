//! Phase-specialized attention kernels: blocked prefill with online softmax,
//! single-query decode against a KV cache, and the block schedules that
//! drive prefill.

mod decode;
mod flash;
mod naive;
mod schedule;

pub use decode::{decode_attention, kv_append, KvCache};
pub use flash::{flash_attention_prefill, AttentionBlockState, DEFAULT_BLOCK_SIZE};
pub use naive::naive_attention;
pub use schedule::{
    make_forward_schedule, make_reverse_schedule, schedule_stats, BlockSchedule, ScheduleStats,
    WorkItem,
};

use crate::error::{Error, Result};

/// Dense row-major f32 matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("matrix data", rows * cols, data.len()));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f32 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

#[derive(Debug, Clone)]
pub struct AttentionInputs {
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
    pub causal: bool,
}

impl AttentionInputs {
    pub fn new(q: Matrix, k: Matrix, v: Matrix, causal: bool) -> Result<Self> {
        let inp = AttentionInputs { q, k, v, causal };
        inp.validate()?;
        Ok(inp)
    }

    pub fn seq_len(&self) -> usize {
        self.q.rows
    }

    pub fn head_dim(&self) -> usize {
        self.q.cols
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (n, d) = (self.q.rows, self.q.cols);
        for (name, m) in [("K", &self.k), ("V", &self.v)] {
            if m.rows != n {
                return Err(Error::dims(
                    if name == "K" { "K rows" } else { "V rows" },
                    n,
                    m.rows,
                ));
            }
            if m.cols != d {
                return Err(Error::dims(
                    if name == "K" { "K cols" } else { "V cols" },
                    d,
                    m.cols,
                ));
            }
        }
        if d == 0 {
            return Err(Error::param("head_dim", "must be at least 1"));
        }
        Ok(())
    }

    pub(crate) fn scale(&self) -> f32 {
        1.0 / (self.head_dim() as f32).sqrt()
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
