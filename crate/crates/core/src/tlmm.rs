//! Table-lookup ternary matrix multiplication.
//!
//! Ternary weights are packed `group_size` at a time into base-3 indices
//! (digit `k` of an index encodes weight `k - 1`, least significant digit
//! first). For every group of activations a lookup table of all `3^G`
//! signed partial sums is built once, and a GEMV becomes one table lookup
//! and one add per packed index.

use crate::error::{Error, Result};

pub const DEFAULT_GROUP_SIZE: usize = 5;
pub const MAX_GROUP_SIZE: usize = 6;

/// Base-3 index whose digits are all 1, i.e. every weight in the group is 0.
pub fn zero_index(group_size: usize) -> u16 {
    (0..group_size).map(|k| 3u16.pow(k as u32)).sum()
}

fn check_group_size(group_size: usize) -> Result<()> {
    if group_size == 0 || group_size > MAX_GROUP_SIZE {
        return Err(Error::param(
            "group_size",
            format!("must be in 1..={MAX_GROUP_SIZE}, got {group_size}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TernaryMatrix {
    rows: usize,
    cols: usize,
    values: Vec<i8>,
}

impl TernaryMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<i8>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dims("ternary matrix values", rows * cols, values.len()));
        }
        if let Some(bad) = values.iter().find(|v| !(-1..=1).contains(*v)) {
            return Err(Error::param("values", format!("{bad} is not a ternary digit")));
        }
        Ok(TernaryMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        TernaryMatrix {
            rows,
            cols,
            values: vec![0; rows * cols],
        }
    }

    /// +1 on the main diagonal, 0 elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn row(&self, r: usize) -> &[i8] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// Parses whitespace-separated ternary digits, one matrix row per line.
    /// Blank lines and lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut rows = 0;
        let mut cols = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Vec<i8> = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i8>().map_err(|e| {
                        Error::format("ternary text matrix", format!("line {}: {tok:?}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<_>>()?;
            match cols {
                None => cols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(Error::format(
                        "ternary text matrix",
                        format!("line {} has {} entries, expected {c}", lineno + 1, row.len()),
                    ))
                }
                _ => {}
            }
            values.extend(row);
            rows += 1;
        }
        Self::new(rows, cols.unwrap_or(0), values)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.rows {
            let line: Vec<String> = self.row(r).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedWeights {
    rows: usize,
    cols: usize,
    group_size: usize,
    packed: Vec<u16>,
}

impl PackedWeights {
    /// Builds from raw indices, validating every index against `3^group_size`.
    pub fn from_indices(rows: usize, cols: usize, group_size: usize, packed: Vec<u16>) -> Result<Self> {
        check_group_size(group_size)?;
        let per_row = cols.div_ceil(group_size);
        if packed.len() != rows * per_row {
            return Err(Error::dims("packed indices", rows * per_row, packed.len()));
        }
        let limit = 3u16.pow(group_size as u32);
        if let Some(bad) = packed.iter().find(|&&i| i >= limit) {
            return Err(Error::param(
                "packed",
                format!("index {bad} out of range for group size {group_size}"),
            ));
        }
        Ok(PackedWeights {
            rows,
            cols,
            group_size,
            packed,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn groups_per_row(&self) -> usize {
        self.cols.div_ceil(self.group_size)
    }

    pub fn indices(&self) -> &[u16] {
        &self.packed
    }

    /// Mutable access for fault-injection tests; no validation is re-run.
    #[doc(hidden)]
    pub fn indices_mut(&mut self) -> &mut [u16] {
        &mut self.packed
    }

    pub fn row_indices(&self, r: usize) -> &[u16] {
        let g = self.groups_per_row();
        &self.packed[r * g..(r + 1) * g]
    }

    pub fn unpack(&self) -> TernaryMatrix {
        let mut values = Vec::with_capacity(self.rows * self.cols);
        for r in 0..self.rows {
            for (g, &idx) in self.row_indices(r).iter().enumerate() {
                let mut rest = idx;
                for k in 0..self.group_size {
                    let digit = (rest % 3) as i8;
                    rest /= 3;
                    if g * self.group_size + k < self.cols {
                        values.push(digit - 1);
                    }
                }
            }
        }
        TernaryMatrix {
            rows: self.rows,
            cols: self.cols,
            values,
        }
    }
}

pub fn pack_weights(w: &TernaryMatrix, group_size: usize) -> Result<PackedWeights> {
    check_group_size(group_size)?;
    let per_row = w.cols.div_ceil(group_size);
    let mut packed = Vec::with_capacity(w.rows * per_row);
    for r in 0..w.rows {
        let row = w.row(r);
        for chunk in row.chunks(group_size) {
            let mut idx = 0u16;
            let mut place = 1u16;
            for k in 0..group_size {
                // Padding positions carry weight 0, i.e. digit 1.
                let digit = chunk.get(k).map_or(1, |&v| (v + 1) as u16);
                idx += digit * place;
                place *= 3;
            }
            packed.push(idx);
        }
    }
    Ok(PackedWeights {
        rows: w.rows,
        cols: w.cols,
        group_size,
        packed,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LookupTable {
    group_size: usize,
    entries: Vec<i32>,
}

impl LookupTable {
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, idx: u16) -> i32 {
        self.entries[idx as usize]
    }

    /// Index with every base-3 digit negated (0 <-> 2, 1 fixed).
    pub fn mirror(&self, idx: u16) -> u16 {
        let full = 3u16.pow(self.group_size as u32) - 1;
        full - idx
    }
}

/// Precomputes `Σ_k w_k(idx) · x_k` for all `3^G` weight patterns of a group.
///
/// Built digit by digit: after step `k` the table covers the first `k + 1`
/// activations, and digit `k` contributes `(d - 1) · x_k` at stride `3^k`.
pub fn build_lookup_table(x_group: &[i8]) -> LookupTable {
    let mut entries = vec![0i32];
    for &x in x_group {
        let stride = entries.len();
        let mut next = Vec::with_capacity(stride * 3);
        for d in 0..3i32 {
            let delta = (d - 1) * x as i32;
            next.extend(entries.iter().map(|&e| e + delta));
        }
        debug_assert_eq!(next.len(), stride * 3);
        entries = next;
    }
    LookupTable {
        group_size: x_group.len(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationVector {
    pub values: Vec<i8>,
    pub scale: f32,
}

impl ActivationVector {
    pub fn new(values: Vec<i8>, scale: f32) -> Self {
        ActivationVector { values, scale }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scales integer accumulators back to real values. Kept separate from the
/// kernels so their outputs stay exactly comparable to the integer oracle.
pub fn dequantize(acc: &[i32], activation_scale: f32, weight_scale: f32) -> Vec<f32> {
    let s = activation_scale * weight_scale;
    acc.iter().map(|&a| a as f32 * s).collect()
}

fn group_tables(x: &[i8], group_size: usize) -> Vec<LookupTable> {
    x.chunks(group_size)
        .map(|chunk| {
            if chunk.len() == group_size {
                build_lookup_table(chunk)
            } else {
                // Zero-pad the trailing group; padded weights are 0 anyway.
                let mut padded = chunk.to_vec();
                padded.resize(group_size, 0);
                build_lookup_table(&padded)
            }
        })
        .collect()
}

pub fn tlmm_gemv(w: &PackedWeights, x: &ActivationVector) -> Result<Vec<i32>> {
    if x.len() != w.cols {
        return Err(Error::dims("tlmm_gemv activations", w.cols, x.len()));
    }
    let tables = group_tables(&x.values, w.group_size);
    let out = (0..w.rows)
        .map(|r| {
            w.row_indices(r)
                .iter()
                .zip(&tables)
                .map(|(&idx, table)| table.get(idx))
                .sum()
        })
        .collect();
    Ok(out)
}

/// Token-wise batch of independent GEMVs; output `n` belongs to input `n`.
pub fn tlmm_gemm(w: &PackedWeights, xs: &[ActivationVector]) -> Result<Vec<Vec<i32>>> {
    xs.iter().map(|x| tlmm_gemv(w, x)).collect()
}

pub fn naive_ternary_gemv(w: &TernaryMatrix, x: &ActivationVector) -> Result<Vec<i32>> {
    if x.len() != w.cols {
        return Err(Error::dims("naive_ternary_gemv activations", w.cols, x.len()));
    }
    let mut out = vec![0i32; w.rows];
    for (r, acc) in out.iter_mut().enumerate() {
        for c in 0..w.cols {
            *acc += w.values[r * w.cols + c] as i32 * x.values[c] as i32;
        }
    }
    Ok(out)
}
