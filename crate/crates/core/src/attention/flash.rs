use super::{dot, AttentionInputs, BlockSchedule, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 16;

/// Running softmax state for one Q block: per-row max `m`, per-row exponent
/// sum `l`, and the unnormalized output accumulator `o` (`rows × d`).
#[derive(Debug, Clone)]
pub struct AttentionBlockState {
    pub m: Vec<f32>,
    pub l: Vec<f32>,
    pub o: Vec<f32>,
    d: usize,
}

impl AttentionBlockState {
    pub fn new(rows: usize, d: usize) -> Self {
        AttentionBlockState {
            m: vec![f32::NEG_INFINITY; rows],
            l: vec![0.0; rows],
            o: vec![0.0; rows * d],
            d,
        }
    }

    pub fn rows(&self) -> usize {
        self.m.len()
    }

    /// Absorbs one row's score block `scores` (already scaled, masked
    /// entries at −∞) against the matching value rows.
    ///
    /// ```text
    /// m' = max(m, rmax(S))
    /// l' = e^(m - m') l + e^(rmax(S) - m') rsum(e^(S - rmax(S)))
    /// O' = e^(m - m') O + e^(rmax(S) - m') e^(S - rmax(S)) V
    /// ```
    pub fn absorb_row(&mut self, row: usize, scores: &[f32], values: &[&[f32]]) {
        let block_max = scores.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        if block_max == f32::NEG_INFINITY {
            return;
        }
        let m_old = self.m[row];
        let m_new = m_old.max(block_max);
        debug_assert!(m_new >= m_old, "running max decreased");
        let carry = (m_old - m_new).exp();
        let fresh = (block_max - m_new).exp();

        let o = &mut self.o[row * self.d..(row + 1) * self.d];
        let mut acc = vec![0f32; self.d];
        let mut sum = 0f32;
        for (&s, v) in scores.iter().zip(values) {
            let p = (s - block_max).exp();
            sum += p;
            for (a, &x) in acc.iter_mut().zip(v.iter()) {
                *a += p * x;
            }
        }
        self.l[row] = carry * self.l[row] + fresh * sum;
        for (dst, a) in o.iter_mut().zip(acc) {
            *dst = carry * *dst + fresh * a;
        }
        self.m[row] = m_new;
    }

    /// Writes `O / l` for each row.
    pub fn finalize_into(&self, out: &mut Matrix, first_row: usize) {
        for r in 0..self.rows() {
            let inv = 1.0 / self.l[r];
            let src = &self.o[r * self.d..(r + 1) * self.d];
            for (dst, &x) in out.row_mut(first_row + r).iter_mut().zip(src) {
                *dst = x * inv;
            }
        }
    }
}

/// Causal blocked attention driven by `schedule`.
///
/// The schedule's step order decides the order in which K blocks are folded
/// into each Q block's running state; any legal order gives the same result
/// up to rounding.
pub fn flash_attention_prefill(inp: &AttentionInputs, schedule: &BlockSchedule) -> Result<Matrix> {
    inp.validate()?;
    let (n, d) = (inp.seq_len(), inp.head_dim());
    let b = schedule.block_size;
    if b == 0 {
        return Err(Error::IllegalSchedule("block_size must be at least 1".into()));
    }
    let n_blocks = n.div_ceil(b);
    if schedule.n_blocks != n_blocks {
        return Err(Error::IllegalSchedule(format!(
            "schedule covers {} blocks, sequence of {n} with block size {b} needs {n_blocks}",
            schedule.n_blocks
        )));
    }
    schedule.validate()?;

    let scale = inp.scale();
    let mut states: Vec<AttentionBlockState> = (0..n_blocks)
        .map(|qb| AttentionBlockState::new(b.min(n - qb * b), d))
        .collect();
    let mut scores = vec![0f32; b];

    for step in &schedule.steps {
        let (q0, k0) = (step.q_block * b, step.k_block * b);
        let k_len = b.min(n - k0);
        let values: Vec<&[f32]> = (k0..k0 + k_len).map(|j| inp.v.row(j)).collect();
        let state = &mut states[step.q_block];
        for r in 0..state.rows() {
            let i = q0 + r;
            let q = inp.q.row(i);
            for (c, s) in scores[..k_len].iter_mut().enumerate() {
                let j = k0 + c;
                *s = if j > i {
                    f32::NEG_INFINITY
                } else {
                    dot(q, inp.k.row(j)) * scale
                };
            }
            state.absorb_row(r, &scores[..k_len], &values);
        }
    }

    let mut out = Matrix::zeros(n, d);
    for (qb, state) in states.iter().enumerate() {
        state.finalize_into(&mut out, qb * b);
    }
    Ok(out)
}
