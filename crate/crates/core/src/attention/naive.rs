use super::{AttentionInputs, Matrix};
use crate::error::Result;

/// Materialized-score softmax attention, accumulated in f64.
pub fn naive_attention(inp: &AttentionInputs) -> Result<Matrix> {
    inp.validate()?;
    let (n, d) = (inp.seq_len(), inp.head_dim());
    let scale = 1.0 / (d as f64).sqrt();
    let mut out = Matrix::zeros(n, d);
    let mut scores = vec![0f64; n];
    for i in 0..n {
        let visible = if inp.causal { i + 1 } else { n };
        let q = inp.q.row(i);
        for (j, s) in scores[..visible].iter_mut().enumerate() {
            let k = inp.k.row(j);
            *s = q.iter().zip(k).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() * scale;
        }
        let max = scores[..visible].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for s in &mut scores[..visible] {
            *s = (*s - max).exp();
            total += *s;
        }
        let mut acc = vec![0f64; d];
        for (j, &p) in scores[..visible].iter().enumerate() {
            let w = p / total;
            for (a, &v) in acc.iter_mut().zip(inp.v.row(j)) {
                *a += w * v as f64;
            }
        }
        for (o, a) in out.row_mut(i).iter_mut().zip(acc) {
            *o = a as f32;
        }
    }
    Ok(out)
}
