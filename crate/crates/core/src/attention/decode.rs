use super::dot;
use super::flash::AttentionBlockState;
use crate::error::{Error, Result};

/// Append-only key/value history for one head.
#[derive(Debug, Clone, PartialEq)]
pub struct KvCache {
    d: usize,
    keys: Vec<f32>,
    values: Vec<f32>,
}

impl KvCache {
    pub fn new(d: usize) -> Self {
        KvCache {
            d,
            keys: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.keys.len() / self.d.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn key(&self, t: usize) -> &[f32] {
        &self.keys[t * self.d..(t + 1) * self.d]
    }

    pub fn value(&self, t: usize) -> &[f32] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    pub fn push(&mut self, k: &[f32], v: &[f32]) -> Result<()> {
        if k.len() != self.d {
            return Err(Error::dims("kv_append key", self.d, k.len()));
        }
        if v.len() != self.d {
            return Err(Error::dims("kv_append value", self.d, v.len()));
        }
        self.keys.extend_from_slice(k);
        self.values.extend_from_slice(v);
        Ok(())
    }
}

pub fn kv_append(mut cache: KvCache, k: &[f32], v: &[f32]) -> Result<KvCache> {
    cache.push(k, v)?;
    Ok(cache)
}

/// Single-query attention over the whole cache, streamed one cache row at a
/// time through the same running max/sum update as prefill.
pub fn decode_attention(q: &[f32], cache: &KvCache, d_k: usize) -> Result<Vec<f32>> {
    if cache.is_empty() {
        return Err(Error::EmptyCache);
    }
    if q.len() != cache.d {
        return Err(Error::dims("decode query", cache.d, q.len()));
    }
    if d_k == 0 {
        return Err(Error::param("d_k", "must be at least 1"));
    }
    let scale = 1.0 / (d_k as f32).sqrt();
    let mut state = AttentionBlockState::new(1, cache.d);
    for t in 0..cache.len() {
        let s = dot(q, cache.key(t)) * scale;
        state.absorb_row(0, &[s], &[cache.value(t)]);
    }
    Ok(state.o.iter().map(|x| x / state.l[0]).collect())
}
