//! Block schedules for causal prefill attention.
//!
//! A schedule assigns each causal `(q_block, k_block)` pair to a processing
//! element. Work is grouped in waves: all PEs of a wave hold their Q block
//! resident while K/V blocks are streamed past them, so one K/V fetch can be
//! broadcast to every PE still active in the wave.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WorkItem {
    pub wave: usize,
    pub pe: usize,
    pub q_block: usize,
    pub k_block: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSchedule {
    pub block_size: usize,
    pub n_pe: usize,
    pub n_blocks: usize,
    pub steps: Vec<WorkItem>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleStats {
    pub q_loads: usize,
    pub kv_streams: usize,
    pub pe_idle_steps: usize,
}

fn check_counts(n_blocks: usize, n_pe: usize) -> Result<()> {
    if n_blocks == 0 {
        return Err(Error::param("n_blocks", "must be at least 1"));
    }
    if n_pe == 0 {
        return Err(Error::param("n_pe", "must be at least 1"));
    }
    Ok(())
}

/// Descending-q waves of width `n_pe`; K blocks stream in ascending order and
/// a PE drops out once `k_block` passes its `q_block`.
pub fn make_reverse_schedule(n_blocks: usize, n_pe: usize) -> Result<BlockSchedule> {
    check_counts(n_blocks, n_pe)?;
    let order: Vec<usize> = (0..n_blocks).rev().collect();
    let mut steps = Vec::with_capacity(n_blocks * (n_blocks + 1) / 2);
    for (wave, qs) in order.chunks(n_pe).enumerate() {
        let top = qs[0];
        for k in 0..=top {
            for (pe, &q) in qs.iter().enumerate() {
                if k <= q {
                    steps.push(WorkItem { wave, pe, q_block: q, k_block: k });
                }
            }
        }
    }
    Ok(BlockSchedule { block_size: super::DEFAULT_BLOCK_SIZE, n_pe, n_blocks, steps })
}

/// Ascending-q waves with K blocks streamed in descending order. Each PE
/// joins once the stream reaches its `q_block`. Per-row accumulation order is
/// the reverse of [`make_reverse_schedule`], which makes it a useful
/// comparator for ordering-invariance checks.
pub fn make_forward_schedule(n_blocks: usize, n_pe: usize) -> Result<BlockSchedule> {
    check_counts(n_blocks, n_pe)?;
    let order: Vec<usize> = (0..n_blocks).collect();
    let mut steps = Vec::with_capacity(n_blocks * (n_blocks + 1) / 2);
    for (wave, qs) in order.chunks(n_pe).enumerate() {
        let top = *qs.last().unwrap();
        for k in (0..=top).rev() {
            for (pe, &q) in qs.iter().enumerate() {
                if k <= q {
                    steps.push(WorkItem { wave, pe, q_block: q, k_block: k });
                }
            }
        }
    }
    Ok(BlockSchedule { block_size: super::DEFAULT_BLOCK_SIZE, n_pe, n_blocks, steps })
}

impl BlockSchedule {
    pub fn with_block_size(mut self, block_size: usize) -> Self {
        self.block_size = block_size;
        self
    }

    /// Checks causality, completeness, PE range and Q residency.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::IllegalSchedule(msg));
        if self.n_pe == 0 || self.n_blocks == 0 {
            return bad("n_pe and n_blocks must be at least 1".into());
        }
        let mut seen = HashSet::with_capacity(self.steps.len());
        for s in &self.steps {
            if s.pe >= self.n_pe {
                return bad(format!("pe {} out of range (n_pe = {})", s.pe, self.n_pe));
            }
            if s.q_block >= self.n_blocks {
                return bad(format!("q_block {} out of range", s.q_block));
            }
            if s.k_block > s.q_block {
                return bad(format!("non-causal pair (q={}, k={})", s.q_block, s.k_block));
            }
            if !seen.insert((s.q_block, s.k_block)) {
                return bad(format!("duplicate pair (q={}, k={})", s.q_block, s.k_block));
            }
        }
        let expected = self.n_blocks * (self.n_blocks + 1) / 2;
        if seen.len() != expected {
            return bad(format!("{} of {expected} causal pairs covered", seen.len()));
        }
        // Q residency: per PE, each q_block occupies one contiguous run.
        let mut finished: HashMap<usize, HashSet<usize>> = HashMap::new();
        let mut current: HashMap<usize, usize> = HashMap::new();
        for s in &self.steps {
            match current.get(&s.pe) {
                Some(&q) if q == s.q_block => {}
                prev => {
                    if let Some(&q) = prev {
                        finished.entry(s.pe).or_default().insert(q);
                    }
                    if finished.get(&s.pe).is_some_and(|f| f.contains(&s.q_block)) {
                        return bad(format!("pe {} reloads q_block {}", s.pe, s.q_block));
                    }
                    current.insert(s.pe, s.q_block);
                }
            }
        }
        Ok(())
    }
}

pub fn schedule_stats(s: &BlockSchedule) -> ScheduleStats {
    let mut q_loads = 0;
    let mut current: HashMap<usize, usize> = HashMap::new();
    for step in &s.steps {
        if current.insert(step.pe, step.q_block) != Some(step.q_block) {
            q_loads += 1;
        }
    }

    let kv_streams = s
        .steps
        .iter()
        .map(|st| (st.wave, st.k_block))
        .collect::<HashSet<_>>()
        .len();

    // Per wave: slots = distinct K blocks streamed; every active PE idles in
    // the slots it does not take part in.
    let mut slots: HashMap<usize, HashSet<usize>> = HashMap::new();
    let mut work: HashMap<(usize, usize), usize> = HashMap::new();
    for st in &s.steps {
        slots.entry(st.wave).or_default().insert(st.k_block);
        *work.entry((st.wave, st.pe)).or_default() += 1;
    }
    let pe_idle_steps = work
        .iter()
        .map(|(&(wave, _), &n)| slots[&wave].len().saturating_sub(n))
        .sum();

    ScheduleStats {
        q_loads,
        kv_streams,
        pe_idle_steps,
    }
}
