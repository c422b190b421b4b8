use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::write_out;
use crate::attention::{
    decode_attention, flash_attention_prefill, make_forward_schedule, make_reverse_schedule, naive_attention,
    AttentionInputs, KvCache, Matrix,
};
use crate::error::Result;
use crate::tlmm::{naive_ternary_gemv, pack_weights, tlmm_gemv, ActivationVector, TernaryMatrix, MAX_GROUP_SIZE};

/// Deliberate corruption for exercising the mismatch path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Flips one packed weight index before the table-lookup kernel runs.
    PackedWeights,
}

#[derive(Debug, Clone)]
pub struct VerifyArgs {
    pub seed: u64,
    /// `(rows, cols)` for the matmul suite; `(seq_len, head_dim)` for attention.
    pub sizes: Vec<(usize, usize)>,
    pub out_dir: Option<PathBuf>,
    pub fault: Fault,
}

impl Default for VerifyArgs {
    fn default() -> Self {
        VerifyArgs {
            seed: 0,
            sizes: vec![(1, 1), (16, 64), (64, 256), (128, 96)],
            out_dir: None,
            fault: Fault::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: &'static str,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::passed)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("suite,cases,max_error,tolerance,status\n");
        for r in &self.suites {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{}",
                r.suite,
                r.cases,
                r.max_error,
                r.tolerance,
                if r.passed() { "pass" } else { "FAIL" }
            );
        }
        s
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0f32..1.0))
}

fn tlmm_suite(rng: &mut ChaCha8Rng, sizes: &[(usize, usize)], fault: Fault) -> Result<SuiteResult> {
    let mut max_error = 0.0f64;
    let mut cases = 0;
    for &(rows, cols) in sizes {
        for g in 1..=MAX_GROUP_SIZE {
            let w = TernaryMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1i8..=1)).collect())?;
            let x = ActivationVector::new((0..cols).map(|_| rng.gen()).collect(), 1.0);
            let mut packed = pack_weights(&w, g)?;
            if fault == Fault::PackedWeights {
                let idx = &mut packed.indices_mut()[0];
                // Any other in-range code changes at least one weight.
                *idx = if *idx == 0 { 1 } else { 0 };
            }
            let got = tlmm_gemv(&packed, &x)?;
            let want = naive_ternary_gemv(&w, &x)?;
            let worst = got
                .iter()
                .zip(&want)
                .map(|(a, b)| (*a as i64 - *b as i64).unsigned_abs() as f64)
                .fold(0.0, f64::max);
            max_error = max_error.max(worst);
            cases += 1;
        }
    }
    Ok(SuiteResult {
        suite: "tlmm_gemv",
        cases,
        max_error,
        tolerance: 0.0,
    })
}

fn flash_suite(rng: &mut ChaCha8Rng, sizes: &[(usize, usize)]) -> Result<SuiteResult> {
    let mut max_error = 0.0f64;
    let mut cases = 0;
    for &(n, d) in sizes {
        let d = d.clamp(1, 64);
        let inp = AttentionInputs::new(
            random_matrix(rng, n, d),
            random_matrix(rng, n, d),
            random_matrix(rng, n, d),
            true,
        )?;
        let want = naive_attention(&inp)?;
        for block in [8, 16] {
            let blocks = n.div_ceil(block);
            for s in [make_reverse_schedule(blocks, 4)?, make_forward_schedule(blocks, 4)?] {
                let got = flash_attention_prefill(&inp, &s.with_block_size(block))?;
                max_error = max_error.max(got.max_abs_diff(&want) as f64);
                cases += 1;
            }
        }
    }
    Ok(SuiteResult {
        suite: "flash_attention_prefill",
        cases,
        max_error,
        tolerance: 1e-4,
    })
}

fn decode_suite(rng: &mut ChaCha8Rng, sizes: &[(usize, usize)]) -> Result<SuiteResult> {
    let mut max_error = 0.0f64;
    let mut cases = 0;
    for &(t, d) in sizes {
        let d = d.clamp(1, 64);
        let k = random_matrix(rng, t, d);
        let v = random_matrix(rng, t, d);
        let q = random_matrix(rng, 1, d);
        let mut cache = KvCache::new(d);
        for i in 0..t {
            cache.push(k.row(i), v.row(i))?;
        }
        let got = decode_attention(q.row(0), &cache, d)?;
        // Every row of the reference queries with the same vector.
        let qs = Matrix::from_fn(t, d, |_, c| q.row(0)[c]);
        let want = naive_attention(&AttentionInputs::new(qs, k, v, false)?)?;
        let worst = got
            .iter()
            .zip(want.row(0))
            .map(|(a, b)| (a - b).abs() as f64)
            .fold(0.0, f64::max);
        max_error = max_error.max(worst);
        cases += 1;
    }
    Ok(SuiteResult {
        suite: "decode_attention",
        cases,
        max_error,
        tolerance: 1e-4,
    })
}

/// Runs every kernel against its reference. Mismatches are reported, not
/// returned as errors.
pub fn cmd_verify_kernels(args: &VerifyArgs) -> Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let report = VerifyReport {
        suites: vec![
            tlmm_suite(&mut rng, &args.sizes, args.fault)?,
            flash_suite(&mut rng, &args.sizes)?,
            decode_suite(&mut rng, &args.sizes)?,
        ],
    };
    if let Some(dir) = &args.out_dir {
        write_out(dir, "verify_report.csv", &report.to_csv())?;
    }
    Ok(report)
}
