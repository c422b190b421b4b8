//! One line per acceptance criterion. Exits nonzero if any criterion fails.

mod common;

use std::collections::HashSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ternaccel::attention::{
    decode_attention, flash_attention_prefill, make_forward_schedule, make_reverse_schedule, naive_attention,
    schedule_stats, AttentionInputs, KvCache, Matrix,
};
use ternaccel::commands::{cmd_calibrate, CalibrateArgs};
use ternaccel::config::ToolConfig;
use ternaccel::dse::presets::{reference_allocation, HP_PORTS, HP_PORT_BW};
use ternaccel::dse::{feasible, search, DesignPoint, PortLayout};
use ternaccel::perf::{
    effective_kv_bandwidth, Allocation, Coefficients, Headroom, PhaseLatencyModel, PortMap, ResourceVector,
};
use ternaccel::sim::{
    compare_designs, overhead_report, simulate_prefill, sweep, ModelShape, ReconfigParams, Scenario, Trigger,
};
use ternaccel::tlmm::{naive_ternary_gemv, pack_weights, tlmm_gemv, ActivationVector, TernaryMatrix};

const SEED: u64 = 0x7e55_a11c;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(n: u32, name: &str, time_limit: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    let secs = t0.elapsed().as_secs_f64();
    let in_time = time_limit.is_none_or(|l| secs < l);
    let pass = o.pass && in_time;
    let limit = time_limit.map_or(String::new(), |l| format!(" / limit {l:.0} s"));
    println!(
        "criterion {n}: {} {name}: {} [{secs:.2} s{limit}]",
        if pass { "PASS" } else { "FAIL" },
        o.detail
    );
    pass
}

fn tlmm_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    let mut weights = 0usize;
    for case in 0..1000 {
        // The first and last cases use the largest size.
        let (rows, cols) = if case == 0 || case == 999 {
            (512, 2048)
        } else {
            (rng.gen_range(1..=512), rng.gen_range(1..=2048))
        };
        let g = rng.gen_range(1..=6);
        let w = TernaryMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1i8..=1)).collect()).unwrap();
        let x = ActivationVector::new((0..cols).map(|_| rng.gen::<i8>()).collect(), 1.0);
        let p = pack_weights(&w, g).unwrap();
        if tlmm_gemv(&p, &x).unwrap() != naive_ternary_gemv(&w, &x).unwrap() {
            mismatches += 1;
        }
        weights += rows * cols;
    }
    outcome(
        mismatches == 0,
        format!("1000 cases, {weights} weights, {mismatches} mismatches"),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0f32..1.0))
}

fn flash_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let (mut worst, mut worst_perm) = (0.0f32, 0.0f32);
    for case in 0..200 {
        let n = if case == 0 { 512 } else { rng.gen_range(1..=512) };
        let d = if case == 0 { 64 } else { rng.gen_range(1..=64) };
        let block = [8, 16, 32][rng.gen_range(0..3)];
        let n_pe = rng.gen_range(1..=16);
        let inp = AttentionInputs::new(
            random_matrix(&mut rng, n, d),
            random_matrix(&mut rng, n, d),
            random_matrix(&mut rng, n, d),
            true,
        )
        .unwrap();
        let want = naive_attention(&inp).unwrap();
        let blocks = n.div_ceil(block);
        let rev = flash_attention_prefill(&inp, &make_reverse_schedule(blocks, n_pe).unwrap().with_block_size(block)).unwrap();
        let fwd = flash_attention_prefill(&inp, &make_forward_schedule(blocks, n_pe).unwrap().with_block_size(block)).unwrap();
        worst = worst.max(rev.max_abs_diff(&want)).max(fwd.max_abs_diff(&want));
        worst_perm = worst_perm.max(rev.max_abs_diff(&fwd));
    }
    outcome(
        worst <= 1e-4 && worst_perm <= 1e-6,
        format!("200 cases, max error {worst:.3e} (tol 1e-4), schedule disagreement {worst_perm:.3e} (tol 1e-6)"),
    )
}

/// Single-query softmax attention in f64.
fn single_query(q: &[f32], k: &Matrix, v: &Matrix) -> Vec<f64> {
    let scale = 1.0 / (q.len() as f64).sqrt();
    let s: Vec<f64> = (0..k.rows())
        .map(|j| q.iter().zip(k.row(j)).map(|(&a, &b)| a as f64 * b as f64).sum::<f64>() * scale)
        .collect();
    let m = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = s.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    (0..v.cols())
        .map(|c| (0..k.rows()).map(|j| e[j] * v.row(j)[c] as f64).sum::<f64>() / z)
        .collect()
}

fn decode_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let t = if case == 0 { 1024 } else { rng.gen_range(1..=1024) };
        let d = rng.gen_range(1..=64);
        let (k, v) = (random_matrix(&mut rng, t, d), random_matrix(&mut rng, t, d));
        let q: Vec<f32> = (0..d).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        let mut cache = KvCache::new(d);
        for i in 0..t {
            cache.push(k.row(i), v.row(i)).unwrap();
        }
        let got = decode_attention(&q, &cache, d).unwrap();
        let want = single_query(&q, &k, &v);
        worst = got
            .iter()
            .zip(&want)
            .map(|(&a, &b)| (a as f64 - b).abs())
            .fold(worst, f64::max);
    }
    outcome(worst <= 1e-4, format!("100 caches up to t=1024, max error {worst:.3e} (tol 1e-4)"))
}

fn schedule_invariants() -> Outcome {
    let mut failures = Vec::new();
    let mut checked = 0;
    for n in 1..=64usize {
        for p in 1..=16usize {
            checked += 1;
            let s = make_reverse_schedule(n, p).unwrap();
            let pairs: HashSet<(usize, usize)> = s.steps.iter().map(|w| (w.q_block, w.k_block)).collect();
            let complete = pairs.len() == s.steps.len()
                && s.steps.len() == n * (n + 1) / 2
                && (0..n).all(|q| (0..=q).all(|k| pairs.contains(&(q, k))));
            let causal = s.steps.iter().all(|w| w.k_block <= w.q_block);
            let mut streams = 0;
            let mut idle = 0;
            for wave in (0..n).rev().collect::<Vec<_>>().chunks(p) {
                streams += wave[0] + 1;
                idle += wave.iter().map(|q| wave[0] - q).sum::<usize>();
            }
            let st = schedule_stats(&s);
            if !(complete && causal && st.q_loads == n && st.kv_streams == streams && st.pe_idle_steps == idle) {
                failures.push(format!("({n},{p})"));
            }
        }
    }
    let four = schedule_stats(&make_reverse_schedule(4, 4).unwrap());
    let ten = make_reverse_schedule(4, 4).unwrap().steps.len();
    let seq = schedule_stats(&make_reverse_schedule(9, 1).unwrap());
    let one = schedule_stats(&make_reverse_schedule(1, 3).unwrap());
    let examples = ten == 10
        && (four.q_loads, four.kv_streams, four.pe_idle_steps) == (4, 4, 6)
        && (seq.q_loads, seq.kv_streams) == (9, 45)
        && (one.q_loads, one.kv_streams, one.pe_idle_steps) == (1, 1, 0);
    outcome(
        failures.is_empty() && examples,
        format!(
            "{checked} (n_blocks, n_pe) pairs, {} violations; n_blocks=4 gives {ten} steps, stats ({}, {}, {})",
            failures.len(),
            four.q_loads,
            four.kv_streams,
            four.pe_idle_steps
        ),
    )
}

fn port_ratio() -> Outcome {
    let base = effective_kv_bandwidth(&PortMap::qkvo(HP_PORT_BW));
    let opt = effective_kv_bandwidth(&PortMap::kv_split(HP_PORT_BW));
    let built = effective_kv_bandwidth(&PortLayout::KvSplit.build(HP_PORTS, HP_PORT_BW).unwrap())
        / effective_kv_bandwidth(&PortLayout::Qkvo.build(HP_PORTS, HP_PORT_BW).unwrap());
    let r = opt / base;
    outcome(r == 2.0 && built == 2.0, format!("KV bandwidth {opt:e} / {base:e} = {r}"))
}

fn overlap() -> Outcome {
    // A 31 ms linear tail per layer on a 128-token prompt over 24 layers.
    let (l, layers) = (128u64, 24usize);
    let c = Coefficients {
        p_proj: 0.031 * layers as f64 / l as f64,
        p_atten: 1e-5,
        d_proj: 0.03,
        d_atten: 3e-5,
        t_weights: 0.0,
    };
    let m = PhaseLatencyModel::new(c, reference_allocation(PortLayout::KvSplit), Headroom::default()).unwrap();
    let d = DesignPoint::new(m.baseline.clone());
    let rp = ReconfigParams::new(0.045, Trigger::AfterLastAttention).unwrap();
    let shape = ModelShape {
        n_layers: layers,
        ..ModelShape::default()
    };
    let tl = simulate_prefill(&m, &shape, &d, l, Some(&rp)).unwrap();
    let r = overhead_report(&tl, &rp).unwrap();
    let exact = (tl.exposed_overhead() - 0.014).abs() <= 1e-12;
    let hidden_ok = (r.hidden_fraction - 0.689).abs() < 5e-4 && (r.hidden_fraction - 0.75).abs() <= 0.10;
    outcome(
        exact && hidden_ok,
        format!(
            "tail {:.3} ms, exposed {:.6} ms, hidden {:.4} (0.75 +/- 0.10)",
            r.tail * 1e3,
            r.exposed_ms,
            r.hidden_fraction
        ),
    )
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    ((got - want) / want).abs() <= rel
}

fn calibrated() -> (ToolConfig, PhaseLatencyModel, PhaseLatencyModel) {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let dir = tempfile::tempdir().unwrap();
    let fit = |cfg: &str| {
        cmd_calibrate(&CalibrateArgs {
            config: Some(format!("{data}/{cfg}").into()),
            measurements: None,
            out_dir: dir.path().to_path_buf(),
        })
        .unwrap()
        .0
    };
    let cfg = ToolConfig::load(format!("{data}/kv260.toml").as_ref()).unwrap();
    (cfg, fit("kv260.toml"), fit("kv260_static.toml"))
}

fn curve_reproduction() -> Outcome {
    let (cfg, swap, fixed) = calibrated();
    let (ds, df) = (DesignPoint::new(swap.baseline.clone()), DesignPoint::new(fixed.baseline.clone()));
    let rp = cfg.reconfig_params();
    let shape = cfg.shape();
    let cand = Scenario {
        model: &swap,
        design: &ds,
        reconfig: Some(&rp),
    };
    let base = Scenario {
        model: &fixed,
        design: &df,
        reconfig: None,
    };
    let s = sweep(&cand, &shape, &[64, 768]).unwrap();
    let b = sweep(&base, &shape, &[64, 768]).unwrap();
    let lengths: Vec<u64> = (6..=11).map(|p| 1u64 << p).collect();
    let rows = compare_designs(&base, &cand, &shape, &lengths).unwrap();
    let checks = [
        ("prefill tok/s @64", s[0].prefill_tps, 148.0),
        ("decode tok/s @64", s[0].decode_tps, 27.8),
        ("TTFT @768", s[1].ttft_s, 8.80),
        ("static prefill tok/s @64", b[0].prefill_tps, 143.0),
        ("static decode tok/s @64", b[0].decode_tps, 25.0),
        ("static TTFT @768", b[1].ttft_s, 11.10),
        ("ratio @64", rows[0].decode_ratio, 1.11),
        ("ratio @2048", rows[5].decode_ratio, 2.02),
    ];
    let monotone = rows.windows(2).all(|w| w[1].decode_ratio >= w[0].decode_ratio);
    let all = checks.iter().all(|&(_, g, w)| within(g, w, 0.05));
    let detail = checks
        .iter()
        .map(|(n, g, w)| format!("{n} {g:.3} vs {w} ({:+.1}%)", 100.0 * (g - w) / w))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(all && monotone, format!("{detail}; ratio monotone over 64..2048: {monotone}"))
}

fn dse_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    let (mut agree, mut none, mut bad) = (0, 0, Vec::new());
    let mut largest = 0;
    for case in 0..50 {
        let m = common::random_model(&mut rng);
        let c = common::random_config(&mut rng, &m, 3, 5);
        largest = largest.max(c.grid.size());
        assert!(c.grid.size() <= 10_000);
        match (search(&c, &m), common::brute_force(&c, &m)) {
            (Ok(r), Some((best, argmin))) => {
                let same = (r.objective - best).abs() <= 1e-12 * best && argmin.contains(&r.best.knobs.unwrap());
                let sound = feasible(&r.best, &c, &m).is_ok()
                    && r.pareto.iter().all(|e| feasible(&e.point, &c, &m).is_ok());
                let front = r
                    .pareto
                    .iter()
                    .all(|a| r.pareto.iter().all(|b| !b.eval.dominates(&a.eval)));
                if same && sound && front {
                    agree += 1;
                } else {
                    bad.push(case);
                }
            }
            (Err(ternaccel::Error::NoFeasibleDesign { .. }), None) => none += 1,
            _ => bad.push(case),
        }
    }
    outcome(
        bad.is_empty(),
        format!(
            "50 models, largest grid {largest}: {agree} match brute force, {none} infeasible on both sides, {} disagree {bad:?}",
            bad.len()
        ),
    )
}

fn scale(r: ResourceVector, k: [f64; 5]) -> ResourceVector {
    let a = r.to_array();
    ResourceVector::from_array(std::array::from_fn(|i| a[i] * k[i]))
}

fn latency_algebra() -> Outcome {
    let (_, swap, fixed) = calibrated();
    let mut affine = true;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    for m in [&swap, &fixed] {
        let a = m.baseline.clone();
        for _ in 0..1000 {
            let l = rng.gen_range(1..1_000_000u64);
            let dl = rng.gen_range(1..100_000u64);
            let t = |x| m.decode_step_latency(&a, x).unwrap();
            let (t0, t1, t2) = (t(l), t(l + dl), t(l + 2 * dl));
            affine &= ((t2 - t1) - (t1 - t0)).abs() <= 1e-12 * t2;
        }
    }
    let ratio = |m: &PhaseLatencyModel| {
        m.prefill_latency(&m.baseline, 4096).unwrap() / m.prefill_latency(&m.baseline, 2048).unwrap()
    };
    let (rs, rf) = (ratio(&swap), ratio(&fixed));
    let quad = [rs, rf].iter().all(|r| (3.5..=4.0).contains(r));

    let mut monotone = 0;
    for i in 0..1000 {
        let m = if i % 3 == 0 { swap.clone() } else { common::random_model(&mut rng) };
        let b = m.baseline.clone();
        let mut f = || std::array::from_fn::<f64, 5, _>(|_| rng.gen_range(0.2..3.0));
        let lo = Allocation {
            r_proj: scale(b.r_proj, f()),
            r_att_pre: scale(b.r_att_pre, f()),
            r_att_dec: scale(b.r_att_dec, f()),
            ..b.clone()
        };
        let mut g = || std::array::from_fn::<f64, 5, _>(|_| rng.gen_range(1.0..2.0));
        let hi = Allocation {
            r_proj: scale(lo.r_proj, g()),
            r_att_pre: scale(lo.r_att_pre, g()),
            r_att_dec: scale(lo.r_att_dec, g()),
            ..lo.clone()
        };
        let l = rng.gen_range(1..8192);
        if m.prefill_latency(&hi, l).unwrap() <= m.prefill_latency(&lo, l).unwrap()
            && m.decode_step_latency(&hi, l).unwrap() <= m.decode_step_latency(&lo, l).unwrap()
        {
            monotone += 1;
        }
    }
    outcome(
        affine && quad && monotone == 1000,
        format!(
            "decode affine: {affine}; T(4096)/T(2048) swap {rs:.3}, static {rf:.3} (want [3.5, 4.0]); monotone {monotone}/1000 pairs"
        ),
    )
}

fn main() -> ExitCode {
    let results = [
        run(1, "table-lookup matmul equals naive", Some(60.0), tlmm_equivalence),
        run(2, "flash attention equals naive", Some(120.0), flash_equivalence),
        run(3, "decode attention equals single-query oracle", None, decode_equivalence),
        run(4, "reverse schedule invariants", None, schedule_invariants),
        run(5, "KV port bandwidth ratio", None, port_ratio),
        run(6, "swap overlap 45 ms behind 31 ms", None, overlap),
        run(7, "calibrated curves reproduce anchors", Some(10.0), curve_reproduction),
        run(8, "DSE equals brute force", Some(60.0), dse_correctness),
        run(9, "latency model algebra", None, latency_algebra),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
