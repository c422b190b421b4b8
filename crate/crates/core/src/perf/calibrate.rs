//! Least-squares calibration of the phase latency coefficients from timings
//! taken at the baseline allocation.
//!
//! Prefill points fit `T = P_proj·L + P_atten·L² + T_weights`; decode points
//! fit `T = (D_proj + T_weights) + D_atten·L`. `T_weights` is shared, so it is
//! identified by the prefill fit (or pinned by the caller) and subtracted from
//! the decode intercept.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::latency::{Allocation, Coefficients, Headroom, PhaseLatencyModel};
use super::resources::ResourceVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Prefill,
    Decode,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Prefill => "prefill",
            Phase::Decode => "decode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub phase: Phase,
    pub seq_len: u64,
    pub resources: ResourceVector,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CalibrationOptions {
    /// Fix `T_weights` instead of fitting it. Required when the prefill
    /// points cover only two distinct lengths.
    pub t_weights: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub phase: Phase,
    pub seq_len: u64,
    pub observed: f64,
    pub predicted: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        (self.predicted - self.observed) / self.observed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub residuals: Vec<Residual>,
}

impl CalibrationReport {
    pub fn max_relative(&self) -> f64 {
        self.residuals
            .iter()
            .map(|r| r.relative().abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,seq_len,observed_s,predicted_s,relative_residual\n");
        for r in &self.residuals {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.phase.as_str(),
                r.seq_len,
                r.observed,
                r.predicted,
                r.relative()
            );
        }
        out
    }
}

fn distinct_lengths(points: &[&Measurement]) -> usize {
    let mut ls: Vec<u64> = points.iter().map(|m| m.seq_len).collect();
    ls.sort_unstable();
    ls.dedup();
    ls.len()
}

/// Ordinary least squares with column equilibration; errors if the design
/// matrix is numerically rank deficient.
fn lstsq(design: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let (rows, cols) = (design.len(), design[0].len());
    let mut a = DMatrix::from_fn(rows, cols, |r, c| design[r][c]);
    let norms: Vec<f64> = (0..cols).map(|c| a.column(c).norm()).collect();
    for (c, &n) in norms.iter().enumerate() {
        if n == 0.0 {
            return Err(Error::RankDeficient(format!("column {c} is identically zero")));
        }
        a.column_mut(c).scale_mut(1.0 / n);
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= smax * 1e-10 {
        return Err(Error::RankDeficient(format!(
            "condition number {:.3e} too large",
            smax / smin
        )));
    }
    let b = DVector::from_column_slice(y);
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::RankDeficient(e.to_string()))?;
    Ok(x.iter().zip(&norms).map(|(v, n)| v / n).collect())
}

/// Clamps round-off negatives to zero and rejects real ones.
fn nonnegative(name: &str, v: f64, scale: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v > -1e-9 * scale {
        Ok(0.0)
    } else {
        Err(Error::BadCalibration(format!("fitted {name} = {v:e} is negative")))
    }
}

pub fn calibrate(
    measurements: &[Measurement],
    baseline: Allocation,
    headroom: Headroom,
    opts: CalibrationOptions,
) -> Result<(PhaseLatencyModel, CalibrationReport)> {
    if let Some(first) = measurements.first() {
        if let Some(m) = measurements.iter().find(|m| m.resources != first.resources) {
            return Err(Error::BadCalibration(format!(
                "measurements must share one baseline configuration; L={} uses {}",
                m.seq_len, m.resources
            )));
        }
    }
    let expected = baseline.total().to_array();
    if let Some(m) = measurements.iter().find(|m| {
        m.resources
            .to_array()
            .iter()
            .zip(&expected)
            .any(|(a, b)| (a - b).abs() > 1e-6 * b.abs().max(1.0))
    }) {
        return Err(Error::BadCalibration(format!(
            "measurements were taken on {} but the baseline design occupies {}",
            m.resources,
            baseline.total()
        )));
    }
    if let Some(m) = measurements.iter().find(|m| !(m.seconds.is_finite() && m.seconds > 0.0)) {
        return Err(Error::BadCalibration(format!("non-positive timing at L={}", m.seq_len)));
    }
    if let Some(m) = measurements.iter().find(|m| m.seq_len == 0) {
        return Err(Error::BadCalibration(format!("zero sequence length ({} point)", m.phase.as_str())));
    }
    let prefill: Vec<&Measurement> = measurements.iter().filter(|m| m.phase == Phase::Prefill).collect();
    let decode: Vec<&Measurement> = measurements.iter().filter(|m| m.phase == Phase::Decode).collect();

    let need_prefill = if opts.t_weights.is_some() { 2 } else { 3 };
    let np = distinct_lengths(&prefill);
    if np < need_prefill {
        return Err(Error::RankDeficient(format!(
            "prefill points cover {np} distinct lengths, need {need_prefill}{}",
            if opts.t_weights.is_none() { " (or pin t_weights)" } else { "" }
        )));
    }
    let nd = distinct_lengths(&decode);
    if nd < 2 {
        return Err(Error::RankDeficient(format!(
            "decode points cover {nd} distinct lengths, need 2"
        )));
    }

    let y_scale = measurements.iter().map(|m| m.seconds).fold(0.0, f64::max);

    let (p_proj, p_atten, t_weights) = match opts.t_weights {
        Some(tw) => {
            if !(tw.is_finite() && tw >= 0.0) {
                return Err(Error::param("t_weights", "must be finite and nonnegative"));
            }
            let design: Vec<Vec<f64>> = prefill
                .iter()
                .map(|m| {
                    let l = m.seq_len as f64;
                    vec![l, l * l]
                })
                .collect();
            let y: Vec<f64> = prefill.iter().map(|m| m.seconds - tw).collect();
            let x = lstsq(&design, &y)?;
            (x[0], x[1], tw)
        }
        None => {
            let design: Vec<Vec<f64>> = prefill
                .iter()
                .map(|m| {
                    let l = m.seq_len as f64;
                    vec![l, l * l, 1.0]
                })
                .collect();
            let y: Vec<f64> = prefill.iter().map(|m| m.seconds).collect();
            let x = lstsq(&design, &y)?;
            (x[0], x[1], x[2])
        }
    };

    let design: Vec<Vec<f64>> = decode.iter().map(|m| vec![1.0, m.seq_len as f64]).collect();
    let y: Vec<f64> = decode.iter().map(|m| m.seconds).collect();
    let x = lstsq(&design, &y)?;
    let (intercept, d_atten) = (x[0], x[1]);

    let t_weights = nonnegative("t_weights", t_weights, y_scale)?;
    let coefficients = Coefficients {
        p_proj: nonnegative("p_proj", p_proj, y_scale)?,
        p_atten: nonnegative("p_atten", p_atten, y_scale)?,
        d_proj: nonnegative("d_proj (decode intercept minus t_weights)", intercept - t_weights, y_scale)?,
        d_atten: nonnegative("d_atten", d_atten, y_scale)?,
        t_weights,
    };
    let model = PhaseLatencyModel::new(coefficients, baseline, headroom)?;

    let base = model.baseline.clone();
    let residuals = measurements
        .iter()
        .map(|m| {
            let predicted = match m.phase {
                Phase::Prefill => model.prefill_latency(&base, m.seq_len),
                Phase::Decode => model.decode_step_latency(&base, m.seq_len),
            }?;
            Ok(Residual {
                phase: m.phase,
                seq_len: m.seq_len,
                observed: m.seconds,
                predicted,
            })
        })
        .collect::<Result<_>>()?;
    Ok((model, CalibrationReport { residuals }))
}

pub const MEASUREMENT_HEADER: &str = "phase,seq_len,lut,ff,dsp,bram,uram,seconds";

/// Parses measurement records, one per line:
/// `phase,seq_len,lut,ff,dsp,bram,uram,seconds`. A header line with that
/// text, blank lines and `#` comments are skipped.
pub fn parse_measurements(text: &str) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line == MEASUREMENT_HEADER {
            continue;
        }
        let err = |reason: String| Error::format("measurement record", format!("line {}: {reason}", i + 1));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 8 {
            return Err(err(format!("expected 8 fields, found {}", fields.len())));
        }
        let phase = match fields[0] {
            "prefill" => Phase::Prefill,
            "decode" => Phase::Decode,
            other => return Err(err(format!("unknown phase {other:?}"))),
        };
        let seq_len = fields[1]
            .parse::<u64>()
            .map_err(|e| err(format!("seq_len: {e}")))?;
        let num = |k: usize| {
            fields[k]
                .parse::<f64>()
                .map_err(|e| err(format!("field {}: {e}", k + 1)))
        };
        out.push(Measurement {
            phase,
            seq_len,
            resources: ResourceVector::new(num(2)?, num(3)?, num(4)?, num(5)?, num(6)?),
            seconds: num(7)?,
        });
    }
    Ok(out)
}
