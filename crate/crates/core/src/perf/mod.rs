//! Roofline-based analytic latency model for the prefill and decode phases.

mod calibrate;
mod latency;
mod ports;
mod resources;
mod roofline;

pub use calibrate::{
    calibrate, parse_measurements, CalibrationOptions, CalibrationReport, Measurement, Phase, Residual,
    MEASUREMENT_HEADER,
};
pub use latency::{
    decode_step_latency, prefill_latency, Allocation, Coefficients, Headroom, LatencyTerms,
    PhaseLatencyModel,
};
pub use ports::{effective_kv_bandwidth, PortMap, PortRole};
pub use resources::ResourceVector;
pub use roofline::{
    classify_roofline, decode_attention_workload, linear_workload, prefill_attention_workload, Bound,
    RooflinePoint, Workload,
};
