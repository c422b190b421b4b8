use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

/// FPGA resource usage per class. Counts are real-valued because BRAM is
/// reported in half-block units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResourceVector {
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
    pub bram: f64,
    pub uram: f64,
}

impl ResourceVector {
    pub const NAMES: [&'static str; 5] = ["lut", "ff", "dsp", "bram", "uram"];

    pub const ZERO: ResourceVector = ResourceVector {
        lut: 0.0,
        ff: 0.0,
        dsp: 0.0,
        bram: 0.0,
        uram: 0.0,
    };

    pub const fn new(lut: f64, ff: f64, dsp: f64, bram: f64, uram: f64) -> Self {
        ResourceVector { lut, ff, dsp, bram, uram }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.lut, self.ff, self.dsp, self.bram, self.uram]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        ResourceVector::new(a[0], a[1], a[2], a[3], a[4])
    }

    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let (a, b) = (self.to_array(), other.to_array());
        ResourceVector::from_array(std::array::from_fn(|i| f(a[i], b[i])))
    }

    pub fn max(self, other: Self) -> Self {
        self.zip(other, f64::max)
    }

    pub fn scale(self, k: f64) -> Self {
        ResourceVector::from_array(self.to_array().map(|v| v * k))
    }

    /// Componentwise `self <= other`.
    pub fn fits_within(self, other: Self) -> bool {
        self.to_array().iter().zip(other.to_array()).all(|(a, b)| *a <= b)
    }

    /// Names of components where `self > other`.
    pub fn exceeded(self, other: Self) -> Vec<&'static str> {
        Self::NAMES
            .iter()
            .zip(self.to_array().iter().zip(other.to_array()))
            .filter(|(_, (a, b))| **a > *b)
            .map(|(n, _)| *n)
            .collect()
    }

    pub fn is_nonnegative(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

impl Add for ResourceVector {
    type Output = ResourceVector;
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl Sub for ResourceVector {
    type Output = ResourceVector;
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl fmt::Display for ResourceVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "LUT {} FF {} DSP {} BRAM {} URAM {}",
            self.lut, self.ff, self.dsp, self.bram, self.uram
        )
    }
}
