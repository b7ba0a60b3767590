//! Complex-multiplication tallies for instrumented runs.
//!
//! Counts follow the usual conventions: an N-point FFT costs N·log₂N, a
//! squared magnitude costs one multiplication, a complex division one.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub transform: u64,
    pub detection: u64,
    pub correlation: u64,
    pub gain: u64,
    pub reconstruction: u64,
    pub combining: u64,
}

impl OpCounts {
    pub fn total(&self) -> u64 {
        self.transform + self.detection + self.correlation + self.gain + self.reconstruction + self.combining
    }

    /// Cost of `count` FFTs of length `len`.
    pub fn fft_cost(len: usize, count: usize) -> u64 {
        let log = usize::BITS - 1 - len.max(1).leading_zeros();
        let log = if len.is_power_of_two() { log } else { log + 1 };
        (len as u64) * log as u64 * count as u64
    }
}

impl std::ops::AddAssign for OpCounts {
    fn add_assign(&mut self, o: Self) {
        self.transform += o.transform;
        self.detection += o.detection;
        self.correlation += o.correlation;
        self.gain += o.gain;
        self.reconstruction += o.reconstruction;
        self.combining += o.combining;
    }
}
