//! Frame geometry: grid dimensions and the timing quantities derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};

/// Size of an OTFS frame: `m` delay bins (subcarriers), `n` Doppler bins (blocks)
/// and the subcarrier spacing in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct FrameGeometry {
    m: usize,
    n: usize,
    delta_f: f64,
}

#[derive(Deserialize)]
struct RawGeometry {
    m: usize,
    n: usize,
    delta_f: f64,
}

impl TryFrom<RawGeometry> for FrameGeometry {
    type Error = OtfsError;

    fn try_from(raw: RawGeometry) -> Result<Self> {
        FrameGeometry::new(raw.m, raw.n, raw.delta_f)
    }
}

impl FrameGeometry {
    pub fn new(m: usize, n: usize, delta_f: f64) -> Result<Self> {
        if m < 2 || n < 2 {
            return Err(OtfsError::Geometry(format!("need M >= 2 and N >= 2, got M={m}, N={n}")));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(OtfsError::Geometry(format!(
                "subcarrier spacing must be positive, got {delta_f}"
            )));
        }
        if m.checked_mul(n).is_none_or(|mn| mn > u32::MAX as usize) {
            return Err(OtfsError::Geometry("M*N overflows".into()));
        }
        Ok(Self { m, n, delta_f })
    }

    /// Delay bins per block.
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    /// Blocks per frame.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Samples per frame.
    #[inline]
    pub fn mn(&self) -> usize {
        self.m * self.n
    }

    pub fn delta_f(&self) -> f64 {
        self.delta_f
    }

    /// Block duration T = 1/Δf.
    pub fn block_duration(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Sampling interval T_s = 1/(MΔf).
    pub fn sample_interval(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    /// Occupied bandwidth B = MΔf (also the Nyquist rate).
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    /// Frame duration T_f = NT.
    pub fn frame_duration(&self) -> f64 {
        self.n as f64 / self.delta_f
    }

    /// Time-bandwidth product B·T_f, equal to MN up to rounding.
    pub fn time_bandwidth(&self) -> f64 {
        self.bandwidth() * self.frame_duration()
    }

    /// Signed Doppler in (-N/2, N/2] for a grid index k in [0, N).
    pub fn signed_doppler(&self, k: usize) -> i64 {
        let k = (k % self.n) as i64;
        if 2 * k <= self.n as i64 {
            k
        } else {
            k - self.n as i64
        }
    }

    /// Grid index in [0, N) for a signed Doppler bin.
    pub fn doppler_index(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Splits a delay l in [0, MN) into its aliased delay ℓ = l mod M and block b = ⌊l/M⌋.
    pub fn mod_delay(&self, l: usize) -> Result<(usize, usize)> {
        if l >= self.mn() {
            return Err(OtfsError::Domain(format!("delay {l} outside [0, {})", self.mn())));
        }
        Ok((l % self.m, l / self.m))
    }

    /// Delay in samples for a physical delay in seconds, rounded to the nearest sample.
    pub fn delay_samples(&self, tau: f64) -> usize {
        (tau * self.bandwidth()).round() as usize
    }

    /// Maximum normalized Doppler for a speed (km/h) and carrier (Hz).
    pub fn doppler_bins(&self, speed_kmh: f64, carrier_hz: f64) -> f64 {
        const C: f64 = 299_792_458.0;
        let nu_max = speed_kmh / 3.6 * carrier_hz / C;
        nu_max * self.frame_duration()
    }
}
