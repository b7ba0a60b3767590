//! Training frame: a dual chirp spread over the delay-Doppler grid plus one
//! high-power pilot at the grid origin.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::zak::{DDGrid, TimeSignal, ZakTransform, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpParams {
    /// Per-chirp amplitude A; the pulse peaks at 2A.
    pub amplitude: f64,
    /// Centre frequency offset in Hz.
    pub center_freq: f64,
}

impl ChirpParams {
    pub fn new(amplitude: f64, center_freq: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0 && center_freq.is_finite()) {
            return Err(OtfsError::Config(format!("invalid chirp amplitude {amplitude}")));
        }
        Ok(Self { amplitude, center_freq })
    }

    /// Amplitude from the chirp SNR `2A²/σ²`, zero centre frequency.
    pub fn from_snr(snr_db: f64, noise_var: f64) -> Self {
        Self {
            amplitude: (noise_var * 10f64.powf(snr_db / 10.0) / 2.0).sqrt(),
            center_freq: 0.0,
        }
    }
}

/// Pilot amplitude from the pilot SNR `|x_p|²/(Nσ²)`; real and non-negative.
pub fn pilot_from_snr(snr_db: f64, noise_var: f64, geometry: FrameGeometry) -> C64 {
    C64::new(
        (geometry.n() as f64 * noise_var * 10f64.powf(snr_db / 10.0)).sqrt(),
        0.0,
    )
}

/// The M-sample pulse `p[0, k, q]`, q ∈ [0, M).
pub fn chirp_template(doppler: usize, params: &ChirpParams, geometry: FrameGeometry) -> Vec<C64> {
    let m = geometry.m() as f64;
    let mn = geometry.mn() as f64;
    let k = geometry.signed_doppler(doppler) as f64;
    let linear = params.center_freq / (m * geometry.delta_f()) + k / mn;
    (0..geometry.m())
        .map(|q| {
            let q = q as f64;
            let up = C64::from_polar(1.0, 2.0 * PI * (linear * q + q * q / (4.0 * m)));
            let down = C64::from_polar(1.0, 2.0 * PI * (linear * q - q * q / (4.0 * m)));
            params.amplitude * (up + down)
        })
        .collect()
}

/// Dual chirp `p[l, k, ·]` starting at sample `l`, zero outside `[l, l + M)`.
///
/// A pulse starting within the last block is cut at the frame end.
pub fn dual_chirp(delay: usize, doppler: usize, params: &ChirpParams, geometry: FrameGeometry) -> TimeSignal {
    let mut out = TimeSignal::zeros(geometry);
    let template = chirp_template(doppler, params, geometry);
    if delay < geometry.mn() {
        for (o, t) in out.samples_mut()[delay..].iter_mut().zip(&template) {
            *o = *t;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct TrainingFrame {
    grid: DDGrid,
    pilot: C64,
    chirp: ChirpParams,
    signal: TimeSignal,
}

impl TrainingFrame {
    /// Places `dzt(p[0,0,·])` on the grid, adds the pilot at (0, 0) and
    /// transforms back. `min_ratio` is the smallest accepted value of
    /// `|x_p|²·N / (2A²)`.
    pub fn build(pilot: C64, chirp: ChirpParams, geometry: FrameGeometry, min_ratio: f64) -> Result<Self> {
        let chirp_power = 2.0 * chirp.amplitude * chirp.amplitude / geometry.n() as f64;
        if chirp_power > 0.0 && pilot.norm_sqr() / chirp_power < min_ratio {
            return Err(OtfsError::Config(format!(
                "pilot-to-chirp power ratio {:.3} below the required {min_ratio}",
                pilot.norm_sqr() / chirp_power
            )));
        }
        let zak = ZakTransform::new(geometry);
        let mut grid = zak.dzt(&dual_chirp(0, 0, &chirp, geometry));
        grid.set(0, 0, grid.get(0, 0) + pilot);
        let signal = zak.idzt(&grid);
        Ok(Self {
            grid,
            pilot,
            chirp,
            signal,
        })
    }

    /// Frame for the given pilot and chirp SNRs at noise variance `noise_var`.
    pub fn from_snr(
        snr_p_db: f64,
        snr_c_db: f64,
        noise_var: f64,
        geometry: FrameGeometry,
        min_ratio: f64,
    ) -> Result<Self> {
        Self::build(
            pilot_from_snr(snr_p_db, noise_var, geometry),
            ChirpParams::from_snr(snr_c_db, noise_var),
            geometry,
            min_ratio,
        )
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.grid.geometry()
    }

    pub fn grid(&self) -> &DDGrid {
        &self.grid
    }

    pub fn pilot(&self) -> C64 {
        self.pilot
    }

    pub fn chirp(&self) -> &ChirpParams {
        &self.chirp
    }

    pub fn signal(&self) -> &TimeSignal {
        &self.signal
    }

    /// `|x_p|²·N / (2A²)`; infinite without a chirp.
    pub fn power_ratio(&self) -> f64 {
        let a2 = 2.0 * self.chirp.amplitude.powi(2);
        if a2 == 0.0 {
            f64::INFINITY
        } else {
            self.pilot.norm_sqr() * self.geometry().n() as f64 / a2
        }
    }
}
