//! Delay-Doppler grids, time-domain frames and the discrete Zak transform pair.
//!
//! A frame lives in three equivalent forms:
//!
//! * the delay-Doppler (DD) grid `X`, an M×N matrix indexed by delay bin ℓ (row)
//!   and Doppler bin k (column);
//! * the delay-time (DT) matrix `X̃ = X·F_Nᴴ`, obtained by an N-point unitary
//!   inverse DFT along every delay row;
//! * the time signal `s = vec(X̃)`, the column-major serialization of the DT
//!   matrix. Sample `q = n·M + m` holds DT entry `(m, n)`: time block `n`
//!   carries the M delay samples of that block back to back.
//!
//! Every index computation in the estimator and detector relies on this
//! serialization, so it is fixed here and nowhere else.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;

pub type C64 = Complex64;

/// M×N complex matrix in the delay-Doppler (or delay-time) domain, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DDGrid {
    geometry: FrameGeometry,
    values: Vec<C64>,
}

impl DDGrid {
    pub fn zeros(geometry: FrameGeometry) -> Self {
        Self {
            geometry,
            values: vec![C64::new(0.0, 0.0); geometry.mn()],
        }
    }

    /// Builds a grid from row-major values (row = delay bin).
    pub fn from_rows(geometry: FrameGeometry, values: Vec<C64>) -> Result<Self> {
        if values.len() != geometry.mn() {
            return Err(OtfsError::Shape(format!(
                "grid needs {} values, got {}",
                geometry.mn(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(OtfsError::Domain("grid entries must be finite".into()));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    #[inline]
    pub fn get(&self, delay: usize, doppler: usize) -> C64 {
        self.values[delay * self.geometry.n() + doppler]
    }

    #[inline]
    pub fn set(&mut self, delay: usize, doppler: usize, value: C64) {
        let n = self.geometry.n();
        self.values[delay * n + doppler] = value;
    }

    pub fn row(&self, delay: usize) -> &[C64] {
        let n = self.geometry.n();
        &self.values[delay * n..(delay + 1) * n]
    }

    pub fn row_mut(&mut self, delay: usize) -> &mut [C64] {
        let n = self.geometry.n();
        &mut self.values[delay * n..(delay + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[C64]> {
        self.values.chunks_exact(self.geometry.n())
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Length-MN time-domain frame; sample `q = n·M + m` is DT entry `(m, n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSignal {
    geometry: FrameGeometry,
    samples: Vec<C64>,
}

impl TimeSignal {
    pub fn zeros(geometry: FrameGeometry) -> Self {
        Self {
            geometry,
            samples: vec![C64::new(0.0, 0.0); geometry.mn()],
        }
    }

    pub fn new(geometry: FrameGeometry, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != geometry.mn() {
            return Err(OtfsError::Shape(format!(
                "signal needs {} samples, got {}",
                geometry.mn(),
                samples.len()
            )));
        }
        if samples.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(OtfsError::Domain("signal samples must be finite".into()));
        }
        Ok(Self { geometry, samples })
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [C64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<C64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|v| v.norm_sqr()).sum()
    }

    /// DT column for delay `m`: `[s[m], s[M+m], …, s[(N-1)M+m]]`.
    pub fn dt_row(&self, m: usize) -> Vec<C64> {
        let mm = self.geometry.m();
        (0..self.geometry.n()).map(|n| self.samples[n * mm + m]).collect()
    }

    /// Writes the binary capture format: `"OTFS"`, u32 M, u32 N, u32 reserved,
    /// then MN little-endian `(re, im)` f64 pairs.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"OTFS")?;
        w.write_all(&(self.geometry.m() as u32).to_le_bytes())?;
        w.write_all(&(self.geometry.n() as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        for s in &self.samples {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads the binary capture format. The subcarrier spacing is not stored,
    /// so the caller supplies it.
    pub fn read_from<R: Read>(mut r: R, delta_f: f64) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != b"OTFS" {
            return Err(OtfsError::Format("missing OTFS magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
        let geometry = FrameGeometry::new(word(4), word(8), delta_f)?;
        let mut body = vec![0u8; geometry.mn() * 16];
        r.read_exact(&mut body)
            .map_err(|e| OtfsError::Format(format!("truncated sample data: {e}")))?;
        let samples = body
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[0..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..16].try_into().unwrap()),
                )
            })
            .collect();
        TimeSignal::new(geometry, samples)
    }
}

/// Planned N-point FFTs for one geometry, reused across transforms.
#[derive(Clone)]
pub struct ZakTransform {
    geometry: FrameGeometry,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for ZakTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ZakTransform")
            .field("geometry", &self.geometry)
            .finish()
    }
}

impl ZakTransform {
    pub fn new(geometry: FrameGeometry) -> Self {
        let mut planner = FftPlanner::new();
        let n = geometry.n();
        Self {
            geometry,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    /// In-place unitary forward DFT of one length-N vector (`v ← F_N v`).
    pub fn dft(&self, v: &mut [C64]) {
        self.forward.process(v);
        v.iter_mut().for_each(|x| *x *= self.scale);
    }

    /// In-place unitary inverse DFT of one length-N vector (`v ← F_Nᴴ v`).
    pub fn idft(&self, v: &mut [C64]) {
        self.inverse.process(v);
        v.iter_mut().for_each(|x| *x *= self.scale);
    }

    /// DD grid to time signal: row-wise inverse DFT, then column-major serialization.
    pub fn idzt(&self, grid: &DDGrid) -> TimeSignal {
        assert_eq!(grid.geometry(), self.geometry, "geometry mismatch");
        let (m, n) = (self.geometry.m(), self.geometry.n());
        let mut samples = vec![C64::new(0.0, 0.0); m * n];
        let mut row = vec![C64::new(0.0, 0.0); n];
        for (delay, src) in grid.rows().enumerate() {
            row.copy_from_slice(src);
            self.idft(&mut row);
            for (block, v) in row.iter().enumerate() {
                samples[block * m + delay] = *v;
            }
        }
        TimeSignal {
            geometry: self.geometry,
            samples,
        }
    }

    /// Time signal to DD grid: de-serialize to the DT matrix, then row-wise forward DFT.
    pub fn dzt(&self, signal: &TimeSignal) -> DDGrid {
        assert_eq!(signal.geometry(), self.geometry, "geometry mismatch");
        let (m, n) = (self.geometry.m(), self.geometry.n());
        let mut values = vec![C64::new(0.0, 0.0); m * n];
        for (delay, row) in values.chunks_exact_mut(n).enumerate() {
            for (block, v) in row.iter_mut().enumerate() {
                *v = signal.samples[block * m + delay];
            }
            self.dft(row);
        }
        DDGrid {
            geometry: self.geometry,
            values,
        }
    }
}

/// Inverse discrete Zak transform with a throwaway plan.
pub fn idzt(grid: &DDGrid) -> TimeSignal {
    ZakTransform::new(grid.geometry()).idzt(grid)
}

/// Forward discrete Zak transform with a throwaway plan.
pub fn dzt(signal: &TimeSignal) -> DDGrid {
    ZakTransform::new(signal.geometry()).dzt(signal)
}
