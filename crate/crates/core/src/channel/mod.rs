//! Doubly dispersive multipath channels with integer delay and Doppler,
//! allowed to be overspread (delays beyond one block, l ≥ M).
//!
//! A path `(h, l, k)` maps a transmitted frame `s` to
//! `r[q] = h·e^{j2πk(q−l)/(MN)}·s[q−l]`, with `s[q'] = 0` for `q' < 0`: every
//! frame starts from silence, so nothing leaks in from a previous frame.

mod fractional;
mod profile;

pub use fractional::{sinc, FractionalPath, FractionalTapChannel};
pub use profile::{generate_channel, generate_fractional_channel, ChannelProfile, ProfileKind, TapProfile};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::zak::{TimeSignal, C64};

/// One propagation path: complex gain, delay in samples, Doppler grid index in [0, N).
///
/// Phase ramps use the signed Doppler (`k − N` for indices above N/2), so a
/// path with a small negative shift rotates slowly backwards rather than
/// appearing a full subcarrier spacing higher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PathRecord", into = "PathRecord")]
pub struct ChannelPath {
    pub gain: C64,
    pub delay: usize,
    pub doppler: usize,
}

#[derive(Serialize, Deserialize)]
struct PathRecord {
    re: f64,
    im: f64,
    l: usize,
    k: usize,
}

impl From<PathRecord> for ChannelPath {
    fn from(r: PathRecord) -> Self {
        ChannelPath::new(C64::new(r.re, r.im), r.l, r.k)
    }
}

impl From<ChannelPath> for PathRecord {
    fn from(p: ChannelPath) -> Self {
        PathRecord {
            re: p.gain.re,
            im: p.gain.im,
            l: p.delay,
            k: p.doppler,
        }
    }
}

impl ChannelPath {
    pub fn new(gain: C64, delay: usize, doppler: usize) -> Self {
        Self { gain, delay, doppler }
    }
}

/// A channel draw: paths sorted by delay, one Doppler per delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    geometry: FrameGeometry,
    l_max: usize,
    paths: Vec<ChannelPath>,
}

impl ChannelRealization {
    pub fn new(geometry: FrameGeometry, l_max: usize, mut paths: Vec<ChannelPath>) -> Result<Self> {
        if l_max >= geometry.mn() {
            return Err(OtfsError::Config(format!(
                "l_max={l_max} must be below MN={}",
                geometry.mn()
            )));
        }
        if l_max / geometry.m() >= geometry.n() {
            return Err(OtfsError::Config("b_max must be below N".into()));
        }
        paths.sort_by_key(|p| p.delay);
        for p in &paths {
            if p.delay > l_max {
                return Err(OtfsError::Config(format!(
                    "path delay {} exceeds l_max={l_max}",
                    p.delay
                )));
            }
            if p.doppler >= geometry.n() {
                return Err(OtfsError::Config(format!(
                    "Doppler index {} outside [0, {})",
                    p.doppler,
                    geometry.n()
                )));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(OtfsError::Domain("path gain must be finite".into()));
            }
        }
        if paths.windows(2).any(|w| w[0].delay == w[1].delay) {
            return Err(OtfsError::Config("each delay may carry only one Doppler".into()));
        }
        Ok(Self { geometry, l_max, paths })
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn paths(&self) -> &[ChannelPath] {
        &self.paths
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn b_max(&self) -> usize {
        self.l_max / self.geometry.m()
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    /// True when no two paths share an aliased delay `l mod M`.
    pub fn has_distinct_aliased_delays(&self) -> bool {
        let m = self.geometry.m();
        let mut seen = vec![false; m];
        self.paths
            .iter()
            .all(|p| !std::mem::replace(&mut seen[p.delay % m], true))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ChannelRealization = serde_json::from_str(text).map_err(|e| OtfsError::Format(e.to_string()))?;
        ChannelRealization::new(raw.geometry, raw.l_max, raw.paths)
    }

    /// Per-tap DT response components, keyed by integer delay.
    pub fn tap_components(&self) -> BTreeMap<usize, Vec<TapComponent>> {
        tap_components_of(&self.paths)
    }
}

/// Phase factor `e^{j2πk·t/(MN)}` evaluated as a product of a per-block and a
/// per-sample table, so a full frame costs M + N evaluations of `exp`.
#[derive(Debug, Clone)]
pub(crate) struct DopplerRamp {
    m: usize,
    coarse: Vec<C64>,
    fine: Vec<C64>,
}

impl DopplerRamp {
    pub(crate) fn new(doppler: usize, geometry: FrameGeometry) -> Self {
        let (m, n) = (geometry.m(), geometry.n());
        let mn = geometry.mn() as f64;
        let k = geometry.signed_doppler(doppler) as f64;
        let coarse = (0..n)
            .map(|b| C64::from_polar(1.0, 2.0 * PI * ((doppler * b) % n) as f64 / n as f64))
            .collect();
        let fine = (0..m)
            .map(|r| C64::from_polar(1.0, 2.0 * PI * k * r as f64 / mn))
            .collect();
        Self { m, coarse, fine }
    }

    #[inline]
    pub(crate) fn at(&self, t: usize) -> C64 {
        self.coarse[t / self.m] * self.fine[t % self.m]
    }
}

/// Noiseless multipath propagation of a frame through a list of paths.
///
/// Paths need not be sorted or distinct; every entry contributes.
pub fn propagate(input: &[C64], paths: &[ChannelPath], geometry: FrameGeometry) -> Vec<C64> {
    let mn = geometry.mn();
    assert_eq!(input.len(), mn, "frame length mismatch");
    let mut out = vec![C64::new(0.0, 0.0); mn];
    for p in paths {
        if p.delay >= mn {
            continue;
        }
        let ramp = DopplerRamp::new(p.doppler, geometry);
        for (t, (o, s)) in out[p.delay..].iter_mut().zip(input).enumerate() {
            *o += p.gain * ramp.at(t) * s;
        }
    }
    out
}

/// Adds circularly symmetric complex Gaussian noise with total variance `noise_var`.
pub fn add_noise<R: Rng + ?Sized>(samples: &mut [C64], noise_var: f64, rng: &mut R) {
    if noise_var <= 0.0 {
        return;
    }
    let sd = (noise_var / 2.0).sqrt();
    for s in samples {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        *s += C64::new(re * sd, im * sd);
    }
}

/// Passes a frame through the channel and adds AWGN of variance `noise_var`
/// per complex sample (zero for a noiseless link).
pub fn apply_channel<R: Rng + ?Sized>(
    signal: &TimeSignal,
    chan: &ChannelRealization,
    noise_var: f64,
    rng: &mut R,
) -> TimeSignal {
    assert_eq!(signal.geometry(), chan.geometry(), "geometry mismatch");
    let mut out = propagate(signal.samples(), chan.paths(), chan.geometry());
    add_noise(&mut out, noise_var, rng);
    TimeSignal::new(chan.geometry(), out).expect("finite output")
}

/// Dense row-major MN×MN channel matrix, for small-geometry tests.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub dim: usize,
    pub entries: Vec<C64>,
}

impl DenseMatrix {
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.dim + col]
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim);
        self.entries
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Brute-force channel matrix with `G[q, q−l] += h·e^{j2πk(q−l)/(MN)}`.
pub fn to_matrix_oracle(chan: &ChannelRealization) -> DenseMatrix {
    let mn = chan.geometry().mn();
    let mut entries = vec![C64::new(0.0, 0.0); mn * mn];
    for p in chan.paths() {
        for q in p.delay..mn {
            let col = q - p.delay;
            let k = chan.geometry().signed_doppler(p.doppler) as f64;
            let phase = 2.0 * PI * k * col as f64 / mn as f64;
            entries[q * mn + col] += p.gain * C64::from_polar(1.0, phase);
        }
    }
    DenseMatrix { dim: mn, entries }
}

/// One contribution to an integer-delay tap: `gain·e^{j2πk(m−delay)/(MN)}·e^{j2πkn/N}`.
///
/// The delay is real so that sinc-interpolated fractional paths fit the same form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TapComponent {
    pub gain: C64,
    pub delay: f64,
    pub doppler: usize,
}

pub(crate) fn tap_components_of(paths: &[ChannelPath]) -> BTreeMap<usize, Vec<TapComponent>> {
    let mut taps: BTreeMap<usize, Vec<TapComponent>> = BTreeMap::new();
    for p in paths {
        taps.entry(p.delay).or_default().push(TapComponent {
            gain: p.gain,
            delay: p.delay as f64,
            doppler: p.doppler,
        });
    }
    taps
}

/// DT channel vector of one tap at delay row `m`, summed over its components.
pub fn dt_tap_vector(m: usize, components: &[TapComponent], geometry: FrameGeometry) -> Vec<C64> {
    let (n, mn) = (geometry.n(), geometry.mn() as f64);
    let mut v = vec![C64::new(0.0, 0.0); n];
    for c in components {
        let k = geometry.signed_doppler(c.doppler) as f64;
        let base = c.gain * C64::from_polar(1.0, 2.0 * PI * k * (m as f64 - c.delay) / mn);
        for (i, x) in v.iter_mut().enumerate() {
            let ph = 2.0 * PI * ((c.doppler * i) % n) as f64 / n as f64;
            *x += base * C64::from_polar(1.0, ph);
        }
    }
    v
}

/// DT-domain channel vectors `ν̃_{m,l}` for every path and delay row.
#[derive(Debug, Clone)]
pub struct DtChannel {
    geometry: FrameGeometry,
    delays: Vec<usize>,
    // vectors[i][m*N + n]
    vectors: Vec<Vec<C64>>,
}

impl DtChannel {
    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn num_paths(&self) -> usize {
        self.delays.len()
    }

    /// `ν̃_{m, l_i}` as a length-N slice.
    #[inline]
    pub fn vector(&self, path: usize, m: usize) -> &[C64] {
        let n = self.geometry.n();
        &self.vectors[path][m * n..(m + 1) * n]
    }
}

/// Builds `ν̃_{m,l}[n] = h·e^{j2πk(m−l)/(MN)}·e^{j2πkn/N}` for every path.
pub fn dt_channel_vectors(paths: &[ChannelPath], geometry: FrameGeometry) -> DtChannel {
    let (m_dim, n_dim) = (geometry.m(), geometry.n());
    let mn = geometry.mn() as f64;
    let mut delays = Vec::with_capacity(paths.len());
    let mut vectors = Vec::with_capacity(paths.len());
    for p in paths {
        let across: Vec<C64> = (0..n_dim)
            .map(|i| C64::from_polar(1.0, 2.0 * PI * ((p.doppler * i) % n_dim) as f64 / n_dim as f64))
            .collect();
        let k = geometry.signed_doppler(p.doppler) as f64;
        let mut v = Vec::with_capacity(m_dim * n_dim);
        for m in 0..m_dim {
            let base = p.gain * C64::from_polar(1.0, 2.0 * PI * k * (m as f64 - p.delay as f64) / mn);
            v.extend(across.iter().map(|a| base * a));
        }
        delays.push(p.delay);
        vectors.push(v);
    }
    DtChannel {
        geometry,
        delays,
        vectors,
    }
}
