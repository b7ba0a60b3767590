//! Iterative delay-time MRC detection for OTFS frames sent without per-block
//! guards.
//!
//! Row `m` of the DT frame reaches receive row `[m+l]_M` through a path at
//! delay `l`, pushed `⌊(m+l)/M⌋` blocks later. The detector keeps a running
//! residual, combines each symbol row's copies across all paths, takes a hard
//! QAM decision in the DD domain and cancels the change immediately, so later
//! rows in the same sweep see the updated residual.

use serde::{Deserialize, Serialize};

use crate::channel::DtChannel;
use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::ops::OpCounts;
use crate::qam::QamConstellation;
use crate::zak::{DDGrid, TimeSignal, ZakTransform, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Non-cyclic shift: `p ≥ 0` moves entries down by `p` with leading zeros,
/// `p < 0` moves them up by `|p|` with trailing zeros.
pub fn block_shift(v: &[C64], p: i64) -> Result<Vec<C64>> {
    let n = v.len();
    if p.unsigned_abs() as usize >= n.max(1) {
        return Err(OtfsError::Domain(format!("shift {p} out of range for length {n}")));
    }
    let s = p.unsigned_abs() as usize;
    let mut out = vec![ZERO; n];
    if p >= 0 {
        out[s..].copy_from_slice(&v[..n - s]);
    } else {
        out[..n - s].copy_from_slice(&v[s..]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    /// Start from all-zero symbol rows.
    #[default]
    Zeros,
    /// Start from the received DT rows themselves.
    Passthrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub max_iter: usize,
    /// Weight of the hard decision against the soft combiner output.
    pub blend: f64,
    pub init: InitMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            max_iter: 5,
            blend: 1.0,
            init: InitMode::Zeros,
        }
    }
}

impl DetectorConfig {
    /// Settings for small frames, where full hard decisions oscillate.
    pub fn small_frame() -> Self {
        Self {
            max_iter: 20,
            blend: 0.25,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(OtfsError::Config("max_iter must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.blend) {
            return Err(OtfsError::Config(format!("blend {} outside [0, 1]", self.blend)));
        }
        Ok(())
    }
}

/// Received DT rows `ỹ_m[n] = r[nM + m]`, stored row-major (M × N).
pub fn receive_rows(signal: &TimeSignal) -> Vec<C64> {
    let g = signal.geometry();
    let (m, n) = (g.m(), g.n());
    let s = signal.samples();
    let mut rows = vec![ZERO; m * n];
    for (row, chunk) in rows.chunks_exact_mut(n).enumerate() {
        for (b, v) in chunk.iter_mut().enumerate() {
            *v = s[b * m + row];
        }
    }
    rows
}

/// Inverse of [`receive_rows`].
pub fn rows_to_signal(rows: &[C64], geometry: FrameGeometry) -> Result<TimeSignal> {
    let (m, n) = (geometry.m(), geometry.n());
    if rows.len() != m * n {
        return Err(OtfsError::Shape(format!(
            "expected {} DT samples, got {}",
            m * n,
            rows.len()
        )));
    }
    let mut s = vec![ZERO; m * n];
    for (row, chunk) in rows.chunks_exact(n).enumerate() {
        for (b, v) in chunk.iter().enumerate() {
            s[b * m + row] = *v;
        }
    }
    TimeSignal::new(geometry, s)
}

/// Transmit path: the whole DD grid goes out through one inverse Zak transform.
pub fn rzp_modulate(grid: &DDGrid) -> TimeSignal {
    ZakTransform::new(grid.geometry()).idzt(grid)
}

/// Block offset of every path as seen from every symbol row, validated
/// against the frame length.
fn block_offsets(chan: &DtChannel) -> Result<Vec<usize>> {
    let g = chan.geometry();
    let (m, n) = (g.m(), g.n());
    for &l in chan.delays() {
        if l.div_ceil(m) >= n {
            return Err(OtfsError::Domain(format!("delay {l} spans the whole frame")));
        }
    }
    Ok(chan
        .delays()
        .iter()
        .flat_map(|&l| (0..m).map(move |row| (row + l) / m))
        .collect())
}

/// Noiseless DT response `Σ_l ν̃_{m,l} ∘ Π^{−⌊(m−l)/M⌋} x̃_{[m−l]_M}` for
/// every receive row, built with explicit block shifts.
pub fn dt_response(symbols: &[C64], chan: &DtChannel) -> Result<Vec<C64>> {
    let g = chan.geometry();
    let (m, n) = (g.m() as i64, g.n());
    if symbols.len() != g.mn() {
        return Err(OtfsError::Shape(format!(
            "expected {} DT samples, got {}",
            g.mn(),
            symbols.len()
        )));
    }
    let mut out = vec![ZERO; g.mn()];
    for row in 0..m {
        let y = &mut out[row as usize * n..(row as usize + 1) * n];
        for (i, &l) in chan.delays().iter().enumerate() {
            let src = (row - l as i64).rem_euclid(m) as usize;
            let shift = -(row - l as i64).div_euclid(m);
            if shift as usize >= n {
                continue;
            }
            let x = block_shift(&symbols[src * n..(src + 1) * n], shift)?;
            for ((o, v), x) in y.iter_mut().zip(chan.vector(i, row as usize)).zip(&x) {
                *o += v * x;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Detection {
    /// Final DD symbol estimates (after the last DFT, before demapping).
    pub symbols: DDGrid,
    pub bits: Vec<u8>,
    /// Total residual norm before the first sweep and after each kept sweep.
    pub residual_norms: Vec<f64>,
    /// Sweeps kept in the output.
    pub iterations: usize,
    /// The last sweep raised every row's residual and was discarded.
    pub reverted: bool,
    /// Symbol positions no path observes.
    pub unobserved: usize,
    pub ops: OpCounts,
    /// Operations spent in the per-sweep loop only.
    pub ops_per_iteration: OpCounts,
}

/// Iterative MRC detection of one received data frame.
pub fn mrc_detect(
    received: &TimeSignal,
    chan: &DtChannel,
    qam: &QamConstellation,
    cfg: &DetectorConfig,
) -> Result<Detection> {
    cfg.validate()?;
    let g = received.geometry();
    if chan.geometry() != g {
        return Err(OtfsError::Shape("channel and frame differ in geometry".into()));
    }
    let (m_dim, n) = (g.m(), g.n());
    let mn = g.mn();
    let paths = chan.num_paths();
    let offsets = block_offsets(chan)?;
    let zak = ZakTransform::new(g);
    let mut ops = OpCounts::default();

    let y = receive_rows(received);
    let mut x = match cfg.init {
        InitMode::Zeros => vec![ZERO; mn],
        InitMode::Passthrough => y.clone(),
    };
    let mut resid = y.clone();
    if cfg.init == InitMode::Passthrough {
        let hx = dt_response(&x, chan)?;
        resid.iter_mut().zip(&hx).for_each(|(r, h)| *r -= h);
        ops.combining += (paths * mn) as u64;
    }

    // Combining weights: energy each symbol position collects over all paths.
    let mut weight = vec![0.0f64; mn];
    for i in 0..paths {
        let l = chan.delays()[i];
        for m in 0..m_dim {
            let d = offsets[i * m_dim + m];
            let v = chan.vector(i, (m + l) % m_dim);
            let w = &mut weight[m * n..(m + 1) * n];
            for j in 0..n - d {
                w[j] += v[j + d].norm_sqr();
            }
        }
    }
    ops.combining += (paths * mn) as u64;
    let unobserved = weight.iter().filter(|&&w| w == 0.0).count();

    let row_norms = |r: &[C64]| -> Vec<f64> {
        r.chunks_exact(n)
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum())
            .collect()
    };
    let mut norms = row_norms(&resid);
    let total = |v: &[f64]| v.iter().sum::<f64>().sqrt();
    let mut trace = vec![total(&norms)];
    let mut per_iter = OpCounts::default();
    let mut iterations = 0;
    let mut reverted = false;
    let soft = cfg.blend > 0.0 && cfg.blend < 1.0;

    let mut grad = vec![ZERO; n];
    let mut c = vec![ZERO; n];
    let mut diff = vec![ZERO; n];
    for _ in 0..cfg.max_iter {
        let keep_x = x.clone();
        let mut it_ops = OpCounts::default();
        for m in 0..m_dim {
            grad.fill(ZERO);
            for i in 0..paths {
                let t = (m + chan.delays()[i]) % m_dim;
                let d = offsets[i * m_dim + m];
                let v = chan.vector(i, t);
                let r = &resid[t * n..(t + 1) * n];
                for j in 0..n - d {
                    grad[j] += v[j + d].conj() * r[j + d];
                }
            }
            it_ops.combining += (paths * n) as u64;
            {
                let xm = &x[m * n..(m + 1) * n];
                let w = &weight[m * n..(m + 1) * n];
                for j in 0..n {
                    c[j] = if w[j] > 0.0 { xm[j] + grad[j] / w[j] } else { xm[j] };
                }
            }
            it_ops.combining += n as u64;

            // Hard decision in the DD domain, blended with the soft estimate.
            let mut hard = c.clone();
            zak.dft(&mut hard);
            hard.iter_mut().for_each(|s| *s = qam.decide(*s));
            zak.idft(&mut hard);
            it_ops.transform += OpCounts::fft_cost(n, 2);
            for j in 0..n {
                let new = if soft {
                    hard[j] * cfg.blend + c[j] * (1.0 - cfg.blend)
                } else if cfg.blend == 1.0 {
                    hard[j]
                } else {
                    c[j]
                };
                diff[j] = new - x[m * n + j];
                x[m * n + j] = new;
            }
            if soft {
                it_ops.combining += n as u64;
            }

            for i in 0..paths {
                let t = (m + chan.delays()[i]) % m_dim;
                let d = offsets[i * m_dim + m];
                let v = chan.vector(i, t);
                let r = &mut resid[t * n..(t + 1) * n];
                for j in 0..n - d {
                    r[j + d] -= v[j + d] * diff[j];
                }
            }
            it_ops.combining += (paths * n) as u64;
        }
        let new_norms = row_norms(&resid);
        it_ops.detection += mn as u64;
        ops += it_ops;
        per_iter = it_ops;
        if new_norms.iter().zip(&norms).all(|(a, b)| a >= b) {
            x = keep_x;
            reverted = true;
            break;
        }
        norms = new_norms;
        trace.push(total(&norms));
        iterations += 1;
    }

    let mut values = x;
    for row in values.chunks_exact_mut(n) {
        zak.dft(row);
    }
    ops.transform += OpCounts::fft_cost(n, m_dim);
    let bits = qam.demap(&values);
    Ok(Detection {
        symbols: DDGrid::from_rows(g, values)?,
        bits,
        residual_norms: trace,
        iterations,
        reverted,
        unobserved,
        ops,
        ops_per_iteration: per_iter,
    })
}
