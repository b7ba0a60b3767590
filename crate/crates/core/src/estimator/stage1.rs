//! Pilot-echo detection on the received delay-Doppler grid.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{EstimatorConfig, PathEstimate, PathSource};
use crate::ops::OpCounts;
use crate::zak::{DDGrid, C64};

#[derive(Debug, Clone, Default, Serialize)]
pub struct Stage1Result {
    /// Paths accepted as underspread, gains read off the grid.
    pub paths: Vec<PathEstimate>,
    /// Rows whose average power passed the detection threshold, ascending.
    pub aliased: Vec<usize>,
    /// Doppler bins kept for each detected row.
    pub dopplers: BTreeMap<usize, Vec<usize>>,
    /// Detected rows left for the correlation stage.
    pub residual: Vec<usize>,
    /// Detected rows where no single bin passed the adaptive threshold.
    pub dropped: Vec<usize>,
    /// Average power excluding the kept bins, per detected row.
    pub excluded_power: BTreeMap<usize, f64>,
}

impl Stage1Result {
    pub fn doppler_set(&self, row: usize) -> &[usize] {
        self.dopplers.get(&row).map_or(&[], Vec::as_slice)
    }
}

/// Runs the row-power test, the adaptive Doppler threshold and the
/// underspread test over every delay row of `y`.
pub fn stage1(y: &DDGrid, pilot: C64, chirp_amplitude: f64, cfg: &EstimatorConfig, ops: &mut OpCounts) -> Stage1Result {
    let geom = y.geometry();
    let n = geom.n();
    let row_gate = cfg.delta * (2.0 * chirp_amplitude * chirp_amplitude / n as f64 + cfg.noise_var);
    let underspread_gate = cfg.alpha_prime * cfg.noise_var;
    let mut out = Stage1Result::default();
    ops.detection += geom.mn() as u64;

    for row in 0..geom.m() {
        let power: Vec<f64> = y.row(row).iter().map(|v| v.norm_sqr()).collect();
        let total: f64 = power.iter().sum();
        let mean = total / n as f64;
        if mean < row_gate {
            continue;
        }
        out.aliased.push(row);
        let kept: Vec<usize> = (0..n).filter(|&k| power[k] > cfg.alpha * mean).collect();
        if kept.is_empty() {
            out.dropped.push(row);
            continue;
        }
        let kept_power: f64 = kept.iter().map(|&k| power[k]).sum();
        let excluded = if kept.len() == n {
            0.0
        } else {
            (total - kept_power) / (n - kept.len()) as f64
        };
        out.excluded_power.insert(row, excluded);
        if excluded <= underspread_gate {
            for &k in &kept {
                ops.gain += 1;
                out.paths.push(PathEstimate {
                    delay: row,
                    doppler: k,
                    gain: y.get(row, k) / pilot,
                    source: PathSource::Stage1,
                });
            }
        } else {
            out.residual.push(row);
        }
        out.dopplers.insert(row, kept);
    }
    out
}
