//! Two-stage channel estimation for overspread channels.
//!
//! Stage 1 reads pilot echoes off the received delay-Doppler grid. Rows that
//! hold a single clean echo are underspread paths and are finished there.
//! Every other detected row only reveals an aliased delay `ℓ = l mod M` and
//! its Doppler bins; stage 2 correlates the time-domain chirp against
//! Doppler-shifted templates at `ℓ + b·M` for each candidate block `b` to
//! recover the true delays, then fits gains by successive cancellation.
//! Two refinements run while the reconstruction error stays above `γ·σ²`.

mod config;
pub mod correlation;
pub mod reconstruct;
pub mod refine;
pub mod stage1;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use config::{EstimatorConfig, GainPhase};
pub use correlation::{block_candidates, correlate, isolate_chirp, CorrelationTable};
pub use reconstruct::{gain_td, PathModel, TrainingModel};
pub use refine::{refine_delay, refine_doppler, RefineOutcome};
pub use stage1::{stage1, Stage1Result};

use crate::channel::ChannelPath;
use crate::error::{OtfsError, Result};
use crate::ops::OpCounts;
use crate::training::{chirp_template, TrainingFrame};
use crate::zak::{TimeSignal, ZakTransform, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathSource {
    Stage1,
    Stage2,
    Refine2,
}

/// One estimated path; the Doppler is a grid index in [0, N).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "EstimateRecord", into = "EstimateRecord")]
pub struct PathEstimate {
    pub delay: usize,
    pub doppler: usize,
    pub gain: C64,
    pub source: PathSource,
}

#[derive(Serialize, Deserialize)]
struct EstimateRecord {
    l: usize,
    k: usize,
    re: f64,
    im: f64,
    source: PathSource,
}

impl From<EstimateRecord> for PathEstimate {
    fn from(r: EstimateRecord) -> Self {
        Self {
            delay: r.l,
            doppler: r.k,
            gain: C64::new(r.re, r.im),
            source: r.source,
        }
    }
}

impl From<PathEstimate> for EstimateRecord {
    fn from(p: PathEstimate) -> Self {
        Self {
            l: p.delay,
            k: p.doppler,
            re: p.gain.re,
            im: p.gain.im,
            source: p.source,
        }
    }
}

impl PathEstimate {
    pub fn to_path(&self) -> ChannelPath {
        ChannelPath::new(self.gain, self.delay, self.doppler)
    }
}

pub fn to_paths(estimates: &[PathEstimate]) -> Vec<ChannelPath> {
    estimates.iter().map(PathEstimate::to_path).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RefineFlags {
    /// The gate failed and the refinement ran over at least one row.
    pub invoked: bool,
    /// Some row met the trigger condition and candidates were scored.
    pub searched: bool,
    /// The path list changed.
    pub changed: bool,
    /// A Doppler set was too large for exhaustive pairing.
    pub skipped: bool,
}

impl RefineFlags {
    fn absorb(&mut self, o: &RefineOutcome) {
        self.searched |= o.searched;
        self.changed |= o.changed;
        self.skipped |= o.skipped;
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Diagnostics {
    pub stage1: Stage1Result,
    /// Candidate blocks from the zero-Doppler correlation.
    pub blocks: Vec<usize>,
    pub tables: Vec<CorrelationTable>,
    /// Rows were left for stage 2 but no correlation lag reached the threshold.
    pub stage2_aborted: bool,
    /// Rows with fewer block candidates than Doppler bins.
    pub under_resolved: Vec<usize>,
    /// Reconstruction error after stage 2 and after each refinement pass.
    pub mse_trace: Vec<f64>,
    pub refine_doppler: RefineFlags,
    pub refine_delay: RefineFlags,
    pub ops: OpCounts,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelEstimate {
    pub paths: Vec<PathEstimate>,
    pub diagnostics: Diagnostics,
}

impl ChannelEstimate {
    pub fn mse(&self) -> f64 {
        self.diagnostics.mse_trace.last().copied().unwrap_or(f64::NAN)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

fn check_inputs(received: &TimeSignal, training: &TrainingFrame, cfg: &EstimatorConfig) -> Result<()> {
    cfg.validate()?;
    if received.geometry() != training.geometry() {
        return Err(OtfsError::Shape(
            "received frame and training frame differ in geometry".into(),
        ));
    }
    let geom = training.geometry();
    if cfg.l_max >= geom.mn() || cfg.l_max / geom.m() >= geom.n() {
        return Err(OtfsError::Config(format!(
            "l_max={} too large for the frame",
            cfg.l_max
        )));
    }
    if training.pilot() == C64::new(0.0, 0.0) {
        return Err(OtfsError::Config("training frame carries no pilot".into()));
    }
    Ok(())
}

/// Full two-stage estimate from a received training frame.
pub fn estimate(received: &TimeSignal, training: &TrainingFrame, cfg: &EstimatorConfig) -> Result<ChannelEstimate> {
    check_inputs(received, training, cfg)?;
    let geom = training.geometry();
    let (m, n) = (geom.m(), geom.n());
    let mut diag = Diagnostics::default();
    let mut ops = OpCounts::default();

    let y = ZakTransform::new(geom).dzt(received);
    ops.transform += OpCounts::fft_cost(n, m);
    let s1 = stage1(&y, training.pilot(), training.chirp().amplitude, cfg, &mut ops);
    let mut paths = s1.paths.clone();

    if !s1.residual.is_empty() {
        let gamma = cfg
            .pilot_threshold
            .unwrap_or(training.pilot().norm_sqr() / (n as f64 * cfg.noise_var));
        let isolated = isolate_chirp(received.samples(), gamma * cfg.noise_var);
        ops.correlation += geom.mn() as u64;
        let base = chirp_template(0, training.chirp(), geom);
        let corr = correlate(&isolated, &base, cfg.l_max, &mut ops);
        diag.blocks = block_candidates(&corr, cfg.corr_threshold, m);
        if diag.blocks.is_empty() {
            diag.stage2_aborted = true;
        } else {
            let mut templates: HashMap<usize, Vec<C64>> = HashMap::new();
            for &row in &s1.residual {
                let dopplers = s1.doppler_set(row);
                for &k in dopplers {
                    templates.entry(k).or_insert_with(|| {
                        ops.correlation += 2 * m as u64;
                        chirp_template(k, training.chirp(), geom)
                    });
                }
                let refs: Vec<&[C64]> = dopplers.iter().map(|k| templates[k].as_slice()).collect();
                let table = CorrelationTable::measure(row, m, &diag.blocks, dopplers, &isolated, &refs, &mut ops);
                if table.under_resolved() {
                    diag.under_resolved.push(row);
                }
                for (delay, doppler) in table.selected_pairs() {
                    paths.push(PathEstimate {
                        delay,
                        doppler,
                        gain: C64::new(0.0, 0.0),
                        source: PathSource::Stage2,
                    });
                }
                diag.tables.push(table);
            }
        }
    }
    paths.sort_by_key(|p| p.delay);

    let mut model = TrainingModel::new(received.samples(), training.signal().samples(), geom, cfg.gain_phase);
    let mut mse = model.fit(&mut paths, 0);
    diag.mse_trace.push(mse);

    if cfg.refine && !diag.tables.is_empty() {
        let gate = cfg.mse_gate();
        if mse >= gate && diag.tables.iter().any(|t| t.dopplers.len() > 1) {
            diag.refine_doppler.invoked = true;
            for table in diag.tables.iter().filter(|t| t.dopplers.len() > 1) {
                if mse < gate {
                    break;
                }
                let out = refine_doppler(mse, table, &mut paths, cfg.epsilon1, cfg.max_pairing_set, &mut model);
                diag.refine_doppler.absorb(&out);
                mse = out.mse;
            }
            diag.mse_trace.push(mse);
        }
        if mse >= gate {
            diag.refine_delay.invoked = true;
            for table in &diag.tables {
                if mse < gate {
                    break;
                }
                let out = refine_delay(mse, table, &mut paths, cfg.epsilon1, gate, &mut model);
                diag.refine_delay.absorb(&out);
                mse = out.mse;
            }
            diag.mse_trace.push(mse);
        }
    }
    ops += model.ops;
    diag.ops = ops;
    diag.stage1 = s1;
    Ok(ChannelEstimate {
        paths,
        diagnostics: diag,
    })
}

/// Pilot-only baseline: every detected (row, bin) pair taken as a path with
/// zero block index and its grid gain.
pub fn aliased_only(
    received: &TimeSignal,
    training: &TrainingFrame,
    cfg: &EstimatorConfig,
) -> Result<Vec<PathEstimate>> {
    check_inputs(received, training, cfg)?;
    let geom = training.geometry();
    let y = ZakTransform::new(geom).dzt(received);
    let s1 = stage1(
        &y,
        training.pilot(),
        training.chirp().amplitude,
        cfg,
        &mut OpCounts::default(),
    );
    Ok(s1
        .dopplers
        .iter()
        .flat_map(|(&row, ks)| {
            let y = &y;
            ks.iter().map(move |&k| PathEstimate {
                delay: row,
                doppler: k,
                gain: y.get(row, k) / training.pilot(),
                source: PathSource::Stage1,
            })
        })
        .collect())
}
