use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{CsiMode, ExperimentConfig};
use super::metrics::{nmse, point_seed, trial_seed, MetricsRow};
use crate::channel::{
    apply_channel, dt_channel_vectors, generate_channel, generate_fractional_channel, ChannelPath, ChannelRealization,
    FractionalTapChannel, TapComponent,
};
use crate::detector::{mrc_detect, rzp_modulate};
use crate::error::{OtfsError, Result};
use crate::estimator::{aliased_only, estimate, to_paths, Diagnostics, PathEstimate, PathSource};
use crate::geometry::FrameGeometry;
use crate::qam::QamConstellation;
use crate::training::TrainingFrame;
use crate::zak::{DDGrid, TimeSignal};

/// Ground-truth channel of one trial.
#[derive(Debug, Clone)]
pub enum TrueChannel {
    Integer(ChannelRealization),
    Fractional(FractionalTapChannel),
}

impl TrueChannel {
    pub fn draw<R: Rng + ?Sized>(cfg: &ExperimentConfig, geometry: FrameGeometry, rng: &mut R) -> Result<Self> {
        let profile = cfg.profile();
        let ch = &cfg.channel;
        Ok(match ch.fractional_epsilon {
            None => Self::Integer(generate_channel(&profile, geometry, ch.l_max, ch.paths, rng)?),
            Some(eps) => Self::Fractional(generate_fractional_channel(
                &profile, geometry, ch.l_max, ch.paths, eps, rng,
            )?),
        })
    }

    pub fn tap_components(&self) -> BTreeMap<usize, Vec<TapComponent>> {
        match self {
            Self::Integer(c) => c.tap_components(),
            Self::Fractional(c) => c.tap_components().clone(),
        }
    }

    pub fn apply<R: Rng + ?Sized>(&self, signal: &TimeSignal, noise_var: f64, rng: &mut R) -> TimeSignal {
        match self {
            Self::Integer(c) => apply_channel(signal, c, noise_var, rng),
            Self::Fractional(c) => c.apply(signal, noise_var, rng),
        }
    }

    fn perfect_paths(&self) -> Result<Vec<ChannelPath>> {
        match self {
            Self::Integer(c) => Ok(c.paths().to_vec()),
            Self::Fractional(_) => Err(OtfsError::Config("perfect CSI needs integer delays".into())),
        }
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

fn send_training<R: Rng + ?Sized>(
    cfg: &ExperimentConfig,
    truth: &TrueChannel,
    geometry: FrameGeometry,
    snr_p_db: f64,
    rng: &mut R,
) -> Result<(TrainingFrame, TimeSignal)> {
    let frame = TrainingFrame::from_snr(snr_p_db, cfg.snr_c_db, cfg.noise_var, geometry, cfg.min_power_ratio)?;
    let received = truth.apply(frame.signal(), cfg.noise_var, rng);
    Ok((frame, received))
}

/// Channel and received training frame exactly as an estimated-CSI trial
/// with this seed draws them.
pub fn sample_capture(
    cfg: &ExperimentConfig,
    snr_p_db: f64,
    seed: u64,
) -> Result<(TrueChannel, TrainingFrame, TimeSignal)> {
    let geometry = cfg.frame_geometry()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = TrueChannel::draw(cfg, geometry, &mut rng)?;
    let (frame, received) = send_training(cfg, &truth, geometry, snr_p_db, &mut rng)?;
    Ok((truth, frame, received))
}

/// Channel estimate for one trial under the configured CSI mode.
struct TrainingOutcome {
    truth: TrueChannel,
    paths: Vec<PathEstimate>,
    diagnostics: Option<Diagnostics>,
}

fn run_training(
    cfg: &ExperimentConfig,
    geometry: FrameGeometry,
    snr_p_db: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainingOutcome> {
    let truth = TrueChannel::draw(cfg, geometry, rng)?;
    if cfg.csi_mode == CsiMode::Perfect {
        let paths = truth
            .perfect_paths()?
            .iter()
            .map(|p| PathEstimate {
                delay: p.delay,
                doppler: p.doppler,
                gain: p.gain,
                source: PathSource::Stage1,
            })
            .collect();
        return Ok(TrainingOutcome {
            truth,
            paths,
            diagnostics: None,
        });
    }
    let (frame, received) = send_training(cfg, &truth, geometry, snr_p_db, rng)?;
    let est_cfg = cfg.estimator_config();
    Ok(match cfg.csi_mode {
        CsiMode::AliasedOnly => TrainingOutcome {
            paths: aliased_only(&received, &frame, &est_cfg)?,
            truth,
            diagnostics: None,
        },
        _ => {
            let est = estimate(&received, &frame, &est_cfg)?;
            TrainingOutcome {
                paths: est.paths,
                truth,
                diagnostics: Some(est.diagnostics),
            }
        }
    })
}

/// Per-trial result of an NMSE run.
#[derive(Debug, Clone, Serialize)]
pub struct NmseTrial {
    pub seed: u64,
    pub nmse: f64,
    pub refine_doppler: bool,
    pub refine_delay: bool,
}

/// Runs every trial of one pilot SNR point, in trial order.
pub fn nmse_trials(cfg: &ExperimentConfig, point: usize, snr_p_db: f64) -> Result<Vec<NmseTrial>> {
    let geometry = cfg.frame_geometry()?;
    let ps = point_seed(cfg.seed, point);
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = trial_seed(ps, t);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = run_training(cfg, geometry, snr_p_db, &mut rng)?;
            let (d1, d2) = out
                .diagnostics
                .as_ref()
                .map_or((false, false), |d| (d.refine_doppler.invoked, d.refine_delay.invoked));
            Ok(NmseTrial {
                seed,
                nmse: nmse(&out.truth.tap_components(), &out.paths, geometry, cfg.nmse_mode)?,
                refine_doppler: d1,
                refine_delay: d2,
            })
        })
        .collect()
}

fn rate(trials: &[NmseTrial], f: impl Fn(&NmseTrial) -> bool) -> f64 {
    trials.iter().filter(|t| f(t)).count() as f64 / trials.len() as f64
}

/// Mean NMSE per pilot SNR point.
pub fn run_nmse_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    let estimated = cfg.csi_mode == CsiMode::Estimated;
    cfg.snr_p_db
        .iter()
        .enumerate()
        .map(|(point, &snr)| {
            let start = Instant::now();
            let trials = nmse_trials(cfg, point, snr)?;
            Ok(MetricsRow {
                sweep_db: snr,
                trials: trials.len() as u64,
                seed: point_seed(cfg.seed, point),
                nmse: Some(trials.iter().map(|t| t.nmse).sum::<f64>() / trials.len() as f64),
                refine_doppler_rate: estimated.then(|| rate(&trials, |t| t.refine_doppler)),
                refine_delay_rate: estimated.then(|| rate(&trials, |t| t.refine_delay)),
                wall_time_s: start.elapsed().as_secs_f64(),
                ..Default::default()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusRates {
    pub snr_p_db: f64,
    pub trials: usize,
    /// Fraction of realizations on which the Doppler re-pairing ran.
    pub refine_doppler: f64,
    /// Fraction of realizations on which the delay recovery ran.
    pub refine_delay: f64,
}

/// How often each refinement runs, per pilot SNR point, with the estimator
/// forced on regardless of the configured CSI mode.
pub fn run_refinement_census(cfg: &ExperimentConfig) -> Result<Vec<CensusRates>> {
    let cfg = ExperimentConfig {
        csi_mode: CsiMode::Estimated,
        ..cfg.clone()
    };
    cfg.validate()?;
    cfg.snr_p_db
        .iter()
        .enumerate()
        .map(|(point, &snr)| {
            let trials = nmse_trials(&cfg, point, snr)?;
            Ok(CensusRates {
                snr_p_db: snr,
                trials: trials.len(),
                refine_doppler: rate(&trials, |t| t.refine_doppler),
                refine_delay: rate(&trials, |t| t.refine_delay),
            })
        })
        .collect()
}

/// Bit errors of one data frame sent through one trial's channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerTrial {
    pub seed: u64,
    pub errors: u64,
    pub bits: u64,
    pub iterations: usize,
}

/// Training, estimation and detection of one data frame. The pilot SNR is
/// the first entry of the configured sweep.
pub fn ber_trial(cfg: &ExperimentConfig, snr_d_db: f64, seed: u64) -> Result<BerTrial> {
    let geometry = cfg.frame_geometry()?;
    let snr_p = *cfg
        .snr_p_db
        .first()
        .ok_or_else(|| OtfsError::Config("BER runs need a pilot SNR".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let training = run_training(cfg, geometry, snr_p, &mut rng)?;

    let qam = QamConstellation::new(cfg.qam_order, cfg.noise_var * db(snr_d_db))?;
    let bits: Vec<u8> = (0..geometry.mn() * qam.bits_per_symbol())
        .map(|_| rng.random_range(0..2u8))
        .collect();
    let grid = DDGrid::from_rows(geometry, qam.map(&bits)?)?;
    let received = training.truth.apply(&rzp_modulate(&grid), cfg.noise_var, &mut rng);
    let chan = dt_channel_vectors(&to_paths(&training.paths), geometry);
    let det = mrc_detect(&received, &chan, &qam, &cfg.detector)?;
    let errors = det.bits.iter().zip(&bits).filter(|(a, b)| a != b).count() as u64;
    Ok(BerTrial {
        seed,
        errors,
        bits: bits.len() as u64,
        iterations: det.iterations,
    })
}

/// BER per data SNR point. A point stops at the first trial, in trial order,
/// that brings the error count to `max_errors`, so the result does not depend
/// on how trials are scheduled.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricsRow>> {
    cfg.validate()?;
    if cfg.channel.fractional_epsilon.is_some() {
        return Err(OtfsError::Config("BER runs need integer delays".into()));
    }
    let batch = 2 * rayon::current_num_threads().max(1);
    cfg.snr_d_db
        .iter()
        .enumerate()
        .map(|(point, &snr)| {
            let start = Instant::now();
            let ps = point_seed(cfg.seed, point);
            let (mut errors, mut bits, mut trials) = (0u64, 0u64, 0u64);
            let mut next = 0;
            'outer: while next < cfg.trials {
                let end = (next + batch).min(cfg.trials);
                let results: Vec<BerTrial> = (next..end)
                    .into_par_iter()
                    .map(|t| ber_trial(cfg, snr, trial_seed(ps, t)))
                    .collect::<Result<_>>()?;
                for r in results {
                    errors += r.errors;
                    bits += r.bits;
                    trials += 1;
                    if errors >= cfg.max_errors {
                        break 'outer;
                    }
                }
                next = end;
            }
            Ok(MetricsRow {
                sweep_db: snr,
                trials,
                seed: ps,
                ber: Some(errors as f64 / bits as f64),
                bit_errors: errors,
                bits,
                low_confidence: errors < cfg.max_errors,
                wall_time_s: start.elapsed().as_secs_f64(),
                ..Default::default()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ProfileKind;
    use crate::harness::config::GeometryConfig;
    use crate::harness::metrics::write_csv;

    fn small(kind: ProfileKind) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_profile(kind);
        cfg.geometry = Some(GeometryConfig {
            m: 64,
            n: 32,
            delta_f: 15e3,
        });
        cfg.channel.l_max = 300;
        cfg.channel.paths = if kind == ProfileKind::A { 4 } else { 9 };
        cfg.channel.k_max = Some(4);
        cfg.trials = 6;
        cfg
    }

    #[test]
    fn nmse_sweep_is_deterministic() {
        let mut cfg = small(ProfileKind::A);
        cfg.snr_p_db = vec![20.0, 40.0];
        let a = run_nmse_sweep(&cfg).unwrap();
        let b = run_nmse_sweep(&cfg).unwrap();
        let (mut ca, mut cb) = (Vec::new(), Vec::new());
        write_csv(&a, &mut ca).unwrap();
        write_csv(&b, &mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(a.iter().all(|r| r.nmse.unwrap() >= 0.0 && r.trials == 6));
    }

    #[test]
    fn perfect_csi_has_zero_nmse() {
        let mut cfg = small(ProfileKind::A);
        cfg.csi_mode = CsiMode::Perfect;
        cfg.snr_p_db = vec![30.0];
        let rows = run_nmse_sweep(&cfg).unwrap();
        assert!(rows[0].nmse.unwrap() < 1e-28);
        assert!(rows[0].refine_doppler_rate.is_none());
    }

    #[test]
    fn ber_point_stops_at_error_target() {
        let mut cfg = small(ProfileKind::A);
        cfg.csi_mode = CsiMode::Perfect;
        cfg.snr_d_db = vec![0.0];
        cfg.max_errors = 50;
        cfg.trials = 40;
        let rows = run_ber_sweep(&cfg).unwrap();
        let r = &rows[0];
        assert!(r.bit_errors >= 50 && !r.low_confidence);
        assert!(r.trials < 40);
        let ber = r.ber.unwrap();
        assert!(ber > 0.0 && ber <= 0.5);
    }

    #[test]
    fn capture_matches_trial_draw() {
        let cfg = small(ProfileKind::B);
        let seed = trial_seed(point_seed(cfg.seed, 0), 3);
        let (truth, frame, rx) = sample_capture(&cfg, 30.0, seed).unwrap();
        let est = estimate(&rx, &frame, &cfg.estimator_config()).unwrap();
        let direct = nmse(&truth.tap_components(), &est.paths, frame.geometry(), cfg.nmse_mode).unwrap();
        let mut one = cfg.clone();
        one.snr_p_db = vec![30.0];
        assert_eq!(nmse_trials(&one, 0, 30.0).unwrap()[3].nmse, direct);
    }

    #[test]
    fn fractional_ber_is_rejected() {
        let mut cfg = small(ProfileKind::A);
        cfg.channel.fractional_epsilon = Some(0.02);
        assert!(run_ber_sweep(&cfg).is_err());
    }
}
