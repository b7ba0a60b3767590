//! Time-domain gain estimation by successive cancellation, and the
//! reconstruction error used to judge a path list.

use std::f64::consts::PI;

use super::{GainPhase, PathEstimate, PathSource};
use crate::channel::{propagate, ChannelPath};
use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::ops::OpCounts;
use crate::zak::C64;

/// Gain of a path at `(delay, doppler)` from the received sample at `delay`,
/// after cancelling every path in `prefix` with a smaller delay.
pub fn gain_td(
    received: &[C64],
    sent: &[C64],
    prefix: &[PathEstimate],
    delay: usize,
    doppler: usize,
    geometry: FrameGeometry,
    phase: GainPhase,
) -> Result<C64> {
    if sent[0] == C64::new(0.0, 0.0) {
        return Err(OtfsError::Config("training frame starts with a zero sample".into()));
    }
    let mn = geometry.mn() as f64;
    let mut acc = received[delay];
    for p in prefix.iter().filter(|p| p.delay < delay) {
        let k = geometry.signed_doppler(p.doppler) as f64;
        let rot = C64::from_polar(1.0, 2.0 * PI * k * (delay - p.delay) as f64 / mn);
        acc -= p.gain * rot * sent[delay - p.delay];
    }
    let denom = match phase {
        GainPhase::Sample => sent[0],
        GainPhase::Rotated => C64::from_polar(1.0, 2.0 * PI * geometry.signed_doppler(doppler) as f64 / mn) * sent[0],
    };
    Ok(acc / denom)
}

/// Scores a candidate path list: refits whatever gains the model owns from
/// `from_delay` on and returns the reconstruction error.
pub trait PathModel {
    fn fit(&mut self, paths: &mut [PathEstimate], from_delay: usize) -> f64;
}

/// The estimator's own model: successive time-domain gains for every path not
/// taken from the pilot grid, error `‖r − r̂‖²/(MN)`.
pub struct TrainingModel<'a> {
    pub received: &'a [C64],
    pub sent: &'a [C64],
    pub geometry: FrameGeometry,
    pub phase: GainPhase,
    pub ops: OpCounts,
}

impl<'a> TrainingModel<'a> {
    pub fn new(received: &'a [C64], sent: &'a [C64], geometry: FrameGeometry, phase: GainPhase) -> Self {
        Self {
            received,
            sent,
            geometry,
            phase,
            ops: OpCounts::default(),
        }
    }

    /// Reassigns time-domain gains in ascending delay order. `paths` must be sorted.
    pub fn regain(&mut self, paths: &mut [PathEstimate], from_delay: usize) {
        debug_assert!(paths.windows(2).all(|w| w[0].delay <= w[1].delay));
        for i in 0..paths.len() {
            let p = paths[i];
            if p.source == PathSource::Stage1 || p.delay < from_delay || p.delay >= self.received.len() {
                continue;
            }
            let (prefix, _) = paths.split_at(i);
            self.ops.gain += 2 * prefix.len() as u64 + 1;
            paths[i].gain = gain_td(
                self.received,
                self.sent,
                prefix,
                p.delay,
                p.doppler,
                self.geometry,
                self.phase,
            )
            .expect("training frame has a non-zero first sample");
        }
    }

    pub fn mse(&mut self, paths: &[PathEstimate]) -> f64 {
        let mn = self.geometry.mn();
        let chan: Vec<ChannelPath> = paths
            .iter()
            .map(|p| ChannelPath::new(p.gain, p.delay, p.doppler))
            .collect();
        self.ops.reconstruction += 3 * (chan.len() * mn) as u64 + mn as u64;
        let rebuilt = propagate(self.sent, &chan, self.geometry);
        self.received
            .iter()
            .zip(&rebuilt)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / mn as f64
    }
}

impl PathModel for TrainingModel<'_> {
    fn fit(&mut self, paths: &mut [PathEstimate], from_delay: usize) -> f64 {
        self.regain(paths, from_delay);
        self.mse(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelRealization};
    use crate::training::{ChirpParams, TrainingFrame};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn est(delay: usize, doppler: usize) -> PathEstimate {
        PathEstimate {
            delay,
            doppler,
            gain: C64::new(0.0, 0.0),
            source: PathSource::Stage2,
        }
    }

    fn setup() -> (FrameGeometry, TrainingFrame, ChannelRealization, Vec<C64>) {
        let geom = FrameGeometry::new(32, 16, 15e3).unwrap();
        let frame = TrainingFrame::build(C64::new(40.0, 0.0), ChirpParams::new(1.5, 0.0).unwrap(), geom, 30.0).unwrap();
        let chan = ChannelRealization::new(
            geom,
            100,
            vec![
                ChannelPath::new(C64::new(0.6, 0.2), 3, 2),
                ChannelPath::new(C64::new(-0.3, 0.5), 45, 14),
                ChannelPath::new(C64::new(0.1, -0.4), 77, 5),
            ],
        )
        .unwrap();
        let r = apply_channel(frame.signal(), &chan, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        (geom, frame, chan, r.into_samples())
    }

    #[test]
    fn successive_cancellation_recovers_gains() {
        let (geom, frame, chan, r) = setup();
        let s = frame.signal().samples();
        let mut paths: Vec<PathEstimate> = chan.paths().iter().map(|p| est(p.delay, p.doppler)).collect();
        let mut model = TrainingModel::new(&r, s, geom, GainPhase::Sample);
        let mse = model.fit(&mut paths, 0);
        for (p, t) in paths.iter().zip(chan.paths()) {
            assert!((p.gain - t.gain).norm() < 1e-8, "{p:?}");
        }
        assert!(mse < 1e-20);
        // First path alone is exact with an empty prefix.
        let g = gain_td(&r, s, &[], 3, 2, geom, GainPhase::Sample).unwrap();
        assert!((g - chan.paths()[0].gain).norm() < 1e-12);
    }

    #[test]
    fn wrong_prefix_gain_shows_in_mse() {
        let (geom, frame, chan, r) = setup();
        let s = frame.signal().samples();
        let mut paths: Vec<PathEstimate> = chan.paths().iter().map(|p| est(p.delay, p.doppler)).collect();
        paths[0].source = PathSource::Stage1;
        paths[0].gain = chan.paths()[0].gain * 1.5;
        let mut model = TrainingModel::new(&r, s, geom, GainPhase::Sample);
        // Noiseless, so a gate of γ·σ² = 2·0.1 separates it from a correct fit.
        assert!(model.fit(&mut paths, 0) > 0.2);
    }

    #[test]
    fn rotated_phase_differs_by_small_rotation() {
        let (geom, frame, _, r) = setup();
        let s = frame.signal().samples();
        let a = gain_td(&r, s, &[], 3, 2, geom, GainPhase::Sample).unwrap();
        let b = gain_td(&r, s, &[], 3, 2, geom, GainPhase::Rotated).unwrap();
        assert!((a.norm() - b.norm()).abs() < 1e-12);
        assert!(((a / b).arg() - 2.0 * PI * 2.0 / 512.0).abs() < 1e-12);
    }

    #[test]
    fn zero_first_sample_is_rejected() {
        let geom = FrameGeometry::new(4, 4, 15e3).unwrap();
        let zeros = vec![C64::new(0.0, 0.0); 16];
        assert!(gain_td(&zeros, &zeros, &[], 1, 0, geom, GainPhase::Sample).is_err());
    }
}
