use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use super::config::NmseMode;
use crate::channel::{tap_components_of, TapComponent};
use crate::error::{OtfsError, Result};
use crate::estimator::{to_paths, PathEstimate};
use crate::geometry::FrameGeometry;
use crate::zak::C64;

/// Energy of the difference between two sets of DT tap vectors, `Σ_m ‖a_m − b_m‖²`.
///
/// Components with distinct Doppler bins are orthogonal across the N blocks,
/// so each row costs one sum per Doppler bin instead of N samples.
fn tap_error(a: &[TapComponent], b: &[TapComponent], geometry: FrameGeometry) -> f64 {
    let (m_dim, n) = (geometry.m(), geometry.n());
    let mn = geometry.mn() as f64;
    let mut by_doppler: BTreeMap<usize, Vec<(C64, f64, f64)>> = BTreeMap::new();
    for (comps, sign) in [(a, 1.0), (b, -1.0)] {
        for c in comps {
            let k = geometry.signed_doppler(c.doppler) as f64;
            by_doppler
                .entry(c.doppler)
                .or_default()
                .push((c.gain * sign, k, c.delay));
        }
    }
    let mut total = 0.0;
    for comps in by_doppler.values() {
        for m in 0..m_dim {
            let s: C64 = comps
                .iter()
                .map(|&(g, k, l)| g * C64::from_polar(1.0, 2.0 * PI * k * (m as f64 - l) / mn))
                .sum();
            total += s.norm_sqr();
        }
    }
    total * n as f64
}

/// Normalised squared error between true and estimated DT channel vectors.
///
/// `truth` maps integer taps to their components, as produced by
/// [`ChannelRealization::tap_components`](crate::channel::ChannelRealization::tap_components)
/// or a fractional channel. Missing taps count as zero vectors.
pub fn nmse(
    truth: &BTreeMap<usize, Vec<TapComponent>>,
    estimate: &[PathEstimate],
    geometry: FrameGeometry,
    mode: NmseMode,
) -> Result<f64> {
    let est = tap_components_of(&to_paths(estimate));
    let delays: BTreeSet<usize> = match mode {
        NmseMode::Union => truth.keys().chain(est.keys()).copied().collect(),
        NmseMode::Truth => truth.keys().copied().collect(),
    };
    let (mut num, mut den) = (0.0, 0.0);
    for d in delays {
        let t = truth.get(&d).map_or(&[][..], Vec::as_slice);
        let e = est.get(&d).map_or(&[][..], Vec::as_slice);
        num += tap_error(e, t, geometry);
        den += tap_error(t, &[], geometry);
    }
    if den <= 0.0 {
        return Err(OtfsError::ZeroEnergyReference);
    }
    Ok(num / den)
}

/// SplitMix64 finaliser, used to derive independent seeds from counters.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed shared by every trial of one sweep point.
pub fn point_seed(master: u64, point: usize) -> u64 {
    splitmix64(splitmix64(master) ^ point as u64)
}

pub fn trial_seed(point_seed: u64, trial: usize) -> u64 {
    splitmix64(point_seed ^ splitmix64(trial as u64))
}

/// Aggregates for one sweep point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MetricsRow {
    pub sweep_db: f64,
    pub trials: u64,
    pub seed: u64,
    pub nmse: Option<f64>,
    pub ber: Option<f64>,
    pub bit_errors: u64,
    pub bits: u64,
    /// Fewer bit errors than the stopping target were collected.
    pub low_confidence: bool,
    pub refine_doppler_rate: Option<f64>,
    pub refine_delay_rate: Option<f64>,
    pub wall_time_s: f64,
}

/// One line of the long-format results file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRecord {
    pub sweep_db: f64,
    pub metric: String,
    pub value: f64,
    pub trials: u64,
    pub errors: u64,
    pub seed: u64,
}

impl MetricsRow {
    /// Long-format records; wall time is left out so reruns compare equal.
    pub fn records(&self) -> Vec<CsvRecord> {
        let rec = |metric: &str, value: f64, errors: u64| CsvRecord {
            sweep_db: self.sweep_db,
            metric: metric.to_string(),
            value,
            trials: self.trials,
            errors,
            seed: self.seed,
        };
        let mut out = Vec::new();
        if let Some(v) = self.nmse {
            out.push(rec("nmse", v, 0));
        }
        if let Some(v) = self.ber {
            out.push(rec("ber", v, self.bit_errors));
            out.push(rec("bits", self.bits as f64, self.bit_errors));
            out.push(rec(
                "low_confidence",
                f64::from(u8::from(self.low_confidence)),
                self.bit_errors,
            ));
        }
        if let Some(v) = self.refine_doppler_rate {
            out.push(rec("refine_doppler_rate", v, 0));
        }
        if let Some(v) = self.refine_delay_rate {
            out.push(rec("refine_delay_rate", v, 0));
        }
        out
    }
}

pub const CSV_HEADER: &str = "sweep_db,metric,value,trials,errors,seed";

pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let records: Vec<CsvRecord> = rows.iter().flat_map(MetricsRow::records).collect();
    if records.is_empty() {
        w.write_record(CSV_HEADER.split(','))
            .map_err(|e| OtfsError::Format(e.to_string()))?;
    }
    for r in records {
        w.serialize(r).map_err(|e| OtfsError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// SNR at which a BER curve crosses `target`, by linear interpolation of
/// log10(BER) between the first bracketing pair of points.
///
/// Points with no errors are taken at half an error so the logarithm stays
/// finite; the crossing is then an upper bound.
pub fn ber_crossing(rows: &[MetricsRow], target: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| {
            let ber = r.ber?;
            let floor = if r.bits > 0 {
                0.5 / r.bits as f64
            } else {
                f64::MIN_POSITIVE
            };
            Some((r.sweep_db, ber.max(floor)))
        })
        .collect();
    if let Some(&(x, y)) = pts.first() {
        if y <= target {
            return Some(x);
        }
    }
    pts.windows(2).find_map(|w| {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 >= target && y1 <= target {
            let (l0, l1, lt) = (y0.log10(), y1.log10(), target.log10());
            Some(if l0 == l1 {
                x0
            } else {
                x0 + (x1 - x0) * (l0 - lt) / (l0 - l1)
            })
        } else {
            None
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{dt_tap_vector, ChannelPath, ChannelRealization};
    use crate::estimator::PathSource;

    fn est(p: &ChannelPath, gain: C64) -> PathEstimate {
        PathEstimate {
            delay: p.delay,
            doppler: p.doppler,
            gain,
            source: PathSource::Stage2,
        }
    }

    fn truth() -> ChannelRealization {
        let g = FrameGeometry::new(8, 6, 15e3).unwrap();
        ChannelRealization::new(
            g,
            30,
            vec![
                ChannelPath::new(C64::new(0.5, 0.1), 2, 1),
                ChannelPath::new(C64::new(-0.3, 0.6), 20, 5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn reference_values() {
        let t = truth();
        let g = t.geometry();
        let exact: Vec<_> = t.paths().iter().map(|p| est(p, p.gain)).collect();
        let comps = t.tap_components();
        assert!(nmse(&comps, &exact, g, NmseMode::Union).unwrap() < 1e-28);
        assert!((nmse(&comps, &[], g, NmseMode::Union).unwrap() - 1.0).abs() < 1e-12);

        let one = ChannelRealization::new(g, 30, vec![ChannelPath::new(C64::new(0.8, -0.6), 11, 4)]).unwrap();
        let half = [est(&one.paths()[0], one.paths()[0].gain / 2.0)];
        assert!((nmse(&one.tap_components(), &half, g, NmseMode::Truth).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(
            nmse(&BTreeMap::new(), &half, g, NmseMode::Union),
            Err(OtfsError::ZeroEnergyReference)
        ));
    }

    #[test]
    fn spurious_paths_only_count_in_union_mode() {
        let t = truth();
        let g = t.geometry();
        let mut e: Vec<_> = t.paths().iter().map(|p| est(p, p.gain)).collect();
        e.push(est(&ChannelPath::new(C64::new(0.1, 0.0), 7, 0), C64::new(0.1, 0.0)));
        assert!(nmse(&t.tap_components(), &e, g, NmseMode::Truth).unwrap() < 1e-28);
        assert!(nmse(&t.tap_components(), &e, g, NmseMode::Union).unwrap() > 1e-3);
    }

    #[test]
    fn orthogonality_shortcut_matches_sample_sums() {
        let t = truth();
        let g = t.geometry();
        let e = vec![
            est(&t.paths()[0], C64::new(0.4, 0.2)),
            PathEstimate {
                delay: 2,
                doppler: 3,
                gain: C64::new(0.1, -0.1),
                source: PathSource::Stage2,
            },
            est(&ChannelPath::new(C64::new(0.0, 0.0), 9, 2), C64::new(0.2, 0.3)),
        ];
        let tc = t.tap_components();
        let ec = tap_components_of(&to_paths(&e));
        let delays: BTreeSet<usize> = tc.keys().chain(ec.keys()).copied().collect();
        let (mut num, mut den) = (0.0, 0.0);
        for d in delays {
            let tv = tc.get(&d).map_or(&[][..], Vec::as_slice);
            let ev = ec.get(&d).map_or(&[][..], Vec::as_slice);
            for m in 0..g.m() {
                let a = dt_tap_vector(m, tv, g);
                let b = dt_tap_vector(m, ev, g);
                num += a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>();
                den += a.iter().map(|x| x.norm_sqr()).sum::<f64>();
            }
        }
        let fast = nmse(&tc, &e, g, NmseMode::Union).unwrap();
        assert!((fast - num / den).abs() < 1e-12, "{fast} vs {}", num / den);
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = point_seed(7, 0);
        assert_eq!(a, point_seed(7, 0));
        assert_ne!(a, point_seed(7, 1));
        assert_ne!(trial_seed(a, 0), trial_seed(a, 1));
        assert_eq!(splitmix64(0), 0xe220_a839_7b1d_cdaf);
    }

    #[test]
    fn crossing_interpolates_in_log_domain() {
        let row = |db: f64, ber: f64| MetricsRow {
            sweep_db: db,
            ber: Some(ber),
            bits: 1_000_000,
            ..Default::default()
        };
        let rows = [row(10.0, 1e-2), row(12.0, 1e-3), row(14.0, 1e-5)];
        assert!((ber_crossing(&rows, 1e-3).unwrap() - 12.0).abs() < 1e-12);
        assert!((ber_crossing(&rows, 1e-4).unwrap() - 13.0).abs() < 1e-12);
        assert!(ber_crossing(&rows, 1e-7).is_none());
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        let row = MetricsRow {
            sweep_db: 30.0,
            trials: 5,
            seed: 9,
            nmse: Some(0.01),
            ..Default::default()
        };
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().nth(1).unwrap(), "30.0,nmse,0.01,5,0,9");
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), CSV_HEADER);
    }
}
