use std::collections::BTreeMap;

use otfs_core::channel::{dt_channel_vectors, propagate, to_matrix_oracle, ChannelPath, ChannelRealization};
use otfs_core::detector::{block_shift, dt_response, receive_rows};
use otfs_core::estimator::{estimate, EstimatorConfig, PathEstimate, PathSource};
use otfs_core::harness::{nmse, point_seed, trial_seed, NmseMode};
use otfs_core::qam::QamConstellation;
use otfs_core::training::{ChirpParams, TrainingFrame};
use otfs_core::{dzt, idzt, DDGrid, FrameGeometry, TimeSignal, C64};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = C64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| C64::new(re, im))
}

fn geometry() -> impl Strategy<Value = FrameGeometry> {
    (2usize..=16, 2usize..=16).prop_map(|(m, n)| FrameGeometry::new(m, n, 15e3).unwrap())
}

fn grid_and_values() -> impl Strategy<Value = (FrameGeometry, Vec<C64>)> {
    geometry().prop_flat_map(|g| (Just(g), prop::collection::vec(complex(), g.mn())))
}

/// Channel on a small frame with distinct delays reaching past one block.
fn small_channel() -> impl Strategy<Value = ChannelRealization> {
    (2usize..=8, 2usize..=8)
        .prop_flat_map(|(m, n)| {
            let l_max = m * (n - 1) - 1;
            (
                Just((m, n, l_max)),
                prop::collection::btree_map(0..=l_max, (complex(), 0..n), 1..=5),
            )
        })
        .prop_map(|((m, n, l_max), taps)| {
            let g = FrameGeometry::new(m, n, 15e3).unwrap();
            let paths = taps.into_iter().map(|(l, (h, k))| ChannelPath::new(h, l, k)).collect();
            ChannelRealization::new(g, l_max, paths).unwrap()
        })
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zak_round_trip_and_energy((g, values) in grid_and_values()) {
        let grid = DDGrid::from_rows(g, values).unwrap();
        let sig = idzt(&grid);
        prop_assert!(max_diff(dzt(&sig).values(), grid.values()) < 1e-12);
        prop_assert!((sig.energy() - grid.energy()).abs() < 1e-12 * (1.0 + grid.energy()));
    }

    #[test]
    fn three_channel_models_agree(chan in small_channel(), seed in any::<u64>()) {
        let g = chan.geometry();
        let s: Vec<C64> = (0..g.mn())
            .map(|i| {
                let x = (seed ^ i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
                C64::new((x >> 40) as f64 / 2f64.powi(24) - 0.5, (x & 0xffff) as f64 / 65536.0 - 0.5)
            })
            .collect();
        let time = propagate(&s, chan.paths(), g);
        prop_assert!(max_diff(&time, &to_matrix_oracle(&chan).mul_vec(&s)) < 1e-10);
        let dt = dt_response(&receive_rows(&TimeSignal::new(g, s).unwrap()), &dt_channel_vectors(chan.paths(), g)).unwrap();
        prop_assert!(max_diff(&dt, &receive_rows(&TimeSignal::new(g, time).unwrap())) < 1e-10);
    }

    #[test]
    fn shift_there_and_back_keeps_the_overlap(v in prop::collection::vec(complex(), 1..20), p in -19i64..20) {
        prop_assume!(p.unsigned_abs() < v.len() as u64);
        let there = block_shift(&v, p).unwrap();
        let back = block_shift(&there, -p).unwrap();
        let s = p.unsigned_abs() as usize;
        let kept = if p >= 0 { 0..v.len() - s } else { s..v.len() };
        for i in 0..v.len() {
            let want = if kept.contains(&i) { v[i] } else { C64::new(0.0, 0.0) };
            prop_assert_eq!(back[i], want);
        }
    }

    #[test]
    fn nmse_is_zero_for_truth_one_for_nothing(chan in small_channel(), scale in 0.1..3.0f64) {
        let g = chan.geometry();
        let truth = chan.tap_components();
        let exact: Vec<PathEstimate> = chan
            .paths()
            .iter()
            .map(|p| PathEstimate { delay: p.delay, doppler: p.doppler, gain: p.gain, source: PathSource::Stage2 })
            .collect();
        for mode in [NmseMode::Truth, NmseMode::Union] {
            prop_assert!(nmse(&truth, &exact, g, mode).unwrap() < 1e-20);
            prop_assert!((nmse(&truth, &[], g, mode).unwrap() - 1.0).abs() < 1e-12);
        }
        let scaled: Vec<PathEstimate> = exact.iter().map(|p| PathEstimate { gain: p.gain * scale, ..*p }).collect();
        let want = (scale - 1.0).powi(2);
        prop_assert!((nmse(&truth, &scaled, g, NmseMode::Truth).unwrap() - want).abs() < 1e-9 * (1.0 + want));
    }

    #[test]
    fn qam_round_trip(order in prop::sample::select(vec![4usize, 16, 64]), seed in any::<u64>(), es in 0.1..100.0f64) {
        let q = QamConstellation::new(order, es).unwrap();
        let bits: Vec<u8> = (0..q.bits_per_symbol() * 32).map(|i| ((seed >> (i % 64)) & 1) as u8).collect();
        let symbols = q.map(&bits).unwrap();
        prop_assert_eq!(q.demap(&symbols), bits);
        let energy = q.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
        prop_assert!((energy - es).abs() < 1e-9 * es);
        for s in symbols {
            prop_assert_eq!(q.decide(s), s);
        }
    }

    #[test]
    fn capture_file_round_trip((g, values) in grid_and_values()) {
        let sig = TimeSignal::new(g, values).unwrap();
        let mut buf = Vec::new();
        sig.write_to(&mut buf).unwrap();
        prop_assert_eq!(buf.len(), 16 + 16 * g.mn());
        prop_assert_eq!(TimeSignal::read_from(buf.as_slice(), 15e3).unwrap(), sig);
    }

    #[test]
    fn trial_seeds_do_not_collide(master in any::<u64>(), point in 0usize..8) {
        let ps = point_seed(master, point);
        let seeds: std::collections::BTreeSet<u64> = (0..256).map(|t| trial_seed(ps, t)).collect();
        prop_assert_eq!(seeds.len(), 256);
        prop_assert_ne!(ps, point_seed(master, point + 1));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// One strong path anywhere in the first three blocks is recovered
    /// exactly from a noiseless training frame.
    #[test]
    fn single_path_noiseless_recovery(l in 0usize..96, k in 0usize..32, mag in 0.5..1.0f64, phase in 0.0..std::f64::consts::TAU) {
        let g = FrameGeometry::new(32, 32, 15e3).unwrap();
        let h = C64::from_polar(mag, phase);
        let chan = ChannelRealization::new(g, 100, vec![ChannelPath::new(h, l, k)]).unwrap();
        let frame = TrainingFrame::build(C64::new(200.0, 0.0), ChirpParams::new(2.0, 0.0).unwrap(), g, 1.0).unwrap();
        let rx = TimeSignal::new(g, propagate(frame.signal().samples(), chan.paths(), g)).unwrap();
        let cfg = EstimatorConfig {
            noise_var: 1e-3,
            l_max: 100,
            corr_threshold: 10.0,
            ..EstimatorConfig::default()
        };
        let est = estimate(&rx, &frame, &cfg).unwrap();
        let got: BTreeMap<(usize, usize), C64> = est.paths.iter().map(|p| ((p.delay, p.doppler), p.gain)).collect();
        prop_assert_eq!(got.len(), 1, "paths {:?}", est.paths);
        let g_hat = got.get(&(l, k));
        prop_assert!(g_hat.is_some(), "paths {:?}", est.paths);
        prop_assert!((g_hat.unwrap() - h).norm() < 1e-9 * mag);
    }
}
