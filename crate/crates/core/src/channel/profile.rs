//! Evaluation channel families and random channel generation.
//!
//! | profile | tap powers | tap delays               | speed    | k_max |
//! |---------|------------|--------------------------|----------|-------|
//! | A       | uniform    | uniform on [0, l_max]    | 500 km/h | 16    |
//! | B       | EVA        | uniform on [0, l_max]    | 500 km/h | 16    |
//! | C       | ETU        | ETU, scaled to samples   | 1000 km/h| 1     |
//!
//! A and B always place their first two taps in the first block (l < M).

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ChannelPath, ChannelRealization, FractionalPath, FractionalTapChannel};
use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::zak::C64;

#[derive(Debug, Clone, Deserialize)]
pub struct TapProfile {
    pub delay_ns: Vec<f64>,
    pub power_db: Vec<f64>,
}

#[derive(Deserialize)]
struct ProfileTables {
    eva: TapProfile,
    etu: TapProfile,
}

fn tables() -> &'static ProfileTables {
    static TABLES: OnceLock<ProfileTables> = OnceLock::new();
    TABLES.get_or_init(|| toml::from_str(include_str!("../../data/tdl_profiles.toml")).expect("bundled profile table"))
}

impl TapProfile {
    pub fn eva() -> &'static TapProfile {
        &tables().eva
    }

    pub fn etu() -> &'static TapProfile {
        &tables().etu
    }

    pub fn len(&self) -> usize {
        self.delay_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delay_ns.is_empty()
    }

    pub fn linear_powers(&self) -> Vec<f64> {
        self.power_db.iter().map(|db| 10f64.powf(db / 10.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProfileKind {
    A,
    B,
    C,
}

impl std::str::FromStr for ProfileKind {
    type Err = OtfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(ProfileKind::A),
            "B" => Ok(ProfileKind::B),
            "C" => Ok(ProfileKind::C),
            other => Err(OtfsError::Config(format!("unknown channel profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelProfile {
    pub kind: ProfileKind,
    pub speed_kmh: f64,
    /// Largest Doppler magnitude in grid bins.
    pub k_max: usize,
}

impl ChannelProfile {
    /// Evaluation settings for one of the three channel families.
    pub fn standard(kind: ProfileKind) -> Self {
        match kind {
            ProfileKind::A | ProfileKind::B => Self {
                kind,
                speed_kmh: 500.0,
                k_max: 16,
            },
            ProfileKind::C => Self {
                kind,
                speed_kmh: 1000.0,
                k_max: 1,
            },
        }
    }

    /// Same family with k_max derived from a carrier frequency and the frame length.
    pub fn with_carrier(kind: ProfileKind, speed_kmh: f64, carrier_hz: f64, geometry: FrameGeometry) -> Self {
        Self {
            kind,
            speed_kmh,
            k_max: geometry.doppler_bins(speed_kmh, carrier_hz).round() as usize,
        }
    }

    /// Frame geometry used with this family in the reference evaluation.
    pub fn reference_geometry(&self) -> FrameGeometry {
        let delta_f = match self.kind {
            ProfileKind::A | ProfileKind::B => 15e3,
            ProfileKind::C => 900e3,
        };
        FrameGeometry::new(512, 128, delta_f).expect("valid")
    }

    pub const REFERENCE_L_MAX: usize = 2400;
    pub const REFERENCE_PATHS: usize = 9;
}

fn draw_distinct_delays<R: Rng + ?Sized>(count: usize, l_max: usize, m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if count > l_max + 1 {
        return Err(OtfsError::Config(format!(
            "cannot place {count} distinct delays in [0, {l_max}]"
        )));
    }
    let under_hi = (m - 1).min(l_max);
    let forced = count.min(2);
    if forced > under_hi + 1 {
        return Err(OtfsError::Config("not enough room for two underspread taps".into()));
    }
    let mut set = BTreeSet::new();
    while set.len() < forced {
        set.insert(rng.random_range(0..=under_hi));
    }
    while set.len() < count {
        set.insert(rng.random_range(0..=l_max));
    }
    Ok(set.into_iter().collect())
}

/// Draws one channel realization of the requested family.
///
/// Gains are complex Gaussian with the family's relative tap powers and are
/// rescaled so that Σ|h|² = 1. Dopplers follow the Jakes construction
/// `k = round(k_max·cos θ)` with θ uniform on [0, 2π).
pub fn generate_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    geometry: FrameGeometry,
    l_max: usize,
    num_paths: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if num_paths == 0 {
        return Err(OtfsError::Config("need at least one path".into()));
    }
    if l_max >= geometry.mn() {
        return Err(OtfsError::Config(format!("l_max={l_max} must be below MN")));
    }
    let (delays, powers) = match profile.kind {
        ProfileKind::A => (
            draw_distinct_delays(num_paths, l_max, geometry.m(), rng)?,
            vec![1.0; num_paths],
        ),
        ProfileKind::B => {
            let eva = TapProfile::eva();
            if num_paths != eva.len() {
                return Err(OtfsError::Config(format!(
                    "EVA profile has {} taps, {num_paths} requested",
                    eva.len()
                )));
            }
            (
                draw_distinct_delays(num_paths, l_max, geometry.m(), rng)?,
                eva.linear_powers(),
            )
        }
        ProfileKind::C => {
            let etu = TapProfile::etu();
            if num_paths != etu.len() {
                return Err(OtfsError::Config(format!(
                    "ETU profile has {} taps, {num_paths} requested",
                    etu.len()
                )));
            }
            let delays: Vec<usize> = etu
                .delay_ns
                .iter()
                .map(|ns| geometry.delay_samples(ns * 1e-9))
                .collect();
            if delays.windows(2).any(|w| w[0] >= w[1]) {
                return Err(OtfsError::Config("ETU taps collide at this sampling rate".into()));
            }
            if delays.last().is_some_and(|&d| d > l_max) {
                return Err(OtfsError::Config(format!(
                    "ETU tail {} samples exceeds l_max={l_max}",
                    delays.last().unwrap()
                )));
            }
            (delays, etu.linear_powers())
        }
    };

    let gains = draw_gains(&powers, rng);
    let paths = delays
        .into_iter()
        .zip(gains)
        .map(|(delay, gain)| ChannelPath::new(gain, delay, draw_doppler(profile.k_max, geometry, rng)))
        .collect();
    ChannelRealization::new(geometry, l_max, paths)
}

fn draw_gains<R: Rng + ?Sized>(powers: &[f64], rng: &mut R) -> Vec<C64> {
    let mut gains: Vec<C64> = powers
        .iter()
        .map(|p| {
            let sd = (p / 2.0).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            C64::new(re * sd, im * sd)
        })
        .collect();
    let norm = gains.iter().map(|g| g.norm_sqr()).sum::<f64>().sqrt();
    gains.iter_mut().for_each(|g| *g /= norm);
    gains
}

fn draw_doppler<R: Rng + ?Sized>(k_max: usize, geometry: FrameGeometry, rng: &mut R) -> usize {
    let theta = rng.random_range(0.0..2.0 * PI);
    let k = (k_max as f64 * theta.cos()).round() as i64;
    geometry.doppler_index(k)
}

/// Fractional-delay variant: delays are real (continuous uniform for A/B, the
/// unrounded ETU grid for C) and the result is sampled onto integer taps with
/// truncation threshold `epsilon`.
pub fn generate_fractional_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    geometry: FrameGeometry,
    l_max: usize,
    num_paths: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<FractionalTapChannel> {
    if num_paths == 0 {
        return Err(OtfsError::Config("need at least one path".into()));
    }
    if l_max >= geometry.mn() {
        return Err(OtfsError::Config(format!("l_max={l_max} must be below MN")));
    }
    let (delays, powers): (Vec<f64>, Vec<f64>) = match profile.kind {
        ProfileKind::A | ProfileKind::B => {
            let powers = if profile.kind == ProfileKind::A {
                vec![1.0; num_paths]
            } else {
                let eva = TapProfile::eva();
                if num_paths != eva.len() {
                    return Err(OtfsError::Config(format!(
                        "EVA profile has {} taps, {num_paths} requested",
                        eva.len()
                    )));
                }
                eva.linear_powers()
            };
            let under_hi = ((geometry.m() - 1).min(l_max)) as f64;
            let mut delays: Vec<f64> = (0..num_paths)
                .map(|i| {
                    let hi = if i < 2 { under_hi } else { l_max as f64 };
                    rng.random_range(0.0..=hi)
                })
                .collect();
            delays.sort_by(f64::total_cmp);
            (delays, powers)
        }
        ProfileKind::C => {
            let etu = TapProfile::etu();
            if num_paths != etu.len() {
                return Err(OtfsError::Config(format!(
                    "ETU profile has {} taps, {num_paths} requested",
                    etu.len()
                )));
            }
            let scale = geometry.m() as f64 * geometry.delta_f() * 1e-9;
            let delays: Vec<f64> = etu.delay_ns.iter().map(|ns| ns * scale).collect();
            if delays.last().is_some_and(|&d| d > l_max as f64) {
                return Err(OtfsError::Config(format!("ETU tail exceeds l_max={l_max}")));
            }
            (delays, etu.linear_powers())
        }
    };
    let gains = draw_gains(&powers, rng);
    let paths = delays
        .into_iter()
        .zip(gains)
        .map(|(delay, gain)| FractionalPath {
            gain,
            delay,
            doppler: draw_doppler(profile.k_max, geometry, rng),
        })
        .collect();
    FractionalTapChannel::new(geometry, paths, epsilon)
}
