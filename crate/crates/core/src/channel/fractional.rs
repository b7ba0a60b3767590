//! Paths with real-valued delays, sampled onto integer taps through a sinc
//! kernel and truncated to the taps where the kernel is still significant.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use super::{add_noise, DopplerRamp, TapComponent};
use crate::error::{OtfsError, Result};
use crate::geometry::FrameGeometry;
use crate::zak::{TimeSignal, C64};

/// Normalized sinc, `sin(πx)/(πx)`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalPath {
    pub gain: C64,
    pub delay: f64,
    pub doppler: usize,
}

#[derive(Debug, Clone)]
pub struct FractionalTapChannel {
    geometry: FrameGeometry,
    epsilon: f64,
    paths: Vec<FractionalPath>,
    taps: BTreeMap<usize, Vec<TapComponent>>,
}

impl FractionalTapChannel {
    /// Keeps every causal tap `p` with `|sinc(p − l)| > ε` for at least one path.
    ///
    /// Taps before the frame start (p < 0) are dropped along with the rest of
    /// the truncated tail.
    pub fn new(geometry: FrameGeometry, paths: Vec<FractionalPath>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(OtfsError::Config(format!(
                "tap threshold must lie in (0, 1), got {epsilon}"
            )));
        }
        let mn = geometry.mn();
        for p in &paths {
            if !(p.delay.is_finite() && p.delay >= 0.0 && p.delay < mn as f64) {
                return Err(OtfsError::Config(format!(
                    "fractional delay {} outside the frame",
                    p.delay
                )));
            }
            if p.doppler >= geometry.n() {
                return Err(OtfsError::Config(format!("Doppler index {} out of range", p.doppler)));
            }
        }
        // |sinc(x)| ≤ 1/(π|x|), so nothing beyond this reach can pass the threshold.
        let reach = (1.0 / (PI * epsilon)).ceil() as i64 + 1;
        let mut taps: BTreeMap<usize, Vec<TapComponent>> = BTreeMap::new();
        for path in &paths {
            let centre = path.delay.round() as i64;
            let lo = (centre - reach).max(0);
            let hi = (centre + reach).min(mn as i64 - 1);
            for tap in lo..=hi {
                let w = sinc(tap as f64 - path.delay);
                if w.abs() > epsilon {
                    taps.entry(tap as usize).or_default().push(TapComponent {
                        gain: path.gain * w,
                        delay: path.delay,
                        doppler: path.doppler,
                    });
                }
            }
        }
        if taps.is_empty() {
            return Err(OtfsError::Config("no tap passes the truncation threshold".into()));
        }
        Ok(Self {
            geometry,
            epsilon,
            paths,
            taps,
        })
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn paths(&self) -> &[FractionalPath] {
        &self.paths
    }

    /// Retained integer taps, ascending.
    pub fn taps(&self) -> Vec<usize> {
        self.taps.keys().copied().collect()
    }

    pub fn max_tap(&self) -> usize {
        *self.taps.keys().next_back().expect("non-empty")
    }

    pub fn tap_components(&self) -> &BTreeMap<usize, Vec<TapComponent>> {
        &self.taps
    }

    /// Fraction of the kernel energy `Σ_p sinc²(p − l)` (which is 1 over all p)
    /// that the retained taps keep for path `index`.
    pub fn retained_energy(&self, index: usize) -> f64 {
        let l = self.paths[index].delay;
        self.taps.keys().map(|&p| sinc(p as f64 - l).powi(2)).sum()
    }

    /// Worst retained-energy fraction over all paths; `1 − δ_E`.
    pub fn min_retained_energy(&self) -> f64 {
        (0..self.paths.len())
            .map(|i| self.retained_energy(i))
            .fold(f64::INFINITY, f64::min)
    }

    /// `h[q, p] = Σᵢ hᵢ·e^{j2πkᵢ(q − lᵢ)/(MN)}·sinc(p − lᵢ)`, zero off the tap set.
    pub fn response(&self, q: usize, tap: usize) -> C64 {
        let mn = self.geometry.mn() as f64;
        self.taps.get(&tap).map_or(C64::new(0.0, 0.0), |comps| {
            comps
                .iter()
                .map(|c| {
                    let k = self.geometry.signed_doppler(c.doppler) as f64;
                    c.gain * C64::from_polar(1.0, 2.0 * PI * k * (q as f64 - c.delay) / mn)
                })
                .sum()
        })
    }

    /// `r[q] = Σ_{p ∈ 𝓟} h[q, p]·s[q − p]`.
    pub fn propagate(&self, input: &[C64]) -> Vec<C64> {
        let geom = self.geometry;
        let mn = geom.mn();
        assert_eq!(input.len(), mn, "frame length mismatch");
        let mut out = vec![C64::new(0.0, 0.0); mn];
        for (&tap, comps) in &self.taps {
            for c in comps {
                let ramp = DopplerRamp::new(c.doppler, geom);
                // Integer-index ramp gives e^{j2πk(q−p)/MN}; restore the (p − l) offset.
                let k = geom.signed_doppler(c.doppler) as f64;
                let offset = C64::from_polar(1.0, 2.0 * PI * k * (tap as f64 - c.delay) / mn as f64);
                let g = c.gain * offset;
                for (t, (o, s)) in out[tap..].iter_mut().zip(input).enumerate() {
                    *o += g * ramp.at(t) * s;
                }
            }
        }
        out
    }

    pub fn apply<R: Rng + ?Sized>(&self, signal: &TimeSignal, noise_var: f64, rng: &mut R) -> TimeSignal {
        assert_eq!(signal.geometry(), self.geometry, "geometry mismatch");
        let mut out = self.propagate(signal.samples());
        add_noise(&mut out, noise_var, rng);
        TimeSignal::new(self.geometry, out).expect("finite output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{apply_channel, ChannelPath, ChannelRealization};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> FrameGeometry {
        FrameGeometry::new(16, 8, 15e3).unwrap()
    }

    #[test]
    fn integer_delays_reduce_to_plain_channel() {
        let g = geom();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let list = [
            (C64::new(0.6, -0.2), 0usize, 0usize),
            (C64::new(-0.3, 0.5), 7, 3),
            (C64::new(0.1, 0.4), 21, 6),
        ];
        let frac = FractionalTapChannel::new(
            g,
            list.iter()
                .map(|&(h, l, k)| FractionalPath {
                    gain: h,
                    delay: l as f64,
                    doppler: k,
                })
                .collect(),
            0.02,
        )
        .unwrap();
        assert_eq!(frac.taps(), vec![0, 7, 21]);
        let chan =
            ChannelRealization::new(g, 30, list.iter().map(|&(h, l, k)| ChannelPath::new(h, l, k)).collect()).unwrap();
        let s = TimeSignal::new(
            g,
            (0..g.mn())
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let a = frac.apply(&s, 0.0, &mut rng);
        let b = apply_channel(&s, &chan, 0.0, &mut rng);
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn half_sample_delay_tap_set() {
        let frac = FractionalTapChannel::new(
            geom(),
            vec![FractionalPath {
                gain: C64::new(1.0, 0.0),
                delay: 3.5,
                doppler: 0,
            }],
            0.2,
        )
        .unwrap();
        let taps = frac.taps();
        assert!(taps.contains(&3) && taps.contains(&4));
        for p in taps {
            assert!((p as f64 - 3.5).abs() < 2.0, "tap {p}");
        }
    }

    #[test]
    fn retained_energy_matches_direct_sum() {
        let frac = FractionalTapChannel::new(
            FrameGeometry::new(512, 16, 15e3).unwrap(),
            vec![FractionalPath {
                gain: C64::new(1.0, 0.0),
                delay: 100.37,
                doppler: 0,
            }],
            0.02,
        )
        .unwrap();
        // Independent: sum sinc² over a wide window and compare with the unit total.
        let wide: f64 = (0..2000).map(|p| sinc(p as f64 - 100.37).powi(2)).sum();
        assert!((wide - 1.0).abs() < 1e-3);
        let kept = frac.retained_energy(0);
        assert!(kept > 0.97 && kept <= wide, "kept={kept}");
    }

    #[test]
    fn response_matches_propagation() {
        let g = geom();
        let frac = FractionalTapChannel::new(
            g,
            vec![
                FractionalPath {
                    gain: C64::new(0.7, 0.1),
                    delay: 2.3,
                    doppler: 2,
                },
                FractionalPath {
                    gain: C64::new(-0.2, 0.6),
                    delay: 19.8,
                    doppler: 5,
                },
            ],
            0.05,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<C64> = (0..g.mn())
            .map(|_| C64::new(rng.random_range(-1.0..1.0), 0.0))
            .collect();
        let out = frac.propagate(&s);
        for q in 0..g.mn() {
            let direct: C64 = frac
                .taps()
                .iter()
                .filter(|&&p| p <= q)
                .map(|&p| frac.response(q, p) * s[q - p])
                .sum();
            assert!((direct - out[q]).norm() < 1e-12);
        }
    }

    #[test]
    fn empty_tap_set_and_bad_threshold() {
        assert!(FractionalTapChannel::new(geom(), vec![], 0.02).is_err());
        let p = vec![FractionalPath {
            gain: C64::new(1.0, 0.0),
            delay: 1.0,
            doppler: 0,
        }];
        assert!(FractionalTapChannel::new(geom(), p.clone(), 0.0).is_err());
        assert!(FractionalTapChannel::new(geom(), p, 1.5).is_err());
    }
}
