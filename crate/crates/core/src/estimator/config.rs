use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};

/// Phase applied to `s_t[0]` in the time-domain gain denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainPhase {
    /// `s_t[0]`, the received-sample model evaluated at the path delay.
    #[default]
    Sample,
    /// `e^{j2πk/(MN)}·s_t[0]`.
    Rotated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Doppler threshold scale: `k` kept when `|Y[ℓ,k]|² > α·P(ℓ)`.
    pub alpha: f64,
    /// Row detection scale: `P(ℓ) ≥ δ·(2A²/N + σ²)`.
    pub delta: f64,
    /// Underspread test scale: `P′(ℓ) ≤ α′·σ²`.
    pub alpha_prime: f64,
    /// Pilot-removal threshold in units of σ²; `None` uses the pilot SNR.
    pub pilot_threshold: Option<f64>,
    /// Absolute correlation magnitude threshold for block candidates.
    pub corr_threshold: f64,
    /// MSE gate scale: refinement runs while `MSE ≥ γ·σ²`.
    pub gamma: f64,
    /// Closeness ratio for the refinement conditions.
    pub epsilon1: f64,
    /// Noise variance assumed by every threshold.
    pub noise_var: f64,
    /// Largest delay the system is designed for.
    pub l_max: usize,
    pub gain_phase: GainPhase,
    /// Run the MSE-gated refinements.
    pub refine: bool,
    /// Doppler sets larger than this skip the exhaustive pairing search.
    pub max_pairing_set: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            alpha: 4.0,
            delta: 30.0,
            alpha_prime: 2.0,
            pilot_threshold: None,
            corr_threshold: 500.0,
            gamma: 2.0,
            epsilon1: 0.6,
            noise_var: 1.0,
            l_max: 2400,
            gain_phase: GainPhase::Sample,
            refine: true,
            max_pairing_set: 7,
        }
    }
}

impl EstimatorConfig {
    pub fn with_l_max(l_max: usize) -> Self {
        Self {
            l_max,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("delta", self.delta),
            ("alpha_prime", self.alpha_prime),
            ("corr_threshold", self.corr_threshold),
            ("gamma", self.gamma),
            ("noise_var", self.noise_var),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(OtfsError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(g) = self.pilot_threshold {
            if !(g.is_finite() && g > 0.0) {
                return Err(OtfsError::Config(format!("pilot_threshold must be positive, got {g}")));
            }
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 < 1.0) {
            return Err(OtfsError::Config(format!(
                "epsilon1 must lie in (0, 1), got {}",
                self.epsilon1
            )));
        }
        Ok(())
    }

    /// `γ·σ²`.
    pub fn mse_gate(&self) -> f64 {
        self.gamma * self.noise_var
    }
}
