use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelProfile, ProfileKind};
use crate::detector::DetectorConfig;
use crate::error::{OtfsError, Result};
use crate::estimator::EstimatorConfig;
use crate::geometry::FrameGeometry;

/// Which channel the detector is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CsiMode {
    #[default]
    Estimated,
    Perfect,
    /// Pilot-grid estimate only: every detected aliased delay taken at face value.
    AliasedOnly,
}

impl std::str::FromStr for CsiMode {
    type Err = OtfsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimated" => Ok(Self::Estimated),
            "perfect" => Ok(Self::Perfect),
            "aliased-only" => Ok(Self::AliasedOnly),
            other => Err(OtfsError::Config(format!("unknown csi mode {other:?}"))),
        }
    }
}

/// Delay set the NMSE sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NmseMode {
    /// True and estimated delays; spurious paths count against the estimate.
    #[default]
    Union,
    /// True delays only.
    Truth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub m: usize,
    pub n: usize,
    pub delta_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub profile: ProfileKind,
    /// Overrides the family's default Doppler spread.
    pub k_max: Option<usize>,
    pub l_max: usize,
    pub paths: usize,
    /// Sinc truncation threshold; set to draw fractional delays.
    pub fractional_epsilon: Option<f64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            profile: ProfileKind::A,
            k_max: None,
            l_max: ChannelProfile::REFERENCE_L_MAX,
            paths: ChannelProfile::REFERENCE_PATHS,
            fractional_epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// One Monte-Carlo experiment. SNRs are in dB relative to `noise_var`:
/// pilot `|x_p|²/(Nσ²)`, chirp `2A²/σ²`, data `E_s/σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the profile's reference geometry.
    pub geometry: Option<GeometryConfig>,
    pub channel: ChannelConfig,
    pub noise_var: f64,
    pub snr_p_db: Vec<f64>,
    pub snr_c_db: f64,
    pub snr_d_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Stop a BER point once this many bit errors have been seen.
    pub max_errors: u64,
    pub qam_order: usize,
    /// Smallest pilot-to-chirp power ratio the training frame may have.
    pub min_power_ratio: f64,
    pub csi_mode: CsiMode,
    pub nmse_mode: NmseMode,
    pub estimator: EstimatorConfig,
    pub detector: DetectorConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            geometry: None,
            channel: ChannelConfig::default(),
            noise_var: 1.0,
            snr_p_db: vec![15.0, 20.0, 25.0, 30.0, 35.0],
            snr_c_db: 23.0,
            snr_d_db: (8..=20).map(f64::from).collect(),
            trials: 200,
            seed: 1,
            max_errors: 200,
            qam_order: 4,
            min_power_ratio: 1.0,
            csi_mode: CsiMode::Estimated,
            nmse_mode: NmseMode::Union,
            estimator: EstimatorConfig::default(),
            detector: DetectorConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| OtfsError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Reference settings for one channel family.
    pub fn for_profile(kind: ProfileKind) -> Self {
        Self {
            channel: ChannelConfig {
                profile: kind,
                ..ChannelConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn profile(&self) -> ChannelProfile {
        let mut p = ChannelProfile::standard(self.channel.profile);
        if let Some(k) = self.channel.k_max {
            p.k_max = k;
        }
        p
    }

    pub fn frame_geometry(&self) -> Result<FrameGeometry> {
        match self.geometry {
            Some(g) => FrameGeometry::new(g.m, g.n, g.delta_f),
            None => Ok(self.profile().reference_geometry()),
        }
    }

    /// Estimator settings with the noise level and delay bound of this experiment.
    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig {
            noise_var: self.noise_var,
            l_max: self.channel.l_max,
            ..self.estimator.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.frame_geometry()?;
        if self.trials == 0 {
            return Err(OtfsError::Config("trials must be positive".into()));
        }
        if !(self.noise_var.is_finite() && self.noise_var > 0.0) {
            return Err(OtfsError::Config("noise_var must be positive".into()));
        }
        if self.channel.l_max >= g.mn() || self.channel.l_max / g.m() >= g.n() {
            return Err(OtfsError::Config(format!(
                "l_max={} too large for the frame",
                self.channel.l_max
            )));
        }
        if let Some(eps) = self.channel.fractional_epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(OtfsError::Config(format!("fractional_epsilon {eps} outside (0, 1)")));
            }
        }
        self.estimator_config().validate()?;
        self.detector.validate()
    }
}
