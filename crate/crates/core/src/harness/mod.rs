//! Seeded Monte-Carlo experiments: NMSE and BER sweeps, refinement census,
//! CSV output and optional SVG plots.
//!
//! Every trial draws from its own ChaCha stream seeded by counter from the
//! master seed, and results are reduced in trial order, so output is
//! identical for any thread count.

mod config;
mod metrics;
pub mod plot;
mod sweeps;

pub use config::{ChannelConfig, CsiMode, ExperimentConfig, GeometryConfig, NmseMode, OutputConfig};
pub use metrics::{
    ber_crossing, nmse, point_seed, splitmix64, trial_seed, write_csv, CsvRecord, MetricsRow, CSV_HEADER,
};
pub use sweeps::{
    ber_trial, nmse_trials, run_ber_sweep, run_nmse_sweep, run_refinement_census, sample_capture, BerTrial,
    CensusRates, NmseTrial, TrueChannel,
};
