use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use otfs_core::channel::ProfileKind;
use otfs_core::estimator::estimate;
use otfs_core::harness::plot::{log_plot_svg, Series};
use otfs_core::harness::{
    point_seed, run_ber_sweep, run_nmse_sweep, run_refinement_census, sample_capture, trial_seed, write_csv, CsiMode,
    ExperimentConfig, MetricsRow, TrueChannel,
};
use otfs_core::training::TrainingFrame;
use otfs_core::{OtfsError, TimeSignal};

#[derive(Parser)]
#[command(name = "otfs", version, about = "OTFS overspread-channel experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Channel-estimation NMSE against pilot SNR.
    NmseSweep(SweepArgs),
    /// Bit error rate against data SNR.
    BerSweep(SweepArgs),
    /// How often each refinement step runs, per pilot SNR.
    RefineCensus(SweepArgs),
    /// Estimate the channel from a received training-frame capture.
    EstimateFile {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Capture in the OTFS binary sample format.
        #[arg(long)]
        input: PathBuf,
        /// Pilot SNR the frame was sent with; defaults to the first configured value.
        #[arg(long)]
        snr_p: Option<f64>,
    },
    /// Draw one channel realization as JSON, optionally writing the received
    /// training frame for `estimate-file`.
    GenChannel {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Trial seed; defaults to the first trial of the configured master seed.
        #[arg(long)]
        trial_seed: Option<u64>,
        #[arg(long)]
        snr_p: Option<f64>,
        /// Write the received training frame here.
        #[arg(long)]
        capture: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML experiment file; unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Channel family A, B or C.
    #[arg(long)]
    profile: Option<ProfileKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExperimentArgs,
    #[arg(long)]
    trials: Option<usize>,
    /// estimated, perfect or aliased-only.
    #[arg(long)]
    csi: Option<CsiMode>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Log-scale plot of the swept metric.
    #[arg(long)]
    svg: Option<PathBuf>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig, OtfsError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(p) = self.profile {
            cfg.channel.profile = p;
            if self.config.is_none() {
                cfg = ExperimentConfig::for_profile(p);
            }
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SweepArgs {
    fn load(&self) -> Result<ExperimentConfig, OtfsError> {
        let mut cfg = self.exp.load()?;
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(c) = self.csi {
            cfg.csi_mode = c;
        }
        if self.csv.is_some() {
            cfg.output.csv.clone_from(&self.csv);
        }
        if self.svg.is_some() {
            cfg.output.svg.clone_from(&self.svg);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), OtfsError> {
    match cli.command {
        Command::NmseSweep(args) => {
            let cfg = args.load()?;
            let rows = run_nmse_sweep(&cfg)?;
            emit(&cfg, &rows, "pilot SNR (dB)", "NMSE", |r| r.nmse)
        }
        Command::BerSweep(args) => {
            let cfg = args.load()?;
            let rows = run_ber_sweep(&cfg)?;
            emit(&cfg, &rows, "data SNR (dB)", "BER", |r| r.ber)
        }
        Command::RefineCensus(args) => {
            let cfg = args.load()?;
            let rows: Vec<MetricsRow> = run_refinement_census(&cfg)?
                .iter()
                .enumerate()
                .map(|(point, c)| MetricsRow {
                    sweep_db: c.snr_p_db,
                    trials: c.trials as u64,
                    seed: point_seed(cfg.seed, point),
                    refine_doppler_rate: Some(c.refine_doppler),
                    refine_delay_rate: Some(c.refine_delay),
                    ..Default::default()
                })
                .collect();
            emit(&cfg, &rows, "pilot SNR (dB)", "invocation rate", |r| {
                r.refine_doppler_rate
            })
        }
        Command::EstimateFile { exp, input, snr_p } => {
            let cfg = exp.load()?;
            let geometry = cfg.frame_geometry()?;
            let received = TimeSignal::read_from(BufReader::new(File::open(&input)?), geometry.delta_f())?;
            if received.geometry() != geometry {
                return Err(OtfsError::Shape(format!(
                    "capture is {}x{}, config expects {}x{}",
                    received.geometry().m(),
                    received.geometry().n(),
                    geometry.m(),
                    geometry.n()
                )));
            }
            let snr_p = pilot_snr(&cfg, snr_p)?;
            let frame = TrainingFrame::from_snr(snr_p, cfg.snr_c_db, cfg.noise_var, geometry, cfg.min_power_ratio)?;
            let est = estimate(&received, &frame, &cfg.estimator_config())?;
            print_line(&est.to_json())
        }
        Command::GenChannel {
            exp,
            trial_seed: seed,
            snr_p,
            capture,
        } => {
            let cfg = exp.load()?;
            let seed = seed.unwrap_or_else(|| trial_seed(point_seed(cfg.seed, 0), 0));
            let (truth, _, received) = sample_capture(&cfg, pilot_snr(&cfg, snr_p)?, seed)?;
            let TrueChannel::Integer(chan) = truth else {
                return Err(OtfsError::Config(
                    "gen-channel writes integer-delay channels only".into(),
                ));
            };
            if let Some(path) = capture {
                let mut w = BufWriter::new(File::create(path)?);
                received.write_to(&mut w)?;
                w.flush()?;
            }
            print_line(&chan.to_json())
        }
    }
}

fn print_line(text: &str) -> Result<(), OtfsError> {
    writeln!(io::stdout().lock(), "{text}")?;
    Ok(())
}

fn pilot_snr(cfg: &ExperimentConfig, given: Option<f64>) -> Result<f64, OtfsError> {
    given
        .or_else(|| cfg.snr_p_db.first().copied())
        .ok_or_else(|| OtfsError::Config("no pilot SNR given".into()))
}

fn emit(
    cfg: &ExperimentConfig,
    rows: &[MetricsRow],
    x_label: &str,
    y_label: &str,
    metric: impl Fn(&MetricsRow) -> Option<f64>,
) -> Result<(), OtfsError> {
    match &cfg.output.csv {
        Some(path) => write_csv(rows, BufWriter::new(File::create(path)?))?,
        None => write_csv(rows, io::stdout().lock())?,
    }
    if let Some(path) = &cfg.output.svg {
        write_svg(cfg, rows, path, x_label, y_label, metric)?;
    }
    for r in rows {
        eprintln!("{:>6.1} dB: {} trials in {:.2} s", r.sweep_db, r.trials, r.wall_time_s);
    }
    Ok(())
}

fn write_svg(
    cfg: &ExperimentConfig,
    rows: &[MetricsRow],
    path: &Path,
    x_label: &str,
    y_label: &str,
    metric: impl Fn(&MetricsRow) -> Option<f64>,
) -> Result<(), OtfsError> {
    let series = Series {
        label: format!("channel {:?}, {:?} CSI", cfg.channel.profile, cfg.csi_mode),
        points: rows.iter().filter_map(|r| Some((r.sweep_db, metric(r)?))).collect(),
    };
    let title = format!("{y_label} vs {x_label}");
    std::fs::write(path, log_plot_svg(&title, x_label, y_label, &[series]))?;
    Ok(())
}
