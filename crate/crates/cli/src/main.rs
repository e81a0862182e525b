//! `pzcrawl`: run, sweep and analyse the crawler simulator from the shell.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration or arguments,
//! 3 numerical failure.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pzcrawl_core::analysis::{contact_timeline, default_transient_cut, measure_speed, wave_timing};
use pzcrawl_core::experiments::{
    calibrate, estimate_resonances, record_every, sweep, traveling_wave_run, SweepOptions, WaveRun,
};
use pzcrawl_core::trajectory::{load, save};
use pzcrawl_core::{simulate, AnalysisError, ConfigError, ModelError, RobotConfig, Scenario, SimError, TrajectoryIoError};
use pzcrawl_teleop::{AppState, SessionOptions};

#[derive(Parser, Debug)]
#[command(name = "pzcrawl", version, about = "Piezoelectric crawling robot simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one drive program and write the trajectory (.csv or .pz).
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Drive frequency in Hz, overriding the config.
        #[arg(long)]
        freq: Option<f64>,
        /// Simulated time in s.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Integrator step in s, overriding the config.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean speed over a grid of drive frequencies, as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        freq_min: f64,
        #[arg(long)]
        freq_max: f64,
        #[arg(long)]
        step: f64,
        /// Simulated time per frequency in s.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Also estimate the rotation tendency at every frequency.
        #[arg(long)]
        rotation: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hold actuators bent, release them and time the resulting wave.
    Waves {
        #[arg(long)]
        config: PathBuf,
        /// Zero-based actuators bent during the hold.
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3])]
        actuated: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        hold: f64,
        /// Time recorded after release in s.
        #[arg(long, default_value_t = 0.3)]
        after: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Foot contact intervals of a saved .pz trajectory, as JSON.
    Timeline {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lowest bending resonances of the free strip.
    Resonances {
        #[arg(long)]
        config: PathBuf,
        #[arg(short = 'n', default_value_t = 3)]
        n: usize,
    },
    /// Scale the bending stiffness until the first mode sits in a band.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// Target band as LO:HI in Hz.
        #[arg(long, value_parser = parse_band)]
        band: (f64, f64),
        #[arg(long)]
        out: PathBuf,
    },
    /// Start the teleoperation server.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Scenario files sessions may open, by file stem. The first is the
        /// default. Without any, a bare strip is served.
        #[arg(long)]
        config: Vec<PathBuf>,
    },
}

fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi}: {e}"))?;
    if !(lo > 0.0 && lo < hi) {
        return Err(format!("need 0 < LO < HI, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Io(String),
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Io(m) | Failure::Config(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Model(m) => m.into(),
            SimError::InvalidRequest(_) => Failure::Config(e.to_string()),
            SimError::StepTooLarge { .. } | SimError::NonFinite { .. } => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<AnalysisError> for Failure {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Sim(s) => s.into(),
            AnalysisError::Model(m) => m.into(),
            AnalysisError::TooFewFrequencies => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<TrajectoryIoError> for Failure {
    fn from(e: TrajectoryIoError) -> Self {
        Failure::Io(e.to_string())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn positive(name: &str, v: f64) -> Result<f64, Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Config(format!("--{name} must be positive, got {v}")))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, freq, duration, dt, out } => {
            let mut sc = Scenario::load(&config)?;
            if let Some(f) = freq {
                sc.drive.frequency = f;
            }
            if let Some(dt) = dt {
                sc.dt = positive("dt", dt)?;
            }
            sc.drive.validate(sc.robot.actuators.len())?;
            let robot = sc.build()?;
            let traj = simulate(&robot, &sc.drive, positive("duration", duration)?, sc.dt, record_every(sc.dt))?;
            save(&traj, &out)?;
            let f = sc.drive.frequency;
            print!("{} frames, displacement {:.4} cm", traj.frames.len(), 100.0 * traj.displacement());
            match measure_speed(&traj, default_transient_cut(f)) {
                Ok(s) => println!(", mean speed {:.4} ± {:.4} cm/s at {f} Hz", s.mean_speed, s.stderr),
                Err(_) => println!(" (too short for a steady-state speed)"),
            }
        }
        Command::Sweep { config, freq_min, freq_max, step, duration, rotation, out } => {
            let sc = Scenario::load(&config)?;
            let step = positive("step", step)?;
            if !(freq_min > 0.0 && freq_max >= freq_min) {
                return Err(Failure::Config(format!("bad frequency range {freq_min}..{freq_max}")));
            }
            let count = ((freq_max - freq_min) / step + 1e-9).floor() as usize + 1;
            let freqs: Vec<f64> = (0..count).map(|k| freq_min + k as f64 * step).collect();
            let opts = SweepOptions { rotation, ..SweepOptions::new(positive("duration", duration)?, sc.dt) };
            let result = sweep(&sc, &freqs, &opts)?;
            let file = File::create(&out).map_err(|e| io_error(&out, e))?;
            result.write_csv(BufWriter::new(file)).map_err(|e| io_error(&out, e))?;
            let failed = result.entries.iter().filter(|e| !e.ok()).count();
            println!("{} frequencies, {failed} failed, max |speed| {:.4} cm/s", result.entries.len(), result.max_abs_speed());
            if failed == result.entries.len() {
                return Err(Failure::Numerical("every frequency failed".into()));
            }
        }
        Command::Waves { config, actuated, hold, after, out } => {
            let sc = Scenario::load(&config)?;
            let robot = sc.build()?;
            let wave = WaveRun { actuated, hold: positive("hold", hold)?, after, release: true };
            let traj = traveling_wave_run(&robot, &wave, sc.dt, 5)?;
            save(&traj, &out)?;
            let w = wave_timing(&traj, &robot.foot_nodes, wave.hold)?;
            println!(
                "peak upward velocity after release: middle {:.4} s, left {:.4} s, right {:.4} s ({})",
                w.mid_peak - w.release,
                w.left_peak - w.release,
                w.right_peak - w.release,
                if w.travels_outward() { "outward" } else { "not outward" }
            );
        }
        Command::Timeline { input, out } => {
            let traj = load(&input)?;
            let timeline = contact_timeline(&traj);
            let file = File::create(&out).map_err(|e| io_error(&out, e))?;
            serde_json::to_writer_pretty(BufWriter::new(file), &timeline).map_err(|e| Failure::Io(e.to_string()))?;
            let intervals: usize = timeline.feet.iter().map(Vec::len).sum();
            println!("{} feet, {intervals} contact intervals", timeline.feet.len());
        }
        Command::Resonances { config, n } => {
            if n == 0 {
                return Err(Failure::Config("-n must be at least 1".into()));
            }
            let sc = Scenario::load(&config)?;
            for (k, f) in estimate_resonances(&sc, n)?.iter().enumerate() {
                println!("mode {}: {f:.3} Hz", k + 1);
            }
        }
        Command::Calibrate { config, band, out } => {
            let sc = Scenario::load(&config)?;
            let (calibrated, report) = calibrate(&sc, band)?;
            calibrated.save(&out)?;
            println!(
                "bending stiffness {:.5} N·m², first mode {:.3} Hz, {} evaluations{}",
                report.bending_stiffness,
                report.first_mode,
                report.evaluations,
                if report.changed { "" } else { ", unchanged" }
            );
        }
        Command::Serve { port, host, config } => {
            let state = if config.is_empty() {
                AppState::single("bare", Scenario::new(RobotConfig::bare()))
            } else {
                let mut scenarios = BTreeMap::new();
                for path in &config {
                    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("config").to_string();
                    scenarios.insert(name, Scenario::load(path)?);
                }
                let default = config[0].file_stem().and_then(|s| s.to_str()).unwrap_or("config");
                AppState::new(scenarios, default, SessionOptions::default()).expect("default is loaded")
            };
            pzcrawl_teleop::run(SocketAddr::new(host, port), state).map_err(|e| Failure::Io(e.to_string()))?;
        }
    }
    Ok(())
}
