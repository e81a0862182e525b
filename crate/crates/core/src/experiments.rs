//! Scripted experiments: frequency sweeps, half-split rotation tendency,
//! free-chain resonances, stiffness calibration and the midsection-release
//! wave run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{detect_subharmonic_after, measure_speed, sweep_transient_cut, SpeedEstimate, SUBHARMONIC_MIN_PERIODS};
use crate::config::Scenario;
use crate::dynamics::{Engine, Environment, NodeState};
use crate::error::{AnalysisError, SimError};
use crate::model::{build_robot, first_mode_estimate, DiscretizedRobot, DriveProgram};
use crate::trajectory::{run, simulate, Actuation, Trajectory};

/// Dead band of the rotation sign, cm/s.
pub const ROTATION_DEAD_BAND: f64 = 0.05;

/// Recording interval used by the experiment harness, s.
pub const RECORD_INTERVAL: f64 = 1e-3;

pub fn record_every(dt: f64) -> usize {
    ((RECORD_INTERVAL / dt).round() as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// s per frequency
    pub duration: f64,
    pub dt: f64,
    /// Overrides the per-frequency default cut when set, s.
    pub transient_cut: Option<f64>,
    /// Also run the half-split rotation estimate at every frequency.
    pub rotation: bool,
}

impl SweepOptions {
    pub fn new(duration: f64, dt: f64) -> Self {
        Self { duration, dt, transient_cut: None, rotation: false }
    }

    pub fn cut_for(&self, frequency: f64) -> f64 {
        self.transient_cut.unwrap_or_else(|| sweep_transient_cut(frequency, self.duration))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub frequency: f64,
    /// cm/s; NaN when the run failed.
    pub mean_speed: f64,
    /// cm/s
    pub speed_stderr: f64,
    pub transient_cut: f64,
    /// `None` when the window is too short or no period dominates.
    pub subharmonic_ratio: Option<u32>,
    pub rotation_tendency: Option<i8>,
    pub error: Option<String>,
}

impl SweepEntry {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub entries: Vec<SweepEntry>,
    pub fingerprint: u64,
    pub duration: f64,
    pub dt: f64,
}

impl SweepResult {
    pub fn speeds(&self) -> Vec<(f64, f64)> {
        self.entries.iter().filter(|e| e.ok()).map(|e| (e.frequency, e.mean_speed)).collect()
    }

    pub fn max_abs_speed(&self) -> f64 {
        self.speeds().iter().map(|(_, v)| v.abs()).fold(0.0, f64::max)
    }

    /// Number of strict sign changes between consecutive successful entries,
    /// ignoring exact zeros.
    pub fn speed_sign_changes(&self) -> usize {
        sign_changes(self.speeds().iter().map(|&(_, v)| if v == 0.0 { 0 } else { v.signum() as i8 }))
    }

    pub fn rotation_sign_changes(&self) -> usize {
        sign_changes(self.entries.iter().filter_map(|e| e.rotation_tendency))
    }

    /// CSV with columns freq_hz, speed_cm_s, stderr, subharmonic_ratio, rotation_sign.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "freq_hz,speed_cm_s,stderr,subharmonic_ratio,rotation_sign")?;
        for e in &self.entries {
            let ratio = e.subharmonic_ratio.map(|r| r.to_string()).unwrap_or_default();
            let rot = e.rotation_tendency.map(|r| r.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", e.frequency, e.mean_speed, e.speed_stderr, ratio, rot)?;
        }
        Ok(())
    }
}

fn sign_changes(signs: impl Iterator<Item = i8>) -> usize {
    let nonzero: Vec<i8> = signs.filter(|s| *s != 0).collect();
    nonzero.windows(2).filter(|w| w[0] != w[1]).count()
}

/// One frequency of a sweep: simulate the scenario's drive at `frequency` and
/// measure its speed.
pub fn sweep_point(
    robot: &DiscretizedRobot,
    drive: &DriveProgram,
    frequency: f64,
    opts: &SweepOptions,
) -> Result<(SpeedEstimate, Trajectory), AnalysisError> {
    let program = DriveProgram { frequency, ..drive.clone() };
    let traj = simulate(robot, &program, opts.duration, opts.dt, record_every(opts.dt))?;
    let speed = measure_speed(&traj, opts.cut_for(frequency))?;
    Ok((speed, traj))
}

/// Runs one simulation per frequency in parallel and merges the results in
/// frequency order. Failures are recorded per entry.
pub fn sweep(scenario: &Scenario, freqs: &[f64], opts: &SweepOptions) -> Result<SweepResult, AnalysisError> {
    let mut freqs: Vec<f64> = freqs.to_vec();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();
    if freqs.len() < 2 {
        return Err(AnalysisError::TooFewFrequencies);
    }
    let robot = scenario.build()?;
    let entries = freqs
        .par_iter()
        .map(|&f| {
            let cut = opts.cut_for(f);
            let mut entry = SweepEntry {
                frequency: f,
                mean_speed: f64::NAN,
                speed_stderr: f64::NAN,
                transient_cut: cut,
                subharmonic_ratio: None,
                rotation_tendency: None,
                error: None,
            };
            match sweep_point(&robot, &scenario.drive, f, opts) {
                Ok((speed, traj)) => {
                    entry.mean_speed = speed.mean_speed;
                    entry.speed_stderr = speed.stderr;
                    if traj.duration() - cut >= SUBHARMONIC_MIN_PERIODS / f {
                        entry.subharmonic_ratio = detect_subharmonic_after(&traj, f, cut).ok().map(|s| s.ratio);
                    }
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            if opts.rotation && entry.ok() {
                match rotation_tendency_with(scenario, f, opts) {
                    Ok(r) => entry.rotation_tendency = Some(r.sign),
                    Err(e) => entry.error = Some(format!("rotation: {e}")),
                }
            }
            entry
        })
        .collect();
    Ok(SweepResult { entries, fingerprint: robot.fingerprint, duration: opts.duration, dt: opts.dt })
}

/// Speeds of the two widthwise halves and the resulting yaw sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationEstimate {
    /// cm/s
    pub v_front: f64,
    /// cm/s
    pub v_back: f64,
    /// +1 counterclockwise from the top, -1 clockwise, 0 inside the dead band.
    pub sign: i8,
}

/// Half-split yaw tendency at `frequency`: the front and back widthwise halves
/// are simulated as standalone strips and compared.
pub fn rotation_tendency(scenario: &Scenario, frequency: f64, duration: f64) -> Result<RotationEstimate, AnalysisError> {
    rotation_tendency_with(scenario, frequency, &SweepOptions::new(duration, scenario.dt))
}

fn rotation_tendency_with(scenario: &Scenario, frequency: f64, opts: &SweepOptions) -> Result<RotationEstimate, AnalysisError> {
    if scenario.robot.foot_positions.is_empty() {
        return Err(AnalysisError::NoFeet);
    }
    let half_speed = |front: bool| -> Result<f64, AnalysisError> {
        let robot = build_robot(&scenario.robot.half(front), scenario.links_per_actuator)?;
        Ok(sweep_point(&robot, &scenario.drive, frequency, opts)?.0.mean_speed)
    };
    let v_front = half_speed(true)?;
    let v_back = half_speed(false)?;
    let dv = v_front - v_back;
    let sign = if dv.abs() < ROTATION_DEAD_BAND { 0 } else { dv.signum() as i8 };
    Ok(RotationEstimate { v_front, v_back, sign })
}

// ---------------------------------------------------------------------------
// Resonances

/// Lowest `n_modes` bending resonances of the free (weightless, no ground)
/// chain, in Hz.
///
/// One end node receives a small vertical velocity kick and the undamped
/// response is recorded for thirty periods of the uniform-beam estimate. The
/// rigid-body part (mass-weighted line fit) is removed, the end-node
/// deflection is averaged over each sampling interval and Hann-windowed, and
/// spectral peaks that dominate two resolution bins either side are returned.
pub fn estimate_resonances(scenario: &Scenario, n_modes: usize) -> Result<Vec<f64>, AnalysisError> {
    let config = &scenario.robot;
    let mut robot = build_robot(config, scenario.links_per_actuator)?;
    robot.joint_damping.iter_mut().for_each(|c| *c = 0.0);
    let mass = robot.total_mass();
    let f1_guess = first_mode_estimate(config.bending_stiffness, mass, config.total_length) / (2.0 * std::f64::consts::PI);
    let record_time = (30.0 / f1_guess).clamp(2.0, 20.0);
    let f_max = f1_guess * (1.6 * n_modes as f64).powi(2);

    let mut state = NodeState::flat_rest(&robot);
    state.vel[0][1] = 1e-3;

    let dt = scenario.dt;
    // At least ten samples per period of the highest frequency searched.
    let every = record_every(dt).min((0.1 / f_max / dt) as usize).max(1);
    let mut engine = Engine::new(robot.clone(), Environment::weightless());
    let steps = (record_time / dt).round() as usize;
    let rest: Vec<f64> = robot.rest_offsets.clone();
    let total: f64 = robot.node_masses.iter().sum();
    let xm: f64 = robot.node_masses.iter().zip(&rest).map(|(m, x)| m * x).sum::<f64>() / total;
    let sxx: f64 = robot.node_masses.iter().zip(&rest).map(|(m, x)| m * (x - xm).powi(2)).sum();
    let mut signal = Vec::with_capacity(steps / every + 1);
    let mut block = 0.0;
    for k in 0..steps {
        engine.step(&mut state, dt)?;
        let zm: f64 = robot.node_masses.iter().zip(&state.pos).map(|(m, p)| m * p[1]).sum::<f64>() / total;
        let slope: f64 = robot
            .node_masses
            .iter()
            .zip(&state.pos)
            .zip(&rest)
            .map(|((m, p), x)| m * (x - xm) * (p[1] - zm))
            .sum::<f64>()
            / sxx;
        block += state.pos[0][1] - zm - slope * (rest[0] - xm);
        // Block means keep the stiff upper modes from aliasing into the band.
        if (k + 1) % every == 0 {
            signal.push(block / every as f64);
            block = 0.0;
        }
    }
    let peaks = spectral_peaks(&signal, dt * every as f64, f_max);
    if peaks.len() < n_modes {
        return Err(AnalysisError::UnresolvedPeaks { found: peaks.len(), wanted: n_modes });
    }
    Ok(peaks.into_iter().take(n_modes).collect())
}

/// Peak frequencies (ascending) of a Hann-windowed record, refined by
/// parabolic interpolation of log power on a 4× zero-padded grid.
fn spectral_peaks(signal: &[f64], sample_dt: f64, f_max: f64) -> Vec<f64> {
    let n = signal.len();
    if n < 8 {
        return Vec::new();
    }
    let duration = n as f64 * sample_dt;
    let df = 1.0 / (4.0 * duration);
    let nyquist = 0.5 / sample_dt;
    let f_max = f_max.min(0.8 * nyquist);
    let window: Vec<f64> = (0..n)
        .map(|k| {
            let s = (std::f64::consts::PI * k as f64 / (n - 1) as f64).sin();
            s * s * signal[k]
        })
        .collect();
    let bins = (f_max / df) as usize;
    let power: Vec<f64> = (0..=bins)
        .map(|j| {
            let w = 2.0 * std::f64::consts::PI * j as f64 * df * sample_dt;
            let (mut c, mut s) = (0.0, 0.0);
            for (k, y) in window.iter().enumerate() {
                let (sn, cs) = (w * k as f64).sin_cos();
                c += y * cs;
                s += y * sn;
            }
            c * c + s * s
        })
        .collect();
    let p_max = power.iter().copied().fold(0.0, f64::max);
    if !(p_max > 0.0) {
        return Vec::new();
    }
    // Two resolution bins on the padded grid.
    let reach = 8;
    let first = (2.0 / duration / df).ceil() as usize;
    let mut peaks = Vec::new();
    for j in first.max(1)..bins {
        let lo = j.saturating_sub(reach);
        let hi = (j + reach).min(bins);
        let is_max = (lo..=hi).all(|i| i == j || power[i] < power[j]);
        if is_max && power[j] > 1e-4 * p_max {
            let (a, b, c) = (power[j - 1].ln(), power[j].ln(), power[j + 1].ln());
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            peaks.push((j as f64 + shift) * df);
        }
    }
    peaks
}

// ---------------------------------------------------------------------------
// Calibration

/// Stiffness range explored by [`calibrate`], N·m².
pub const STIFFNESS_BOUNDS: (f64, f64) = (1e-4, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub bending_stiffness: f64,
    /// Hz
    pub first_mode: f64,
    pub evaluations: usize,
    pub changed: bool,
}

/// Log-spaced bisection over bending stiffness until the first estimated
/// resonance lies inside `band` (Hz, open interval).
pub fn calibrate(scenario: &Scenario, band: (f64, f64)) -> Result<(Scenario, CalibrationReport), AnalysisError> {
    let (lo_f, hi_f) = band;
    if !(lo_f < hi_f) || !(lo_f > 0.0) {
        return Err(AnalysisError::Calibration(format!("empty band ({lo_f}, {hi_f}) Hz")));
    }
    let mut evaluations = 0;
    let mut first_mode = |ei: f64| -> Result<f64, AnalysisError> {
        evaluations += 1;
        let mut s = scenario.clone();
        s.robot.bending_stiffness = ei;
        Ok(estimate_resonances(&s, 1)?[0])
    };
    let inside = |f: f64| f > lo_f && f < hi_f;

    let f0 = first_mode(scenario.robot.bending_stiffness)?;
    if inside(f0) {
        let report = CalibrationReport {
            bending_stiffness: scenario.robot.bending_stiffness,
            first_mode: f0,
            evaluations,
            changed: false,
        };
        return Ok((scenario.clone(), report));
    }
    let (mut lo, mut hi) = (STIFFNESS_BOUNDS.0.ln(), STIFFNESS_BOUNDS.1.ln());
    let f_lo = first_mode(lo.exp())?;
    let f_hi = first_mode(hi.exp())?;
    if f_lo >= hi_f || f_hi <= lo_f {
        return Err(AnalysisError::Calibration(format!(
            "band ({lo_f}, {hi_f}) Hz unreachable: first mode spans {f_lo:.3}..{f_hi:.3} Hz over EI {:.0e}..{:.0e} N·m²",
            STIFFNESS_BOUNDS.0, STIFFNESS_BOUNDS.1
        )));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let f = first_mode(mid.exp())?;
        if inside(f) {
            let mut out = scenario.clone();
            out.robot.bending_stiffness = mid.exp();
            let report = CalibrationReport { bending_stiffness: mid.exp(), first_mode: f, evaluations, changed: true };
            return Ok((out, report));
        }
        if f <= lo_f {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(AnalysisError::Calibration("bisection did not converge".into()))
}

// ---------------------------------------------------------------------------
// Traveling waves

/// Holds a subset of actuators at full voltage, then releases all of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveRun {
    /// Zero-based actuator indices bent during the hold.
    pub actuated: Vec<usize>,
    /// s
    pub hold: f64,
    /// Recorded time after release, s.
    pub after: f64,
    pub release: bool,
}

impl Default for WaveRun {
    fn default() -> Self {
        Self { actuated: vec![1, 2, 3], hold: 1.0, after: 0.3, release: true }
    }
}

impl Actuation for WaveRun {
    fn curvatures(&self, robot: &DiscretizedRobot, t: f64) -> Result<(Vec<f64>, bool), SimError> {
        let on = t < self.hold || !self.release;
        let kappa = robot
            .actuators
            .iter()
            .enumerate()
            .map(|(i, a)| if on && self.actuated.contains(&i) { a.bend_sign() * a.kappa_max } else { 0.0 })
            .collect();
        Ok((kappa, on))
    }
}

/// Bends the chosen actuators from the flat rest pose, holds, releases and
/// records the aftermath.
pub fn traveling_wave_run(robot: &DiscretizedRobot, wave: &WaveRun, dt: f64, record_every: usize) -> Result<Trajectory, SimError> {
    if let Some(&bad) = wave.actuated.iter().find(|&&i| i >= robot.actuators.len()) {
        return Err(SimError::InvalidRequest(format!("no actuator with index {bad}")));
    }
    if !(wave.after >= 0.2) {
        return Err(SimError::InvalidRequest(format!("need at least 0.2 s after release, got {}", wave.after)));
    }
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let state = NodeState::flat_rest(robot);
    run(&mut engine, state, wave, wave.hold + wave.after, dt, record_every)
}
