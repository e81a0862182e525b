//! A live simulation session: a deterministic core stepped by a dedicated
//! thread that paces it against the wall clock.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use pzcrawl_core::dynamics::{actuator_curvatures, check_dt, contact_sample};
use pzcrawl_core::model::PointMass;
use pzcrawl_core::trajectory::com_of;
use pzcrawl_core::{DiscretizedRobot, DriveProgram, Engine, Environment, ModelError, NodeState, Scenario, SimError};
use serde::Serialize;
use tokio::sync::{broadcast, mpsc};

use crate::protocol::{BoundViolation, Command, DriveStatus, ErrorCode, ServerMessage, StateFrame, MAX_STREAM_RATE};

/// Trailing window of the live speed estimate, s.
pub const SPEED_WINDOW: f64 = 2.0;
const SPEED_SAMPLE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionOptions {
    /// Frames per simulated second.
    pub rate_hz: f64,
    /// Simulated seconds per wall-clock second.
    pub speed_scale: f64,
    /// Stream every k-th node (both ends always included).
    pub node_stride: usize,
    /// Frames buffered per subscriber before the oldest are dropped.
    pub frame_buffer: usize,
    /// A subscriber that has lost more frames than this is disconnected.
    pub max_dropped: u64,
    /// Wall-clock lag behind the pacing target that flags degraded pacing, s.
    pub degraded_lag: f64,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { rate_hz: 30.0, speed_scale: 1.0, node_stride: 1, frame_buffer: 64, max_dropped: 600, degraded_lag: 0.2 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("stream rate {0} Hz outside (0, {MAX_STREAM_RATE}]")]
    Rate(f64),
    #[error("node stride must be at least 1")]
    Stride,
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    OutOfRange(#[from] BoundViolation),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CommandError {
    pub fn code(&self) -> ErrorCode {
        match self {
            CommandError::OutOfRange(_) => ErrorCode::OutOfRange,
            CommandError::Model(_) => ErrorCode::Config,
            CommandError::Sim(_) => ErrorCode::SimFailure,
        }
    }
}

/// Least-squares COM velocity over a trailing window.
#[derive(Debug, Clone)]
struct SpeedTracker {
    samples: VecDeque<(f64, f64)>,
}

impl SpeedTracker {
    fn new() -> Self {
        Self { samples: VecDeque::new() }
    }

    fn push(&mut self, t: f64, x: f64) {
        self.samples.push_back((t, x));
        while self.samples.front().is_some_and(|s| t - s.0 > SPEED_WINDOW) {
            self.samples.pop_front();
        }
    }

    fn clear(&mut self) {
        self.samples.clear();
    }

    /// cm/s
    fn estimate(&self) -> f64 {
        let n = self.samples.len() as f64;
        if n < 3.0 {
            return 0.0;
        }
        let mt = self.samples.iter().map(|s| s.0).sum::<f64>() / n;
        let mx = self.samples.iter().map(|s| s.1).sum::<f64>() / n;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for &(t, x) in &self.samples {
            sxx += (t - mt) * (t - mt);
            sxy += (t - mt) * (x - mx);
        }
        if sxx > 0.0 {
            100.0 * sxy / sxx
        } else {
            0.0
        }
    }
}

/// Deterministic session state. Commands take effect at the current step
/// boundary; identical command schedules give identical frame streams.
#[derive(Debug, Clone)]
pub struct SessionCore {
    scenario: Scenario,
    engine: Engine,
    state: NodeState,
    drive: DriveProgram,
    drive_on: bool,
    dt: f64,
    steps: u64,
    frame_every: u64,
    sample_every: u64,
    node_stride: usize,
    speed: SpeedTracker,
}

impl SessionCore {
    pub fn new(scenario: Scenario, rate_hz: f64, node_stride: usize) -> Result<Self, SessionError> {
        if !(rate_hz > 0.0 && rate_hz <= MAX_STREAM_RATE) {
            return Err(SessionError::Rate(rate_hz));
        }
        if node_stride == 0 {
            return Err(SessionError::Stride);
        }
        let robot = scenario.build()?;
        let dt = scenario.dt;
        check_dt(&robot, dt)?;
        let state = NodeState::flat_rest(&robot);
        let engine = Engine::new(robot, Environment::default());
        let mut core = Self {
            drive: scenario.drive.clone(),
            scenario,
            engine,
            state,
            drive_on: false,
            dt,
            steps: 0,
            frame_every: ((1.0 / (rate_hz * dt)).round() as u64).max(1),
            sample_every: ((SPEED_SAMPLE / dt).round() as u64).max(1),
            node_stride,
            speed: SpeedTracker::new(),
        };
        core.sample_speed();
        Ok(core)
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn robot(&self) -> &DiscretizedRobot {
        self.engine.robot()
    }

    pub fn drive_status(&self) -> DriveStatus {
        DriveStatus { freq_hz: self.drive.frequency, on: self.drive_on }
    }

    /// Applies `cmd` at the current step boundary and returns that time.
    /// Speed-scale changes are accepted here and acted on by the pacer.
    pub fn apply(&mut self, cmd: &Command) -> Result<f64, CommandError> {
        cmd.validate(self.scenario.robot.total_length)?;
        let t = self.t();
        match *cmd {
            Command::SetDrive { freq_hz, on } => {
                self.drive.frequency = freq_hz;
                // A new drive starts at the beginning of its on-phase.
                self.drive.phase_offset = t;
                self.drive_on = on;
            }
            Command::SetDuty { duty } => self.drive.duty = duty,
            Command::AddPayload { x_m, mass_kg } => {
                let mut scenario = self.scenario.clone();
                scenario.robot.mass_profile.point_masses.push(PointMass::new(x_m, mass_kg));
                let robot = scenario.build()?;
                check_dt(&robot, self.dt)?;
                self.engine = Engine::new(robot, Environment::default());
                self.scenario = scenario;
            }
            Command::Reset => {
                self.state = NodeState { t, ..NodeState::flat_rest(self.engine.robot()) };
                self.speed.clear();
                self.sample_speed();
            }
            Command::SetSpeedScale { .. } => {}
        }
        self.update_curvatures()?;
        Ok(t)
    }

    fn update_curvatures(&mut self) -> Result<(), SimError> {
        let kappa = if self.drive_on {
            actuator_curvatures(self.engine.robot(), &self.drive, self.state.t)?
        } else {
            vec![0.0; self.engine.robot().actuators.len()]
        };
        self.engine.set_actuator_curvatures(&kappa);
        Ok(())
    }

    fn sample_speed(&mut self) {
        let com = self.state.com(&self.engine.robot().node_masses);
        self.speed.push(self.state.t, self.engine.robot().origin + com[0]);
    }

    /// Advances one integrator step; returns a frame when one is due.
    pub fn step(&mut self) -> Result<Option<StateFrame>, SimError> {
        if self.drive_on {
            self.update_curvatures()?;
        }
        self.engine.step(&mut self.state, self.dt)?;
        self.steps += 1;
        self.state.t = self.steps as f64 * self.dt;
        if self.steps % self.sample_every == 0 {
            self.sample_speed();
        }
        Ok((self.steps % self.frame_every == 0).then(|| self.frame()))
    }

    /// Snapshot of the current state.
    pub fn frame(&self) -> StateFrame {
        let robot = self.engine.robot();
        let world: Vec<[f64; 2]> = self.state.pos.iter().map(|p| [robot.origin + p[0], p[1]]).collect();
        let com = com_of(&world, &robot.node_masses);
        let last = world.len() - 1;
        let nodes = world
            .iter()
            .enumerate()
            .filter(|(i, _)| i % self.node_stride == 0 || *i == last)
            .map(|(_, p)| *p)
            .collect();
        let contacts = contact_sample(robot, self.engine.environment(), &self.state)
            .iter()
            .map(|c| c.in_contact)
            .collect();
        StateFrame {
            t: self.state.t,
            nodes,
            contacts,
            com,
            drive: self.drive_status(),
            speed_cm_s: self.speed.estimate(),
        }
    }
}

/// Pacing health of one session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionStatus {
    pub id: u64,
    pub config: String,
    pub t: f64,
    pub speed_scale: f64,
    /// Simulated seconds behind the wall-clock target.
    pub lag_s: f64,
    pub degraded: bool,
    /// Active configuration, payloads included.
    #[serde(skip)]
    pub config_text: String,
}

/// Network-side ends of a running session.
pub struct SessionHandle {
    pub id: u64,
    pub node_masses: Vec<f64>,
    pub commands: mpsc::UnboundedSender<(u64, Command)>,
    pub replies: mpsc::UnboundedReceiver<ServerMessage>,
    pub frames: broadcast::Receiver<StateFrame>,
    pub status: Arc<Mutex<SessionStatus>>,
    pub thread: JoinHandle<()>,
}

/// Starts a paced session thread. The first frame (t = 0) is queued before
/// this returns; the thread stops once the command sender is dropped.
pub fn spawn_session(id: u64, name: &str, scenario: Scenario, opts: SessionOptions) -> Result<SessionHandle, SessionError> {
    let mut core = SessionCore::new(scenario, opts.rate_hz, opts.node_stride)?;
    let (cmd_tx, mut cmd_rx) = mpsc::unbounded_channel::<(u64, Command)>();
    let (reply_tx, reply_rx) = mpsc::unbounded_channel();
    let (frame_tx, frame_rx) = broadcast::channel(opts.frame_buffer.max(1));
    let status = Arc::new(Mutex::new(SessionStatus {
        id,
        config: name.to_string(),
        t: 0.0,
        speed_scale: opts.speed_scale,
        lag_s: 0.0,
        degraded: false,
        config_text: core.scenario().to_cfg_string(),
    }));
    let node_masses = core.robot().node_masses.clone();
    let _ = frame_tx.send(core.frame());

    let shared = Arc::clone(&status);
    let thread = std::thread::Builder::new()
        .name(format!("session-{id}"))
        .spawn(move || {
            let mut scale = opts.speed_scale;
            let mut wall0 = Instant::now();
            let mut sim0 = core.t();
            loop {
                loop {
                    match cmd_rx.try_recv() {
                        Ok((cmd_id, cmd)) => match core.apply(&cmd) {
                            Ok(applied_at) => {
                                if let Command::SetSpeedScale { scale: s } = cmd {
                                    scale = s;
                                    wall0 = Instant::now();
                                    sim0 = core.t();
                                }
                                if matches!(cmd, Command::AddPayload { .. }) {
                                    shared.lock().unwrap().config_text = core.scenario().to_cfg_string();
                                }
                                let _ = reply_tx.send(ServerMessage::Ack { cmd_id, applied_at });
                            }
                            Err(e) => {
                                let _ = reply_tx.send(ServerMessage::Error {
                                    code: e.code(),
                                    msg: e.to_string(),
                                    cmd_id: Some(cmd_id),
                                });
                            }
                        },
                        Err(mpsc::error::TryRecvError::Empty) => break,
                        Err(mpsc::error::TryRecvError::Disconnected) => return,
                    }
                }
                let target = sim0 + scale * wall0.elapsed().as_secs_f64();
                if core.t() >= target {
                    std::thread::sleep(Duration::from_millis(1));
                    continue;
                }
                // Work in short slices so commands are picked up promptly.
                let slice_end = target.min(core.t() + 0.005);
                while core.t() < slice_end {
                    match core.step() {
                        Ok(Some(frame)) => {
                            let _ = frame_tx.send(frame);
                        }
                        Ok(None) => {}
                        Err(e) => {
                            let _ = reply_tx.send(ServerMessage::Error {
                                code: ErrorCode::SimFailure,
                                msg: e.to_string(),
                                cmd_id: None,
                            });
                            return;
                        }
                    }
                }
                let lag = sim0 + scale * wall0.elapsed().as_secs_f64() - core.t();
                let mut st = shared.lock().unwrap();
                st.t = core.t();
                st.speed_scale = scale;
                st.lag_s = lag.max(0.0);
                if lag > opts.degraded_lag * scale.max(1.0) {
                    st.degraded = true;
                }
                if lag > 10.0 * opts.degraded_lag * scale.max(1.0) {
                    // Hopelessly behind: give up on catching up.
                    wall0 = Instant::now();
                    sim0 = core.t();
                }
            }
        })
        .expect("spawn session thread");

    Ok(SessionHandle { id, node_masses, commands: cmd_tx, replies: reply_rx, frames: frame_rx, status, thread })
}
