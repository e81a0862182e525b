//! Recorded runs and the simulation driver loops that produce them.

use std::io::{Read, Write};

use crate::dynamics::{actuator_curvatures, check_dt, contact_sample, ContactSample, Engine, Environment, NodeState};
use crate::error::{SimError, TrajectoryIoError};
use crate::model::{DiscretizedRobot, DriveProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    /// World-frame (x, z) of every node.
    pub pos: Vec<[f64; 2]>,
    pub vel: Vec<[f64; 2]>,
    pub contacts: ContactSample,
    pub drive_on: bool,
    pub com: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt_record: f64,
    pub node_masses: Vec<f64>,
    pub fingerprint: u64,
    pub frames: Vec<Frame>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.t).collect()
    }

    pub fn com_x(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.com[0]).collect()
    }

    pub fn com_z(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.com[1]).collect()
    }

    pub fn node_count(&self) -> usize {
        self.node_masses.len()
    }

    pub fn foot_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.contacts.len())
    }

    /// Net COM x displacement over the run.
    pub fn displacement(&self) -> f64 {
        match (self.frames.first(), self.frames.last()) {
            (Some(a), Some(b)) => b.com[0] - a.com[0],
            _ => 0.0,
        }
    }
}

pub fn com_of(pos: &[[f64; 2]], masses: &[f64]) -> [f64; 2] {
    let mut m = 0.0;
    let mut c = [0.0; 2];
    for (p, &mi) in pos.iter().zip(masses) {
        m += mi;
        c[0] += mi * p[0];
        c[1] += mi * p[1];
    }
    [c[0] / m, c[1] / m]
}

/// Time-dependent actuation: per-actuator rest curvature and whether the drive
/// counts as energized.
pub trait Actuation {
    fn curvatures(&self, robot: &DiscretizedRobot, t: f64) -> Result<(Vec<f64>, bool), SimError>;
}

impl Actuation for DriveProgram {
    fn curvatures(&self, robot: &DiscretizedRobot, t: f64) -> Result<(Vec<f64>, bool), SimError> {
        Ok((actuator_curvatures(robot, self, t)?, self.is_on(t)))
    }
}

/// Drives `engine` from `state` for `duration`, recording every `record_every` steps.
///
/// Curvatures are re-evaluated at every step boundary from the actuation at the
/// start of the step.
pub fn run<A: Actuation + ?Sized>(
    engine: &mut Engine,
    mut state: NodeState,
    actuation: &A,
    duration: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory, SimError> {
    if !(duration > 0.0) {
        return Err(SimError::InvalidRequest(format!("duration must be positive, got {duration}")));
    }
    if record_every == 0 {
        return Err(SimError::InvalidRequest("record_every must be at least 1".into()));
    }
    check_dt(engine.robot(), dt)?;
    let steps = (duration / dt).round() as usize;
    let t0 = state.t;
    let mut frames = Vec::with_capacity(steps / record_every + 2);

    let (kappa, on) = actuation.curvatures(engine.robot(), t0)?;
    let mut last_kappa = kappa;
    engine.set_actuator_curvatures(&last_kappa);
    frames.push(record(engine, &state, on));

    for k in 0..steps {
        // Exact multiples of dt keep repeated runs bit-identical and avoid drift.
        let t = t0 + k as f64 * dt;
        state.t = t;
        let (kappa, on) = actuation.curvatures(engine.robot(), t)?;
        if kappa != last_kappa {
            engine.set_actuator_curvatures(&kappa);
            last_kappa = kappa;
        }
        engine.step(&mut state, dt)?;
        state.t = t0 + (k + 1) as f64 * dt;
        if (k + 1) % record_every == 0 {
            frames.push(record(engine, &state, on));
        }
    }
    let robot = engine.robot();
    Ok(Trajectory {
        dt_record: dt * record_every as f64,
        node_masses: robot.node_masses.clone(),
        fingerprint: robot.fingerprint,
        frames,
    })
}

fn record(engine: &Engine, state: &NodeState, drive_on: bool) -> Frame {
    let robot = engine.robot();
    let pos: Vec<[f64; 2]> = state.pos.iter().map(|p| [robot.origin + p[0], p[1]]).collect();
    let com = com_of(&pos, &robot.node_masses);
    Frame {
        t: state.t,
        pos,
        vel: state.vel.clone(),
        contacts: contact_sample(robot, engine.environment(), state),
        drive_on,
        com,
    }
}

/// Runs `program` on `robot` from the flat rest pose on the ground.
pub fn simulate(
    robot: &DiscretizedRobot,
    program: &DriveProgram,
    duration: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory, SimError> {
    program.validate(robot.actuators.len())?;
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let state = NodeState::flat_rest(robot);
    run(&mut engine, state, program, duration, dt, record_every)
}

// ---------------------------------------------------------------------------
// Export formats

pub const MAGIC: &[u8; 8] = b"PZCRAWL1";
pub const FORMAT_VERSION: u32 = 1;

/// One row per frame: `t`, `x_i,z_i` per node, `N_k,contact_k` per foot,
/// `drive_on`, `com_x`, `com_z`.
pub fn write_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    let mut header = vec!["t".to_string()];
    for i in 0..traj.node_count() {
        header.push(format!("x{i}"));
        header.push(format!("z{i}"));
    }
    for k in 0..traj.foot_count() {
        header.push(format!("N{k}"));
        header.push(format!("contact{k}"));
    }
    header.extend(["drive_on".into(), "com_x".into(), "com_z".into()]);
    writeln!(out, "{}", header.join(","))?;
    let mut row = String::new();
    for f in &traj.frames {
        row.clear();
        row.push_str(&f.t.to_string());
        for p in &f.pos {
            row.push_str(&format!(",{},{}", p[0], p[1]));
        }
        for c in &f.contacts {
            row.push_str(&format!(",{},{}", c.normal_force, u8::from(c.in_contact)));
        }
        row.push_str(&format!(",{},{},{}", u8::from(f.drive_on), f.com[0], f.com[1]));
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Columnar binary: 16-byte header (`PZCRAWL1`, u32 version, u32 reserved),
/// dimensions, node masses, then one contiguous little-endian column per
/// quantity.
pub fn write_binary<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    let nf = traj.frames.len();
    let nn = traj.node_count();
    let nk = traj.foot_count();
    let mut buf: Vec<u8> = Vec::with_capacity(64 + nf * (8 * (1 + 4 * nn + 3 * nk + 2) + nk + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    buf.extend_from_slice(&(nn as u32).to_le_bytes());
    buf.extend_from_slice(&(nk as u32).to_le_bytes());
    buf.extend_from_slice(&(nf as u64).to_le_bytes());
    buf.extend_from_slice(&traj.dt_record.to_le_bytes());
    buf.extend_from_slice(&traj.fingerprint.to_le_bytes());
    for m in &traj.node_masses {
        buf.extend_from_slice(&m.to_le_bytes());
    }
    let mut col = |get: &dyn Fn(&Frame) -> f64| {
        for f in &traj.frames {
            buf.extend_from_slice(&get(f).to_le_bytes());
        }
    };
    col(&|f| f.t);
    for i in 0..nn {
        col(&|f| f.pos[i][0]);
        col(&|f| f.pos[i][1]);
        col(&|f| f.vel[i][0]);
        col(&|f| f.vel[i][1]);
    }
    for k in 0..nk {
        col(&|f| f.contacts[k].normal_force);
        col(&|f| f.contacts[k].tangential_force);
        col(&|f| f.contacts[k].foot_height);
    }
    col(&|f| f.com[0]);
    col(&|f| f.com[1]);
    for k in 0..nk {
        buf.extend(traj.frames.iter().map(|f| u8::from(f.contacts[k].in_contact)));
    }
    buf.extend(traj.frames.iter().map(|f| u8::from(f.drive_on)));
    out.write_all(&buf)
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrajectoryIoError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or_else(|| TrajectoryIoError::Format("truncated file".into()))?;
        let s = &self.data[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, TrajectoryIoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, TrajectoryIoError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, TrajectoryIoError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn column(&mut self, n: usize) -> Result<Vec<f64>, TrajectoryIoError> {
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn read_binary<R: Read>(mut input: R) -> Result<Trajectory, TrajectoryIoError> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(TrajectoryIoError::Format("missing PZCRAWL1 magic".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(TrajectoryIoError::Format(format!("unsupported version {version}")));
    }
    c.u32()?;
    let nn = c.u32()? as usize;
    let nk = c.u32()? as usize;
    let nf = c.u64()? as usize;
    let dt_record = c.f64()?;
    let fingerprint = c.u64()?;
    // Rough size check before allocating per-frame storage.
    let need = nn * 8 + nf * (8 * (1 + 4 * nn + 3 * nk + 2) + nk + 1);
    if data.len() - c.at != need {
        return Err(TrajectoryIoError::Format(format!(
            "expected {need} payload bytes, found {}",
            data.len() - c.at
        )));
    }
    let node_masses = c.column(nn)?;
    let t = c.column(nf)?;
    let mut frames: Vec<Frame> = t
        .into_iter()
        .map(|t| Frame {
            t,
            pos: vec![[0.0; 2]; nn],
            vel: vec![[0.0; 2]; nn],
            contacts: vec![Default::default(); nk],
            drive_on: false,
            com: [0.0; 2],
        })
        .collect();
    for i in 0..nn {
        for part in 0..4 {
            let col = c.column(nf)?;
            for (f, v) in frames.iter_mut().zip(col) {
                match part {
                    0 => f.pos[i][0] = v,
                    1 => f.pos[i][1] = v,
                    2 => f.vel[i][0] = v,
                    _ => f.vel[i][1] = v,
                }
            }
        }
    }
    for k in 0..nk {
        for part in 0..3 {
            let col = c.column(nf)?;
            for (f, v) in frames.iter_mut().zip(col) {
                match part {
                    0 => f.contacts[k].normal_force = v,
                    1 => f.contacts[k].tangential_force = v,
                    _ => f.contacts[k].foot_height = v,
                }
            }
        }
    }
    for axis in 0..2 {
        let col = c.column(nf)?;
        for (f, v) in frames.iter_mut().zip(col) {
            f.com[axis] = v;
        }
    }
    for k in 0..nk {
        let flags = c.take(nf)?;
        for (f, &b) in frames.iter_mut().zip(flags) {
            f.contacts[k].in_contact = b != 0;
        }
    }
    let flags = c.take(nf)?;
    for (f, &b) in frames.iter_mut().zip(flags) {
        f.drive_on = b != 0;
    }
    Ok(Trajectory { dt_record, node_masses, fingerprint, frames })
}

pub fn save(traj: &Trajectory, path: &std::path::Path) -> Result<(), TrajectoryIoError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => write_csv(traj, file)?,
        _ => write_binary(traj, file)?,
    }
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<Trajectory, TrajectoryIoError> {
    read_binary(std::io::BufReader::new(std::fs::File::open(path)?))
}
