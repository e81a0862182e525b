//! JSON wire messages exchanged over the `/session` WebSocket.

use serde::{Deserialize, Serialize};

pub const FREQ_RANGE: (f64, f64) = (0.1, 100.0);
pub const MAX_STREAM_RATE: f64 = 120.0;
pub const SPEED_SCALE_RANGE: (f64, f64) = (0.01, 10.0);

/// Operator commands. Tagged by `"cmd"` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    SetDrive { freq_hz: f64, on: bool },
    SetDuty { duty: f64 },
    AddPayload { x_m: f64, mass_kg: f64 },
    Reset,
    SetSpeedScale { scale: f64 },
}

/// A command with the optional client-chosen id echoed in the ack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientMessage {
    #[serde(flatten)]
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cmd_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field} = {value} violates {bound}")]
pub struct BoundViolation {
    pub field: &'static str,
    pub value: String,
    pub bound: String,
}

fn violation(field: &'static str, value: f64, bound: String) -> BoundViolation {
    BoundViolation { field, value: value.to_string(), bound }
}

impl Command {
    /// Range checks that do not depend on session state.
    pub fn validate(&self, strip_length: f64) -> Result<(), BoundViolation> {
        match *self {
            Command::SetDrive { freq_hz, .. } => {
                let (lo, hi) = FREQ_RANGE;
                if !(lo..=hi).contains(&freq_hz) {
                    return Err(violation("freq_hz", freq_hz, format!("{lo} <= freq_hz <= {hi}")));
                }
            }
            Command::SetDuty { duty } => {
                if !(duty > 0.0 && duty < 1.0) {
                    return Err(violation("duty", duty, "0 < duty < 1".into()));
                }
            }
            Command::AddPayload { x_m, mass_kg } => {
                if !(mass_kg >= 0.0) || !mass_kg.is_finite() {
                    return Err(violation("mass_kg", mass_kg, "mass_kg >= 0".into()));
                }
                if !(0.0..=strip_length).contains(&x_m) {
                    return Err(violation("x_m", x_m, format!("0 <= x_m <= {strip_length}")));
                }
            }
            Command::Reset => {}
            Command::SetSpeedScale { scale } => {
                let (lo, hi) = SPEED_SCALE_RANGE;
                if !(lo..=hi).contains(&scale) {
                    return Err(violation("scale", scale, format!("{lo} <= scale <= {hi}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveStatus {
    pub freq_hz: f64,
    pub on: bool,
}

/// One decimated snapshot of the running simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub t: f64,
    /// World (x, z) of every `node_stride`-th node, both ends included.
    pub nodes: Vec<[f64; 2]>,
    pub contacts: Vec<bool>,
    pub com: [f64; 2],
    pub drive: DriveStatus,
    pub speed_cm_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// First message of every session.
    Session {
        id: u64,
        config: String,
        node_masses: Vec<f64>,
        node_stride: usize,
        rate_hz: f64,
    },
    State(StateFrame),
    Ack {
        cmd_id: u64,
        applied_at: f64,
    },
    Error {
        code: ErrorCode,
        msg: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cmd_id: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    OutOfRange,
    Config,
    SimFailure,
    Lagged,
}
