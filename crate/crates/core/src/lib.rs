//! Dynamics simulator and experiment harness for a five-actuator piezoelectric
//! crawling strip driven by a square-wave voltage sequence.

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod model;
pub mod trajectory;

pub use config::Scenario;
pub use dynamics::{Engine, Environment, NodeState};
pub use error::{AnalysisError, ConfigError, ModelError, SimError, TrajectoryIoError};
pub use model::{build_robot, DiscretizedRobot, DriveProgram, RobotConfig};
pub use trajectory::{simulate, Trajectory};
