//! Scenario files: a TOML document with `[geometry]`, `[actuators.N]`,
//! `[mass_profile]`, `[contact]` and `[drive]` sections.
//!
//! ```toml
//! [geometry]
//! total_length = 0.5          # m
//! width = 0.02                # m
//! links_per_actuator = 6
//! foot_rest_height = 0.005    # m
//! bending_stiffness = 0.08    # N m^2
//! structural_damping = 0.03
//! # foot_positions = [0.05, 0.15, 0.25, 0.35, 0.45]   (default: actuator midpoints)
//!
//! [actuators.1]
//! kind = "d31"                # or "d33"
//! length = 0.1
//! max_voltage = 300.0
//! kappa_max = 0.5             # 1/m
//!
//! [[mass_profile.segments]]
//! x_start = 0.0
//! x_end = 0.5
//! density = 0.04              # kg/m
//! # front_share = 0.5
//!
//! [[mass_profile.point_masses]]
//! x = 0.40
//! mass = 0.013
//!
//! [contact]
//! stiffness = 2e4
//! damping = 5.0
//! friction_mu = 0.3
//! friction_v_reg = 1e-3
//!
//! [drive]
//! frequency = 11.0
//! duty = 0.5
//! voltage_fraction = [1.0, 1.0, 1.0, 1.0, 1.0]
//! participating = [true, true, true, true, true]
//! phase_offset = 0.0
//! dt = 2e-5
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, ModelError};
use crate::model::{
    build_robot, default_foot_positions, ActuatorSpec, DiscretizedRobot, DriveProgram, MassProfile,
    RobotConfig, ACTUATOR_COUNT,
};

pub const DEFAULT_DT: f64 = 2e-5;
pub const DEFAULT_LINKS_PER_ACTUATOR: usize = 6;

/// Everything a run needs: the robot, its discretization, a drive and a step.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub robot: RobotConfig,
    pub links_per_actuator: usize,
    pub drive: DriveProgram,
    pub dt: f64,
}

impl Scenario {
    pub fn new(robot: RobotConfig) -> Self {
        Self {
            robot,
            links_per_actuator: DEFAULT_LINKS_PER_ACTUATOR,
            drive: DriveProgram::all_on(11.0),
            dt: DEFAULT_DT,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: FileConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        file.into_scenario()
    }

    pub fn to_cfg_string(&self) -> String {
        toml::to_string(&FileConfig::from_scenario(self)).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_cfg_string())
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })
    }

    pub fn build(&self) -> Result<DiscretizedRobot, ModelError> {
        build_robot(&self.robot, self.links_per_actuator)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    geometry: Geometry,
    actuators: BTreeMap<String, ActuatorSpec>,
    mass_profile: MassProfile,
    contact: Contact,
    #[serde(default)]
    drive: Drive,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Geometry {
    #[serde(default = "default_length")]
    total_length: f64,
    #[serde(default = "default_width")]
    width: f64,
    #[serde(default = "default_links")]
    links_per_actuator: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    foot_positions: Option<Vec<f64>>,
    #[serde(default = "default_foot_height")]
    foot_rest_height: f64,
    bending_stiffness: f64,
    structural_damping: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Contact {
    stiffness: f64,
    damping: f64,
    friction_mu: f64,
    #[serde(default = "default_v_reg")]
    friction_v_reg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Drive {
    #[serde(default = "default_frequency")]
    frequency: f64,
    #[serde(default = "default_duty")]
    duty: f64,
    #[serde(default = "default_fractions")]
    voltage_fraction: Vec<f64>,
    #[serde(default = "default_participating")]
    participating: Vec<bool>,
    #[serde(default)]
    phase_offset: f64,
    #[serde(default = "default_dt")]
    dt: f64,
}

impl Default for Drive {
    fn default() -> Self {
        Self {
            frequency: default_frequency(),
            duty: default_duty(),
            voltage_fraction: default_fractions(),
            participating: default_participating(),
            phase_offset: 0.0,
            dt: DEFAULT_DT,
        }
    }
}

fn default_length() -> f64 {
    0.5
}
fn default_width() -> f64 {
    0.02
}
fn default_links() -> usize {
    DEFAULT_LINKS_PER_ACTUATOR
}
fn default_foot_height() -> f64 {
    0.005
}
fn default_v_reg() -> f64 {
    1e-3
}
fn default_frequency() -> f64 {
    11.0
}
fn default_duty() -> f64 {
    0.5
}
fn default_fractions() -> Vec<f64> {
    vec![1.0; ACTUATOR_COUNT]
}
fn default_participating() -> Vec<bool> {
    vec![true; ACTUATOR_COUNT]
}
fn default_dt() -> f64 {
    DEFAULT_DT
}

fn section(section: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Section { section: section.into(), msg: msg.into() }
}

impl FileConfig {
    fn into_scenario(self) -> Result<Scenario, ConfigError> {
        let mut numbered = Vec::with_capacity(self.actuators.len());
        for (key, spec) in self.actuators {
            let index: usize = key
                .parse()
                .map_err(|_| section("actuators", format!("key `{key}` is not an actuator number")))?;
            numbered.push((index, spec));
        }
        numbered.sort_by_key(|(i, _)| *i);
        let expected: Vec<usize> = (1..=ACTUATOR_COUNT).collect();
        let found: Vec<usize> = numbered.iter().map(|(i, _)| *i).collect();
        if found != expected {
            return Err(section("actuators", format!("need actuators 1..={ACTUATOR_COUNT}, found {found:?}")));
        }
        let actuators: Vec<ActuatorSpec> = numbered.into_iter().map(|(_, s)| s).collect();

        let g = self.geometry;
        let foot_positions = g.foot_positions.unwrap_or_else(|| default_foot_positions(&actuators));
        let robot = RobotConfig {
            total_length: g.total_length,
            width: g.width,
            actuators,
            foot_positions,
            foot_rest_height: g.foot_rest_height,
            mass_profile: self.mass_profile,
            bending_stiffness: g.bending_stiffness,
            structural_damping: g.structural_damping,
            friction_mu: self.contact.friction_mu,
            friction_v_reg: self.contact.friction_v_reg,
            contact_stiffness: self.contact.stiffness,
            contact_damping: self.contact.damping,
        };
        robot.validate()?;
        if g.links_per_actuator < 2 {
            return Err(section("geometry", format!("links_per_actuator must be >= 2, got {}", g.links_per_actuator)));
        }

        let d = self.drive;
        let drive = DriveProgram {
            frequency: d.frequency,
            duty: d.duty,
            participating: d.participating,
            voltage_fraction: d.voltage_fraction,
            phase_offset: d.phase_offset,
        };
        drive.validate(ACTUATOR_COUNT)?;
        if !(d.dt > 0.0 && d.dt.is_finite()) {
            return Err(section("drive", format!("dt must be positive, got {}", d.dt)));
        }
        Ok(Scenario { robot, links_per_actuator: g.links_per_actuator, drive, dt: d.dt })
    }

    fn from_scenario(s: &Scenario) -> Self {
        let r = &s.robot;
        let actuators = r
            .actuators
            .iter()
            .enumerate()
            .map(|(i, a)| ((i + 1).to_string(), a.clone()))
            .collect();
        let defaults = default_foot_positions(&r.actuators);
        Self {
            geometry: Geometry {
                total_length: r.total_length,
                width: r.width,
                links_per_actuator: s.links_per_actuator,
                foot_positions: (r.foot_positions != defaults).then(|| r.foot_positions.clone()),
                foot_rest_height: r.foot_rest_height,
                bending_stiffness: r.bending_stiffness,
                structural_damping: r.structural_damping,
            },
            actuators,
            mass_profile: r.mass_profile.clone(),
            contact: Contact {
                stiffness: r.contact_stiffness,
                damping: r.contact_damping,
                friction_mu: r.friction_mu,
                friction_v_reg: r.friction_v_reg,
            },
            drive: Drive {
                frequency: s.drive.frequency,
                duty: s.drive.duty,
                voltage_fraction: s.drive.voltage_fraction.clone(),
                participating: s.drive.participating.clone(),
                phase_offset: s.drive.phase_offset,
                dt: s.dt,
            },
        }
    }
}
