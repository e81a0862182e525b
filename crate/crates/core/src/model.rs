//! Robot description: actuators, mass distribution, feet and contact parameters,
//! the lumped-chain discretization and the square-wave drive.
//!
//! Positions along the strip are measured from its left end, `x ∈ [0, L]`.
//! Curvature is positive when the strip is concave up.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Piezoelectric coupling mode of an actuator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActuatorKind {
    /// Active layer contracts in-plane under voltage; the segment bends concave up.
    D31,
    /// Active layer extends under voltage; the segment bends concave down.
    D33,
}

impl ActuatorKind {
    pub fn bend_sign(self) -> f64 {
        match self {
            ActuatorKind::D31 => 1.0,
            ActuatorKind::D33 => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    pub kind: ActuatorKind,
    /// m
    pub length: f64,
    /// V
    pub max_voltage: f64,
    /// Rest-curvature magnitude at `max_voltage`, 1/m.
    pub kappa_max: f64,
}

impl ActuatorSpec {
    pub fn d31(length: f64, kappa_max: f64) -> Self {
        Self { kind: ActuatorKind::D31, length, max_voltage: 300.0, kappa_max }
    }

    pub fn d33(length: f64, kappa_max: f64) -> Self {
        Self { kind: ActuatorKind::D33, length, max_voltage: 1500.0, kappa_max }
    }

    pub fn bend_sign(&self) -> f64 {
        self.kind.bend_sign()
    }

    fn validate(&self, index: usize) -> Result<(), ModelError> {
        let ok = self.length > 0.0 && self.max_voltage > 0.0 && self.kappa_max >= 0.0;
        if !ok || !(self.length + self.max_voltage + self.kappa_max).is_finite() {
            return Err(ModelError::InvalidActuator {
                index,
                reason: format!(
                    "need length > 0, max_voltage > 0, kappa_max >= 0 (got {}, {}, {})",
                    self.length, self.max_voltage, self.kappa_max
                ),
            });
        }
        Ok(())
    }
}

/// Rest curvature of an actuated segment, linear in the applied voltage.
pub fn actuated_rest_curvature(spec: &ActuatorSpec, voltage: f64) -> Result<f64, ModelError> {
    if !(0.0..=spec.max_voltage).contains(&voltage) {
        return Err(ModelError::VoltageOutOfRange { voltage, max: spec.max_voltage });
    }
    Ok(spec.bend_sign() * spec.kappa_max * (voltage / spec.max_voltage))
}

fn default_front_share() -> f64 {
    0.5
}

/// Constant linear density over `[x_start, x_end]`.
///
/// `front_share` is the fraction of this mass sitting on the front half of the
/// strip's width; it only matters for the half-split rotation estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSegment {
    pub x_start: f64,
    pub x_end: f64,
    /// kg/m
    pub density: f64,
    #[serde(default = "default_front_share")]
    pub front_share: f64,
}

impl MassSegment {
    pub fn new(x_start: f64, x_end: f64, density: f64) -> Self {
        Self { x_start, x_end, density, front_share: 0.5 }
    }

    pub fn mass(&self) -> f64 {
        self.density * (self.x_end - self.x_start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub x: f64,
    /// kg
    pub mass: f64,
    #[serde(default = "default_front_share")]
    pub front_share: f64,
}

impl PointMass {
    pub fn new(x: f64, mass: f64) -> Self {
        Self { x, mass, front_share: 0.5 }
    }
}

/// Piecewise-constant linear density plus point payloads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MassProfile {
    #[serde(default)]
    pub segments: Vec<MassSegment>,
    #[serde(default)]
    pub point_masses: Vec<PointMass>,
}

impl MassProfile {
    pub fn uniform(length: f64, total: f64) -> Self {
        Self { segments: vec![MassSegment::new(0.0, length, total / length)], point_masses: Vec::new() }
    }

    pub fn with_point_mass(mut self, x: f64, mass: f64) -> Self {
        self.point_masses.push(PointMass::new(x, mass));
        self
    }

    /// Checks that the segments tile `[0, length]` and every mass is non-negative.
    pub fn validate(&self, length: f64) -> Result<(), ModelError> {
        let tol = 1e-9 * length;
        let mut segs: Vec<&MassSegment> = self.segments.iter().collect();
        segs.sort_by(|a, b| a.x_start.total_cmp(&b.x_start));
        let mut cursor = 0.0;
        for s in &segs {
            if !(s.density >= 0.0) || !(0.0..=1.0).contains(&s.front_share) {
                return Err(ModelError::InvalidMassProfile(format!(
                    "segment [{}, {}] has density {} / front_share {}",
                    s.x_start, s.x_end, s.density, s.front_share
                )));
            }
            if !(s.x_end > s.x_start) {
                return Err(ModelError::InvalidMassProfile(format!(
                    "segment [{}, {}] is empty or reversed",
                    s.x_start, s.x_end
                )));
            }
            if s.x_start < cursor - tol {
                return Err(ModelError::InvalidMassProfile(format!(
                    "segment [{}, {}] overlaps the previous one ending at {}",
                    s.x_start, s.x_end, cursor
                )));
            }
            if s.x_start > cursor + tol {
                return Err(ModelError::InvalidMassProfile(format!(
                    "gap in density segments between {} and {}",
                    cursor, s.x_start
                )));
            }
            cursor = s.x_end;
        }
        if (cursor - length).abs() > tol {
            return Err(ModelError::InvalidMassProfile(format!(
                "density segments end at {cursor}, strip length is {length}"
            )));
        }
        for p in &self.point_masses {
            if !(p.mass >= 0.0) || !(0.0..=length).contains(&p.x) || !(0.0..=1.0).contains(&p.front_share) {
                return Err(ModelError::InvalidMassProfile(format!(
                    "point mass {} kg at x = {} is invalid",
                    p.mass, p.x
                )));
            }
        }
        Ok(())
    }

    /// The same profile reflected about the strip midpoint.
    pub fn mirrored(&self, length: f64) -> Self {
        let mut segments: Vec<MassSegment> = self
            .segments
            .iter()
            .map(|s| MassSegment { x_start: length - s.x_end, x_end: length - s.x_start, ..s.clone() })
            .collect();
        segments.reverse();
        let point_masses = self
            .point_masses
            .iter()
            .map(|p| PointMass { x: length - p.x, ..p.clone() })
            .collect();
        Self { segments, point_masses }
    }
}

/// Σ density·Δx over segments plus Σ point masses.
pub fn total_mass(profile: &MassProfile) -> f64 {
    let distributed: f64 = profile.segments.iter().map(MassSegment::mass).sum();
    let points: f64 = profile.point_masses.iter().map(|p| p.mass).sum();
    distributed + points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotConfig {
    /// m
    pub total_length: f64,
    /// m, bookkeeping only in the planar model.
    pub width: f64,
    pub actuators: Vec<ActuatorSpec>,
    pub foot_positions: Vec<f64>,
    /// Height of a foot's top above the ground with the foam unloaded, m.
    pub foot_rest_height: f64,
    pub mass_profile: MassProfile,
    /// Effective EI of the composite strip, N·m².
    pub bending_stiffness: f64,
    /// Damping ratio of the first free bending mode; joint damping is
    /// stiffness-proportional, so higher modes are damped more.
    pub structural_damping: f64,
    pub friction_mu: f64,
    /// Velocity scale of the tanh friction regularization, m/s.
    pub friction_v_reg: f64,
    /// Per-foot penalty stiffness, N/m.
    pub contact_stiffness: f64,
    /// Per-foot penalty damping, N·s/m.
    pub contact_damping: f64,
}

pub const ACTUATOR_COUNT: usize = 5;

impl RobotConfig {
    /// Bare five-actuator strip: 0.5 m, 20 g uniform, feet under each actuator midpoint.
    pub fn bare() -> Self {
        let length = 0.1;
        let kappa = 1.0;
        let actuators = vec![
            ActuatorSpec::d31(length, kappa),
            ActuatorSpec::d31(length, kappa),
            ActuatorSpec::d33(length, kappa),
            ActuatorSpec::d31(length, kappa),
            ActuatorSpec::d31(length, kappa),
        ];
        Self {
            total_length: 0.5,
            width: 0.02,
            foot_positions: default_foot_positions(&actuators),
            actuators,
            foot_rest_height: 0.005,
            mass_profile: MassProfile::uniform(0.5, 0.020),
            bending_stiffness: 0.03,
            structural_damping: 0.05,
            friction_mu: 0.3,
            friction_v_reg: 1e-3,
            contact_stiffness: 2e4,
            contact_damping: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.total_length > 0.0) {
            return Err(ModelError::InvalidGeometry(format!("total_length = {}", self.total_length)));
        }
        if self.actuators.is_empty() {
            return Err(ModelError::InvalidGeometry("no actuators".into()));
        }
        for (i, a) in self.actuators.iter().enumerate() {
            a.validate(i)?;
        }
        let sum: f64 = self.actuators.iter().map(|a| a.length).sum();
        if (sum - self.total_length).abs() > 1e-9 * self.total_length {
            return Err(ModelError::InvalidGeometry(format!(
                "actuator lengths sum to {sum}, total_length is {}",
                self.total_length
            )));
        }
        for w in self.foot_positions.windows(2) {
            if !(w[1] > w[0]) {
                return Err(ModelError::InvalidFeet(format!(
                    "foot positions must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for &f in &self.foot_positions {
            if !(0.0..=self.total_length).contains(&f) {
                return Err(ModelError::InvalidFeet(format!(
                    "foot at x = {f} lies outside [0, {}]",
                    self.total_length
                )));
            }
        }
        let positive = [
            ("foot_rest_height", self.foot_rest_height),
            ("bending_stiffness", self.bending_stiffness),
            ("structural_damping", self.structural_damping),
            ("friction_mu", self.friction_mu),
            ("friction_v_reg", self.friction_v_reg),
            ("contact_stiffness", self.contact_stiffness),
            ("contact_damping", self.contact_damping),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::NonPositiveParameter { name, value });
            }
        }
        self.mass_profile.validate(self.total_length)
    }

    /// Start/end x of each actuator.
    pub fn actuator_bounds(&self) -> Vec<(f64, f64)> {
        let mut x = 0.0;
        self.actuators
            .iter()
            .map(|a| {
                let b = (x, x + a.length);
                x += a.length;
                b
            })
            .collect()
    }

    /// Left-right reflection about the strip midpoint.
    pub fn mirrored(&self) -> Self {
        let l = self.total_length;
        let mut actuators = self.actuators.clone();
        actuators.reverse();
        let mut feet: Vec<f64> = self.foot_positions.iter().map(|f| l - f).collect();
        feet.reverse();
        Self {
            actuators,
            foot_positions: feet,
            mass_profile: self.mass_profile.mirrored(l),
            ..self.clone()
        }
    }

    /// One widthwise half of the strip: the same length, actuators and feet,
    /// half the bending and contact stiffness, and the front (or back) share of
    /// every mass.
    pub fn half(&self, front: bool) -> Self {
        let share = |s: f64| if front { s } else { 1.0 - s };
        let mut profile = self.mass_profile.clone();
        for s in profile.segments.iter_mut() {
            s.density *= share(s.front_share);
            s.front_share = 0.5;
        }
        for p in profile.point_masses.iter_mut() {
            p.mass *= share(p.front_share);
            p.front_share = 0.5;
        }
        Self {
            width: 0.5 * self.width,
            mass_profile: profile,
            bending_stiffness: 0.5 * self.bending_stiffness,
            contact_stiffness: 0.5 * self.contact_stiffness,
            contact_damping: 0.5 * self.contact_damping,
            ..self.clone()
        }
    }

    /// Front-back reflection: every mass swaps its front and back shares.
    pub fn flipped_widthwise(&self) -> Self {
        let mut out = self.clone();
        for s in out.mass_profile.segments.iter_mut() {
            s.front_share = 1.0 - s.front_share;
        }
        for p in out.mass_profile.point_masses.iter_mut() {
            p.front_share = 1.0 - p.front_share;
        }
        out
    }

    /// Stable 64-bit FNV-1a hash of the serialized config.
    pub fn fingerprint(&self) -> u64 {
        let text = serde_json::to_string(self).expect("config serializes");
        fnv1a(text.as_bytes())
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn default_foot_positions(actuators: &[ActuatorSpec]) -> Vec<f64> {
    let mut x = 0.0;
    actuators
        .iter()
        .map(|a| {
            let mid = x + 0.5 * a.length;
            x += a.length;
            mid
        })
        .collect()
}

/// Lumped node chain derived from a [`RobotConfig`].
///
/// Node coordinates are kept relative to the strip midpoint (`origin`) so that a
/// mirror-symmetric robot discretizes to exactly negated coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedRobot {
    /// World x of the strip midpoint at rest.
    pub origin: f64,
    /// Rest x of each node relative to `origin`.
    pub rest_offsets: Vec<f64>,
    pub node_masses: Vec<f64>,
    pub link_lengths: Vec<f64>,
    /// Stiffness of the joint at each node, N·m/rad. Zero at the two free ends.
    pub joint_stiffness: Vec<f64>,
    /// N·m·s/rad, zero at the two free ends.
    pub joint_damping: Vec<f64>,
    pub actuator_of_link: Vec<usize>,
    pub foot_nodes: Vec<usize>,
    pub actuators: Vec<ActuatorSpec>,
    pub foot_rest_height: f64,
    pub friction_mu: f64,
    pub friction_v_reg: f64,
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub fingerprint: u64,
}

impl DiscretizedRobot {
    pub fn node_count(&self) -> usize {
        self.node_masses.len()
    }

    pub fn link_count(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.node_masses.iter().sum()
    }

    pub fn node_positions_rest(&self) -> Vec<f64> {
        self.rest_offsets.iter().map(|o| self.origin + o).collect()
    }

    /// First and last node of actuator `index`.
    pub fn actuator_end_nodes(&self, index: usize) -> Option<(usize, usize)> {
        let first = self.actuator_of_link.iter().position(|&a| a == index)?;
        let last = self.actuator_of_link.iter().rposition(|&a| a == index)?;
        Some((first, last + 1))
    }

    /// Largest stable step for the penalty contact: `0.2·sqrt(min node mass / k_contact)`.
    pub fn max_stable_dt(&self) -> f64 {
        let m_min = self.node_masses.iter().copied().fold(f64::INFINITY, f64::min);
        0.2 * (m_min / self.contact_stiffness).sqrt()
    }

    /// Rest angle of each joint for the given per-actuator rest curvatures.
    ///
    /// A link carries `kappa · link_length` of turning; a joint takes half from
    /// each adjacent link.
    pub fn rest_angles(&self, kappa_per_actuator: &[f64], out: &mut [f64]) {
        let n = self.node_count();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            let left = kappa_per_actuator[self.actuator_of_link[i - 1]] * self.link_lengths[i - 1];
            let right = kappa_per_actuator[self.actuator_of_link[i]] * self.link_lengths[i];
            out[i] = 0.5 * (left + right);
        }
    }
}

/// Discretizes `config` with `links_per_actuator` equal links on each actuator.
pub fn build_robot(config: &RobotConfig, links_per_actuator: usize) -> Result<DiscretizedRobot, ModelError> {
    if links_per_actuator < 2 {
        return Err(ModelError::TooFewLinks(links_per_actuator));
    }
    config.validate()?;

    let mut link_lengths = Vec::new();
    let mut actuator_of_link = Vec::new();
    for (a, spec) in config.actuators.iter().enumerate() {
        let l = spec.length / links_per_actuator as f64;
        for _ in 0..links_per_actuator {
            link_lengths.push(l);
            actuator_of_link.push(a);
        }
    }
    let n_links = link_lengths.len();
    let n_nodes = n_links + 1;
    let half = 0.5 * config.total_length;

    // Accumulate from both ends toward the middle so a mirrored chain gets
    // bit-exactly negated offsets.
    let mut offsets = vec![0.0; n_nodes];
    offsets[0] = -half;
    offsets[n_nodes - 1] = half;
    let mid = n_nodes / 2;
    for i in 1..=mid {
        offsets[i] = offsets[i - 1] + link_lengths[i - 1];
    }
    for i in (mid + 1..n_nodes - 1).rev() {
        offsets[i] = offsets[i + 1] - link_lengths[i];
    }
    if n_nodes % 2 == 1 {
        // odd node count: the centre node sits exactly on the midpoint
        offsets[mid] = 0.0;
    }

    // Tributary intervals, midpoint to midpoint.
    let bounds: Vec<f64> = (0..=n_nodes)
        .map(|k| match k {
            0 => offsets[0],
            k if k == n_nodes => offsets[n_nodes - 1],
            k => 0.5 * (offsets[k - 1] + offsets[k]),
        })
        .collect();
    let mut node_masses = vec![0.0; n_nodes];
    for (i, m) in node_masses.iter_mut().enumerate() {
        let (a, b) = (bounds[i], bounds[i + 1]);
        for s in &config.mass_profile.segments {
            let lo = (s.x_start - half).max(a);
            let hi = (s.x_end - half).min(b);
            if hi > lo {
                *m += s.density * (hi - lo);
            }
        }
    }
    for p in &config.mass_profile.point_masses {
        node_masses[nearest_node(&offsets, p.x - half)] += p.mass;
    }
    let total: f64 = node_masses.iter().sum();
    if !(total > 0.0) {
        return Err(ModelError::ZeroMass);
    }
    if let Some(i) = node_masses.iter().position(|&m| !(m > 0.0)) {
        return Err(ModelError::InvalidMassProfile(format!("node {i} has no mass")));
    }

    // Stiffness-proportional damping, scaled so the first free-free bending
    // mode of the equivalent uniform beam has `structural_damping` as its ratio.
    let omega1 = first_mode_estimate(config.bending_stiffness, total, config.total_length);
    let mut joint_stiffness = vec![0.0; n_nodes];
    let mut joint_damping = vec![0.0; n_nodes];
    for i in 1..n_nodes - 1 {
        let mean_l = 0.5 * (link_lengths[i - 1] + link_lengths[i]);
        let k = config.bending_stiffness / mean_l;
        joint_stiffness[i] = k;
        joint_damping[i] = 2.0 * config.structural_damping * k / omega1;
    }

    let mut foot_nodes = Vec::with_capacity(config.foot_positions.len());
    for &f in &config.foot_positions {
        let node = nearest_node(&offsets, f - half);
        if foot_nodes.contains(&node) {
            return Err(ModelError::InvalidFeet(format!(
                "two feet map onto node {node}; refine the discretization"
            )));
        }
        foot_nodes.push(node);
    }

    Ok(DiscretizedRobot {
        origin: half,
        rest_offsets: offsets,
        node_masses,
        link_lengths,
        joint_stiffness,
        joint_damping,
        actuator_of_link,
        foot_nodes,
        actuators: config.actuators.clone(),
        foot_rest_height: config.foot_rest_height,
        friction_mu: config.friction_mu,
        friction_v_reg: config.friction_v_reg,
        contact_stiffness: config.contact_stiffness,
        contact_damping: config.contact_damping,
        fingerprint: config.fingerprint(),
    })
}

/// First free-free bending frequency (rad/s) of a uniform beam with the same
/// stiffness, mass and length: `(4.730)^2 · sqrt(EI / (m/L · L^4))`.
pub fn first_mode_estimate(bending_stiffness: f64, mass: f64, length: f64) -> f64 {
    const BETA1_L: f64 = 4.730_040_745;
    BETA1_L * BETA1_L * (bending_stiffness / (mass / length * length.powi(4))).sqrt()
}

fn nearest_node(offsets: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (i, o) in offsets.iter().enumerate() {
        if (o - x).abs() < (offsets[best] - x).abs() {
            best = i;
        }
    }
    best
}

/// Square-wave drive: every participating actuator is switched on together for
/// `duty` of each period and off for the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProgram {
    /// Hz
    pub frequency: f64,
    pub duty: f64,
    pub participating: Vec<bool>,
    pub voltage_fraction: Vec<f64>,
    /// s
    pub phase_offset: f64,
}

impl DriveProgram {
    /// All five actuators at full voltage, 50 % duty.
    pub fn all_on(frequency: f64) -> Self {
        Self {
            frequency,
            duty: 0.5,
            participating: vec![true; ACTUATOR_COUNT],
            voltage_fraction: vec![1.0; ACTUATOR_COUNT],
            phase_offset: 0.0,
        }
    }

    pub fn with_voltage_fraction(mut self, fraction: f64) -> Self {
        self.voltage_fraction.iter_mut().for_each(|v| *v = fraction);
        self
    }

    pub fn validate(&self, actuator_count: usize) -> Result<(), ModelError> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(ModelError::InvalidDrive(format!("frequency = {}", self.frequency)));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(ModelError::InvalidDrive(format!("duty = {} not in (0, 1)", self.duty)));
        }
        if self.participating.len() != actuator_count || self.voltage_fraction.len() != actuator_count {
            return Err(ModelError::InvalidDrive(format!(
                "drive lists must have {actuator_count} entries"
            )));
        }
        if let Some(v) = self.voltage_fraction.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ModelError::InvalidDrive(format!("voltage fraction {v} not in [0, 1]")));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    /// True during the energized part of the cycle.
    pub fn is_on(&self, t: f64) -> bool {
        ((t - self.phase_offset) * self.frequency).rem_euclid(1.0) < self.duty
    }
}

/// Voltage on each actuator at time `t`.
pub fn drive_state(program: &DriveProgram, actuators: &[ActuatorSpec], t: f64) -> Vec<f64> {
    let on = program.is_on(t);
    actuators
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let active = on && program.participating.get(i).copied().unwrap_or(false);
            if active {
                program.voltage_fraction.get(i).copied().unwrap_or(0.0) * a.max_voltage
            } else {
                0.0
            }
        })
        .collect()
}
