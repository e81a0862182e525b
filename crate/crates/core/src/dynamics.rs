//! Planar (x–z) lumped-chain dynamics.
//!
//! Nodes carry all mass. Links are inextensible (enforced by projection after
//! each position update), joints are torsional springs whose rest angle is set
//! by the actuator voltages, and only the foot nodes touch the ground through a
//! one-sided penalty spring with regularized Coulomb friction.
//!
//! Node x coordinates are body-frame offsets from the strip's rest midpoint.
//! Every per-node quantity is assembled from per-link terms in an order that is
//! invariant under the reflection `x -> -x`, so a mirror-symmetric robot under
//! symmetric actuation stays mirror-symmetric to the last bit.

use crate::error::SimError;
use crate::model::{actuated_rest_curvature, drive_state, DiscretizedRobot, DriveProgram};

pub const GRAVITY: f64 = 9.81;

/// Positions and velocities of every node, plus the simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub t: f64,
    /// Body-frame (x, z), m.
    pub pos: Vec<[f64; 2]>,
    /// m/s
    pub vel: Vec<[f64; 2]>,
}

impl NodeState {
    /// Flat strip resting on unloaded feet.
    pub fn flat_rest(robot: &DiscretizedRobot) -> Self {
        let pos = robot.rest_offsets.iter().map(|&x| [x, robot.foot_rest_height]).collect();
        Self { t: 0.0, pos, vel: vec![[0.0; 2]; robot.node_count()] }
    }

    /// Centre of mass in the body frame.
    pub fn com(&self, masses: &[f64]) -> [f64; 2] {
        let mut m = 0.0;
        let mut cx = 0.0;
        let mut cz = 0.0;
        for (p, &mi) in self.pos.iter().zip(masses) {
            m += mi;
            cx += mi * p[0];
            cz += mi * p[1];
        }
        [cx / m, cz / m]
    }

    pub fn momentum(&self, masses: &[f64]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for (v, &m) in self.vel.iter().zip(masses) {
            p[0] += m * v[0];
            p[1] += m * v[1];
        }
        p
    }

    pub fn max_speed(&self) -> f64 {
        self.vel.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }
}

/// Ground interaction at one foot.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootContact {
    /// N, never negative.
    pub normal_force: f64,
    /// N, along +x.
    pub tangential_force: f64,
    pub in_contact: bool,
    /// Height of the strip above the ground at the foot, m.
    pub foot_height: f64,
}

/// One [`FootContact`] per foot, in foot order.
pub type ContactSample = Vec<FootContact>;

/// Gravity and ground switches; the defaults are the physical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub gravity: f64,
    pub ground: bool,
}

impl Default for Environment {
    fn default() -> Self {
        Self { gravity: GRAVITY, ground: true }
    }
}

impl Environment {
    pub fn free_fall() -> Self {
        Self { gravity: GRAVITY, ground: false }
    }

    pub fn weightless() -> Self {
        Self { gravity: 0.0, ground: false }
    }
}

/// Contact law at one foot: penalty spring with damping only while the foam is
/// being compressed, and tanh-regularized Coulomb friction.
#[inline]
pub fn foot_force(robot: &DiscretizedRobot, pos: [f64; 2], vel: [f64; 2]) -> FootContact {
    let height = pos[1];
    let depth = robot.foot_rest_height - height;
    if depth < 0.0 {
        return FootContact { foot_height: height, ..FootContact::default() };
    }
    let normal = robot.contact_stiffness * depth + robot.contact_damping * (-vel[1]).max(0.0);
    let tangential = -robot.friction_mu * normal * (vel[0] / robot.friction_v_reg).tanh();
    FootContact { normal_force: normal, tangential_force: tangential, in_contact: true, foot_height: height }
}

pub fn contact_sample(robot: &DiscretizedRobot, env: &Environment, state: &NodeState) -> ContactSample {
    robot
        .foot_nodes
        .iter()
        .map(|&n| {
            if env.ground {
                foot_force(robot, state.pos[n], state.vel[n])
            } else {
                FootContact { foot_height: state.pos[n][1], ..FootContact::default() }
            }
        })
        .collect()
}

/// Signed turning angle from link `a` to link `b`; positive is concave up.
#[inline]
fn turning_angle(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.atan2(dot)
}

/// Rest angle of each joint for per-link rest curvatures.
pub fn rest_angles_from_links(robot: &DiscretizedRobot, link_curvature: &[f64], out: &mut [f64]) {
    let n = robot.node_count();
    out[0] = 0.0;
    out[n - 1] = 0.0;
    for i in 1..n - 1 {
        let left = link_curvature[i - 1] * robot.link_lengths[i - 1];
        let right = link_curvature[i] * robot.link_lengths[i];
        out[i] = 0.5 * (left + right);
    }
}

/// Fixed-step semi-implicit Euler integrator for one robot.
///
/// Per step: elastic, gravity and normal contact forces update velocities
/// explicitly; joint damping and foot friction are then applied implicitly;
/// positions advance with the new velocities and links are projected back to
/// their rest lengths, the projection being folded into the velocities.
#[derive(Debug, Clone)]
pub struct Engine {
    robot: DiscretizedRobot,
    env: Environment,
    projection_sweeps: usize,
    inv_mass: Vec<f64>,
    link_vec: Vec<[f64; 2]>,
    grad: Vec<[f64; 2]>,
    torque: Vec<f64>,
    force: Vec<[f64; 2]>,
    pred: Vec<[f64; 2]>,
    pair: Vec<[f64; 2]>,
    rest: Vec<f64>,
    normal: Vec<f64>,
    damping: DampingSolver,
}

impl Engine {
    pub fn new(robot: DiscretizedRobot, env: Environment) -> Self {
        let n = robot.node_count();
        let l = robot.link_count();
        Self {
            inv_mass: robot.node_masses.iter().map(|m| 1.0 / m).collect(),
            env,
            projection_sweeps: 4,
            link_vec: vec![[0.0; 2]; l],
            grad: vec![[0.0; 2]; l],
            torque: vec![0.0; n],
            force: vec![[0.0; 2]; n],
            pred: vec![[0.0; 2]; n],
            pair: vec![[0.0; 2]; l],
            rest: vec![0.0; n],
            normal: vec![0.0; robot.foot_nodes.len()],
            damping: DampingSolver::new(n.saturating_sub(2), is_mirror_symmetric(&robot)),
            robot,
        }
    }

    pub fn robot(&self) -> &DiscretizedRobot {
        &self.robot
    }

    pub fn environment(&self) -> &Environment {
        &self.env
    }

    /// Sets every joint's rest angle from per-actuator rest curvatures.
    pub fn set_actuator_curvatures(&mut self, kappa: &[f64]) {
        self.robot.rest_angles(kappa, &mut self.rest);
    }

    /// Sets every joint's rest angle from per-link rest curvatures.
    pub fn set_link_curvatures(&mut self, link_curvature: &[f64]) {
        rest_angles_from_links(&self.robot, link_curvature, &mut self.rest);
    }

    pub fn rest_angles(&self) -> &[f64] {
        &self.rest
    }

    /// Advances `state` by `dt`.
    pub fn step(&mut self, state: &mut NodeState, dt: f64) -> Result<(), SimError> {
        let n = self.robot.node_count();
        let nl = n - 1;

        for j in 0..nl {
            let a = state.pos[j];
            let b = state.pos[j + 1];
            let e = [b[0] - a[0], b[1] - a[1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            self.link_vec[j] = e;
            self.grad[j] = [-e[1] / len2, e[0] / len2];
        }

        // Elastic joint torques about the actuated rest angles.
        self.torque[0] = 0.0;
        self.torque[n - 1] = 0.0;
        for i in 1..n - 1 {
            let theta = turning_angle(self.link_vec[i - 1], self.link_vec[i]);
            self.torque[i] = self.robot.joint_stiffness[i] * (theta - self.rest[i]);
        }
        self.assemble_torques();
        for i in 0..n {
            self.force[i][1] -= self.robot.node_masses[i] * self.env.gravity;
        }

        if self.env.ground {
            for (k, &node) in self.robot.foot_nodes.iter().enumerate() {
                let c = foot_force(&self.robot, state.pos[node], state.vel[node]);
                self.force[node][1] += c.normal_force;
                self.normal[k] = c.normal_force;
            }
        }

        for i in 0..n {
            let w = self.inv_mass[i] * dt;
            state.vel[i][0] += self.force[i][0] * w;
            state.vel[i][1] += self.force[i][1] * w;
        }

        self.apply_joint_damping(state, dt);

        for i in 0..n {
            let p = state.pos[i];
            let v = state.vel[i];
            self.pred[i] = [p[0] + v[0] * dt, p[1] + v[1] * dt];
        }
        self.project_lengths();

        let inv_dt = 1.0 / dt;
        for i in 0..n {
            let p = &mut state.pos[i];
            let v = &mut state.vel[i];
            let q = self.pred[i];
            v[0] = (q[0] - p[0]) * inv_dt;
            v[1] = (q[1] - p[1]) * inv_dt;
            *p = q;
        }

        // Friction acts on the constraint-consistent velocities. Applied before
        // the projection it would also resist internal impulses the projection
        // then cancels, leaving a spurious net push on a strip at rest.
        if self.env.ground {
            let robot = &self.robot;
            for (k, &node) in robot.foot_nodes.iter().enumerate() {
                let normal = self.normal[k];
                if normal > 0.0 {
                    let a = dt * robot.friction_mu * normal * self.inv_mass[node];
                    let v = &mut state.vel[node][0];
                    *v = implicit_friction(*v, a, robot.friction_v_reg);
                }
            }
        }
        state.t += dt;

        if let Some(node) = state
            .pos
            .iter()
            .zip(&state.vel)
            .position(|(p, v)| !(p[0].is_finite() && p[1].is_finite() && v[0].is_finite() && v[1].is_finite()))
        {
            return Err(SimError::NonFinite { node, t: state.t });
        }
        Ok(())
    }

    /// Converts `self.torque` (one entry per node, zero at the ends) into node
    /// forces `-τ·∂θ/∂p`, written to `self.force`.
    ///
    /// Link j contributes `h_j = g_j (τ_j − τ_{j+1})` to node j and `−h_j` to
    /// node j+1.
    fn assemble_torques(&mut self) {
        let n = self.force.len();
        let nl = n - 1;
        for j in 0..nl {
            let dtau = self.torque[j] - self.torque[j + 1];
            self.pair[j] = [self.grad[j][0] * dtau, self.grad[j][1] * dtau];
        }
        for i in 0..n {
            let right = if i < nl { self.pair[i] } else { [0.0; 2] };
            let left = if i > 0 { self.pair[i - 1] } else { [0.0; 2] };
            self.force[i] = [right[0] - left[0], right[1] - left[1]];
        }
    }

    /// Backward-Euler joint damping: solves `(I + dt·C·A) λ = dt·C·θ̇` for the
    /// joint impulses, `A = J M⁻¹ Jᵀ`, then applies `−M⁻¹ Jᵀ λ`.
    fn apply_joint_damping(&mut self, state: &mut NodeState, dt: f64) {
        let n = state.vel.len();
        if n < 3 {
            return;
        }
        let m = n - 2;
        let g = &self.grad;
        let w = &self.inv_mass;
        let c = &self.robot.joint_damping;
        let s = &mut self.damping;
        for r in 0..m {
            let i = r + 1;
            let scale = c[i].sqrt();
            s.scale[r] = scale;
            let rate_right = link_angle_rate(g[i], state.vel[i], state.vel[i + 1]);
            let rate_left = link_angle_rate(g[i - 1], state.vel[i - 1], state.vel[i]);
            s.rhs[r] = dt * scale * (rate_right - rate_left);
            let mid = [g[i][0] + g[i - 1][0], g[i][1] + g[i - 1][1]];
            let a_ii = (w[i - 1] * dot(g[i - 1], g[i - 1]) + w[i + 1] * dot(g[i], g[i])) + w[i] * dot(mid, mid);
            s.diag[r] = a_ii;
            if r + 1 < m {
                let next = [g[i + 1][0] + g[i][0], g[i + 1][1] + g[i][1]];
                s.off1[r] = -(w[i] * dot(mid, g[i])) - w[i + 1] * dot(g[i], next);
            }
            if r + 2 < m {
                s.off2[r] = w[i + 1] * dot(g[i], g[i + 1]);
            }
        }
        for r in 0..m {
            s.diag[r] = 1.0 + dt * s.scale[r] * s.diag[r] * s.scale[r];
            if r + 1 < m {
                s.off1[r] *= dt * s.scale[r] * s.scale[r + 1];
            }
            if r + 2 < m {
                s.off2[r] *= dt * s.scale[r] * s.scale[r + 2];
            }
        }
        s.solve_symmetric();
        self.torque[0] = 0.0;
        self.torque[n - 1] = 0.0;
        for r in 0..m {
            self.torque[r + 1] = self.damping.scale[r] * self.damping.x[r];
        }
        self.assemble_torques();
        for i in 0..n {
            let wi = self.inv_mass[i];
            state.vel[i][0] += self.force[i][0] * wi;
            state.vel[i][1] += self.force[i][1] * wi;
        }
    }

    /// Jacobi projection of link lengths, mass-weighted so momentum is kept.
    fn project_lengths(&mut self) {
        let n = self.pred.len();
        let nl = n - 1;
        for _ in 0..self.projection_sweeps {
            for j in 0..nl {
                let a = self.pred[j];
                let b = self.pred[j + 1];
                let e = [b[0] - a[0], b[1] - a[1]];
                let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
                let c = (len - self.robot.link_lengths[j]) / len;
                self.pair[j] = [e[0] * c, e[1] * c];
            }
            for i in 0..n {
                let w = self.inv_mass[i];
                let mut d = [0.0; 2];
                if i < nl {
                    let share = w / (w + self.inv_mass[i + 1]);
                    d[0] += share * self.pair[i][0];
                    d[1] += share * self.pair[i][1];
                }
                if i > 0 {
                    let share = w / (self.inv_mass[i - 1] + w);
                    d[0] -= share * self.pair[i - 1][0];
                    d[1] -= share * self.pair[i - 1][1];
                }
                self.force[i] = d;
            }
            for i in 0..n {
                self.pred[i][0] += self.force[i][0];
                self.pred[i][1] += self.force[i][1];
            }
        }
    }

    /// Kinetic + gravitational (zero at the unloaded foot height) + joint elastic
    /// + contact penalty energy, J.
    pub fn total_energy(&self, state: &NodeState) -> f64 {
        total_energy(&self.robot, &self.env, state, &self.rest)
    }
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Solves `v + a·tanh(v / v_reg) = v_in` for `v`; the root lies between 0 and `v_in`.
pub fn implicit_friction(v_in: f64, a: f64, v_reg: f64) -> f64 {
    let target = v_in.abs();
    if target == 0.0 || a == 0.0 {
        return v_in;
    }
    let (mut lo, mut hi) = (0.0_f64, target);
    let mut u = target / (1.0 + a / v_reg);
    for _ in 0..60 {
        let th = (u / v_reg).tanh();
        let g = u + a * th - target;
        if g > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let dg = 1.0 + a * (1.0 - th * th) / v_reg;
        let mut next = u - g / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - u).abs() <= 1e-15 * target {
            u = next;
            break;
        }
        u = next;
    }
    u.copysign(v_in)
}

/// True when the chain is its own mirror image (masses, links, joints, feet).
fn is_mirror_symmetric(robot: &DiscretizedRobot) -> bool {
    fn palindrome(v: &[f64]) -> bool {
        v.iter().eq(v.iter().rev())
    }
    let n = robot.node_count();
    palindrome(&robot.node_masses)
        && palindrome(&robot.link_lengths)
        && palindrome(&robot.joint_stiffness)
        && palindrome(&robot.joint_damping)
        && robot.foot_nodes.iter().all(|f| robot.foot_nodes.contains(&(n - 1 - f)))
}

/// Symmetric pentadiagonal system for the joint damping impulses.
#[derive(Debug, Clone)]
struct DampingSolver {
    diag: Vec<f64>,
    off1: Vec<f64>,
    off2: Vec<f64>,
    rhs: Vec<f64>,
    scale: Vec<f64>,
    x: Vec<f64>,
    rev: [Vec<f64>; 4],
    work: [Vec<f64>; 4],
    symmetric: bool,
}

impl DampingSolver {
    fn new(m: usize, symmetric: bool) -> Self {
        let v = || vec![0.0; m];
        Self {
            diag: v(),
            off1: v(),
            off2: v(),
            rhs: v(),
            scale: v(),
            x: v(),
            rev: [v(), v(), v(), v()],
            work: [v(), v(), v(), v()],
            symmetric,
        }
    }

    /// Solves in natural and reversed order and averages, so that a reversed
    /// (mirrored) system yields the exactly reversed solution.
    fn solve_symmetric(&mut self) {
        let m = self.diag.len();
        if m == 0 {
            return;
        }
        let [d, e1, e2, b] = &mut self.work;
        d.copy_from_slice(&self.diag);
        e1.copy_from_slice(&self.off1);
        e2.copy_from_slice(&self.off2);
        b.copy_from_slice(&self.rhs);
        ldlt_band2(d, e1, e2, b);
        self.x.copy_from_slice(b);
        if !self.symmetric {
            return;
        }

        let [d, e1, e2, b] = &mut self.rev;
        for r in 0..m {
            d[r] = self.diag[m - 1 - r];
            b[r] = self.rhs[m - 1 - r];
            if r + 1 < m {
                e1[r] = self.off1[m - 2 - r];
            }
            if r + 2 < m {
                e2[r] = self.off2[m - 3 - r];
            }
        }
        ldlt_band2(d, e1, e2, b);
        for r in 0..m {
            self.x[r] = 0.5 * (self.x[r] + b[m - 1 - r]);
        }
    }
}

/// In-place LDLᵀ solve of a symmetric matrix with two off-diagonals
/// (`e1[i] = A[i][i+1]`, `e2[i] = A[i][i+2]`); the solution replaces `b`.
fn ldlt_band2(d: &mut [f64], e1: &mut [f64], e2: &mut [f64], b: &mut [f64]) {
    let m = d.len();
    for i in 0..m {
        let mut di = d[i];
        if i >= 1 {
            di -= e1[i - 1] * e1[i - 1] * d[i - 1];
        }
        if i >= 2 {
            di -= e2[i - 2] * e2[i - 2] * d[i - 2];
        }
        d[i] = di;
        if i + 1 < m {
            let mut v = e1[i];
            if i >= 1 {
                v -= e2[i - 1] * d[i - 1] * e1[i - 1];
            }
            e1[i] = v / di;
        }
        if i + 2 < m {
            e2[i] /= di;
        }
    }
    for i in 0..m {
        let mut y = b[i];
        if i >= 1 {
            y -= e1[i - 1] * b[i - 1];
        }
        if i >= 2 {
            y -= e2[i - 2] * b[i - 2];
        }
        b[i] = y;
    }
    for i in 0..m {
        b[i] /= d[i];
    }
    for i in (0..m).rev() {
        let mut x = b[i];
        if i + 1 < m {
            x -= e1[i] * b[i + 1];
        }
        if i + 2 < m {
            x -= e2[i] * b[i + 2];
        }
        b[i] = x;
    }
}

#[inline]
fn link_angle_rate(grad: [f64; 2], va: [f64; 2], vb: [f64; 2]) -> f64 {
    grad[0] * (vb[0] - va[0]) + grad[1] * (vb[1] - va[1])
}

/// See [`Engine::total_energy`]. `rest_angles` holds one entry per node.
pub fn total_energy(robot: &DiscretizedRobot, env: &Environment, state: &NodeState, rest_angles: &[f64]) -> f64 {
    let n = robot.node_count();
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..n {
        let m = robot.node_masses[i];
        let v = state.vel[i];
        kinetic += 0.5 * m * (v[0] * v[0] + v[1] * v[1]);
        potential += m * env.gravity * (state.pos[i][1] - robot.foot_rest_height);
    }
    let mut elastic = 0.0;
    for i in 1..n - 1 {
        let a = sub(state.pos[i], state.pos[i - 1]);
        let b = sub(state.pos[i + 1], state.pos[i]);
        let d = turning_angle(a, b) - rest_angles[i];
        elastic += 0.5 * robot.joint_stiffness[i] * d * d;
    }
    let mut contact = 0.0;
    if env.ground {
        for &node in &robot.foot_nodes {
            let depth = robot.foot_rest_height - state.pos[node][1];
            if depth > 0.0 {
                contact += 0.5 * robot.contact_stiffness * depth * depth;
            }
        }
    }
    kinetic + potential + elastic + contact
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// One step of `state` under per-link rest curvatures, returning the new state.
pub fn step(
    robot: &DiscretizedRobot,
    env: Environment,
    state: &NodeState,
    link_curvature: &[f64],
    dt: f64,
) -> Result<NodeState, SimError> {
    check_dt(robot, dt)?;
    let mut engine = Engine::new(robot.clone(), env);
    engine.set_link_curvatures(link_curvature);
    let mut next = state.clone();
    engine.step(&mut next, dt)?;
    Ok(next)
}

pub fn check_dt(robot: &DiscretizedRobot, dt: f64) -> Result<(), SimError> {
    let dt_max = robot.max_stable_dt();
    if !(dt > 0.0) || dt > dt_max {
        return Err(SimError::StepTooLarge { dt, dt_max });
    }
    Ok(())
}

/// Per-actuator rest curvature produced by `program` at time `t`.
pub fn actuator_curvatures(robot: &DiscretizedRobot, program: &DriveProgram, t: f64) -> Result<Vec<f64>, SimError> {
    let volts = drive_state(program, &robot.actuators, t);
    robot
        .actuators
        .iter()
        .zip(volts)
        .map(|(a, v)| actuated_rest_curvature(a, v).map_err(SimError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_robot, RobotConfig};

    #[test]
    fn turning_angle_sign() {
        // rising then flat: turning clockwise, concave down
        assert!(turning_angle([1.0, 1.0], [1.0, 0.0]) < 0.0);
        assert!(turning_angle([1.0, -1.0], [1.0, 0.0]) > 0.0);
    }

    #[test]
    fn contact_law_is_one_sided() {
        let robot = build_robot(&RobotConfig::bare(), 6).unwrap();
        let above = foot_force(&robot, [0.0, robot.foot_rest_height + 1e-4], [0.0, -1.0]);
        assert_eq!(above.normal_force, 0.0);
        assert!(!above.in_contact);
        let touching = foot_force(&robot, [0.0, robot.foot_rest_height], [0.0, 0.0]);
        assert!(touching.in_contact);
        assert_eq!(touching.normal_force, 0.0);
        let below = foot_force(&robot, [0.0, robot.foot_rest_height - 1e-4], [0.5, 0.3]);
        assert!(below.in_contact);
        assert!((below.normal_force - robot.contact_stiffness * 1e-4).abs() < 1e-12);
        assert!(below.tangential_force < 0.0);
        assert!(below.tangential_force.abs() <= robot.friction_mu * below.normal_force);
    }

    #[test]
    fn oversized_step_is_rejected() {
        let robot = build_robot(&RobotConfig::bare(), 6).unwrap();
        let s = NodeState::flat_rest(&robot);
        let curv = vec![0.0; robot.link_count()];
        assert!(matches!(
            step(&robot, Environment::default(), &s, &curv, 1e-3),
            Err(SimError::StepTooLarge { .. })
        ));
    }

    #[test]
    fn non_finite_state_names_node() {
        let robot = build_robot(&RobotConfig::bare(), 6).unwrap();
        let mut s = NodeState::flat_rest(&robot);
        s.vel[7][1] = f64::NAN;
        let curv = vec![0.0; robot.link_count()];
        match step(&robot, Environment::default(), &s, &curv, 1e-5) {
            Err(SimError::NonFinite { node, .. }) => assert!(node <= 8),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }
}
