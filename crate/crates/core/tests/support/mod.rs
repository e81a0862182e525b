//! Oracle measurements shared by the numerical tests and the acceptance run.
#![allow(dead_code)]

use pzcrawl_core::dynamics::{Engine, Environment, NodeState};
use pzcrawl_core::model::{ActuatorSpec, MassProfile};
use pzcrawl_core::{build_robot, simulate, DiscretizedRobot, DriveProgram, RobotConfig, Scenario};

pub const DT: f64 = 2e-5;

pub fn shipped(name: &str) -> Scenario {
    let path = format!("{}/../../configs/{name}.cfg", env!("CARGO_MANIFEST_DIR"));
    Scenario::load(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn shipped_robot(name: &str) -> DiscretizedRobot {
    shipped(name).build().unwrap()
}

/// Relative COM error of a free-flying strip against the parabola after 0.3 s.
pub fn ballistic_error(robot: &DiscretizedRobot) -> f64 {
    let mut engine = Engine::new(robot.clone(), Environment::free_fall());
    let mut state = NodeState::flat_rest(robot);
    let v0 = [0.12, 0.9];
    for v in &mut state.vel {
        *v = v0;
    }
    let c0 = state.com(&robot.node_masses);
    let steps = 15_000;
    for _ in 0..steps {
        engine.step(&mut state, DT).unwrap();
    }
    let t = steps as f64 * DT;
    let c = state.com(&robot.node_masses);
    let expect = [c0[0] + v0[0] * t, c0[1] + v0[1] * t - 0.5 * engine.environment().gravity * t * t];
    let travel = (expect[0] - c0[0]).hypot(expect[1] - c0[1]);
    (c[0] - expect[0]).hypot(c[1] - expect[1]) / travel
}

/// Two equal links, undamped and weightless: measured and analytic angular
/// frequency of the bending mode, rad/s.
pub fn three_node_frequency() -> (f64, f64) {
    let mut cfg = RobotConfig::bare();
    cfg.total_length = 0.1;
    cfg.actuators = vec![ActuatorSpec::d31(0.1, 1.0)];
    cfg.foot_positions = vec![0.05];
    cfg.mass_profile = MassProfile::uniform(0.1, 0.004);
    let mut robot = build_robot(&cfg, 2).unwrap();
    robot.joint_damping.iter_mut().for_each(|c| *c = 0.0);
    assert_eq!(robot.node_count(), 3);
    let (m, big_m) = (robot.node_masses[0], robot.node_masses[1]);
    let (k, l) = (robot.joint_stiffness[1], robot.link_lengths[0]);
    let analytic = (k / (l * l) * (2.0 / m + 4.0 / big_m)).sqrt();

    let mut engine = Engine::new(robot.clone(), Environment::weightless());
    let mut state = NodeState::flat_rest(&robot);
    // Small symmetric kick with zero net momentum.
    let v = 1e-4;
    state.vel[1][1] = v;
    state.vel[0][1] = -v * big_m / (2.0 * m);
    state.vel[2][1] = state.vel[0][1];
    let dt = 1e-6;
    let bend = |s: &NodeState| s.pos[1][1] - 0.5 * (s.pos[0][1] + s.pos[2][1]);
    let mut crossings = Vec::new();
    let mut prev = bend(&state);
    let mut t = 0.0;
    while crossings.len() < 11 {
        engine.step(&mut state, dt).unwrap();
        t += dt;
        let now = bend(&state);
        if prev > 0.0 && now <= 0.0 {
            crossings.push(t - dt * now / (now - prev));
        }
        prev = now;
    }
    let period = (crossings[10] - crossings[0]) / 10.0;
    (2.0 * std::f64::consts::PI / period, analytic)
}

/// Largest rise in total energy between recorded samples, relative to the
/// starting energy, for a strip dropped 1 cm with the drive off.
pub fn passive_energy_rise(robot: &DiscretizedRobot) -> f64 {
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let mut state = NodeState::flat_rest(robot);
    for p in &mut state.pos {
        p[1] += 0.01;
    }
    let e0 = engine.total_energy(&state);
    let mut prev = e0;
    let mut worst: f64 = 0.0;
    for k in 1..=50_000 {
        engine.step(&mut state, DT).unwrap();
        if k % 50 == 0 {
            let e = engine.total_energy(&state);
            worst = worst.max(e - prev);
            prev = e;
        }
    }
    worst / e0.abs()
}

/// Largest |p_x| while the strip is driven on a frictionless ground, kg m/s.
pub fn frictionless_momentum(robot: &DiscretizedRobot, frequency: f64) -> f64 {
    let mut robot = robot.clone();
    robot.friction_mu = 0.0;
    let program = DriveProgram::all_on(frequency);
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let mut state = NodeState::flat_rest(&robot);
    let mut worst: f64 = 0.0;
    for k in 0..100_000 {
        let t = k as f64 * DT;
        let kappa = pzcrawl_core::dynamics::actuator_curvatures(&robot, &program, t).unwrap();
        engine.set_actuator_curvatures(&kappa);
        state.t = t;
        engine.step(&mut state, DT).unwrap();
        worst = worst.max(state.momentum(&robot.node_masses)[0].abs());
    }
    worst
}

/// COM displacement over `duration` at steps `DT` and `DT / 2`, m.
pub fn dt_halving(robot: &DiscretizedRobot, frequency: f64, duration: f64) -> (f64, f64) {
    let program = DriveProgram::all_on(frequency);
    let a = simulate(robot, &program, duration, DT, 50).unwrap().displacement();
    let b = simulate(robot, &program, duration, DT / 2.0, 100).unwrap().displacement();
    (a, b)
}
