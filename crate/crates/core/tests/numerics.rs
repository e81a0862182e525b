mod support;

use pzcrawl_core::dynamics::{Engine, Environment, NodeState};
use pzcrawl_core::experiments::record_every;
use pzcrawl_core::trajectory::{read_binary, write_binary};
use pzcrawl_core::{build_robot, simulate, DriveProgram, RobotConfig};
use support::*;

#[test]
fn ballistic_flight_follows_the_parabola() {
    for name in ["paper_bare", "paper_loaded"] {
        let err = ballistic_error(&shipped_robot(name));
        assert!(err < 1e-3, "{name}: relative COM error {err}");
    }
}

#[test]
fn three_node_chain_rings_at_the_analytic_frequency() {
    let (measured, analytic) = three_node_frequency();
    assert!((measured / analytic - 1.0).abs() < 0.02, "measured {measured} rad/s, analytic {analytic} rad/s");
}

#[test]
fn passive_drop_never_gains_energy() {
    for name in ["paper_bare", "paper_loaded"] {
        let rise = passive_energy_rise(&shipped_robot(name));
        assert!(rise <= 1e-9, "{name}: energy rose by {rise} of its initial value");
    }
}

#[test]
fn frictionless_ground_conserves_horizontal_momentum() {
    let p = frictionless_momentum(&shipped_robot("paper_loaded"), 10.0);
    assert!(p < 1e-9, "|p_x| reached {p} kg m/s");
}

#[test]
fn halving_the_step_barely_moves_the_result() {
    let sc = shipped("paper_loaded");
    let (a, b) = dt_halving(&sc.build().unwrap(), sc.drive.frequency, 5.0);
    assert!(a > 0.0);
    assert!(((a - b) / b).abs() < 0.05, "5 s displacement {a} m at dt, {b} m at dt/2");
}

#[test]
fn zero_voltage_does_not_move_the_strip() {
    for name in ["paper_bare", "paper_asym", "paper_loaded"] {
        let robot = shipped_robot(name);
        let program = DriveProgram::all_on(10.0).with_voltage_fraction(0.0);
        let traj = simulate(&robot, &program, 5.0, DT, 50).unwrap();
        let d = traj.displacement();
        assert!(d.abs() < 1e-6, "{name}: moved {d} m");
    }
}

#[test]
fn flat_strip_stays_at_rest() {
    let robot = shipped_robot("paper_bare");
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let mut state = NodeState::flat_rest(&robot);
    for _ in 0..50_000 {
        engine.step(&mut state, DT).unwrap();
    }
    assert!(state.max_speed() < 1e-4, "{} m/s", state.max_speed());
}

#[test]
fn settled_strip_carries_its_weight_on_the_feet() {
    let robot = shipped_robot("paper_loaded");
    let mut engine = Engine::new(robot.clone(), Environment::default());
    let mut state = NodeState::flat_rest(&robot);
    for _ in 0..100_000 {
        engine.step(&mut state, DT).unwrap();
    }
    let sample = pzcrawl_core::dynamics::contact_sample(&robot, engine.environment(), &state);
    let support: f64 = sample.iter().map(|c| c.normal_force).sum();
    let weight = robot.total_mass() * engine.environment().gravity;
    assert!((support / weight - 1.0).abs() < 1e-3, "feet carry {support} N of {weight} N");
    assert!(state.max_speed() < 1e-6);
}

#[test]
fn static_sag_converges_under_refinement() {
    let robot_at = |links: usize| {
        let mut cfg = shipped("paper_bare").robot;
        cfg.mass_profile = RobotConfig::bare().mass_profile;
        build_robot(&cfg, links).unwrap()
    };
    let max_sag = |links: usize| {
        let robot = robot_at(links);
        let mut engine = Engine::new(robot.clone(), Environment::default());
        let mut state = NodeState::flat_rest(&robot);
        let dt = robot.max_stable_dt().min(DT);
        for _ in 0..(2.0 / dt) as usize {
            engine.step(&mut state, dt).unwrap();
        }
        state.pos.iter().map(|p| (p[1] - robot.foot_rest_height).abs()).fold(0.0, f64::max)
    };
    approx::assert_relative_eq!(robot_at(12).total_mass(), robot_at(24).total_mass(), max_relative = 1e-12);
    let (coarse, fine) = (max_sag(12), max_sag(24));
    assert!(coarse > 0.0);
    assert!(((coarse - fine) / fine).abs() < 0.02, "max deflection {coarse} m at 12 links, {fine} m at 24");
}

#[test]
fn repeated_runs_write_identical_bytes() {
    for name in ["paper_bare", "paper_asym", "paper_loaded"] {
        let sc = shipped(name);
        let robot = sc.build().unwrap();
        let bytes = || {
            let traj = simulate(&robot, &sc.drive, 1.0, sc.dt, record_every(sc.dt)).unwrap();
            let mut out = Vec::new();
            write_binary(&traj, &mut out).unwrap();
            out
        };
        let a = bytes();
        assert_eq!(a, bytes(), "{name}");
        let back = read_binary(a.as_slice()).unwrap();
        assert_eq!(back.frames.len(), 1001);
    }
}
