use pzcrawl_core::analysis::measure_speed;
use pzcrawl_core::dynamics::FootContact;
use pzcrawl_core::model::{
    actuated_rest_curvature, drive_state, total_mass, ActuatorKind, ActuatorSpec, MassProfile, MassSegment, PointMass,
};
use pzcrawl_core::trajectory::{read_binary, write_binary, Frame};
use pzcrawl_core::{build_robot, DriveProgram, RobotConfig, Scenario, Trajectory};
use proptest::prelude::*;

fn drifting(x: impl Fn(f64) -> f64, on_every: usize) -> Trajectory {
    let dt = 1e-3;
    let frames = (0..=8000)
        .map(|k| {
            let t = k as f64 * dt;
            Frame {
                t,
                pos: vec![[x(t), 0.0]],
                vel: vec![[0.0; 2]],
                contacts: vec![],
                drive_on: (k / on_every) % 2 == 0,
                com: [x(t), 0.0],
            }
        })
        .collect();
    Trajectory { dt_record: dt, node_masses: vec![1.0], fingerprint: 0, frames }
}

fn profile() -> impl Strategy<Value = MassProfile> {
    (prop::collection::vec((0.01..0.3f64, 0.0..1.0f64), 1..6), prop::collection::vec((0.0..0.5f64, 0.0..0.02f64), 0..4))
        .prop_map(|(widths, points)| {
            // Contiguous segments scaled to cover [0, 0.5].
            let total: f64 = widths.iter().map(|w| w.0).sum();
            let mut x = 0.0;
            let segments = widths
                .iter()
                .map(|&(w, d)| {
                    let end = (x + 0.5 * w / total).min(0.5);
                    let s = MassSegment::new(x, end, 0.01 + 0.3 * d);
                    x = end;
                    s
                })
                .collect();
            MassProfile { segments, point_masses: points.into_iter().map(|(x, m)| PointMass::new(x, m)).collect() }
        })
}

proptest! {
    #[test]
    fn drive_signal_is_exactly_periodic(t in 0.0..50.0f64, k in 1u32..1000, f in 0.5..40.0f64, duty in 0.05..0.95f64) {
        let actuators = RobotConfig::bare().actuators;
        let program = DriveProgram { duty, ..DriveProgram::all_on(f) };
        let later = t + k as f64 / f;
        // Skip the measure-zero set where rounding straddles a switching edge.
        let phase = (t * f).rem_euclid(1.0);
        prop_assume!((phase - duty).abs() > 1e-9 && phase > 1e-9 && phase < 1.0 - 1e-9);
        prop_assert_eq!(drive_state(&program, &actuators, t), drive_state(&program, &actuators, later));
    }

    #[test]
    fn rest_curvature_is_linear_and_odd(v1 in 0.0..150.0f64, v2 in 0.0..150.0f64, kappa in 0.1..5.0f64) {
        let up = ActuatorSpec::d31(0.1, kappa);
        let down = ActuatorSpec { kind: ActuatorKind::D33, ..up.clone() };
        let k = |a: &ActuatorSpec, v: f64| actuated_rest_curvature(a, v).unwrap();
        let sum = k(&up, v1) + k(&up, v2);
        prop_assert!((sum - k(&up, v1 + v2)).abs() <= 1e-12 * kappa);
        prop_assert_eq!(k(&down, v1), -k(&up, v1));
    }

    #[test]
    fn speed_is_affine_equivariant(a in 0.0..0.01f64, w in 1.0..40.0f64, shift in -1.0..1.0f64, v in -0.05..0.05f64) {
        let wobble = move |t: f64| a * (w * t).sin();
        let base = measure_speed(&drifting(wobble, 50), 2.0).unwrap().mean_speed;
        let shifted = measure_speed(&drifting(move |t| wobble(t) + shift, 50), 2.0).unwrap().mean_speed;
        let driven = measure_speed(&drifting(move |t| wobble(t) + v * t, 50), 2.0).unwrap().mean_speed;
        prop_assert!((shifted - base).abs() < 1e-9);
        prop_assert!((driven - base - 100.0 * v).abs() < 1e-9);
    }

    #[test]
    fn binary_trajectories_round_trip(
        nodes in 2usize..6,
        frames in prop::collection::vec((any::<bool>(), prop::collection::vec(-1.0..1.0f64, 12)), 1..20),
    ) {
        let traj = Trajectory {
            dt_record: 1e-3,
            node_masses: (0..nodes).map(|i| 1e-3 * (i + 1) as f64).collect(),
            fingerprint: 0xdead_beef,
            frames: frames
                .iter()
                .enumerate()
                .map(|(k, (on, xs))| Frame {
                    t: k as f64 * 1e-3,
                    pos: (0..nodes).map(|i| [xs[i], xs[i + 1]]).collect(),
                    vel: (0..nodes).map(|i| [xs[i + 2], -xs[i]]).collect(),
                    contacts: vec![FootContact { normal_force: xs[0].abs(), tangential_force: xs[1], in_contact: *on, foot_height: xs[2] }],
                    drive_on: *on,
                    com: [xs[10], xs[11]],
                })
                .collect(),
        };
        let mut bytes = Vec::new();
        write_binary(&traj, &mut bytes).unwrap();
        prop_assert_eq!(read_binary(bytes.as_slice()).unwrap(), traj);
    }

    #[test]
    fn discretization_conserves_mass(profile in profile(), links in 2usize..13) {
        let cfg = RobotConfig { mass_profile: profile, ..RobotConfig::bare() };
        let robot = build_robot(&cfg, links).unwrap();
        let expect = total_mass(&cfg.mass_profile);
        prop_assert!((robot.total_mass() - expect).abs() <= 1e-9 * expect);
        let mut feet = robot.foot_nodes.clone();
        feet.dedup();
        prop_assert_eq!(feet.len(), 5);
    }

    #[test]
    fn scenario_files_round_trip(profile in profile(), f in 0.5..40.0f64, duty in 0.1..0.9f64, ei in 0.01..0.2f64) {
        let mut sc = Scenario::new(RobotConfig { mass_profile: profile, bending_stiffness: ei, ..RobotConfig::bare() });
        sc.drive = DriveProgram { duty, ..DriveProgram::all_on(f) };
        let back = Scenario::parse(&sc.to_cfg_string()).unwrap();
        prop_assert_eq!(back, sc);
    }
}
