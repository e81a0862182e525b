//! Acceptance run over the shipped scenarios. Prints one PASS/FAIL line per
//! criterion plus the tables behind them, and exits non-zero on any failure.

mod support;

use std::f64::consts::PI;
use std::time::Instant;

use pzcrawl_core::analysis::{
    contact_timeline, default_transient_cut, detect_subharmonic, detect_subharmonic_after, inchworm_pattern, wave_timing,
};
use pzcrawl_core::experiments::{record_every, rotation_tendency, sweep, traveling_wave_run, SweepOptions, SweepResult, WaveRun};
use pzcrawl_core::trajectory::{save, Frame};
use pzcrawl_core::{simulate, Scenario, Trajectory};
use support::*;

const SWEEP_SECONDS: f64 = 10.0;
const NULL_LIMIT: f64 = 0.05;

struct Report {
    failed: Vec<&'static str>,
}

impl Report {
    fn line(&mut self, name: &'static str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed.push(name);
        }
    }
}

fn band() -> Vec<f64> {
    (1..=30).map(f64::from).collect()
}

fn run_sweep(name: &str, rotation: bool) -> SweepResult {
    let opts = SweepOptions { rotation, ..SweepOptions::new(SWEEP_SECONDS, DT) };
    let start = Instant::now();
    let result = sweep(&shipped(name), &band(), &opts).unwrap();
    println!("  ({name} sweep, {} frequencies, {:.0} s wall)", band().len(), start.elapsed().as_secs_f64());
    result
}

fn speed_at(result: &SweepResult, f: f64) -> f64 {
    result.entries.iter().find(|e| e.frequency == f).map_or(f64::NAN, |e| e.mean_speed)
}

fn synthetic(f_motion: f64) -> Trajectory {
    let dt = 1e-3;
    let frames = (0..=6000)
        .map(|k| {
            let t = k as f64 * dt;
            let z = (2.0 * PI * f_motion * t).sin();
            Frame { t, pos: vec![[0.0, z]], vel: vec![[0.0; 2]], contacts: vec![], drive_on: false, com: [0.0, z] }
        })
        .collect();
    Trajectory { dt_record: dt, node_masses: vec![1.0], fingerprint: 0, frames }
}

fn null_and_reversal(report: &mut Report) {
    let bare = run_sweep("paper_bare", false);
    let worst = bare.max_abs_speed();
    let all_ok = bare.entries.iter().all(|e| e.ok() && e.mean_speed.abs() < NULL_LIMIT);
    report.line(
        "uniform-weight null",
        all_ok,
        format!("max |mean_speed| = {worst:.2e} cm/s over 1..30 Hz (limit {NULL_LIMIT})"),
    );

    let asym = run_sweep("paper_asym", false);
    println!("  freq_hz  bare_cm_s  asym_cm_s  paper_asym_cm_s");
    let paper = [(8.0, "-0.61"), (16.0, "+2.5"), (23.0, "-5.4")];
    for e in &asym.entries {
        let p = paper.iter().find(|(f, _)| *f == e.frequency).map_or("", |(_, v)| v);
        println!("  {:7.1}  {:+9.3}  {:+9.3}  {p:>15}", e.frequency, speed_at(&bare, e.frequency), e.mean_speed);
    }
    let changes = asym.speed_sign_changes();
    let peak = asym.max_abs_speed();
    report.line(
        "asymmetry-induced reversal",
        changes >= 1 && peak > 10.0 * worst && asym.entries.iter().all(|e| e.ok()),
        format!("{changes} sign changes, max |mean_speed| = {peak:.3} cm/s vs bare noise floor {worst:.2e} cm/s"),
    );
}

fn waves(report: &mut Report) {
    let robot = shipped_robot("paper_bare");
    let wave = WaveRun::default();
    let traj = traveling_wave_run(&robot, &wave, DT, 5).unwrap();
    let w = wave_timing(&traj, &robot.foot_nodes, wave.hold).unwrap();
    let frame = traj.dt_record;
    let simultaneous = (w.left_peak - w.right_peak).abs() <= frame
        && match (w.left_liftoff, w.right_liftoff) {
            (Some(a), Some(b)) => (a - b).abs() <= frame,
            (a, b) => a == b,
        };
    report.line(
        "traveling-wave direction",
        w.travels_outward() && simultaneous,
        format!(
            "peak upward velocity: middle {:.4} s, ends {:.4} / {:.4} s after a {:.1} s hold; lift-off middle {:?}, ends {:?} / {:?}",
            w.mid_peak, w.left_peak, w.right_peak, wave.hold, w.mid_liftoff, w.left_liftoff, w.right_liftoff
        ),
    );
}

fn gait(report: &mut Report) {
    let sc = shipped("paper_loaded");
    let f = sc.drive.frequency;
    let cut = default_transient_cut(f);
    let duration = cut + 50.0 * 2.0 / f + 1.0;
    let traj = simulate(&sc.build().unwrap(), &sc.drive, duration, sc.dt, record_every(sc.dt)).unwrap();
    let sub = detect_subharmonic_after(&traj, f, cut);
    let ratio = sub.as_ref().map_or(1, |s| s.ratio);
    let inch = inchworm_pattern(&contact_timeline(&traj), ratio as f64 / f, cut).unwrap();
    report.line(
        "inchworm phase structure",
        inch.holds() && inch.cycles >= 50,
        format!(
            "{f} Hz, {} motion cycles of {ratio} drive periods: right foot on contracting in {:.0}%, left feet on extending in {:.0}%",
            inch.cycles,
            100.0 * inch.right_fraction(),
            100.0 * inch.left_fraction()
        ),
    );

    let f_syn = 11.0;
    let one = detect_subharmonic(&synthetic(f_syn), f_syn).ok().map(|s| s.ratio);
    let two = detect_subharmonic(&synthetic(f_syn / 2.0), f_syn).ok().map(|s| s.ratio);
    report.line(
        "subharmonic",
        matches!(sub, Ok(ref s) if s.ratio == 2) && one == Some(1) && two == Some(2),
        format!("shipped {f} Hz case: {sub:?}; synthetic f and f/2: {one:?}, {two:?}"),
    );
}

fn oracles(report: &mut Report) {
    let bare = shipped_robot("paper_bare");
    let loaded = shipped("paper_loaded");
    let robot = loaded.build().unwrap();
    let ballistic = ballistic_error(&bare).max(ballistic_error(&robot));
    let (w, w0) = three_node_frequency();
    let rise = passive_energy_rise(&robot).max(passive_energy_rise(&bare));
    let px = frictionless_momentum(&robot, loaded.drive.frequency);
    let (a, b) = dt_halving(&robot, loaded.drive.frequency, 5.0);
    let halving = ((a - b) / b).abs();
    let freq_err = (w / w0 - 1.0).abs();
    report.line(
        "numerical oracles",
        ballistic < 1e-3 && freq_err < 0.02 && rise <= 1e-9 && px < 1e-9 && halving < 0.05,
        format!(
            "ballistic {ballistic:.1e}, chain frequency {:.2}%, largest energy rise {rise:.1e} of E0, |p_x| {px:.1e} kg m/s, dt halving {:.2}% ({:.3} vs {:.3} cm)",
            100.0 * freq_err,
            100.0 * halving,
            100.0 * a,
            100.0 * b
        ),
    );
}

fn rotation(report: &mut Report) {
    let bare = shipped("paper_bare");
    let symmetric_zero = [5.0, 11.0, 23.0].iter().all(|&f| rotation_tendency(&bare, f, 4.0).unwrap().sign == 0);

    let loaded = shipped("paper_loaded");
    let result = run_sweep("paper_loaded", true);
    println!("  freq_hz  loaded_cm_s  rotation");
    for e in &result.entries {
        println!("  {:7.1}  {:+11.3}  {:+8}", e.frequency, e.mean_speed, e.rotation_tendency.unwrap_or(0));
    }
    let changes = result.rotation_sign_changes();

    let flipped = Scenario { robot: loaded.robot.flipped_widthwise(), ..loaded.clone() };
    let mirrored = Scenario { robot: loaded.robot.mirrored(), ..loaded.clone() };
    let mut antisymmetric = true;
    let mut checked = 0;
    for f in [11.0, 23.0] {
        let r = rotation_tendency(&loaded, f, 6.0).unwrap();
        let flip = rotation_tendency(&flipped, f, 6.0).unwrap();
        antisymmetric &= flip.sign == -r.sign && flip.v_front == r.v_back && flip.v_back == r.v_front;
        if r.sign != 0 {
            let m = rotation_tendency(&mirrored, f, 6.0).unwrap();
            antisymmetric &= m.sign == -r.sign;
            checked += 1;
        }
    }
    let at = |f: f64| result.entries.iter().find(|e| e.frequency == f).and_then(|e| e.rotation_tendency);
    report.line(
        "rotation heuristic",
        symmetric_zero && antisymmetric && changes >= 1,
        format!(
            "symmetric zero {symmetric_zero}, antisymmetric {antisymmetric} ({checked} length-mirror checks), {changes} sign changes over 1..30 Hz; sign at 11 Hz {:?} (paper +1), 23 Hz {:?} (paper -1)",
            at(11.0),
            at(23.0)
        ),
    );
}

fn determinism(report: &mut Report) {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    for name in ["paper_bare", "paper_asym", "paper_loaded"] {
        let sc = shipped(name);
        let robot = sc.build().unwrap();
        let mut bytes = Vec::new();
        for run in 0..2 {
            let traj = simulate(&robot, &sc.drive, 2.0, sc.dt, record_every(sc.dt)).unwrap();
            let path = dir.path().join(format!("{name}-{run}.pz"));
            save(&traj, &path).unwrap();
            bytes.push(std::fs::read(&path).unwrap());
        }
        identical &= bytes[0] == bytes[1];
    }
    report.line("determinism", identical, "two 2 s runs of each shipped scenario give byte-identical files".into());
}

fn main() {
    let start = Instant::now();
    let mut report = Report { failed: Vec::new() };
    null_and_reversal(&mut report);
    waves(&mut report);
    gait(&mut report);
    oracles(&mut report);
    rotation(&mut report);
    determinism(&mut report);
    println!("acceptance finished in {:.0} s", start.elapsed().as_secs_f64());
    if !report.failed.is_empty() {
        eprintln!("failed: {}", report.failed.join(", "));
        std::process::exit(1);
    }
}
