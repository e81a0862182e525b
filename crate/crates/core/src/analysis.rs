//! Observables extracted from recorded trajectories.

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::trajectory::{Frame, Trajectory};

/// Default transient cut: the larger of 2 s and ten drive periods.
pub fn default_transient_cut(frequency: f64) -> f64 {
    (10.0 / frequency).max(2.0)
}

/// Transient cut used by sweeps: the default rule, shortened when needed so the
/// measurement window still holds six drive periods.
pub fn sweep_transient_cut(frequency: f64, duration: f64) -> f64 {
    default_transient_cut(frequency).min(duration - 6.0 / frequency).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// cm/s
    pub mean_speed: f64,
    /// cm/s
    pub stderr: f64,
}

/// Drive period recovered from the recorded on/off flags (mean spacing of
/// rising edges), if the run was driven at all.
pub fn drive_period(traj: &Trajectory) -> Option<f64> {
    let rises: Vec<f64> = traj
        .frames
        .windows(2)
        .filter(|w| !w[0].drive_on && w[1].drive_on)
        .map(|w| w[1].t)
        .collect();
    if rises.len() < 2 {
        return None;
    }
    Some((rises[rises.len() - 1] - rises[0]) / (rises.len() - 1) as f64)
}

/// Least-squares slope of COM x against t after `transient_cut`, in cm/s.
pub fn measure_speed(traj: &Trajectory, transient_cut: f64) -> Result<SpeedEstimate, AnalysisError> {
    let t0 = traj.frames.first().map_or(0.0, |f| f.t);
    let need = transient_cut + 5.0 * drive_period(traj).unwrap_or(0.0);
    let have = traj.duration();
    let window: Vec<&Frame> = traj.frames.iter().filter(|f| f.t - t0 >= transient_cut).collect();
    if have <= need || window.len() < 3 {
        return Err(AnalysisError::TooShort { have, need });
    }
    let (slope, stderr) = linear_fit(window.iter().map(|f| (f.t, f.com[0])));
    Ok(SpeedEstimate { mean_speed: slope * 100.0, stderr: stderr * 100.0 })
}

/// Slope and its standard error for an ordinary least-squares line.
fn linear_fit(points: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let n = points.clone().count() as f64;
    let (st, sy) = points.clone().fold((0.0, 0.0), |(a, b), (t, y)| (a + t, b + y));
    let (mt, my) = (st / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (t, y) in points.clone() {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (y - my);
    }
    let slope = sxy / sxx;
    let ssr: f64 = points.map(|(t, y)| (y - my - slope * (t - mt)).powi(2)).sum();
    let stderr = if n > 2.0 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, stderr)
}

// ---------------------------------------------------------------------------
// Contact timeline

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivePhase {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strain {
    Contracting,
    Extending,
}

/// Half-open span `[t_start, t_end)` carrying one tag value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span<T> {
    pub t_start: f64,
    pub t_end: f64,
    pub tag: T,
}

/// One uninterrupted ground contact of one foot.
///
/// `drive` and `strain` are the tags covering the larger share of the
/// interval; the exact overlaps are kept alongside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactInterval {
    pub t_on: f64,
    pub t_off: f64,
    pub drive: DrivePhase,
    pub strain: Strain,
    /// s of this interval spent with the drive on.
    pub on_time: f64,
    /// s of this interval spent with the midsection contracting.
    pub contracting_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactTimeline {
    pub t_start: f64,
    pub t_end: f64,
    /// Indexed by foot, left to right.
    pub feet: Vec<Vec<ContactInterval>>,
    pub drive: Vec<Span<DrivePhase>>,
    pub strain: Vec<Span<Strain>>,
}

/// Nodes bounding the middle actuator, found from the chain layout.
fn midsection_nodes(node_count: usize) -> (usize, usize) {
    let links = node_count - 1;
    (2 * links / 5, 3 * links / 5)
}

fn chord(frame: &Frame, a: usize, b: usize) -> f64 {
    let (p, q) = (frame.pos[a], frame.pos[b]);
    ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt()
}

/// Groups consecutive frames with equal tags; frame k covers `[t_k, t_k + dt)`.
fn spans<T: Copy + PartialEq>(times: &[f64], dt: f64, tags: &[T]) -> Vec<Span<T>> {
    let mut out: Vec<Span<T>> = Vec::new();
    for (k, (&t, &tag)) in times.iter().zip(tags).enumerate() {
        let end = times.get(k + 1).copied().unwrap_or(t + dt);
        match out.last_mut() {
            Some(s) if s.tag == tag => s.t_end = end,
            _ => out.push(Span { t_start: t, t_end: end, tag }),
        }
    }
    out
}

fn overlap<T: Copy + PartialEq>(spans: &[Span<T>], tag: T, a: f64, b: f64) -> f64 {
    // Spans are sorted; skip ahead with a binary search.
    let first = spans.partition_point(|s| s.t_end <= a);
    spans[first..]
        .iter()
        .take_while(|s| s.t_start < b)
        .filter(|s| s.tag == tag)
        .map(|s| s.t_end.min(b) - s.t_start.max(a))
        .filter(|d| *d > 0.0)
        .sum()
}

/// Per-foot contact intervals tagged with drive phase and midsection strain.
///
/// Strain is the sign of the rate of change of the straight-line distance
/// between the two nodes bounding the middle actuator (central difference).
pub fn contact_timeline(traj: &Trajectory) -> ContactTimeline {
    let frames = &traj.frames;
    let times: Vec<f64> = frames.iter().map(|f| f.t).collect();
    let dt = traj.dt_record;
    let (t_start, t_end) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b + dt),
        _ => (0.0, 0.0),
    };
    let drive_tags: Vec<DrivePhase> =
        frames.iter().map(|f| if f.drive_on { DrivePhase::On } else { DrivePhase::Off }).collect();
    let strain_tags: Vec<Strain> = if frames.len() < 2 {
        vec![Strain::Extending; frames.len()]
    } else {
        let (a, b) = midsection_nodes(traj.node_count());
        let c: Vec<f64> = frames.iter().map(|f| chord(f, a, b)).collect();
        (0..c.len())
            .map(|k| {
                let rate = c[(k + 1).min(c.len() - 1)] - c[k.saturating_sub(1)];
                if rate < 0.0 {
                    Strain::Contracting
                } else {
                    Strain::Extending
                }
            })
            .collect()
    };
    let drive = spans(&times, dt, &drive_tags);
    let strain = spans(&times, dt, &strain_tags);

    let feet = (0..traj.foot_count())
        .map(|k| {
            let flags: Vec<bool> = frames.iter().map(|f| f.contacts[k].in_contact).collect();
            spans(&times, dt, &flags)
                .into_iter()
                .filter(|s| s.tag)
                .map(|s| {
                    let len = s.t_end - s.t_start;
                    let on_time = overlap(&drive, DrivePhase::On, s.t_start, s.t_end);
                    let contracting_time = overlap(&strain, Strain::Contracting, s.t_start, s.t_end);
                    ContactInterval {
                        t_on: s.t_start,
                        t_off: s.t_end,
                        drive: if on_time * 2.0 > len { DrivePhase::On } else { DrivePhase::Off },
                        strain: if contracting_time * 2.0 > len { Strain::Contracting } else { Strain::Extending },
                        on_time,
                        contracting_time,
                    }
                })
                .collect()
        })
        .collect();
    ContactTimeline { t_start, t_end, feet, drive, strain }
}

impl ContactTimeline {
    /// Contact time of `foot` inside `[a, b)` split into (contracting, extending).
    pub fn strain_split(&self, foot: usize, a: f64, b: f64) -> (f64, f64) {
        let mut split = (0.0, 0.0);
        for iv in &self.feet[foot] {
            let (lo, hi) = (iv.t_on.max(a), iv.t_off.min(b));
            if hi <= lo {
                continue;
            }
            let c = overlap(&self.strain, Strain::Contracting, lo, hi);
            split.0 += c;
            split.1 += (hi - lo) - c;
        }
        split
    }
}

/// Per-cycle check of the inchworm ordering: the rightmost foot grips while
/// the body contracts and the left-side feet grip while it extends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InchwormReport {
    pub cycles: usize,
    /// Cycles whose rightmost-foot contact overlaps contracting more than extending.
    pub right_contracting: usize,
    /// Cycles whose left-side contact overlaps extending more than contracting.
    pub left_extending: usize,
}

impl InchwormReport {
    pub fn right_fraction(&self) -> f64 {
        self.right_contracting as f64 / self.cycles.max(1) as f64
    }

    pub fn left_fraction(&self) -> f64 {
        self.left_extending as f64 / self.cycles.max(1) as f64
    }

    pub fn holds(&self) -> bool {
        2 * self.right_contracting > self.cycles && 2 * self.left_extending > self.cycles
    }
}

/// Evaluates the inchworm ordering over whole motion cycles after
/// `transient_cut`. `cycle` is the motion period in s: one drive period for a
/// gait locked to the drive, `n / f` for a period-n gait.
/// "Left side" is the two leftmost feet taken together.
pub fn inchworm_pattern(
    timeline: &ContactTimeline,
    cycle: f64,
    transient_cut: f64,
) -> Result<InchwormReport, AnalysisError> {
    let nf = timeline.feet.len();
    if nf < 3 {
        return Err(AnalysisError::NoFeet);
    }
    let period = cycle;
    let first = ((timeline.t_start + transient_cut) / period).ceil() as i64;
    let last = (timeline.t_end / period).floor() as i64;
    let mut report = InchwormReport { cycles: 0, right_contracting: 0, left_extending: 0 };
    for k in first..last {
        let (a, b) = (k as f64 * period, (k + 1) as f64 * period);
        let right = timeline.strain_split(nf - 1, a, b);
        let l0 = timeline.strain_split(0, a, b);
        let l1 = timeline.strain_split(1, a, b);
        report.cycles += 1;
        if right.0 > right.1 {
            report.right_contracting += 1;
        }
        if l0.1 + l1.1 > l0.0 + l1.0 {
            report.left_extending += 1;
        }
    }
    if report.cycles == 0 {
        return Err(AnalysisError::TooShort { have: timeline.t_end - timeline.t_start, need: transient_cut + period });
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Subharmonic detection

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subharmonic {
    /// Dominant COM z period over the drive period, snapped to 1, 2 or 3.
    pub ratio: u32,
    /// Unsnapped ratio.
    pub raw_ratio: f64,
    /// Share of the oscillation power carried by the dominant line, in [0, 1].
    pub confidence: f64,
}

/// Minimum number of drive periods required after the transient.
pub const SUBHARMONIC_MIN_PERIODS: f64 = 20.0;

/// Dominant period of COM z after the default transient cut.
pub fn detect_subharmonic(traj: &Trajectory, f_drive: f64) -> Result<Subharmonic, AnalysisError> {
    detect_subharmonic_after(traj, f_drive, default_transient_cut(f_drive))
}

/// The signal is analysed over a whole number of six-period blocks, so every
/// line at a multiple of f/6 is leakage-free. The dominant line among those up
/// to 4f gives the period; a flat spectrum (dominant line under ten times the
/// mean line power) is rejected.
pub fn detect_subharmonic_after(
    traj: &Trajectory,
    f_drive: f64,
    transient_cut: f64,
) -> Result<Subharmonic, AnalysisError> {
    let period = 1.0 / f_drive;
    let t_first = traj.frames.first().map_or(0.0, |f| f.t);
    let start = t_first + transient_cut;
    let available = traj.duration() - transient_cut;
    if available < SUBHARMONIC_MIN_PERIODS * period {
        return Err(AnalysisError::TooShort {
            have: traj.duration(),
            need: transient_cut + SUBHARMONIC_MIN_PERIODS * period,
        });
    }
    let blocks = (available / (6.0 * period) + 1e-9).floor();
    let end = start + blocks * 6.0 * period;
    let samples: Vec<(f64, f64)> = traj
        .frames
        .iter()
        .filter(|f| f.t >= start - 1e-12 && f.t < end - 1e-12)
        .map(|f| (f.t - start, f.com[1]))
        .collect();
    let mean = samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64;
    let lines = 24;
    let power: Vec<f64> = (1..=lines)
        .map(|j| line_power(&samples, mean, j as f64 * f_drive / 6.0))
        .collect();
    let total: f64 = power.iter().sum();
    let (best, &p_best) = power
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty spectrum");
    if !(total > 0.0) || p_best < 10.0 * total / lines as f64 {
        return Err(AnalysisError::NoDominantPeriod);
    }
    let raw_ratio = 6.0 / (best + 1) as f64;
    let ratio = [1u32, 2, 3]
        .into_iter()
        .min_by(|a, b| (*a as f64 - raw_ratio).abs().total_cmp(&(*b as f64 - raw_ratio).abs()))
        .expect("candidates");
    Ok(Subharmonic { ratio, raw_ratio, confidence: p_best / total })
}

fn line_power(samples: &[(f64, f64)], mean: f64, freq: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * freq;
    let (mut c, mut s) = (0.0, 0.0);
    for &(t, y) in samples {
        let (sn, cs) = (w * t).sin_cos();
        c += (y - mean) * cs;
        s += (y - mean) * sn;
    }
    c * c + s * s
}

// ---------------------------------------------------------------------------
// Traveling waves

/// Timing of the outward wave after the midsection is released.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveTiming {
    pub release: f64,
    /// Time of peak upward velocity at the middle foot node.
    pub mid_peak: f64,
    pub left_peak: f64,
    pub right_peak: f64,
    /// First frame after release at which the foot leaves the ground, having
    /// been in contact on the frame before.
    pub left_liftoff: Option<f64>,
    pub right_liftoff: Option<f64>,
    pub mid_liftoff: Option<f64>,
}

impl WaveTiming {
    /// Both ends peak strictly after the middle.
    pub fn travels_outward(&self) -> bool {
        self.left_peak > self.mid_peak && self.right_peak > self.mid_peak
    }
}

/// Measures wave timing at the outer and middle feet after `release`.
pub fn wave_timing(traj: &Trajectory, foot_nodes: &[usize], release: f64) -> Result<WaveTiming, AnalysisError> {
    if foot_nodes.len() < 3 {
        return Err(AnalysisError::NoFeet);
    }
    let after: Vec<&Frame> = traj.frames.iter().filter(|f| f.t > release).collect();
    if after.len() < 3 {
        return Err(AnalysisError::TooShort { have: traj.duration(), need: release });
    }
    let nf = foot_nodes.len();
    let peak = |node: usize| {
        after
            .iter()
            .max_by(|a, b| a.vel[node][1].total_cmp(&b.vel[node][1]))
            .map(|f| f.t)
            .expect("non-empty")
    };
    let liftoff = |foot: usize| {
        after
            .windows(2)
            .find(|w| w[0].contacts[foot].in_contact && !w[1].contacts[foot].in_contact)
            .map(|w| w[1].t)
    };
    Ok(WaveTiming {
        release,
        mid_peak: peak(foot_nodes[nf / 2]),
        left_peak: peak(foot_nodes[0]),
        right_peak: peak(foot_nodes[nf - 1]),
        left_liftoff: liftoff(0),
        right_liftoff: liftoff(nf - 1),
        mid_liftoff: liftoff(nf / 2),
    })
}
