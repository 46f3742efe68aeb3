//! Error metrics, summary statistics and the GT-snap evaluation protocol.

use std::fmt;
use std::path::Path;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::liegeom::{rotation_angle_deg, Pose};
use crate::pipeline::{correct_trajectory, Method, MethodConfig};
use crate::trajectory::{snap_to_gt, FrameId, TimestampIndex, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrameError {
    pub timestamp: f64,
    pub index: usize,
    pub trans_cm: f64,
    pub rot_deg: f64,
}

/// Per-frame error of `est` against the nearest GT pose in time.
pub fn frame_errors(est: &[(FrameId, Pose)], gt: &[(FrameId, Pose)], tol: f64) -> Result<Vec<FrameError>> {
    let index = TimestampIndex::new(gt);
    est.iter()
        .map(|(id, pose)| {
            let g = index
                .nearest(id.timestamp, tol)
                .ok_or_else(|| Error::Association(format!("no ground truth within {tol} s of {id}")))?;
            let gt_pose = &gt[g].1;
            Ok(FrameError {
                timestamp: id.timestamp,
                index: id.index,
                trans_cm: (pose.translation - gt_pose.translation).norm() * 100.0,
                rot_deg: rotation_angle_deg(&pose.rotation, &gt_pose.rotation),
            })
        })
        .collect()
}

/// Summary of a sample. `std` is the sample standard deviation (n - 1).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ErrorStats {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Self {
            mean,
            std,
            median,
            min: sorted[0],
            max: sorted[n - 1],
            count: n,
        }
    }
}

/// `mean ± std (median)`
impl fmt::Display for ErrorStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = f.precision().unwrap_or(3);
        write!(f, "{:.p$} ± {:.p$} ({:.p$})", self.mean, self.std, self.median)
    }
}

#[derive(Clone, Debug)]
pub struct MethodReport {
    pub method: Method,
    pub translation_cm: ErrorStats,
    pub rotation_deg: ErrorStats,
    pub errors: Vec<FrameError>,
    pub singular_hits: usize,
    pub degenerate_segments: usize,
    /// Wall time of each segment correction, in milliseconds.
    pub segment_ms: ErrorStats,
    /// Corrected world poses of every frame.
    pub corrected: Vec<(FrameId, Pose)>,
}

/// Snaps keyframes to GT, corrects relative frames with `method` and scores
/// the relative frames against GT.
pub fn run_protocol(
    traj: &Trajectory,
    gt: &[(FrameId, Pose)],
    method: Method,
    cfg: &MethodConfig,
    tol: f64,
    threads: usize,
) -> Result<MethodReport> {
    let updates = snap_to_gt(traj, gt, tol)?;
    let out = correct_trajectory(traj, &updates, method, cfg, threads)?;
    let errors = frame_errors(&out.trajectory.relative_world_poses(), gt, tol)?;
    let trans: Vec<f64> = errors.iter().map(|e| e.trans_cm).collect();
    let rot: Vec<f64> = errors.iter().map(|e| e.rot_deg).collect();
    let ms: Vec<f64> = out.segments.iter().map(|s| s.elapsed.as_secs_f64() * 1e3).collect();
    Ok(MethodReport {
        method,
        translation_cm: ErrorStats::from_values(&trans),
        rotation_deg: ErrorStats::from_values(&rot),
        singular_hits: out.singular_hits(),
        degenerate_segments: out.degenerate_segments(),
        segment_ms: ErrorStats::from_values(&ms),
        corrected: out.trajectory.world_poses(),
        errors,
    })
}

/// Times `f` once per fixture per repetition after one warm-up pass.
/// Returns per-call wall time in milliseconds.
pub fn bench<T>(mut f: impl FnMut(&T), fixtures: &[T], reps: usize) -> ErrorStats {
    for fx in fixtures {
        f(fx);
    }
    let mut ms = Vec::with_capacity(fixtures.len() * reps);
    for _ in 0..reps {
        for fx in fixtures {
            let start = Instant::now();
            f(fx);
            ms.push(duration_ms(start.elapsed()));
        }
    }
    ErrorStats::from_values(&ms)
}

fn duration_ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub sequence: String,
    pub method: String,
    pub t_mean_cm: f64,
    pub t_std_cm: f64,
    pub t_median_cm: f64,
    pub r_mean_deg: f64,
    pub r_std_deg: f64,
    pub r_median_deg: f64,
    pub singular_hits: usize,
    pub time_ms_median: f64,
}

impl ReportRow {
    pub fn new(sequence: &str, report: &MethodReport) -> Self {
        Self {
            sequence: sequence.to_string(),
            method: report.method.name().to_string(),
            t_mean_cm: report.translation_cm.mean,
            t_std_cm: report.translation_cm.std,
            t_median_cm: report.translation_cm.median,
            r_mean_deg: report.rotation_deg.mean,
            r_std_deg: report.rotation_deg.std,
            r_median_deg: report.rotation_deg.median,
            singular_hits: report.singular_hits,
            time_ms_median: report.segment_ms.median,
        }
    }
}

pub fn write_csv<R: Serialize>(path: impl AsRef<Path>, rows: &[R]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liegeom::{Rotation, Vec3};

    fn frames(poses: &[Pose]) -> Vec<(FrameId, Pose)> {
        poses
            .iter()
            .enumerate()
            .map(|(i, p)| (FrameId::new(i as f64 * 0.1, i), *p))
            .collect()
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let gt = frames(&[Pose::identity(), Pose::from_translation(Vec3::new(1.0, 2.0, 3.0))]);
        let errs = frame_errors(&gt, &gt, 0.01).unwrap();
        assert!(errs.iter().all(|e| e.trans_cm == 0.0 && e.rot_deg == 0.0));
    }

    #[test]
    fn one_centimetre_shift() {
        let gt = frames(&[Pose::new(Rotation::about_z(0.4), Vec3::new(3.0, 0.0, 1.0))]);
        let est = frames(&[Pose::new(Rotation::about_z(0.4), Vec3::new(3.01, 0.0, 1.0))]);
        let e = frame_errors(&est, &gt, 0.01).unwrap()[0];
        assert!((e.trans_cm - 1.0).abs() < 1e-9);
        assert!(e.rot_deg < 1e-9);
    }

    #[test]
    fn missing_association_is_named() {
        let gt = frames(&[Pose::identity()]);
        let est = vec![(FrameId::new(5.0, 0), Pose::identity())];
        let err = frame_errors(&est, &gt, 0.01).unwrap_err().to_string();
        assert!(err.contains("t=5"), "{err}");
    }

    #[test]
    fn constant_sample_stats() {
        let s = ErrorStats::from_values(&[2.5; 7]);
        assert_eq!((s.mean, s.std, s.median, s.count), (2.5, 0.0, 2.5, 7));
    }

    #[test]
    fn sample_std_and_even_median() {
        let s = ErrorStats::from_values(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(format!("{s:.2}"), "2.50 ± 1.29 (2.50)");
        assert_eq!(ErrorStats::from_values(&[]).count, 0);
    }

    #[test]
    fn bench_reports_positive_times() {
        let fixtures = vec![1000u64, 2000];
        let s = bench(
            |n| {
                std::hint::black_box((0..*n).sum::<u64>());
            },
            &fixtures,
            5,
        );
        assert_eq!(s.count, 10);
        assert!(s.median > 0.0 && s.median.is_finite());
    }
}
