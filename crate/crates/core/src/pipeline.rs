//! Whole-trajectory driver: applies keyframe updates and corrects every
//! segment with the selected method.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{interp_correct_segment, InterpDiagnostics, InterpOptions, RotSpace, TransSpace};
use crate::correction::{correct_segment, correct_terminal, CorrectionOptions};
use crate::error::{Error, Result};
use crate::liegeom::Pose;
use crate::trajectory::{KeyframeUpdate, Segment, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NoCorrection,
    Xyz,
    Se3V,
    Euler,
    Quat,
    So3,
    Proposed,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::NoCorrection,
        Method::Xyz,
        Method::Se3V,
        Method::Euler,
        Method::Quat,
        Method::So3,
        Method::Proposed,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::NoCorrection => "no-correction",
            Method::Xyz => "xyz",
            Method::Se3V => "se3-v",
            Method::Euler => "euler",
            Method::Quat => "quat",
            Method::So3 => "so3",
            Method::Proposed => "proposed",
        }
    }

    /// Interpolation spaces used by a baseline method. Translation baselines
    /// borrow `rot_partner` for their rotation and vice versa.
    pub fn spaces(&self, trans_partner: TransSpace, rot_partner: RotSpace) -> Option<(TransSpace, RotSpace)> {
        match self {
            Method::Xyz => Some((TransSpace::Xyz, rot_partner)),
            Method::Se3V => Some((TransSpace::Se3V, rot_partner)),
            Method::Euler => Some((trans_partner, RotSpace::Euler)),
            Method::Quat => Some((trans_partner, RotSpace::Quat)),
            Method::So3 => Some((trans_partner, RotSpace::So3)),
            Method::NoCorrection | Method::Proposed => None,
        }
    }

    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let methods = s
            .split(',')
            .map(str::trim)
            .filter(|m| !m.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Method>>>()?;
        if methods.is_empty() {
            return Err(Error::Config("empty method list".into()));
        }
        Ok(methods)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            return Err(Error::Config("'all' must be used on its own".into()));
        }
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MethodConfig {
    /// Translation space paired with rotation baselines.
    pub trans_space: TransSpace,
    /// Rotation space paired with translation baselines.
    pub rot_space: RotSpace,
    pub interp: InterpOptions,
    pub correction: CorrectionOptions,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            trans_space: TransSpace::Xyz,
            rot_space: RotSpace::So3,
            interp: InterpOptions::default(),
            correction: CorrectionOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentDiagnostics {
    pub segment: usize,
    pub terminal: bool,
    pub rel_count: usize,
    /// Scale factor of the proposed method.
    pub scale: Option<f64>,
    pub degenerate_baseline: bool,
    pub alpha_range: Option<(f64, f64)>,
    pub interp: InterpDiagnostics,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct CorrectionOutput {
    pub trajectory: Trajectory,
    pub segments: Vec<SegmentDiagnostics>,
}

impl CorrectionOutput {
    pub fn singular_hits(&self) -> usize {
        self.segments.iter().map(|s| s.interp.singular_hits).sum()
    }

    pub fn degenerate_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.degenerate_baseline).count()
    }
}

/// Builds one update per keyframe; keyframes without an update keep their pose.
pub fn complete_updates(traj: &Trajectory, updates: &[KeyframeUpdate]) -> Result<Vec<KeyframeUpdate>> {
    let mut full: Vec<KeyframeUpdate> = traj
        .keyframes()
        .iter()
        .enumerate()
        .map(|(i, kf)| KeyframeUpdate::unchanged(i, kf.world_pose))
        .collect();
    for up in updates {
        let slot = full.get_mut(up.index).ok_or_else(|| {
            Error::Association(format!(
                "update for keyframe {} but the trajectory has {} keyframes",
                up.index,
                traj.keyframes().len()
            ))
        })?;
        *slot = *up;
    }
    Ok(full)
}

/// Corrects a single segment with `method`. `updates` holds one entry per
/// keyframe of the trajectory.
pub fn correct_one(
    seg: &Segment,
    updates: &[KeyframeUpdate],
    method: Method,
    cfg: &MethodConfig,
) -> (Vec<Pose>, SegmentDiagnostics) {
    let start = Instant::now();
    let upd_a = &updates[seg.index];
    let upd_b = updates.get(seg.index + 1).filter(|_| !seg.is_terminal());
    let mut diag = SegmentDiagnostics {
        segment: seg.index,
        terminal: seg.is_terminal(),
        rel_count: seg.rels.len(),
        scale: None,
        degenerate_baseline: false,
        alpha_range: None,
        interp: InterpDiagnostics::default(),
        elapsed: Duration::ZERO,
    };
    let poses = match (method, upd_b) {
        (Method::NoCorrection, _) => seg.rels.iter().map(|r| r.rel_pose).collect(),
        (Method::Proposed, Some(upd_b)) => {
            let (poses, report) = correct_segment(seg, upd_a, upd_b, &cfg.correction);
            diag.scale = Some(report.scale);
            diag.degenerate_baseline = report.degenerate_baseline;
            diag.alpha_range = report.alpha_range;
            poses
        }
        (Method::Proposed, None) => {
            let (poses, report) = correct_terminal(seg);
            diag.scale = Some(report.scale);
            diag.alpha_range = report.alpha_range;
            poses
        }
        (baseline, Some(upd_b)) => {
            let (ts, rs) = baseline
                .spaces(cfg.trans_space, cfg.rot_space)
                .expect("baseline method");
            let (poses, interp) = interp_correct_segment(seg, upd_a, upd_b, ts, rs, &cfg.interp);
            diag.interp = interp;
            poses
        }
        // terminal segment: baselines have nothing to interpolate towards
        (_, None) => seg.rels.iter().map(|r| r.rel_pose).collect(),
    };
    diag.elapsed = start.elapsed();
    (poses, diag)
}

/// Applies `updates` to the keyframes and corrects every segment.
///
/// `threads > 1` fans segments out over a dedicated pool; the result is
/// identical to the sequential run.
pub fn correct_trajectory(
    traj: &Trajectory,
    updates: &[KeyframeUpdate],
    method: Method,
    cfg: &MethodConfig,
    threads: usize,
) -> Result<CorrectionOutput> {
    let updates = complete_updates(traj, updates)?;
    for (kf, up) in traj.keyframes().iter().zip(&updates) {
        let drift = (kf.world_pose.translation - up.old_pose.translation).amax();
        if drift > 1e-9 {
            log::warn!(
                "keyframe {} old pose differs from the trajectory by {drift:.3e} m",
                kf.id
            );
        }
    }

    let segments = traj.segments();
    let results: Vec<(Vec<Pose>, SegmentDiagnostics)> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| {
            segments
                .par_iter()
                .map(|seg| correct_one(seg, &updates, method, cfg))
                .collect()
        })
    } else {
        segments
            .iter()
            .map(|seg| correct_one(seg, &updates, method, cfg))
            .collect()
    };

    let new_kf: Vec<Pose> = updates.iter().map(|u| u.new_pose).collect();
    let (rel_poses, diags): (Vec<Vec<Pose>>, Vec<SegmentDiagnostics>) = results.into_iter().unzip();
    Ok(CorrectionOutput {
        trajectory: traj.with_poses(&new_kf, &rel_poses)?,
        segments: diags,
    })
}
