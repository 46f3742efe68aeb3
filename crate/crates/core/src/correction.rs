//! Measurement-constraint correction of relative frames.
//!
//! When the back-end moves keyframes `a` and `b`, a relative frame `j` between
//! them is corrected in three steps:
//!
//! 1. Each keyframe alone implies a solution that keeps the frame's pixel
//!    measurements consistent with a uniformly rescaled map: the rotation
//!    relative to that keyframe is kept and the translation is multiplied by
//!    the scale factor `s = |t*_ab| / |t_ab|`.
//! 2. The two solutions generally disagree. Their gap `dT = S_a^-1 T*_ab S_b`
//!    is expressed in the frame implied by keyframe `a`.
//! 3. The gap is closed partially by geodesic interpolation with the factor
//!    `alpha = d_a / (d_a + d_b)`, the frame's relative distance to the two
//!    keyframes: `R* = R_a slerp(I, dR, alpha)`, `t* = t_a + alpha R_a dt`.
//!
//! At `alpha = 0` the frame follows keyframe `a` exactly, at `alpha = 1` it
//! follows keyframe `b`. Under a similarity update (global rotation,
//! translation and uniform scale) both solutions coincide and the correction
//! is exact.

use serde::{Deserialize, Serialize};

use crate::liegeom::{slerp_from_identity, Pose, Rotation, Vec3};
use crate::trajectory::{KeyframeUpdate, Segment};

/// Keyframe baselines shorter than this (meters) are degenerate.
pub const DEGENERATE_BASELINE: f64 = 1e-9;
const DEGENERATE_DISTANCE: f64 = 1e-9;

/// How the keyframe translation ratio becomes the scale factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleMode {
    /// `|t*_ab| / |t_ab|`.
    #[default]
    Ratio,
    /// `|t*_ab|^2 / |t_ab|^2`, kept for comparison.
    SquaredRatio,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleFactor {
    pub s: f64,
    /// The old keyframe baseline was too short to define a ratio; `s` is 1.
    pub degenerate: bool,
}

pub fn scale_factor(t_ab_old: &Vec3, t_ab_new: &Vec3, mode: ScaleMode) -> ScaleFactor {
    let old = t_ab_old.norm();
    if old < DEGENERATE_BASELINE || !old.is_finite() {
        return ScaleFactor {
            s: 1.0,
            degenerate: true,
        };
    }
    let ratio = t_ab_new.norm() / old;
    let s = match mode {
        ScaleMode::Ratio => ratio,
        ScaleMode::SquaredRatio => ratio * ratio,
    };
    if s > 0.0 && s.is_finite() {
        ScaleFactor { s, degenerate: false }
    } else {
        // the new keyframes coincide; a zero scale would collapse the segment
        ScaleFactor {
            s: 1.0,
            degenerate: true,
        }
    }
}

/// Relative pose implied by a single keyframe's constraint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionSolution {
    pub rot: Rotation,
    pub trans: Vec3,
}

impl ConditionSolution {
    pub fn pose(&self) -> Pose {
        Pose::new(self.rot, self.trans)
    }
}

/// Keeps the rotation and scales the translation of `keyframe -> frame`.
///
/// Used for both keyframes of a segment; for keyframe `b` the input is the
/// frame expressed in `b`'s old coordinates.
pub fn condition_from_kf(rel_old: &Pose, s: &ScaleFactor) -> ConditionSolution {
    ConditionSolution {
        rot: rel_old.rotation,
        trans: s.s * rel_old.translation,
    }
}

/// Disagreement between the two condition solutions, expressed in the frame
/// implied by keyframe `a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FusionGap {
    pub d_rot: Rotation,
    pub d_trans: Vec3,
}

/// Computes `S_a^-1 * T*_ab * S_b`.
///
/// `sol_a` is relative to the updated keyframe `a`, `sol_b` to the updated
/// keyframe `b`.
pub fn fusion_gap(sol_a: &ConditionSolution, sol_b: &ConditionSolution, kf_a_new: &Pose, kf_b_new: &Pose) -> FusionGap {
    let t_ab_new = kf_a_new.between(kf_b_new);
    let r_frame_a = sol_a.rot.inverse();
    // frame position implied by keyframe b, in updated keyframe a coordinates
    let via_b = t_ab_new.rotation.rotate(&sol_b.trans) + t_ab_new.translation;
    FusionGap {
        d_rot: r_frame_a * t_ab_new.rotation * sol_b.rot,
        d_trans: r_frame_a.rotate(&(via_b - sol_a.trans)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpFactor {
    pub alpha: f64,
    /// Distances were degenerate and the timestamp ratio was used.
    pub from_time: bool,
}

/// Interpolation factor of relative frame `j`, from the old geometry.
///
/// Falls back to the timestamp ratio when the frame sits on both keyframes at
/// once (pure rotation) or the keyframe baseline is degenerate. Terminal
/// segments have no second keyframe and always yield zero.
pub fn interp_factor(seg: &Segment, j: usize) -> InterpFactor {
    let Some(kf_b) = seg.kf_b.as_ref() else {
        return InterpFactor {
            alpha: 0.0,
            from_time: false,
        };
    };
    let rel = &seg.rels[j];
    let t_ab = seg.kf_a.world_pose.between(&kf_b.world_pose);
    let d_a = rel.rel_pose.translation.norm();
    let d_b = (t_ab.inverse() * rel.rel_pose).translation.norm();
    let total = d_a + d_b;
    if total < DEGENERATE_DISTANCE || t_ab.translation.norm() < DEGENERATE_BASELINE {
        return time_factor(seg, j);
    }
    InterpFactor {
        alpha: d_a / total,
        from_time: false,
    }
}

/// Fuses the two condition solutions: `R_a slerp(I, dR, alpha)`,
/// `t_a + alpha R_a dt`.
pub fn fuse(sol_a: &ConditionSolution, gap: &FusionGap, alpha: f64) -> Pose {
    if alpha == 0.0 {
        return sol_a.pose();
    }
    let rot = sol_a.rot * slerp_from_identity(&gap.d_rot, alpha);
    let trans = sol_a.trans + alpha * sol_a.rot.rotate(&gap.d_trans);
    Pose::new(rot, trans)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrectionOptions {
    pub scale_mode: ScaleMode,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            scale_mode: ScaleMode::Ratio,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentReport {
    pub scale: f64,
    pub degenerate_baseline: bool,
    /// `(min, max)` of the interpolation factor; `None` for empty segments.
    pub alpha_range: Option<(f64, f64)>,
    /// Frames whose factor came from timestamps.
    pub time_fallbacks: usize,
}

impl SegmentReport {
    fn empty(scale: ScaleFactor) -> Self {
        Self {
            scale: scale.s,
            degenerate_baseline: scale.degenerate,
            alpha_range: None,
            time_fallbacks: 0,
        }
    }

    fn record(&mut self, f: &InterpFactor) {
        self.alpha_range = Some(match self.alpha_range {
            None => (f.alpha, f.alpha),
            Some((lo, hi)) => (lo.min(f.alpha), hi.max(f.alpha)),
        });
        self.time_fallbacks += usize::from(f.from_time);
    }
}

/// Corrects every relative frame of a closed segment.
///
/// Returns poses relative to the updated keyframe `a`.
pub fn correct_segment(
    seg: &Segment,
    upd_a: &KeyframeUpdate,
    upd_b: &KeyframeUpdate,
    opts: &CorrectionOptions,
) -> (Vec<Pose>, SegmentReport) {
    let t_ab_old = upd_a.old_pose.between(&upd_b.old_pose);
    let t_ab_new = upd_a.new_pose.between(&upd_b.new_pose);
    let s = scale_factor(&t_ab_old.translation, &t_ab_new.translation, opts.scale_mode);
    let mut report = SegmentReport::empty(s);
    let t_ba_old = t_ab_old.inverse();

    let poses = seg
        .rels
        .iter()
        .enumerate()
        .map(|(j, rel)| {
            let sol_a = condition_from_kf(&rel.rel_pose, &s);
            let sol_b = condition_from_kf(&(t_ba_old * rel.rel_pose), &s);
            let gap = fusion_gap(&sol_a, &sol_b, &upd_a.new_pose, &upd_b.new_pose);
            let factor = if s.degenerate {
                time_factor(seg, j)
            } else {
                interp_factor(seg, j)
            };
            report.record(&factor);
            fuse(&sol_a, &gap, factor.alpha)
        })
        .collect();
    (poses, report)
}

fn time_factor(seg: &Segment, j: usize) -> InterpFactor {
    let alpha = match seg.kf_b.as_ref() {
        Some(kf_b) if kf_b.id.timestamp > seg.kf_a.id.timestamp => {
            let span = kf_b.id.timestamp - seg.kf_a.id.timestamp;
            ((seg.rels[j].id.timestamp - seg.kf_a.id.timestamp) / span).clamp(0.0, 1.0)
        }
        _ => 0.0,
    };
    InterpFactor { alpha, from_time: true }
}

/// Terminal segment: only keyframe `a` constrains the frames, with unit
/// scale, so the frames follow it rigidly.
pub fn correct_terminal(seg: &Segment) -> (Vec<Pose>, SegmentReport) {
    let s = ScaleFactor {
        s: 1.0,
        degenerate: false,
    };
    let mut report = SegmentReport::empty(s);
    let poses = seg
        .rels
        .iter()
        .map(|rel| {
            report.record(&InterpFactor {
                alpha: 0.0,
                from_time: false,
            });
            condition_from_kf(&rel.rel_pose, &s).pose()
        })
        .collect();
    (poses, report)
}
