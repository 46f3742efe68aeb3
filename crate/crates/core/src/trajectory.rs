//! Keyframe / relative-frame data model.
//!
//! A trajectory is a list of keyframes with world poses plus relative frames
//! stored in the coordinates of their parent keyframe. Consecutive keyframes
//! bound a [`Segment`], the unit of correction; frames after the last
//! keyframe form a terminal segment with no closing keyframe.

use std::fmt;

use crate::error::{Error, Result};
use crate::liegeom::Pose;

/// Default tolerance for matching timestamps across files, in seconds.
pub const DEFAULT_ASSOC_TOL: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameId {
    pub timestamp: f64,
    pub index: usize,
}

impl FrameId {
    pub fn new(timestamp: f64, index: usize) -> Self {
        Self { timestamp, index }
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "frame #{} (t={})", self.index, self.timestamp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keyframe {
    pub id: FrameId,
    pub world_pose: Pose,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeFrame {
    pub id: FrameId,
    /// Index of the parent keyframe.
    pub parent: usize,
    /// Pose of this frame expressed in the parent keyframe's coordinates.
    pub rel_pose: Pose,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Index of the opening keyframe.
    pub index: usize,
    pub kf_a: Keyframe,
    /// `None` for the terminal segment after the last keyframe.
    pub kf_b: Option<Keyframe>,
    pub rels: Vec<RelativeFrame>,
}

impl Segment {
    pub fn is_terminal(&self) -> bool {
        self.kf_b.is_none()
    }

    /// Old keyframe-to-keyframe transform `T_ab`, if the segment is closed.
    pub fn kf_between(&self) -> Option<Pose> {
        self.kf_b.as_ref().map(|b| self.kf_a.world_pose.between(&b.world_pose))
    }
}

/// Old and new world pose of one keyframe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeyframeUpdate {
    pub index: usize,
    pub old_pose: Pose,
    pub new_pose: Pose,
}

impl KeyframeUpdate {
    pub fn unchanged(index: usize, pose: Pose) -> Self {
        Self {
            index,
            old_pose: pose,
            new_pose: pose,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.old_pose == self.new_pose
    }
}

/// Partitions relative frames into one segment per keyframe.
///
/// The last segment is terminal. Within each segment the relative frames are
/// ordered by timestamp.
pub fn segmentize(keyframes: &[Keyframe], relatives: &[RelativeFrame]) -> Result<Vec<Segment>> {
    if keyframes.is_empty() {
        if let Some(rel) = relatives.first() {
            return Err(Error::Association(format!(
                "{} references keyframe {} but the trajectory has no keyframes",
                rel.id, rel.parent
            )));
        }
        return Ok(Vec::new());
    }
    for pair in keyframes.windows(2) {
        if pair[1].id.timestamp <= pair[0].id.timestamp {
            return Err(Error::Association(format!(
                "keyframe timestamps not strictly increasing at {}",
                pair[1].id
            )));
        }
    }

    let mut segments: Vec<Segment> = keyframes
        .iter()
        .enumerate()
        .map(|(i, kf)| Segment {
            index: i,
            kf_a: *kf,
            kf_b: keyframes.get(i + 1).copied(),
            rels: Vec::new(),
        })
        .collect();

    for rel in relatives {
        let seg = segments
            .get_mut(rel.parent)
            .ok_or_else(|| Error::Association(format!("{} has unresolvable parent keyframe {}", rel.id, rel.parent)))?;
        let t = rel.id.timestamp;
        let after_end = seg.kf_b.as_ref().is_some_and(|b| t >= b.id.timestamp);
        if t < seg.kf_a.id.timestamp || after_end {
            return Err(Error::Association(format!(
                "{} lies outside the span of its parent keyframe {}",
                rel.id, rel.parent
            )));
        }
        seg.rels.push(*rel);
    }
    for seg in &mut segments {
        seg.rels.sort_by(|a, b| a.id.timestamp.total_cmp(&b.id.timestamp));
    }
    Ok(segments)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    keyframes: Vec<Keyframe>,
    segments: Vec<Segment>,
}

impl Trajectory {
    pub fn new(keyframes: Vec<Keyframe>, relatives: Vec<RelativeFrame>) -> Result<Self> {
        let segments = segmentize(&keyframes, &relatives)?;
        Ok(Self { keyframes, segments })
    }

    /// Builds a trajectory from world-frame poses, rebasing every non-keyframe
    /// onto the latest keyframe at or before its timestamp.
    ///
    /// `keyframe_positions` index into `frames`. Frames must be sorted by
    /// timestamp; a frame that precedes the first keyframe cannot be anchored
    /// and is rejected.
    pub fn from_world(frames: &[(FrameId, Pose)], keyframe_positions: &[usize]) -> Result<Self> {
        let mut is_kf = vec![false; frames.len()];
        for &k in keyframe_positions {
            let slot = is_kf.get_mut(k).ok_or_else(|| {
                Error::Association(format!("keyframe position {k} out of range ({} frames)", frames.len()))
            })?;
            *slot = true;
        }

        let keyframes: Vec<Keyframe> = frames
            .iter()
            .zip(&is_kf)
            .filter(|(_, kf)| **kf)
            .map(|((id, pose), _)| Keyframe {
                id: *id,
                world_pose: *pose,
            })
            .collect();

        let mut relatives = Vec::with_capacity(frames.len() - keyframes.len());
        for ((id, pose), _) in frames.iter().zip(&is_kf).filter(|(_, kf)| !**kf) {
            // latest keyframe with timestamp <= t; ties go to the keyframe
            let n_before = keyframes.partition_point(|k| k.id.timestamp <= id.timestamp);
            if n_before == 0 {
                return Err(Error::Association(format!("{id} precedes the first keyframe")));
            }
            let parent = n_before - 1;
            relatives.push(RelativeFrame {
                id: *id,
                parent,
                rel_pose: keyframes[parent].world_pose.between(pose),
            });
        }
        Self::new(keyframes, relatives)
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn relatives(&self) -> impl Iterator<Item = &RelativeFrame> {
        self.segments.iter().flat_map(|s| s.rels.iter())
    }

    pub fn relative_count(&self) -> usize {
        self.segments.iter().map(|s| s.rels.len()).sum()
    }

    pub fn frame_count(&self) -> usize {
        self.keyframes.len() + self.relative_count()
    }

    /// Plain concatenation: each relative frame is placed by composing its
    /// parent keyframe's world pose with its stored relative pose.
    ///
    /// Output is sorted by timestamp; at equal timestamps the keyframe comes
    /// first.
    pub fn world_poses(&self) -> Vec<(FrameId, Pose)> {
        let mut out = Vec::with_capacity(self.frame_count());
        for seg in &self.segments {
            out.push((seg.kf_a.id, seg.kf_a.world_pose));
            for rel in &seg.rels {
                out.push((rel.id, seg.kf_a.world_pose * rel.rel_pose));
            }
        }
        out.sort_by(|a, b| a.0.timestamp.total_cmp(&b.0.timestamp));
        out
    }

    /// World poses of the relative frames only, in segment order.
    pub fn relative_world_poses(&self) -> Vec<(FrameId, Pose)> {
        self.segments
            .iter()
            .flat_map(|seg| {
                seg.rels
                    .iter()
                    .map(move |rel| (rel.id, seg.kf_a.world_pose * rel.rel_pose))
            })
            .collect()
    }

    /// Replaces keyframe poses and per-segment relative poses.
    ///
    /// `rel_poses[i]` must have one entry per relative frame of segment `i`,
    /// in segment order.
    pub fn with_poses(&self, keyframe_poses: &[Pose], rel_poses: &[Vec<Pose>]) -> Result<Self> {
        if keyframe_poses.len() != self.keyframes.len() || rel_poses.len() != self.segments.len() {
            return Err(Error::Association(format!(
                "pose count mismatch: {} keyframe poses for {} keyframes, {} segment lists for {} segments",
                keyframe_poses.len(),
                self.keyframes.len(),
                rel_poses.len(),
                self.segments.len()
            )));
        }
        let keyframes: Vec<Keyframe> = self
            .keyframes
            .iter()
            .zip(keyframe_poses)
            .map(|(kf, pose)| Keyframe {
                id: kf.id,
                world_pose: *pose,
            })
            .collect();
        let mut segments = Vec::with_capacity(self.segments.len());
        for (seg, poses) in self.segments.iter().zip(rel_poses) {
            if poses.len() != seg.rels.len() {
                return Err(Error::Association(format!(
                    "segment {} has {} relative frames but {} poses were supplied",
                    seg.index,
                    seg.rels.len(),
                    poses.len()
                )));
            }
            segments.push(Segment {
                index: seg.index,
                kf_a: keyframes[seg.index],
                kf_b: keyframes.get(seg.index + 1).copied(),
                rels: seg
                    .rels
                    .iter()
                    .zip(poses)
                    .map(|(rel, pose)| RelativeFrame {
                        rel_pose: *pose,
                        ..*rel
                    })
                    .collect(),
            });
        }
        Ok(Self { keyframes, segments })
    }
}

/// Nearest-timestamp lookup over a pose list.
pub struct TimestampIndex {
    sorted: Vec<(f64, usize)>,
}

impl TimestampIndex {
    pub fn new(frames: &[(FrameId, Pose)]) -> Self {
        let mut sorted: Vec<(f64, usize)> = frames
            .iter()
            .enumerate()
            .map(|(i, (id, _))| (id.timestamp, i))
            .collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self { sorted }
    }

    /// Position (in the original slice) of the entry nearest to `t`, if it
    /// lies within `tol` seconds.
    pub fn nearest(&self, t: f64, tol: f64) -> Option<usize> {
        let split = self.sorted.partition_point(|(ts, _)| *ts < t);
        let mut best: Option<(f64, usize)> = None;
        for candidate in [split.checked_sub(1), Some(split)].into_iter().flatten() {
            if let Some(&(ts, i)) = self.sorted.get(candidate) {
                let d = (ts - t).abs();
                if d <= tol && best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, i));
                }
            }
        }
        best.map(|(_, i)| i)
    }
}

/// Moves every keyframe onto its associated ground-truth pose.
///
/// Produces one update per keyframe; a keyframe without a ground-truth pose
/// within `tol` seconds is an error.
pub fn snap_to_gt(traj: &Trajectory, gt: &[(FrameId, Pose)], tol: f64) -> Result<Vec<KeyframeUpdate>> {
    let index = TimestampIndex::new(gt);
    traj.keyframes()
        .iter()
        .enumerate()
        .map(|(i, kf)| {
            let j = index.nearest(kf.id.timestamp, tol).ok_or_else(|| {
                Error::Association(format!(
                    "no ground-truth pose within {tol} s of keyframe timestamp {}",
                    kf.id.timestamp
                ))
            })?;
            Ok(KeyframeUpdate {
                index: i,
                old_pose: kf.world_pose,
                new_pose: gt[j].1,
            })
        })
        .collect()
}
