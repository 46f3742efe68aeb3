//! TUM and KITTI trajectory files, plus keyframe index lists.
//!
//! TUM lines are `timestamp tx ty tz qx qy qz qw` (scalar last on disk);
//! KITTI lines are the 12 row-major entries of `[R | t]`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::liegeom::{Mat3, Pose, Rotation, Vec3};
use crate::trajectory::{FrameId, TimestampIndex};

const QUAT_NORM_TOL: f64 = 1e-3;
const KITTI_ORTHO_TOL: f64 = 1e-3;
pub const DEFAULT_KITTI_RATE_HZ: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TumRecord {
    pub timestamp: f64,
    pub translation: [f64; 3],
    /// `(qx, qy, qz, qw)` in file order.
    pub quaternion: [f64; 4],
}

impl TumRecord {
    pub fn from_pose(timestamp: f64, pose: &Pose) -> Self {
        let [w, x, y, z] = pose.rotation.quaternion();
        Self {
            timestamp,
            translation: pose.translation.into(),
            quaternion: [x, y, z, w],
        }
    }

    pub fn pose(&self) -> Pose {
        let [x, y, z, w] = self.quaternion;
        Pose::new(Rotation::from_quaternion(w, x, y, z), Vec3::from(self.translation))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KittiPoseRecord(pub [f64; 12]);

impl KittiPoseRecord {
    pub fn from_pose(pose: &Pose) -> Self {
        let r = pose.rotation.matrix();
        let t = pose.translation;
        let mut v = [0.0; 12];
        for row in 0..3 {
            for col in 0..3 {
                v[row * 4 + col] = r[(row, col)];
            }
            v[row * 4 + 3] = t[row];
        }
        Self(v)
    }

    /// Orthonormalizes the rotation block. Fails if it is further than the
    /// input tolerance from a proper rotation.
    pub fn pose(&self) -> std::result::Result<Pose, String> {
        let v = &self.0;
        let m = Mat3::new(v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10]);
        let drift = (m.transpose() * m - Mat3::identity()).amax();
        if drift.is_nan() || drift > KITTI_ORTHO_TOL {
            return Err(format!("rotation block is not orthonormal (drift {drift:.3e})"));
        }
        if m.determinant() <= 0.0 {
            return Err("rotation block has non-positive determinant".into());
        }
        Ok(Pose::new(
            Rotation::from_matrix(&polar_rotation(&m)),
            Vec3::new(v[3], v[7], v[11]),
        ))
    }
}

/// Nearest rotation matrix in the Frobenius sense, `U V^T`.
fn polar_rotation(m: &Mat3) -> Mat3 {
    let svd = SVD::new(*m, true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    u * v_t
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_floats(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, lineno, format!("invalid number '{tok}'")))
        })
        .collect()
}

/// Parses TUM content. `path` is only used in error messages.
pub fn parse_tum(content: &str, path: &Path) -> Result<Vec<(FrameId, Pose)>> {
    let mut records = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = parse_floats(line, path, lineno)?;
        if v.len() != 8 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 8 fields (t tx ty tz qx qy qz qw), found {}", v.len()),
            ));
        }
        let norm = (v[4] * v[4] + v[5] * v[5] + v[6] * v[6] + v[7] * v[7]).sqrt();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(Error::parse(
                path,
                lineno,
                format!("quaternion norm {norm} is not within {QUAT_NORM_TOL} of 1"),
            ));
        }
        let rec = TumRecord {
            timestamp: v[0],
            translation: [v[1], v[2], v[3]],
            quaternion: [v[4], v[5], v[6], v[7]],
        };
        records.push((rec.timestamp, rec.pose()));
    }
    if records.windows(2).any(|w| w[1].0 < w[0].0) {
        log::warn!("{}: timestamps are not monotone, sorting", path.display());
        records.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(records
        .into_iter()
        .enumerate()
        .map(|(i, (t, p))| (FrameId::new(t, i), p))
        .collect())
}

pub fn read_tum(path: impl AsRef<Path>) -> Result<Vec<(FrameId, Pose)>> {
    let path = path.as_ref();
    parse_tum(&read_to_string(path)?, path)
}

pub fn format_tum(poses: &[(FrameId, Pose)]) -> String {
    let mut out = String::new();
    for (id, pose) in poses {
        let r = TumRecord::from_pose(id.timestamp, pose);
        let [tx, ty, tz] = r.translation;
        let [qx, qy, qz, qw] = r.quaternion;
        let _ = writeln!(out, "{} {tx} {ty} {tz} {qx} {qy} {qz} {qw}", r.timestamp);
    }
    out
}

pub fn write_tum(path: impl AsRef<Path>, poses: &[(FrameId, Pose)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_tum(poses)).map_err(|e| Error::io(path, e))
}

/// Parses KITTI odometry poses; frame `i` gets timestamp `i / rate_hz`.
pub fn parse_kitti(content: &str, path: &Path, rate_hz: f64) -> Result<Vec<(FrameId, Pose)>> {
    let mut out = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let v = parse_floats(line, path, lineno)?;
        let rec: [f64; 12] = v
            .as_slice()
            .try_into()
            .map_err(|_| Error::parse(path, lineno, format!("expected 12 fields, found {}", v.len())))?;
        let pose = KittiPoseRecord(rec)
            .pose()
            .map_err(|msg| Error::parse(path, lineno, msg))?;
        let index = out.len();
        out.push((FrameId::new(index as f64 / rate_hz, index), pose));
    }
    Ok(out)
}

pub fn read_kitti(path: impl AsRef<Path>, rate_hz: f64) -> Result<Vec<(FrameId, Pose)>> {
    let path = path.as_ref();
    parse_kitti(&read_to_string(path)?, path, rate_hz)
}

pub fn format_kitti(poses: &[(FrameId, Pose)]) -> String {
    let mut out = String::new();
    for (_, pose) in poses {
        let rec = KittiPoseRecord::from_pose(pose);
        let fields: Vec<String> = rec.0.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", fields.join(" "));
    }
    out
}

pub fn write_kitti(path: impl AsRef<Path>, poses: &[(FrameId, Pose)]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_kitti(poses)).map_err(|e| Error::io(path, e))
}

/// One entry of a keyframe index file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeyframeRef {
    /// Zero-based position in the full trajectory.
    Index(usize),
    Timestamp(f64),
}

/// Parses a keyframe index list: one entry per line, integers are frame
/// positions and anything with a decimal point or exponent is a timestamp.
pub fn parse_keyframe_index(content: &str, path: &Path) -> Result<Vec<(usize, KeyframeRef)>> {
    let mut out = Vec::new();
    for (i, raw) in content.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let entry = if line.chars().all(|c| c.is_ascii_digit()) {
            line.parse::<usize>().map(KeyframeRef::Index).ok()
        } else {
            line.parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .map(KeyframeRef::Timestamp)
        };
        let entry = entry.ok_or_else(|| Error::parse(path, lineno, format!("invalid keyframe entry '{line}'")))?;
        out.push((lineno, entry));
    }
    Ok(out)
}

pub fn read_keyframe_index(path: impl AsRef<Path>) -> Result<Vec<(usize, KeyframeRef)>> {
    let path = path.as_ref();
    parse_keyframe_index(&read_to_string(path)?, path)
}

/// Resolves keyframe references to sorted, deduplicated positions in `frames`.
pub fn resolve_keyframes(
    refs: &[(usize, KeyframeRef)],
    frames: &[(FrameId, Pose)],
    tol: f64,
    path: &Path,
) -> Result<Vec<usize>> {
    let index = TimestampIndex::new(frames);
    let mut out = Vec::with_capacity(refs.len());
    for (lineno, r) in refs {
        let pos = match *r {
            KeyframeRef::Index(i) if i < frames.len() => Some(i),
            KeyframeRef::Index(_) => None,
            KeyframeRef::Timestamp(t) => index.nearest(t, tol),
        };
        let pos = pos.ok_or_else(|| {
            let what = match r {
                KeyframeRef::Index(i) => format!("frame index {i}"),
                KeyframeRef::Timestamp(t) => format!("timestamp {t}"),
            };
            Error::parse(path, *lineno, format!("keyframe refers to nonexistent {what}"))
        })?;
        out.push(pos);
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

pub fn format_keyframe_index(positions: &[usize]) -> String {
    positions.iter().map(|p| format!("{p}\n")).collect()
}
