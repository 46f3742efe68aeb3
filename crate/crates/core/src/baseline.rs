//! Element-wise interpolation baselines.
//!
//! Each relative pose is mapped to a vector, and every component is moved by
//! the keyframe-to-keyframe correction scaled by its own ratio
//!
//! ```text
//! x*_aj = x_aj + (x*_ab - x_ab) * x_aj / x_ab      (per component)
//! ```
//!
//! where `x_aj` is the relative frame in keyframe `a`, and `x_ab`, `x*_ab` are
//! the old and new keyframe-to-keyframe vectors. A component of `x_ab` near
//! zero makes the ratio explode; that sensitivity is reproduced on request
//! (`raw_division`) and otherwise guarded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::liegeom::{euler_from, euler_to, left_jacobian, se3_log, so3_exp, so3_log, Pose, RotVec, Rotation, Vec3};
use crate::trajectory::{KeyframeUpdate, Segment};

/// Components of `x_ab` with magnitude below this are treated as singular.
pub const SINGULAR_EPS: f64 = 1e-12;
const RENORM_LOG_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransSpace {
    Xyz,
    Se3V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotSpace {
    Euler,
    Quat,
    So3,
}

impl fmt::Display for TransSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransSpace::Xyz => "xyz",
            TransSpace::Se3V => "se3-v",
        })
    }
}

impl fmt::Display for RotSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RotSpace::Euler => "euler",
            RotSpace::Quat => "quat",
            RotSpace::So3 => "so3",
        })
    }
}

impl FromStr for TransSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "xyz" => Ok(TransSpace::Xyz),
            "se3-v" | "v" => Ok(TransSpace::Se3V),
            other => Err(Error::Config(format!("unknown translation space '{other}'"))),
        }
    }
}

impl FromStr for RotSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "euler" => Ok(RotSpace::Euler),
            "quat" => Ok(RotSpace::Quat),
            "so3" => Ok(RotSpace::So3),
            other => Err(Error::Config(format!("unknown rotation space '{other}'"))),
        }
    }
}

/// Rotation in one of the baseline vector spaces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RotCoords {
    /// `(yaw, pitch, roll)`, intrinsic Z-Y-X.
    Euler([f64; 3]),
    /// `(w, x, y, z)` with `w >= 0`.
    Quat([f64; 4]),
    So3([f64; 3]),
}

impl RotCoords {
    pub fn as_slice(&self) -> &[f64] {
        match self {
            RotCoords::Euler(v) | RotCoords::So3(v) => v,
            RotCoords::Quat(q) => q,
        }
    }

    fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            RotCoords::Euler(v) | RotCoords::So3(v) => v,
            RotCoords::Quat(q) => q,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vectorized {
    pub trans: Vec3,
    pub rot: RotCoords,
    /// Euler extraction hit gimbal lock.
    pub gimbal: bool,
}

pub fn vectorize(p: &Pose, ts: TransSpace, rs: RotSpace) -> Vectorized {
    let trans = match ts {
        TransSpace::Xyz => p.translation,
        TransSpace::Se3V => se3_log(p).v,
    };
    let mut gimbal = false;
    let rot = match rs {
        RotSpace::Euler => {
            let e = euler_from(&p.rotation);
            gimbal = e.gimbal;
            RotCoords::Euler(e.angles.into())
        }
        RotSpace::Quat => RotCoords::Quat(p.rotation.quaternion()),
        RotSpace::So3 => RotCoords::So3(so3_log(&p.rotation).0.into()),
    };
    Vectorized { trans, rot, gimbal }
}

/// Maps vectors back to a pose. Returns the pose and the amount by which a
/// quaternion vector had to be rescaled to unit norm (zero otherwise).
pub fn devectorize(v: &Vectorized, ts: TransSpace) -> (Pose, f64) {
    let (rotation, renorm) = match v.rot {
        RotCoords::Euler(e) => (euler_to(&Vec3::from(e)), 0.0),
        RotCoords::So3(w) => (so3_exp(&RotVec(Vec3::from(w))), 0.0),
        RotCoords::Quat(q) => {
            let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            (Rotation::from_quaternion(q[0], q[1], q[2], q[3]), (n - 1.0).abs())
        }
    };
    let translation = match ts {
        TransSpace::Xyz => v.trans,
        TransSpace::Se3V => left_jacobian(&so3_log(&rotation).0) * v.trans,
    };
    (Pose::new(rotation, translation), renorm)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpOptions {
    /// Divide unguarded, letting singular components produce Inf/NaN.
    pub raw_division: bool,
    pub eps: f64,
}

impl Default for InterpOptions {
    fn default() -> Self {
        Self {
            raw_division: false,
            eps: SINGULAR_EPS,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InterpDiagnostics {
    /// Components whose keyframe-to-keyframe denominator fell below eps.
    pub singular_hits: usize,
    pub gimbal_hits: usize,
    /// Quaternion outputs that moved by more than 1e-6 when renormalized.
    pub renormalized: usize,
}

impl InterpDiagnostics {
    pub fn merge(&mut self, other: &InterpDiagnostics) {
        self.singular_hits += other.singular_hits;
        self.gimbal_hits += other.gimbal_hits;
        self.renormalized += other.renormalized;
    }
}

fn interp_components(
    x_j: &mut [f64],
    x_ab: &[f64],
    x_ab_new: &[f64],
    opts: &InterpOptions,
    diag: &mut InterpDiagnostics,
) {
    for ((xj, den), new) in x_j.iter_mut().zip(x_ab).zip(x_ab_new) {
        let singular = den.abs() < opts.eps;
        if singular {
            diag.singular_hits += 1;
        }
        let factor = if singular && !opts.raw_division { 0.0 } else { *xj / den };
        *xj += (new - den) * factor;
    }
}

/// Applies the element-wise baseline to every relative frame of a closed
/// segment. Output poses are relative to the updated keyframe `a`.
pub fn interp_correct_segment(
    seg: &Segment,
    upd_a: &KeyframeUpdate,
    upd_b: &KeyframeUpdate,
    ts: TransSpace,
    rs: RotSpace,
    opts: &InterpOptions,
) -> (Vec<Pose>, InterpDiagnostics) {
    let mut diag = InterpDiagnostics::default();
    let x_ab = vectorize(&upd_a.old_pose.between(&upd_b.old_pose), ts, rs);
    let x_ab_new = vectorize(&upd_a.new_pose.between(&upd_b.new_pose), ts, rs);
    diag.gimbal_hits += usize::from(x_ab.gimbal) + usize::from(x_ab_new.gimbal);

    let out = seg
        .rels
        .iter()
        .map(|rel| {
            let mut x = vectorize(&rel.rel_pose, ts, rs);
            diag.gimbal_hits += usize::from(x.gimbal);
            interp_components(
                x.trans.as_mut_slice(),
                x_ab.trans.as_slice(),
                x_ab_new.trans.as_slice(),
                opts,
                &mut diag,
            );
            interp_components(
                x.rot.as_mut_slice(),
                x_ab.rot.as_slice(),
                x_ab_new.rot.as_slice(),
                opts,
                &mut diag,
            );
            let (pose, renorm) = devectorize(&x, ts);
            if renorm > RENORM_LOG_THRESHOLD {
                diag.renormalized += 1;
                log::debug!("quaternion baseline renormalized {} by {renorm:.3e}", rel.id);
            }
            pose
        })
        .collect();
    (out, diag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::{FrameId, Keyframe, RelativeFrame};

    fn segment(kf_b: Pose, rels: &[Pose]) -> Segment {
        Segment {
            index: 0,
            kf_a: Keyframe {
                id: FrameId::new(0.0, 0),
                world_pose: Pose::identity(),
            },
            kf_b: Some(Keyframe {
                id: FrameId::new(1.0, rels.len() + 1),
                world_pose: kf_b,
            }),
            rels: rels
                .iter()
                .enumerate()
                .map(|(j, p)| RelativeFrame {
                    id: FrameId::new((j + 1) as f64 / (rels.len() + 1) as f64, j + 1),
                    parent: 0,
                    rel_pose: *p,
                })
                .collect(),
        }
    }

    const ALL_SPACES: [(TransSpace, RotSpace); 6] = [
        (TransSpace::Xyz, RotSpace::Euler),
        (TransSpace::Xyz, RotSpace::Quat),
        (TransSpace::Xyz, RotSpace::So3),
        (TransSpace::Se3V, RotSpace::Euler),
        (TransSpace::Se3V, RotSpace::Quat),
        (TransSpace::Se3V, RotSpace::So3),
    ];

    #[test]
    fn identity_vectorizes_to_zero() {
        for (ts, rs) in ALL_SPACES {
            let v = vectorize(&Pose::identity(), ts, rs);
            assert_eq!(v.trans, Vec3::zeros());
            match v.rot {
                RotCoords::Quat(q) => assert_eq!(q, [1.0, 0.0, 0.0, 0.0]),
                other => assert_eq!(other.as_slice(), &[0.0; 3]),
            }
        }
    }

    #[test]
    fn pure_translation_v_is_translation() {
        let p = Pose::from_translation(Vec3::new(0.3, -2.0, 7.5));
        assert_eq!(vectorize(&p, TransSpace::Se3V, RotSpace::So3).trans, p.translation);
    }

    #[test]
    fn zero_correction_leaves_rels_unchanged() {
        let kf_b = Pose::new(Rotation::about_y(0.2), Vec3::new(0.4, 0.1, 2.0));
        let rels = [
            Pose::new(Rotation::about_y(0.05), Vec3::new(0.1, 0.02, 0.5)),
            Pose::new(Rotation::about_x(0.1), Vec3::new(0.2, 0.05, 1.3)),
        ];
        let seg = segment(kf_b, &rels);
        let up_a = KeyframeUpdate::unchanged(0, Pose::identity());
        let up_b = KeyframeUpdate::unchanged(1, kf_b);
        for (ts, rs) in ALL_SPACES {
            let (out, _) = interp_correct_segment(&seg, &up_a, &up_b, ts, rs, &InterpOptions::default());
            for (o, r) in out.iter().zip(&rels) {
                assert!((o.translation - r.translation).amax() < 1e-12);
                assert!((o.rotation.matrix() - r.rotation.matrix()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn xyz_single_axis_doubling() {
        let kf_b = Pose::from_translation(Vec3::new(2.0, 0.5, 0.25));
        let rel = Pose::from_translation(Vec3::new(1.0, 0.3, 0.1));
        let seg = segment(kf_b, &[rel]);
        let up_a = KeyframeUpdate::unchanged(0, Pose::identity());
        let up_b = KeyframeUpdate {
            index: 1,
            old_pose: kf_b,
            new_pose: Pose::from_translation(Vec3::new(4.0, 0.5, 0.25)),
        };
        let (out, diag) = interp_correct_segment(
            &seg,
            &up_a,
            &up_b,
            TransSpace::Xyz,
            RotSpace::So3,
            &InterpOptions::default(),
        );
        assert_eq!(out[0].translation, Vec3::new(2.0, 0.3, 0.1));
        // identity rotations: every so(3) component of x_ab is zero
        assert_eq!(diag.singular_hits, 3);
    }

    #[test]
    fn singular_component_guarded_or_raw() {
        // x_ab has no lateral component, yet the update adds 1 cm there
        let kf_b = Pose::from_translation(Vec3::new(0.0, 0.0, 1.0));
        let rel = Pose::from_translation(Vec3::new(0.002, 0.0, 0.5));
        let seg = segment(kf_b, &[rel]);
        let up_a = KeyframeUpdate::unchanged(0, Pose::identity());
        let up_b = KeyframeUpdate {
            index: 1,
            old_pose: kf_b,
            new_pose: Pose::from_translation(Vec3::new(0.01, 0.0, 1.0)),
        };
        let guarded = InterpOptions::default();
        let raw = InterpOptions {
            raw_division: true,
            ..guarded
        };
        let (out, diag) = interp_correct_segment(&seg, &up_a, &up_b, TransSpace::Xyz, RotSpace::Quat, &guarded);
        assert_eq!(out[0].translation, rel.translation);
        assert!(diag.singular_hits >= 1);
        let (out, diag) = interp_correct_segment(&seg, &up_a, &up_b, TransSpace::Xyz, RotSpace::Quat, &raw);
        assert!(out[0].translation.x.is_infinite());
        assert!(diag.singular_hits >= 1);
    }

    #[test]
    fn quaternion_output_is_renormalized() {
        let kf_b = Pose::new(Rotation::about_z(0.4), Vec3::new(0.0, 0.0, 1.0));
        let rel = Pose::new(Rotation::about_z(0.2), Vec3::new(0.0, 0.0, 0.5));
        let seg = segment(kf_b, &[rel]);
        let up_a = KeyframeUpdate::unchanged(0, Pose::identity());
        let up_b = KeyframeUpdate {
            index: 1,
            old_pose: kf_b,
            new_pose: Pose::new(Rotation::about_x(0.9), Vec3::new(0.0, 0.0, 1.0)),
        };
        let (out, diag) = interp_correct_segment(
            &seg,
            &up_a,
            &up_b,
            TransSpace::Xyz,
            RotSpace::Quat,
            &InterpOptions::default(),
        );
        let q = out[0].rotation.quaternion();
        let n: f64 = q.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(diag.renormalized, 1);
    }

    #[test]
    fn parse_spaces() {
        assert_eq!("se3-v".parse::<TransSpace>().unwrap(), TransSpace::Se3V);
        assert_eq!("quat".parse::<RotSpace>().unwrap(), RotSpace::Quat);
        assert!("rpy".parse::<RotSpace>().is_err());
    }
}
