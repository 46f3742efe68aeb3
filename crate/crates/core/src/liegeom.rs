//! SO(3) / SE(3) value types and the maps between rotation parameterizations.
//!
//! Rotations are stored as unit quaternions `(w, x, y, z)` with the double
//! cover resolved to `w >= 0`, so every rotation has exactly one vector
//! representation. Matrices are derived on demand.
//!
//! Frame convention: a [`Pose`] `T_ab` maps coordinates expressed in frame `b`
//! into frame `a`, i.e. it is the pose of `b` seen from `a`.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

const EXP_TAYLOR_THRESHOLD: f64 = 1e-8;
const LOG_TAYLOR_THRESHOLD: f64 = 1e-8;
const JACOBIAN_TAYLOR_THRESHOLD: f64 = 1e-3;
const GIMBAL_THRESHOLD: f64 = 1e-6;

/// Element of SO(3), stored as a canonical unit quaternion.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rotation(w={}, x={}, y={}, z={})", self.w, self.x, self.y, self.z)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Builds a rotation from raw quaternion components, normalizing and
    /// flipping the sign so that `w >= 0`.
    ///
    /// Non-finite or zero-norm input propagates as NaN components; callers
    /// that must stay finite check [`Rotation::is_finite`].
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        let (w, x, y, z) = (w / n, x / n, y / n, z / n);
        let flip = w < 0.0 || (w == 0.0 && first_nonzero_is_negative(x, y, z));
        if flip {
            Self {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Self { w, x, y, z }
        }
    }

    /// Quaternion components `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.quaternion().iter().all(|c| c.is_finite())
    }

    /// Converts a rotation matrix using Shepperd's largest-component
    /// selection. The input is assumed orthonormal.
    pub fn from_matrix(m: &Mat3) -> Self {
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let candidates = [trace, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let mut best = 0;
        for (i, c) in candidates.iter().enumerate() {
            if *c > candidates[best] {
                best = i;
            }
        }
        let (w, x, y, z) = match best {
            0 => {
                let s = 2.0 * (1.0 + trace).sqrt();
                (
                    0.25 * s,
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(1, 0)] - m[(0, 1)]) / s,
                )
            }
            1 => {
                let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
                (
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    0.25 * s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                )
            }
            2 => {
                let s = 2.0 * (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt();
                (
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    0.25 * s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                )
            }
            _ => {
                let s = 2.0 * (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt();
                (
                    (m[(1, 0)] - m[(0, 1)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                    0.25 * s,
                )
            }
        };
        Self::from_quaternion(w, x, y, z)
    }

    pub fn matrix(&self) -> Mat3 {
        let Self { w, x, y, z } = *self;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        Mat3::new(
            1.0 - 2.0 * (yy + zz),
            2.0 * (xy - wz),
            2.0 * (xz + wy),
            2.0 * (xy + wz),
            1.0 - 2.0 * (xx + zz),
            2.0 * (yz - wx),
            2.0 * (xz - wy),
            2.0 * (yz + wx),
            1.0 - 2.0 * (xx + yy),
        )
    }

    pub fn inverse(&self) -> Self {
        Self::from_quaternion(self.w, -self.x, -self.y, -self.z)
    }

    /// Rotation angle in radians, in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let n = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * n.atan2(self.w.abs())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        // v + 2 q_v x (q_v x v + w v)
        let qv = Vec3::new(self.x, self.y, self.z);
        let t = qv.cross(v) + self.w * v;
        v + 2.0 * qv.cross(&t)
    }

    pub fn about_x(angle: f64) -> Self {
        so3_exp(&RotVec(Vec3::new(angle, 0.0, 0.0)))
    }

    pub fn about_y(angle: f64) -> Self {
        so3_exp(&RotVec(Vec3::new(0.0, angle, 0.0)))
    }

    pub fn about_z(angle: f64) -> Self {
        so3_exp(&RotVec(Vec3::new(0.0, 0.0, angle)))
    }
}

fn first_nonzero_is_negative(x: f64, y: f64, z: f64) -> bool {
    [x, y, z].into_iter().find(|c| *c != 0.0).is_some_and(|c| c < 0.0)
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, r: Rotation) -> Rotation {
        let l = self;
        Rotation::from_quaternion(
            l.w * r.w - l.x * r.x - l.y * r.y - l.z * r.z,
            l.w * r.x + l.x * r.w + l.y * r.z - l.z * r.y,
            l.w * r.y - l.x * r.z + l.y * r.w + l.z * r.x,
            l.w * r.z + l.x * r.y - l.y * r.x + l.z * r.w,
        )
    }
}

impl Mul<Vec3> for Rotation {
    type Output = Vec3;

    fn mul(self, v: Vec3) -> Vec3 {
        self.rotate(&v)
    }
}

/// Rigid transform: rotation plus translation in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation.inverse();
        Self::new(r_inv, -(r_inv * self.translation))
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// `self^-1 * other`, the pose of `other` expressed in `self`.
    pub fn between(&self, other: &Pose) -> Pose {
        self.inverse() * *other
    }

    pub fn is_finite(&self) -> bool {
        self.rotation.is_finite() && self.translation.iter().all(|c| c.is_finite())
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose::new(
            self.rotation * rhs.rotation,
            self.rotation.rotate(&rhs.translation) + self.translation,
        )
    }
}

/// Axis-angle vector in so(3); the norm is the angle in radians.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RotVec(pub Vec3);

impl RotVec {
    pub fn angle(&self) -> f64 {
        self.0.norm()
    }
}

/// se(3) element split into its translational (`v`) and rotational (`omega`) parts.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Twist {
    pub v: Vec3,
    pub omega: Vec3,
}

pub fn hat(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

pub fn so3_exp(w: &RotVec) -> Rotation {
    let theta2 = w.0.norm_squared();
    let theta = theta2.sqrt();
    let (real, imag) = if theta < EXP_TAYLOR_THRESHOLD {
        (1.0 - theta2 / 8.0, 0.5 - theta2 / 48.0)
    } else {
        let half = 0.5 * theta;
        (half.cos(), half.sin() / theta)
    };
    Rotation::from_quaternion(real, imag * w.0.x, imag * w.0.y, imag * w.0.z)
}

/// Canonical axis-angle with angle in `[0, pi]`.
///
/// Works on the quaternion directly: `atan2` of the vector and scalar parts
/// stays well conditioned at both ends of the range, including half turns.
pub fn so3_log(r: &Rotation) -> RotVec {
    let [w, x, y, z] = r.quaternion();
    let n = (x * x + y * y + z * z).sqrt();
    let scale = if n < LOG_TAYLOR_THRESHOLD {
        // theta / n = 2 atan(n/w) / n
        2.0 / w * (1.0 - n * n / (3.0 * w * w))
    } else {
        2.0 * n.atan2(w) / n
    };
    RotVec(Vec3::new(scale * x, scale * y, scale * z))
}

/// Left Jacobian of SO(3), the `V` matrix mapping `v` to the translation.
pub fn left_jacobian(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(omega);
    let (a, b) = if theta < JACOBIAN_TAYLOR_THRESHOLD {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let half_sin = (0.5 * theta).sin();
        (
            2.0 * half_sin * half_sin / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Mat3::identity() + a * w + b * w * w
}

pub fn left_jacobian_inverse(omega: &Vec3) -> Mat3 {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(omega);
    let c = if theta < 1e-2 {
        1.0 / 12.0 + theta2 / 720.0 + theta2 * theta2 / 30240.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half * half.cos() / half.sin()) / theta2
    };
    Mat3::identity() - 0.5 * w + c * w * w
}

pub fn se3_exp(t: &Twist) -> Pose {
    let rotation = so3_exp(&RotVec(t.omega));
    Pose::new(rotation, left_jacobian(&t.omega) * t.v)
}

pub fn se3_log(p: &Pose) -> Twist {
    let omega = so3_log(&p.rotation).0;
    Twist {
        v: left_jacobian_inverse(&omega) * p.translation,
        omega,
    }
}

/// Intrinsic Z-Y-X Euler angles as `(yaw, pitch, roll)` in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EulerZyx {
    pub angles: Vec3,
    /// Set when `|cos(pitch)|` is below the gimbal threshold; yaw and roll
    /// are then not separable and roll is reported as zero.
    pub gimbal: bool,
}

pub fn euler_from(r: &Rotation) -> EulerZyx {
    let m = r.matrix();
    let cos_pitch = (m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]).sqrt();
    let pitch = (-m[(2, 0)]).atan2(cos_pitch);
    if cos_pitch < GIMBAL_THRESHOLD {
        let yaw = (-m[(0, 1)]).atan2(m[(1, 1)]);
        return EulerZyx {
            angles: Vec3::new(yaw, pitch, 0.0),
            gimbal: true,
        };
    }
    let yaw = m[(1, 0)].atan2(m[(0, 0)]);
    let roll = m[(2, 1)].atan2(m[(2, 2)]);
    EulerZyx {
        angles: Vec3::new(yaw, pitch, roll),
        gimbal: false,
    }
}

/// Inverse of [`euler_from`]: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to(angles: &Vec3) -> Rotation {
    Rotation::about_z(angles.x) * Rotation::about_y(angles.y) * Rotation::about_x(angles.z)
}

/// Geodesic interpolation from `q0` (a = 0) to `q1` (a = 1) along the
/// shortest arc.
///
/// Evaluated as `q0 * exp(a * log(q0^-1 q1))`; the quaternion log is
/// `atan2`-based, so nearly-equal inputs need no separate linear branch.
pub fn slerp(q0: &Rotation, q1: &Rotation, a: f64) -> Rotation {
    if a == 0.0 {
        return *q0;
    }
    if a == 1.0 {
        return *q1;
    }
    let delta = so3_log(&(q0.inverse() * *q1));
    *q0 * so3_exp(&RotVec(a * delta.0))
}

/// Geodesic interpolation from the identity to `r`.
pub fn slerp_from_identity(r: &Rotation, a: f64) -> Rotation {
    slerp(&Rotation::identity(), r, a)
}

pub fn lerp(v0: &Vec3, v1: &Vec3, a: f64) -> Vec3 {
    v0 + a * (v1 - v0)
}

/// Geodesic angle between two rotations, in degrees within `[0, 180]`.
pub fn rotation_angle_deg(r1: &Rotation, r2: &Rotation) -> f64 {
    (r1.inverse() * *r2).angle().to_degrees().min(180.0)
}

/// Checks `det(R) = 1` and `max|R^T R - I| < tol`, both to `tol`.
pub fn is_rotation_matrix(m: &Mat3, tol: f64) -> bool {
    let det_ok = (m.determinant() - 1.0).abs() < tol;
    let ortho = (m.transpose() * m - Mat3::identity()).amax();
    det_ok && ortho < tol
}
