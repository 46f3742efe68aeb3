//! Synthetic scenes: landmarks, a pinhole camera, ground-truth frames and the
//! pixel measurements they produce.
//!
//! Poses are camera-to-world (`T_world_camera`); the camera looks along its
//! `+z` axis with `x` to the right and `y` down.
//!
//! # Scene file
//!
//! A scene serializes to a line-oriented text container. Every section
//! starts with a header carrying its record count:
//!
//! ```text
//! # posecorrect scene v1
//! camera <fx> <fy> <cx> <cy> <width> <height>
//! frames <n>
//! <t> <tx> <ty> <tz> <qx> <qy> <qz> <qw>        (n TUM lines)
//! keyframes <k>
//! <frame position>                             (k lines)
//! landmarks <m>
//! <id> <x> <y> <z>                             (m lines)
//! observations <o>
//! <frame position> <landmark id> <u> <v> <depth>   (o lines)
//! ```
//!
//! Floats are written in shortest round-trip form, so equal scenes produce
//! byte-identical files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{format_tum, parse_tum};
use crate::liegeom::{euler_to, so3_exp, Pose, RotVec, Rotation, Vec3};
use crate::trajectory::{FrameId, KeyframeUpdate, Trajectory};

pub type Vec2 = Vector2<f64>;

pub const MIN_DEPTH: f64 = 1e-6;
pub const LANDMARK_DEPTH_BAND: (f64, f64) = (2.0, 50.0);
pub const MIN_SHARED_LANDMARKS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl Camera {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::Config("focal lengths must be positive".into()));
        }
        if !self.contains(&Vec2::new(self.cx, self.cy)) {
            return Err(Error::Config("principal point outside the image".into()));
        }
        Ok(())
    }

    pub fn contains(&self, px: &Vec2) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmark {
    pub id: usize,
    pub position: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    /// Position of the observing frame in the scene's frame list.
    pub frame: usize,
    pub landmark: usize,
    pub pixel: Vec2,
    pub depth: f64,
}

/// The point is at or behind the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BehindCamera {
    pub depth: f64,
}

/// Projects a world point through `world_to_camera`. Returns the pixel and
/// the depth along the optical axis.
pub fn project(cam: &Camera, world_to_camera: &Pose, p: &Vec3) -> std::result::Result<(Vec2, f64), BehindCamera> {
    let c = world_to_camera.transform_point(p);
    if c.z <= MIN_DEPTH {
        return Err(BehindCamera { depth: c.z });
    }
    let px = Vec2::new(cam.fx * c.x / c.z + cam.cx, cam.fy * c.y / c.z + cam.cy);
    Ok((px, c.z))
}

/// Back-projects a pixel at a known depth into world coordinates.
pub fn unproject(cam: &Camera, world_to_camera: &Pose, pixel: &Vec2, depth: f64) -> Vec3 {
    let c = Vec3::new(
        (pixel.x - cam.cx) / cam.fx * depth,
        (pixel.y - cam.cy) / cam.fy * depth,
        depth,
    );
    world_to_camera.inverse().transform_point(&c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathShape {
    /// Vehicle driving along the optical axis; lateral keyframe-to-keyframe
    /// motion stays below 1e-3 of the forward motion.
    Forward,
    /// Smooth 6-DoF path with sizeable rotations on every axis.
    Mav,
    /// Constant-speed translation along a single axis, no rotation.
    Line,
    /// Camera panning in place.
    PureRotation,
}

impl PathShape {
    pub const ALL: [PathShape; 4] = [
        PathShape::Forward,
        PathShape::Mav,
        PathShape::Line,
        PathShape::PureRotation,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PathShape::Forward => "forward",
            PathShape::Mav => "mav",
            PathShape::Line => "line",
            PathShape::PureRotation => "pure-rotation",
        }
    }
}

impl FromStr for PathShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PathShape::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown path shape '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SceneSpec {
    pub shape: PathShape,
    pub keyframes: usize,
    pub rels_per_segment: usize,
    /// Give the last keyframe trailing relative frames too.
    pub trailing_rels: bool,
    pub landmarks_per_frame: usize,
    pub camera: Camera,
    /// Standard deviation of isotropic pixel noise.
    pub pixel_noise: f64,
    pub frame_dt: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(shape: PathShape, seed: u64) -> Self {
        Self {
            shape,
            keyframes: 12,
            rels_per_segment: 3,
            trailing_rels: true,
            landmarks_per_frame: 12,
            camera: Camera::default(),
            pixel_noise: 0.0,
            frame_dt: 0.1,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub camera: Camera,
    /// Ground-truth world poses of every frame, sorted by timestamp.
    pub frames: Vec<(FrameId, Pose)>,
    /// Positions in `frames` that are keyframes.
    pub keyframes: Vec<usize>,
    pub landmarks: Vec<Landmark>,
    pub observations: Vec<Observation>,
}

impl Scene {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_world(&self.frames, &self.keyframes)
    }

    pub fn frame_poses(&self) -> Vec<Pose> {
        self.frames.iter().map(|(_, p)| *p).collect()
    }
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    let v: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
    sigma * Vec3::from(v)
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let n = StandardNormal;
    let q: [f64; 4] = std::array::from_fn(|_| n.sample(rng));
    Rotation::from_quaternion(q[0], q[1], q[2], q[3])
}

/// Small random rotation with per-axis standard deviation `sigma` (radians).
pub fn random_small_rotation(rng: &mut ChaCha8Rng, sigma: f64) -> Rotation {
    so3_exp(&RotVec(gaussian_vec(rng, sigma)))
}

/// Ground-truth world poses for `n` frames of the given shape. Keyframes sit
/// at every `stride`-th frame.
fn generate_path(shape: PathShape, n: usize, stride: usize, dt: f64, rng: &mut ChaCha8Rng) -> Vec<Pose> {
    match shape {
        PathShape::Forward => forward_path(n, stride, rng),
        PathShape::Mav => {
            let amp = Vec3::new(
                rng.random_range(1.5..3.0),
                rng.random_range(1.0..2.0),
                rng.random_range(1.5..3.0),
            );
            let freq = Vec3::new(
                rng.random_range(0.3..0.6),
                rng.random_range(0.4..0.8),
                rng.random_range(0.3..0.5),
            );
            let phase: [f64; 6] = std::array::from_fn(|_| rng.random_range(0.0..2.0 * PI));
            let speed = rng.random_range(0.4..0.8);
            (0..n)
                .map(|k| {
                    let t = k as f64 * dt;
                    let pos = Vec3::new(
                        amp.x * (freq.x * t + phase[0]).sin() + speed * t,
                        amp.y * (freq.y * t + phase[1]).sin(),
                        amp.z * (freq.z * t + phase[2]).cos(),
                    );
                    let angles = Vec3::new(
                        0.6 * (0.25 * t + phase[3]).sin(),
                        0.3 * (0.35 * t + phase[4]).sin(),
                        0.3 * (0.3 * t + phase[5]).sin(),
                    );
                    Pose::new(euler_to(&angles), pos)
                })
                .collect()
        }
        PathShape::Line => {
            let step = rng.random_range(0.2..0.6);
            (0..n)
                .map(|k| Pose::from_translation(Vec3::new(step * k as f64, 0.0, 0.0)))
                .collect()
        }
        PathShape::PureRotation => {
            let rate = rng.random_range(0.01..0.03);
            let origin = gaussian_vec(rng, 1.0);
            (0..n)
                .map(|k| Pose::new(Rotation::about_y(rate * k as f64), origin))
                .collect()
        }
    }
}

/// Forward motion along `+z` with identity keyframe orientations. Keyframe
/// lateral offsets random-walk within 8e-4 of the forward step; relative
/// frames wobble laterally and in heading between keyframes.
fn forward_path(n: usize, stride: usize, rng: &mut ChaCha8Rng) -> Vec<Pose> {
    let step = rng.random_range(0.8..1.2);
    let kf_step = step * stride as f64;
    let n_kf = n.div_ceil(stride) + 1;
    let mut lateral = vec![Vec3::zeros(); n_kf];
    for i in 1..n_kf {
        let walk = Vec3::new(rng.random_range(-8e-4..8e-4), rng.random_range(-8e-4..8e-4), 0.0);
        lateral[i] = lateral[i - 1] + kf_step * walk;
    }
    let wobble: Vec<(Vec3, Vec3)> = (0..n_kf)
        .map(|_| {
            (
                Vec3::new(rng.random_range(-3e-3..3e-3), rng.random_range(-1.5e-3..1.5e-3), 0.0),
                Vec3::new(
                    rng.random_range(-3e-3..3e-3),
                    rng.random_range(-5e-3..5e-3),
                    rng.random_range(-2e-3..2e-3),
                ),
            )
        })
        .collect();
    (0..n)
        .map(|k| {
            let i = k / stride;
            let u = (k % stride) as f64 / stride as f64;
            let bump = (PI * u).sin();
            let (w_pos, w_rot) = wobble[i];
            let lat = lateral[i] + u * (lateral[i + 1] - lateral[i]) + bump * w_pos;
            let pos = Vec3::new(lat.x, lat.y, step * k as f64);
            Pose::new(so3_exp(&RotVec(bump * w_rot)), pos)
        })
        .collect()
}

/// Generates a reproducible scene.
///
/// Landmarks are spawned inside the central image region of every frame at
/// depths in [`LANDMARK_DEPTH_BAND`]; each landmark is then observed by every
/// frame that sees it. Adjacent frames must share at least
/// [`MIN_SHARED_LANDMARKS`] landmarks.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.camera.validate()?;
    if spec.keyframes == 0 {
        return Err(Error::Config("a scene needs at least one keyframe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let stride = spec.rels_per_segment + 1;
    let n = if spec.trailing_rels {
        spec.keyframes * stride
    } else {
        (spec.keyframes - 1) * stride + 1
    };
    let poses = generate_path(spec.shape, n, stride, spec.frame_dt, &mut rng);
    let frames: Vec<(FrameId, Pose)> = poses
        .iter()
        .enumerate()
        .map(|(k, p)| (FrameId::new(k as f64 * spec.frame_dt, k), *p))
        .collect();
    let keyframes: Vec<usize> = (0..spec.keyframes).map(|i| i * stride).collect();

    let cam = spec.camera;
    let (w, h) = (cam.width as f64, cam.height as f64);
    let mut landmarks = Vec::with_capacity(n * spec.landmarks_per_frame);
    for pose in &poses {
        for _ in 0..spec.landmarks_per_frame {
            let px = Vec2::new(rng.random_range(0.2 * w..0.8 * w), rng.random_range(0.2 * h..0.8 * h));
            let depth = rng.random_range(LANDMARK_DEPTH_BAND.0..LANDMARK_DEPTH_BAND.1);
            landmarks.push(Landmark {
                id: landmarks.len(),
                position: unproject(&cam, &pose.inverse(), &px, depth),
            });
        }
    }

    let noise = (spec.pixel_noise > 0.0)
        .then(|| Normal::new(0.0, spec.pixel_noise))
        .transpose()
        .map_err(|e| Error::Config(format!("pixel noise: {e}")))?;
    let mut observations = Vec::new();
    for (f, pose) in poses.iter().enumerate() {
        let world_to_cam = pose.inverse();
        for lm in &landmarks {
            let Ok((mut px, depth)) = project(&cam, &world_to_cam, &lm.position) else {
                continue;
            };
            if let Some(noise) = &noise {
                px += Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
            if cam.contains(&px) {
                observations.push(Observation {
                    frame: f,
                    landmark: lm.id,
                    pixel: px,
                    depth,
                });
            }
        }
    }

    let scene = Scene {
        camera: cam,
        frames,
        keyframes,
        landmarks,
        observations,
    };
    check_visibility(&scene)?;
    Ok(scene)
}

fn check_visibility(scene: &Scene) -> Result<()> {
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); scene.frames.len()];
    for obs in &scene.observations {
        seen[obs.frame].push(obs.landmark);
    }
    for (f, pair) in seen.windows(2).enumerate() {
        let shared = pair[0].iter().filter(|l| pair[1].binary_search(l).is_ok()).count();
        if shared < MIN_SHARED_LANDMARKS {
            return Err(Error::Infeasible(format!(
                "frames {f} and {} share only {shared} landmarks",
                f + 1
            )));
        }
    }
    Ok(())
}

/// Global similarity `p -> s R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Similarity {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn random(rng: &mut ChaCha8Rng, scale: f64) -> Self {
        Self {
            rotation: random_rotation(rng),
            translation: gaussian_vec(rng, 5.0),
            scale,
        }
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.scale * self.rotation.rotate(p) + self.translation
    }

    /// Moves a camera-to-world pose with the map: the camera is rotated with
    /// the world and its center follows the point map.
    pub fn apply_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.rotation * pose.rotation, self.apply_point(&pose.translation))
    }
}

/// Result of a map refinement: new keyframe poses and updated landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct MapUpdate {
    pub keyframe_updates: Vec<KeyframeUpdate>,
    pub landmarks: Vec<Landmark>,
    /// Per-landmark world displacement `P* - P`.
    pub displacements: Vec<Vec3>,
    pub similarity: Option<Similarity>,
}

/// Applies a similarity to the whole scene. Depths scale uniformly by `s`,
/// so every pixel measurement is preserved.
pub fn apply_similarity_update(scene: &Scene, sim: &Similarity) -> Result<MapUpdate> {
    if sim.scale.is_nan() || sim.scale <= 0.0 {
        return Err(Error::Config(format!(
            "similarity scale must be positive, got {}",
            sim.scale
        )));
    }
    let keyframe_updates = scene
        .keyframes
        .iter()
        .enumerate()
        .map(|(i, &pos)| {
            let old = scene.frames[pos].1;
            KeyframeUpdate {
                index: i,
                old_pose: old,
                new_pose: sim.apply_pose(&old),
            }
        })
        .collect();
    let landmarks: Vec<Landmark> = scene
        .landmarks
        .iter()
        .map(|l| Landmark {
            id: l.id,
            position: sim.apply_point(&l.position),
        })
        .collect();
    let displacements = scene
        .landmarks
        .iter()
        .zip(&landmarks)
        .map(|(a, b)| b.position - a.position)
        .collect();
    Ok(MapUpdate {
        keyframe_updates,
        landmarks,
        displacements,
        similarity: Some(*sim),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reprojection {
    pub rms_px: f64,
    pub used: usize,
    /// Observations whose landmark fell behind the candidate camera.
    pub behind_camera: usize,
}

/// RMS distance between stored observations and reprojections of
/// `landmarks` through the candidate camera-to-world `poses` (one per frame).
pub fn reprojection_rms(scene: &Scene, poses: &[Pose], landmarks: &[Landmark]) -> Result<Reprojection> {
    if poses.len() != scene.frames.len() {
        return Err(Error::Association(format!(
            "{} candidate poses for {} frames",
            poses.len(),
            scene.frames.len()
        )));
    }
    let inverses: Vec<Pose> = poses.iter().map(Pose::inverse).collect();
    let mut sum = 0.0;
    let mut used = 0;
    let mut behind_camera = 0;
    for obs in &scene.observations {
        let lm = landmarks
            .get(obs.landmark)
            .ok_or_else(|| Error::Association(format!("observation of unknown landmark {}", obs.landmark)))?;
        match project(&scene.camera, &inverses[obs.frame], &lm.position) {
            Ok((px, _)) => {
                sum += (px - obs.pixel).norm_squared();
                used += 1;
            }
            Err(_) => behind_camera += 1,
        }
    }
    let rms_px = if used > 0 { (sum / used as f64).sqrt() } else { 0.0 };
    Ok(Reprojection {
        rms_px,
        used,
        behind_camera,
    })
}

const SCENE_HEADER: &str = "# posecorrect scene v1";

pub fn format_scene(scene: &Scene) -> String {
    let c = &scene.camera;
    let mut out = String::new();
    let _ = writeln!(out, "{SCENE_HEADER}");
    let _ = writeln!(
        out,
        "camera {} {} {} {} {} {}",
        c.fx, c.fy, c.cx, c.cy, c.width, c.height
    );
    let _ = writeln!(out, "frames {}", scene.frames.len());
    out.push_str(&format_tum(&scene.frames));
    let _ = writeln!(out, "keyframes {}", scene.keyframes.len());
    for k in &scene.keyframes {
        let _ = writeln!(out, "{k}");
    }
    let _ = writeln!(out, "landmarks {}", scene.landmarks.len());
    for l in &scene.landmarks {
        let p = l.position;
        let _ = writeln!(out, "{} {} {} {}", l.id, p.x, p.y, p.z);
    }
    let _ = writeln!(out, "observations {}", scene.observations.len());
    for o in &scene.observations {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            o.frame, o.landmark, o.pixel.x, o.pixel.y, o.depth
        );
    }
    out
}

pub fn write_scene(path: impl AsRef<Path>, scene: &Scene) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_scene(scene)).map_err(|e| Error::io(path, e))
}

struct SceneReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    path: &'a Path,
}

impl<'a> SceneReader<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.lines.by_ref() {
            let line = line.trim();
            if !line.is_empty() && !line.starts_with('#') {
                return Ok((i + 1, line));
            }
        }
        Err(Error::parse(self.path, 0, "unexpected end of scene file"))
    }

    fn section(&mut self, name: &str) -> Result<(usize, Vec<&'a str>)> {
        let (lineno, line) = self.next_line()?;
        let mut toks = line.split_whitespace();
        if toks.next() != Some(name) {
            return Err(Error::parse(self.path, lineno, format!("expected '{name}' section")));
        }
        Ok((lineno, toks.collect()))
    }

    fn count(&mut self, name: &str) -> Result<usize> {
        let (lineno, toks) = self.section(name)?;
        match toks.as_slice() {
            [n] => n
                .parse()
                .map_err(|_| Error::parse(self.path, lineno, format!("invalid {name} count"))),
            _ => Err(Error::parse(self.path, lineno, format!("expected '{name} <count>'"))),
        }
    }

    fn record<T: FromStr>(&mut self, fields: usize) -> Result<(usize, Vec<T>)> {
        let (lineno, line) = self.next_line()?;
        let vals: Vec<T> = line
            .split_whitespace()
            .map(|t| t.parse::<T>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(self.path, lineno, "invalid number"))?;
        if vals.len() != fields {
            return Err(Error::parse(
                self.path,
                lineno,
                format!("expected {fields} fields, found {}", vals.len()),
            ));
        }
        Ok((lineno, vals))
    }
}

pub fn parse_scene(content: &str, path: &Path) -> Result<Scene> {
    let mut r = SceneReader {
        lines: content.lines().enumerate().peekable(),
        path,
    };
    let (lineno, cam) = r.section("camera")?;
    let bad_cam = || Error::parse(path, lineno, "expected 'camera fx fy cx cy width height'");
    if cam.len() != 6 {
        return Err(bad_cam());
    }
    let f = |i: usize| cam[i].parse::<f64>().map_err(|_| bad_cam());
    let u = |i: usize| cam[i].parse::<u32>().map_err(|_| bad_cam());
    let camera = Camera {
        fx: f(0)?,
        fy: f(1)?,
        cx: f(2)?,
        cy: f(3)?,
        width: u(4)?,
        height: u(5)?,
    };

    let n = r.count("frames")?;
    let mut tum = String::new();
    for _ in 0..n {
        tum.push_str(r.next_line()?.1);
        tum.push('\n');
    }
    let frames = parse_tum(&tum, path)?;

    let k = r.count("keyframes")?;
    let mut keyframes = Vec::with_capacity(k);
    for _ in 0..k {
        let (lineno, v) = r.record::<usize>(1)?;
        if v[0] >= frames.len() {
            return Err(Error::parse(path, lineno, "keyframe position out of range"));
        }
        keyframes.push(v[0]);
    }

    let m = r.count("landmarks")?;
    let mut landmarks = Vec::with_capacity(m);
    for _ in 0..m {
        let (lineno, v) = r.record::<f64>(4)?;
        if v[0] != landmarks.len() as f64 {
            return Err(Error::parse(path, lineno, "landmark ids must be consecutive from 0"));
        }
        landmarks.push(Landmark {
            id: landmarks.len(),
            position: Vec3::new(v[1], v[2], v[3]),
        });
    }

    let o = r.count("observations")?;
    let mut observations = Vec::with_capacity(o);
    for _ in 0..o {
        let (lineno, v) = r.record::<f64>(5)?;
        let (frame, landmark) = (v[0] as usize, v[1] as usize);
        if frame >= frames.len() || landmark >= landmarks.len() {
            return Err(Error::parse(
                path,
                lineno,
                "observation refers to unknown frame or landmark",
            ));
        }
        observations.push(Observation {
            frame,
            landmark,
            pixel: Vec2::new(v[2], v[3]),
            depth: v[4],
        });
    }
    Ok(Scene {
        camera,
        frames,
        keyframes,
        landmarks,
        observations,
    })
}

pub fn read_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let content = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&content, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> Camera {
        Camera {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 320.0,
            width: 640,
            height: 640,
        }
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let (px, d) = project(&cam(), &Pose::identity(), &Vec3::new(0.0, 0.0, 5.0)).unwrap();
        assert_eq!(px, Vec2::new(320.0, 320.0));
        assert_eq!(d, 5.0);
    }

    #[test]
    fn known_pixel() {
        let (px, _) = project(&cam(), &Pose::identity(), &Vec3::new(1.0, 0.0, 5.0)).unwrap();
        assert_eq!(px, Vec2::new(420.0, 320.0));
    }

    #[test]
    fn behind_camera_is_signalled() {
        assert!(project(&cam(), &Pose::identity(), &Vec3::new(0.0, 0.0, -1.0)).is_err());
        assert!(project(&cam(), &Pose::identity(), &Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn unproject_inverts_project() {
        let pose = Pose::new(Rotation::about_y(0.3), Vec3::new(0.5, -0.2, 1.0));
        let p = Vec3::new(0.7, 0.1, 6.0);
        let (px, d) = project(&cam(), &pose, &p).unwrap();
        assert!((unproject(&cam(), &pose, &px, d) - p).amax() < 1e-12);
    }

    #[test]
    fn camera_validation() {
        assert!(Camera::default().validate().is_ok());
        let bad = Camera {
            cx: 900.0,
            ..Camera::default()
        };
        assert!(bad.validate().is_err());
        let bad = Camera {
            fx: 0.0,
            ..Camera::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scene_is_deterministic() {
        let spec = SceneSpec::new(PathShape::Mav, 7);
        let a = format_scene(&generate_scene(&spec).unwrap());
        let b = format_scene(&generate_scene(&spec).unwrap());
        assert_eq!(a, b);
        let other = format_scene(&generate_scene(&SceneSpec::new(PathShape::Mav, 8)).unwrap());
        assert_ne!(a, other);
    }

    #[test]
    fn zero_noise_scenes_have_zero_residual() {
        for shape in PathShape::ALL {
            let scene = generate_scene(&SceneSpec::new(shape, 3)).unwrap();
            let r = reprojection_rms(&scene, &scene.frame_poses(), &scene.landmarks).unwrap();
            assert_eq!(r.rms_px, 0.0, "{shape:?}");
            assert_eq!(r.behind_camera, 0);
        }
    }

    #[test]
    fn pixel_noise_shows_up_in_residual() {
        let spec = SceneSpec {
            pixel_noise: 0.5,
            ..SceneSpec::new(PathShape::Forward, 3)
        };
        let scene = generate_scene(&spec).unwrap();
        let r = reprojection_rms(&scene, &scene.frame_poses(), &scene.landmarks).unwrap();
        assert!(r.rms_px > 0.3 && r.rms_px < 0.8, "{}", r.rms_px);
    }

    #[test]
    fn forward_path_is_forward_dominant() {
        for seed in 0..5 {
            let spec = SceneSpec {
                keyframes: 40,
                ..SceneSpec::new(PathShape::Forward, seed)
            };
            let scene = generate_scene(&spec).unwrap();
            for pair in scene.keyframes.windows(2) {
                let rel = scene.frames[pair[0]].1.between(&scene.frames[pair[1]].1);
                let t = rel.translation;
                assert!(t.x.abs() < 1e-3 * t.z.abs() && t.y.abs() < 1e-3 * t.z.abs(), "{t:?}");
            }
        }
    }

    #[test]
    fn infeasible_scene_is_rejected() {
        let spec = SceneSpec {
            landmarks_per_frame: 0,
            ..SceneSpec::new(PathShape::Line, 0)
        };
        assert!(matches!(generate_scene(&spec), Err(Error::Infeasible(_))));
    }

    #[test]
    fn identity_similarity_changes_nothing() {
        let scene = generate_scene(&SceneSpec::new(PathShape::Line, 1)).unwrap();
        let up = apply_similarity_update(&scene, &Similarity::identity()).unwrap();
        assert!(up.keyframe_updates.iter().all(KeyframeUpdate::is_identity));
        assert_eq!(up.landmarks, scene.landmarks);
    }

    #[test]
    fn non_positive_scale_is_rejected() {
        let scene = generate_scene(&SceneSpec::new(PathShape::Line, 1)).unwrap();
        let sim = Similarity {
            scale: 0.0,
            ..Similarity::identity()
        };
        assert!(apply_similarity_update(&scene, &sim).is_err());
    }

    #[test]
    fn scene_file_round_trip() {
        let spec = SceneSpec {
            pixel_noise: 0.3,
            ..SceneSpec::new(PathShape::Forward, 11)
        };
        let scene = generate_scene(&spec).unwrap();
        let text = format_scene(&scene);
        let back = parse_scene(&text, Path::new("scene.txt")).unwrap();
        assert_eq!(back.observations, scene.observations);
        assert_eq!(back.landmarks, scene.landmarks);
        assert_eq!(back.keyframes, scene.keyframes);
        assert_eq!(format_scene(&back), text);
    }

    #[test]
    fn truncated_scene_file_is_rejected() {
        let scene = generate_scene(&SceneSpec::new(PathShape::Line, 2)).unwrap();
        let text = format_scene(&scene);
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(parse_scene(&cut, Path::new("s.txt")).is_err());
    }
}
