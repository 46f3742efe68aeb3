//! Seeded evaluation fixtures built on synthetic scenes.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liegeom::{Pose, Vec3};
use crate::synth::{
    apply_similarity_update, gaussian_vec, generate_scene, random_small_rotation, MapUpdate, PathShape, Scene,
    SceneSpec, Similarity,
};
use crate::trajectory::{FrameId, Trajectory};

/// An estimated trajectory with its ground truth and keyframe selection.
#[derive(Clone, Debug)]
pub struct EvalFixture {
    pub name: String,
    pub scene: Scene,
    pub estimate: Vec<(FrameId, Pose)>,
    pub ground_truth: Vec<(FrameId, Pose)>,
    pub keyframes: Vec<usize>,
}

impl EvalFixture {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_world(&self.estimate, &self.keyframes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FixtureKind {
    /// Ground truth is a similarity transform of the estimate.
    Similarity,
    /// Forward-dominant path with lateral keyframe perturbations.
    Singular,
    /// 6-DoF path tracked by drifting, noisy odometry.
    Drift,
}

impl FixtureKind {
    pub fn name(&self) -> &'static str {
        match self {
            FixtureKind::Similarity => "similarity",
            FixtureKind::Singular => "singular",
            FixtureKind::Drift => "drift",
        }
    }
}

impl FromStr for FixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [FixtureKind::Similarity, FixtureKind::Singular, FixtureKind::Drift]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown fixture kind '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SimilarityCase {
    pub scene: Scene,
    pub similarity: Similarity,
    pub update: MapUpdate,
    /// Scene frames moved by the similarity.
    pub transformed: Vec<(FrameId, Pose)>,
}

/// Scene of the given shape plus a random rigid motion with fixed `scale`.
/// The scene ends on a keyframe.
pub fn similarity_case(shape: PathShape, scale: f64, seed: u64) -> Result<SimilarityCase> {
    let spec = SceneSpec {
        keyframes: 8,
        trailing_rels: false,
        ..SceneSpec::new(shape, seed)
    };
    let scene = generate_scene(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_5151);
    let similarity = Similarity::random(&mut rng, scale);
    let update = apply_similarity_update(&scene, &similarity)?;
    let transformed = scene
        .frames
        .iter()
        .map(|(id, p)| (*id, similarity.apply_pose(p)))
        .collect();
    Ok(SimilarityCase {
        scene,
        similarity,
        update,
        transformed,
    })
}

impl SimilarityCase {
    pub fn fixture(&self) -> EvalFixture {
        EvalFixture {
            name: "similarity".into(),
            scene: self.scene.clone(),
            estimate: self.scene.frames.clone(),
            ground_truth: self.transformed.clone(),
            keyframes: self.scene.keyframes.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularParams {
    pub keyframes: usize,
    pub rels_per_segment: usize,
    /// Magnitude of the lateral keyframe offset (m).
    pub kf_offset: f64,
    /// Range of the relative-frame tracking jitter magnitude (m).
    pub jitter: (f64, f64),
}

impl Default for SingularParams {
    fn default() -> Self {
        Self {
            keyframes: 60,
            rels_per_segment: 3,
            kf_offset: 0.01,
            jitter: (0.004, 0.006),
        }
    }
}

/// Forward-dominant vehicle path. Ground-truth keyframes sit a fixed lateral
/// distance away from the estimate in a random direction; relative frames
/// follow the time-interpolated keyframe offset plus a tracking jitter of
/// bounded magnitude.
pub fn singular_fixture(seed: u64, params: &SingularParams) -> Result<EvalFixture> {
    let spec = SceneSpec {
        keyframes: params.keyframes,
        rels_per_segment: params.rels_per_segment,
        ..SceneSpec::new(PathShape::Forward, seed)
    };
    let scene = generate_scene(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c0f_fee0);
    let offsets: Vec<Vec3> = (0..params.keyframes)
        .map(|_| {
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            params.kf_offset * Vec3::new(phi.cos(), phi.sin(), 0.0)
        })
        .collect();
    let stride = params.rels_per_segment + 1;
    let ground_truth = scene
        .frames
        .iter()
        .enumerate()
        .map(|(k, (id, pose))| {
            let (i, j) = (k / stride, k % stride);
            let shift = if j == 0 {
                offsets[i]
            } else {
                let u = j as f64 / stride as f64;
                let next = offsets.get(i + 1).unwrap_or(&offsets[i]);
                let dir = gaussian_vec(&mut rng, 1.0).normalize();
                let mag = rng.random_range(params.jitter.0..params.jitter.1);
                offsets[i] + u * (next - offsets[i]) + mag * dir
            };
            (*id, Pose::new(pose.rotation, pose.translation + shift))
        })
        .collect();
    Ok(EvalFixture {
        name: format!("singular-{seed}"),
        estimate: scene.frames.clone(),
        keyframes: scene.keyframes.clone(),
        ground_truth,
        scene,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftParams {
    pub keyframes: usize,
    pub rels_per_segment: usize,
    /// Per-step standard deviation of the log-scale random walk.
    pub scale_walk: f64,
    /// Per-step rotation noise, per axis (rad).
    pub rot_noise: f64,
    /// Per-step translation noise, per axis (m).
    pub trans_noise: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self {
            keyframes: 30,
            rels_per_segment: 4,
            scale_walk: 0.01,
            rot_noise: 0.002,
            trans_noise: 0.002,
        }
    }
}

/// 6-DoF path whose estimate integrates noisy frame-to-frame motion with a
/// slowly drifting scale, as visual odometry would. The sequence ends on a
/// keyframe, so every relative frame lies in a full segment.
pub fn drift_fixture(seed: u64, params: &DriftParams) -> Result<EvalFixture> {
    let spec = SceneSpec {
        keyframes: params.keyframes,
        rels_per_segment: params.rels_per_segment,
        ..SceneSpec::new(PathShape::Mav, seed)
    };
    let scene = generate_scene(&spec)?;
    let last_kf = *scene.keyframes.last().expect("scene has keyframes");
    let frames = &scene.frames[..=last_kf];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00d2_1f70);
    let mut estimate = Vec::with_capacity(frames.len());
    let mut log_scale = 0.0;
    let mut current = frames[0].1;
    estimate.push(frames[0]);
    for pair in frames.windows(2) {
        let step = pair[0].1.between(&pair[1].1);
        log_scale += params.scale_walk * rng.sample::<f64, _>(rand_distr::StandardNormal);
        let noisy = Pose::new(
            step.rotation * random_small_rotation(&mut rng, params.rot_noise),
            log_scale.exp() * step.translation + gaussian_vec(&mut rng, params.trans_noise),
        );
        current = current * noisy;
        estimate.push((pair[1].0, current));
    }
    Ok(EvalFixture {
        name: format!("drift-{seed}"),
        ground_truth: frames.to_vec(),
        keyframes: scene.keyframes.clone(),
        estimate,
        scene,
    })
}
