//! Command-line front end: argument definitions and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::baseline::{RotSpace, TransSpace};
use crate::config::{RunConfig, TrajFormat};
use crate::error::{Error, Result};
use crate::eval::{bench, run_protocol, write_csv, ReportRow};
use crate::fixtures::{drift_fixture, singular_fixture, DriftParams, EvalFixture, FixtureKind, SingularParams};
use crate::io::{
    format_keyframe_index, read_keyframe_index, read_kitti, read_tum, resolve_keyframes, write_kitti, write_tum,
};
use crate::liegeom::Pose;
use crate::pipeline::{complete_updates, correct_one, correct_trajectory, Method, SegmentDiagnostics};
use crate::synth::{apply_similarity_update, generate_scene, write_scene, PathShape, SceneSpec, Similarity};
use crate::trajectory::{snap_to_gt, FrameId, KeyframeUpdate, TimestampIndex, Trajectory};

/// Exit status for any input, validation or I/O failure.
pub const EXIT_INPUT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "posecorrect",
    version,
    about = "Relative-frame pose correction after keyframe updates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Correct a trajectory after its keyframes were updated.
    Correct(CorrectArgs),
    /// Snap keyframes to ground truth and score each method on relative frames.
    Evaluate(EvaluateArgs),
    /// Write a synthetic scene with matching trajectory files.
    Simulate(SimulateArgs),
    /// Time single-segment corrections per method.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML file with default values; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated methods, or "all".
    #[arg(long)]
    pub methods: Option<String>,
    /// Translation space paired with rotation baselines.
    #[arg(long)]
    pub trans_space: Option<TransSpace>,
    /// Rotation space paired with translation baselines.
    #[arg(long)]
    pub rot_space: Option<RotSpace>,
    /// Use the squared distance ratio as scale factor.
    #[arg(long)]
    pub scale_squared: bool,
    /// Divide without the singularity guard in the baselines.
    #[arg(long)]
    pub raw_division: bool,
    /// Timestamp association tolerance in seconds.
    #[arg(long)]
    pub assoc_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Trajectory file format (tum or kitti).
    #[arg(long)]
    pub format: Option<TrajFormat>,
    /// Frame rate used to synthesize KITTI timestamps.
    #[arg(long)]
    pub kitti_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long)]
    pub kf_index: Option<PathBuf>,
    /// Keyframe poses before the update (TUM); defaults to the trajectory's.
    #[arg(long)]
    pub kf_old: Option<PathBuf>,
    /// Keyframe poses after the update (TUM).
    #[arg(long)]
    pub kf_new: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub kf_index: Option<PathBuf>,
    /// Sequence name written to the report.
    #[arg(long)]
    pub sequence: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// similarity, singular or drift.
    #[arg(long)]
    pub fixture: Option<FixtureKind>,
    /// Path shape of similarity fixtures: forward, mav, line or pure-rotation.
    #[arg(long)]
    pub shape: Option<PathShape>,
    /// Scale of the similarity update.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub keyframes: Option<usize>,
    /// Relative frames per segment.
    #[arg(long)]
    pub rels: Option<usize>,
    /// Pixel noise standard deviation.
    #[arg(long)]
    pub pixel_noise: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Benchmark on this trajectory instead of a synthetic one (needs --gt and --kf-index).
    #[arg(long)]
    pub traj: Option<PathBuf>,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub kf_index: Option<PathBuf>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub keyframes: Option<usize>,
    #[arg(long)]
    pub rels: Option<usize>,
}

fn overlay<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = &common.methods {
        cfg.methods = if m.trim() == "all" {
            Method::ALL.to_vec()
        } else {
            Method::parse_list(m)?
        };
    }
    overlay(&mut cfg.trans_space, common.trans_space);
    overlay(&mut cfg.rot_space, common.rot_space);
    cfg.scale_squared |= common.scale_squared;
    cfg.raw_division |= common.raw_division;
    overlay(&mut cfg.assoc_tol, common.assoc_tol);
    overlay(&mut cfg.seed, common.seed);
    overlay(&mut cfg.out, common.out.clone());
    overlay(&mut cfg.threads, common.threads);
    overlay(&mut cfg.format, common.format);
    overlay(&mut cfg.kitti_rate_hz, common.kitti_rate);
    Ok(cfg)
}

/// Merges defaults, the optional config file and flags into one validated
/// configuration.
pub fn resolve_config(command: &Command) -> Result<RunConfig> {
    let mut cfg = match command {
        Command::Correct(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay(&mut cfg.traj, a.traj.clone().map(Some));
            overlay(&mut cfg.kf_index, a.kf_index.clone().map(Some));
            overlay(&mut cfg.kf_old, a.kf_old.clone().map(Some));
            overlay(&mut cfg.kf_new, a.kf_new.clone().map(Some));
            cfg.methods = cfg.methods_or(&[Method::Proposed]);
            cfg
        }
        Command::Evaluate(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay(&mut cfg.traj, a.traj.clone().map(Some));
            overlay(&mut cfg.gt, a.gt.clone().map(Some));
            overlay(&mut cfg.kf_index, a.kf_index.clone().map(Some));
            overlay(&mut cfg.sequence, a.sequence.clone());
            cfg.methods = cfg.methods_or(&Method::ALL);
            cfg
        }
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay(&mut cfg.fixture, a.fixture);
            overlay(&mut cfg.shape, a.shape);
            overlay(&mut cfg.scale, a.scale);
            overlay(&mut cfg.keyframes, a.keyframes);
            overlay(&mut cfg.rels_per_segment, a.rels);
            overlay(&mut cfg.pixel_noise, a.pixel_noise);
            cfg
        }
        Command::Bench(a) => {
            let mut cfg = base_config(&a.common)?;
            overlay(&mut cfg.traj, a.traj.clone().map(Some));
            overlay(&mut cfg.gt, a.gt.clone().map(Some));
            overlay(&mut cfg.kf_index, a.kf_index.clone().map(Some));
            overlay(&mut cfg.reps, a.reps);
            overlay(&mut cfg.keyframes, a.keyframes);
            overlay(&mut cfg.rels_per_segment, a.rels);
            cfg.methods = cfg.methods_or(&Method::ALL);
            cfg
        }
    };
    cfg.validate()?;
    if matches!(command, Command::Correct(_)) && cfg.methods.len() != 1 {
        return Err(Error::Config("correct takes exactly one method".into()));
    }
    cfg.methods.dedup();
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(&cli.command)?;
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_file(&cfg.out.join("config.toml"), &cfg.to_toml())?;
    match &cli.command {
        Command::Correct(_) => cmd_correct(&cfg),
        Command::Evaluate(_) => cmd_evaluate(&cfg),
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Bench(_) => cmd_bench(&cfg),
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path, e))
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required {flag}")))
}

fn read_poses(path: &Path, cfg: &RunConfig) -> Result<Vec<(FrameId, Pose)>> {
    match cfg.format {
        TrajFormat::Tum => read_tum(path),
        TrajFormat::Kitti => read_kitti(path, cfg.kitti_rate_hz),
    }
}

fn load_trajectory(cfg: &RunConfig) -> Result<Trajectory> {
    let traj_path = require(&cfg.traj, "--traj")?;
    let kf_path = require(&cfg.kf_index, "--kf-index")?;
    let frames = read_poses(traj_path, cfg)?;
    let refs = read_keyframe_index(kf_path)?;
    let positions = resolve_keyframes(&refs, &frames, cfg.assoc_tol, kf_path)?;
    if positions.is_empty() {
        return Err(Error::Config(format!("{}: no keyframes listed", kf_path.display())));
    }
    Trajectory::from_world(&frames, &positions)
}

/// Matches keyframe pose files to the trajectory's keyframes by timestamp.
fn read_updates(traj: &Trajectory, cfg: &RunConfig) -> Result<Vec<KeyframeUpdate>> {
    let new_path = require(&cfg.kf_new, "--kf-new")?;
    let new = read_tum(new_path)?;
    let old = cfg.kf_old.as_deref().map(|p| read_tum(p).map(|v| (p, v))).transpose()?;
    let kf_frames: Vec<(FrameId, Pose)> = traj.keyframes().iter().map(|k| (k.id, k.world_pose)).collect();
    let kf_index = TimestampIndex::new(&kf_frames);
    let old_index = old.as_ref().map(|(_, v)| TimestampIndex::new(v));
    new.iter()
        .map(|(id, new_pose)| {
            let k = kf_index.nearest(id.timestamp, cfg.assoc_tol).ok_or_else(|| {
                Error::Association(format!("{}: no keyframe at t={}", new_path.display(), id.timestamp))
            })?;
            let old_pose = match (&old, &old_index) {
                (Some((path, poses)), Some(index)) => {
                    let o = index.nearest(id.timestamp, cfg.assoc_tol).ok_or_else(|| {
                        Error::Association(format!("{}: no pose at t={}", path.display(), id.timestamp))
                    })?;
                    poses[o].1
                }
                _ => kf_frames[k].1,
            };
            Ok(KeyframeUpdate {
                index: k,
                old_pose,
                new_pose: *new_pose,
            })
        })
        .collect()
}

fn write_poses(dir: &Path, stem: &str, poses: &[(FrameId, Pose)], format: TrajFormat) -> Result<PathBuf> {
    match format {
        TrajFormat::Tum => {
            let path = dir.join(format!("{stem}.tum"));
            write_tum(&path, poses).map(|_| path)
        }
        TrajFormat::Kitti => {
            let path = dir.join(format!("{stem}.kitti"));
            write_kitti(&path, poses).map(|_| path)
        }
    }
}

#[derive(Serialize)]
struct DiagnosticsRow {
    segment: usize,
    terminal: bool,
    rel_count: usize,
    scale: Option<f64>,
    degenerate_baseline: bool,
    alpha_min: Option<f64>,
    alpha_max: Option<f64>,
    singular_hits: usize,
    gimbal_hits: usize,
    renormalized: usize,
}

impl From<&SegmentDiagnostics> for DiagnosticsRow {
    fn from(d: &SegmentDiagnostics) -> Self {
        Self {
            segment: d.segment,
            terminal: d.terminal,
            rel_count: d.rel_count,
            scale: d.scale,
            degenerate_baseline: d.degenerate_baseline,
            alpha_min: d.alpha_range.map(|r| r.0),
            alpha_max: d.alpha_range.map(|r| r.1),
            singular_hits: d.interp.singular_hits,
            gimbal_hits: d.interp.gimbal_hits,
            renormalized: d.interp.renormalized,
        }
    }
}

fn cmd_correct(cfg: &RunConfig) -> Result<()> {
    let traj = load_trajectory(cfg)?;
    let updates = read_updates(&traj, cfg)?;
    let method = cfg.methods[0];
    let out = correct_trajectory(&traj, &updates, method, &cfg.method_config(), cfg.threads)?;
    let path = write_poses(&cfg.out, "corrected", &out.trajectory.world_poses(), cfg.format)?;
    let rows: Vec<DiagnosticsRow> = out.segments.iter().map(DiagnosticsRow::from).collect();
    write_csv(cfg.out.join("diagnostics.csv"), &rows)?;
    if out.segments.last().is_some_and(|s| s.terminal && s.rel_count > 0) {
        log::info!("terminal segment corrected from its single keyframe");
    }
    println!(
        "{method}: {} segments, {} singular hits, wrote {}",
        out.segments.len(),
        out.singular_hits(),
        path.display()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let traj = load_trajectory(cfg)?;
    let gt = read_poses(require(&cfg.gt, "--gt")?, cfg)?;
    let mcfg = cfg.method_config();
    let mut rows = Vec::with_capacity(cfg.methods.len());
    println!("{:<14} {:>32} {:>32}", "method", "translation (cm)", "rotation (deg)");
    for &method in &cfg.methods {
        let report = run_protocol(&traj, &gt, method, &mcfg, cfg.assoc_tol, cfg.threads)?;
        write_csv(cfg.out.join(format!("errors_{method}.csv")), &report.errors)?;
        println!(
            "{:<14} {:>32} {:>32}",
            method.name(),
            format!("{:.3}", report.translation_cm),
            format!("{:.4}", report.rotation_deg)
        );
        rows.push(ReportRow::new(&cfg.sequence, &report));
    }
    write_csv(cfg.out.join("report.csv"), &rows)
}

fn simulated_fixture(cfg: &RunConfig) -> Result<EvalFixture> {
    match cfg.fixture {
        FixtureKind::Similarity => {
            let spec = SceneSpec {
                keyframes: cfg.keyframes,
                rels_per_segment: cfg.rels_per_segment,
                pixel_noise: cfg.pixel_noise,
                ..SceneSpec::new(cfg.shape, cfg.seed)
            };
            let scene = generate_scene(&spec)?;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
            let sim = Similarity::random(&mut rng, cfg.scale);
            let ground_truth = scene.frames.iter().map(|(id, p)| (*id, sim.apply_pose(p))).collect();
            Ok(EvalFixture {
                name: format!("similarity-{}", cfg.seed),
                estimate: scene.frames.clone(),
                keyframes: scene.keyframes.clone(),
                ground_truth,
                scene,
            })
        }
        FixtureKind::Singular => singular_fixture(
            cfg.seed,
            &SingularParams {
                keyframes: cfg.keyframes,
                rels_per_segment: cfg.rels_per_segment,
                ..SingularParams::default()
            },
        ),
        FixtureKind::Drift => drift_fixture(
            cfg.seed,
            &DriftParams {
                keyframes: cfg.keyframes,
                rels_per_segment: cfg.rels_per_segment,
                ..DriftParams::default()
            },
        ),
    }
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let fx = simulated_fixture(cfg)?;
    let dir = &cfg.out;
    write_scene(dir.join("scene.txt"), &fx.scene)?;
    write_tum(dir.join("est.tum"), &fx.estimate)?;
    write_tum(dir.join("gt.tum"), &fx.ground_truth)?;
    write_file(&dir.join("kf_index.txt"), &format_keyframe_index(&fx.keyframes))?;
    let pick = |poses: &[(FrameId, Pose)]| -> Vec<(FrameId, Pose)> { fx.keyframes.iter().map(|&k| poses[k]).collect() };
    write_tum(dir.join("kf_old.tum"), &pick(&fx.estimate))?;
    write_tum(dir.join("kf_new.tum"), &pick(&fx.ground_truth))?;
    println!(
        "{}: {} frames, {} keyframes, {} landmarks, {} observations",
        fx.name,
        fx.estimate.len(),
        fx.keyframes.len(),
        fx.scene.landmarks.len(),
        fx.scene.observations.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchRow {
    method: String,
    count: usize,
    mean_ms: f64,
    std_ms: f64,
    median_ms: f64,
    min_ms: f64,
    max_ms: f64,
}

fn bench_inputs(cfg: &RunConfig) -> Result<(Trajectory, Vec<KeyframeUpdate>)> {
    if cfg.traj.is_some() {
        let traj = load_trajectory(cfg)?;
        let gt = read_poses(require(&cfg.gt, "--gt")?, cfg)?;
        let updates = snap_to_gt(&traj, &gt, cfg.assoc_tol)?;
        return Ok((traj, updates));
    }
    let spec = SceneSpec {
        keyframes: cfg.keyframes,
        rels_per_segment: cfg.rels_per_segment,
        ..SceneSpec::new(PathShape::Mav, cfg.seed)
    };
    let scene = generate_scene(&spec)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let update = apply_similarity_update(&scene, &Similarity::random(&mut rng, cfg.scale))?;
    Ok((scene.trajectory()?, update.keyframe_updates))
}

fn cmd_bench(cfg: &RunConfig) -> Result<()> {
    let (traj, updates) = bench_inputs(cfg)?;
    let updates = complete_updates(&traj, &updates)?;
    let segments: Vec<_> = traj.segments().iter().filter(|s| !s.is_terminal()).collect();
    if segments.is_empty() {
        return Err(Error::Config("benchmark needs at least one full segment".into()));
    }
    let mcfg = cfg.method_config();
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        let stats = bench(
            |seg| {
                std::hint::black_box(correct_one(seg, &updates, method, &mcfg));
            },
            &segments,
            cfg.reps,
        );
        println!("{:<14} {stats:.4} ms", method.name());
        rows.push(BenchRow {
            method: method.name().into(),
            count: stats.count,
            mean_ms: stats.mean,
            std_ms: stats.std,
            median_ms: stats.median,
            min_ms: stats.min,
            max_ms: stats.max,
        });
    }
    write_csv(cfg.out.join("bench.csv"), &rows)
}
