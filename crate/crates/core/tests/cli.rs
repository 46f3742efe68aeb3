use std::path::Path;
use std::process::{Command, Output};

use posecorrect::io::{read_keyframe_index, read_tum, resolve_keyframes};
use posecorrect::liegeom::rotation_angle_deg;
use posecorrect::{FrameId, Pose};

fn posecorrect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posecorrect"))
        .args(args)
        .env("POSECORRECT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = posecorrect(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
        .display()
        .to_string()
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn max_diff(a: &[(FrameId, Pose)], b: &[(FrameId, Pose)]) -> (f64, f64) {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold((0.0f64, 0.0f64), |(t, r), ((_, pa), (_, pb))| {
        (
            t.max((pa.translation - pb.translation).amax()),
            r.max(rotation_angle_deg(&pa.rotation, &pb.rotation)),
        )
    })
}

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out"];
    let d = s(dir);
    args.push(&d);
    args.extend_from_slice(extra);
    ok(&args);
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[col].to_string()).collect()
}

#[test]
fn unchanged_keyframes_leave_the_trajectory_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let kf_new = dir.path().join("kf.tum");
    let frames = read_tum(fixture("sample.tum")).unwrap();
    let kfs: Vec<_> = [0, 3].iter().map(|&i| frames[i]).collect();
    posecorrect::io::write_tum(&kf_new, &kfs).unwrap();
    for method in ["proposed", "xyz", "so3", "euler"] {
        let out = dir.path().join(method);
        ok(&[
            "correct",
            "--traj",
            &fixture("sample.tum"),
            "--kf-index",
            &fixture("sample_kf_index.txt"),
            "--kf-new",
            &s(&kf_new),
            "--methods",
            method,
            "--out",
            &s(&out),
        ]);
        let corrected = read_tum(out.join("corrected.tum")).unwrap();
        let (t, r) = max_diff(&corrected, &frames);
        assert!(t < 1e-9 && r < 1e-9, "{method}: {t} {r}");
        assert!(out.join("diagnostics.csv").exists());
        assert!(out.join("config.toml").exists());
    }
}

#[test]
fn simulated_similarity_is_corrected_exactly() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--fixture", "similarity", "--seed", "5", "--scale", "2.5"],
    );
    let out = dir.path().join("out");
    ok(&[
        "correct",
        "--traj",
        &s(&dir.path().join("est.tum")),
        "--kf-index",
        &s(&dir.path().join("kf_index.txt")),
        "--kf-old",
        &s(&dir.path().join("kf_old.tum")),
        "--kf-new",
        &s(&dir.path().join("kf_new.tum")),
        "--out",
        &s(&out),
    ]);
    let corrected = read_tum(out.join("corrected.tum")).unwrap();
    let gt = read_tum(dir.path().join("gt.tum")).unwrap();
    let kf_path = dir.path().join("kf_index.txt");
    let kfs = resolve_keyframes(&read_keyframe_index(&kf_path).unwrap(), &gt, 0.01, &kf_path).unwrap();
    // frames after the last keyframe have no closing keyframe to fix their scale
    let closed = kfs.last().unwrap() + 1;
    let (t, r) = max_diff(&corrected[..closed], &gt[..closed]);
    assert!(t < 1e-6 && r < 1e-6, "{t} {r}");

    let terminal = csv_column(&out.join("diagnostics.csv"), "terminal");
    assert_eq!(terminal.last().unwrap(), "true");
    assert!(terminal[..terminal.len() - 1].iter().all(|v| v == "false"));
}

#[test]
fn missing_input_file_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no_such_keyframes.txt");
    let out = posecorrect(&[
        "correct",
        "--traj",
        &fixture("sample.tum"),
        "--kf-index",
        &s(&missing),
        "--kf-new",
        &fixture("sample.tum"),
        "--out",
        &s(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_keyframes.txt"));
}

#[test]
fn malformed_input_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = posecorrect(&[
        "evaluate",
        "--traj",
        &fixture("malformed_quat.tum"),
        "--gt",
        &fixture("sample.tum"),
        "--kf-index",
        &fixture("sample_kf_index.txt"),
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("malformed_quat.tum:2"));
}

#[test]
fn unknown_method_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = posecorrect(&["bench", "--methods", "bspline", "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bspline"));
}

#[test]
fn ground_truth_as_estimate_reports_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "evaluate",
        "--traj",
        &fixture("sample.tum"),
        "--gt",
        &fixture("sample.tum"),
        "--kf-index",
        &fixture("sample_kf_index.txt"),
        "--out",
        &s(dir.path()),
    ]);
    let report = dir.path().join("report.csv");
    assert_eq!(csv_rows(&report).len(), 7);
    for col in ["t_mean_cm", "t_median_cm", "r_mean_deg", "r_median_deg"] {
        for v in csv_column(&report, col) {
            assert!(v.parse::<f64>().unwrap().abs() < 1e-9, "{col}: {v}");
        }
    }
    assert!(dir.path().join("errors_proposed.csv").exists());
}

#[test]
fn proposed_beats_se3_on_the_singular_fixture() {
    let dir = tempfile::tempdir().unwrap();
    simulate(
        dir.path(),
        &["--fixture", "singular", "--keyframes", "40", "--seed", "3"],
    );
    let out = dir.path().join("eval");
    ok(&[
        "evaluate",
        "--traj",
        &s(&dir.path().join("est.tum")),
        "--gt",
        &s(&dir.path().join("gt.tum")),
        "--kf-index",
        &s(&dir.path().join("kf_index.txt")),
        "--methods",
        "se3-v,proposed",
        "--out",
        &s(&out),
    ]);
    let report = out.join("report.csv");
    let methods = csv_column(&report, "method");
    let means: Vec<f64> = csv_column(&report, "t_mean_cm")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(methods, vec!["se3-v", "proposed"]);
    assert!(means[1] < means[0], "{means:?}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "reps = 3\nkeyframes = 5\nmethods = [\"xyz\", \"so3\"]\nseed = 9\n",
    )
    .unwrap();
    let out = dir.path().join("bench");
    ok(&["bench", "--config", &s(&cfg), "--keyframes", "4", "--out", &s(&out)]);
    let echoed = std::fs::read_to_string(out.join("config.toml")).unwrap();
    let echoed: toml::Table = toml::from_str(&echoed).unwrap();
    assert_eq!(echoed["keyframes"].as_integer(), Some(4));
    assert_eq!(echoed["reps"].as_integer(), Some(3));
    assert_eq!(echoed["seed"].as_integer(), Some(9));
    assert_eq!(csv_column(&out.join("bench.csv"), "method"), vec!["xyz", "so3"]);
    // 3 full segments, 3 repetitions each
    assert_eq!(csv_column(&out.join("bench.csv"), "count"), vec!["9", "9"]);
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "repetitions = 3\n").unwrap();
    let out = posecorrect(&["bench", "--config", &s(&cfg), "--out", &s(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}

#[test]
fn kitti_input_produces_kitti_output() {
    let dir = tempfile::tempdir().unwrap();
    let kf_new = dir.path().join("kf.tum");
    let frames = read_tum(fixture("sample.tum")).unwrap();
    posecorrect::io::write_tum(&kf_new, &[frames[0], frames[3]]).unwrap();
    let out = dir.path().join("o");
    ok(&[
        "correct",
        "--format",
        "kitti",
        "--traj",
        &fixture("sample.kitti"),
        "--kf-index",
        &fixture("sample_kf_index.txt"),
        "--kf-new",
        &s(&kf_new),
        "--out",
        &s(&out),
    ]);
    let corrected = posecorrect::io::read_kitti(out.join("corrected.kitti"), 10.0).unwrap();
    let (t, r) = max_diff(&corrected, &frames);
    assert!(t < 1e-9 && r < 1e-9);
}

#[test]
fn bench_writes_its_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["bench", "--reps", "2", "--keyframes", "4", "--out", &s(dir.path())]);
    let rows = csv_rows(&dir.path().join("bench.csv"));
    assert_eq!(rows.len(), 7);
    assert!(String::from_utf8_lossy(&out.stdout).contains("proposed"));
}

#[test]
fn simulate_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--fixture", "drift", "--keyframes", "6"]);
    for f in [
        "scene.txt",
        "est.tum",
        "gt.tum",
        "kf_index.txt",
        "kf_old.tum",
        "kf_new.tum",
        "config.toml",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let scene = posecorrect::synth::read_scene(dir.path().join("scene.txt")).unwrap();
    assert_eq!(scene.keyframes.len(), 6);
}

#[test]
fn correct_refuses_several_methods() {
    let dir = tempfile::tempdir().unwrap();
    let out = posecorrect(&[
        "correct",
        "--traj",
        &fixture("sample.tum"),
        "--kf-index",
        &fixture("sample_kf_index.txt"),
        "--kf-new",
        &fixture("sample.tum"),
        "--methods",
        "xyz,so3",
        "--out",
        &s(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
