use std::path::{Path, PathBuf};

use posecorrect::io::{
    format_kitti, format_tum, parse_kitti, parse_tum, read_keyframe_index, read_kitti, read_tum, resolve_keyframes,
    write_tum, KeyframeRef,
};
use posecorrect::liegeom::{rotation_angle_deg, so3_exp, RotVec};
use posecorrect::{Error, FrameId, Pose, Vec3};
use proptest::prelude::*;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn assert_same(a: &[(FrameId, Pose)], b: &[(FrameId, Pose)], tol: f64) {
    assert_eq!(a.len(), b.len());
    for ((ia, pa), (ib, pb)) in a.iter().zip(b) {
        assert!((ia.timestamp - ib.timestamp).abs() < tol);
        assert!((pa.translation - pb.translation).amax() < tol, "{ia}");
        assert!(rotation_angle_deg(&pa.rotation, &pb.rotation) < tol, "{ia}");
    }
}

fn parse_error_line(e: &Error) -> usize {
    match e {
        Error::Parse { line, .. } => *line,
        other => panic!("expected a parse error, got {other}"),
    }
}

#[test]
fn tum_stores_scalar_last() {
    let poses = read_tum(fixture("sample.tum")).unwrap();
    assert_eq!(poses.len(), 6);
    // 90 degrees about z at t = 0.1
    let r = poses[1].1.rotation.matrix();
    assert!((r[(0, 1)] + 1.0).abs() < 1e-12 && (r[(1, 0)] - 1.0).abs() < 1e-12);
    assert!((poses[1].1.translation - Vec3::new(0.5, 0.0, 1.0)).amax() < 1e-12);
}

#[test]
fn sample_kitti_matches_sample_tum() {
    let tum = read_tum(fixture("sample.tum")).unwrap();
    let kitti = read_kitti(fixture("sample.kitti"), 10.0).unwrap();
    assert_same(&tum, &kitti, 1e-9);
}

#[test]
fn kitti_tum_conversion_round_trips() {
    let tum = read_tum(fixture("sample.tum")).unwrap();
    let via_kitti = parse_kitti(&format_kitti(&tum), Path::new("x.kitti"), 10.0).unwrap();
    let back = parse_tum(&format_tum(&via_kitti), Path::new("x.tum")).unwrap();
    assert_same(&tum, &back, 1e-9);
}

#[test]
fn kitti_timestamps_follow_the_frame_rate() {
    let poses = read_kitti(fixture("sample.kitti"), 20.0).unwrap();
    assert!((poses[5].0.timestamp - 0.25).abs() < 1e-12);
}

#[test]
fn malformed_tum_lines_are_reported() {
    for (name, line) in [
        ("malformed_fields.tum", 3),
        ("malformed_quat.tum", 2),
        ("malformed_number.tum", 2),
    ] {
        let err = read_tum(fixture(name)).unwrap_err();
        assert_eq!(parse_error_line(&err), line, "{name}");
        assert!(err.to_string().contains(name), "{err}");
    }
}

#[test]
fn malformed_kitti_lines_are_reported() {
    for name in ["malformed_fields.kitti", "drifted_rotation.kitti"] {
        let err = read_kitti(fixture(name), 10.0).unwrap_err();
        assert_eq!(parse_error_line(&err), 2, "{name}");
    }
}

#[test]
fn slightly_drifted_kitti_rotation_is_orthonormalized() {
    let poses = read_kitti(fixture("small_drift.kitti"), 10.0).unwrap();
    let r = poses[0].1.rotation.matrix();
    assert!((r.transpose() * r - nalgebra::Matrix3::identity()).amax() < 1e-12);
    assert!(rotation_angle_deg(&poses[0].1.rotation, &Pose::identity().rotation) < 1e-9);
}

#[test]
fn comment_only_file_is_empty() {
    assert!(parse_tum("# nothing here\n# still nothing\n", Path::new("c.tum"))
        .unwrap()
        .is_empty());
}

#[test]
fn unsorted_file_is_sorted() {
    let poses = read_tum(fixture("unsorted.tum")).unwrap();
    let xs: Vec<f64> = poses.iter().map(|(_, p)| p.translation.x).collect();
    assert_eq!(xs, vec![0.0, 1.0, 2.0]);
    let idx: Vec<usize> = poses.iter().map(|(id, _)| id.index).collect();
    assert_eq!(idx, vec![0, 1, 2]);
}

#[test]
fn missing_file_names_the_path() {
    let err = read_tum("/nonexistent/poses.tum").unwrap_err();
    assert!(err.to_string().contains("/nonexistent/poses.tum"), "{err}");
}

#[test]
fn keyframe_index_by_position_and_timestamp() {
    let frames = read_tum(fixture("sample.tum")).unwrap();
    for name in ["sample_kf_index.txt", "sample_kf_index_ts.txt"] {
        let path = fixture(name);
        let refs = read_keyframe_index(&path).unwrap();
        assert_eq!(resolve_keyframes(&refs, &frames, 0.01, &path).unwrap(), vec![0, 3]);
    }
    let refs = read_keyframe_index(fixture("sample_kf_index_ts.txt")).unwrap();
    assert!(matches!(refs[0].1, KeyframeRef::Timestamp(_)));
}

#[test]
fn keyframe_index_out_of_range_names_the_frame() {
    let frames = read_tum(fixture("sample.tum")).unwrap();
    let path = fixture("bad_kf_index.txt");
    let refs = read_keyframe_index(&path).unwrap();
    let err = resolve_keyframes(&refs, &frames, 0.01, &path).unwrap_err();
    assert_eq!(parse_error_line(&err), 3);
    assert!(err.to_string().contains("17"), "{err}");
}

#[test]
fn thousand_pose_file_round_trips() {
    let poses: Vec<(FrameId, Pose)> = (0..1000)
        .map(|i| {
            let f = i as f64;
            let r = so3_exp(&RotVec(Vec3::new((f * 0.37).sin(), (f * 0.11).cos(), f * 0.013)));
            (
                FrameId::new(f / 30.0, i),
                Pose::new(r, Vec3::new(f.sqrt(), -f * 0.25, (f * 0.5).sin() * 40.0)),
            )
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("poses.tum");
    write_tum(&path, &poses).unwrap();
    assert_same(&poses, &read_tum(&path).unwrap(), 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tum_text_round_trip(
        t in 0.0..1e6f64,
        tr in (-1e4..1e4f64, -1e4..1e4f64, -1e4..1e4f64),
        w in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64),
    ) {
        let pose = Pose::new(so3_exp(&RotVec(Vec3::new(w.0, w.1, w.2))), Vec3::new(tr.0, tr.1, tr.2));
        let poses = vec![(FrameId::new(t, 0), pose)];
        let back = parse_tum(&format_tum(&poses), Path::new("p.tum")).unwrap();
        prop_assert_eq!(back[0].0.timestamp, t);
        prop_assert!((back[0].1.translation - pose.translation).amax() < 1e-9);
        prop_assert!(rotation_angle_deg(&back[0].1.rotation, &pose.rotation) < 1e-9);
    }
}
