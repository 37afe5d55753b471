use std::path::Path;
use std::process::{Command, Output};

use annocal::geom::{random_rotation, Point3, Pose, RngStream, Vector3};
use annocal::handeye::{board_grid, views_from_chain, MarkerBoard};
use annocal::io;
use annocal::pivot::synthesize_pivot_poses;
use annocal::sim::{generate_scene, MeshSource};

fn annocal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annocal"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn pivot_calib_reports_offset() {
    let dir = tempfile::tempdir().unwrap();
    let offset = Vector3::new(1.5, 2.5, 120.0);
    let poses = synthesize_pivot_poses(
        &offset,
        &Point3::new(500.0, 0.0, 20.0),
        20,
        40.0,
        0.0,
        &mut RngStream::new(1),
    );
    io::save_poses(&dir.path().join("tip.poses"), &poses).unwrap();
    let o = annocal(&["pivot-calib", "tip.poses", "--out", "pivot.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("1.5000 2.5000 120.0000"), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pivot.json")).unwrap()).unwrap();
    assert_eq!(report["manifest"]["command"], "pivot-calib");
    assert_eq!(
        report["manifest"]["inputs"][0]["sha256"],
        io::file_digest(&dir.path().join("tip.poses")).unwrap()
    );
    assert_eq!(report["units"], "mm");
}

#[test]
fn degenerate_pivot_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    io::save_poses(&dir.path().join("same.poses"), &[Pose::identity(); 5]).unwrap();
    let o = annocal(&["pivot-calib", "same.poses"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}

#[test]
fn malformed_input_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.poses"),
        "# units=mm\n# convention=p->R*p+t\n# columns=qw,qx,qy,qz,tx,ty,tz\n1,0,0,0,0,0,0\n1,0,0,0,0,zero,0\n",
    )
    .unwrap();
    let o = annocal(&["pivot-calib", "bad.poses"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("bad.poses:5"), "{}", stderr(&o));

    std::fs::write(dir.path().join("legacy.poses"), "1,0,0,0,0,0,0\n").unwrap();
    let o = annocal(&["pivot-calib", "legacy.poses"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("units"), "{}", stderr(&o));

    assert_eq!(code(&annocal(&["pivot-calib", "missing.poses"], dir.path())), 1);
    assert_eq!(code(&annocal(&["pivot-calib", "--frobnicate"], dir.path())), 1);
    assert_eq!(code(&annocal(&["--help"], dir.path())), 0);
}

#[test]
fn handeye_writes_per_view_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(3);
    let cam = Pose::new(random_rotation(&mut rng), Vector3::new(30.0, 0.0, 80.0));
    let marker_base = Pose::from_translation(Vector3::new(600.0, 0.0, 0.0));
    let pts = board_grid(4, 3, 30.0);
    let board = MarkerBoard::new(pts.clone(), pts.iter().map(|p| marker_base.apply(p)).collect()).unwrap();
    let ee: Vec<Pose> = (0..6)
        .map(|_| Pose::new(random_rotation(&mut rng), rng.gaussian_vector(200.0)))
        .collect();
    io::save_board(&dir.path().join("b.board"), &board).unwrap();
    io::save_views(&dir.path().join("v.views"), &views_from_chain(&cam, &marker_base, &ee)).unwrap();
    let o = annocal(&["handeye", "b.board", "v.views", "--csv", "views.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("views.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("view,rmse_mm"));
    assert_eq!(csv.lines().count(), 7);
}

#[test]
fn eval_iou_ground_truth_as_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let o = annocal(
        &["gen-scene", "--seed", "3", "--out", "scene.json", "--boxes", "gt.csv"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for threshold in ["0.25", "0.5"] {
        let o = annocal(
            &[
                "eval-iou",
                "gt.csv",
                "gt.csv",
                "--threshold",
                threshold,
                "--csv",
                "ap.csv",
            ],
            dir.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(
            stdout(&o).contains(&format!("mAP@{threshold}: 1.0000")),
            "{}",
            stdout(&o)
        );
    }
    assert_eq!(
        code(&annocal(
            &["eval-iou", "gt.csv", "gt.csv", "--threshold", "1.5"],
            dir.path()
        )),
        1
    );
}

#[test]
fn simulate_scene_file_and_bad_mesh_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = annocal(&["gen-scene", "--seed", "4", "--out", "scene.json"], dir.path());
    assert_eq!(code(&o), 0);
    let o = annocal(
        &[
            "simulate",
            "scene.json",
            "--seed",
            "4",
            "--draws",
            "2",
            "--csv",
            "frames.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("rgbd"));
    assert!(std::fs::read_to_string(dir.path().join("frames.csv"))
        .unwrap()
        .starts_with("camera,object,frame,rmse_mm\n"));

    let mut scene = generate_scene("phocal-like", &mut RngStream::new(4)).unwrap();
    scene.objects[0].mesh = MeshSource::Obj("nowhere/mug.obj".into());
    io::save_scene(&dir.path().join("broken.json"), &scene).unwrap();
    let o = annocal(&["simulate", "broken.json", "--seed", "1"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mug.obj"), "{}", stderr(&o));
}

#[test]
fn simulate_noise_file_and_unseeded_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("noise.json"),
        r#"{"obj_translation_mm": 0.5, "handeye_target_rmse": {}, "seed": 11}"#,
    )
    .unwrap();
    let o = annocal(
        &[
            "simulate",
            "--template",
            "phocal-like",
            "--noise",
            "noise.json",
            "--draws",
            "1",
            "--out",
            "r.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["manifest"]["seed"], 11);
    assert_eq!(report["manifest"]["params"]["noise"]["obj_translation_mm"], 0.5);

    std::fs::write(dir.path().join("typo.json"), r#"{"obj_translation": 0.5}"#).unwrap();
    assert_eq!(
        code(&annocal(
            &["simulate", "--template", "phocal-like", "--noise", "typo.json"],
            dir.path()
        )),
        1
    );

    let o = annocal(
        &[
            "simulate",
            "--template",
            "phocal-like",
            "--draws",
            "1",
            "--out",
            "auto.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("no --seed given"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("auto.json")).unwrap()).unwrap();
    assert!(report["manifest"]["seed"].is_u64());
}

#[test]
fn annotate_runs_keypoints_then_icp() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = annocal::registration::shapes::Shape::travel_mug(40.0, 95.0)
        .mesh()
        .unwrap();
    io::save_obj(&dir.path().join("mug.obj"), &mesh).unwrap();
    let mut rng = RngStream::new(9);
    let gt = Pose::new(random_rotation(&mut rng), Vector3::new(550.0, 20.0, 45.0));
    let keys: Vec<Point3> = mesh
        .vertices()
        .iter()
        .step_by(mesh.vertices().len() / 5)
        .copied()
        .collect();
    let measured_keys = keys.iter().map(|p| gt.apply(p) + rng.gaussian_vector(0.8)).collect();
    io::save_correspondences(
        &dir.path().join("keys.corr"),
        &annocal::registration::Correspondences::new(measured_keys, keys).unwrap(),
    )
    .unwrap();
    let surface: Vec<Point3> = annocal::registration::sample_surface(&mesh, 40, &mut rng)
        .iter()
        .map(|p| gt.apply(p))
        .collect();
    io::save_points(&dir.path().join("surf.points"), &surface).unwrap();
    std::fs::write(
        dir.path().join("icp.json"),
        r#"{"max_iterations": 60, "sample_count": 80000}"#,
    )
    .unwrap();
    let o = annocal(
        &[
            "annotate",
            "surf.points",
            "mug.obj",
            "keys.corr",
            "--icp-params",
            "icp.json",
            "--out",
            "pose.json",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("converged true"), "{}", stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("pose.json")).unwrap()).unwrap();
    assert_eq!(report["manifest"]["params"]["icp"]["max_iterations"], 60);
    assert_eq!(report["manifest"]["inputs"].as_array().unwrap().len(), 4);
}

#[test]
fn icp_bench_prints_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = annocal(&["icp-bench", "--seed", "0", "--csv", "trials.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("(reported: 0.20 mm / 0.38°)"), "{}", stdout(&o));
    assert_eq!(
        std::fs::read_to_string(dir.path().join("trials.csv"))
            .unwrap()
            .lines()
            .count(),
        16
    );
}
