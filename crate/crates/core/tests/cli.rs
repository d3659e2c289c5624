//! End-to-end CLI checks: subcommand wiring, file formats, exit codes.

use std::path::Path;
use std::process::Command;

use autotrack_core::bench::synth;
use autotrack_core::imaging::{BBox, Frame};
use autotrack_core::pose::pnp::rotation_exp;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_autotrack")
}

fn write_suite(dir: &Path, frames: usize) {
    for mut spec in synth::desk_suite().into_iter().take(2) {
        spec.frames = frames;
        let seq = synth::make_synthetic(&spec);
        synth::write_synthetic(&seq, &dir.join(&spec.name)).unwrap();
    }
}

#[test]
fn bench_emits_structured_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dataset = tmp.path().join("data");
    write_suite(&dataset, 15);
    let report_path = tmp.path().join("report.json");
    let csv_path = tmp.path().join("curves.csv");
    let out = Command::new(bin())
        .args(["bench"])
        .arg(&dataset)
        .arg("--report")
        .arg(&report_path)
        .arg("--csv")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    let sequences = report["sequences"].as_array().unwrap();
    assert_eq!(sequences.len(), 2);
    for seq in sequences {
        assert!(seq["precision_at_20"].as_f64().unwrap() >= 0.0);
        assert_eq!(seq["precision"].as_array().unwrap().len(), 51);
        assert_eq!(seq["success"].as_array().unwrap().len(), 51);
        assert_eq!(seq["trace"].as_array().unwrap().len(), 15);
    }
    assert!(report["aggregate"]["precision_at_20"].as_f64().is_some());
    assert_eq!(report["config"]["zeta"], "13");

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("sequence,curve,threshold,value\n"));
    // 2 sequences x 2 curves x 51 thresholds + header.
    assert_eq!(csv.lines().count(), 1 + 2 * 2 * 51);

    // Frame pooling is selectable for the aggregate.
    let pooled_path = tmp.path().join("pooled.json");
    let out = Command::new(bin())
        .args(["bench"])
        .arg(&dataset)
        .args(["--per-frame-pooling", "--report"])
        .arg(&pooled_path)
        .output()
        .unwrap();
    assert!(out.status.success());
    let pooled: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&pooled_path).unwrap()).unwrap();
    assert_eq!(pooled["aggregate"]["mode"], "per-frame");
}

#[test]
fn track_trace_shows_fixed_theta_for_strcf() {
    let tmp = tempfile::tempdir().unwrap();
    let seq_dir = tmp.path().join("seq");
    let mut spec = synth::desk_suite().remove(0);
    spec.frames = 10;
    let seq = synth::make_synthetic(&spec);
    synth::write_synthetic(&seq, &seq_dir).unwrap();

    let trace_path = tmp.path().join("trace.jsonl");
    let out = Command::new(bin())
        .args(["track"])
        .arg(&seq_dir)
        .args(["--variant", "strcf", "--trace"])
        .arg(&trace_path)
        .output()
        .unwrap();
    assert!(out.status.success());

    let trace = std::fs::read_to_string(&trace_path).unwrap();
    let rows: Vec<serde_json::Value> = trace
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 10);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row["frame"].as_u64().unwrap(), i as u64 + 1);
        assert_eq!(row["theta"].as_f64().unwrap(), 15.0);
        assert!(row["learned"].as_bool().unwrap());
        assert_eq!(row["bbox"].as_array().unwrap().len(), 4);
        assert!(row["pi_norm"].as_f64().is_some());
    }
}

#[test]
fn unknown_flag_exits_with_usage_error() {
    let out = Command::new(bin()).args(["--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(bin())
        .args(["track", "somewhere", "--nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.to_lowercase().contains("usage"), "stderr: {err}");
}

#[test]
fn missing_sequence_exits_one() {
    let out = Command::new(bin())
        .args(["track", "/nonexistent-seq-dir"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn synth_writes_loadable_sequences() {
    let tmp = tempfile::tempdir().unwrap();
    let spec_path = tmp.path().join("spec.json");
    std::fs::write(
        &spec_path,
        serde_json::json!({
            "name": "cli-demo",
            "width": 160, "height": 120, "frames": 8, "seed": 11,
            "object": {"w": 24, "h": 24, "x0": 30.0, "y0": 40.0},
            "motion": {"type": "linear", "vx": 2.0, "vy": 1.0},
            "events": [
                {"type": "illumination", "frame": 3, "duration": 2, "factor": 1.5}
            ]
        })
        .to_string(),
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = Command::new(bin())
        .args(["synth"])
        .arg(&spec_path)
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let seq = autotrack_core::bench::load_sequence(&out_dir).unwrap();
    assert_eq!(seq.len(), 8);
    assert_eq!(seq.groundtruth[0].x, 30.0);
}

#[test]
fn config_file_is_honored_and_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let seq_dir = tmp.path().join("seq");
    let mut spec = synth::desk_suite().remove(0);
    spec.frames = 6;
    let seq = synth::make_synthetic(&spec);
    synth::write_synthetic(&seq, &seq_dir).unwrap();

    let cfg_path = tmp.path().join("tracker.cfg");
    std::fs::write(&cfg_path, "variant=atr\nscales=3\nadmm_iters=2\n").unwrap();
    let out = Command::new(bin())
        .args(["track"])
        .arg(&seq_dir)
        .args(["--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert!(out.status.success());

    std::fs::write(&cfg_path, "zeta=-4\n").unwrap();
    let out = Command::new(bin())
        .args(["track"])
        .arg(&seq_dir)
        .args(["--config"])
        .arg(&cfg_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config-invalid: zeta"));
}

/// Render a four-marker rig seen from a translating camera and check the
/// pose subcommand end to end.
#[test]
fn pose_pipeline_over_synthetic_rig() {
    let tmp = tempfile::tempdir().unwrap();
    let cam_fx = 400.0;
    let (img_w, img_h) = (640usize, 360usize);
    let camera = serde_json::json!({
        "fx": cam_fx, "fy": cam_fx, "cx": img_w as f64 / 2.0, "cy": img_h as f64 / 2.0,
        "dist": [0.0, 0.0, 0.0, 0.0]
    });
    let world = [
        [0.0, 0.0, 0.0],
        [0.52, 0.03, 0.0],
        [0.49, 0.47, 0.0],
        [-0.05, 0.5, 0.0],
    ];
    let r = rotation_exp(&nalgebra::Vector3::new(0.0, 0.0, 0.02));

    let marker_px = 26usize;
    let n_frames = 12usize;
    let seq_dir = tmp.path().join("rig");
    let img_dir = seq_dir.join("img");
    std::fs::create_dir_all(&img_dir).unwrap();
    let project = |p: &[f64; 3], t: &nalgebra::Vector3<f64>| {
        let pc = r * nalgebra::Vector3::new(p[0], p[1], p[2]) + t;
        (
            cam_fx * pc.x / pc.z + img_w as f64 / 2.0,
            cam_fx * pc.y / pc.z + img_h as f64 / 2.0,
        )
    };
    let mut init_boxes = [[0.0f64; 4]; 4];
    let mut gt = Vec::new();
    for f in 0..n_frames {
        // Camera slides sideways; markers stay rigid in the world.
        let cam_center = nalgebra::Vector3::new(0.25 - 0.01 * f as f64, 0.25, -2.0);
        let t = -r * cam_center;
        let mut frame = Frame::filled(img_w, img_h, 1, 50).unwrap();
        for (m, p) in world.iter().enumerate() {
            let (u, v) = project(p, &t);
            for dy in 0..marker_px {
                for dx in 0..marker_px {
                    let x = u as i64 - marker_px as i64 / 2 + dx as i64;
                    let y = v as i64 - marker_px as i64 / 2 + dy as i64;
                    if x >= 0 && y >= 0 && (x as usize) < img_w && (y as usize) < img_h {
                        let tex = 140 + ((dx * (17 + m) + dy * 11) % 100) as u8;
                        frame.set(x as usize, y as usize, 0, tex);
                    }
                }
            }
            if f == 0 {
                init_boxes[m] = [
                    u - marker_px as f64 / 2.0,
                    v - marker_px as f64 / 2.0,
                    marker_px as f64,
                    marker_px as f64,
                ];
            }
        }
        autotrack_core::bench::loader::save_frame(
            &frame,
            &img_dir.join(format!("{:04}.png", f + 1)),
        )
        .unwrap();
        gt.push(BBox::new(0.0, 0.0, 1.0, 1.0));
    }
    std::fs::write(
        seq_dir.join("groundtruth_rect.txt"),
        autotrack_core::bench::loader::groundtruth_text(&gt),
    )
    .unwrap();

    let markers_path = tmp.path().join("markers.json");
    std::fs::write(
        &markers_path,
        serde_json::json!({ "points_world": world, "init_boxes": init_boxes }).to_string(),
    )
    .unwrap();
    let camera_path = tmp.path().join("camera.json");
    std::fs::write(&camera_path, camera.to_string()).unwrap();

    let report_path = tmp.path().join("pose.json");
    let out = Command::new(bin())
        .args(["pose"])
        .arg(&seq_dir)
        .arg(&markers_path)
        .arg(&camera_path)
        .arg("--report")
        .arg(&report_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stdout: {} stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    let frames = report["frames"].as_array().unwrap();
    assert_eq!(frames.len(), n_frames);
    for row in frames {
        assert_eq!(row["r"].as_array().unwrap().len(), 9);
        assert_eq!(row["t"].as_array().unwrap().len(), 3);
        assert_eq!(row["permutation"].as_array().unwrap().len(), 4);
        // Tracked-marker reprojection stays within a few pixels.
        assert!(row["rmse_px"].as_f64().unwrap() < 5.0, "row {row}");
    }
    // Recovered camera height (world z of the camera center) stays near -2 m:
    // c = -R^T t.
    let last = &frames[n_frames - 1];
    let rm: Vec<f64> = last["r"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let tv: Vec<f64> = last["t"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let rot = nalgebra::Matrix3::from_row_slice(&rm);
    let t = nalgebra::Vector3::from_column_slice(&tv);
    let c = -rot.transpose() * t;
    assert!((c.z + 2.0).abs() < 0.05, "camera center {c:?}");
    assert!((c.x - (0.25 - 0.01 * (n_frames - 1) as f64)).abs() < 0.05);

}
