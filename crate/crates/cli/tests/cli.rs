use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskfuse::codec::{self, MaskFormat};
use maskfuse::oracle::NoiseSpec;
use maskfuse::{ClassRegistry, Jobs};
use maskfuse_cli::synth::{synthesize, write_dataset};
use maskfuse_cli::SynthConfig;

fn maskfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskfuse"))
        .args(args)
        .env_remove("MASKFUSE_JOBS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dataset(dir: &Path, images: usize, mask_format: MaskFormat) -> PathBuf {
    let reg = ClassRegistry::m4d();
    let cfg = SynthConfig {
        images,
        false_detections: 2,
        noise: NoiseSpec {
            morph_radius: 1,
            box_jitter_sigma: 1.0,
            score_noise_sigma: 0.05,
            ..NoiseSpec::none(4)
        },
        seed: 4,
        ..SynthConfig::default()
    };
    let imgs = synthesize(&cfg, &reg, Jobs::SEQUENTIAL).unwrap();
    write_dataset(&imgs, &reg, dir, mask_format, Jobs::SEQUENTIAL).unwrap()
}

#[test]
fn fuse_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(&tmp.path().join("data"), 4, MaskFormat::Rle);
    let fused = tmp.path().join("fused");
    let out = maskfuse(&["fuse", "--manifest", s(&manifest), "--out", s(&fused), "--jobs", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fused.join("img0003.png").is_file());
    assert!(fused.join("fuse_summary.json").is_file());

    let ev = tmp.path().join("eval");
    let out = maskfuse(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--predictions",
        s(&fused),
        "--out",
        s(&ev),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table: codec::ReportTable = codec::read_json(&ev.join("report.json")).unwrap();
    assert_eq!(table.rows.len(), 1);
    assert!(table.rows[0].miou > 0.0 && table.rows[0].miou <= 1.0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mIoU"));
}

#[test]
fn missing_mask_is_partial_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(&tmp.path().join("data"), 3, MaskFormat::Png);
    std::fs::remove_file(tmp.path().join("data/masks/img0001__0.png")).unwrap();
    let fused = tmp.path().join("fused");
    let out = maskfuse(&[
        "fuse",
        "--manifest",
        s(&manifest),
        "--out",
        s(&fused),
        "--threshold",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("img0001"));
    assert!(fused.join("img0000.png").is_file());
    assert!(!fused.join("img0001.png").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(&tmp.path().join("data"), 2, MaskFormat::Png);
    let out_dir = tmp.path().join("o");
    let cases: Vec<Vec<&str>> = vec![
        vec![
            "fuse",
            "--manifest",
            s(&manifest),
            "--out",
            s(&out_dir),
            "--strategy",
            "ordered:ship,land",
        ],
        vec![
            "fuse",
            "--manifest",
            s(&manifest),
            "--out",
            s(&out_dir),
            "--threshold",
            "1.5",
        ],
        vec!["fuse", "--manifest", "/nonexistent/manifest.json", "--out", s(&out_dir)],
        vec![
            "sweep-order",
            "--manifest",
            s(&manifest),
            "--out",
            s(&out_dir),
            "--orders",
            "ship,land,oil_spill,look_alike;ship,land,oil_spill,look_alike",
        ],
        vec![
            "eval",
            "--manifest",
            s(&manifest),
            "--predictions",
            "/nonexistent",
            "--out",
            s(&out_dir),
        ],
        vec!["fuse", "--bogus-flag"],
    ];
    for args in cases {
        let out = maskfuse(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn sweeps_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = dataset(&tmp.path().join("data"), 4, MaskFormat::Png);
    let out_dir = tmp.path().join("sweeps");
    let cache = tmp.path().join("cache");
    let run = |args: &[&str]| {
        let out = maskfuse(args);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    run(&[
        "sweep-order",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out_dir),
        "--cache",
        s(&cache),
        "--seed",
        "9",
    ]);
    let table = codec::report_from_csv(&std::fs::read_to_string(out_dir.join("sweep_order.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 25);
    assert!(table.rows.windows(2).all(|w| w[0].miou >= w[1].miou));
    assert!(table.rows.iter().any(|r| r.extra["strategy"] == "random:9"));
    // second run is served from the cache and must agree
    let first = std::fs::read(out_dir.join("sweep_order.csv")).unwrap();
    run(&[
        "sweep-order",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out_dir),
        "--cache",
        s(&cache),
        "--seed",
        "9",
    ]);
    assert_eq!(std::fs::read(out_dir.join("sweep_order.csv")).unwrap(), first);

    run(&["sweep-threshold", "--manifest", s(&manifest), "--out", s(&out_dir)]);
    let table = codec::report_from_csv(&std::fs::read_to_string(out_dir.join("sweep_threshold.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 10);
    let kept: Vec<u64> = table
        .rows
        .iter()
        .map(|r| r.extra["detections_kept"].parse().unwrap())
        .collect();
    assert!(kept.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(
        table.rows.iter().filter(|r| r.extra.contains_key("reference")).count(),
        1
    );

    run(&[
        "gtbox",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out_dir),
        "--sigmas",
        "3,6",
        "--ensemble",
        "2",
    ]);
    let table = codec::report_from_csv(&std::fs::read_to_string(out_dir.join("gtbox_study.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(table.rows[0].miou, 1.0);
    assert!(table.rows[1..].iter().all(|r| r.miou < 1.0));
}

#[test]
fn synth_and_colorize() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = maskfuse(&[
        "synth",
        "--out",
        s(&data),
        "--images",
        "2",
        "--seed",
        "3",
        "--mask-format",
        "rle",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(data.join("masks/img0000__0.json").is_file());
    let palette = tmp.path().join("palette.json");
    std::fs::write(
        &palette,
        r#"{"sea_surface":[0,0,0],"oil_spill":[0,255,255],"look_alike":[255,0,0],"ship":[153,76,0],"land":[0,153,0]}"#,
    )
    .unwrap();
    let colors = tmp.path().join("colors");
    let out = maskfuse(&[
        "colorize",
        "--manifest",
        s(&data.join("manifest.json")),
        "--predictions",
        s(&data.join("gt")),
        "--palette",
        s(&palette),
        "--out",
        s(&colors),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(colors.join("img0001.png").is_file());
}
