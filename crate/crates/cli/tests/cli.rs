use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use synthdepth::viewsphere::{upper_hemisphere_vertex_count, IcosahedronOrientation};

const TETRA: &str = "v 0 0 60\nv 55 0 -20\nv -30 48 -20\nv -30 -48 -20\nf 1 2 3\nf 1 3 4\nf 1 4 2\nf 2 4 3\n";

fn synthdepth(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_synthdepth"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) {
    fs::write(dir.join("tetra.obj"), TETRA).unwrap();
    fs::write(
        dir.join("cfg.json"),
        r#"{
            "name": "cli-test",
            "master_seed": 5,
            "objects": [{"mesh": "tetra.obj", "class_id": 2}],
            "viewsphere": {"subdivisions": 1, "in_plane_degrees": [0.0, 30.0]},
            "render": {"size": 24}
        }"#,
    )
    .unwrap();
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn pairs_with_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    let out = synthdepth(
        tmp.path(),
        &["pairs", "--config", "cfg.json", "--out", "ds", "--in-plane-degrees", "[0]", "--warp-xy.max", "2"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&tmp.path().join("ds"));
    assert_eq!(m["augmentation"]["warp_xy"]["max"], 2.0);
    let records = m["records"].as_array().unwrap();
    let views = upper_hemisphere_vertex_count(1, IcosahedronOrientation::Canonical).unwrap();
    assert_eq!(records.len(), views);
    for r in records {
        for key in ["clean", "augmented", "mask"] {
            assert!(tmp.path().join("ds").join(r[key].as_str().unwrap()).is_file());
        }
    }
}

#[test]
fn render_then_augment_matches_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    assert!(synthdepth(tmp.path(), &["pairs", "--config", "cfg.json", "--out", "direct"]).status.success());
    assert!(synthdepth(tmp.path(), &["render", "--config", "cfg.json", "--out", "staged"]).status.success());
    assert!(!tmp.path().join("staged/augmented").exists());
    let out = synthdepth(tmp.path(), &["augment", "--dataset", "staged", "--workers", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let name = "augmented/000007.dpz";
    assert_eq!(
        fs::read(tmp.path().join("direct").join(name)).unwrap(),
        fs::read(tmp.path().join("staged").join(name)).unwrap()
    );
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    let bad_field = synthdepth(tmp.path(), &["render", "--config", "cfg.json", "--out", "a", "--bogus", "1"]);
    assert_eq!(bad_field.status.code(), Some(1));
    let ambiguous = synthdepth(tmp.path(), &["render", "--config", "cfg.json", "--out", "a", "--min", "1"]);
    assert_eq!(ambiguous.status.code(), Some(1));
    let invalid = synthdepth(tmp.path(), &["render", "--config", "cfg.json", "--out", "a", "--size", "0"]);
    assert_eq!(invalid.status.code(), Some(1));

    let missing_mesh = synthdepth(
        tmp.path(),
        &["render", "--config", "cfg.json", "--out", "b", "--objects", r#"[{"mesh": "gone.obj", "class_id": 1}]"#],
    );
    assert_eq!(missing_mesh.status.code(), Some(2));
    assert_eq!(manifest(&tmp.path().join("b"))["partial"], true);
}

#[test]
fn export_and_noise_preview() {
    let tmp = tempfile::tempdir().unwrap();
    write_config(tmp.path());
    assert!(synthdepth(tmp.path(), &["render", "--config", "cfg.json", "--out", "ds"]).status.success());
    let out = synthdepth(tmp.path(), &["export-png", "--input", "ds/clean", "--output", "png"]);
    assert!(out.status.success());
    let views = upper_hemisphere_vertex_count(1, IcosahedronOrientation::Canonical).unwrap();
    assert_eq!(fs::read_dir(tmp.path().join("png")).unwrap().count(), 2 * views);
    let png = fs::read(tmp.path().join("png/000000.png")).unwrap();
    assert_eq!(&png[1..4], b"PNG");

    let out = synthdepth(tmp.path(), &["noise-preview", "--kind", "cellular", "--size", "32", "--output", "n.png"]);
    assert!(out.status.success());
    assert!(tmp.path().join("n.png").is_file());
}

#[test]
fn eval_report() {
    let tmp = tempfile::tempdir().unwrap();
    let id = r#"{"w": 1.0, "x": 0.0, "y": 0.0, "z": 0.0}"#;
    let ten = format!(
        r#"{{"w": {}, "x": 0.0, "y": {}, "z": 0.0}}"#,
        5f64.to_radians().cos(),
        5f64.to_radians().sin()
    );
    let file = format!(
        r#"{{
            "database": [{{"feature": [0.0], "class_id": 1, "pose": {id}}}, {{"feature": [10.0], "class_id": 2, "pose": {id}}}],
            "queries": [{{"feature": [0.5], "class_id": 1, "pose": {ten}}}, {{"feature": [9.0], "class_id": 1, "pose": {id}}}]
        }}"#
    );
    fs::write(tmp.path().join("desc.json"), file).unwrap();
    let out = synthdepth(tmp.path(), &["eval", "--descriptors", "desc.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["accuracy"], 0.5);
    assert_eq!(report["n_queries"], 2);
    assert_eq!(report["n_correct"], 1);
    assert!((report["angular_median_deg"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert!((report["angular_mean_deg"].as_f64().unwrap() - 10.0).abs() < 1e-9);

    fs::write(tmp.path().join("bad.json"), r#"{"database": []}"#).unwrap();
    assert_eq!(synthdepth(tmp.path(), &["eval", "--descriptors", "bad.json"]).status.code(), Some(1));
}
