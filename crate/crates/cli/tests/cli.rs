use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ambpol(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ambpol"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

const SMALL_GRID: &str = "98.8:99.4:-0.3:0.3:0.1";

fn csv_names(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn scene_gen_is_deterministic() {
    let d = tempfile::tempdir().unwrap();
    ok(&ambpol(&["scene-gen", "--preset", "table1", "--seed", "7", "--out", "a.json"], d.path()));
    ok(&ambpol(&["scene-gen", "--preset", "table1", "--seed", "7", "--out", "b.json"], d.path()));
    let a = fs::read(d.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(d.path().join("b.json")).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["scatterers"].as_array().unwrap().len(), 20);

    ok(&ambpol(&["scene-gen", "--preset", "table1", "--seed", "8", "--out", "c.json"], d.path()));
    assert_ne!(a, fs::read(d.path().join("c.json")).unwrap());
}

#[test]
fn unknown_preset_fails_cleanly() {
    let d = tempfile::tempdir().unwrap();
    let o = ambpol(&["scene-gen", "--preset", "bogus", "--out", "x.json"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
    assert!(!d.path().join("x.json").exists());
}

#[test]
fn map_writes_one_layer_per_orientation() {
    let d = tempfile::tempdir().unwrap();
    for (pols, layers) in [("4pr", 4), ("nr-worst", 1)] {
        ok(&ambpol(
            &["map", "--preset", "table1", "--pols", pols, "--grid", SMALL_GRID, "--out", pols],
            d.path(),
        ));
        let out = d.path().join(pols);
        let names = csv_names(&out);
        assert_eq!(names.iter().filter(|n| n.starts_with("layer_")).count(), layers);
        assert!(names.contains(&"best.csv".to_string()));
        assert!(names.contains(&"carpet.csv".to_string()));
        assert!(out.join("best.png").exists());
        let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["command"], "map");
        assert_eq!(m["seed"], 7);
        assert_eq!(m["scene_sha256"].as_str().unwrap().len(), 64);
        assert!(m["flags"].as_array().unwrap().is_empty());
        let best = fs::read_to_string(out.join("best.csv")).unwrap();
        assert_eq!(best.lines().count(), 1 + 7 * 7);
    }
}

#[test]
fn map_outputs_do_not_depend_on_thread_count() {
    let d = tempfile::tempdir().unwrap();
    for t in ["1", "3"] {
        ok(&ambpol(
            &["--threads", t, "map", "--preset", "table1-desk", "--grid", SMALL_GRID, "--out", t],
            d.path(),
        ));
    }
    let names = csv_names(&d.path().join("1"));
    assert!(!names.is_empty());
    for n in &names {
        assert_eq!(
            fs::read(d.path().join("1").join(n)).unwrap(),
            fs::read(d.path().join("3").join(n)).unwrap(),
            "{n}"
        );
    }
}

#[test]
fn outage_curves_cover_the_snr_sweep() {
    let d = tempfile::tempdir().unwrap();
    ok(&ambpol(
        &["outage", "--preset", "table1-desk", "--pols", "nr,4pr", "--step", "0.05", "--out", "o"],
        d.path(),
    ));
    let out = d.path().join("o");
    let mut prev: Option<Vec<f64>> = None;
    for name in ["nr", "4pr"] {
        let text = fs::read_to_string(out.join(format!("outage_{name}.csv"))).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 11);
        let vals: Vec<f64> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] <= w[0]));
        if let Some(p) = &prev {
            // 4PR contains NR
            assert!(vals.iter().zip(p).all(|(a, b)| a <= b));
        }
        prev = Some(vals);
        assert!(out.join(format!("captured_{name}.csv")).exists());
    }
}

#[test]
fn outage_rejects_duplicate_sets() {
    let d = tempfile::tempdir().unwrap();
    let o = ambpol(&["outage", "--preset", "los", "--pols", "nr,nr", "--out", "o"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn opssa_single_reader() {
    let d = tempfile::tempdir().unwrap();
    let o = ambpol(&["opssa", "--reader", "90,90", "--tag-step", "5"], d.path());
    ok(&o);
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[2..4], ["45", "90"]);
    assert_eq!(row[10], "1");
}

#[test]
fn opssa_closed_form_needs_vertical_source() {
    let d = tempfile::tempdir().unwrap();
    let o = ambpol(&["opssa", "--source", "30,0", "--reader", "90,90", "--closed-form"], d.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vertical"));
}

#[test]
fn opssa_sweep_writes_manifest() {
    let d = tempfile::tempdir().unwrap();
    ok(&ambpol(&["opssa", "--sweep-step", "30", "--tag-step", "10", "--out", "p"], d.path()));
    let text = fs::read_to_string(d.path().join("p/opssa.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 16);
    assert!(d.path().join("p/manifest.json").exists());
}

#[test]
fn selfcheck_passes_and_reports_overrides() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("tol.json"), r#"{"image": 1e-5}"#).unwrap();
    let o = ambpol(&["selfcheck", "--config", "tol.json", "--out", "sc"], d.path());
    ok(&o);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("config  image"));
    assert!(!text.contains("FAIL"));
    assert!(d.path().join("sc/selfcheck.json").exists());
}

#[test]
fn selfcheck_flags_exit_three() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("tol.json"), r#"{"refinement": 1e-9}"#).unwrap();
    let o = ambpol(&["selfcheck", "--config", "tol.json"], d.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL  refinement"));
}

#[test]
fn corrupted_scene_reports_location() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("bad.json"), "{\n  \"frequency_hz\": 2.4e9,\n  \"source\": [\n").unwrap();
    let o = ambpol(&["selfcheck", "--scene", "bad.json"], d.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json") && err.contains("line"), "{err}");
}

#[test]
fn bad_tolerance_config_is_rejected() {
    let d = tempfile::tempdir().unwrap();
    fs::write(d.path().join("tol.json"), r#"{"symmetry": -1}"#).unwrap();
    assert_eq!(ambpol(&["selfcheck", "--config", "tol.json"], d.path()).status.code(), Some(1));
    fs::write(d.path().join("tol.json"), r#"{"nonsense": 1}"#).unwrap();
    assert_eq!(ambpol(&["selfcheck", "--config", "tol.json"], d.path()).status.code(), Some(1));
}
