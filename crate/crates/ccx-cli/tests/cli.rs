use std::path::Path;
use std::process::{Command, Output};

fn ccx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ccx")).args(args).output().expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn tree_run_succeeds_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = ccx(&["run", "--kind", "tree", "--size", "5", "--budget", "20000", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "certificate.json", "boundary.json", "cone.json", "homotopy.json", "functions.json", "summary.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["format"], "ccx/1");
}

#[test]
fn staged_commands_match_a_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let common = ["--kind", "tree", "--size", "4", "--budget", "5000", "--seed", "3"];
    let mut args = vec!["run"];
    args.extend(common);
    args.extend(["--out", p(&a)]);
    assert!(ccx(&args).status.success());
    let mut args = vec!["gen"];
    args.extend(common);
    args.extend(["--out", p(&b)]);
    assert!(ccx(&args).status.success());
    for cmd in ["fit", "boundary", "cone", "homotopy", "functions"] {
        let o = ccx(&[cmd, "--out", p(&b)]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["certificate.json", "boundary.json", "cone.json", "homotopy.json", "functions.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn grid_violation_is_reported_with_its_stage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let o = ccx(&["run", "--kind", "grid-l1", "--size", "8", "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(31), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("violation_curve.json").exists());
    assert!(!out.join("certificate.json").exists());

    let out = dir.path().join("expected");
    let o = ccx(&["run", "--kind", "grid-l1", "--size", "8", "--expect-violation", "convexity", "--out", p(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("violation_curve.json").exists());
}

#[test]
fn malformed_space_file_exits_with_parse_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("space.json");
    std::fs::write(&bad, "{\n  \"format\": \"ccx/1\",\n  \"points\": [0, 1\n").unwrap();
    let sys = dir.path().join("system.json");
    std::fs::write(&sys, "{}").unwrap();
    let o = ccx(&["gen", "--space", p(&bad), "--system", p(&sys), "--out", p(&dir.path().join("r"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn unknown_format_tag_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c.json");
    std::fs::write(&f, r#"{"format":"ccx/9","kind":"certificate","body":{}}"#).unwrap();
    let o = ccx(&["convert", p(&f), p(&dir.path().join("c.txt"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn convert_round_trips_space_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(ccx(&["gen", "--kind", "euclidean-l2-disc", "--size", "4", "--out", p(&run)]).status.success());
    let (csv1, json2, csv2) = (dir.path().join("a.csv"), dir.path().join("b.json"), dir.path().join("c.csv"));
    assert!(ccx(&["convert", p(&run.join("space.json")), p(&csv1)]).status.success());
    assert!(ccx(&["convert", p(&csv1), p(&json2)]).status.success());
    assert!(ccx(&["convert", p(&json2), p(&csv2)]).status.success());
    assert_eq!(std::fs::read(&csv1).unwrap(), std::fs::read(&csv2).unwrap());
    assert_eq!(std::fs::read(run.join("space.json")).unwrap(), std::fs::read(&json2).unwrap());
}

#[test]
fn certificate_renders_as_text() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(ccx(&["run", "--kind", "tree", "--size", "4", "--budget", "5000", "--out", p(&run)]).status.success());
    let txt = dir.path().join("cert.txt");
    assert!(ccx(&["convert", p(&run.join("certificate.json")), p(&txt)]).status.success());
    let t = std::fs::read_to_string(txt).unwrap();
    assert!(t.contains("D1") && t.contains("10"), "{t}");
}

#[test]
fn plots_are_deterministic_and_checked_against_the_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = ccx(&["run", "--kind", "euclidean-l2-disc", "--size", "8", "--directions", "16", "--horizon", "8", "--out", p(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let svg = |name: &str| dir.path().join(name);
    for (art, kind) in [("diagnostics.json", "boundary-circle"), ("cone.json", "bound-curve"), ("bound_curve.csv", "bound-curve"), ("tracks.csv", "homotopy-heatmap")] {
        let (a, b) = (svg(&format!("{kind}-1.svg")), svg(&format!("{kind}-2.svg")));
        for out in [&a, &b] {
            let o = ccx(&["plot", p(&run.join(art)), "--kind", kind, "--out", p(out)]);
            assert!(o.status.success(), "{art} {kind}: {}", String::from_utf8_lossy(&o.stderr));
        }
        let bytes = std::fs::read(&a).unwrap();
        assert!(bytes.starts_with(b"<svg"));
        assert_eq!(bytes, std::fs::read(&b).unwrap());
    }
    let o = ccx(&["plot", p(&run.join("cone.json")), "--kind", "boundary-circle", "--out", p(&svg("x.svg"))]);
    assert_eq!(o.status.code(), Some(18));
}

#[test]
fn empty_circle_data_draws_a_placeholder() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert!(ccx(&["run", "--kind", "tree", "--size", "4", "--budget", "5000", "--out", p(&run)]).status.success());
    let out = dir.path().join("c.svg");
    assert!(ccx(&["plot", p(&run.join("diagnostics.json")), "--kind", "boundary-circle", "--out", p(&out)]).status.success());
    let s = std::fs::read_to_string(out).unwrap();
    assert!(s.contains("no class pairs"));
}

#[test]
fn missing_run_directory_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = ccx(&["fit", "--out", p(&dir.path().join("nope"))]);
    assert_eq!(o.status.code(), Some(4));
}
