use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coarse-lab"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

const NONPROPER_EXPECTING_SUPPORT: &str = r#"
format_version = 1
[space]
kind = "nonproper_example"
t = 100
[combing]
kind = "intrinsic"
[[tasks]]
kind = "audit"
property = "proper"
expect = "supported"
"#;

#[test]
fn unmet_expectation_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), NONPROPER_EXPECTING_SUPPORT);
    let out = run(&cfg, &d.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("expected Supported"));
    assert!(d.path().join("out/01_audit_proper.json").exists());
}

#[test]
fn empty_task_list_writes_no_reports() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "format_version = 1\n[space]\nkind = \"cycle\"\npoints = 5\n");
    let out = run(&cfg, &d.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(0));
    let mut names: Vec<_> = std::fs::read_dir(d.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["metadata.json", "space.json"]);
}

#[test]
fn tampered_witness_is_reported() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), &NONPROPER_EXPECTING_SUPPORT.replace("expect = \"supported\"", ""));
    let outdir = d.path().join("out");
    assert_eq!(run(&cfg, &outdir, &[]).status.code(), Some(0));
    let report = outdir.join("01_audit_proper.json");
    assert!(bin().arg("verify").arg(&report).status().unwrap().success());

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let w = &mut v["payload"]["witnesses"][3]["distance"];
    *w = serde_json::json!(w.as_u64().unwrap() + 1);
    std::fs::write(&report, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    let out = bin().arg("verify").arg(&report).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("witness 3"), "{err}");
    assert!(err.contains("payload.witnesses[3].distance"), "{err}");
}

#[test]
fn missing_space_file_is_an_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "format_version = 1\n[space]\nkind = \"cycle\"\npoints = 6\n[[tasks]]\nkind = \"rips\"\nr = 1\ndim_cap = 2\n");
    let outdir = d.path().join("out");
    assert!(run(&cfg, &outdir, &[]).status.success());
    std::fs::remove_file(outdir.join("space.json")).unwrap();
    let out = bin().arg("verify").arg(outdir.join("01_rips.json")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("space.json"));
}

#[test]
fn thread_count_does_not_change_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/c8b_plane_dimension.toml");
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    assert!(run(&cfg, &a, &["--threads", "1"]).status.success());
    assert!(run(&cfg, &b, &["--threads", "3"]).status.success());
    for e in std::fs::read_dir(&a).unwrap() {
        let name = e.unwrap().file_name();
        if name != "metadata.json" {
            assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
    }
}

#[test]
fn point_budget_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/c3_free_group_tree.toml");
    let out = bin()
        .env("COARSE_LAB_BUDGET_POINTS", "100")
        .arg("run")
        .arg(&cfg)
        .arg("--out")
        .arg(d.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("points budget exceeded"));
}

#[test]
fn parse_errors_name_the_line() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), "format_version = 1\n[space]\nkind = \"cycle\"\npoints = -3\n");
    let out = run(&cfg, &d.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column 1"));
}
