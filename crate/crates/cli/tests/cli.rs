use std::path::Path;
use std::process::{Command, Output};

use iglab::gallery::RunRecord;

fn iglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iglab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn passing_gallery_exits_zero_and_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = iglab(&[
        "gallery",
        "--select",
        "a5.1,a5.4",
        "--budget",
        "quick",
        "--out",
        out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let printed: Vec<RunRecord> = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(printed.len(), 2);
    for rec in &printed {
        let on_disk = RunRecord::read(&dir.path().join(rec.file_name())).unwrap();
        assert_eq!(&on_disk, rec);
        assert_eq!(on_disk.schema_version, 1);
    }
}

#[test]
fn golden_mismatch_exits_one() {
    // quick tails stop at 2^12, too short to resolve the decay of this ladder
    let o = iglab(&["gallery", "--select", "ex5.4", "--budget", "quick"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mismatch: ex5.4"));
}

#[test]
fn input_errors_exit_two() {
    for args in [
        &["classify", "--family", "nope"][..],
        &["codim", "--family", "ex5.6", "--param", "alpha=0.3"],
        &["codim", "--family", "ex5.6", "--param", "beta=1"],
        &["gallery", "--select", "a5.2"],
        &["cap", "boundary", "--family", "ray"],
        &["classify", "--family", "ex5.4", "--budget", "huge"],
        &["metric", "check"],
        &["metric", "check", "--graph", "/nonexistent/graph.txt"],
    ] {
        let o = iglab(args);
        assert_eq!(
            code(&o),
            2,
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn csv_output_has_a_header_row() {
    let o = iglab(&[
        "cap",
        "equilibrium",
        "--family",
        "ray",
        "--window",
        "5",
        "--set",
        "4",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["vertex", "label", "potential"]
    );
    let last = rows.records().last().unwrap().unwrap();
    assert_eq!(&last[2], "1.0000000000000000e0");
}

#[test]
fn family_config_and_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("fam.toml");
    std::fs::write(
        &cfg,
        "family = \"ex5.6\"\n[params]\nalpha = 2.0\ncase = 2.0\n",
    )
    .unwrap();
    let o = iglab(&["codim", "--family", cfg.to_str().unwrap(), "--depth", "12"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec = RunRecord::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(rec.params["alpha"], 2.0);

    let graph = dir.path().join("tri.txt");
    write_triangle(&graph);
    let o = iglab(&[
        "metric",
        "check",
        "--graph",
        graph.to_str().unwrap(),
        "--sigma",
        "sigma1",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec = RunRecord::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(rec.family, "tri");
    assert!(rec.passed());
    let o = iglab(&["classify", "--graph", graph.to_str().unwrap()]);
    let rec = RunRecord::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap();
    assert_eq!(rec.result["self_adjoint"]["answer"], "yes");
}

fn write_triangle(path: &Path) {
    let mut b = iglab::GraphBuilder::new(3);
    b.measure(0, 1.0).measure(1, 0.5).measure(2, 2.0);
    b.edge(0, 1, 1.0).edge(1, 2, 0.25).edge(0, 2, 3.0);
    std::fs::write(path, iglab::io::write_graph(&b.build().unwrap())).unwrap();
}

#[test]
fn forms_suite_is_seeded() {
    let a = iglab(&[
        "forms", "check", "--trials", "20", "--seed", "7", "--format", "csv",
    ]);
    let b = iglab(&[
        "forms",
        "check",
        "--trials",
        "20",
        "--seed",
        "7",
        "--format",
        "csv",
        "--sequential",
    ]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
