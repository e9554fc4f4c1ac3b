use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hammersley::harness::RunConfig;
use hammersley::report::EstimatorReport;
use hammersley::PointCloud;

fn bin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hammersley"))
        .current_dir(dir)
        .env_remove("HAMMERSLEY_THREADS")
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn oracle_suite_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(dir.path(), &["oracle-suite", "--seed", "3", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let rep = EstimatorReport::parse_record(stdout.trim()).unwrap();
    assert_eq!(rep.get("clouds"), 1000.0);
    assert_eq!(rep.get("mismatches"), 0.0);
    let written = fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
    assert_eq!(written, stdout);
}

#[test]
fn missing_law_parameter_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        dir.path(),
        &["gamma", "law=exponential", "r=10", "--replicas", "4"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("law.rate"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());

    let o = bin(
        dir.path(),
        &["gamma", "law=dirac", "law.value=1", "--replicas", "4"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("r:"), "{}", stderr(&o));

    let o = bin(dir.path(), &["run", "--config", "nope.txt"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rerun_from_config_and_manifest_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.cfg"),
        "experiment = pathcount\nlaw = uniform\nlaw.lo = 0.5\nlaw.hi = 1.5\nseed = 77\n\n[pathcount]\nr = 30\nreplicas = 12\n",
    )
    .unwrap();
    let a = bin(dir.path(), &["run", "--config", "exp.cfg", "--out", "a"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = bin(
        dir.path(),
        &["run", "--config", "exp.cfg", "--out", "b", "--threads", "2"],
    );
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    let c = bin(
        dir.path(),
        &["run", "--config", "a/manifest.txt", "--out", "c"],
    );
    assert_eq!(c.status.code(), Some(0), "{}", stderr(&c));

    let raw = |d: &str| fs::read(dir.path().join(d).join("raw.csv")).unwrap();
    assert_eq!(raw("a"), raw("b"));
    assert_eq!(raw("a"), raw("c"));
    assert_eq!(a.stdout, c.stdout);

    let manifest = fs::read_to_string(dir.path().join("a/manifest.txt")).unwrap();
    let cfg = RunConfig::from_manifest(&manifest).unwrap();
    assert_eq!(cfg.seed, 77);
    assert_eq!(cfg.replicas, 12);
    assert_eq!(cfg.to_manifest(), manifest);

    let mut files: Vec<String> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["manifest.txt", "raw.csv", "report.txt"]);
}

#[test]
fn flags_override_file_and_sections() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("exp.cfg"),
        "experiment = gamma\nlaw = dirac\nlaw.value = 1\nr = 20\n[gamma]\nreplicas = 3\nseed = 1\n",
    )
    .unwrap();
    let o = bin(
        dir.path(),
        &["validate", "--config", "exp.cfg", "--seed", "9", "r=25"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = RunConfig::from_manifest(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.replicas, 3);
    assert_eq!(cfg.r, Some(25.0));
}

#[test]
fn thread_env_override_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hammersley"))
            .current_dir(dir.path())
            .env("HAMMERSLEY_THREADS", threads)
            .args([
                "gamma",
                "law=dirac",
                "law.value=1",
                "r=10",
                "--replicas",
                "3",
            ])
            .output()
            .unwrap()
    };
    let ok = run("1");
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    assert!(stderr(&ok).contains("1 threads"));
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("HAMMERSLEY_THREADS"));
}

#[test]
fn dump_cloud_writes_table_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(
        dir.path(),
        &[
            "dump-cloud",
            "--side",
            "12",
            "--seed",
            "5",
            "--field",
            "--out",
            "d",
            "law=bernoulli",
            "law.p=0.5",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read(dir.path().join("d/cloud.txt")).unwrap();
    let cloud = PointCloud::read_table(&text[..]).unwrap();
    assert_eq!(cloud.seed(), 5);
    let field = fs::read_to_string(dir.path().join("d/field.txt")).unwrap();
    let mut lines = field.lines();
    assert_eq!(lines.next(), Some("x t w value pred_index"));
    assert_eq!(lines.count(), cloud.len());
}
