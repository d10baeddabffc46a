//! End-to-end runs of the `toffoli` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn toffoli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toffoli"))
        .arg("run")
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn ideal_truth_table_is_a_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let o = toffoli(&["truth-table", "--noise", "ideal"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "truth-table: F=1.0000");
    let csv = fs::read_to_string(dir.path().join("truth_table.csv")).unwrap();
    let ones: Vec<(usize, usize)> = csv
        .lines()
        .skip(1)
        .enumerate()
        .flat_map(|(r, line)| {
            line.split(',')
                .skip(1)
                .enumerate()
                .filter(|(_, v)| *v == "1.000000")
                .map(move |(c, _)| (r, c))
                .collect::<Vec<_>>()
        })
        .collect();
    assert_eq!(
        ones,
        vec![
            (0, 0),
            (1, 1),
            (2, 3),
            (3, 2),
            (4, 4),
            (5, 5),
            (6, 6),
            (7, 7)
        ]
    );
}

#[test]
fn trace_artifact_lists_every_input() {
    let dir = tempfile::tempdir().unwrap();
    assert!(toffoli(&["table1-trace"], dir.path()).status.success());
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("table1_trace.json")).unwrap())
            .unwrap();
    let rows = trace.as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let hidden = &rows[7]["steps"][0]["state"][0];
    assert_eq!(hidden["basis"], "201");
    assert!((hidden["im"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn certify_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "certify",
        "--noise",
        "device",
        "--samples",
        "10000",
        "--seed",
        "7",
    ];
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = toffoli(&args, &a);
    assert!(first.status.success());
    assert!(toffoli(&args, &b).status.success());
    assert_eq!(
        fs::read(a.join("certify.json")).unwrap(),
        fs::read(b.join("certify.json")).unwrap()
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("certify.json")).unwrap()).unwrap();
    assert_eq!(report["relevant_count"], 232);
    assert_eq!(report["strings"].as_array().unwrap().len(), 232);
    assert_eq!(report["samples"], 10000);
    assert!(stdout(&first).contains('±'));
}

#[test]
fn device_noise_without_file_matches_an_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("device.toml");
    fs::write(&config, "# all defaults\n").unwrap();
    let default = toffoli(&["truth-table", "--noise", "device"], &dir.path().join("a"));
    let custom = toffoli(
        &[
            "truth-table",
            "--noise",
            "custom",
            "--device-config",
            config.to_str().unwrap(),
        ],
        &dir.path().join("b"),
    );
    assert_eq!(stdout(&default), stdout(&custom));
    assert_eq!(
        fs::read(dir.path().join("a/truth_table.csv")).unwrap(),
        fs::read(dir.path().join("b/truth_table.csv")).unwrap()
    );
}

#[test]
fn custom_config_changes_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("device.toml");
    fs::write(
        &config,
        "t1_a_us = 20.0\nt2star_a_us = 15.0\ninclude_spam = false\n",
    )
    .unwrap();
    let o = toffoli(
        &[
            "truth-table",
            "--noise",
            "custom",
            "--device-config",
            config.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(o.status.success());
    assert_ne!(
        stdout(&o),
        stdout(&toffoli(
            &["truth-table", "--noise", "device"],
            &dir.path().join("d")
        ))
    );
}

#[test]
fn invalid_configurations_fail() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "t1_a_us = -1.0\n").unwrap();
    let unknown = dir.path().join("unknown.toml");
    fs::write(&unknown, "t1_d_us = 1.0\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["certify", "--samples", "0"],
        &["truth-table", "--noise", "custom"],
        &[
            "truth-table",
            "--noise",
            "custom",
            "--device-config",
            bad.to_str().unwrap(),
        ],
        &[
            "truth-table",
            "--noise",
            "custom",
            "--device-config",
            unknown.to_str().unwrap(),
        ],
        &["process-tomo", "--shots", "100", "--resamples", "1"],
    ];
    for args in cases {
        let o = toffoli(args, &dir.path().join("out"));
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(
            String::from_utf8_lossy(&o.stderr).starts_with("error:"),
            "{args:?}"
        );
    }
}

#[test]
fn thread_count_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_toffoli"))
        .args(["run", "table1-trace", "--out"])
        .arg(dir.path())
        .env("TOFFOLI_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn process_tomography_writes_chi_documents() {
    let dir = tempfile::tempdir().unwrap();
    let o = toffoli(
        &[
            "process-tomo",
            "--noise",
            "device",
            "--shots",
            "500",
            "--resamples",
            "20",
            "--seed",
            "2",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in [
        "chi_raw.json",
        "chi_ml.json",
        "tomography.json",
        "circuit.json",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let raw: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("chi_raw.json")).unwrap())
            .unwrap();
    assert_eq!(raw["basis"].as_array().unwrap().len(), 64);
    assert_eq!(raw["real"].as_array().unwrap().len(), 64);
    assert!(raw["metadata"]["confidence_interval"]["low"].is_f64());
    let ml: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("chi_ml.json")).unwrap()).unwrap();
    assert!(ml["metadata"]["min_eigenvalue"].as_f64().unwrap() > -1e-10);
}
