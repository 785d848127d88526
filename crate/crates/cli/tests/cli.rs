use std::path::Path;
use std::process::Command;

fn ploss() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ploss"))
}

fn toy_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("toy.json");
    std::fs::write(
        &path,
        r#"{"scenario": "toy", "particles": 60, "simplified": [20], "replicates": 5, "observations_first": 12, "seed": 1}"#,
    )
    .unwrap();
    path
}

fn summary_field(dir: &Path, column: &str) -> Vec<String> {
    let text = std::fs::read_to_string(dir.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == column).unwrap();
    lines
        .map(|l| l.split(',').nth(i).unwrap().to_string())
        .collect()
}

#[test]
fn toy_run_writes_all_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = ploss()
        .args(["run", "--config"])
        .arg(toy_config(tmp.path()))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    for f in [
        "tdf.csv",
        "summary.csv",
        "hist_loss.csv",
        "hist_bound_loss.csv",
        "timings.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn overrides_reach_the_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = ploss()
        .args(["run", "--config"])
        .arg(toy_config(tmp.path()))
        .args([
            "--n-list",
            "10,30",
            "--alpha",
            "0.01",
            "--paper-rounding",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(summary_field(&out, "n"), ["10", "30"]);
    for a in summary_field(&out, "alpha") {
        assert_eq!(a.parse::<f64>().unwrap(), 0.01);
    }
    for z in summary_field(&out, "z") {
        assert_eq!(z.parse::<f64>().unwrap(), 2.56);
    }
}

#[test]
fn bad_configs_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = ploss()
        .args(["run", "--config"])
        .arg(tmp.path().join("nope.json"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"scenario": "toy", "particles": 50, "simplified": [50]}"#,
    )
    .unwrap();
    let out = ploss()
        .args(["run", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"scenario": "toy", "particle": 50}"#).unwrap();
    assert_eq!(
        ploss()
            .args(["run", "--config"])
            .arg(&unknown)
            .status()
            .unwrap()
            .code(),
        Some(2)
    );

    assert_eq!(ploss().arg("run").status().unwrap().code(), Some(2));
}
