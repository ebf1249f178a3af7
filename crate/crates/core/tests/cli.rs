use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mindet(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mindet"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn report_status(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    json["report"]["verdict"].clone()
}

#[test]
fn default_config_confirms_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let res = mindet(
        &[
            "run",
            &config("stieltjes_default.json"),
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for file in ["density.csv", "charfun.csv", "moments.csv", "report.json"] {
        assert!(out.join(file).is_file(), "missing {file}");
    }
    assert_eq!(report_status(&out)["status"], "M_INDETERMINATE_CONFIRMED");
    let header = std::fs::read_to_string(out.join("density.csv")).unwrap();
    assert!(header.starts_with("x,eps=-1,eps=-0.5,eps=0,eps=0.5,eps=1\n"));
}

#[test]
fn small_lambda_fails_on_moment_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("broken");
    let res = mindet(
        &[
            "run",
            &config("broken_lambda.json"),
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(res.status.code(), Some(2));
    let verdict = report_status(&out);
    assert_eq!(verdict["status"], "FAILED");
    assert_eq!(verdict["gate"], "moment_spread");
}

#[test]
fn reverify_reproduces_recorded_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    for (cfg, code) in [("stieltjes_default.json", 0), ("broken_lambda.json", 2)] {
        let res = mindet(&["run", &config(cfg), "--out", out_s], tmp.path());
        assert_eq!(res.status.code(), Some(code));
        let again = mindet(&["verify", "--in", out_s], tmp.path());
        assert_eq!(again.status.code(), Some(code));
        let stdout = String::from_utf8_lossy(&again.stdout);
        let printed = stdout
            .lines()
            .find_map(|l| l.strip_prefix("verdict: "))
            .expect("verdict line");
        let printed: serde_json::Value = serde_json::from_str(printed).unwrap();
        assert_eq!(printed, report_status(&out));
    }
}

#[test]
fn operator_generation_confirms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("op");
    let res = mindet(
        &[
            "generate-operator",
            "--operator",
            "gauged",
            "--c",
            "0.3",
            "--n",
            "2",
            "--gap",
            "3",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(report_status(&out)["status"], "M_INDETERMINATE_CONFIRMED");
}

#[test]
fn missing_config_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let res = mindet(&["run", "does_not_exist.json"], tmp.path());
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn out_of_range_epsilon_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("x");
    let res = mindet(
        &[
            "generate-stieltjes",
            "--epsilons",
            "0,1.5",
            "--out",
            out.to_str().unwrap(),
        ],
        tmp.path(),
    );
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("invalid config"));
    assert!(!out.exists());
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    let text = std::fs::read_to_string(config("stieltjes_default.json"))
        .unwrap()
        .replacen("\"lambda\"", "\"lambda_typo\": 1.0, \"lambda\"", 1);
    std::fs::write(&path, text).unwrap();
    let res = mindet(&["run", path.to_str().unwrap()], tmp.path());
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn tampered_artifacts_fail_replay() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let out_s = out.to_str().unwrap();
    let res = mindet(
        &["run", &config("stieltjes_default.json"), "--out", out_s],
        tmp.path(),
    );
    assert_eq!(res.status.code(), Some(0));
    let density = out.join("density.csv");
    let text = std::fs::read_to_string(&density).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mid = lines.len() / 2;
    let mut cells: Vec<String> = lines[mid].split(',').map(str::to_string).collect();
    let v: f64 = cells[1].parse().unwrap();
    cells[1] = format!("{:?}", v * 1.01);
    lines[mid] = cells.join(",");
    std::fs::write(&density, lines.join("\n") + "\n").unwrap();
    let again = mindet(&["verify", "--in", out_s], tmp.path());
    assert_eq!(again.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&again.stderr).contains("do not reproduce"));
}
