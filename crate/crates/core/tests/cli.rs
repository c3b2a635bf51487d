use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_condgeo"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn ot_deltas_reports_unit_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().arg("run").arg(scenario("ot_deltas.json")).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["results"]["cost"], "1.0");
    assert!(String::from_utf8_lossy(&out.stdout).contains("report.json"));
}

#[test]
fn missing_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"schema":"condgeo.scenario.v1","scenario":{"kind":"ot","source":{"inline":{"points":[[0]]}},"target":{"inline":{"points":[[1]]}}}}"#,
    );
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn seed_flag_overrides_the_config_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = bin().arg("run").arg(scenario("ot_deltas.json")).arg("--seed").arg("4").arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["seed"].to_string().trim_matches('"'), "4");
}

#[test]
fn malformed_csv_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.csv", "x1,x2\n0,1\n2\n");
    write(tmp.path(), "ok.csv", "x1,x2\n0,0\n");
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"schema":"condgeo.scenario.v1","seed":1,"scenario":{"kind":"ot","source":{"csv":"bad.csv"},"target":{"csv":"ok.csv"}}}"#,
    );
    let out = bin().arg("run").arg(&cfg).arg("--out").arg(tmp.path().join("o")).output().unwrap();
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unknown_field_names_its_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", r#"{"schema":"condgeo.scenario.v1","seed":1,"scenarioo":{}}"#);
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenarioo"));
}

#[test]
fn plot_emits_one_series_per_time() {
    let tmp = tempfile::tempdir().unwrap();
    let run = bin().arg("run").arg(scenario("geodesic.json")).arg("--out").arg(tmp.path()).output().unwrap();
    assert_eq!(code(&run), 0);
    let report = tmp.path().join("report.json");
    let out = bin().arg("plot").arg(&report).arg("--artifact").arg("geodesic").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("series,t,x1,x2,weight"));
    let series: BTreeSet<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(series.len(), 3);

    let bad = bin().arg("plot").arg(&report).arg("--artifact").arg("nope").output().unwrap();
    assert_eq!(code(&bad), 5);
}

#[test]
fn verify_filter_and_list() {
    let list = bin().arg("verify").arg("--list").output().unwrap();
    assert_eq!(code(&list), 0);
    let names = String::from_utf8(list.stdout).unwrap();
    assert!(names.lines().count() > 10);

    let out = bin().arg("verify").arg("--filter").arg("ot.").output().unwrap();
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().ends_with("0 failed"));

    let none = bin().arg("verify").arg("--filter").arg("no-such-check").output().unwrap();
    assert_eq!(code(&none), 2);
}
