use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn renorm(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_renorm"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn default_verify_succeeds_and_writes_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = renorm(&["verify"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    let meta: serde_json::Value = serde_json::from_str(header.strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["command"], "verify");
    assert!(!meta["version"].as_str().unwrap().is_empty());
    assert_eq!(meta["resolved_model"]["boson_max"], 4);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert!(json["report"]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn positive_real_z_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": {"z": [0.5, 0.0]}}"#);
    let o = renorm(&["verify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('z'));
}

#[test]
fn zero_boson_mass_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"model": {"m_b": 0.0}}"#);
    let o = renorm(&["verify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("m_b"));
}

#[test]
fn malformed_json_reports_its_position() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{\n  \"order\": ,\n}");
    let o = renorm(&["verify", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn oversized_enumeration_exceeds_the_budget() {
    let dir = tempfile::tempdir().unwrap();
    let o = renorm(&["enumerate", "--k", "40", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn enumerate_two_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = renorm(&["enumerate", "--k", "2", "--n", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("enumerate.json")).unwrap()).unwrap();
    let r = &json["report"];
    assert_eq!((r["handed"].as_u64(), r["right"].as_u64()), (Some(4), Some(1)));
    assert_eq!((r["left"].as_u64(), r["ambidextrous"].as_u64()), (Some(1), Some(2)));
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for (dir, threads) in [(&a, "1"), (&b, "3")] {
        let o = renorm(&["sweep-lambda", "--threads", threads], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["sweep-lambda.csv", "sweep-lambda-residuals.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn shipped_example_config_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/example-config.json");
    let o = renorm(&["verify", "--config", cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}
