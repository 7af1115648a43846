use std::process::Command;

fn alfeld(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_alfeld")).args(args).env("ALFELD_THREADS", "1").output().unwrap()
}

#[test]
fn report_is_deterministic() {
    let a = alfeld(&["bubbles", "--degree", "2", "--seed", "3", "--count", "4"]);
    let b = alfeld(&["bubbles", "--degree", "2", "--seed", "3", "--count", "4"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let doc: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["schema"], 1);
    assert_eq!(doc["command"], "bubbles");
    let reports = doc["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    for r in reports {
        assert_eq!(r["verdict"], "pass");
        assert_eq!(r["params"]["r"], 2);
        assert!(r["witnesses"].is_object());
        assert!(r["claim"].is_string());
    }
}

#[test]
fn primes_are_merged() {
    let out = alfeld(&["exactness", "--family", "V", "--degree", "3", "--primes", "2"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for r in doc["reports"].as_array().unwrap() {
        assert_eq!(r["params"]["field"], "mod 2 primes");
    }
}

#[test]
fn exact_mode() {
    let out = alfeld(&["exactness", "--family", "V", "--degree", "3", "--exact"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["reports"][0]["params"]["field"], "exact");
}

#[test]
fn writes_to_file() {
    let p = std::env::temp_dir().join(format!("alfeld-report-{}.json", std::process::id()));
    let out = alfeld(&["supersmooth", "--degree", "2", "--out", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    std::fs::remove_file(&p).ok();
    assert!(text.contains("\"schema\": 1"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));
}

#[test]
fn malformed_config() {
    for args in [
        vec!["spaces", "--degree", "5..2"],
        vec!["spaces", "--split-point", "1,0,0,0"],
        vec!["spaces", "--split-point", "1/2,1/2"],
        vec!["spaces", "--primes", "9"],
        vec!["global", "--mesh", "no-such-mesh"],
        vec!["spaces", "--out", "/nonexistent-dir/x.json", "--degree", "1", "--family", "W"],
    ] {
        let out = alfeld(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_alfeld")).args(["bubbles", "--degree", "2"]).env("ALFELD_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
