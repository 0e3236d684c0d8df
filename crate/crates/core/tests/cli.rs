use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_bapfactor");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SQUARE: &str = r#"{"x":{"dim":2,"norm":"linf"},"w":{"dim":2,"norm":"linf"},"k":1,"seed":1,"blocks":[[[1,0],[0,1]]]}"#;

#[test]
fn square_scenario_factorizes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.json"), SQUARE).unwrap();
    let o = run(dir.path(), &["factorize", "s.json", "-o", "r.json", "--csv", "c.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert_eq!(report["versions"]["prng"], "ChaCha8 (rand_chacha)");
    let stage = report["stages"].as_array().unwrap().iter().find(|s| s["name"] == "partial_sums").unwrap();
    assert!(stage["detail"]["within_block_max"].as_f64().unwrap() <= 2.0);
    assert!(stage["detail"]["global_max"].as_f64().unwrap() <= 5.0);
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "n,norm,bound,margin");
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn k_violation_exits_two_with_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"{"x":{"dim":2,"norm":"l2"},"w":{"dim":2,"norm":"l2"},"k":1,"blocks":[[[1,0],[0,1]],[[2,0],[0,2]],[[-2,0],[0,-2]]]}"#;
    std::fs::write(dir.path().join("s.json"), text).unwrap();
    let o = run(dir.path(), &["factorize", "s.json", "-o", "r.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("first 2 blocks"), "{}", stderr(&o));
}

#[test]
fn corrupt_and_missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"x\": [").unwrap();
    let o = run(dir.path(), &["factorize", "bad.json", "-o", "r.json"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("parse error"));
    assert_eq!(code(&run(dir.path(), &["certify", "none.json", "--eps", "0.1", "-o", "r.json"])), 2);
    assert_eq!(code(&run(dir.path(), &["factorize"])), 2);
}

#[test]
fn gen_then_certify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = [
        "gen", "--seed", "3", "--dims", "3,3", "--tags", "l1,linf", "--blocks", "2", "--ranks", "1,2", "--decay", "0.5", "-o",
    ];
    let o = run(dir.path(), &[&gen[..], &["a.json"]].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(dir.path(), &[&gen[..], &["b.json"]].concat());
    assert_eq!(code(&o), 0);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.json")).unwrap());

    let o = run(dir.path(), &["certify", "a.json", "--eps", "0.5,0.01,0", "-o", "r.json", "--csv", "c.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    let names: Vec<&str> = report["stages"].as_array().unwrap().iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["pointwise", "converse", "cross_check"]);
    assert!(std::fs::read_to_string(dir.path().join("c.csv")).unwrap().starts_with("n,norm,bound,margin\n"));
}

#[test]
fn gen_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["gen", "--seed", "1", "--dims", "2,2", "--tags", "l1,l1", "--blocks", "1", "--ranks", "3", "--decay", "0.5", "-o", "a.json"],
    );
    assert_eq!(code(&o), 2);
    let o = run(
        dir.path(),
        &["gen", "--seed", "1", "--dims", "2", "--tags", "l1,l1", "--blocks", "1", "--ranks", "1", "--decay", "0.5", "-o", "a.json"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn opnorm_examples() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h.json"), "[[1,1],[1,-1]]").unwrap();
    let o = run(dir.path(), &["opnorm", "h.json", "--from", "linf", "--to", "linf"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["norm"].as_f64().unwrap(), 2.0);
    assert!(v["agree"].as_bool().unwrap());

    std::fs::write(dir.path().join("i.json"), "[[1,0,0],[0,1,0],[0,0,1]]").unwrap();
    for tag in ["l1", "l2", "linf"] {
        let o = run(dir.path(), &["opnorm", "i.json", "--from", tag, "--to", tag]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!((v["norm"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }

    let wide: Vec<Vec<f64>> = vec![vec![1.0; 25]; 2];
    std::fs::write(dir.path().join("w.json"), serde_json::to_string(&wide).unwrap()).unwrap();
    let o = run(dir.path(), &["opnorm", "w.json", "--from", "linf", "--to", "l1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("capacity"));
}

#[test]
fn enumeration_cap_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("m.json"), "[[1,2,3,4]]").unwrap();
    let o = Command::new(BIN)
        .current_dir(dir.path())
        .env("BAPFACTOR_MAX_ENUM_DIM", "3")
        .args(["opnorm", "m.json", "--from", "linf", "--to", "l2"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let o = run(dir.path(), &["opnorm", "m.json", "--from", "linf", "--to", "l2"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["norm"].as_f64().unwrap(), 10.0);
}
