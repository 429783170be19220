use std::path::Path;
use std::process::{Command, Output};

fn secnoma(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_secnoma"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_then_solve() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("net.toml"), "N = 1\nE = 1\nseed = 9\n").unwrap();
    let g = secnoma(&["generate", "--config", "net.toml", "--out", "inst.json"], dir.path());
    assert_eq!(g.status.code(), Some(0), "{}", String::from_utf8_lossy(&g.stderr));

    for solver in ["asm", "uniform", "asm-baseline-sic", "robust", "polyblock"] {
        let s = secnoma(&["solve", "inst.json", "--solver", solver, "--epsilon", "0.1"], dir.path());
        assert_eq!(s.status.code(), Some(0), "{solver}: {}", String::from_utf8_lossy(&s.stderr));
        let v: serde_json::Value = serde_json::from_str(&stdout(&s)).unwrap();
        assert!(v["objective_bps_hz"].as_f64().unwrap() >= 0.0, "{solver}");
    }

    let s = secnoma(
        &["solve", "inst.json", "--theta", "1e-2", "--max-iters", "3", "--budget", "50", "--gains", "est", "-o", "r.json"],
        dir.path(),
    );
    assert_eq!(s.status.code(), Some(0));
    let full: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(full["report"]["iterations"].as_u64().unwrap() <= 3);
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(secnoma(&["solve"], dir.path()).status.code(), Some(1));
    assert_eq!(secnoma(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(secnoma(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(secnoma(&["solve", "missing.json"], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "N = 0\n").unwrap();
    let g = secnoma(&["generate", "--config", "bad.toml", "-o", "x.json"], dir.path());
    assert_eq!(g.status.code(), Some(2));

    // Three users on one subcarrier is outside the polyblock solver's scope.
    std::fs::write(dir.path().join("wide.toml"), "N = 1\nell = 3\n").unwrap();
    secnoma(&["generate", "--config", "wide.toml", "-o", "wide.json"], dir.path());
    let s = secnoma(&["solve", "wide.json", "--solver", "polyblock"], dir.path());
    assert_eq!(s.status.code(), Some(3), "{}", String::from_utf8_lossy(&s.stderr));
}

#[test]
fn experiment_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let spec = r#"
axis = "N"
values = [1, 2]
trials = 3
solvers = ["asm", "uniform"]
output_dir = "run"
workers = 2

[network]
E = 1
seed = 5
"#;
    std::fs::write(dir.path().join("spec.toml"), spec).unwrap();
    let e = secnoma(&["experiment", "spec.toml"], dir.path());
    assert_eq!(e.status.code(), Some(0), "{}", String::from_utf8_lossy(&e.stderr));
    let detail = std::fs::read_to_string(dir.path().join("run/detail.csv")).unwrap();
    assert_eq!(detail.lines().count(), 1 + 2 * 3 * 2);
    assert_eq!(
        detail.lines().next().unwrap(),
        "axis,value,trial,seed,solver,status,objective_bps_hz,iterations,residual,gap,wall_ms"
    );

    let again = secnoma(&["experiment", "spec.toml", "--output-dir", "again", "--workers", "1"], dir.path());
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(detail, std::fs::read_to_string(dir.path().join("again/detail.csv")).unwrap());

    let same = secnoma(&["compare", "run/detail.csv", "-a", "asm", "-b", "asm"], dir.path());
    assert_eq!(same.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(same.stdout.as_slice());
    let gaps: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(gaps.len(), 2);
    for g in &gaps {
        assert_eq!(g[6].parse::<f64>().unwrap(), 0.0);
    }

    let c = secnoma(&["compare", "run/detail.csv", "-a", "asm", "-b", "uniform", "-o", "gaps.csv"], dir.path());
    assert_eq!(c.status.code(), Some(0));
    assert!(dir.path().join("gaps.csv").exists());

    // A second run with other seeds cannot be paired with the first.
    std::fs::write(dir.path().join("other.toml"), spec.replace("seed = 5", "seed = 6").replace("\"run\"", "\"other\"")).unwrap();
    secnoma(&["experiment", "other.toml"], dir.path());
    let bad = secnoma(&["compare", "run/detail.csv", "other/detail.csv", "-a", "asm", "-b", "uniform"], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}
