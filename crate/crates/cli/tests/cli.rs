use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn npplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_npplab"))
        .args(args)
        .env_remove("NPPLAB_CAP_BITS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_fixture(dir: &Path, name: &str, values: &[&str]) -> String {
    let path = dir.join(name);
    let line = json!({"n": values.len(), "scale_bits": 0, "dist": "gaussian", "seed": 0, "values": values});
    fs::write(&path, format!("{line}\n")).unwrap();
    path.to_str().unwrap().to_string()
}

fn solve_one(file: &str, solver: &str) -> Value {
    let o = npplab(&["solve", file, "--solver", solver]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn solve_fixtures() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_fixture(dir.path(), "a.jsonl", &["01", "02", "03", "04"]);
    let r = solve_one(&a, "bf");
    assert_eq!(r["disc_q"], json!("00"));
    assert_eq!(r["energy"], json!("inf"));
    assert_eq!(r["x"].as_str().unwrap().chars().count(), 4);

    let b = write_fixture(dir.path(), "b.jsonl", &["04", "05", "06", "07", "08"]);
    assert_eq!(solve_one(&b, "kk")["disc_q"], json!("02"));
}

#[test]
fn solve_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.jsonl");
    assert_eq!(code(&npplab(&["solve", missing.to_str().unwrap()])), 2);
    let garbage = dir.path().join("g.jsonl");
    fs::write(&garbage, "{not json\n").unwrap();
    assert_eq!(code(&npplab(&["solve", garbage.to_str().unwrap()])), 2);
    let a = write_fixture(dir.path(), "a.jsonl", &["01", "02"]);
    let o = npplab(&["solve", &a, "--solver", "magic"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("solver"));
}

#[test]
fn solve_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("g.jsonl");
    let p = f.to_str().unwrap();
    assert_eq!(code(&npplab(&["gen", "--n", "24", "--out", p])), 0);
    let o = Command::new(env!("CARGO_BIN_EXE_npplab"))
        .args(["solve", p, "--solver", "bf"])
        .env("NPPLAB_CAP_BITS", "10")
        .output()
        .unwrap();
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn gen_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let args = |p: &Path| {
        vec![
            "gen".to_string(),
            "--n".into(),
            "12".into(),
            "--dist".into(),
            "uniform_pm1".into(),
            "--scale-bits".into(),
            "80".into(),
            "--count".into(),
            "5".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    for p in [&a, &b] {
        let argv = args(p);
        let o = npplab(&argv.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 5);
    let parsed = npplab::io::read_instance_file(&a).unwrap();
    let mut again = Vec::new();
    npplab::io::write_instances(&mut again, &parsed).unwrap();
    assert_eq!(String::from_utf8(again).unwrap(), text);

    let solved = npplab(&["solve", a.to_str().unwrap(), "--solver", "mitm"]);
    assert_eq!(String::from_utf8_lossy(&solved.stdout).lines().count(), 5);
}

#[test]
fn gen_count_zero_writes_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.jsonl");
    let o = npplab(&["gen", "--n", "8", "--count", "0", "--out", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(&p).unwrap(), b"");
}

#[test]
fn gen_io_failure_exits_5() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("no/such/dir/g.jsonl");
    assert_eq!(code(&npplab(&["gen", "--n", "8", "--out", p.to_str().unwrap()])), 5);
    assert_eq!(code(&npplab(&["gen", "--n", "8", "--dist", "cauchy"])), 2);
}

fn run_config(dir: &Path, cfg: &Value, out: &str, extra: &[&str]) -> Output {
    let path = dir.join(format!("{out}.json"));
    fs::write(&path, cfg.to_string()).unwrap();
    let out = dir.join(out);
    let mut args = vec!["run", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    npplab(&args)
}

#[test]
fn malformed_configs_exit_2_with_field() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(Value, &str)> = vec![
        (json!("just a string"), "<root>"),
        (json!({"trials": 5}), "experiment"),
        (json!({"experiment": "annealing", "trials": 5}), "experiment"),
        (json!({"experiment": "scaling", "n": 8}), "trials"),
        (json!({"experiment": "scaling", "n": 8, "trials": 0}), "trials"),
        (json!({"experiment": "scaling", "n": 8, "trials": 1.5}), "trials"),
        (json!({"experiment": "scaling", "trials": 5}), "n"),
        (json!({"experiment": "scaling", "n": "eight", "trials": 5}), "n"),
        (json!({"experiment": "scaling", "n": 8, "trials": 5, "solver": "magic"}), "solver"),
        (json!({"experiment": "scaling", "n": 8, "trials": 5, "dist": "cauchy"}), "dist"),
        (json!({"experiment": "scaling", "n": 8, "trials": 5, "scale_bits": 4}), "scale_bits"),
        (json!({"experiment": "scaling", "n": 8, "trials": 5, "seed": -1}), "seed"),
        (json!({"experiment": "scaling", "n": 8, "trials": 5, "verbose": true}), "verbose"),
        (json!({"experiment": "obstruction", "n": 12, "energy": 8, "trials": 5, "scale_bits": 16}), "energy"),
        (json!({"experiment": "obstruction", "n": 12, "energy": 8, "trials": 5, "eta": "big"}), "eta"),
        (json!({"experiment": "obstruction", "n": 12, "energy": 8, "trials": 5, "eps": 2.0}), "eps"),
        (json!({"experiment": "obstruction", "n": 12, "energy": 8, "trials": 5, "mode": "twisted"}), "mode"),
        (json!({"experiment": "repel", "n": 12, "energy": 8, "trials": 5, "k": 0}), "k"),
        (json!({"experiment": "stability", "n": 8, "degree": 12, "eps": 0.1, "trials": 5}), "degree"),
        (json!({"experiment": "rounding", "n": 8, "energy": 2, "trials": 5, "junta": "majority"}), "junta"),
    ];
    assert_eq!(cases.len(), 20);
    for (i, (cfg, field)) in cases.iter().enumerate() {
        let o = run_config(dir.path(), cfg, &format!("bad{i}"), &[]);
        assert_eq!(code(&o), 2, "{cfg}: {}", stderr(&o));
        assert!(stderr(&o).contains(&format!("`{field}`")), "{cfg}: {}", stderr(&o));
    }
    let o = npplab(&["run", "--config", dir.path().join("missing.json").to_str().unwrap(), "--out", "x"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_replays_from_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"experiment": "scaling", "n": [16, 20], "trials": 30, "seed": 4});
    let o = run_config(dir.path(), &cfg, "first", &["--workers", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let first = dir.path().join("first");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(first.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"], cfg);
    assert_eq!(manifest["resolved"]["solver"], json!("mitm"));

    let replay = dir.path().join("replay");
    let o = npplab(&[
        "run",
        "--config",
        first.join("manifest.json").to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
        "--workers",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut csvs = 0;
    for name in manifest["outputs"].as_array().unwrap() {
        let name = name.as_str().unwrap();
        if name.ends_with(".csv") {
            assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(replay.join(name)).unwrap());
            csvs += 1;
        }
    }
    assert_eq!(csvs, 2);
    let header = fs::read_to_string(first.join("scaling_00_n16.csv")).unwrap();
    assert!(header.starts_with("trial,disc_q,energy\n"));

    let before = fs::read(first.join("summary.json")).unwrap();
    fs::remove_file(first.join("summary.json")).unwrap();
    assert_eq!(code(&npplab(&["summarize", "--out", first.to_str().unwrap()])), 0);
    assert_eq!(fs::read(first.join("summary.json")).unwrap(), before);
}

#[test]
fn run_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({"experiment": "scaling", "n": 40, "trials": 1, "solver": "bf"});
    let o = run_config(dir.path(), &cfg, "cap", &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&npplab(&[])), 2);
    assert_eq!(code(&npplab(&["frobnicate"])), 2);
    assert_eq!(code(&npplab(&["gen"])), 2);
}
