use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use schelling_core::lattice::TorusGrid;

fn schelling(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_schelling")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const RUN: &str = r#"{
  "n": 3,
  "red_count": 4,
  "params": {"r": 1, "beta": 2},
  "scheduler": {"kind": "contagion"},
  "steps": 2000,
  "seed": 1,
  "betas": [1, 6]
}
"#;

#[test]
fn minseg_reports_the_band_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let o = schelling(&["minseg", "--n", "4", "--red", "8", "--out", "m"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("min_bichromatic_edges 8"), "{text}");
    assert!(text.contains("argmin_count 8"), "{text}");
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m/minseg.json")).unwrap()).unwrap();
    let argmin: Vec<&str> = json["argmin"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(argmin.contains(&"++++++++--------"));
    assert!(argmin.contains(&"++--++--++--++--"));
}

#[test]
fn validate_scheduler_names_the_asymmetric_pair() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(3).unwrap();
    // the uniform walk with one entry removed: {(0,0),(0,1)} -> {(2,2),(2,1)}
    // loses its weight, the reverse keeps it
    let (from, to) = (g.pair_index_of(0, 1), g.pair_index_of(7, 8));
    let mut text = String::from("# uniform walk minus one entry\n");
    for e in 0..g.num_pairs() {
        let row: Vec<usize> = (0..g.num_pairs()).filter(|&t| !(e == from && t == to)).collect();
        let w = 1.0 / row.len() as f64;
        for t in row {
            let (p, q) = (g.pair(e), g.pair(t));
            text += &format!(
                "{} {} {} {} {} {} {} {} {w}\n",
                p.a().row, p.a().col, p.b().row, p.b().col, q.a().row, q.a().col, q.b().row, q.b().col
            );
        }
    }
    fs::write(dir.path().join("bad.sched"), &text).unwrap();
    let o = schelling(&["validate-scheduler", "--file", "bad.sched"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("AsymmetricSupport"), "{err}");
    assert!(err.contains("(2,1)") && err.contains("(2,2)") && err.contains("(0,0)"), "{err}");

    let mut zero_weight = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let (p, q) = (g.pair(from), g.pair(to));
    zero_weight.push_str(&format!(
        "\n{} {} {} {} {} {} {} {} 0\n",
        p.a().row, p.a().col, p.b().row, p.b().col, q.a().row, q.a().col, q.b().row, q.b().col
    ));
    fs::write(dir.path().join("still_bad.sched"), &zero_weight).unwrap();
    let o = schelling(&["validate-scheduler", "--file", "still_bad.sched", "--n", "3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_scheduler_accepts_a_valid_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = TorusGrid::new(3).unwrap();
    let mut text = String::new();
    for e in 0..g.num_pairs() {
        let p = g.pair(e);
        let q = g.pair((e + 1) % g.num_pairs());
        let r = g.pair((e + g.num_pairs() - 1) % g.num_pairs());
        for (t, w) in [(p, 0.5), (q, 0.25), (r, 0.25)] {
            text += &format!(
                "{} {} {} {} {} {} {} {} {w}\n",
                p.a().row, p.a().col, p.b().row, p.b().col, t.a().row, t.a().col, t.b().row, t.b().col
            );
        }
    }
    fs::write(dir.path().join("ring.sched"), text).unwrap();
    let o = schelling(&["validate-scheduler", "--file", "ring.sched"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("ok"));
}

#[test]
fn simulate_is_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    for out in ["a", "b"] {
        let o = schelling(&["simulate", "--config", "run.json", "--seed", "7", "--out", out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for f in ["trace.jsonl", "summary.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
        assert_eq!(a.last(), Some(&b'\n'));
    }
    let trace = fs::read_to_string(dir.path().join("a/trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 2000);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    let keys: Vec<&String> = first.as_object().unwrap().keys().collect();
    assert_eq!(keys.len(), 5);
    assert!(trace.lines().next().unwrap().starts_with("{\"step\":1,\"scheduled_pair\":"));

    let o = schelling(&["simulate", "--config", "run.json", "--seed", "8", "--out", "c"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_ne!(fs::read(dir.path().join("c/trace.jsonl")).unwrap(), fs::read(dir.path().join("a/trace.jsonl")).unwrap());
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    let o = schelling(&["simulate", "--config", "run.json", "--seed", "11", "--steps", "300", "--out", "a"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["steps"], 300);
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));
    fs::write(dir.path().join("resolved.json"), serde_json::to_string(&manifest["config"]).unwrap()).unwrap();
    let o = schelling(&["simulate", "--config", "resolved.json", "--out", "b"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read(dir.path().join("a/trace.jsonl")).unwrap(), fs::read(dir.path().join("b/trace.jsonl")).unwrap());
}

#[test]
fn snapshots_are_ppm_images() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    let o = schelling(&["simulate", "--config", "run.json", "--steps", "50", "--snapshot-every", "25", "--out", "s"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut names: Vec<String> = fs::read_dir(dir.path().join("s/snapshots"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, ["step_00000000.ppm", "step_00000025.ppm", "step_00000050.ppm"]);
    let img = fs::read(dir.path().join("s/snapshots/step_00000050.ppm")).unwrap();
    assert!(img.starts_with(b"P6\n3 3\n255\n"));
    assert_eq!(img.len(), 11 + 27);
    let reds = img[11..].chunks(3).filter(|p| p == &[255, 0, 0]).count();
    assert_eq!(reds, 4);
    let o = schelling(&["simulate", "--config", "run.json", "--out", "t"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("t/snapshots").exists());
}

#[test]
fn bad_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.json"), "{\"n\": 3,\n \"red_count\": 4,\n \"sede\": 1}\n").unwrap();
    let o = schelling(&["simulate", "--config", "typo.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("typo.json:3"), "{}", stderr(&o));
    fs::write(dir.path().join("many.json"), r#"{"n": 3, "red_count": 12, "params": {"beta": 0}}"#).unwrap();
    let o = schelling(&["simulate", "--config", "many.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("red_count") && err.contains("beta"), "{err}");
    assert!(!dir.path().join("x").exists());
}

#[test]
fn oversized_instances_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("big.json"), r#"{"n": 4, "red_count": 8}"#).unwrap();
    let o = schelling(&["exact", "--config", "big.json", "--out", "x"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("too large"), "{}", stderr(&o));
}

#[test]
fn sweep_exact_and_stable_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.json"), RUN).unwrap();
    let o = schelling(&["sweep", "--config", "run.json", "--betas", "1,6", "--out", "w"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("w/sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("beta,mass_on_Q,config1,prob1"));
    let m1: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
    let m6: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
    assert!(m6 > m1);
    assert!(dir.path().join("w/sweep.json").exists() && dir.path().join("w/manifest.json").exists());

    let o = schelling(&["exact", "--config", "run.json", "--betas", "geometric(1, 4, 2)", "--out", "e"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("e/stationary.json")).unwrap()).unwrap();
    let results = report["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    for r in results {
        assert!(r["residual"].as_f64().unwrap() <= 1e-10);
        let total: f64 = r["configurations"].as_array().unwrap().iter().map(|c| c["probability"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    let o = schelling(&["stable", "--config", "run.json", "--check-beta", "6", "--out", "st"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("st/stable.json")).unwrap()).unwrap();
    assert_eq!(report["subset_of_max_segregated"], true);
    assert_eq!(report["equals_max_segregated"], true);
    assert_eq!(report["stable_configurations"].as_array().unwrap().len(), 45);
    assert_eq!(report["cross_check"]["config_rank_agreement"], true);
}
