use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_clustergraph"));
    c.arg("--quiet");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON summary")
}

fn points(dir: &Path) -> String {
    let mut csv = String::from("x,y\n");
    // Two unit circles far apart.
    for center in [0.0f64, 10.0] {
        for i in 0..40 {
            let t = std::f64::consts::TAU * i as f64 / 40.0;
            csv.push_str(&format!("{},{}\n", center + t.cos(), t.sin()));
        }
    }
    let p = dir.join("points.csv");
    fs::write(&p, csv).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn stages_chain_and_match_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let pts = points(dir.path());
    let common = ["--points", &pts, "--kmeans-k", "8", "--knn-k", "5", "--seed", "2"];

    let cl = run(&[&["--json", "cluster"][..], &common, &["-o", &d("c.csv")]].concat());
    assert_eq!(json(&cl)["clusters"], 8);

    let build = run(&[&["--json", "build"][..], &common, &["-o", &d("g.json")]].concat());
    assert_eq!(json(&build)["vertices"], 8);

    let score = run(&[&["--json", "score"][..], &common, &["-g", &d("g.json"), "-o", &d("s.json")]].concat());
    assert!(json(&score)["global_distortion"].as_f64().unwrap() >= 0.0);

    let prune = run(
        &[&["--json", "prune"][..], &common, &["-g", &d("s.json"), "-o", &d("p.json"), "--trace", &d("t.json")]]
            .concat(),
    );
    assert_eq!(json(&prune)["stop"], "no_improving_edge");

    let merge = run(&[&["--json", "merge"][..], &common, &["-g", &d("p.json"), "-o", &d("m.json")]].concat());
    assert_eq!(json(&merge)["components"], 1);

    for ext in ["graphml", "dot"] {
        let target = d(&format!("m.{ext}"));
        let out = run(&["export", "-g", &d("m.json"), "-o", &target]);
        assert!(out.status.success());
        assert!(fs::metadata(&target).unwrap().len() > 0);
    }

    let pipe = run(&[&["--json", "pipeline"][..], &common, &["--output-dir", &d("out")]].concat());
    let summary = json(&pipe);
    assert_eq!(summary["final_components"], 1);
    assert!(summary["timings"].is_array());
    assert_eq!(
        fs::read(d("p.json")).unwrap(),
        fs::read(dir.path().join("out/graph_pruned.json")).unwrap()
    );

    let stab = run(&[&["--json", "stability"][..], &common, &["--other", &d("c.csv")]].concat());
    assert_eq!(json(&stab)["holds"], true);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    points(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "points = \"points.csv\"\nkmeans-k = 6\nknn-k = 5\nprune = \"none\"\nmerge = false\noutput-dir = \"out\"\n").unwrap();
    let out = run(&["--json", "--threads", "2", "pipeline", "--config", cfg.to_str().unwrap(), "--kmeans-k", "7"]);
    let summary = json(&out);
    assert_eq!(summary["clusters"], 7);
    assert_eq!(summary["initial_edges"], summary["final_edges"]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let pts = points(dir.path());
    let out_dir = dir.path().join("o");
    let out_dir = out_dir.to_str().unwrap();

    let ok = run(&["pipeline", "--points", &pts, "--kmeans-k", "4", "--knn-k", "5", "--output-dir", out_dir]);
    assert_eq!(ok.status.code(), Some(0));

    let missing = run(&["build", "--points", "/no/such/file.csv", "-o", "x.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let bad_metric = run(&["pipeline", "--points", &pts, "--metric", "median", "--output-dir", out_dir]);
    assert_eq!(bad_metric.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_metric.stderr).contains("config stage"));

    let bad_flag = run(&["pipeline", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(2));

    let ragged = dir.path().join("ragged.csv");
    fs::write(&ragged, "x,y\n1,2\n3\n").unwrap();
    let out = run(&["cluster", "--points", ragged.to_str().unwrap(), "-o", "c.csv"]);
    assert_eq!(out.status.code(), Some(1));
}
