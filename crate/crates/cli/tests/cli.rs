use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn config() -> PathBuf {
    fixtures().join("config.json")
}

fn sam3r(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sam3r"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = sam3r(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn gen_schedule_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let cfg = cfg.to_str().unwrap();
    let (a, b, c) = (p(dir.path(), "a.csv"), p(dir.path(), "b.csv"), p(dir.path(), "c.csv"));
    ok(&["gen-schedule", "--config", cfg, "--corridor", "east_west", "--seed", "7", "--output", &a]);
    ok(&["gen-schedule", "--config", cfg, "--corridor", "east_west", "--seed", "7", "--output", &b]);
    ok(&["gen-schedule", "--config", cfg, "--corridor", "east_west", "--seed", "8", "--output", &c]);
    let (a, b, c) = (fs::read(a).unwrap(), fs::read(b).unwrap(), fs::read(c).unwrap());
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(String::from_utf8(a).unwrap().starts_with("# config_hash="));
}

#[test]
fn unreachable_threshold_exits_3_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let cfg = cfg.to_str().unwrap();
    let sched = p(dir.path(), "s.csv");
    let tensor = p(dir.path(), "t.json");
    let plan = p(dir.path(), "plan.json");
    ok(&["gen-schedule", "--config", cfg, "--corridor", "spur", "--output", &sched]);
    ok(&["build-tensor", "--config", cfg, "--corridor", "spur", "--schedule", &sched, "--output", &tensor]);
    let out = sam3r(&["plan-reliability", "--config", cfg, "--tensor", &tensor, "--threshold", "0.999999", "--output", &plan]);
    assert_eq!(out.status.code(), Some(3));
    let diag = fs::read_to_string(format!("{plan}.diagnostic.txt")).unwrap();
    assert!(diag.contains("reliability target unreachable"), "{diag}");
    assert!(!Path::new(&plan).exists());
}

#[test]
fn usage_and_input_errors_have_distinct_codes() {
    assert_eq!(sam3r(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(sam3r(&["plan-reliability"]).status.code(), Some(1));
    assert_eq!(sam3r(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = p(dir.path(), "bad.json");
    fs::write(&bad, "{not json").unwrap();
    let out = sam3r(&["plan-reliability", "--tensor", &bad, "--output", &p(dir.path(), "o.json")]);
    assert_eq!(out.status.code(), Some(2));
    let out = sam3r(&["--config", &bad, "plan-resiliency", "--output", &p(dir.path(), "o.json")]);
    assert_eq!(out.status.code(), Some(2));
    // Generation without any seed is a usage error.
    let cfg = p(dir.path(), "cfg.json");
    fs::write(&cfg, r#"{"corridors": [{"name": "c", "waypoints": [[-83.0, 40.0], [-82.99, 40.0]]}]}"#).unwrap();
    let out = sam3r(&["--config", &cfg, "gen-schedule", "--corridor", "c", "--output", &p(dir.path(), "s.csv")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn zero_node_budget_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = fs::read_to_string(config()).unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&cfg_text).unwrap();
    cfg["solver"] = serde_json::json!({"node_budget": 0});
    cfg["paths"]["scenario"] = serde_json::json!(fixtures().join("scenario.json"));
    cfg["paths"]["dsm"] = serde_json::json!(fixtures().join("dsm.csv"));
    let cfg_path = p(dir.path(), "cfg.json");
    fs::write(&cfg_path, cfg.to_string()).unwrap();
    let out = sam3r(&["--config", &cfg_path, "plan-resiliency", "--output", &p(dir.path(), "d.json")]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Every stage on the bundled fixture, then a second run compared byte for byte.
#[test]
fn full_pipeline_is_green_and_reproducible() {
    let cfg = config();
    let cfg = cfg.to_str().unwrap();
    let run = |dir: &Path| {
        let f = |n: &str| p(dir, n);
        ok(&["--config", cfg, "ingest-dsm", "--output", &f("dsm.bin")]);
        ok(&["--config", cfg, "reclassify", "--input", &f("dsm.bin"), "--output", &f("terrain.bin")]);
        ok(&["--config", cfg, "reclassify", "--input", &f("dsm.bin"), "--output", &f("terrain.csv"), "--csv"]);
        ok(&["--config", cfg, "gen-schedule", "--corridor", "east_west", "--output", &f("base.csv")]);
        ok(&["--config", cfg, "gen-schedule", "--corridor", "east_west", "--surge", "--output", &f("surge.csv")]);
        ok(&["--config", cfg, "gen-schedule", "--corridor", "spur", "--output", &f("spur.csv")]);
        for (sched, tensor, corridor) in [
            ("base.csv", "base.json", "east_west"),
            ("surge.csv", "surge.json", "east_west"),
            ("spur.csv", "spur.json", "spur"),
        ] {
            ok(&[
                "--config", cfg, "build-tensor", "--corridor", corridor, "--schedule", &f(sched),
                "--terrain", &f("terrain.bin"), "--output", &f(tensor),
            ]);
        }
        ok(&["--config", cfg, "plan-reliability", "--tensor", &f("base.json"), "--output", &f("plan.json")]);
        ok(&["--config", cfg, "validate", "--plan", &f("plan.json"), "--tensor", &f("base.json")]);
        ok(&[
            "--config", cfg, "plan-robustness", "--plan", &f("plan.json"), "--tensor", &f("surge.json"),
            "--output", &f("aug.json"),
        ]);
        ok(&["--config", cfg, "validate", "--augmentation", &f("aug.json"), "--tensor", &f("surge.json")]);
        ok(&["--config", cfg, "plan-resiliency", "--output", &f("dispatch.json"), "--gantt", &f("gantt.csv")]);
        ok(&["--config", cfg, "validate", "--dispatch", &f("dispatch.json")]);
        ok(&["--config", cfg, "export-geojson", "--plan", &f("plan.json"), "--output", &f("plan.geojson")]);
        ok(&["--config", cfg, "export-geojson", "--augmentation", &f("aug.json"), "--output", &f("aug.geojson")]);
        ok(&["--config", cfg, "export-geojson", "--scenario", &fixtures().join("scenario.json").to_string_lossy(), "--output", &f("hubs.geojson")]);
        ok(&[
            "--config", cfg, "emit-plot", "--tensor", &f("base.json"), "--tensor", &f("spur.json"),
            "--output", &f("plot.csv"),
        ]);
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(a.path());
    run(b.path());

    let names = [
        "terrain.csv", "base.csv", "surge.csv", "base.json", "plan.json", "aug.json", "dispatch.json",
        "gantt.csv", "plan.geojson", "aug.geojson", "hubs.geojson", "plot.csv",
    ];
    for n in names {
        assert_eq!(fs::read(a.path().join(n)).unwrap(), fs::read(b.path().join(n)).unwrap(), "{n} differs");
    }

    let plan: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("plan.json")).unwrap()).unwrap();
    assert_eq!(plan["provenance"]["seed"], 7);
    assert_eq!(plan["provenance"]["config_hash"].as_str().unwrap().len(), 64);

    let geo: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("plan.geojson")).unwrap()).unwrap();
    assert_eq!(geo["type"], "FeatureCollection");
    assert!(!geo["features"].as_array().unwrap().is_empty());
    let hubs: serde_json::Value = serde_json::from_slice(&fs::read(a.path().join("hubs.geojson")).unwrap()).unwrap();
    assert_eq!(hubs["features"][0]["properties"]["role"], "backup-hub");

    let plot = fs::read_to_string(a.path().join("plot.csv")).unwrap();
    let lines: Vec<&str> = plot.lines().collect();
    assert_eq!(lines[1], "corridor,threshold,sensor_count,total_cost,status");
    assert_eq!(lines.len(), 2 + 2 * 5);

    let gantt = fs::read_to_string(a.path().join("gantt.csv")).unwrap();
    assert!(gantt.lines().any(|l| l.ends_with(",site_7,61,73")), "{gantt}");
}
