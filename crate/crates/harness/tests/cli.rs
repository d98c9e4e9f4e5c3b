use std::path::Path;
use std::process::Command;

fn critgen(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_critgen")).args(args).output().unwrap()
}

#[test]
fn actions_lists_all_45() {
    let out = critgen(&["actions", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 45);
}

#[test]
fn road_json_round_trips() {
    let out = critgen(&["road", "corner_intersection"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let road: critgen_core::world::RoadNetwork = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(road, critgen_core::world::build_road(critgen_core::world::LayoutId::CornerIntersection));
}

#[test]
fn eval_compare_and_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |policy: &str| -> std::path::PathBuf {
        let out = d.join(policy);
        let o = critgen(&[
            "eval",
            "--policy",
            policy,
            "--episodes",
            "4",
            "--layout",
            "l_shaped_junction",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(out.join("metrics.csv").exists());
        out
    };
    let a = run("random");
    let b = run("random_search");
    let cmp = d.join("cmp");
    let o = critgen(&[
        "compare",
        a.join("report.json").to_str().unwrap(),
        b.join("report.json").to_str().unwrap(),
        "--out",
        cmp.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(cmp.join("comparison.csv").exists());

    if let Some(trace) = first_trace(&a.join("traces")) {
        let o = critgen(&["replay", trace.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("identical"));
    }
}

fn first_trace(dir: &Path) -> Option<std::path::PathBuf> {
    std::fs::read_dir(dir).ok()?.filter_map(|e| e.ok()).map(|e| e.path()).next()
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    let o = critgen(&["eval", "--episodes", "0", "--out", "/nonexistent/x"]);
    assert_eq!(o.status.code(), Some(2));
    let o = critgen(&["replay", "/nonexistent/trace.jsonl"]);
    assert_eq!(o.status.code(), Some(2));
}
