use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/sw2d");
    ["main.f", "dyn.f", "shapiro.f", "update.f"].iter().map(|f| dir.join(f)).collect()
}

fn run(args: &[&str], inputs: &[PathBuf]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fortstream")).args(args).args(inputs).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn experiment(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.json");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn refactor_writes_common_free_sources_and_leaves_inputs_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let before: Vec<String> = corpus().iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    let out = tmp.path().join("r");
    let o = run(&["refactor", "--emit-report", "--out", out.to_str().unwrap()], &corpus());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["main.f95", "dyn.f95", "shapiro.f95", "update.f95"] {
        let text = fs::read_to_string(out.join(f)).unwrap().to_lowercase();
        assert!(!text.contains("common"), "{f}");
        assert!(text.contains("implicit none"), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("refactor_report.json")).unwrap()).unwrap();
    assert!(report["intentsInferred"]["dyn"].is_object());
    let after: Vec<String> = corpus().iter().map(|p| fs::read_to_string(p).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn refactor_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run(&["refactor", "--out", a.to_str().unwrap()], &corpus())), 0);
    assert_eq!(code(&run(&["refactor", "--out", b.to_str().unwrap()], &corpus())), 0);
    for f in ["main.f95", "dyn.f95", "shapiro.f95", "update.f95"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn missing_inputs_are_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["refactor", "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("no input files"));
}

#[test]
fn unknown_variant_lists_the_valid_ones() {
    let o = run(&["compile", "--variant", "fast"], &corpus());
    assert_eq!(code(&o), 2);
    let e = stderr(&o);
    assert!(e.contains("baseline") && e.contains("channelized") && e.contains("smartcache"), "{e}");
}

#[test]
fn parse_errors_point_at_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.f");
    fs::write(&bad, "      program p\n      x = (1 +\n      end\n").unwrap();
    let o = run(&["analyze", "--out", tmp.path().to_str().unwrap()], std::slice::from_ref(&bad));
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains(&format!("{}:2:", bad.display())), "{}", stderr(&o));
}

#[test]
fn analyze_dumps_three_maps() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&["analyze", "--dump-ir", "--out", tmp.path().to_str().unwrap()], &corpus());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ir: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("ir.json")).unwrap()).unwrap();
    let kinds: Vec<&str> = ir["nodes"].as_array().unwrap().iter().map(|n| n["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["map", "map", "map"]);
}

#[test]
fn compile_writes_one_file_per_kernel() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["compile", "--variant", "channelized", "--param", "nx=8", "--param", "ny=8", "--out"];
    let o = run(&[&args[..], &[tmp.path().to_str().unwrap()]].concat(), &corpus());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("graph_channelized.json")).unwrap()).unwrap();
    for k in graph["kernels"].as_array().unwrap() {
        let name = format!("{}_channelized.clk", k["name"].as_str().unwrap());
        assert!(tmp.path().join(&name).exists(), "{name}");
    }
}

#[test]
fn simulate_dumps_a_report_under_out() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let args = [
        "simulate", "--variant", "smartcache", "--param", "nx=6", "--param", "ny=5", "--param", "nt=2", "--sched",
        "random:9", "--capacity", "1", "--dump-report", "reports/r.json", "--out", out,
    ];
    let o = run(&args, &corpus());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("reports/r.json")).unwrap()).unwrap();
    assert_eq!(rep["timeSteps"], 2);
    assert_eq!(rep["schedule"], "random:9");
    assert!(rep["totals"]["globalReads"].as_u64().unwrap() > 0);
    let scalars: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("scalars_smartcache.json")).unwrap()).unwrap();
    assert!(scalars["etasum"].is_number());
}

#[test]
fn report_outside_out_is_refused() {
    let o = run(&["simulate", "--variant", "baseline", "--dump-report", "/tmp/x.json"], &corpus());
    assert_eq!(code(&o), 2);
}

#[test]
fn step_limit_is_an_internal_error() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["simulate", "--variant", "baseline", "--param", "nx=6", "--param", "ny=6", "--max-steps", "10", "--out"];
    let o = run(&[&args[..], &[tmp.path().to_str().unwrap()]].concat(), &corpus());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("step limit"));
}

#[test]
fn compare_passes_bit_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), r#"{"nx": 16, "ny": 12, "NT": 20, "init": {"kind": "hump", "height": 0.4}}"#);
    let o = run(&["compare", "--experiment", &exp, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.matches("PASS").count(), 4, "{stdout}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("compare.json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["maxUlp"] == 0));
    let sc = rows.iter().find(|r| r["variant"] == "smartcache").unwrap();
    assert!(sc["vsBaseline"].as_f64().unwrap() < 0.5);
}

#[test]
fn compare_accepts_a_variant_subset_and_seeded_schedule() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), r#"{"nx": 8, "ny": 8, "NT": 5}"#);
    let args = ["compare", "--experiment", &exp, "--variants", "channelized", "--seed", "7", "--capacity", "2", "--out"];
    let o = run(&[&args[..], &[tmp.path().to_str().unwrap()]].concat(), &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("compare.json")).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 1);
    assert_eq!(doc["schedule"], "random:7");
}

#[test]
fn unstable_experiment_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), r#"{"nx": 8, "ny": 8, "NT": 5, "dt": 1.0}"#);
    let o = run(&["compare", "--experiment", &exp, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn metrics_json_lists_every_variant() {
    let tmp = tempfile::tempdir().unwrap();
    let exp = experiment(tmp.path(), r#"{"nx": 64, "ny": 64, "NT": 10}"#);
    let o = run(&["metrics", "--json", "--experiment", &exp, "--out", tmp.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let v = doc["variants"].as_array().unwrap();
    let totals: Vec<u64> = v.iter().map(|r| r["totalAccesses"].as_u64().unwrap()).collect();
    assert_eq!(totals, [41 * 4096 * 10, 35 * 4096 * 10, (6 * 66 * 66 + 5 * 4096) * 10]);
    assert!(tmp.path().join("metrics.json").exists());
}
