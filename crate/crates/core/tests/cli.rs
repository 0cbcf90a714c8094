use serde_json::Value;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn pargate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pargate")).args(args).output().expect("binary runs")
}

fn solve_into(dir: &Path, request: &str) -> Output {
    let chain = configs().join("paper_chain.json");
    let request = configs().join(request);
    pargate(&[
        "solve",
        "--chain",
        chain.to_str().unwrap(),
        "--request",
        request.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--seed",
        "3",
    ])
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Every payload file under `dir` except the manifest, relative path → bytes.
fn payloads(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn solve_writes_everything_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = solve_into(dir, "request_parallel_14_25.json");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (pa, pb) = (payloads(&a), payloads(&b));
    // solution, report and 4 ions × 5 modes of trajectories.
    assert_eq!(pa.len(), 22);
    assert_eq!(pa, pb);

    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["seed"], 3);
    for p in manifest["outputs"].as_array().unwrap() {
        assert!(Path::new(p.as_str().unwrap()).exists());
    }
    let report = json(&a.join("report.json"));
    assert!(report["F_parallel"].as_f64().unwrap() > 0.999);
    let solution = json(&a.join("solution.json"));
    assert_eq!(solution["converged"], true);
    let traj = fs::read_to_string(a.join("trajectories/ion4_mode5.csv")).unwrap();
    assert!(traj.lines().count() > 100);
    // No temporary files left behind.
    assert!(fs::read_dir(&a).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn evaluate_reproduces_solve_time_fidelity() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("solve");
    assert!(solve_into(&dir, "request_unequal_15_24.json").status.success());
    let report_path = tmp.path().join("eval/report.json");
    let out = pargate(&[
        "evaluate",
        "--solution",
        dir.join("solution.json").to_str().unwrap(),
        "--chain",
        configs().join("paper_chain.json").to_str().unwrap(),
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let solve_f = json(&dir.join("report.json"))["F_parallel"].as_f64().unwrap();
    let eval_f = json(&report_path)["F_parallel"].as_f64().unwrap();
    assert!((solve_f - eval_f).abs() < 1e-9, "{} vs {}", solve_f, eval_f);
    assert!(tmp.path().join("eval/manifest.json").exists());
}

fn edit_solution(src: &Path, dst: &Path, f: impl Fn(&mut Vec<f64>)) {
    let mut sol = json(src);
    for ch in sol["channels"].as_array_mut().unwrap() {
        let mut amps: Vec<f64> = ch["amplitudes_khz"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        f(&mut amps);
        ch["amplitudes_khz"] = serde_json::json!(amps);
    }
    fs::write(dst, serde_json::to_string_pretty(&sol).unwrap()).unwrap();
}

fn evaluate(solution: &Path, out: &Path) -> Value {
    let res = pargate(&["evaluate", "--solution", solution.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    json(out)
}

#[test]
fn evaluate_zero_and_perturbed_solutions() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("solve");
    assert!(solve_into(&dir, "request_parallel_14_25.json").status.success());
    let base = evaluate(&dir.join("solution.json"), &tmp.path().join("base.json"));
    assert!(base["max_abs_alpha"].as_f64().unwrap() < 1e-6);

    let zero = tmp.path().join("zero.json");
    edit_solution(&dir.join("solution.json"), &zero, |a| a.iter_mut().for_each(|v| *v = 0.0));
    let report = evaluate(&zero, &tmp.path().join("zero_report.json"));
    assert_eq!(report["max_abs_alpha"].as_f64().unwrap(), 0.0);
    // With no drive each pair stays in |00⟩, overlap cos²(π/4) per pair.
    let f = report["F_parallel"].as_f64().unwrap();
    assert!((f - 0.25).abs() < 1e-12, "{}", f);

    let bumped = tmp.path().join("bumped.json");
    edit_solution(&dir.join("solution.json"), &bumped, |a| a[10] *= 1.01);
    let report = evaluate(&bumped, &tmp.path().join("bumped_report.json"));
    assert!(report["max_abs_alpha"].as_f64().unwrap() > 1e-5);
}

#[test]
fn simulate_builtins() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |builtin: &str| {
        let dir = tmp.path().join(builtin.replace(':', "_"));
        let out = pargate(&["simulate", "--builtin", builtin, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}: {}", builtin, String::from_utf8_lossy(&out.stderr));
        dir
    };

    let dir = run("adder-optimized");
    let csv = fs::read_to_string(dir.join("truth_table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 17);
    let summary = json(&dir.join("summary.json"));
    assert!((summary["mean_correct_output_probability"].as_f64().unwrap() - 1.0).abs() < 1e-12);

    let dir = run("ghz");
    let state = json(&dir.join("state.json"));
    let amps = state["amplitudes"].as_array().unwrap();
    let labels: Vec<&str> = amps.iter().map(|a| a["basis"].as_str().unwrap()).collect();
    assert_eq!(labels, ["0000", "1111"]);
    for a in amps {
        let (re, im) = (a["re"].as_f64().unwrap(), a["im"].as_f64().unwrap());
        assert!((re.hypot(im) - 0.5f64.sqrt()).abs() < 1e-11);
    }

    let dir = run("parity:0.25:24");
    let fit = json(&dir.join("parity_fit.json"));
    let amp = fit["amplitude"].as_f64().unwrap();
    assert!((amp - 1.0).abs() < 1e-9, "{}", fit);
    assert_eq!(fs::read_to_string(dir.join("parity.csv")).unwrap().lines().count(), 25);

    run("parallel-cnots");
    run("adder-feynman");
}

#[test]
fn simulate_circuit_file() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pargate(&[
        "simulate",
        "--circuit",
        configs().join("circuits/cnot_1_2.json").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(tmp.path().join("state.json").exists());
    let csv = fs::read_to_string(tmp.path().join("truth_table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();

    let out = pargate(&["simulate", "--builtin", "teleport", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let empty = tmp.path().join("empty_scan.json");
    fs::write(
        &empty,
        r#"{"pairs": [[1, 4]], "chi_targets": [0.25], "tau_us": 250, "n_segments": 60,
            "mu_scan_mhz": {"start": 2.96, "stop": 2.97, "steps": 0}}"#,
    )
    .unwrap();
    let out =
        pargate(&["solve", "--request", empty.to_str().unwrap(), "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // A regular file where the output directory should go.
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let request = configs().join("request_single_14.json");
    let out =
        pargate(&["solve", "--request", request.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));

    let out =
        pargate(&["evaluate", "--solution", tmp.path().join("missing.json").to_str().unwrap(), "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(4));

    // A tiny iteration budget leaves the solve unconverged.
    let tight = tmp.path().join("tight.json");
    fs::write(
        &tight,
        r#"{"pairs": [[1, 4], [2, 5]], "chi_targets": [0.25, 0.25], "tau_us": 250, "n_segments": 60,
            "mu_mhz": 2.962, "max_iterations": 3, "penalty_rounds": 0}"#,
    )
    .unwrap();
    let dir = tmp.path().join("tight_out");
    let out = pargate(&["solve", "--request", tight.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.join("solution.json"))["converged"], false);
}

#[test]
fn evaluate_rejects_chain_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("solve");
    assert!(solve_into(&dir, "request_parallel_14_25.json").status.success());
    let mut chain = json(&configs().join("paper_chain.json"));
    let small = tmp.path().join("chain3.json");
    chain["n_ions"] = serde_json::json!(3);
    for key in ["mode_freqs_mhz", "nbar"] {
        if let Some(v) = chain.get_mut(key).and_then(|v| v.as_array_mut()) {
            v.truncate(3);
        }
    }
    fs::write(&small, chain.to_string()).unwrap();
    let out = pargate(&[
        "evaluate",
        "--solution",
        dir.join("solution.json").to_str().unwrap(),
        "--chain",
        small.to_str().unwrap(),
        "--out",
        tmp.path().join("r.json").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
