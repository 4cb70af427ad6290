use std::path::PathBuf;

use mdp_hitting::{MatrixDocument, MatrixF64};
use mdp_hitting_cli::{exit, run, Output};

fn data(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "data", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> Output {
    run(std::iter::once("mdp-hitting").chain(args.iter().copied()))
}

fn matrix(out: &Output) -> MatrixF64 {
    assert_eq!(out.code, 0, "{}", out.stderr);
    MatrixDocument::parse(&out.stdout).unwrap().to_matrix()
}

fn report(out: &Output) -> serde_json::Value {
    serde_json::from_str(&out.stdout).unwrap()
}

#[test]
fn validate_reports_shape() {
    let out = cli(&["validate", &data("car_on_road.json")]);
    assert_eq!(out.code, exit::OK);
    let r = report(&out);
    assert_eq!(r["pairs"], 9);
    assert_eq!(r["gamma"], 0.9);
}

#[test]
fn validate_rejects_short_row_and_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(data("two_state_chain.json"))
        .unwrap()
        .replace("\"s1\": 1.0\n    },\n    \"s1,a\"", "\"s1\": 0.9\n    },\n    \"s1,a\"");
    let short = dir.path().join("short.json");
    std::fs::write(&short, text).unwrap();
    let out = cli(&["validate", short.to_str().unwrap()]);
    assert_eq!(out.code, exit::INVALID_MODEL, "{}", out.stderr);
    let diag: serde_json::Value = serde_json::from_str(&out.stderr).unwrap();
    assert_eq!(diag["error"], "invalid");
    assert!(diag["message"].as_str().unwrap().contains("(s0,a)"), "{}", out.stderr);

    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{ states: [").unwrap();
    assert_eq!(cli(&["validate", junk.to_str().unwrap()]).code, exit::PARSE_ERROR);
    assert_eq!(cli(&["validate", "/nonexistent/mdp.json"]).code, exit::PARSE_ERROR);
}

#[test]
fn occupancy_values() {
    let raw = cli(&["occupancy", &data("two_state_chain.json")]);
    assert_eq!(matrix(&raw).column(0), vec![1.0, 1.0]);
    assert_eq!(report(&raw)["metadata"]["sum"], 2.0);
    let norm = cli(&["occupancy", &data("two_state_chain.json"), "--normalized"]);
    assert_eq!(matrix(&norm).column(0), vec![0.5, 0.5]);
    let single = cli(&["occupancy", &data("self_loop_0.5.json")]);
    assert_eq!(matrix(&single).column(0), vec![2.0]);
}

#[test]
fn hitting_kinds() {
    let restart = matrix(&cli(&["hitting", &data("two_state_chain.json")]));
    assert_eq!(restart.to_rows(), vec![vec![0.0, 2.0], vec![2.0, 0.0]]);
    let plain = cli(&["hitting", &data("two_state_chain.json"), "--kind", "plain"]);
    assert_eq!(report(&plain)["entries"][0][1], "inf");
    assert!(matrix(&plain)[(0, 1)].is_infinite());

    let dir = tempfile::tempdir().unwrap();
    let undiscounted = dir.path().join("g0.json");
    let text = std::fs::read_to_string(data("car_on_road.json"))
        .unwrap()
        .replace("\"gamma\": 0.9", "\"gamma\": 0.0");
    std::fs::write(&undiscounted, text).unwrap();
    let l = matrix(&cli(&[
        "hitting",
        undiscounted.to_str().unwrap(),
        "--kind",
        "discounted",
    ]));
    for i in 0..l.rows() {
        for j in 0..l.cols() {
            assert_eq!(l[(i, j)], if i == j { 0.0 } else { 1.0 });
        }
    }
}

#[test]
fn gw_reports() {
    let same = cli(&["gw", &data("car_on_road.json"), &data("car_on_road.json"), "--exact"]);
    assert_eq!(report(&same)["value"], 0.0);
    assert_eq!(report(&same)["status"], "exact");

    let point = cli(&[
        "gw",
        &data("two_state_chain.json"),
        &data("self_loop_0.5.json"),
        "--exact",
    ]);
    let v = report(&point)["value"].as_f64().unwrap();
    assert!((v - 0.5 * 2f64.sqrt()).abs() < 1e-12);

    let solved = cli(&[
        "gw",
        &data("two_state_chain.json"),
        &data("self_loop_0.5.json"),
        "--restarts",
        "3",
    ]);
    let r = report(&solved);
    assert_eq!(r["status"], "upper_bound");
    assert_eq!(r["restarts_used"], 3);
    assert!((r["value"].as_f64().unwrap() - v).abs() < 1e-9);
}

#[test]
fn gw_writes_coupling_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("coupling.json");
    let out = cli(&[
        "gw",
        &data("car_on_road.json"),
        &data("car_on_road_reordered.json"),
        "--coupling-out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.code, exit::OK, "{}", out.stderr);
    assert!(report(&out).get("coupling").is_none());
    let doc = MatrixDocument::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let mu: MatrixF64 = doc.to_matrix();
    assert!((mu.sum() - 1.0).abs() < 1e-12);
    assert_eq!(doc.row_labels.len(), 3);
}

#[test]
fn gw_mass_mismatch_and_too_large() {
    let out = cli(&[
        "gw",
        &data("two_state_chain.json"),
        &data("self_loop_0.9.json"),
        "--no-normalize",
    ]);
    assert_eq!(out.code, exit::INFEASIBLE_COUPLING);
    assert!(out.stderr.contains("2 vs 10"), "{}", out.stderr);

    let dir = tempfile::tempdir().unwrap();
    let big = dir.path().join("big.json");
    let states: Vec<String> = (0..5).map(|i| format!("\"c{i}\"")).collect();
    let policy: Vec<String> = (0..5).map(|i| format!("\"c{i}\": {{\"go\": 1.0}}")).collect();
    let trans: Vec<String> = (0..5)
        .map(|i| format!("\"c{i},go\": {{\"c{}\": 1.0}}", (i + 1) % 5))
        .collect();
    let text = format!(
        "{{\"states\": [{}], \"actions\": [\"go\"], \"gamma\": 0.5, \"initial\": {{\"c0\": 1.0}}, \"policy\": {{{}}}, \"transition\": {{{}}}}}",
        states.join(", "),
        policy.join(", "),
        trans.join(", ")
    );
    std::fs::write(&big, text).unwrap();
    let out = cli(&["gw", big.to_str().unwrap(), big.to_str().unwrap(), "--exact"]);
    assert_eq!(out.code, exit::RUNTIME, "{}", out.stderr);
}

#[test]
fn equivalence() {
    let out = cli(&["equiv", &data("car_on_road.json"), &data("car_on_road_reordered.json")]);
    assert_eq!(out.code, exit::OK);
    assert_eq!(
        out.stdout,
        "equivalent: true\nroad0,straight -> road0,straight\nroad1,straight -> road1,straight\nroad2,straight -> road2,straight\n"
    );
    let sizes = cli(&["equiv", &data("two_state_chain.json"), &data("self_loop_0.5.json")]);
    assert_eq!(sizes.code, exit::NOT_EQUIVALENT);
    assert!(sizes.stdout.contains("SizeMismatch"));
    let perturbed = cli(&[
        "equiv",
        &data("two_state_chain.json"),
        &data("two_state_chain_perturbed.json"),
    ]);
    assert_eq!(perturbed.code, exit::NOT_EQUIVALENT);
}

#[test]
fn simulate() {
    let chain = data("two_state_chain.json");
    let out = cli(&["simulate", &chain, "--target", "s0,a", "--start", "s1,a", "--seed", "7"]);
    let r = report(&out);
    let (mean, se) = (r["mean"].as_f64().unwrap(), r["std_error"].as_f64().unwrap());
    assert!((mean - 2.0).abs() <= 3.0 * se, "{mean} ± {se}");
    assert_eq!(r["samples"], 100_000);

    let dir = tempfile::tempdir().unwrap();
    let zero = dir.path().join("zero.json");
    let text = std::fs::read_to_string(&chain)
        .unwrap()
        .replace("\"gamma\": 0.5", "\"gamma\": 0.0");
    std::fs::write(&zero, text).unwrap();
    let one_step = report(&cli(&[
        "simulate",
        zero.to_str().unwrap(),
        "--target",
        "0",
        "--start",
        "1",
        "--episodes",
        "1000",
    ]));
    assert_eq!(one_step["mean"], 1.0);
    assert_eq!(one_step["std_error"], 0.0);

    let censored = cli(&[
        "simulate",
        &data("car_on_road.json"),
        "--target",
        "road0,left",
        "--start",
        "road0,straight",
        "--episodes",
        "50",
        "--steps",
        "20",
    ]);
    assert_eq!(censored.code, exit::ALL_CENSORED, "{}", censored.stderr);
    assert_eq!(
        cli(&["simulate", &chain, "--target", "nope", "--start", "0"]).code,
        exit::USAGE
    );
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cli(&[]).code, exit::USAGE);
    assert_eq!(cli(&["gw", "a.json"]).code, exit::USAGE);
    assert_eq!(cli(&["gw", "a", "b", "--exact", "--solver"]).code, exit::USAGE);
    let help = cli(&["--help"]);
    assert_eq!(help.code, exit::OK);
    assert!(help.stdout.contains("simulate"));
}

#[test]
fn binary_forwards_exit_codes() {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_mdp-hitting"))
        .args(["equiv", &data("two_state_chain.json"), &data("self_loop_0.5.json")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(exit::NOT_EQUIVALENT));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("equivalent: false"));
}
