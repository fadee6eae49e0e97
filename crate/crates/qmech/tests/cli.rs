//! End-to-end checks of the `qmech` binary: exit codes, report shapes,
//! golden outputs, and byte-for-byte determinism across runs and worker
//! counts.

use serde_json::Value;
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_qmech")
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name)
}

fn run_with(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("QMECH_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_with(args, &[])
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&output.stdout)
        )
    })
}

#[test]
fn allocate_reports_bundles_and_reconstruction() {
    let instance = fixture("identical_profile.json");
    let out = run(&["allocate", "--instance", &instance, "--identical-profile"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["command"], "allocate");
    assert_eq!(v["results"]["mechanism"], "sd");
    assert_eq!(v["results"]["quota"], serde_json::json!([1, 2, 1]));
    let bundles = v["results"]["bundles"].as_array().unwrap();
    assert_eq!(bundles[0]["objects"], serde_json::json!(["a"]));
    assert_eq!(bundles[1]["objects"], serde_json::json!(["b", "c"]));
    assert_eq!(bundles[2]["objects"], serde_json::json!(["d"]));
    let identical = &v["results"]["identical_profile"];
    assert_eq!(identical["ranking"], serde_json::json!(["a", "c", "b", "d"]));
    assert_eq!(identical["reproduces_allocation"], true);
    assert_eq!(v["instance"]["sha256"].as_str().unwrap().len(), 64);
    assert!(v.get("timing_ms").is_none());
}

#[test]
fn allocate_accepts_flag_overrides() {
    let instance = fixture("rsdq_golden.json");
    let out = run(&[
        "allocate",
        "--instance",
        &instance,
        "--mechanism",
        "sd",
        "--order",
        "1,2,3",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let bundles = v["results"]["bundles"].as_array().unwrap();
    assert_eq!(bundles[0]["objects"], serde_json::json!(["a", "c"]));
    assert_eq!(bundles[1]["objects"], serde_json::json!(["d"]));
    assert_eq!(bundles[2]["objects"], serde_json::json!(["b"]));
}

#[test]
fn rsdq_exact_prints_golden_matrix_and_support() {
    let instance = fixture("rsdq_golden.json");
    let out = run(&["rsdq", "--instance", &instance, "--support"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["mode"], "exact");
    assert_eq!(v["results"]["orderings"], 6);
    assert_eq!(
        v["results"]["matrix"],
        serde_json::json!([
            ["1/2", "1/6", "1/3", "1/3"],
            ["1/2", "0", "1/3", "1/2"],
            ["0", "5/6", "1/3", "1/6"]
        ])
    );
    let support = v["results"]["support"].as_array().unwrap();
    assert_eq!(support.len(), 6);
    for entry in support {
        assert_eq!(entry["weight"], "1/6");
    }
}

#[test]
fn rsdq_sampling_is_identical_across_worker_counts() {
    let instance = fixture("rsdq_golden.json");
    let args = ["rsdq", "--instance", &instance, "--sample", "8192", "--seed", "7"];
    let one = run_with(&args, &[("QMECH_THREADS", "1")]);
    let four = run_with(&args, &[("QMECH_THREADS", "4")]);
    let ambient = run(&args);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(one.stdout, ambient.stdout);
    let v = json(&one);
    assert_eq!(v["mode"], "sampled");
    assert_eq!(v["seed"], 7);
    assert_eq!(v["results"]["trials"], 8192);
}

#[test]
fn rsdq_writes_csv_next_to_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("matrix.csv");
    let instance = fixture("rsdq_golden.json");
    let out = run(&[
        "rsdq",
        "--instance",
        &instance,
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let expected = "agent,a,b,c,d\n1,1/2,1/6,1/3,1/3\n2,1/2,0,1/3,1/2\n3,0,5/6,1/3,1/6\n";
    assert_eq!(csv, expected);
    json(&out);
}

#[test]
fn audit_instance_with_clean_mechanism_exits_zero() {
    let instance = fixture("identical_profile.json");
    let out = run(&["audit", "--instance", &instance]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["scope"], "instance");
    let props = v["results"]["properties"].as_array().unwrap();
    let names: Vec<&str> = props
        .iter()
        .map(|p| p["property"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "strategyproofness",
            "non-bossiness",
            "neutrality",
            "pareto-efficiency"
        ]
    );
    assert!(props.iter().all(|p| p["holds"] == true));
}

#[test]
fn audit_grid_flags_interleaved_sequences() {
    let out = run(&[
        "audit",
        "--agents",
        "2",
        "--objects",
        "3",
        "--mechanism",
        "interleave",
        "--sequence",
        "1,2,1",
        "--properties",
        "sp",
    ]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["scope"], "grid");
    let prop = &v["results"]["properties"][0];
    assert_eq!(prop["property"], "strategyproofness");
    assert_eq!(prop["holds"], false);
    assert_eq!(prop["witness"]["agent"], "1");
    assert!(prop["checked"].as_u64().unwrap() > 0);
}

#[test]
fn audit_grid_lottery_is_clean() {
    let out = run(&[
        "audit",
        "--agents",
        "2",
        "--objects",
        "3",
        "--mechanism",
        "rsdq",
        "--quota",
        "1,1",
        "--properties",
        "sp,envyfree,ete",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let props = v["results"]["properties"].as_array().unwrap();
    assert_eq!(props.len(), 3);
    assert!(props.iter().all(|p| p["holds"] == true));
}

#[test]
fn audit_without_order_sweeps_every_dictator_order() {
    let out = run(&[
        "audit",
        "--agents",
        "2",
        "--objects",
        "3",
        "--mechanism",
        "sd",
        "--quota",
        "1,1",
        "--properties",
        "sp,nonbossy",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["mechanism"], "sd");
    assert!(v["results"]["properties"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["holds"] == true));
}

#[test]
fn dominance_ld_ranks_first_matrix_above_second() {
    let out = run(&[
        "dominance",
        "--matrix-a",
        &fixture("matrix_sd_efficient.json"),
        "--matrix-b",
        &fixture("matrix_ld_dominated.json"),
        "--instance",
        &fixture("ld_sd_instance.json"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["relation"], "ld");
    assert_eq!(v["results"]["first_dominates_second"], true);
    assert_eq!(v["results"]["second_dominates_first"], false);
    let per_agent = v["results"]["per_agent"].as_array().unwrap();
    assert!(per_agent.iter().all(|a| a["prefers"] == "first"));
    assert_eq!(
        v["results"]["matrix_a_sha256"].as_str().unwrap().len(),
        64
    );
}

#[test]
fn dominance_sd_reports_incomparable_prefixes() {
    let out = run(&[
        "dominance",
        "--matrix-a",
        &fixture("matrix_sd_efficient.json"),
        "--matrix-b",
        &fixture("matrix_ld_dominated.json"),
        "--instance",
        &fixture("ld_sd_instance.json"),
        "--relation",
        "sd",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["first_dominates_second"], false);
    assert_eq!(v["results"]["second_dominates_first"], false);
    let verdicts: Vec<&str> = v["results"]["per_agent"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| a["prefers"].as_str().unwrap())
        .collect();
    assert_eq!(verdicts, ["first", "incomparable", "first", "incomparable"]);
}

#[test]
fn dominance_rejects_shape_mismatch() {
    let out = run(&[
        "dominance",
        "--matrix-a",
        &fixture("matrix_sd_efficient.json"),
        "--matrix-b",
        &fixture("matrix_ld_dominated.json"),
        "--instance",
        &fixture("alternation.json"),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn find_manipulation_reports_the_witness_and_exits_two() {
    let out = run(&["find-manipulation", "--instance", &fixture("alternation.json")]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["found"], true);
    let w = &v["results"]["witness"];
    assert_eq!(w["agent"], "1");
    assert_eq!(w["misreport"], serde_json::json!(["b", "a", "c"]));
    assert_eq!(w["truthful_bundle"], serde_json::json!(["a", "c"]));
    assert_eq!(w["deviant_bundle"], serde_json::json!(["a", "b"]));
}

#[test]
fn find_manipulation_on_clean_instance_exits_zero() {
    let out = run(&[
        "find-manipulation",
        "--instance",
        &fixture("identical_profile.json"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["results"]["found"], false);
    assert!(v["results"].get("witness").is_none());
}

#[test]
fn usage_problems_exit_one_and_help_exits_zero() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["allocate", "--help"])), 0);
    assert_eq!(code(&run(&["no-such-command"])), 1);
    assert_eq!(code(&run(&["allocate", "--instance", "/no/such/file.json"])), 1);
    // --instance and --agents are mutually exclusive on audit.
    let conflict = run(&[
        "audit",
        "--instance",
        &fixture("identical_profile.json"),
        "--agents",
        "2",
        "--objects",
        "3",
    ]);
    assert_eq!(code(&conflict), 1);
    // The lottery needs a quota from somewhere.
    let no_quota = run(&["rsdq", "--instance", &fixture("alternation.json")]);
    assert_eq!(code(&no_quota), 1);
}

#[test]
fn default_reports_are_byte_identical_and_timing_opts_in() {
    let args = [
        "audit",
        "--agents",
        "2",
        "--objects",
        "3",
        "--mechanism",
        "sd",
        "--order",
        "1,2",
        "--quota",
        "1,1",
    ];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(first.stdout, second.stdout);

    let mut timed_args = args.to_vec();
    timed_args.push("--timing");
    let timed = run(&timed_args);
    assert_eq!(code(&timed), 0);
    let v = json(&timed);
    assert!(v["timing_ms"].is_u64());
}

#[test]
fn exhausted_budget_exits_one_with_a_hint() {
    let out = run(&[
        "audit",
        "--agents",
        "3",
        "--objects",
        "4",
        "--mechanism",
        "sd",
        "--order",
        "1,2,3",
        "--quota",
        "1,2,1",
        "--properties",
        "groupsp",
        "--cap",
        "100",
    ]);
    assert_eq!(code(&out), 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "{stderr}");
    assert!(stderr.contains("--cap"), "{stderr}");
}
