//! End-to-end command behavior: paired solver comparisons through the
//! library entry points, and process-level checks of the binary (JSON on
//! stdout, one-line errors on stderr, output-directory resolution).

use std::process::Command;

use banditforest_cli::commands::{cmd_budget, cmd_crossover, cmd_train};
use banditforest_cli::config::RunConfig;
use banditforest_cli::document::ResultDocument;

fn synth_cfg(pairs: &[(&str, &str)]) -> RunConfig {
    let mut cfg = RunConfig::default();
    for (k, v) in pairs {
        cfg.apply(k, v).unwrap();
    }
    cfg
}

#[test]
fn sampling_solver_cuts_insertions_at_matched_accuracy() {
    let base = [
        ("synth_n", "20000"),
        ("synth_features", "20"),
        ("synth_informative", "5"),
        ("synth_noise", "0.2"),
        ("trees", "5"),
        ("max_depth", "3"),
        ("bins", "16"),
        ("seeds", "2"),
    ];
    let mut exact = synth_cfg(&base);
    exact.apply("solver", "exact").unwrap();
    let mut mab = synth_cfg(&base);
    mab.apply("solver", "mabsplit").unwrap();

    let exact_doc = cmd_train(&exact).unwrap();
    let mab_doc = cmd_train(&mab).unwrap();
    let exact_ins = exact_doc.metrics["insertions_used"].mean;
    let mab_ins = mab_doc.metrics["insertions_used"].mean;
    assert!(
        mab_ins < exact_ins,
        "expected fewer insertions: mabsplit {mab_ins} vs exact {exact_ins}"
    );
    let exact_acc = exact_doc.metrics["test_accuracy"].mean;
    let mab_acc = mab_doc.metrics["test_accuracy"].mean;
    assert!(
        (exact_acc - mab_acc).abs() <= 0.02,
        "accuracies diverged: mabsplit {mab_acc} vs exact {exact_acc}"
    );
}

#[test]
fn equal_budget_grows_more_trees_with_the_sampling_solver() {
    // stumps: split cost is all root cost, where sampling helps most
    let base = [
        ("synth_n", "6000"),
        ("synth_features", "20"),
        ("synth_informative", "5"),
        ("synth_noise", "0.2"),
        ("trees", "50"),
        ("max_depth", "1"),
        ("bins", "16"),
        ("seeds", "2"),
    ];
    // budget of roughly three exact trees
    let mut probe = synth_cfg(&base);
    probe.apply("solver", "exact").unwrap();
    probe.apply("trees", "1").unwrap();
    probe.apply("seeds", "1").unwrap();
    let one_tree = cmd_train(&probe).unwrap().metrics["insertions_used"].mean;
    let budget = format!("{}", (3.2 * one_tree) as u64);

    let mut exact = synth_cfg(&base);
    exact.apply("solver", "exact").unwrap();
    exact.apply("budget", &budget).unwrap();
    let mut mab = synth_cfg(&base);
    mab.apply("solver", "mabsplit").unwrap();
    mab.apply("budget", &budget).unwrap();

    let exact_doc = cmd_budget(&exact).unwrap();
    let mab_doc = cmd_budget(&mab).unwrap();
    let exact_trees = exact_doc.metrics["completed_trees"].mean;
    let mab_trees = mab_doc.metrics["completed_trees"].mean;
    assert!(
        mab_trees > exact_trees,
        "expected more trees under budget {budget}: mabsplit {mab_trees} vs exact {exact_trees}"
    );
    let exact_acc = exact_doc.metrics["test_accuracy"].mean;
    let mab_acc = mab_doc.metrics["test_accuracy"].mean;
    assert!(
        mab_acc >= exact_acc - 0.02,
        "budgeted accuracy fell too far: mabsplit {mab_acc} vs exact {exact_acc}"
    );
}

#[test]
fn crossover_grid_has_a_size_where_sampling_wins_for_good() {
    let cfg = synth_cfg(&[
        ("synth_n", "8000"),
        ("synth_features", "12"),
        ("synth_informative", "4"),
        ("synth_noise", "0.2"),
        ("trees", "2"),
        ("max_depth", "2"),
        ("bins", "8"),
        ("seeds", "2"),
        ("sizes", "100,400,2000,8000"),
    ]);
    let doc = cmd_crossover(&cfg).unwrap();
    assert_eq!(doc.rows.len(), 4);
    let last = doc.rows.last().unwrap();
    assert!(
        last.mabsplit_insertions < last.exact_insertions,
        "largest grid point should favor sampling: {last:?}"
    );
    let size = doc.crossover_size.expect("no size had sampling ahead to the end of the grid");
    for row in doc.rows.iter().filter(|r| r.size >= size) {
        assert!(row.mabsplit_insertions < row.exact_insertions);
    }
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_banditforest"));
    c.env_remove("BANDITFOREST_OUT_DIR");
    c
}

#[test]
fn generated_csv_trains_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    let gen = bin()
        .args(["gen-data", "--synth-n", "100", "--synth-features", "6"])
        .args(["--synth-informative", "2", "--out", csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(gen.status.success(), "gen-data failed: {}", String::from_utf8_lossy(&gen.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 101, "header + 100 rows");

    let train = bin()
        .args(["train", "--data", csv.to_str().unwrap(), "--label", "y"])
        .args(["--kind", "rf", "--solver", "exact", "--trees", "5"])
        .args(["--max-depth", "1", "--seeds", "5"])
        .output()
        .unwrap();
    assert!(train.status.success(), "train failed: {}", String::from_utf8_lossy(&train.stderr));
    let doc: ResultDocument = serde_json::from_slice(&train.stdout).unwrap();
    assert_eq!(doc.command, "train");
    assert_eq!(doc.seeds, vec![0, 1, 2, 3, 4]);
    assert_eq!(doc.metrics["test_accuracy"].per_seed.len(), 5);
    assert_eq!(doc.config["solver"], "exact");
}

#[test]
fn failures_exit_nonzero_with_one_error_line() {
    let out = bin().args(["train", "--trees", "0", "--synth-n", "50"]).output().unwrap();
    assert!(!out.status.success());
    assert!(out.stdout.is_empty());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "expected one diagnostic line, got: {stderr}");
    assert!(stderr.starts_with("error: "));

    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "tres = 5\n").unwrap();
    let out = bin()
        .args(["train", "--config", conf.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("unknown config key"), "stderr: {stderr}");
}

#[test]
fn relative_outputs_land_in_the_configured_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["gen-data", "--synth-n", "30", "--synth-features", "3"])
        .args(["--synth-informative", "1", "--out", "nested.csv"])
        .env("BANDITFOREST_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("nested.csv").exists());
}

#[test]
fn budgets_echo_verbatim_in_the_document() {
    let out = bin()
        .args(["budget", "--budget", "10192000", "--synth-n", "300"])
        .args(["--synth-features", "5", "--synth-informative", "2", "--trees", "2", "--seeds", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: ResultDocument = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc.config["budget"], "10192000");
    assert_eq!(doc.command, "budget");
}

#[test]
fn generator_rejects_more_informative_than_total_features() {
    let out = bin()
        .args(["gen-data", "--synth-n", "50", "--synth-features", "4"])
        .args(["--synth-informative", "9", "--out", "ignored.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.starts_with("error: "), "stderr: {stderr}");
}
