use std::path::Path;
use std::process::{Command, Output};

fn cgnn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgnn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("run cgnn")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = cgnn(args, cwd);
    assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn feasibility_prints_tabulated_bound() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ok(&["feasibility", "--d", "38", "--r", "0.1"], dir.path()).trim(), "322.000");
    assert_eq!(ok(&["feasibility", "--d", "11", "--r", "0.7"], dir.path()).trim(), "1.857");
    let out = ok(&["feasibility", "--d", "10", "--n", "100", "--sizes", "10,10,10,10,10,10,10,10,10,10", "--phi", "9"], dir.path());
    assert!(out.contains("phi_second_bound 9.000000") && out.contains("holds=true"), "{out}");
}

#[test]
fn feasibility_grid_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &["feasibility", "--d", "10", "--phi", "5", "--grid-n", "100,1000", "--grid-r", "0.1,0.9", "--grid-out", "grid.csv"],
        dir.path(),
    );
    let text = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("n,r,feasible"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = cgnn(&["feasibility", "--d", "3", "--r", "0"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let out = cgnn(&["infer", "--graph", "missing.json", "--checkpoint", "c.json", "--out", "p.csv"], dir.path());
    assert!(!out.status.success());
    let out = cgnn(&["train", "--graph", "missing.json", "--task", "node_reg", "--setup", "gc_to_gs_train", "--out-dir", "o"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn extra_augmented_subgraph_inference_matches_full() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--kind", "sbm", "--blocks", "30,30", "--p-in", "0.2", "--dim", "4", "--out", "g.json"], d);
    ok(&["coarsen", "--graph", "g.json", "--ratio", "0.2", "--out-dir", "o"], d);
    ok(&["train", "--graph", "g.json", "--partition", "o/partition.txt", "--epochs", "10", "--layers", "1", "--hidden", "8", "--out-dir", "o"], d);
    ok(&["infer", "--graph", "g.json", "--checkpoint", "o/checkpoint.json", "--mode", "full", "--out", "full.csv"], d);
    ok(
        &["infer", "--graph", "g.json", "--checkpoint", "o/checkpoint.json", "--partition", "o/partition.txt", "--augment", "extra", "--out", "sub.csv"],
        d,
    );
    let read = |f: &str| -> Vec<f64> {
        std::fs::read_to_string(d.join(f))
            .unwrap()
            .split([',', '\n'])
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().unwrap())
            .collect()
    };
    let (a, b) = (read("full.csv"), read("sub.csv"));
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn full_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let start = std::time::Instant::now();
    ok(&["synth", "--kind", "sbm", "--blocks", "100,100", "--dim", "8", "--seed", "3", "--out", "g.json"], d);
    ok(&["partition", "--graph", "g.json", "--ratio", "0.1", "--out-dir", "o"], d);
    let aug = ok(&["augment", "--graph", "g.json", "--partition", "o/partition.txt", "--augment", "cluster", "--out-dir", "o"], d);
    assert!(aug.contains("phi_max="));
    ok(
        &["train", "--graph", "g.json", "--partition", "o/partition.txt", "--augment", "cluster", "--epochs", "50", "--hidden", "16", "--out-dir", "o"],
        d,
    );
    ok(
        &["bench", "--graph", "g.json", "--checkpoint", "o/checkpoint.json", "--partition", "o/partition.txt", "--augment", "cluster", "--out-dir", "o"],
        d,
    );
    let csv = std::fs::read_to_string(d.join("o/bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(d.join("o/bench.json").exists());
    let single = ok(
        &["infer", "--graph", "g.json", "--checkpoint", "o/checkpoint.json", "--partition", "o/partition.txt", "--augment", "cluster", "--mode", "single_node", "--node", "17", "--out", "one.csv"],
        d,
    );
    assert!(single.contains("1 prediction rows"));
    assert!(start.elapsed().as_secs() < 60);
}

#[test]
fn report_and_graph_task_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("exp.toml"),
        "task = \"node_class\"\nsetup = \"gc_to_gs_train\"\nratio = 0.3\naugment = \"extra\"\nepochs = 10\nhidden = 8\ntrials = 2\n",
    )
    .unwrap();
    ok(&["synth", "--kind", "sbm", "--blocks", "20,20", "--p-in", "0.3", "--dim", "4", "--out", "g.json"], d);
    let out = ok(&["report", "--graph", "g.json", "--config", "exp.toml", "--out-dir", "r"], d);
    assert!(out.contains("accuracy over 2 kept of 2 trials"), "{out}");
    assert!(d.join("r/report.csv").exists() && d.join("r/report.json").exists());

    ok(&["synth", "--kind", "triangles", "--graphs", "20", "--n", "8", "--out", "ds.json"], d);
    ok(
        &["train", "--dataset", "ds.json", "--task", "graph_class", "--setup", "gc_to_gc_infer", "--epochs", "5", "--hidden", "8", "--out-dir", "m"],
        d,
    );
    ok(
        &["infer", "--dataset", "ds.json", "--task", "graph_class", "--setup", "gc_to_gc_infer", "--checkpoint", "m/checkpoint.json", "--out", "p.csv"],
        d,
    );
    assert_eq!(std::fs::read_to_string(d.join("p.csv")).unwrap().lines().count(), 20);
    ok(
        &["bench", "--dataset", "ds.json", "--task", "graph_class", "--setup", "gc_to_gc_infer", "--checkpoint", "m/checkpoint.json", "--samples", "10", "--out-dir", "b"],
        d,
    );
}
