use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cpdag_core::graph::{is_proper_cpdag, read_adjacency_csv};
use cpdag_core::net::load_model;
use cpdag_core::PdagMatrix;

fn cpdag(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cpdag"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = cpdag(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_identity(path: &Path, p: usize) {
    let rows: Vec<String> = (0..p)
        .map(|i| {
            (0..p)
                .map(|j| if i == j { "1" } else { "0" })
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    fs::write(path, rows.join("\n") + "\n").unwrap();
}

#[test]
fn simulate_writes_count_pairs_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate", "--p", "5", "--n", "50", "--count", "10", "--seed", "4", "--out", "a",
        ],
    );
    ok(
        d,
        &[
            "simulate",
            "--p",
            "5",
            "--n",
            "50",
            "--count",
            "10",
            "--seed",
            "4",
            "--out",
            "b",
            "--workers",
            "3",
        ],
    );
    let manifest = fs::read_to_string(d.join("a/manifest.txt")).unwrap();
    assert!(manifest.contains("count=10\n"));
    for f in ["manifest.txt", "shard-00000.corpus"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap()
        );
    }
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("sim.cfg"), "p=4\nn=40\ncount=6\nseed=2\n").unwrap();
    ok(
        d,
        &[
            "simulate", "--config", "sim.cfg", "--count", "3", "--out", "c",
        ],
    );
    let manifest = fs::read_to_string(d.join("c/manifest.txt")).unwrap();
    assert!(manifest.contains("p=4\n") && manifest.contains("count=3\n"));
    fs::write(d.join("bad.cfg"), "colour=blue\n").unwrap();
    let out = cpdag(d, &["simulate", "--config", "bad.cfg", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_discover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "simulate", "--p", "4", "--n", "200", "--count", "40", "--seed", "1", "--out", "corp",
        ],
    );
    ok(
        d,
        &[
            "simulate", "--p", "4", "--n", "200", "--count", "40", "--seed", "2", "--out", "other",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--corpus",
            "corp",
            "--model",
            "m.sld",
            "--epochs",
            "2",
            "--batch-size",
            "16",
        ],
    );
    let log = fs::read_to_string(d.join("m.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2);
    assert!(log.starts_with("epoch,mean_loss,wall_seconds\n0,"));
    let (params, meta) = load_model(&d.join("m.sld")).unwrap();
    assert_eq!(params.values.len(), params.hyper.parameter_count());
    assert_eq!(meta.corpus_hash.unwrap().len(), 64);

    let out = cpdag(
        d,
        &["train", "--corpus", "corp", "--model", "x.sld", "--p", "5"],
    );
    assert_eq!(out.status.code(), Some(2));

    write_identity(&d.join("i.cor.csv"), 4);
    for tau in ["0.01", "0.5", "0.99"] {
        ok(
            d,
            &[
                "discover",
                "--model",
                "m.sld",
                "--input",
                "i.cor.csv",
                "--tau",
                tau,
                "--out",
                "g.adj.csv",
                "--expect-corpus",
                "corp",
            ],
        );
        let g = read_adjacency_csv(&d.join("g.adj.csv")).unwrap();
        assert!(is_proper_cpdag(&g));
        assert!(d.join("g.prob.csv").exists());
    }
    let first = fs::read(d.join("g.adj.csv")).unwrap();
    ok(
        d,
        &[
            "discover",
            "--model",
            "m.sld",
            "--input",
            "i.cor.csv",
            "--tau",
            "0.99",
            "--out",
            "g.adj.csv",
        ],
    );
    assert_eq!(fs::read(d.join("g.adj.csv")).unwrap(), first);

    // cutoff at 0.99 keeps no more marks than at 0.5
    ok(
        d,
        &[
            "discover",
            "--model",
            "m.sld",
            "--input",
            "i.cor.csv",
            "--tau",
            "0.99",
            "--method",
            "cutoff",
            "--out",
            "hi.adj.csv",
        ],
    );
    ok(
        d,
        &[
            "discover",
            "--model",
            "m.sld",
            "--input",
            "i.cor.csv",
            "--tau",
            "0.5",
            "--method",
            "cutoff",
            "--out",
            "mid.adj.csv",
        ],
    );
    let hi = read_adjacency_csv(&d.join("hi.adj.csv")).unwrap();
    let mid = read_adjacency_csv(&d.join("mid.adj.csv")).unwrap();
    assert!(hi.edge_count() <= mid.edge_count());

    let out = cpdag(
        d,
        &[
            "discover",
            "--model",
            "m.sld",
            "--input",
            "i.cor.csv",
            "--tau",
            "0.5",
            "--out",
            "g.adj.csv",
            "--expect-corpus",
            "other",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trained on corpus"));

    write_identity(&d.join("five.cor.csv"), 5);
    let out = cpdag(
        d,
        &[
            "discover",
            "--model",
            "m.sld",
            "--input",
            "five.cor.csv",
            "--tau",
            "0.5",
            "--out",
            "g.adj.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pc_on_identity_and_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_identity(&d.join("i.cor.csv"), 4);
    ok(
        d,
        &[
            "pc",
            "--input",
            "i.cor.csv",
            "--n",
            "100",
            "--out",
            "e.adj.csv",
        ],
    );
    assert_eq!(
        read_adjacency_csv(&d.join("e.adj.csv")).unwrap(),
        PdagMatrix::empty(4)
    );
    let sepsets = fs::read_to_string(d.join("e.sepsets.txt")).unwrap();
    assert_eq!(sepsets.lines().count(), 6);

    fs::write(d.join("bad.cor.csv"), "1,0.5\n0.4,1\n").unwrap();
    let out = cpdag(
        d,
        &[
            "pc",
            "--input",
            "bad.cor.csv",
            "--n",
            "100",
            "--out",
            "b.adj.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    let out = cpdag(
        d,
        &[
            "pc",
            "--input",
            "i.cor.csv",
            "--n",
            "100",
            "--alpha",
            "2",
            "--out",
            "b.adj.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn evaluate_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("t.adj.csv"), "0,1,0\n0,0,0\n0,1,0\n").unwrap();
    fs::write(d.join("e.adj.csv"), "0,1,0\n1,0,1\n0,1,0\n").unwrap();
    let out = cpdag(
        d,
        &[
            "evaluate",
            "--est",
            "e.adj.csv",
            "--truth",
            "t.adj.csv",
            "--out",
            "r.csv",
        ],
    );
    assert!(out.status.success());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("Adj NPV"));
    let csv = fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(csv.starts_with("instance,"));

    assert_eq!(
        cpdag(d, &["evaluate", "--est", "e.adj.csv"]).status.code(),
        Some(1)
    );
    assert_eq!(cpdag(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(cpdag(d, &["--help"]).status.code(), Some(0));
    let help = cpdag(d, &["benchmark", "--help"]);
    assert!(String::from_utf8_lossy(&help.stdout).contains("proper_fraction"));
}

#[test]
fn benchmark_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("bench.cfg"),
        "p=3\nn=100\ntau=0.2,0.4\nalpha=0.05\nb_train=32\nb_test=16\nepochs=1\nbatch_size=16\ndense_units=8\nfilters=4\n",
    )
    .unwrap();
    ok(d, &["benchmark", "--config", "bench.cfg", "--out", "r.csv"]);
    let text = fs::read_to_string(d.join("r.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("method,p,n,postprocess,setting,stratum"));
    let rows: Vec<&str> = lines.collect();
    assert!(!rows.is_empty());
    for row in rows.iter().filter(|r| r.starts_with("network,3,100,bpco,")) {
        assert!(row.ends_with(",1"), "{row}");
    }
}
