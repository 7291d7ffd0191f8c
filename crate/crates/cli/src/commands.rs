use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cpdag_core::graph::{read_adjacency_csv, write_adjacency_csv};
use cpdag_core::metrics::{
    aggregate, evaluate as score, summary_table, DegeneratePolicy, INSTANCE_CSV_HEADER,
    SUMMARY_CSV_HEADER,
};
use cpdag_core::net::{load_model, save_model, train_with, ModelMeta};
use cpdag_core::pc::{pc as run_pc, CiTest};
use cpdag_core::postprocess::Threshold;
use cpdag_core::sim::{
    generate_corpus, read_corpus, read_correlation_csv, validate_correlation, write_corpus,
    write_correlation_csv, Matrix, MANIFEST_FILE,
};
use sha2::{Digest, Sha256};

use crate::benchmark::{self, BenchmarkConfig, HyperOverrides};
use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::{
    BenchmarkArgs, DiscoverArgs, EvaluateArgs, HyperArgs, PcArgs, SimulateArgs, TrainArgs,
};

const HYPER_KEYS: [&str; 7] = [
    "epochs",
    "batch_size",
    "dense_units",
    "filters",
    "pool",
    "dropout",
    "learning_rate",
];

/// Tolerance for symmetry and unit diagonal of input correlation matrices.
const CORRELATION_TOL: f64 = 1e-6;

/// Hex SHA-256 of a corpus manifest.
pub fn corpus_hash(dir: &Path) -> CliResult<String> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `dir/stem.adj.csv` -> `dir/stem<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let name = out.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let stem = name
        .strip_suffix(".adj.csv")
        .or_else(|| name.strip_suffix(".csv"))
        .unwrap_or(name);
    out.with_file_name(format!("{stem}{suffix}"))
}

fn hyper_overrides(args: &HyperArgs, cfg: &Config) -> CliResult<HyperOverrides> {
    Ok(HyperOverrides {
        epochs: cfg.pick_opt(args.epochs, "epochs")?,
        batch_size: cfg.pick_opt(args.batch_size, "batch_size")?,
        dense_units: cfg.pick_opt(args.dense_units, "dense_units")?,
        filters: cfg.pick_opt(args.filters, "filters")?,
        pool: cfg.pick_opt(args.pool, "pool")?,
        dropout: cfg.pick_opt(args.dropout, "dropout")?,
        learning_rate: cfg.pick_opt(args.learning_rate, "learning_rate")?,
    })
}

fn read_input_correlation(path: &Path) -> CliResult<Matrix> {
    let c = read_correlation_csv(path)?;
    validate_correlation(&c, CORRELATION_TOL)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(c)
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let cfg = Config::load(args.config.as_deref())?;
    cfg.check_keys(&["p", "n", "count", "seed", "workers", "shard_size"])?;
    let p = cfg.pick(args.p, "p", 5)?;
    let n = cfg.pick(args.n, "n", 1000)?;
    let count = cfg.pick(args.count, "count", 20_000)?;
    let seed = cfg.pick(args.seed, "seed", 0)?;
    let workers = cfg.pick(args.workers, "workers", 1)?;
    let shard_size = cfg.pick_opt(args.shard_size, "shard_size")?;
    let mut corpus = generate_corpus(p, n, count, seed, workers)?;
    if let Some(size) = shard_size {
        if size == 0 {
            return Err(CliError::Usage("shard_size must be positive".into()));
        }
        corpus.manifest = cpdag_core::sim::CorpusManifest::new(p, n, count, seed, size);
    }
    write_corpus(&args.out, &corpus)?;
    println!(
        "wrote {count} pairs (p = {p}, n = {n}) to {} in {} shard(s)",
        args.out.display(),
        corpus.manifest.shards.len()
    );
    Ok(())
}

pub fn train(args: &TrainArgs) -> CliResult<()> {
    let cfg = Config::load(args.config.as_deref())?;
    let mut keys = vec!["seed", "p"];
    keys.extend(HYPER_KEYS);
    cfg.check_keys(&keys)?;
    let seed = cfg.pick(args.seed, "seed", 0)?;
    let corpus = read_corpus(&args.corpus)?;
    let p = corpus.manifest.p;
    if let Some(expected) = cfg.pick_opt(args.p, "p")? {
        if expected != p {
            return Err(CliError::Data(format!(
                "corpus has p = {p}, expected {expected}"
            )));
        }
    }
    let hyper = hyper_overrides(&args.hyper, &cfg)?.apply(p)?;
    let hash = corpus_hash(&args.corpus)?;

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.model.with_extension("log.csv"));
    let file = File::create(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    let mut log = BufWriter::new(file);
    let mut log_error = None;
    let mut write_row = |text: String| {
        if log_error.is_none() {
            if let Err(e) = writeln!(log, "{text}").and_then(|_| log.flush()) {
                log_error = Some(e);
            }
        }
    };
    write_row("epoch,mean_loss,wall_seconds".into());
    let params = train_with(&corpus.pairs, &hyper, seed, |row| {
        write_row(format!(
            "{},{},{:.3}",
            row.epoch, row.mean_loss, row.wall_seconds
        ));
    })?;
    if let Some(e) = log_error {
        return Err(CliError::io(&log_path, e));
    }
    let meta = ModelMeta {
        seed,
        corpus_hash: Some(hash),
    };
    save_model(&args.model, &params, &meta)?;
    println!(
        "trained {} parameters for {} epochs on {} pairs; model {}, log {}",
        params.values.len(),
        hyper.epochs,
        corpus.pairs.len(),
        args.model.display(),
        log_path.display()
    );
    Ok(())
}

pub fn discover(args: &DiscoverArgs) -> CliResult<()> {
    let tau = Threshold::new(args.tau).map_err(|e| CliError::Usage(e.to_string()))?;
    let (params, meta) = load_model(&args.model)?;
    if let Some(dir) = &args.expect_corpus {
        let want = corpus_hash(dir)?;
        match &meta.corpus_hash {
            Some(have) if *have == want => {}
            have => {
                return Err(CliError::Data(format!(
                    "model was trained on corpus {}, but {} has hash {want}",
                    have.as_deref().unwrap_or("<unrecorded>"),
                    dir.display()
                )))
            }
        }
    }
    let c = read_input_correlation(&args.input)?;
    if c.nrows() != params.hyper.p {
        return Err(CliError::Data(format!(
            "input has {} variables, model expects {}",
            c.nrows(),
            params.hyper.p
        )));
    }
    let o = params.predict(&[&c])?.remove(0);
    let g = args.method.apply(&o, tau);
    write_adjacency_csv(&args.out, &g)?;
    let p = o.p();
    let prob_path = args
        .probabilities
        .clone()
        .unwrap_or_else(|| sibling(&args.out, ".prob.csv"));
    write_correlation_csv(&prob_path, &Matrix::from_fn(p, p, |i, j| o.get(i, j)))?;
    println!("{g}");
    Ok(())
}

pub fn pc(args: &PcArgs) -> CliResult<()> {
    let c = read_input_correlation(&args.input)?;
    let test = CiTest::FisherZ {
        corr: &c,
        n: args.n,
        alpha: args.alpha,
    };
    let out = run_pc(&test, c.nrows()).map_err(|e| match e {
        cpdag_core::Error::InvalidArgument(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    write_adjacency_csv(&args.out, &out.graph)?;
    let sep_path = args
        .sepsets
        .clone()
        .unwrap_or_else(|| sibling(&args.out, ".sepsets.txt"));
    fs::write(&sep_path, out.sepsets.to_text()).map_err(|e| CliError::io(&sep_path, e))?;
    if out.conflicts > 0 {
        eprintln!(
            "warning: {} conflicting collider orientation(s)",
            out.conflicts
        );
    }
    println!("{}", out.graph);
    Ok(())
}

pub fn evaluate(args: &EvaluateArgs) -> CliResult<()> {
    if args.estimates.len() != args.truths.len() {
        return Err(CliError::Usage(format!(
            "{} --est files but {} --truth files",
            args.estimates.len(),
            args.truths.len()
        )));
    }
    let mut reports = Vec::new();
    for (e, t) in args.estimates.iter().zip(&args.truths) {
        reports.push(score(&read_adjacency_csv(e)?, &read_adjacency_csv(t)?)?);
    }
    let policy = if args.exclude_degenerate {
        DegeneratePolicy::Exclude
    } else {
        DegeneratePolicy::Include
    };
    let summary = aggregate(&reports, policy);
    if let Some(out) = &args.out {
        let mut s = String::new();
        s.push_str(INSTANCE_CSV_HEADER);
        s.push('\n');
        for (k, r) in reports.iter().enumerate() {
            s.push_str(&r.csv_row(&k.to_string()));
            s.push('\n');
        }
        s.push('\n');
        s.push_str(SUMMARY_CSV_HEADER);
        s.push('\n');
        for row in &summary {
            s.push_str(&row.csv_row());
            s.push('\n');
        }
        fs::write(out, s).map_err(|e| CliError::io(out, e))?;
    }
    print!("{}", summary_table(&summary));
    Ok(())
}

pub fn benchmark_config(args: &BenchmarkArgs) -> CliResult<BenchmarkConfig> {
    let cfg = Config::load(args.config.as_deref())?;
    let mut keys = vec![
        "p",
        "n",
        "tau",
        "alpha",
        "postprocess",
        "b_train",
        "b_test",
        "seed",
        "workers",
    ];
    keys.extend(HYPER_KEYS);
    cfg.check_keys(&keys)?;
    let d = BenchmarkConfig::default();
    Ok(BenchmarkConfig {
        ps: cfg.pick_list(&args.p, "p", &d.ps)?,
        ns: cfg.pick_list(&args.n, "n", &d.ns)?,
        taus: cfg.pick_list(&args.tau, "tau", &d.taus)?,
        alphas: cfg.pick_list(&args.alpha, "alpha", &d.alphas)?,
        postprocess: cfg.pick_list(&args.postprocess, "postprocess", &d.postprocess)?,
        b_train: cfg.pick(args.b_train, "b_train", d.b_train)?,
        b_test: cfg.pick(args.b_test, "b_test", d.b_test)?,
        seed: cfg.pick(args.seed, "seed", d.seed)?,
        workers: cfg.pick(args.workers, "workers", d.workers)?,
        hyper: hyper_overrides(&args.hyper, &cfg)?,
    })
}

pub fn benchmark(args: &BenchmarkArgs) -> CliResult<()> {
    let cfg = benchmark_config(args)?;
    let rows = benchmark::run(&cfg, &args.out)?;
    println!(
        "wrote {rows} rows for {} cell(s) to {}",
        cfg.cells().len(),
        args.out.display()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sibling_paths() {
        assert_eq!(
            sibling(Path::new("a/x.adj.csv"), ".prob.csv"),
            Path::new("a/x.prob.csv")
        );
        assert_eq!(
            sibling(Path::new("x.csv"), ".sepsets.txt"),
            Path::new("x.sepsets.txt")
        );
        assert_eq!(
            sibling(Path::new("x"), ".prob.csv"),
            Path::new("x.prob.csv")
        );
    }
}
