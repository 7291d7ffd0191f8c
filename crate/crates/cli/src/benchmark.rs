//! The simulate/train/evaluate sweep over (p, n) cells.
//!
//! Each cell draws its own training and test corpora and training seed from
//! the run seed, so a cell's rows do not depend on which other cells run or
//! on the worker count.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cpdag_core::metrics::{aggregate, evaluate, DegeneratePolicy, MetricsReport, Summary};
use cpdag_core::net::{train, Hyperparameters, NetworkParameters};
use cpdag_core::pc::{pc, CiTest, DEFAULT_ALPHAS};
use cpdag_core::postprocess::{PostProcess, Threshold, DEFAULT_TAUS};
use cpdag_core::seed::derive_seed_path;
use cpdag_core::sim::{generate_corpus, Corpus, Matrix};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

pub const COLUMNS: [&str; 14] = [
    "method",
    "p",
    "n",
    "postprocess",
    "setting",
    "stratum",
    "instances",
    "adj_f1",
    "adj_npv",
    "ori_g1",
    "ori_precision",
    "est_edges",
    "true_edges",
    "proper_fraction",
];

pub const HELP_COLUMNS: &str = "\
Output CSV columns (one row per method, p, n, setting and stratum):
  method           network | pc
  p, n             variables and observations per data set
  postprocess      cutoff | bpco for the network, - for pc
  setting          tau for the network, alpha for pc
  stratum          all, or q1..q4 quartiles of the true edge count
  instances        test graphs in the stratum
  adj_f1, adj_npv  adjacency F1 and negative predictive value
  ori_g1           orientation G1 (harmonic mean of NPV and specificity)
  ori_precision    orientation precision
  est_edges        mean estimated edge count
  true_edges       mean true edge count
  proper_fraction  share of estimates that are proper CPDAGs";

/// Sample sizes swept by default.
pub const DEFAULT_NS: [usize; 7] = [50, 100, 500, 1000, 5000, 10_000, 50_000];

const TRAIN_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;

/// Optional changes to the default network hyperparameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HyperOverrides {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub dense_units: Option<usize>,
    pub filters: Option<usize>,
    pub pool: Option<usize>,
    pub dropout: Option<f64>,
    pub learning_rate: Option<f64>,
}

impl HyperOverrides {
    pub fn apply(&self, p: usize) -> CliResult<Hyperparameters> {
        let mut h = Hyperparameters::new(p);
        if let Some(v) = self.epochs {
            h.epochs = v;
        }
        if let Some(v) = self.batch_size {
            h.batch_size = v;
        }
        if let Some(v) = self.dense_units {
            h.dense_units = v;
        }
        if let Some(v) = self.filters {
            h.filters = v;
        }
        if let Some(v) = self.pool {
            h.pool = v;
        }
        if let Some(v) = self.dropout {
            h.dropout_rate = v;
        }
        if let Some(v) = self.learning_rate {
            h.learning_rate = v;
        }
        h.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(h)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkConfig {
    pub ps: Vec<usize>,
    pub ns: Vec<usize>,
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub postprocess: Vec<PostProcess>,
    pub b_train: usize,
    pub b_test: usize,
    pub seed: u64,
    pub workers: usize,
    pub hyper: HyperOverrides,
}

impl Default for BenchmarkConfig {
    /// Desk scale: p = 5, 20000 training and 500 test pairs per cell.
    fn default() -> Self {
        BenchmarkConfig {
            ps: vec![5],
            ns: DEFAULT_NS.to_vec(),
            taus: DEFAULT_TAUS.to_vec(),
            alphas: DEFAULT_ALPHAS.to_vec(),
            postprocess: vec![PostProcess::Cutoff, PostProcess::Bpco],
            b_train: 20_000,
            b_test: 500,
            seed: 0,
            workers: 1,
            hyper: HyperOverrides::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.ps.is_empty() || self.ns.is_empty() {
            return bad("need at least one p and one n".into());
        }
        if self.b_train == 0 || self.b_test == 0 {
            return bad("b_train and b_test must be positive".into());
        }
        for &tau in &self.taus {
            Threshold::new(tau).map_err(|e| CliError::Usage(e.to_string()))?;
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        for &p in &self.ps {
            self.hyper.apply(p)?;
        }
        if let Some(n) = self.ns.iter().find(|&&n| n < 4) {
            return bad(format!("n = {n} is too small"));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.ps
            .iter()
            .flat_map(|&p| self.ns.iter().map(move |&n| (p, n)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub method: &'static str,
    pub p: usize,
    pub n: usize,
    pub postprocess: &'static str,
    pub setting: f64,
    pub summary: Summary,
}

impl BenchmarkRow {
    pub fn csv(&self) -> String {
        let s = &self.summary;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.p,
            self.n,
            self.postprocess,
            self.setting,
            s.stratum,
            s.instances,
            s.adjacency.f1,
            s.adjacency.npv,
            s.orientation.g1,
            s.orientation.precision,
            s.est_edges,
            s.true_edges,
            s.proper_fraction
        )
    }
}

/// Corpora and trained model of one cell.
pub struct CellModel {
    pub train: Corpus,
    pub test: Corpus,
    pub params: NetworkParameters,
}

pub fn cell_seed(seed: u64, p: usize, n: usize, stream: u64) -> u64 {
    derive_seed_path(seed, &[p as u64, n as u64, stream])
}

pub fn fit_cell(cfg: &BenchmarkConfig, p: usize, n: usize) -> CliResult<CellModel> {
    let hyper = cfg.hyper.apply(p)?;
    let train_set = generate_corpus(
        p,
        n,
        cfg.b_train,
        cell_seed(cfg.seed, p, n, TRAIN_STREAM),
        1,
    )?;
    let test_set = generate_corpus(p, n, cfg.b_test, cell_seed(cfg.seed, p, n, TEST_STREAM), 1)?;
    let (params, _) = train(
        &train_set.pairs,
        &hyper,
        cell_seed(cfg.seed, p, n, MODEL_STREAM),
    )?;
    Ok(CellModel {
        train: train_set,
        test: test_set,
        params,
    })
}

fn rows_for(
    method: &'static str,
    p: usize,
    n: usize,
    postprocess: &'static str,
    setting: f64,
    reports: &[MetricsReport],
) -> Vec<BenchmarkRow> {
    aggregate(reports, DegeneratePolicy::Include)
        .into_iter()
        .map(|summary| BenchmarkRow {
            method,
            p,
            n,
            postprocess,
            setting,
            summary,
        })
        .collect()
}

/// Scores a trained cell: every post-processor and tau, then PC at every alpha.
pub fn score_cell(cfg: &BenchmarkConfig, cell: &CellModel) -> CliResult<Vec<BenchmarkRow>> {
    let (p, n) = (cell.test.manifest.p, cell.test.manifest.n);
    let features: Vec<&Matrix> = cell.test.pairs.iter().map(|x| &x.feature).collect();
    let probs = cell.params.predict(&features)?;
    let mut rows = Vec::new();
    for &post in &cfg.postprocess {
        for &tau in &cfg.taus {
            let tau_t = Threshold::new(tau)?;
            let reports = probs
                .iter()
                .zip(&cell.test.pairs)
                .map(|(o, pair)| evaluate(&post.apply(o, tau_t), &pair.label))
                .collect::<Result<Vec<_>, _>>()?;
            rows.extend(rows_for("network", p, n, post.name(), tau, &reports));
        }
    }
    for &alpha in &cfg.alphas {
        let reports = cell
            .test
            .pairs
            .iter()
            .map(|pair| {
                let out = pc(
                    &CiTest::FisherZ {
                        corr: &pair.feature,
                        n,
                        alpha,
                    },
                    p,
                )?;
                evaluate(&out.graph, &pair.label)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.extend(rows_for("pc", p, n, "-", alpha, &reports));
    }
    Ok(rows)
}

pub fn run_cell(cfg: &BenchmarkConfig, p: usize, n: usize) -> CliResult<Vec<BenchmarkRow>> {
    score_cell(cfg, &fit_cell(cfg, p, n)?)
}

/// Runs every cell and writes the CSV. Returns the number of data rows.
pub fn run(cfg: &BenchmarkConfig, out: &Path) -> CliResult<usize> {
    cfg.validate()?;
    let file = File::create(out).map_err(|e| CliError::io(out, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(out, e);
    writeln!(w, "{}", COLUMNS.join(",")).map_err(io)?;
    w.flush().map_err(io)?;
    let cells = cfg.cells();
    let mut written = 0;
    let mut emit = |rows: Vec<BenchmarkRow>, w: &mut BufWriter<File>| -> CliResult<()> {
        for row in rows {
            writeln!(w, "{}", row.csv()).map_err(io)?;
            written += 1;
        }
        w.flush().map_err(io)
    };
    if cfg.workers <= 1 {
        for (p, n) in cells {
            emit(run_cell(cfg, p, n)?, &mut w)?;
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {} workers: {e}", cfg.workers)))?;
        let results: Vec<CliResult<Vec<BenchmarkRow>>> = pool.install(|| {
            cells
                .par_iter()
                .map(|&(p, n)| run_cell(cfg, p, n))
                .collect()
        });
        for rows in results {
            emit(rows?, &mut w)?;
        }
    }
    Ok(written)
}
