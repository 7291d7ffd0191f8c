//! Training corpora: generation, the `.corpus` shard format and the manifest.
//!
//! A corpus directory holds `manifest.txt` plus shards `shard-00000.corpus`,
//! `shard-00001.corpus`, ... Each shard is
//!
//! ```text
//! magic  "CPDC"          4 bytes
//! version u32 LE         currently 1
//! p       u32 LE
//! count   u32 LE         items in this shard
//! count x {
//!     feature  p*p f32 LE, row-major correlation matrix
//!     label    p*p u8,     row-major CPDAG adjacency matrix
//!     perm     p   u8,     new node a = original node perm[a]
//! }
//! ```
//!
//! The manifest is flat `key=value` text: `format`, `p`, `n`, `count`,
//! `seed`, `shard_size`, `shards` (comma separated file names).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    correlation_matrix, permute_pair, sample_dag, sample_sem, simulate_data, Matrix, TrainingPair,
};
use crate::error::{Error, Result};
use crate::graph::{dag_to_cpdag, PdagMatrix};
use crate::seed::derive_seed;

const SHARD_MAGIC: &[u8; 4] = b"CPDC";
const SHARD_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const DEFAULT_SHARD_SIZE: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusManifest {
    pub p: usize,
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub shard_size: usize,
    pub shards: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub pairs: Vec<TrainingPair>,
}

impl CorpusManifest {
    pub fn new(p: usize, n: usize, count: usize, seed: u64, shard_size: usize) -> Self {
        let shard_size = shard_size.max(1);
        let shards = (0..count.div_ceil(shard_size))
            .map(|k| format!("shard-{k:05}.corpus"))
            .collect();
        CorpusManifest {
            p,
            n,
            count,
            seed,
            shard_size,
            shards,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format=cpdag-corpus-v{SHARD_VERSION}");
        let _ = writeln!(s, "p={}", self.p);
        let _ = writeln!(s, "n={}", self.n);
        let _ = writeln!(s, "count={}", self.count);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "shard_size={}", self.shard_size);
        let _ = writeln!(s, "shards={}", self.shards.join(","));
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = None;
        let mut n = None;
        let mut count = None;
        let mut seed = None;
        let mut shard_size = None;
        let mut shards = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("manifest", format!("malformed line {line:?}")))?;
            let num = |v: &str| {
                v.parse::<u64>()
                    .map_err(|e| Error::parse("manifest", format!("{key}: {e}")))
            };
            match key {
                "format" => {
                    if value != format!("cpdag-corpus-v{SHARD_VERSION}") {
                        return Err(Error::parse("manifest", format!("unknown format {value}")));
                    }
                }
                "p" => p = Some(num(value)? as usize),
                "n" => n = Some(num(value)? as usize),
                "count" => count = Some(num(value)? as usize),
                "seed" => seed = Some(num(value)?),
                "shard_size" => shard_size = Some(num(value)? as usize),
                "shards" => {
                    shards = Some(
                        value
                            .split(',')
                            .filter(|s| !s.is_empty())
                            .map(str::to_string)
                            .collect(),
                    )
                }
                _ => {}
            }
        }
        let missing = |k: &str| Error::parse("manifest", format!("missing key {k}"));
        Ok(CorpusManifest {
            p: p.ok_or_else(|| missing("p"))?,
            n: n.ok_or_else(|| missing("n"))?,
            count: count.ok_or_else(|| missing("count"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            shard_size: shard_size.ok_or_else(|| missing("shard_size"))?,
            shards: shards.ok_or_else(|| missing("shards"))?,
        })
    }
}

/// Generates corpus item `k`: DAG, SEM, data, correlation, CPDAG and a fresh permutation,
/// all from the sub-seed `derive_seed(seed, k)`.
pub fn generate_item(p: usize, n: usize, seed: u64, k: u64) -> Result<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, k));
    let dag = sample_dag(p, &mut rng)?;
    let sem = sample_sem(&dag, &mut rng)?;
    let data = simulate_data(&sem, n, &mut rng)?;
    let corr = correlation_matrix(&data)?;
    let cpdag = dag_to_cpdag(&dag)?;
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut rng);
    let mut pair = permute_pair(&corr, &cpdag, &perm)?;
    // stored features are f32; round here so in-memory and on-disk corpora agree
    pair.feature.apply(|v| *v = *v as f32 as f64);
    Ok(pair)
}

/// Generates `count` pairs. Output does not depend on `workers`.
pub fn generate_corpus(
    p: usize,
    n: usize,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<Corpus> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be >= 1".into()));
    }
    if p > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds 255")));
    }
    let run = || -> Result<Vec<TrainingPair>> {
        (0..count as u64)
            .into_par_iter()
            .map(|k| generate_item(p, n, seed, k))
            .collect()
    };
    let pairs = if workers <= 1 {
        (0..count as u64)
            .map(|k| generate_item(p, n, seed, k))
            .collect::<Result<Vec<_>>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?
    };
    Ok(Corpus {
        manifest: CorpusManifest::new(p, n, count, seed, DEFAULT_SHARD_SIZE),
        pairs,
    })
}

/// Writes the manifest and shards into `dir`, creating it if needed.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let m = &corpus.manifest;
    if m.count != corpus.pairs.len() {
        return Err(Error::SizeMismatch {
            expected: m.count,
            found: corpus.pairs.len(),
        });
    }
    for (shard, chunk) in m.shards.iter().zip(corpus.pairs.chunks(m.shard_size)) {
        let path = dir.join(shard);
        fs::write(&path, encode_shard(m.p, chunk)?).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, m.to_text()).map_err(|e| Error::io(&path, e))
}

/// Reads a corpus written by [`write_corpus`].
pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = CorpusManifest::parse(&text)?;
    let mut pairs = Vec::with_capacity(manifest.count);
    for shard in &manifest.shards {
        let path = dir.join(shard);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        decode_shard(&bytes, manifest.p, &mut pairs)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    }
    if pairs.len() != manifest.count {
        return Err(Error::parse(
            dir.display().to_string(),
            format!(
                "manifest lists {} pairs, shards hold {}",
                manifest.count,
                pairs.len()
            ),
        ));
    }
    Ok(Corpus { manifest, pairs })
}

fn encode_shard(p: usize, pairs: &[TrainingPair]) -> Result<Vec<u8>> {
    let item = p * p * 4 + p * p + p;
    let mut out = Vec::with_capacity(16 + pairs.len() * item);
    out.extend_from_slice(SHARD_MAGIC);
    out.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(pairs.len() as u32).to_le_bytes());
    for pair in pairs {
        if pair.label.p() != p || pair.feature.nrows() != p {
            return Err(Error::SizeMismatch {
                expected: p,
                found: pair.label.p(),
            });
        }
        for a in 0..p {
            for b in 0..p {
                out.extend_from_slice(&(pair.feature[(a, b)] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(pair.label.as_flat());
        out.extend(pair.permutation.iter().map(|&v| v as u8));
    }
    Ok(out)
}

fn decode_shard(bytes: &[u8], p: usize, out: &mut Vec<TrainingPair>) -> Result<()> {
    let bad = |m: &str| Error::parse("shard", m.to_string());
    if bytes.len() < 16 || &bytes[0..4] != SHARD_MAGIC {
        return Err(bad("missing magic"));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    if word(4) != SHARD_VERSION as usize {
        return Err(bad("unsupported version"));
    }
    if word(8) != p {
        return Err(Error::SizeMismatch {
            expected: p,
            found: word(8),
        });
    }
    let count = word(12);
    let item = p * p * 4 + p * p + p;
    if bytes.len() != 16 + count * item {
        return Err(bad("truncated shard"));
    }
    for chunk in bytes[16..].chunks_exact(item) {
        let (feat, rest) = chunk.split_at(p * p * 4);
        let (label, perm) = rest.split_at(p * p);
        let values: Vec<f64> = feat
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        out.push(TrainingPair {
            feature: Matrix::from_row_slice(p, p, &values),
            label: PdagMatrix::from_flat(p, label.to_vec())?,
            permutation: perm.iter().map(|&v| v as usize).collect(),
        });
    }
    Ok(())
}

/// Writes a headerless, comma separated, full symmetric correlation matrix.
pub fn write_correlation_csv(path: &Path, c: &Matrix) -> Result<()> {
    let mut s = String::new();
    for a in 0..c.nrows() {
        let row: Vec<String> = (0..c.ncols()).map(|b| format!("{}", c[(a, b)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_correlation_csv(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ctx = path.display().to_string();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(ctx.clone(), format!("line {}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let p = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::SizeMismatch {
            expected: p,
            found: bad.len(),
        });
    }
    Ok(Matrix::from_fn(p, p, |a, b| rows[a][b]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_proper_cpdag;

    #[test]
    fn manifest_round_trip() {
        let m = CorpusManifest::new(5, 1000, 25_001, 42, 10_000);
        assert_eq!(m.shards.len(), 3);
        assert_eq!(CorpusManifest::parse(&m.to_text()).unwrap(), m);
        assert!(CorpusManifest::parse("p=5\n").is_err());
    }

    #[test]
    fn items_are_reproducible_and_proper() {
        let a = generate_item(5, 100, 3, 17).unwrap();
        let b = generate_item(5, 100, 3, 17).unwrap();
        assert_eq!(a, b);
        assert!(is_proper_cpdag(&a.label));
        assert_ne!(a, generate_item(5, 100, 3, 18).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let seq = generate_corpus(4, 50, 40, 9, 1).unwrap();
        let par = generate_corpus(4, 50, 40, 9, 3).unwrap();
        assert_eq!(seq, par);
        assert!(generate_corpus(4, 50, 0, 9, 1).is_err());
    }

    #[test]
    fn shards_round_trip() {
        let mut corpus = generate_corpus(5, 60, 7, 1, 1).unwrap();
        corpus.manifest = CorpusManifest::new(5, 60, 7, 1, 3);
        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &corpus).unwrap();
        assert!(dir.path().join("shard-00002.corpus").exists());
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back, corpus);
    }

    #[test]
    fn correlation_csv_round_trip() {
        let c = generate_item(4, 30, 5, 0).unwrap().feature;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.cor.csv");
        write_correlation_csv(&path, &c).unwrap();
        assert_eq!(read_correlation_csv(&path).unwrap(), c);
    }
}
