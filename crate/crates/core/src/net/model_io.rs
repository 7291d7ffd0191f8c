//! `.sld` model files.
//!
//! A text header of `key=value` lines, opened by the magic line and closed by
//! `end`, followed by the parameters as little-endian `f32` in declaration
//! order:
//!
//! ```text
//! cpdag-model v1
//! p=5
//! filters=32
//! dense_units=100
//! pool=2
//! dropout_rate=0.2
//! epochs=150
//! batch_size=256
//! learning_rate=0.001
//! seed=7
//! corpus_hash=<hex sha256 of the corpus manifest, or "none">
//! param_count=54593
//! end
//! <param_count * 4 bytes>
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::{Hyperparameters, NetworkParameters};
use crate::error::{Error, Result};

const MAGIC: &str = "cpdag-model v1";

/// Provenance stored alongside the weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelMeta {
    pub seed: u64,
    pub corpus_hash: Option<String>,
}

fn header(params: &NetworkParameters, meta: &ModelMeta) -> String {
    let h = &params.hyper;
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC}");
    let _ = writeln!(s, "p={}", h.p);
    let _ = writeln!(s, "filters={}", h.filters);
    let _ = writeln!(s, "dense_units={}", h.dense_units);
    let _ = writeln!(s, "pool={}", h.pool);
    let _ = writeln!(s, "dropout_rate={}", h.dropout_rate);
    let _ = writeln!(s, "epochs={}", h.epochs);
    let _ = writeln!(s, "batch_size={}", h.batch_size);
    let _ = writeln!(s, "learning_rate={}", h.learning_rate);
    let _ = writeln!(s, "seed={}", meta.seed);
    let _ = writeln!(
        s,
        "corpus_hash={}",
        meta.corpus_hash.as_deref().unwrap_or("none")
    );
    let _ = writeln!(s, "param_count={}", params.values.len());
    let _ = writeln!(s, "end");
    s
}

pub fn encode_model(params: &NetworkParameters, meta: &ModelMeta) -> Result<Vec<u8>> {
    params.validate()?;
    let mut bytes = header(params, meta).into_bytes();
    bytes.reserve(params.values.len() * 4);
    for &v in &params.values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    Ok(bytes)
}

pub fn decode_model(bytes: &[u8]) -> Result<(NetworkParameters, ModelMeta)> {
    let bad = |m: String| Error::parse("model", m);
    let mut fields = BTreeMap::new();
    let mut pos = 0;
    let mut first = true;
    loop {
        let rest = &bytes[pos..];
        let len = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("truncated header".into()))?;
        let line = std::str::from_utf8(&rest[..len]).map_err(|e| bad(e.to_string()))?;
        pos += len + 1;
        if first {
            if line != MAGIC {
                return Err(bad(format!("bad magic line {line:?}")));
            }
            first = false;
            continue;
        }
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        fields.insert(k.to_string(), v.to_string());
    }

    fn field<T: FromStr>(fields: &BTreeMap<String, String>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = fields
            .get(key)
            .ok_or_else(|| Error::parse("model", format!("missing header key {key}")))?;
        raw.parse()
            .map_err(|e| Error::parse("model", format!("{key}: {e}")))
    }

    let hyper = Hyperparameters {
        p: field(&fields, "p")?,
        filters: field(&fields, "filters")?,
        dense_units: field(&fields, "dense_units")?,
        pool: field(&fields, "pool")?,
        dropout_rate: field(&fields, "dropout_rate")?,
        epochs: field(&fields, "epochs")?,
        batch_size: field(&fields, "batch_size")?,
        learning_rate: field(&fields, "learning_rate")?,
    };
    hyper.validate()?;
    let count: usize = field(&fields, "param_count")?;
    if count != hyper.parameter_count() {
        return Err(Error::SizeMismatch {
            expected: hyper.parameter_count(),
            found: count,
        });
    }
    let body = &bytes[pos..];
    if body.len() != count * 4 {
        return Err(bad(format!(
            "expected {} bytes of weights, found {}",
            count * 4,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let hash: String = field(&fields, "corpus_hash")?;
    let meta = ModelMeta {
        seed: field(&fields, "seed")?,
        corpus_hash: (hash != "none").then_some(hash),
    };
    let params = NetworkParameters { hyper, values };
    params.validate()?;
    Ok((params, meta))
}

pub fn save_model(path: &Path, params: &NetworkParameters, meta: &ModelMeta) -> Result<()> {
    let bytes = encode_model(params, meta)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(NetworkParameters, ModelMeta)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
