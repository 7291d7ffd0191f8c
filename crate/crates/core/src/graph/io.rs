//! Headerless CSV of 0/1 integers (`.adj.csv`); row `i` holds the incoming marks of `X_{i+1}`.

use std::fs;
use std::path::Path;

use super::PdagMatrix;
use crate::error::{Error, Result};

pub fn write_adjacency_csv(path: &Path, g: &PdagMatrix) -> Result<()> {
    fs::write(path, to_csv(g)).map_err(|e| Error::io(path, e))
}

pub fn read_adjacency_csv(path: &Path) -> Result<PdagMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path.display().to_string(), message),
        other => other,
    })
}

pub(crate) fn to_csv(g: &PdagMatrix) -> String {
    let mut out = String::with_capacity(g.p() * g.p() * 2);
    for row in g.as_flat().chunks(g.p().max(1)) {
        let cells: Vec<&str> = row
            .iter()
            .map(|&v| if v == 1 { "1" } else { "0" })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub(crate) fn parse_csv(text: &str) -> Result<PdagMatrix> {
    let mut rows: Vec<Vec<u8>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| match cell.trim() {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::parse(
                    "adjacency csv",
                    format!("line {}: expected 0 or 1, found {other:?}", lineno + 1),
                )),
            })
            .collect::<Result<Vec<u8>>>()?;
        rows.push(row);
    }
    PdagMatrix::from_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::m2;
    use super::*;

    #[test]
    fn csv_round_trip() {
        let text = to_csv(&m2());
        assert_eq!(text.lines().next().unwrap(), "0,0,0,1,1");
        assert_eq!(parse_csv(&text).unwrap(), m2());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m2.adj.csv");
        write_adjacency_csv(&path, &m2()).unwrap();
        assert_eq!(read_adjacency_csv(&path).unwrap(), m2());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_csv("0,2\n0,0\n").is_err());
        assert!(parse_csv("0,1,0\n1,0\n").is_err());
    }
}
