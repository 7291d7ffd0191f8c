use super::PdagMatrix;
use crate::error::{Error, Result};

/// Decides whether `s` d-separates `i` and `j` in `dag`.
///
/// Uses the moralised ancestral graph: restrict to ancestors of `{i, j} ∪ s`,
/// marry co-parents, drop directions, delete `s`, and test connectivity.
pub fn d_separated(dag: &PdagMatrix, i: usize, j: usize, s: &[usize]) -> Result<bool> {
    dag.require_dag()?;
    let p = dag.p();
    if i >= p || j >= p || s.iter().any(|&k| k >= p) {
        return Err(Error::InvalidArgument("node index out of range".into()));
    }
    if i == j {
        return Err(Error::InvalidArgument("i and j must differ".into()));
    }
    if s.contains(&i) || s.contains(&j) {
        return Err(Error::InvalidArgument(
            "conditioning set must not contain i or j".into(),
        ));
    }

    let mut relevant = vec![false; p];
    let mut stack: Vec<usize> = vec![i, j];
    stack.extend_from_slice(s);
    while let Some(v) = stack.pop() {
        if relevant[v] {
            continue;
        }
        relevant[v] = true;
        stack.extend(dag.parents(v));
    }

    let mut moral = vec![false; p * p];
    for v in (0..p).filter(|&v| relevant[v]) {
        let parents = dag.parents(v);
        for &a in &parents {
            moral[a * p + v] = true;
            moral[v * p + a] = true;
        }
        for (x, &a) in parents.iter().enumerate() {
            for &b in &parents[x + 1..] {
                moral[a * p + b] = true;
                moral[b * p + a] = true;
            }
        }
    }

    let mut blocked = vec![false; p];
    for &k in s {
        blocked[k] = true;
    }
    let mut seen = vec![false; p];
    let mut stack = vec![i];
    seen[i] = true;
    while let Some(v) = stack.pop() {
        if v == j {
            return Ok(false);
        }
        for w in 0..p {
            if moral[v * p + w] && relevant[w] && !blocked[w] && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    Ok(true)
}
