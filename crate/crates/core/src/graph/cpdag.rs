use super::{apply_meek_rules, skeleton, v_structures, PdagMatrix};
use crate::error::{Error, Result};

/// The CPDAG of the Markov equivalence class of `dag`.
///
/// Keeps the skeleton, orients the v-structures as in `dag`, then closes
/// under the Meek rules.
pub fn dag_to_cpdag(dag: &PdagMatrix) -> Result<PdagMatrix> {
    dag.require_dag()?;
    Ok(cpdag_from_pattern_of(dag))
}

/// Pattern (skeleton plus v-structures) closed under Meek rules, without the DAG check.
pub(crate) fn cpdag_from_pattern_of(g: &PdagMatrix) -> PdagMatrix {
    let mut pattern = skeleton(g);
    for v in v_structures(g) {
        pattern.set_directed(v.parents.0, v.collider);
        pattern.set_directed(v.parents.1, v.collider);
    }
    apply_meek_rules(&pattern)
}

/// Same skeleton and same v-structures.
pub fn markov_equivalent(d1: &PdagMatrix, d2: &PdagMatrix) -> Result<bool> {
    d1.require_dag()?;
    d2.require_dag()?;
    if d1.p() != d2.p() {
        return Err(Error::SizeMismatch {
            expected: d1.p(),
            found: d2.p(),
        });
    }
    Ok(skeleton(d1) == skeleton(d2) && v_structures(d1) == v_structures(d2))
}

/// A DAG extending `g` without new v-structures, if one exists.
///
/// Dor-Tarsi sink peeling: repeatedly pick the lowest-index remaining node
/// that has no outgoing directed edge and whose undirected neighbours are
/// adjacent to all of its other neighbours, orient its undirected edges into
/// it, and remove it.
pub fn consistent_extension(g: &PdagMatrix) -> Option<PdagMatrix> {
    let p = g.p();
    let mut out = g.clone();
    let mut alive = vec![true; p];

    for _ in 0..p {
        let sink = (0..p).find(|&x| alive[x] && is_peelable(g, &alive, x))?;
        for (y, &live) in alive.iter().enumerate() {
            if live && g.is_undirected(sink, y) {
                out.set_directed(y, sink);
            }
        }
        alive[sink] = false;
    }
    Some(out)
}

fn is_peelable(g: &PdagMatrix, alive: &[bool], x: usize) -> bool {
    let p = g.p();
    if (0..p).any(|y| alive[y] && g.is_directed(x, y)) {
        return false;
    }
    let neighbors: Vec<usize> = (0..p)
        .filter(|&y| alive[y] && y != x && g.adjacent(x, y))
        .collect();
    neighbors
        .iter()
        .filter(|&&y| g.is_undirected(x, y))
        .all(|&y| neighbors.iter().all(|&z| z == y || g.adjacent(y, z)))
}

/// True iff `g` is exactly the CPDAG of some DAG.
pub fn is_proper_cpdag(g: &PdagMatrix) -> bool {
    match consistent_extension(g) {
        Some(dag) => cpdag_from_pattern_of(&dag) == *g,
        None => false,
    }
}
