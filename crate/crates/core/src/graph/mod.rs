//! Adjacency-matrix graphs: DAGs, CPDAGs and pseudo-adjacency matrices.
//!
//! A [`PdagMatrix`] stores a `p x p` 0/1 matrix where `m[i][j] = 1` marks an
//! edge from `X_j` into `X_i`. Reading both cells of a pair gives the edge:
//!
//! | `m[i][j]` | `m[j][i]` | edge            |
//! |-----------|-----------|-----------------|
//! | 0         | 1         | `X_i -> X_j`    |
//! | 1         | 0         | `X_i <- X_j`    |
//! | 1         | 1         | `X_i -- X_j`    |
//! | 0         | 0         | not adjacent    |
//!
//! Indices are 0-based in code and 1-based in file formats and display.

mod cpdag;
mod dsep;
mod io;
mod meek;

pub use cpdag::{consistent_extension, dag_to_cpdag, is_proper_cpdag, markov_equivalent};
pub use dsep::d_separated;
pub use io::{read_adjacency_csv, write_adjacency_csv};
pub use meek::apply_meek_rules;

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PdagMatrix {
    p: usize,
    m: Vec<u8>,
}

/// An unshielded collider `a -> collider <- b` with `a` and `b` non-adjacent.
///
/// `parents` is stored sorted, so the derived ordering is canonical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VStructure {
    pub collider: usize,
    pub parents: (usize, usize),
}

impl VStructure {
    pub fn new(collider: usize, a: usize, b: usize) -> Self {
        let parents = if a < b { (a, b) } else { (b, a) };
        VStructure { collider, parents }
    }
}

impl PdagMatrix {
    /// Graph on `p` nodes with no edges.
    pub fn empty(p: usize) -> Self {
        PdagMatrix {
            p,
            m: vec![0; p * p],
        }
    }

    /// Complete undirected graph on `p` nodes.
    pub fn complete_undirected(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in 0..p {
                if i != j {
                    g.m[i * p + j] = 1;
                }
            }
        }
        g
    }

    /// Builds a matrix from row-major rows; entries must be 0 or 1 with a zero diagonal.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let p = rows.len();
        let mut m = Vec::with_capacity(p * p);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != p {
                return Err(Error::SizeMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({}, {}) is {v}, expected 0 or 1",
                        i + 1,
                        j + 1
                    )));
                }
                if i == j && v != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "self-loop on node {}",
                        i + 1
                    )));
                }
                m.push(v);
            }
        }
        Ok(PdagMatrix { p, m })
    }

    /// Builds a matrix from a flat row-major buffer.
    pub fn from_flat(p: usize, m: Vec<u8>) -> Result<Self> {
        if m.len() != p * p {
            return Err(Error::SizeMismatch {
                expected: p * p,
                found: m.len(),
            });
        }
        let rows: Vec<&[u8]> = m.chunks(p.max(1)).collect();
        if p == 0 {
            return Ok(PdagMatrix { p, m });
        }
        Self::from_rows(&rows)
    }

    /// Builds a graph from directed edges `(from, to)`.
    pub fn from_directed_edges(p: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(p);
        for &(a, b) in edges {
            g.set_directed(a, b);
        }
        g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Raw cell `m[i][j]`.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.m[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u8) {
        debug_assert!(v <= 1);
        if i != j {
            self.m[i * self.p + j] = v;
        }
    }

    /// Row-major cells.
    pub fn as_flat(&self) -> &[u8] {
        &self.m
    }

    #[inline]
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.get(a, b) == 1 || self.get(b, a) == 1
    }

    /// True iff `a -> b`.
    #[inline]
    pub fn is_directed(&self, a: usize, b: usize) -> bool {
        self.get(b, a) == 1 && self.get(a, b) == 0
    }

    #[inline]
    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.get(a, b) == 1 && self.get(b, a) == 1
    }

    /// True iff there is an arrowhead at `at` on the edge to `other`.
    #[inline]
    pub fn arrowhead_at(&self, at: usize, other: usize) -> bool {
        self.is_directed(other, at)
    }

    /// Replaces whatever joins `a` and `b` by `a -> b`.
    pub fn set_directed(&mut self, a: usize, b: usize) {
        self.set(b, a, 1);
        self.set(a, b, 0);
    }

    pub fn set_undirected(&mut self, a: usize, b: usize) {
        self.set(a, b, 1);
        self.set(b, a, 1);
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.set(a, b, 0);
        self.set(b, a, 0);
    }

    /// Nodes `j` with `j -> i`.
    pub fn parents(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_directed(j, i)).collect()
    }

    /// Nodes `j` with `i -> j`.
    pub fn children(&self, i: usize) -> Vec<usize> {
        (0..self.p).filter(|&j| self.is_directed(i, j)).collect()
    }

    /// Nodes adjacent to `i` by any edge.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.p)
            .filter(|&j| j != i && self.adjacent(i, j))
            .collect()
    }

    /// Number of unordered adjacent pairs.
    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                if self.adjacent(i, j) {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn has_undirected_edge(&self) -> bool {
        (0..self.p).any(|i| ((i + 1)..self.p).any(|j| self.is_undirected(i, j)))
    }

    /// True iff the directed part contains a cycle.
    pub fn has_directed_cycle(&self) -> bool {
        self.topological_order().is_none()
    }

    /// Topological order of the directed part (Kahn's algorithm, lowest index first),
    /// or `None` if it is cyclic. Undirected edges are ignored.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p;
        let mut indegree: Vec<usize> = (0..p).map(|i| self.parents(i).len()).collect();
        let mut done = vec![false; p];
        let mut order = Vec::with_capacity(p);
        for _ in 0..p {
            let next = (0..p).find(|&i| !done[i] && indegree[i] == 0)?;
            done[next] = true;
            order.push(next);
            for c in self.children(next) {
                indegree[c] -= 1;
            }
        }
        Some(order)
    }

    /// True iff every edge is directed and the graph is acyclic.
    pub fn is_dag(&self) -> bool {
        !self.has_undirected_edge() && !self.has_directed_cycle()
    }

    pub(crate) fn require_dag(&self) -> Result<()> {
        if self.is_dag() {
            Ok(())
        } else {
            Err(Error::NotADag)
        }
    }

    /// Relabels nodes so that new node `a` is old node `perm[a]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.p)?;
        let mut out = Self::empty(self.p);
        for a in 0..self.p {
            for b in 0..self.p {
                out.m[a * self.p + b] = self.get(perm[a], perm[b]);
            }
        }
        Ok(out)
    }

    /// True iff every edge of `self` is also an edge of `other`, ignoring marks.
    pub fn skeleton_subset_of(&self, other: &PdagMatrix) -> bool {
        self.p == other.p
            && (0..self.p)
                .all(|i| ((i + 1)..self.p).all(|j| !self.adjacent(i, j) || other.adjacent(i, j)))
    }
}

pub(crate) fn check_permutation(perm: &[usize], p: usize) -> Result<()> {
    if perm.len() != p {
        return Err(Error::SizeMismatch {
            expected: p,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; p];
    for &v in perm {
        if v >= p || seen[v] {
            return Err(Error::InvalidArgument(format!(
                "{perm:?} is not a permutation of 0..{p}"
            )));
        }
        seen[v] = true;
    }
    Ok(())
}

impl fmt::Debug for PdagMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PdagMatrix(p={})", self.p)?;
        for row in self.m.chunks(self.p.max(1)) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "  {}", line.join(" "))?;
        }
        Ok(())
    }
}

impl fmt::Display for PdagMatrix {
    /// Edge list with 1-based node names, e.g. `X1 -> X2, X1 -- X4`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for i in 0..self.p {
            for j in (i + 1)..self.p {
                let (a, b) = (i + 1, j + 1);
                if self.is_undirected(i, j) {
                    parts.push(format!("X{a} -- X{b}"));
                } else if self.is_directed(i, j) {
                    parts.push(format!("X{a} -> X{b}"));
                } else if self.is_directed(j, i) {
                    parts.push(format!("X{a} <- X{b}"));
                }
            }
        }
        if parts.is_empty() {
            write!(f, "(no edges)")
        } else {
            write!(f, "{}", parts.join(", "))
        }
    }
}

/// Undirected graph with an edge wherever `g` has any edge.
pub fn skeleton(g: &PdagMatrix) -> PdagMatrix {
    let mut out = PdagMatrix::empty(g.p);
    for i in 0..g.p {
        for j in (i + 1)..g.p {
            if g.adjacent(i, j) {
                out.set_undirected(i, j);
            }
        }
    }
    out
}

/// All unshielded colliders `a -> c <- b`, sorted by collider then parents.
pub fn v_structures(g: &PdagMatrix) -> Vec<VStructure> {
    let mut out = Vec::new();
    for c in 0..g.p {
        let parents = g.parents(c);
        for (x, &a) in parents.iter().enumerate() {
            for &b in &parents[x + 1..] {
                if !g.adjacent(a, b) {
                    out.push(VStructure::new(c, a, b));
                }
            }
        }
    }
    out
}
