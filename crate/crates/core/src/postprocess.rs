//! Turning edge-mark probabilities into adjacency matrices.

use crate::error::{Error, Result};
use crate::graph::{apply_meek_rules, is_proper_cpdag, skeleton, v_structures, PdagMatrix};
use crate::net::ProbabilityMatrix;

/// The τ grid swept by the benchmark.
pub const DEFAULT_TAUS: [f64; 7] = [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5];

/// A cutoff in the open interval (0, 1).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Threshold(tau))
        } else {
            Err(Error::InvalidArgument(format!(
                "threshold {tau} outside (0, 1)"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostProcess {
    Cutoff,
    Bpco,
}

impl PostProcess {
    pub fn apply(self, o: &ProbabilityMatrix, tau: Threshold) -> PdagMatrix {
        match self {
            PostProcess::Cutoff => cutoff(o, tau),
            PostProcess::Bpco => bpco(o, tau),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PostProcess::Cutoff => "cutoff",
            PostProcess::Bpco => "bpco",
        }
    }
}

impl std::str::FromStr for PostProcess {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cutoff" => Ok(PostProcess::Cutoff),
            "bpco" => Ok(PostProcess::Bpco),
            other => Err(Error::InvalidArgument(format!(
                "unknown post-processing {other:?} (expected cutoff or bpco)"
            ))),
        }
    }
}

/// `m[i][j] = 1` iff `o[i][j] > tau`; the diagonal is always 0.
pub fn cutoff(o: &ProbabilityMatrix, tau: Threshold) -> PdagMatrix {
    let p = o.p();
    let mut m = PdagMatrix::empty(p);
    for i in 0..p {
        for j in 0..p {
            if i != j && o.get(i, j) > tau.value() {
                m.set(i, j, 1);
            }
        }
    }
    m
}

/// Keeps the skeleton; edges in a v-structure keep their arrowheads, all others become undirected.
pub fn strip_to_pattern(g: &PdagMatrix) -> PdagMatrix {
    let mut out = skeleton(g);
    for v in v_structures(g) {
        out.set_directed(v.parents.0, v.collider);
        out.set_directed(v.parents.1, v.collider);
    }
    out
}

/// Backwards PC-orientation.
///
/// Starting from the cutoff matrix, repeatedly zero the remaining nonzero
/// cell with the smallest probability (row-major order breaks ties) until
/// either the matrix itself, or its pattern closed under the Meek rules, is a
/// proper CPDAG.
pub fn bpco(o: &ProbabilityMatrix, tau: Threshold) -> PdagMatrix {
    let p = o.p();
    let mut m = cutoff(o, tau);
    if is_proper_cpdag(&m) {
        return m;
    }
    loop {
        let mut lowest: Option<(usize, usize)> = None;
        for i in 0..p {
            for j in 0..p {
                if m.get(i, j) == 1 && lowest.is_none_or(|(a, b)| o.get(i, j) < o.get(a, b)) {
                    lowest = Some((i, j));
                }
            }
        }
        let Some((i, j)) = lowest else {
            // unreachable: the empty graph is proper
            return m;
        };
        m.set(i, j, 0);
        if is_proper_cpdag(&m) {
            return m;
        }
        let completed = apply_meek_rules(&strip_to_pattern(&m));
        if is_proper_cpdag(&completed) {
            return completed;
        }
    }
}
