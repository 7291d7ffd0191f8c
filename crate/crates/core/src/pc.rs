//! The PC algorithm with Fisher-z partial-correlation tests or a d-separation oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::{apply_meek_rules, d_separated, PdagMatrix};
use crate::sim::Matrix;

/// The α grid swept by the benchmark.
pub const DEFAULT_ALPHAS: [f64; 9] = [1e-8, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.5, 0.8];

/// A conditional independence test.
#[derive(Clone, Copy, Debug)]
pub enum CiTest<'a> {
    /// Fisher-z test of vanishing partial correlation.
    FisherZ {
        corr: &'a Matrix,
        n: usize,
        alpha: f64,
    },
    /// Exact answers read off a known DAG by d-separation.
    Oracle(&'a PdagMatrix),
}

impl CiTest<'_> {
    pub fn independent(&self, i: usize, j: usize, s: &[usize]) -> Result<bool> {
        match *self {
            CiTest::FisherZ { corr, n, alpha } => fisher_z_independent(corr, n, i, j, s, alpha),
            CiTest::Oracle(dag) => d_separated(dag, i, j, s),
        }
    }
}

/// Separating sets recorded when the skeleton search removed an edge.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SepsetTable(BTreeMap<(usize, usize), Vec<usize>>);

impl SepsetTable {
    fn key(i: usize, j: usize) -> (usize, usize) {
        if i < j {
            (i, j)
        } else {
            (j, i)
        }
    }

    pub fn insert(&mut self, i: usize, j: usize, s: Vec<usize>) {
        self.0.insert(Self::key(i, j), s);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.0.get(&Self::key(i, j)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize), &Vec<usize>)> {
        self.0.iter()
    }

    /// One line per removed pair, 1-based: `1 3: 2 5` (empty set prints nothing after the colon).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&(i, j), s) in &self.0 {
            let set: Vec<String> = s.iter().map(|k| (k + 1).to_string()).collect();
            let _ = writeln!(out, "{} {}: {}", i + 1, j + 1, set.join(" "));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PcResult {
    pub graph: PdagMatrix,
    pub sepsets: SepsetTable,
    /// Collider orientations that overwrote an opposite orientation.
    pub conflicts: usize,
}

/// Partial correlation of `i` and `j` given `s`, from the inverse of the
/// correlation submatrix over `[i, j, s...]`.
pub fn partial_correlation(c: &Matrix, i: usize, j: usize, s: &[usize]) -> Result<f64> {
    let p = c.nrows();
    if i >= p || j >= p || s.iter().any(|&k| k >= p) {
        return Err(Error::InvalidArgument("node index out of range".into()));
    }
    if s.is_empty() {
        return Ok(c[(i, j)]);
    }
    let idx: Vec<usize> = [i, j].iter().chain(s).copied().collect();
    let k = idx.len();
    let sub = Matrix::from_fn(k, k, |a, b| c[(idx[a], idx[b])]);
    let singular = || Error::SingularConditioningSet { set: s.to_vec() };
    let precision = sub.cholesky().ok_or_else(singular)?.inverse();
    let r = -precision[(0, 1)] / (precision[(0, 0)] * precision[(1, 1)]).sqrt();
    if !r.is_finite() {
        return Err(singular());
    }
    Ok(r.clamp(-1.0, 1.0))
}

/// Fisher-z test: independent iff `sqrt(n - |s| - 3) * |atanh(r)| <= z_{1 - alpha/2}`.
pub fn fisher_z_independent(
    c: &Matrix,
    n: usize,
    i: usize,
    j: usize,
    s: &[usize],
    alpha: f64,
) -> Result<bool> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} outside (0, 1)"
        )));
    }
    if n < s.len() + 4 {
        return Err(Error::InvalidArgument(format!(
            "n = {n} too small for a conditioning set of size {}",
            s.len()
        )));
    }
    let r = partial_correlation(c, i, j, s)?;
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let stat = ((n - s.len() - 3) as f64).sqrt() * z.abs();
    Ok(stat <= critical_value(alpha))
}

fn critical_value(alpha: f64) -> f64 {
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Lexicographic `k`-subsets of `items`.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(
        items: &[usize],
        k: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in start..items.len() {
            if items.len() - x < k - cur.len() {
                break;
            }
            cur.push(items[x]);
            rec(items, k, x + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut current, &mut out);
    out
}

/// Skeleton search: start complete, remove an edge on the first independence
/// found among subsets of size 0, 1, 2, ... of `adj(i) \ {j}`, then `adj(j) \ {i}`.
pub fn pc_skeleton(test: &CiTest<'_>, p: usize) -> Result<(PdagMatrix, SepsetTable)> {
    let mut g = PdagMatrix::complete_undirected(p);
    let mut sepsets = SepsetTable::default();
    let mut level = 0;
    loop {
        let mut testable = false;
        for i in 0..p {
            for j in (i + 1)..p {
                if !g.adjacent(i, j) {
                    continue;
                }
                let adj_i: Vec<usize> = g.neighbors(i).into_iter().filter(|&k| k != j).collect();
                let adj_j: Vec<usize> = g.neighbors(j).into_iter().filter(|&k| k != i).collect();
                if adj_i.len() < level && adj_j.len() < level {
                    continue;
                }
                testable = true;
                let mut tried = BTreeSet::new();
                'search: for base in [&adj_i, &adj_j] {
                    if base.len() < level {
                        continue;
                    }
                    for s in combinations(base, level) {
                        if !tried.insert(s.clone()) {
                            continue;
                        }
                        if test.independent(i, j, &s)? {
                            g.remove_edge(i, j);
                            sepsets.insert(i, j, s);
                            break 'search;
                        }
                    }
                }
            }
        }
        if !testable {
            break;
        }
        level += 1;
    }
    Ok((g, sepsets))
}

/// Full PC: skeleton, collider orientation from separating sets, Meek closure.
pub fn pc(test: &CiTest<'_>, p: usize) -> Result<PcResult> {
    let (skeleton, sepsets) = pc_skeleton(test, p)?;
    let mut g = skeleton.clone();
    let mut conflicts = 0;
    for i in 0..p {
        for j in (i + 1)..p {
            if skeleton.adjacent(i, j) {
                continue;
            }
            let sep = sepsets.get(i, j).unwrap_or(&[]);
            for k in 0..p {
                if k == i || k == j || !skeleton.adjacent(i, k) || !skeleton.adjacent(j, k) {
                    continue;
                }
                if sep.contains(&k) {
                    continue;
                }
                for a in [i, j] {
                    if g.is_directed(k, a) {
                        conflicts += 1;
                    }
                    g.set_directed(a, k);
                }
            }
        }
    }
    Ok(PcResult {
        graph: apply_meek_rules(&g),
        sepsets,
        conflicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{m1, m2};
    use crate::graph::{dag_to_cpdag, skeleton};
    use crate::sim::{analytic_correlation, SemModel};

    fn chain_sem() -> SemModel {
        let dag = PdagMatrix::from_directed_edges(3, &[(0, 1), (1, 2)]);
        let mut beta = Matrix::zeros(3, 3);
        beta[(0, 1)] = 0.8;
        beta[(1, 2)] = -1.2;
        SemModel {
            dag,
            beta,
            sigma: vec![1.0, 0.7, 1.3],
        }
    }

    #[test]
    fn identity_correlation_is_independent() {
        let c = Matrix::identity(4, 4);
        for alpha in DEFAULT_ALPHAS {
            assert!(fisher_z_independent(&c, 100, 0, 3, &[], alpha).unwrap());
            assert!(fisher_z_independent(&c, 100, 0, 3, &[1, 2], alpha).unwrap());
        }
    }

    #[test]
    fn strong_correlation_is_dependent() {
        // atanh(0.9) = 1.4722, sqrt(97) * 1.4722 = 14.5 > 1.96
        let mut c = Matrix::identity(2, 2);
        c[(0, 1)] = 0.9;
        c[(1, 0)] = 0.9;
        assert!(!fisher_z_independent(&c, 100, 0, 1, &[], 0.05).unwrap());
        // a weak correlation at small n is not detected: sqrt(17) * atanh(0.1) = 0.414
        c[(0, 1)] = 0.1;
        c[(1, 0)] = 0.1;
        assert!(fisher_z_independent(&c, 20, 0, 1, &[], 0.05).unwrap());
    }

    #[test]
    fn chain_middle_node_separates() {
        let c = analytic_correlation(&chain_sem());
        assert!(partial_correlation(&c, 0, 2, &[1]).unwrap().abs() < 1e-12);
        assert!(fisher_z_independent(&c, 1_000_000, 0, 2, &[1], 0.05).unwrap());
        assert!(!fisher_z_independent(&c, 1_000_000, 0, 2, &[], 0.05).unwrap());
    }

    #[test]
    fn fisher_z_is_symmetric_and_order_invariant() {
        let c = analytic_correlation(&{
            let mut sem = chain_sem();
            sem.dag = PdagMatrix::from_directed_edges(3, &[(0, 1), (1, 2), (0, 2)]);
            sem.beta[(0, 2)] = 0.3;
            sem
        });
        let c4 = Matrix::from_fn(4, 4, |a, b| {
            if a < 3 && b < 3 {
                c[(a, b)]
            } else if a == b {
                1.0
            } else {
                0.2
            }
        });
        let r1 = partial_correlation(&c4, 0, 2, &[1, 3]).unwrap();
        let r2 = partial_correlation(&c4, 2, 0, &[3, 1]).unwrap();
        assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn test_errors() {
        let c = Matrix::identity(3, 3);
        assert!(fisher_z_independent(&c, 4, 0, 1, &[2], 0.05).is_err());
        assert!(fisher_z_independent(&c, 100, 0, 1, &[], 1.5).is_err());
        let mut sing = Matrix::identity(4, 4);
        for (a, b) in [(2, 3), (3, 2)] {
            sing[(a, b)] = 1.0;
        }
        match partial_correlation(&sing, 0, 1, &[2, 3]) {
            Err(Error::SingularConditioningSet { set }) => assert_eq!(set, vec![2, 3]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn alpha_monotonicity() {
        let mut c = Matrix::identity(2, 2);
        for r in [0.01, 0.05, 0.1, 0.2, 0.3] {
            c[(0, 1)] = r;
            c[(1, 0)] = r;
            let mut previous = true;
            // alphas increasing: once dependent, stays dependent
            for alpha in DEFAULT_ALPHAS {
                let ind = fisher_z_independent(&c, 100, 0, 1, &[], alpha).unwrap();
                assert!(previous || !ind);
                previous = ind;
            }
        }
    }

    #[test]
    fn oracle_pc_recovers_example() {
        let truth = m1();
        let (skel, sepsets) = pc_skeleton(&CiTest::Oracle(&truth), 5).unwrap();
        assert_eq!(skel, skeleton(&m2()));
        for (&(i, j), _) in sepsets.iter() {
            assert!(!skel.adjacent(i, j));
        }
        assert_eq!(sepsets.len(), 4);
        let sep13 = sepsets.get(0, 2).unwrap();
        assert!(!sep13.contains(&1));
        let out = pc(&CiTest::Oracle(&truth), 5).unwrap();
        assert_eq!(out.graph, m2());
        assert_eq!(out.graph, dag_to_cpdag(&truth).unwrap());
        assert_eq!(out.conflicts, 0);
    }

    #[test]
    fn identity_gives_empty_graph() {
        let c = Matrix::identity(5, 5);
        let test = CiTest::FisherZ {
            corr: &c,
            n: 100,
            alpha: 0.05,
        };
        let (skel, sepsets) = pc_skeleton(&test, 5).unwrap();
        assert_eq!(skel, PdagMatrix::empty(5));
        assert_eq!(sepsets.len(), 10);
        assert!(sepsets.iter().all(|(_, s)| s.is_empty()));
        assert_eq!(pc(&test, 5).unwrap().graph, PdagMatrix::empty(5));
    }

    #[test]
    fn complete_dependence_keeps_every_edge() {
        // equicorrelated 0.99: every partial correlation stays far from zero
        let c = Matrix::from_fn(4, 4, |a, b| if a == b { 1.0 } else { 0.99 });
        let test = CiTest::FisherZ {
            corr: &c,
            n: 100_000,
            alpha: 0.05,
        };
        let (skel, sepsets) = pc_skeleton(&test, 4).unwrap();
        assert_eq!(skel, PdagMatrix::complete_undirected(4));
        assert!(sepsets.is_empty());
    }

    #[test]
    fn sepset_text_is_one_based() {
        let mut t = SepsetTable::default();
        t.insert(2, 0, vec![1, 4]);
        t.insert(1, 3, vec![]);
        assert_eq!(t.to_text(), "1 3: 2 5\n2 4: \n");
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(&[1, 3, 4], 2),
            vec![vec![1, 3], vec![1, 4], vec![3, 4]]
        );
        assert_eq!(combinations(&[1, 3], 0), vec![Vec::<usize>::new()]);
        assert!(combinations(&[1], 2).is_empty());
    }
}
