#![allow(dead_code)]

use cpdag_core::sim::sample_dag;
use cpdag_core::PdagMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

/// Every DAG on `p` labelled nodes.
pub fn all_dags(p: usize) -> Vec<PdagMatrix> {
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (i + 1..p).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    let total = 3usize.pow(pairs.len() as u32);
    for mut code in 0..total {
        let mut g = PdagMatrix::empty(p);
        for &(i, j) in &pairs {
            match code % 3 {
                1 => g.set_directed(i, j),
                2 => g.set_directed(j, i),
                _ => {}
            }
            code /= 3;
        }
        if g.is_dag() {
            out.push(g);
        }
    }
    out
}

/// Random DAG with a random causal order.
pub fn random_dag<R: Rng>(p: usize, rng: &mut R) -> PdagMatrix {
    let dag = sample_dag(p, rng).unwrap();
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(rng);
    dag.permuted(&perm).unwrap()
}

pub fn descendants(dag: &PdagMatrix, v: usize) -> Vec<bool> {
    let mut seen = vec![false; dag.p()];
    let mut stack = vec![v];
    seen[v] = true;
    while let Some(x) = stack.pop() {
        for c in dag.children(x) {
            if !seen[c] {
                seen[c] = true;
                stack.push(c);
            }
        }
    }
    seen
}

/// d-separation by enumerating every simple path of the skeleton.
pub fn d_separated_by_paths(dag: &PdagMatrix, i: usize, j: usize, s: &[usize]) -> bool {
    let p = dag.p();
    let in_s: Vec<bool> = (0..p).map(|v| s.contains(&v)).collect();
    let desc: Vec<Vec<bool>> = (0..p).map(|v| descendants(dag, v)).collect();
    let opens = |path: &[usize]| {
        path.windows(3).all(|w| {
            let (a, v, b) = (w[0], w[1], w[2]);
            let collider = dag.is_directed(a, v) && dag.is_directed(b, v);
            if collider {
                (0..p).any(|d| desc[v][d] && in_s[d])
            } else {
                !in_s[v]
            }
        })
    };
    fn walk(
        dag: &PdagMatrix,
        path: &mut Vec<usize>,
        target: usize,
        opens: &dyn Fn(&[usize]) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == target {
            return opens(path);
        }
        for next in dag.neighbors(last) {
            if path.contains(&next) {
                continue;
            }
            path.push(next);
            let found = walk(dag, path, target, opens);
            path.pop();
            if found {
                return true;
            }
        }
        false
    }
    !walk(dag, &mut vec![i], j, &opens)
}

/// All subsets of `items`.
pub fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    (0..1usize << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(k, _)| mask >> k & 1 == 1)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

/// The full d-separation relation as a bit vector over (i < j, S).
pub fn dsep_signature(dag: &PdagMatrix) -> Vec<bool> {
    let p = dag.p();
    let mut out = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            let rest: Vec<usize> = (0..p).filter(|&v| v != i && v != j).collect();
            for s in subsets(&rest) {
                out.push(cpdag_core::graph::d_separated(dag, i, j, &s).unwrap());
            }
        }
    }
    out
}

/// Edges `x -> y` with `pa(y) = pa(x) + {x}`.
pub fn covered_edges(dag: &PdagMatrix) -> Vec<(usize, usize)> {
    let p = dag.p();
    let mut out = Vec::new();
    for x in 0..p {
        for y in dag.children(x) {
            let mut want = dag.parents(x);
            want.push(x);
            want.sort_unstable();
            if dag.parents(y) == want {
                out.push((x, y));
            }
        }
    }
    out
}
