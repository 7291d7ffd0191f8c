use super::PdagMatrix;

type Rule = fn(&PdagMatrix, usize, usize) -> bool;

/// Closes `g` under Meek's orientation rules R1-R4.
///
/// Rules are scanned in order, and within a rule undirected edges are
/// visited lowest index first; every firing orients one undirected edge in
/// place. The loop stops at the first full pass with no change. Adjacencies
/// and existing orientations are never touched.
pub fn apply_meek_rules(g: &PdagMatrix) -> PdagMatrix {
    const RULES: [Rule; 4] = [rule1, rule2, rule3, rule4];
    let mut g = g.clone();
    let p = g.p();
    loop {
        let mut changed = false;
        for rule in RULES {
            for a in 0..p {
                for b in 0..p {
                    if a != b && g.is_undirected(a, b) && rule(&g, a, b) {
                        g.set_directed(a, b);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return g;
        }
    }
}

/// R1: `c -> a -- b` with `c`, `b` non-adjacent forces `a -> b`.
fn rule1(g: &PdagMatrix, a: usize, b: usize) -> bool {
    (0..g.p()).any(|c| c != b && g.is_directed(c, a) && !g.adjacent(c, b))
}

/// R2: `a -> c -> b` with `a -- b` forces `a -> b`.
fn rule2(g: &PdagMatrix, a: usize, b: usize) -> bool {
    (0..g.p()).any(|c| g.is_directed(a, c) && g.is_directed(c, b))
}

/// R3: `a -- c -> b`, `a -- d -> b`, `c`, `d` non-adjacent forces `a -> b`.
fn rule3(g: &PdagMatrix, a: usize, b: usize) -> bool {
    let p = g.p();
    let mids: Vec<usize> = (0..p)
        .filter(|&c| c != b && g.is_undirected(a, c) && g.is_directed(c, b))
        .collect();
    mids.iter()
        .enumerate()
        .any(|(x, &c)| mids[x + 1..].iter().any(|&d| !g.adjacent(c, d)))
}

/// R4: `a -- c`, `a -- d`, `d -> c -> b`, `b`, `d` non-adjacent forces `a -> b`.
fn rule4(g: &PdagMatrix, a: usize, b: usize) -> bool {
    let p = g.p();
    (0..p).any(|c| {
        c != b
            && g.is_undirected(a, c)
            && g.is_directed(c, b)
            && (0..p).any(|d| {
                d != b
                    && d != c
                    && g.is_undirected(a, d)
                    && g.is_directed(d, c)
                    && !g.adjacent(b, d)
            })
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{skeleton, PdagMatrix};
    use super::*;

    #[test]
    fn example_pattern_is_already_closed() {
        let mut g = skeleton(&m1());
        g.set_directed(0, 1);
        g.set_directed(2, 1);
        assert_eq!(g, m2());
        assert_eq!(apply_meek_rules(&g), m2());
    }

    #[test]
    fn rule1_propagates_along_a_path() {
        let mut g = PdagMatrix::empty(3);
        g.set_directed(0, 1);
        g.set_undirected(1, 2);
        assert_eq!(apply_meek_rules(&g), chain3());
    }

    #[test]
    fn rule2_avoids_cycles() {
        let mut g = PdagMatrix::empty(3);
        g.set_directed(0, 1);
        g.set_directed(1, 2);
        g.set_undirected(0, 2);
        let out = apply_meek_rules(&g);
        assert!(out.is_directed(0, 2));
    }

    #[test]
    fn rule3_orients_into_the_collider() {
        // a=0, b=1, c=2, d=3: a--c->b, a--d->b, a--b, c,d non-adjacent
        let mut g = PdagMatrix::empty(4);
        g.set_undirected(0, 1);
        g.set_undirected(0, 2);
        g.set_undirected(0, 3);
        g.set_directed(2, 1);
        g.set_directed(3, 1);
        let out = apply_meek_rules(&g);
        assert!(out.is_directed(0, 1));
        assert!(out.is_undirected(0, 2));
        assert!(out.is_undirected(0, 3));
    }

    #[test]
    fn rule4_fires_on_its_premise() {
        // a=0, b=1, c=2, d=3: a--b, a--c, a--d, d->c->b, b,d non-adjacent
        let mut g = PdagMatrix::empty(4);
        g.set_undirected(0, 1);
        g.set_undirected(0, 2);
        g.set_undirected(0, 3);
        g.set_directed(3, 2);
        g.set_directed(2, 1);
        assert!(rule4(&g, 0, 1));
        let out = apply_meek_rules(&g);
        assert!(out.is_directed(0, 1));
    }

    #[test]
    fn undirected_graph_is_unchanged() {
        let g = PdagMatrix::complete_undirected(4);
        assert_eq!(apply_meek_rules(&g), g);
        let s = skeleton(&m1());
        assert_eq!(apply_meek_rules(&s), s);
    }

    #[test]
    fn idempotent_on_example() {
        let mut g = PdagMatrix::empty(4);
        g.set_directed(0, 1);
        g.set_undirected(1, 2);
        g.set_undirected(2, 3);
        let once = apply_meek_rules(&g);
        assert_eq!(apply_meek_rules(&once), once);
        assert!(once.is_directed(1, 2));
        assert!(once.is_directed(2, 3));
    }
}
