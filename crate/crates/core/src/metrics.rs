//! Adjacency and orientation confusion counts and the derived scores.
//!
//! Ratios with a zero denominator evaluate to 1 and mark the result as
//! degenerate.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{is_proper_cpdag, PdagMatrix};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Measure {
    Npv,
    Precision,
    Recall,
    Specificity,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ratio {
    pub value: f64,
    pub degenerate: bool,
}

fn same_p(est: &PdagMatrix, truth: &PdagMatrix) -> Result<usize> {
    if est.p() != truth.p() {
        return Err(Error::SizeMismatch {
            expected: truth.p(),
            found: est.p(),
        });
    }
    Ok(truth.p())
}

/// Counts over unordered pairs `i < j`.
pub fn adjacency_confusion(est: &PdagMatrix, truth: &PdagMatrix) -> Result<ConfusionCounts> {
    let p = same_p(est, truth)?;
    let mut c = ConfusionCounts::default();
    for i in 0..p {
        for j in i + 1..p {
            match (est.adjacent(i, j), truth.adjacent(i, j)) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
    }
    Ok(c)
}

/// Endpoint census over pairs adjacent in both graphs. Each such pair
/// contributes two endpoints; an arrowhead is the positive class, and an
/// undirected edge has tails at both ends.
pub fn orientation_confusion(est: &PdagMatrix, truth: &PdagMatrix) -> Result<ConfusionCounts> {
    let p = same_p(est, truth)?;
    let mut c = ConfusionCounts::default();
    for i in 0..p {
        for j in i + 1..p {
            if !(est.adjacent(i, j) && truth.adjacent(i, j)) {
                continue;
            }
            for (at, other) in [(i, j), (j, i)] {
                match (est.arrowhead_at(at, other), truth.arrowhead_at(at, other)) {
                    (true, true) => c.tp += 1,
                    (false, false) => c.tn += 1,
                    (true, false) => c.fp += 1,
                    (false, true) => c.fn_ += 1,
                }
            }
        }
    }
    Ok(c)
}

pub fn metric(c: &ConfusionCounts, which: Measure) -> Ratio {
    let (num, den) = match which {
        Measure::Npv => (c.tn, c.tn + c.fn_),
        Measure::Precision => (c.tp, c.tp + c.fp),
        Measure::Recall => (c.tp, c.tp + c.fn_),
        Measure::Specificity => (c.tn, c.tn + c.fp),
    };
    if den == 0 {
        Ratio {
            value: 1.0,
            degenerate: true,
        }
    } else {
        Ratio {
            value: num as f64 / den as f64,
            degenerate: false,
        }
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Harmonic mean of precision and recall.
pub fn f1(c: &ConfusionCounts) -> f64 {
    harmonic(
        metric(c, Measure::Precision).value,
        metric(c, Measure::Recall).value,
    )
}

/// Harmonic mean of NPV and specificity.
pub fn g1(c: &ConfusionCounts) -> f64 {
    harmonic(
        metric(c, Measure::Npv).value,
        metric(c, Measure::Specificity).value,
    )
}

/// Number of adjacent unordered pairs.
pub fn edge_count(g: &PdagMatrix) -> usize {
    g.edge_count()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdjacencyScores {
    pub npv: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientationScores {
    pub precision: f64,
    pub g1: f64,
    pub npv: f64,
    pub specificity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsReport {
    pub adjacency_counts: ConfusionCounts,
    pub orientation_counts: ConfusionCounts,
    pub adjacency: AdjacencyScores,
    pub orientation: OrientationScores,
    pub est_edges: usize,
    pub true_edges: usize,
    /// Some ratio had a zero denominator.
    pub degenerate: bool,
    pub est_proper: bool,
}

pub fn evaluate(est: &PdagMatrix, truth: &PdagMatrix) -> Result<MetricsReport> {
    let adj = adjacency_confusion(est, truth)?;
    let ori = orientation_confusion(est, truth)?;
    let ratios = [
        metric(&adj, Measure::Npv),
        metric(&adj, Measure::Precision),
        metric(&adj, Measure::Recall),
        metric(&ori, Measure::Precision),
        metric(&ori, Measure::Npv),
        metric(&ori, Measure::Specificity),
    ];
    Ok(MetricsReport {
        adjacency_counts: adj,
        orientation_counts: ori,
        adjacency: AdjacencyScores {
            npv: ratios[0].value,
            f1: f1(&adj),
            precision: ratios[1].value,
            recall: ratios[2].value,
        },
        orientation: OrientationScores {
            precision: ratios[3].value,
            g1: g1(&ori),
            npv: ratios[4].value,
            specificity: ratios[5].value,
        },
        est_edges: edge_count(est),
        true_edges: edge_count(truth),
        degenerate: ratios.iter().any(|r| r.degenerate),
        est_proper: is_proper_cpdag(est),
    })
}

/// Which instances of a stratum enter its means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DegeneratePolicy {
    #[default]
    Include,
    Exclude,
}

/// Means over a group of instances.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// `all`, or `q1`..`q4` for quartile strata of the true edge count.
    pub stratum: String,
    pub instances: usize,
    pub adjacency: AdjacencyScores,
    pub orientation: OrientationScores,
    pub est_edges: f64,
    pub true_edges: f64,
    pub proper_fraction: f64,
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quartile boundaries `(q1, q2, q3)` of the edge counts.
pub fn quartile_bounds(true_edges: &[usize]) -> Option<(f64, f64, f64)> {
    if true_edges.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = true_edges.iter().map(|&e| e as f64).collect();
    v.sort_by(f64::total_cmp);
    Some((quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75)))
}

/// Stratum index 0..4; lower boundaries are inclusive.
pub fn stratum_of(edges: usize, bounds: (f64, f64, f64)) -> usize {
    let e = edges as f64;
    if e < bounds.0 {
        0
    } else if e < bounds.1 {
        1
    } else if e < bounds.2 {
        2
    } else {
        3
    }
}

fn summarise(stratum: &str, reports: &[&MetricsReport]) -> Summary {
    let k = reports.len().max(1) as f64;
    let mean = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / k;
    Summary {
        stratum: stratum.to_string(),
        instances: reports.len(),
        adjacency: AdjacencyScores {
            npv: mean(&|r| r.adjacency.npv),
            f1: mean(&|r| r.adjacency.f1),
            precision: mean(&|r| r.adjacency.precision),
            recall: mean(&|r| r.adjacency.recall),
        },
        orientation: OrientationScores {
            precision: mean(&|r| r.orientation.precision),
            g1: mean(&|r| r.orientation.g1),
            npv: mean(&|r| r.orientation.npv),
            specificity: mean(&|r| r.orientation.specificity),
        },
        est_edges: mean(&|r| r.est_edges as f64),
        true_edges: mean(&|r| r.true_edges as f64),
        proper_fraction: mean(&|r| if r.est_proper { 1.0 } else { 0.0 }),
    }
}

/// The overall mean followed by the non-empty quartile strata, in input order.
///
/// Quartiles are computed over all instances, before any exclusion.
pub fn aggregate(reports: &[MetricsReport], policy: DegeneratePolicy) -> Vec<Summary> {
    let Some(bounds) = quartile_bounds(&reports.iter().map(|r| r.true_edges).collect::<Vec<_>>())
    else {
        return Vec::new();
    };
    let kept: Vec<&MetricsReport> = reports
        .iter()
        .filter(|r| policy == DegeneratePolicy::Include || !r.degenerate)
        .collect();
    let mut out = vec![summarise("all", &kept)];
    for s in 0..4 {
        let group: Vec<&MetricsReport> = kept
            .iter()
            .copied()
            .filter(|r| stratum_of(r.true_edges, bounds) == s)
            .collect();
        if !group.is_empty() {
            out.push(summarise(&format!("q{}", s + 1), &group));
        }
    }
    out
}

pub const INSTANCE_CSV_HEADER: &str =
    "instance,adj_tp,adj_tn,adj_fp,adj_fn,ori_tp,ori_tn,ori_fp,ori_fn,\
adj_npv,adj_f1,adj_precision,adj_recall,ori_precision,ori_g1,ori_npv,ori_specificity,\
est_edges,true_edges,degenerate,proper";

impl MetricsReport {
    pub fn csv_row(&self, instance: &str) -> String {
        let (a, o) = (&self.adjacency_counts, &self.orientation_counts);
        format!(
            "{instance},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            a.tp,
            a.tn,
            a.fp,
            a.fn_,
            o.tp,
            o.tn,
            o.fp,
            o.fn_,
            self.adjacency.npv,
            self.adjacency.f1,
            self.adjacency.precision,
            self.adjacency.recall,
            self.orientation.precision,
            self.orientation.g1,
            self.orientation.npv,
            self.orientation.specificity,
            self.est_edges,
            self.true_edges,
            self.degenerate as u8,
            self.est_proper as u8,
        )
    }
}

pub const SUMMARY_CSV_HEADER: &str = "stratum,instances,adj_npv,adj_f1,adj_precision,adj_recall,\
ori_precision,ori_g1,ori_npv,ori_specificity,est_edges,true_edges,proper_fraction";

impl Summary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.stratum,
            self.instances,
            self.adjacency.npv,
            self.adjacency.f1,
            self.adjacency.precision,
            self.adjacency.recall,
            self.orientation.precision,
            self.orientation.g1,
            self.orientation.npv,
            self.orientation.specificity,
            self.est_edges,
            self.true_edges,
            self.proper_fraction,
        )
    }
}

/// Fixed-width table with the four headline columns.
pub fn summary_table(rows: &[Summary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>9} {:>8} {:>8} {:>8} {:>10}",
        "stratum", "instances", "Adj F1", "Adj NPV", "Ori G1", "Ori prec."
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>9} {:>8.3} {:>8.3} {:>8.3} {:>10.3}",
            r.stratum,
            r.instances,
            r.adjacency.f1,
            r.adjacency.npv,
            r.orientation.g1,
            r.orientation.precision
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::m2;
    use crate::graph::skeleton;
    use proptest::prelude::*;

    fn counts(tp: usize, tn: usize, fp: usize, fn_: usize) -> ConfusionCounts {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    #[test]
    fn adjacency_examples() {
        let truth = m2();
        assert_eq!(
            adjacency_confusion(&truth, &truth).unwrap(),
            counts(6, 4, 0, 0)
        );
        let empty = PdagMatrix::empty(5);
        assert_eq!(
            adjacency_confusion(&empty, &truth).unwrap(),
            counts(0, 4, 0, 6)
        );
        let full = PdagMatrix::complete_undirected(5);
        assert_eq!(
            adjacency_confusion(&full, &truth).unwrap(),
            counts(6, 0, 4, 0)
        );
        assert!(adjacency_confusion(&PdagMatrix::empty(4), &truth).is_err());
    }

    #[test]
    fn orientation_examples() {
        let truth = m2();
        assert_eq!(
            orientation_confusion(&truth, &truth).unwrap(),
            counts(2, 10, 0, 0)
        );
        let undirected = skeleton(&truth);
        assert_eq!(
            orientation_confusion(&undirected, &truth).unwrap(),
            counts(0, 10, 0, 2)
        );
        let a = PdagMatrix::from_directed_edges(4, &[(0, 1)]);
        let b = PdagMatrix::from_directed_edges(4, &[(2, 3)]);
        assert_eq!(
            orientation_confusion(&a, &b).unwrap(),
            ConfusionCounts::default()
        );
    }

    #[test]
    fn ratio_examples() {
        let r = metric(&counts(0, 4, 0, 6), Measure::Npv);
        assert_eq!(r.value, 0.4);
        assert!(!r.degenerate);
        assert_eq!(metric(&counts(6, 0, 4, 0), Measure::Precision).value, 0.6);
        let full = adjacency_confusion(&PdagMatrix::complete_undirected(5), &m2()).unwrap();
        let npv = metric(&full, Measure::Npv);
        assert_eq!(npv.value, 1.0);
        assert!(npv.degenerate);
    }

    #[test]
    fn f1_and_g1_examples() {
        assert_eq!(f1(&counts(6, 4, 0, 0)), 1.0);
        assert!((f1(&counts(6, 0, 4, 0)) - 0.75).abs() < 1e-15);
        assert_eq!(f1(&counts(0, 4, 0, 6)), 0.0);
        assert_eq!(g1(&counts(2, 10, 0, 0)), 1.0);
        let npv = 10.0 / 12.0;
        assert!((g1(&counts(0, 10, 0, 2)) - 2.0 * npv / (npv + 1.0)).abs() < 1e-15);
        assert!((g1(&counts(0, 10, 0, 2)) - 20.0 / 22.0).abs() < 1e-12);
        assert_eq!(g1(&ConfusionCounts::default()), 1.0);
    }

    #[test]
    fn edge_counts() {
        assert_eq!(edge_count(&m2()), 6);
        assert_eq!(edge_count(&PdagMatrix::empty(5)), 0);
        assert_eq!(edge_count(&PdagMatrix::complete_undirected(5)), 10);
    }

    #[test]
    fn evaluate_identity_and_skeleton() {
        let r = evaluate(&m2(), &m2()).unwrap();
        assert_eq!(r.adjacency.f1, 1.0);
        assert_eq!(r.adjacency.npv, 1.0);
        assert_eq!(r.orientation.g1, 1.0);
        assert_eq!(r.orientation.precision, 1.0);
        assert!(r.est_proper);

        let r = evaluate(&skeleton(&m2()), &m2()).unwrap();
        assert_eq!(r.adjacency.f1, 1.0);
        assert_eq!(r.adjacency.npv, 1.0);
        assert_eq!(r.orientation.precision, 1.0);
        assert!(r.degenerate);
        assert!((r.orientation.g1 - 20.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn quartiles_of_four_values() {
        let b = quartile_bounds(&[2, 4, 6, 8]).unwrap();
        assert_eq!(b, (3.5, 5.0, 6.5));
        let strata: Vec<usize> = [2, 4, 6, 8].iter().map(|&e| stratum_of(e, b)).collect();
        assert_eq!(strata, vec![0, 1, 2, 3]);
        // inclusive lower boundary
        assert_eq!(stratum_of(5, b), 2);
    }

    fn report_with(true_edges: usize, f1: f64) -> MetricsReport {
        let mut r = evaluate(&m2(), &m2()).unwrap();
        r.true_edges = true_edges;
        r.adjacency.f1 = f1;
        r
    }

    #[test]
    fn aggregation_means_and_strata() {
        let rows = aggregate(
            &[report_with(3, 0.4), report_with(3, 0.6)],
            DegeneratePolicy::Include,
        );
        assert_eq!(rows[0].stratum, "all");
        assert!((rows[0].adjacency.f1 - 0.5).abs() < 1e-15);

        let reports: Vec<_> = [2, 4, 6, 8]
            .iter()
            .map(|&e| report_with(e, e as f64 / 10.0))
            .collect();
        let rows = aggregate(&reports, DegeneratePolicy::Include);
        let names: Vec<&str> = rows.iter().map(|r| r.stratum.as_str()).collect();
        assert_eq!(names, ["all", "q1", "q2", "q3", "q4"]);
        assert!(rows[1..].iter().all(|r| r.instances == 1));
        assert_eq!(rows[3].adjacency.f1, 0.6);
        assert!(aggregate(&[], DegeneratePolicy::Include).is_empty());
    }

    #[test]
    fn degenerate_instances_can_be_excluded() {
        let good = evaluate(&m2(), &m2()).unwrap();
        let flagged = evaluate(&skeleton(&m2()), &m2()).unwrap();
        let rows = aggregate(&[good, flagged], DegeneratePolicy::Exclude);
        assert_eq!(rows[0].instances, 1);
        assert_eq!(rows[0].orientation.g1, 1.0);
    }

    #[test]
    fn csv_and_table_shapes() {
        let r = evaluate(&m2(), &m2()).unwrap();
        let cols = INSTANCE_CSV_HEADER.split(',').count();
        assert_eq!(r.csv_row("0").split(',').count(), cols);
        let rows = aggregate(&[r], DegeneratePolicy::Include);
        assert_eq!(
            rows[0].csv_row().split(',').count(),
            SUMMARY_CSV_HEADER.split(',').count()
        );
        let table = summary_table(&rows);
        assert!(table.contains("Adj NPV"));
        assert_eq!(table.lines().count(), 1 + rows.len());
    }

    fn arb_graph(p: usize) -> impl Strategy<Value = PdagMatrix> {
        proptest::collection::vec(0u8..2, p * p).prop_map(move |mut m| {
            for i in 0..p {
                m[i * p + i] = 0;
            }
            PdagMatrix::from_flat(p, m).unwrap()
        })
    }

    fn arb_pair() -> impl Strategy<Value = (PdagMatrix, PdagMatrix)> {
        (2usize..8).prop_flat_map(|p| (arb_graph(p), arb_graph(p)))
    }

    proptest! {
        #[test]
        fn confusion_totals((est, truth) in arb_pair()) {
            let p = est.p();
            let adj = adjacency_confusion(&est, &truth).unwrap();
            prop_assert_eq!(adj.total(), p * (p - 1) / 2);
            let ori = orientation_confusion(&est, &truth).unwrap();
            prop_assert_eq!(ori.total(), 2 * adj.tp);
        }

        #[test]
        fn scores_are_in_unit_interval((est, truth) in arb_pair()) {
            let r = evaluate(&est, &truth).unwrap();
            for v in [r.adjacency.npv, r.adjacency.f1, r.adjacency.precision, r.adjacency.recall,
                      r.orientation.precision, r.orientation.g1, r.orientation.npv,
                      r.orientation.specificity] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if r.adjacency_counts.fn_ == 0 {
                prop_assert_eq!(r.adjacency.npv, 1.0);
            }
            let c = r.adjacency_counts;
            if c.tp > 0 {
                prop_assert_eq!(r.adjacency.f1 == 1.0, c.fp == 0 && c.fn_ == 0);
            }
        }

        #[test]
        fn swapping_arguments((est, truth) in arb_pair()) {
            let a = adjacency_confusion(&est, &truth).unwrap();
            let b = adjacency_confusion(&truth, &est).unwrap();
            prop_assert_eq!(b, counts(a.tp, a.tn, a.fn_, a.fp));
            let a = orientation_confusion(&est, &truth).unwrap();
            let b = orientation_confusion(&truth, &est).unwrap();
            prop_assert_eq!(b, counts(a.tp, a.tn, a.fn_, a.fp));
        }
    }
}
