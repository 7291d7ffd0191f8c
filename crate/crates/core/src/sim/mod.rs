//! Random DAGs, linear Gaussian SEMs and the correlation features derived from them.

mod corpus;

pub use corpus::{
    generate_corpus, generate_item, read_corpus, read_correlation_csv, write_corpus,
    write_correlation_csv, Corpus, CorpusManifest, DEFAULT_SHARD_SIZE, MANIFEST_FILE,
};

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{check_permutation, PdagMatrix};

/// Dense real matrix used for data, correlations and SEM weights.
pub type Matrix = DMatrix<f64>;

/// Upper bound of the sparsity draw: at most 80% of the lower-triangular edges are removed.
pub const MAX_SPARSITY: f64 = 0.8;
pub const SIGMA_RANGE: (f64, f64) = (0.5, 2.0);
pub const BETA_MAGNITUDE_RANGE: (f64, f64) = (0.1, 2.0);
pub const POSITIVE_SIGN_PROBABILITY: f64 = 0.6;

/// A linear Gaussian structural equation model.
///
/// `beta[(j, i)]` is the weight of the edge `X_j -> X_i` (source row, target
/// column), zero where the DAG has no such edge. `sigma[i]` is the noise
/// standard deviation of `X_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SemModel {
    pub dag: PdagMatrix,
    pub beta: Matrix,
    pub sigma: Vec<f64>,
}

/// A permuted correlation matrix with its permuted CPDAG label.
///
/// New node `a` corresponds to original node `permutation[a]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub feature: Matrix,
    pub label: PdagMatrix,
    pub permutation: Vec<usize>,
}

/// Random DAG over causal order `X_1, ..., X_p` with a uniformly drawn sparsity.
pub fn sample_dag<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Result<PdagMatrix> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be >= 2, got {p}")));
    }
    let s = rng.random_range(0.0..=MAX_SPARSITY);
    dag_with_sparsity(p, s, rng)
}

/// Fully connected lower-triangular DAG with `round(s * p(p-1)/2)` uniformly
/// chosen edges removed (ties rounded to even).
pub fn dag_with_sparsity<R: Rng + ?Sized>(p: usize, s: f64, rng: &mut R) -> Result<PdagMatrix> {
    if p < 2 {
        return Err(Error::InvalidArgument(format!("p must be >= 2, got {p}")));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} outside [0, 1]"
        )));
    }
    let lower: Vec<(usize, usize)> = (0..p).flat_map(|i| (0..i).map(move |j| (i, j))).collect();
    let removed = (s * lower.len() as f64).round_ties_even() as usize;
    let mut keep = vec![true; lower.len()];
    for k in index::sample(rng, lower.len(), removed) {
        keep[k] = false;
    }
    let mut g = PdagMatrix::empty(p);
    for (&(i, j), _) in lower.iter().zip(&keep).filter(|(_, &k)| k) {
        // m[i][j] = 1 with i > j: X_j -> X_i
        g.set(i, j, 1);
    }
    Ok(g)
}

/// Draws noise scales and edge weights for `dag`.
///
/// All `sigma` values are drawn first, then one weight per edge in row-major
/// order of the adjacency matrix.
pub fn sample_sem<R: Rng + ?Sized>(dag: &PdagMatrix, rng: &mut R) -> Result<SemModel> {
    dag.require_dag()?;
    let p = dag.p();
    let sigma: Vec<f64> = (0..p)
        .map(|_| rng.random_range(SIGMA_RANGE.0..=SIGMA_RANGE.1))
        .collect();
    let mut beta = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            if dag.is_directed(j, i) {
                let magnitude = rng.random_range(BETA_MAGNITUDE_RANGE.0..=BETA_MAGNITUDE_RANGE.1);
                let sign = if rng.random::<f64>() < POSITIVE_SIGN_PROBABILITY {
                    1.0
                } else {
                    -1.0
                };
                beta[(j, i)] = sign * magnitude;
            }
        }
    }
    Ok(SemModel {
        dag: dag.clone(),
        beta,
        sigma,
    })
}

/// Draws `n` i.i.d. rows from the SEM.
///
/// Noise is drawn column by column (variable `X_1` first), then variables are
/// assembled in topological order.
pub fn simulate_data<R: Rng + ?Sized>(sem: &SemModel, n: usize, rng: &mut R) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n must be >= 2, got {n}")));
    }
    let p = sem.dag.p();
    let order = sem.dag.topological_order().ok_or(Error::NotADag)?;
    let mut data = Matrix::zeros(n, p);
    for i in 0..p {
        let s = sem.sigma[i];
        for r in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            data[(r, i)] = s * z;
        }
    }
    for &i in &order {
        for j in sem.dag.parents(i) {
            let b = sem.beta[(j, i)];
            for r in 0..n {
                data[(r, i)] += b * data[(r, j)];
            }
        }
    }
    Ok(data)
}

/// Pearson correlation matrix of the columns of `data`.
pub fn correlation_matrix(data: &Matrix) -> Result<Matrix> {
    let (n, p) = data.shape();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 rows, got {n}"
        )));
    }
    let mut centered = data.clone();
    let mut scale = vec![0.0; p];
    for (c, sc) in scale.iter_mut().enumerate() {
        let mut col = centered.column_mut(c);
        let mean = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        let ss = col.norm_squared();
        if ss <= 0.0 || !ss.is_finite() {
            return Err(Error::ConstantColumn { column: c + 1 });
        }
        *sc = ss.sqrt();
    }
    let mut corr = Matrix::identity(p, p);
    for a in 0..p {
        for b in (a + 1)..p {
            let r = centered.column(a).dot(&centered.column(b)) / (scale[a] * scale[b]);
            let r = r.clamp(-1.0, 1.0);
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    Ok(corr)
}

/// Population covariance of the SEM, `(I - B)^-T diag(sigma^2) (I - B)^-1`.
pub fn analytic_covariance(sem: &SemModel) -> Matrix {
    let p = sem.dag.p();
    let i_minus_b = Matrix::identity(p, p) - &sem.beta;
    let inv = i_minus_b
        .try_inverse()
        .expect("I - B is unit triangular up to permutation for a DAG");
    let d = Matrix::from_diagonal(&nalgebra::DVector::from_iterator(
        p,
        sem.sigma.iter().map(|s| s * s),
    ));
    inv.transpose() * d * inv
}

/// Population correlation matrix of the SEM.
pub fn analytic_correlation(sem: &SemModel) -> Matrix {
    cov_to_corr(&analytic_covariance(sem))
}

pub(crate) fn cov_to_corr(cov: &Matrix) -> Matrix {
    let p = cov.nrows();
    let sd: Vec<f64> = (0..p).map(|i| cov[(i, i)].sqrt()).collect();
    Matrix::from_fn(p, p, |a, b| {
        if a == b {
            1.0
        } else {
            (cov[(a, b)] / (sd[a] * sd[b])).clamp(-1.0, 1.0)
        }
    })
}

/// Relabels feature and label together: new node `a` is old node `perm[a]`.
pub fn permute_pair(c: &Matrix, label: &PdagMatrix, perm: &[usize]) -> Result<TrainingPair> {
    let p = label.p();
    if c.nrows() != p || c.ncols() != p {
        return Err(Error::SizeMismatch {
            expected: p,
            found: c.nrows(),
        });
    }
    check_permutation(perm, p)?;
    let feature = Matrix::from_fn(p, p, |a, b| c[(perm[a], perm[b])]);
    Ok(TrainingPair {
        feature,
        label: label.permuted(perm)?,
        permutation: perm.to_vec(),
    })
}

/// Inverse of a permutation.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (a, &b) in perm.iter().enumerate() {
        inv[b] = a;
    }
    inv
}

/// Checks that `c` is a valid correlation matrix: square, symmetric, unit diagonal, finite.
pub fn validate_correlation(c: &Matrix, tol: f64) -> Result<()> {
    let (r, k) = c.shape();
    if r != k {
        return Err(Error::SizeMismatch {
            expected: r,
            found: k,
        });
    }
    for a in 0..r {
        if (c[(a, a)] - 1.0).abs() > tol {
            return Err(Error::InvalidArgument(format!(
                "diagonal entry {} is {}, expected 1",
                a + 1,
                c[(a, a)]
            )));
        }
        for b in 0..r {
            let v = c[(a, b)];
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("entry ({}, {})", a + 1, b + 1)));
            }
            if (v - c[(b, a)]).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
            if v.abs() > 1.0 + tol {
                return Err(Error::InvalidArgument(format!(
                    "entry ({}, {}) = {v} outside [-1, 1]",
                    a + 1,
                    b + 1
                )));
            }
        }
    }
    Ok(())
}
