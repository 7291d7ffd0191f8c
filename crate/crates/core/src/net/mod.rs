//! Four-branch convolutional network from correlation matrices to edge-mark probabilities.
//!
//! Architecture for a `p x p` input with `F` filters per branch:
//!
//! 1. Four parallel same-padded convolutions with ReLU: kernels `(p, 1)`,
//!    `(1, p)`, `(1, 1)` and `(3, 3)`, each producing `p x p x F`.
//! 2. Channel concatenation to `p x p x 4F` and `k x k` max pooling with
//!    stride `k` (valid padding), giving `floor(p/k) x floor(p/k) x 4F`.
//! 3. Flatten, dropout, dense layer with ReLU, dropout.
//! 4. Dense layer to `p^2` units with sigmoid, read row-major as `p x p`.
//!
//! Computation is in `f64`; parameters are stored as `f32` on disk.

mod model_io;
mod train;

pub use model_io::{decode_model, encode_model, load_model, save_model, ModelMeta};
pub use train::{train, train_with, Adam, EpochLog};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::PdagMatrix;
use crate::sim::{Matrix, TrainingPair};

/// Probability clamp used by the loss.
pub const BCE_EPSILON: f64 = 1e-7;

const BRANCHES: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    pub p: usize,
    pub filters: usize,
    pub dense_units: usize,
    /// Max-pool window and stride.
    pub pool: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Hyperparameters {
    /// Defaults: 32 filters, `4p^2` dense units, 2x2 pooling, 20% dropout,
    /// 150 epochs, batches of 256, learning rate `1e-3`.
    pub fn new(p: usize) -> Self {
        Hyperparameters {
            p,
            filters: 32,
            dense_units: 4 * p * p,
            pool: 2,
            dropout_rate: 0.2,
            epochs: 150,
            batch_size: 256,
            learning_rate: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.p < 3 {
            return bad(format!("p must be >= 3, got {}", self.p));
        }
        if self.filters == 0 || self.dense_units == 0 {
            return bad("filters and dense_units must be positive".into());
        }
        if self.pool == 0 || self.pool > self.p {
            return bad(format!(
                "pool size {} invalid for p = {}",
                self.pool, self.p
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be positive",
                self.learning_rate
            ));
        }
        Ok(())
    }

    /// Closed-form trainable parameter count.
    pub fn parameter_count(&self) -> usize {
        let (p, f, u) = (self.p, self.filters, self.dense_units);
        let conv = f * (p + p + 1 + 9) + BRANCHES * f;
        let pooled = p / self.pool;
        let flat = pooled * pooled * BRANCHES * f;
        conv + flat * u + u + u * p * p + p * p
    }
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Clone, Debug)]
struct Layout {
    p: usize,
    filters: usize,
    kernels: [(usize, usize); BRANCHES],
    conv_w: [usize; BRANCHES],
    conv_b: [usize; BRANCHES],
    pool: usize,
    pooled: usize,
    flat: usize,
    units: usize,
    outputs: usize,
    dense_w: usize,
    dense_b: usize,
    out_w: usize,
    out_b: usize,
    total: usize,
}

impl Layout {
    fn new(h: &Hyperparameters) -> Self {
        let p = h.p;
        let f = h.filters;
        let kernels = [(p, 1), (1, p), (1, 1), (3, 3)];
        let mut offset = 0;
        let mut conv_w = [0; BRANCHES];
        let mut conv_b = [0; BRANCHES];
        for (b, &(kh, kw)) in kernels.iter().enumerate() {
            conv_w[b] = offset;
            offset += f * kh * kw;
            conv_b[b] = offset;
            offset += f;
        }
        let pooled = p / h.pool;
        let flat = pooled * pooled * BRANCHES * f;
        let units = h.dense_units;
        let outputs = p * p;
        let dense_w = offset;
        offset += units * flat;
        let dense_b = offset;
        offset += units;
        let out_w = offset;
        offset += outputs * units;
        let out_b = offset;
        offset += outputs;
        Layout {
            p,
            filters: f,
            kernels,
            conv_w,
            conv_b,
            pool: h.pool,
            pooled,
            flat,
            units,
            outputs,
            dense_w,
            dense_b,
            out_w,
            out_b,
            total: offset,
        }
    }

    fn taps(&self, b: usize) -> usize {
        self.kernels[b].0 * self.kernels[b].1
    }

    fn channels(&self) -> usize {
        BRANCHES * self.filters
    }
}

/// Trainable parameters in declaration order: for each branch its kernel
/// (`filters x taps`, row-major) and bias, then dense weights
/// (`units x flat`) and bias, then output weights (`p^2 x units`) and bias.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub hyper: Hyperparameters,
    pub values: Vec<f64>,
}

/// Edge-mark probabilities, row-major `p x p`, every entry in (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    p: usize,
    values: Vec<f64>,
}

impl ProbabilityMatrix {
    pub fn new(p: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != p * p {
            return Err(Error::SizeMismatch {
                expected: p * p,
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && **v <= 1.0)) {
            return Err(Error::InvalidArgument(format!(
                "probability {v} outside [0, 1]"
            )));
        }
        Ok(ProbabilityMatrix { p, values })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted-dropout multipliers for one batch: 0 for dropped units,
/// `1 / (1 - rate)` for kept ones.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub flat: Array2<f64>,
    pub dense: Array2<f64>,
}

impl DropoutMasks {
    pub fn identity(hyper: &Hyperparameters, batch: usize) -> Self {
        let layout = Layout::new(hyper);
        DropoutMasks {
            flat: Array2::ones((batch, layout.flat)),
            dense: Array2::ones((batch, layout.units)),
        }
    }

    /// Draws the flat-layer mask row-major, then the dense-layer mask.
    pub fn sample<R: Rng + ?Sized>(hyper: &Hyperparameters, batch: usize, rng: &mut R) -> Self {
        let layout = Layout::new(hyper);
        let rate = hyper.dropout_rate;
        if rate == 0.0 {
            return Self::identity(hyper, batch);
        }
        let keep = 1.0 / (1.0 - rate);
        let mut draw = |shape: (usize, usize)| {
            Array2::from_shape_simple_fn(shape, || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
        };
        let flat = draw((batch, layout.flat));
        let dense = draw((batch, layout.units));
        DropoutMasks { flat, dense }
    }
}

/// Inputs and targets of a batch, one row-major `p^2` row per sample.
#[derive(Clone, Debug)]
pub struct Batch {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl Batch {
    pub fn from_pairs(p: usize, pairs: &[&TrainingPair]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut inputs = Array2::zeros((pairs.len(), p * p));
        let mut targets = Array2::zeros((pairs.len(), p * p));
        for (s, pair) in pairs.iter().enumerate() {
            if pair.label.p() != p {
                return Err(Error::SizeMismatch {
                    expected: p,
                    found: pair.label.p(),
                });
            }
            write_feature(p, &pair.feature, inputs.row_mut(s))?;
            for (k, &v) in pair.label.as_flat().iter().enumerate() {
                targets[(s, k)] = v as f64;
            }
        }
        Ok(Batch { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn write_feature(p: usize, feature: &Matrix, mut row: ArrayViewMut1<f64>) -> Result<()> {
    if feature.nrows() != p || feature.ncols() != p {
        return Err(Error::SizeMismatch {
            expected: p,
            found: feature.nrows(),
        });
    }
    for a in 0..p {
        for b in 0..p {
            let v = feature[(a, b)];
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "feature entry ({}, {})",
                    a + 1,
                    b + 1
                )));
            }
            row[a * p + b] = v;
        }
    }
    Ok(())
}

/// Intermediate values kept for backpropagation.
struct Cache {
    patches: Vec<Array2<f64>>,
    conv_pre: Vec<Array2<f64>>,
    /// For each (sample, flat unit): row of the winning position inside its branch output.
    argmax: Vec<u32>,
    dense_in: Array2<f64>,
    flat_mask: Array2<f64>,
    dense_mask: Array2<f64>,
    dense_pre: Array2<f64>,
    dense_out: Array2<f64>,
    probs: Array2<f64>,
}

/// Initialises weights uniformly in `±sqrt(6 / (fan_in + fan_out))`, biases at zero.
///
/// Convolution fans are `kh*kw` (one input channel) and `kh*kw*filters`.
pub fn build_network<R: Rng + ?Sized>(
    hyper: &Hyperparameters,
    rng: &mut R,
) -> Result<NetworkParameters> {
    hyper.validate()?;
    let layout = Layout::new(hyper);
    let mut values = vec![0.0; layout.total];
    let mut fill = |values: &mut [f64], fan_in: usize, fan_out: usize| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in values.iter_mut() {
            *v = rng.random_range(-limit..limit);
        }
    };
    for b in 0..BRANCHES {
        let taps = layout.taps(b);
        let off = layout.conv_w[b];
        fill(
            &mut values[off..off + layout.filters * taps],
            taps,
            taps * layout.filters,
        );
    }
    let off = layout.dense_w;
    fill(
        &mut values[off..off + layout.units * layout.flat],
        layout.flat,
        layout.units,
    );
    let off = layout.out_w;
    fill(
        &mut values[off..off + layout.outputs * layout.units],
        layout.units,
        layout.outputs,
    );
    debug_assert_eq!(values.len(), hyper.parameter_count());
    Ok(NetworkParameters {
        hyper: hyper.clone(),
        values,
    })
}

/// Number of trainable scalars.
pub fn parameter_count(params: &NetworkParameters) -> usize {
    params.values.len()
}

impl NetworkParameters {
    fn layout(&self) -> Layout {
        Layout::new(&self.hyper)
    }

    fn matrix(&self, offset: usize, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((rows, cols), &self.values[offset..offset + rows * cols])
            .expect("layout offsets are consistent")
    }

    fn vector(&self, offset: usize, len: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.values[offset..offset + len])
    }

    /// Checks that the parameter vector matches the architecture.
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.values.len() != self.hyper.parameter_count() {
            return Err(Error::SizeMismatch {
                expected: self.hyper.parameter_count(),
                found: self.values.len(),
            });
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameter".into()));
        }
        Ok(())
    }

    fn forward_batch(&self, inputs: &Array2<f64>, masks: &DropoutMasks) -> Cache {
        let l = self.layout();
        let (p, f) = (l.p, l.filters);
        let batch = inputs.nrows();
        let positions = p * p;

        let mut patches = Vec::with_capacity(BRANCHES);
        let mut conv_pre = Vec::with_capacity(BRANCHES);
        for b in 0..BRANCHES {
            let (kh, kw) = l.kernels[b];
            let (top, left) = ((kh - 1) / 2, (kw - 1) / 2);
            let mut patch = Array2::zeros((batch * positions, kh * kw));
            for s in 0..batch {
                let x = inputs.row(s);
                for r in 0..p {
                    for c in 0..p {
                        let mut row = patch.row_mut(s * positions + r * p + c);
                        for u in 0..kh {
                            let rr = (r + u) as isize - top as isize;
                            if rr < 0 || rr >= p as isize {
                                continue;
                            }
                            for v in 0..kw {
                                let cc = (c + v) as isize - left as isize;
                                if cc < 0 || cc >= p as isize {
                                    continue;
                                }
                                row[u * kw + v] = x[rr as usize * p + cc as usize];
                            }
                        }
                    }
                }
            }
            let w = self.matrix(l.conv_w[b], f, kh * kw);
            let mut z = patch.dot(&w.t());
            z += &self.vector(l.conv_b[b], f);
            patches.push(patch);
            conv_pre.push(z);
        }

        let channels = l.channels();
        let h = l.pooled;
        let mut pooled = Array2::zeros((batch, l.flat));
        let mut argmax = vec![0u32; batch * l.flat];
        for s in 0..batch {
            for hr in 0..h {
                for hc in 0..h {
                    for ch in 0..channels {
                        let (b, fi) = (ch / f, ch % f);
                        let z = &conv_pre[b];
                        let mut best = f64::NEG_INFINITY;
                        let mut best_pos = 0;
                        for dr in 0..l.pool {
                            for dc in 0..l.pool {
                                let pos = (hr * l.pool + dr) * p + (hc * l.pool + dc);
                                let a = z[(s * positions + pos, fi)].max(0.0);
                                if a > best {
                                    best = a;
                                    best_pos = pos;
                                }
                            }
                        }
                        let k = (hr * h + hc) * channels + ch;
                        pooled[(s, k)] = best;
                        argmax[s * l.flat + k] = best_pos as u32;
                    }
                }
            }
        }

        let dense_in = pooled * &masks.flat;
        let mut dense_pre = dense_in.dot(&self.matrix(l.dense_w, l.units, l.flat).t());
        dense_pre += &self.vector(l.dense_b, l.units);
        let dense_out = dense_pre.mapv(|v| v.max(0.0)) * &masks.dense;
        let mut logits = dense_out.dot(&self.matrix(l.out_w, l.outputs, l.units).t());
        logits += &self.vector(l.out_b, l.outputs);
        let probs = logits.mapv(sigmoid);

        Cache {
            patches,
            conv_pre,
            argmax,
            dense_in,
            flat_mask: masks.flat.clone(),
            dense_mask: masks.dense.clone(),
            dense_pre,
            dense_out,
            probs,
        }
    }

    fn backward(&self, cache: &Cache, targets: &Array2<f64>) -> Vec<f64> {
        let l = self.layout();
        let (p, f) = (l.p, l.filters);
        let batch = targets.nrows();
        let positions = p * p;
        let scale = 1.0 / (batch * l.outputs) as f64;
        let mut grad = vec![0.0; l.total];

        let mut d_logits = Array2::zeros(cache.probs.raw_dim());
        Zip::from(&mut d_logits)
            .and(&cache.probs)
            .and(targets)
            .for_each(|d, &o, &y| *d = bce_logit_grad(o, y) * scale);

        write_matrix(&mut grad, l.out_w, &d_logits.t().dot(&cache.dense_out));
        write_vector(&mut grad, l.out_b, &d_logits.sum_axis(Axis(0)));

        let mut d_hidden = d_logits.dot(&self.matrix(l.out_w, l.outputs, l.units));
        Zip::from(&mut d_hidden)
            .and(&cache.dense_pre)
            .and(&cache.dense_mask)
            .for_each(|d, &pre, &mask| *d = if pre > 0.0 { *d * mask } else { 0.0 });
        write_matrix(&mut grad, l.dense_w, &d_hidden.t().dot(&cache.dense_in));
        write_vector(&mut grad, l.dense_b, &d_hidden.sum_axis(Axis(0)));

        let d_pooled = d_hidden.dot(&self.matrix(l.dense_w, l.units, l.flat)) * &cache.flat_mask;

        let channels = l.channels();
        let mut d_conv: Vec<Array2<f64>> = (0..BRANCHES)
            .map(|_| Array2::zeros((batch * positions, f)))
            .collect();
        for s in 0..batch {
            for k in 0..l.flat {
                let g = d_pooled[(s, k)];
                if g == 0.0 {
                    continue;
                }
                let ch = k % channels;
                let (b, fi) = (ch / f, ch % f);
                let pos = cache.argmax[s * l.flat + k] as usize;
                let row = s * positions + pos;
                if cache.conv_pre[b][(row, fi)] > 0.0 {
                    d_conv[b][(row, fi)] += g;
                }
            }
        }
        for (b, d) in d_conv.iter().enumerate() {
            let dw = d.t().dot(&cache.patches[b]);
            debug_assert_eq!(dw.dim(), (f, l.taps(b)));
            write_matrix(&mut grad, l.conv_w[b], &dw);
            write_vector(&mut grad, l.conv_b[b], &d.sum_axis(Axis(0)));
        }
        grad
    }

    /// Mean clamped binary cross-entropy over the batch with fixed dropout masks.
    pub fn loss_with_masks(&self, batch: &Batch, masks: &DropoutMasks) -> f64 {
        let cache = self.forward_batch(&batch.inputs, masks);
        mean_bce(&cache.probs, &batch.targets)
    }

    /// Loss and its gradient with respect to every parameter, with fixed dropout masks.
    pub fn loss_and_gradient(&self, batch: &Batch, masks: &DropoutMasks) -> (f64, Vec<f64>) {
        let cache = self.forward_batch(&batch.inputs, masks);
        let loss = mean_bce(&cache.probs, &batch.targets);
        (loss, self.backward(&cache, &batch.targets))
    }

    /// Inference on many features at once.
    pub fn predict(&self, features: &[&Matrix]) -> Result<Vec<ProbabilityMatrix>> {
        let p = self.hyper.p;
        let mut inputs = Array2::zeros((features.len(), p * p));
        for (s, feature) in features.iter().enumerate() {
            write_feature(p, feature, inputs.row_mut(s))?;
        }
        let masks = DropoutMasks::identity(&self.hyper, features.len());
        let cache = self.forward_batch(&inputs, &masks);
        Ok(cache
            .probs
            .rows()
            .into_iter()
            .map(|row| ProbabilityMatrix {
                p,
                values: row.to_vec(),
            })
            .collect())
    }
}

fn write_matrix(grad: &mut [f64], offset: usize, m: &Array2<f64>) {
    let (r, c) = m.dim();
    let mut view = ArrayViewMut2::from_shape((r, c), &mut grad[offset..offset + r * c])
        .expect("layout offsets are consistent");
    view.assign(m);
}

fn write_vector(grad: &mut [f64], offset: usize, v: &Array1<f64>) {
    grad[offset..offset + v.len()].copy_from_slice(v.as_slice().expect("contiguous"));
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn bce_term(o: f64, y: f64) -> f64 {
    let o = o.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(y * o.ln() + (1.0 - y) * (1.0 - o).ln())
}

/// Derivative of the clamped BCE term with respect to the pre-sigmoid logit.
#[inline]
fn bce_logit_grad(o: f64, y: f64) -> f64 {
    if !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&o) {
        0.0
    } else {
        o - y
    }
}

fn mean_bce(probs: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    Zip::from(probs)
        .and(targets)
        .for_each(|&o, &y| total += bce_term(o, y));
    total / probs.len() as f64
}

/// Single-sample forward pass. `Train` mode draws fresh dropout masks from `rng`.
pub fn forward<R: Rng + ?Sized>(
    params: &NetworkParameters,
    feature: &Matrix,
    mode: Mode,
    rng: &mut R,
) -> Result<ProbabilityMatrix> {
    let p = params.hyper.p;
    let mut inputs = Array2::zeros((1, p * p));
    write_feature(p, feature, inputs.row_mut(0))?;
    let masks = match mode {
        Mode::Train => DropoutMasks::sample(&params.hyper, 1, rng),
        Mode::Infer => DropoutMasks::identity(&params.hyper, 1),
    };
    let cache = params.forward_batch(&inputs, &masks);
    Ok(ProbabilityMatrix {
        p,
        values: cache.probs.row(0).to_vec(),
    })
}

/// Mean clamped binary cross-entropy between probabilities and a 0/1 label.
pub fn bce_loss(o: &ProbabilityMatrix, label: &PdagMatrix) -> Result<f64> {
    if o.p() != label.p() {
        return Err(Error::SizeMismatch {
            expected: o.p(),
            found: label.p(),
        });
    }
    let total: f64 = o
        .as_slice()
        .iter()
        .zip(label.as_flat())
        .map(|(&o, &y)| bce_term(o, y as f64))
        .sum();
    Ok(total / o.as_slice().len() as f64)
}

/// Gradient of the mean batch loss, with one set of dropout masks drawn from `rng`.
pub fn gradient<R: Rng + ?Sized>(
    params: &NetworkParameters,
    batch: &[&TrainingPair],
    rng: &mut R,
) -> Result<(f64, Vec<f64>)> {
    let batch = Batch::from_pairs(params.hyper.p, batch)?;
    let masks = DropoutMasks::sample(&params.hyper, batch.len(), rng);
    Ok(params.loss_and_gradient(&batch, &masks))
}
