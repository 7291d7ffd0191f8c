use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{build_network, Batch, DropoutMasks, Hyperparameters, NetworkParameters};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, derive_seed_path};
use crate::sim::TrainingPair;

const INIT_STREAM: u64 = 0;
const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    /// Zero-based.
    pub epoch: usize,
    /// Mean per-sample training loss over the epoch, with dropout active.
    pub mean_loss: f64,
    /// Elapsed time since training started.
    pub wall_seconds: f64,
}

/// Adam with `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-7`.
#[derive(Clone, Debug)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, len: usize) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-7,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let lr =
            self.learning_rate * (1.0 - b2.powi(self.step)).sqrt() / (1.0 - b1.powi(self.step));
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
            self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
            params[k] -= lr * self.m[k] / (self.v[k].sqrt() + self.eps);
        }
    }
}

/// Trains from a fresh initialisation and returns the parameters and the log.
pub fn train(
    pairs: &[TrainingPair],
    hyper: &Hyperparameters,
    seed: u64,
) -> Result<(NetworkParameters, Vec<EpochLog>)> {
    let mut log = Vec::with_capacity(hyper.epochs);
    let params = train_with(pairs, hyper, seed, |row| log.push(row.clone()))?;
    Ok((params, log))
}

/// Like [`train`], reporting each epoch to `observer` as it finishes.
///
/// All randomness derives from `seed`: initial weights, the per-epoch
/// shuffle, and the dropout masks of each batch use independent streams.
pub fn train_with(
    pairs: &[TrainingPair],
    hyper: &Hyperparameters,
    seed: u64,
    mut observer: impl FnMut(&EpochLog),
) -> Result<NetworkParameters> {
    hyper.validate()?;
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("training corpus is empty".into()));
    }
    if let Some(pair) = pairs.iter().find(|pair| pair.label.p() != hyper.p) {
        return Err(Error::SizeMismatch {
            expected: hyper.p,
            found: pair.label.p(),
        });
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, INIT_STREAM));
    let mut params = build_network(hyper, &mut init_rng)?;
    let mut adam = Adam::new(hyper.learning_rate, params.values.len());
    let start = Instant::now();
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    for epoch in 0..hyper.epochs {
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(derive_seed_path(seed, &[SHUFFLE_STREAM, epoch as u64]));
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let refs: Vec<&TrainingPair> = chunk.iter().map(|&k| &pairs[k]).collect();
            let batch = Batch::from_pairs(hyper.p, &refs)?;
            let mut mask_rng = ChaCha8Rng::seed_from_u64(derive_seed_path(
                seed,
                &[DROPOUT_STREAM, epoch as u64, b as u64],
            ));
            let masks = DropoutMasks::sample(hyper, batch.len(), &mut mask_rng);
            let (loss, grad) = params.loss_and_gradient(&batch, &masks);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            total += loss * batch.len() as f64;
            adam.update(&mut params.values, &grad);
        }
        observer(&EpochLog {
            epoch,
            mean_loss: total / pairs.len() as f64,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(params)
}
