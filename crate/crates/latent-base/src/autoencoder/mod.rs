//! Stage-1 training: reconstruction-error minimization over autoencoder
//! parameters with manual backpropagation and Adam. Three architectures
//! share the same training loop: untied dense stacks, untied 1-D
//! convolutional stacks for audio chunks, and the tied invertible perceptron
//! whose encoder is the exact inverse of its decoder.

mod adam;
mod conv1d;
mod dense;
mod tied;

pub use adam::{AdamConfig, AdamState};
pub use conv1d::{Conv1dAutoencoder, Conv1dConfig};
pub use dense::{DenseAutoencoder, DenseLayer};
pub use tied::TiedInvertibleNet;

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Elementwise activation tags for the untied architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation.
    pub fn deriv(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// A trained (or trainable) map between data space and latent space.
pub trait LatentMapping {
    fn latent_dim(&self) -> usize;
    fn data_dim(&self) -> usize;
    fn encode(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn decode(&self, h: &[f64]) -> Result<Vec<f64>>;

    /// Batch encoding; implementations override to share per-batch
    /// precomputation.
    fn encode_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.encode(x)).collect()
    }
}

/// Parameter access and analytic gradients for stage-1 training. Tensors
/// are indexed flat slices so the optimizer and finite-difference tests stay
/// architecture-agnostic.
pub trait TrainableModel: LatentMapping {
    fn num_tensors(&self) -> usize;
    fn tensor(&self, i: usize) -> &[f64];
    fn tensor_mut(&mut self, i: usize) -> &mut [f64];

    /// Mean squared reconstruction error over the batch and its gradient
    /// with respect to every parameter tensor.
    fn loss_and_grads(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)>;
}

/// Mean over the batch of the squared L2 reconstruction error.
pub fn reconstruction_loss<M: LatentMapping + ?Sized>(
    model: &M,
    batch: &[Vec<f64>],
) -> Result<f64> {
    assert!(!batch.is_empty(), "batch must be nonempty");
    let mut total = 0.0;
    for x in batch {
        let recon = model.decode(&model.encode(x)?)?;
        if recon.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: recon.len(),
                context: "reconstruction length",
            });
        }
        total += recon
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
    }
    Ok(total / batch.len() as f64)
}

/// One latent vector per input, order preserving.
pub fn encode_dataset<M: LatentMapping + ?Sized>(
    model: &M,
    dataset: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    model.encode_batch(dataset)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 128,
            adam: AdamConfig::default(),
        }
    }
}

/// Minibatch training loop: seeded shuffle each epoch, Adam updates, and a
/// full-dataset loss recorded per epoch. Deterministic under a fixed seed.
/// Aborts with the partial history if the loss leaves the finite range
/// (learning rate too high).
pub fn train_stage1<M: TrainableModel>(
    model: &mut M,
    dataset: &[Vec<f64>],
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    assert!(!dataset.is_empty(), "dataset must be nonempty");
    assert!(cfg.epochs >= 1, "epochs must be >= 1");
    let batch_size = cfg.batch_size.max(1);
    let shapes: Vec<usize> = (0..model.num_tensors())
        .map(|i| model.tensor(i).len())
        .collect();
    let mut adam = AdamState::new(&shapes, cfg.adam.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<Vec<f64>> = chunk.iter().map(|&i| dataset[i].clone()).collect();
            let (loss, grads) = model.loss_and_grads(&batch)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, history });
            }
            adam.step(model, &grads);
        }
        let epoch_loss = reconstruction_loss(model, dataset)?;
        if !epoch_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, history });
        }
        history.push(epoch_loss);
    }
    Ok(history)
}
