//! Two-stage latent generative modeling toolkit: train an autoencoder
//! (dense, convolutional, or a tied invertible perceptron), fit a
//! multimodal base distribution (full-covariance Gaussian mixture or
//! Gaussian-emission HMM) on the latent embeddings, evaluate exact
//! change-of-variables likelihoods for invertible mappings, score models
//! with kernel density estimates, and run an audio chunk/overlap-add
//! generation pipeline.

pub mod audio;
pub mod autoencoder;
pub mod bundle;
pub mod cli;
pub mod cluster;
pub mod datasets;
pub mod demos;
pub mod error;
pub mod gmm;
pub mod hmm;
pub mod implicit;
pub mod invertible;
pub mod kde;
pub mod numerics;

#[cfg(test)]
pub(crate) mod test_util;

pub use error::{Error, Result};
