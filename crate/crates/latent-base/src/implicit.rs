//! Implicit-model likelihood evaluation and direct maximum-likelihood
//! training. A model pairs a latent mapping with a base distribution; when
//! the mapping is an invertible net the density is exact:
//!
//!   log p(x) = log p0(f^-1(x)) - logvol(f, f^-1(x))
//!
//! where `logvol` is the forward map's log-volume expansion (the inverse
//! map's Jacobian factor is its reciprocal, hence the subtraction — the one
//! place the sign convention is fixed). The proxy likelihood keeps only the
//! base term, which is what remains available for mappings without a
//! tractable volume.

use crate::autoencoder::{AdamConfig, AdamState, Conv1dAutoencoder, DenseAutoencoder, LatentMapping, TiedInvertibleNet, TrainableModel};
use crate::error::{Error, Result};
use crate::gmm::{self, GaussianMixture};
use crate::hmm::{GaussianHMM, SequenceEmbedding};
use crate::invertible::InvertibleNet;
use crate::numerics::{Matrix, SeededRng};

/// Forward mapping of an implicit model.
#[derive(Debug, Clone)]
pub enum Mapping {
    Invertible(InvertibleNet),
    Dense(DenseAutoencoder),
    Conv1d(Conv1dAutoencoder),
}

impl Mapping {
    pub fn latent_dim(&self) -> usize {
        match self {
            Mapping::Invertible(net) => net.latent_dim(),
            Mapping::Dense(m) => m.latent_dim(),
            Mapping::Conv1d(m) => m.latent_dim(),
        }
    }

    pub fn data_dim(&self) -> usize {
        match self {
            Mapping::Invertible(net) => net.output_dim(),
            Mapping::Dense(m) => m.data_dim(),
            Mapping::Conv1d(m) => m.data_dim(),
        }
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Mapping::Invertible(net) => net.inverse(x),
            Mapping::Dense(m) => m.encode(x),
            Mapping::Conv1d(m) => m.encode(x),
        }
    }

    pub fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        match self {
            Mapping::Invertible(net) => net.forward(h),
            Mapping::Dense(m) => m.decode(h),
            Mapping::Conv1d(m) => m.decode(h),
        }
    }

    pub fn encode_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        match self {
            Mapping::Invertible(net) => {
                let grams = net.gram_solvers()?;
                xs.iter().map(|x| net.inverse_with(&grams, x)).collect()
            }
            Mapping::Dense(m) => m.encode_batch(xs),
            Mapping::Conv1d(m) => m.encode_batch(xs),
        }
    }

    pub fn as_invertible(&self) -> Option<&InvertibleNet> {
        match self {
            Mapping::Invertible(net) => Some(net),
            _ => None,
        }
    }
}

/// Base distribution over the latent space.
#[derive(Debug, Clone)]
pub enum BaseDistribution {
    Gmm(GaussianMixture),
    Hmm(GaussianHMM),
}

impl BaseDistribution {
    pub fn dim(&self) -> usize {
        match self {
            BaseDistribution::Gmm(g) => g.dim(),
            BaseDistribution::Hmm(h) => h.dim(),
        }
    }

    /// Log-density of a single latent vector. For the sequential base this
    /// is the one-frame marginal (initial-state mixture of emissions).
    pub fn log_pdf(&self, h: &[f64]) -> Result<f64> {
        match self {
            BaseDistribution::Gmm(g) => g.log_pdf(h),
            BaseDistribution::Hmm(m) => {
                m.log_likelihood(&SequenceEmbedding::new(vec![h.to_vec()]))
            }
        }
    }
}

/// Persisted pairing of a trained mapping with a fitted base distribution.
#[derive(Debug, Clone)]
pub struct ImplicitModel {
    pub mapping: Mapping,
    pub base: BaseDistribution,
}

/// Sequence likelihood result; `includes_volume` is false when the mapping
/// has no tractable volume term (proxy mode).
#[derive(Debug, Clone, Copy)]
pub struct SequenceLogPdf {
    pub log_pdf: f64,
    pub includes_volume: bool,
}

impl ImplicitModel {
    pub fn new(mapping: Mapping, base: BaseDistribution) -> Result<Self> {
        if mapping.latent_dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: mapping.latent_dim(),
                actual: base.dim(),
                context: "base distribution dimension",
            });
        }
        Ok(ImplicitModel { mapping, base })
    }

    /// Exact model log-density: base density at the pre-image minus the
    /// forward log-volume expansion. Requires an invertible mapping.
    pub fn model_log_pdf(&self, x: &[f64]) -> Result<f64> {
        let net = self
            .mapping
            .as_invertible()
            .ok_or(Error::ExactVolumeUnavailable)?;
        let h = net.inverse(x)?;
        Ok(self.base.log_pdf(&h)? - net.log_volume(&h)?)
    }

    /// Base log-density of the embedding, omitting the volume term.
    pub fn proxy_log_pdf(&self, x: &[f64]) -> Result<f64> {
        let h = self.mapping.encode(x)?;
        self.base.log_pdf(&h)
    }

    /// Mean exact log-density over a dataset (shared per-batch
    /// factorizations).
    pub fn mean_model_log_pdf(&self, xs: &[Vec<f64>]) -> Result<f64> {
        let net = self
            .mapping
            .as_invertible()
            .ok_or(Error::ExactVolumeUnavailable)?;
        let grams = net.gram_solvers()?;
        let mut total = 0.0;
        for x in xs {
            let h = net.inverse_with(&grams, x)?;
            total += self.base.log_pdf(&h)? - net.log_volume(&h)?;
        }
        Ok(total / xs.len() as f64)
    }

    pub fn mean_proxy_log_pdf(&self, xs: &[Vec<f64>]) -> Result<f64> {
        let hs = self.mapping.encode_batch(xs)?;
        let mut total = 0.0;
        for h in &hs {
            total += self.base.log_pdf(h)?;
        }
        Ok(total / xs.len() as f64)
    }

    /// Sequence log-likelihood: HMM likelihood of the encoded frames plus
    /// per-frame volume terms when the mapping is invertible.
    pub fn sequence_log_pdf(&self, chunks: &[Vec<f64>]) -> Result<SequenceLogPdf> {
        let hmm = match &self.base {
            BaseDistribution::Hmm(h) => h,
            BaseDistribution::Gmm(_) => {
                return Err(Error::Config(
                    "sequence_log_pdf requires an HMM base distribution".into(),
                ))
            }
        };
        let frames = self.mapping.encode_batch(chunks)?;
        let base_ll = hmm.log_likelihood(&SequenceEmbedding::new(frames.clone()))?;
        match self.mapping.as_invertible() {
            Some(net) => {
                let mut vol = 0.0;
                for h in &frames {
                    vol += net.log_volume(h)?;
                }
                Ok(SequenceLogPdf {
                    log_pdf: base_ll - vol,
                    includes_volume: true,
                })
            }
            None => Ok(SequenceLogPdf {
                log_pdf: base_ll,
                includes_volume: false,
            }),
        }
    }

    /// Decode `n` base-distribution draws; labels are mixture components or
    /// HMM states.
    pub fn sample(&self, rng: &mut SeededRng, n: usize) -> Result<(Vec<Vec<f64>>, Vec<usize>)> {
        let (latents, labels) = match &self.base {
            BaseDistribution::Gmm(g) => g.sample(rng, n),
            BaseDistribution::Hmm(h) => {
                let (seq, states) = h.sample(rng, n);
                (seq.frames, states)
            }
        };
        let mut out = Vec::with_capacity(n);
        for h in &latents {
            out.push(self.mapping.decode(h)?);
        }
        Ok((out, labels))
    }
}

/// Configuration for direct gradient ascent on the implicit-likelihood
/// objective (square invertible mappings).
#[derive(Debug, Clone)]
pub struct ImplicitTrainConfig {
    pub epochs: usize,
    pub adam: AdamConfig,
    /// When false the base stays frozen; when true it is refit by EM every
    /// `base_refit_interval` epochs.
    pub learn_base: bool,
    pub base_refit_interval: usize,
    pub base_components: usize,
    pub em_max_iters: usize,
    pub em_tol: f64,
}

impl Default for ImplicitTrainConfig {
    fn default() -> Self {
        ImplicitTrainConfig {
            epochs: 200,
            adam: AdamConfig {
                learning_rate: 0.02,
                ..AdamConfig::default()
            },
            learn_base: false,
            base_refit_interval: 5,
            base_components: 2,
            em_max_iters: 100,
            em_tol: 1e-8,
        }
    }
}

/// Mean objective `log p0(f^-1(x)) - logvol(x)` over the batch, plus its
/// gradient with respect to every net parameter (weights and biases,
/// stage-ordered as in `TiedInvertibleNet`). Square nets only: the gradient
/// backpropagates through the inverse pass.
pub fn implicit_objective_and_grads(
    net: &InvertibleNet,
    base: &GaussianMixture,
    batch: &[Vec<f64>],
) -> Result<(f64, Vec<Vec<f64>>)> {
    if !net.is_square() {
        return Err(Error::Config(
            "implicit ML training needs a square invertible net".into(),
        ));
    }
    assert!(!batch.is_empty());
    let stages = net.stages();
    let n_stages = stages.len();
    let grams = net.gram_solvers()?;

    // Gradient of -0.5*log det(W^T W) per stage: -W (W^T W)^-1, constant
    // over the batch.
    let mut vol_weight_grads: Vec<Matrix> = Vec::with_capacity(n_stages);
    for (stage, gram) in stages.iter().zip(&grams) {
        let d = stage.linear.in_dim();
        let mut ginv = Matrix::zeros(d, d);
        for c in 0..d {
            let mut unit = vec![0.0; d];
            unit[c] = 1.0;
            let col = gram.solve(&unit)?;
            for r in 0..d {
                ginv[(r, c)] = col[r];
            }
        }
        vol_weight_grads.push(stage.linear.weight.matmul(&ginv));
    }

    let mut grads: Vec<Vec<f64>> = stages
        .iter()
        .flat_map(|s| {
            [
                vec![0.0; s.linear.weight.data().len()],
                vec![0.0; s.linear.bias.len()],
            ]
        })
        .collect();
    let inv_n = 1.0 / batch.len() as f64;
    let mut objective = 0.0;

    for x in batch {
        // inverse pass with caches
        let mut z_cache: Vec<Vec<f64>> = vec![Vec::new(); n_stages];
        let mut v_cache: Vec<Vec<f64>> = vec![Vec::new(); n_stages];
        let mut cur = x.clone();
        for s in (0..n_stages).rev() {
            let stage = &stages[s];
            let z: Vec<f64> = match &stage.activation {
                Some(act) => cur.iter().map(|&y| act.invert(y)).collect(),
                None => cur,
            };
            let centered: Vec<f64> =
                z.iter().zip(&stage.linear.bias).map(|(a, b)| a - b).collect();
            let wt = stage.linear.weight.matvec_transpose(&centered);
            let v = grams[s].solve(&wt)?;
            z_cache[s] = z;
            cur = v.clone();
            v_cache[s] = v;
        }
        let latent = &v_cache[0];

        // objective: base term minus volume terms at the inverse-path
        // pre-activations
        let mut sample_obj = base.log_pdf(latent)?;
        for (s, stage) in stages.iter().enumerate() {
            sample_obj -= 0.5 * grams[s].log_det();
            if let Some(act) = &stage.activation {
                sample_obj -= z_cache[s]
                    .iter()
                    .map(|&z| act.log_abs_deriv(z))
                    .sum::<f64>();
            }
        }
        if !sample_obj.is_finite() {
            return Err(Error::NonFiniteObjective {
                epoch: 0,
                trace: vec![],
            });
        }
        objective += sample_obj * inv_n;

        // backprop outward through the inverse chain
        let mut g = base.grad_log_pdf(latent)?;
        for g_i in g.iter_mut() {
            *g_i *= inv_n;
        }
        for s in 0..n_stages {
            let stage = &stages[s];
            let in_dim = stage.linear.in_dim();
            let u = grams[s].solve(&g)?;
            let wu = stage.linear.weight.matvec(&u);
            {
                let (gw, rest) = grads[2 * s..].split_first_mut().unwrap();
                let gb = &mut rest[0];
                // chain terms: square nets have ~zero residual, so only
                // -(W u) v^T survives; the constant volume gradient is
                // added per sample below.
                for (r, &wur) in wu.iter().enumerate() {
                    gb[r] -= wur;
                    let row = &mut gw[r * in_dim..(r + 1) * in_dim];
                    for c in 0..in_dim {
                        row[c] -= wur * v_cache[s][c];
                    }
                }
                for (slot, vg) in gw.iter_mut().zip(vol_weight_grads[s].data()) {
                    *slot -= vg * inv_n;
                }
            }
            // z adjoint: chain part plus the volume term's direct
            // dependence on the pre-activation
            let mut gz = wu;
            if let Some(act) = &stage.activation {
                for (gzi, &z) in gz.iter_mut().zip(&z_cache[s]) {
                    *gzi += act.neg_log_deriv_grad(z) * inv_n;
                    *gzi /= act.deriv(z);
                }
            }
            g = gz;
        }
    }
    Ok((objective, grads))
}

/// Gradient ascent on the implicit maximum-likelihood objective for a
/// square invertible net, optionally alternating with EM refits of the
/// mixture base. Returns the per-epoch mean objective trace.
pub fn train_implicit_ml(
    net: &mut InvertibleNet,
    base: &mut GaussianMixture,
    data: &[Vec<f64>],
    cfg: &ImplicitTrainConfig,
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    assert!(!data.is_empty());
    let mut wrapper = TiedInvertibleNet::new(net.clone());
    let shapes: Vec<usize> = (0..wrapper.num_tensors())
        .map(|i| wrapper.tensor(i).len())
        .collect();
    let mut adam = AdamState::new(&shapes, cfg.adam.clone());
    let mut trace = Vec::with_capacity(cfg.epochs);

    let refit = |net: &InvertibleNet, base: &mut GaussianMixture, rng: &mut SeededRng| -> Result<()> {
        let embeddings = Mapping::Invertible(net.clone()).encode_batch(data)?;
        let (fitted, _) = gmm::fit_em(
            &embeddings,
            cfg.base_components,
            rng,
            cfg.em_max_iters,
            cfg.em_tol,
        )?;
        *base = fitted;
        Ok(())
    };

    if cfg.learn_base {
        refit(wrapper.net(), base, rng)?;
    }
    for epoch in 0..cfg.epochs {
        let (objective, grads) = implicit_objective_and_grads(wrapper.net(), base, data)
            .map_err(|e| match e {
                Error::NonFiniteObjective { .. } => Error::NonFiniteObjective {
                    epoch,
                    trace: trace.clone(),
                },
                other => other,
            })?;
        if !objective.is_finite() {
            return Err(Error::NonFiniteObjective { epoch, trace });
        }
        // ascent: feed the negated gradient to the minimizer
        let neg: Vec<Vec<f64>> = grads
            .into_iter()
            .map(|g| g.into_iter().map(|v| -v).collect())
            .collect();
        adam.step(&mut wrapper, &neg);
        if cfg.learn_base && (epoch + 1) % cfg.base_refit_interval == 0 {
            refit(wrapper.net(), base, rng)?;
        }
        trace.push(objective);
    }
    if cfg.learn_base {
        refit(wrapper.net(), base, rng)?;
    }
    *net = wrapper.into_net();
    Ok(trace)
}
