//! Self-contained demo experiments: the 2-D two-Gaussian comparison of a
//! fixed isotropic base against a learned mixture base, and the two-digit
//! embedding demo (K=2 autoencoder + 3-component mixture). The CLI and the
//! acceptance suite both drive these.

use crate::autoencoder::{
    encode_dataset, train_stage1, Activation, AdamConfig, DenseAutoencoder, LatentMapping,
    TrainConfig,
};
use crate::datasets::{gen_two_gaussian_toy, synthetic_digits, LabeledDataset};
use crate::error::Result;
use crate::gmm::{self, GaussianMixture};
use crate::implicit::{
    train_implicit_ml, BaseDistribution, ImplicitModel, ImplicitTrainConfig, Mapping,
};
use crate::invertible::InvertibleNet;
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone)]
pub struct Fig1Config {
    pub n_train: usize,
    pub n_test: usize,
    pub means: [[f64; 2]; 2],
    pub cov_scale: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub base_components: usize,
    pub base_refit_interval: usize,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config {
            n_train: 2000,
            n_test: 500,
            means: [[-3.0, 0.0], [3.0, 0.0]],
            cov_scale: 0.5,
            epochs: 150,
            learning_rate: 0.02,
            base_components: 2,
            base_refit_interval: 5,
        }
    }
}

/// One trained run (fixed or learned base) with everything the overlay
/// plots need.
#[derive(Debug, Clone)]
pub struct Fig1Run {
    pub model: ImplicitModel,
    pub trace: Vec<f64>,
    /// Held-out average log-likelihood.
    pub test_log_likelihood: f64,
    /// Draws from the base distribution.
    pub latent_draws: Vec<Vec<f64>>,
    /// Decoded samples in data space.
    pub generated: Vec<Vec<f64>>,
    /// Training observations mapped to the latent space.
    pub embedded: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct Fig1Outcome {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub fixed: Fig1Run,
    pub learned: Fig1Run,
    /// Mixture fitted directly on the raw observations (the oracle the
    /// learned-base run should match).
    pub oracle_test_log_likelihood: f64,
}

/// Train the square linear map twice on the same toy data: once against a
/// frozen isotropic base, once alternating with mixture refits.
pub fn run_fig1(cfg: &Fig1Config, rng: &SeededRng) -> Result<Fig1Outcome> {
    let mut data_rng = rng.substream("fig1-data");
    let train = gen_two_gaussian_toy(&mut data_rng, cfg.n_train, cfg.means, cfg.cov_scale);
    let test = gen_two_gaussian_toy(&mut data_rng, cfg.n_test, cfg.means, cfg.cov_scale);
    let train_vecs = train.vectors();
    let test_vecs = test.vectors();

    let init_net = || {
        InvertibleNet::linear(
            Matrix::from_rows(&[vec![1.0, 0.02], vec![-0.02, 1.0]]),
            vec![0.0; 2],
        )
    };
    let run = |learn_base: bool, rng: &mut SeededRng| -> Result<Fig1Run> {
        let mut net = init_net();
        let mut base = GaussianMixture::standard(2);
        let train_cfg = ImplicitTrainConfig {
            epochs: cfg.epochs,
            adam: AdamConfig {
                learning_rate: cfg.learning_rate,
                ..AdamConfig::default()
            },
            learn_base,
            base_refit_interval: cfg.base_refit_interval,
            base_components: cfg.base_components,
            ..ImplicitTrainConfig::default()
        };
        let trace = train_implicit_ml(&mut net, &mut base, &train_vecs, &train_cfg, rng)?;
        let model = ImplicitModel::new(
            Mapping::Invertible(net),
            BaseDistribution::Gmm(base),
        )?;
        let test_log_likelihood = model.mean_model_log_pdf(&test_vecs)?;
        let mut sample_rng = rng.substream("fig1-samples");
        let (latent_draws, _) = match &model.base {
            BaseDistribution::Gmm(g) => g.sample(&mut sample_rng, 500),
            BaseDistribution::Hmm(_) => unreachable!("fig1 uses a mixture base"),
        };
        let generated = latent_draws
            .iter()
            .map(|h| model.mapping.decode(h))
            .collect::<Result<Vec<_>>>()?;
        let embedded = model.mapping.encode_batch(&train_vecs)?;
        Ok(Fig1Run {
            model,
            trace,
            test_log_likelihood,
            latent_draws,
            generated,
            embedded,
        })
    };

    let mut fixed_rng = rng.substream("fig1-fixed");
    let fixed = run(false, &mut fixed_rng)?;
    let mut learned_rng = rng.substream("fig1-learned");
    let learned = run(true, &mut learned_rng)?;

    // oracle: mixture fitted directly on the raw observations
    let mut oracle_rng = rng.substream("fig1-oracle");
    let (oracle, _) = gmm::fit_em(
        &train_vecs,
        cfg.base_components,
        &mut oracle_rng,
        200,
        1e-8,
    )?;
    let mut oracle_total = 0.0;
    for x in &test_vecs {
        oracle_total += oracle.log_pdf(x)?;
    }
    let oracle_test_log_likelihood = oracle_total / test_vecs.len() as f64;

    Ok(Fig1Outcome {
        train,
        test,
        fixed,
        learned,
        oracle_test_log_likelihood,
    })
}

#[derive(Debug, Clone)]
pub struct Fig2Config {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
    pub components: usize,
    pub decoded_samples: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config {
            epochs: 250,
            batch_size: 32,
            learning_rate: 1e-3,
            hidden: vec![64],
            components: 3,
            decoded_samples: 24,
        }
    }
}

#[derive(Debug)]
pub struct Fig2Outcome {
    pub model: DenseAutoencoder,
    pub mixture: GaussianMixture,
    pub loss_history: Vec<f64>,
    /// (2-D embedding, digit label) per training item.
    pub embeddings: Vec<(Vec<f64>, u8)>,
    /// Mixture component assignment per training item.
    pub assignments: Vec<usize>,
    /// Majority-label purity of the component assignments.
    pub purity: f64,
    /// Decoded mixture samples with their component labels.
    pub decoded: Vec<(Vec<f64>, usize)>,
}

/// K=2 autoencoder on two-class digit data, then a 3-component mixture on
/// the embeddings.
pub fn run_fig2(data: &LabeledDataset, cfg: &Fig2Config, rng: &SeededRng) -> Result<Fig2Outcome> {
    let vectors = data.vectors();
    let labels = data.labels().expect("fig2 data must be labeled");

    let mut ae_rng = rng.substream("fig2-ae");
    let mut model = DenseAutoencoder::from_spec(
        data.dim,
        &cfg.hidden,
        2,
        Activation::Tanh,
        Activation::Sigmoid,
        &mut ae_rng,
    );
    let loss_history = train_stage1(
        &mut model,
        &vectors,
        &TrainConfig {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            adam: AdamConfig {
                learning_rate: cfg.learning_rate,
                ..AdamConfig::default()
            },
        },
        &mut ae_rng,
    )?;

    let embedded = encode_dataset(&model, &vectors)?;
    let mut base_rng = rng.substream("fig2-base");
    let (mixture, _) = gmm::fit_em(&embedded, cfg.components, &mut base_rng, 200, 1e-8)?;

    let mut assignments = Vec::with_capacity(embedded.len());
    for h in &embedded {
        let resp = mixture.responsibilities(h)?;
        let best = resp
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        assignments.push(best);
    }
    let purity = label_purity(&assignments, &labels, cfg.components);

    let mut sample_rng = rng.substream("fig2-samples");
    let (latents, comp_labels) = mixture.sample(&mut sample_rng, cfg.decoded_samples);
    let mut decoded = Vec::with_capacity(latents.len());
    for (h, c) in latents.iter().zip(comp_labels) {
        decoded.push((model.decode(h)?, c));
    }

    Ok(Fig2Outcome {
        model,
        mixture,
        loss_history,
        embeddings: embedded.into_iter().zip(labels).collect(),
        assignments,
        purity,
        decoded,
    })
}

/// Fraction of items whose component's majority label matches their own.
pub fn label_purity(assignments: &[usize], labels: &[u8], components: usize) -> f64 {
    let mut counts = vec![std::collections::BTreeMap::<u8, usize>::new(); components];
    for (&a, &l) in assignments.iter().zip(labels) {
        *counts[a].entry(l).or_default() += 1;
    }
    let majority: usize = counts
        .iter()
        .map(|c| c.values().copied().max().unwrap_or(0))
        .sum();
    majority as f64 / assignments.len() as f64
}

/// The bundled offline stand-in for the two-digit demo.
pub fn fig2_fallback_dataset(rng: &SeededRng, n: usize) -> LabeledDataset {
    let mut data_rng = rng.substream("fig2-data");
    synthetic_digits(&mut data_rng, n)
}
