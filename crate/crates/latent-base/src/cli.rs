//! Command-line orchestration of the two-stage workflow: stage-1 training,
//! base fitting, sampling, KDE scoring, the two demo experiments, and the
//! audio pipeline. Every command takes `--seed` and draws named substreams
//! from it, so rerunning one stage never perturbs another. An optional
//! `--config` JSON file mirrors the flags; explicit flags win.

use crate::audio::{self, AudioSignal};
use crate::autoencoder::{
    train_stage1, Activation, AdamConfig, Conv1dAutoencoder, Conv1dConfig, DenseAutoencoder,
    TiedInvertibleNet, TrainConfig,
};
use crate::bundle::{load_bundle, save_bundle, ModelBundle};
use crate::datasets::{self, LabeledDataset};
use crate::demos;
use crate::error::{Error, Result};
use crate::gmm;
use crate::hmm::{self, SequenceEmbedding};
use crate::implicit::{BaseDistribution, Mapping};
use crate::invertible::InvertibleNet;
use crate::kde::{kde_compare, kde_rows_to_csv, KdeConfig};
use crate::numerics::SeededRng;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(
    name = "latent-base",
    about = "Two-stage latent generative modeling: train an autoencoder, fit a multimodal base distribution, sample, and score"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage 1: train an autoencoder and write a model bundle.
    TrainAe(TrainAeArgs),
    /// Stage 2: fit a GMM or HMM base distribution on the embeddings.
    FitBase(FitBaseArgs),
    /// Decode samples from a complete bundle into a CSV.
    Sample(SampleArgs),
    /// KDE-score a bundle against a test set.
    Score(ScoreArgs),
    /// 2-D toy comparison: fixed isotropic base vs learned mixture base.
    DemoFig1(DemoFig1Args),
    /// Two-digit demo: K=2 embeddings with a 3-component mixture.
    DemoFig2(DemoFig2Args),
    /// Chunk a WAV file into a windowed training dataset.
    AudioPrep(AudioPrepArgs),
    /// Generate audio from a conv+HMM bundle via overlap-add.
    AudioGen(AudioGenArgs),
    /// Emit a magnitude spectrogram CSV for a WAV file.
    Spectrogram(SpectrogramArgs),
}

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct CommonArgs {
    /// Seed for all randomness (mandatory; substreams are derived per stage).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for emitted files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// JSON file with the same fields as the flags; flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    fn merged(&self, file: Option<&Self>) -> Result<(u64, PathBuf)> {
        let seed = self
            .seed
            .or(file.and_then(|f| f.seed))
            .ok_or_else(|| Error::Config("--seed is required".into()))?;
        let out_dir = self
            .out_dir
            .clone()
            .or_else(|| file.and_then(|f| f.out_dir.clone()))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok((seed, out_dir))
    }
}

/// Load the sidecar config file for a command, if any.
fn load_config_file<T: for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> Result<Option<T>> {
    match path {
        None => Ok(None),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
            let value = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad config {}: {e}", p.display())))?;
            Ok(Some(value))
        }
    }
}

macro_rules! pick {
    ($cli:expr, $file:expr, $field:ident) => {
        $cli.$field
            .clone()
            .or_else(|| $file.as_ref().and_then(|f| f.$field.clone()))
    };
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn write_vectors_csv(path: &Path, rows: &[Vec<f64>], labels: Option<&[usize]>) -> Result<()> {
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let mut fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        if let Some(l) = labels {
            fields.push(format!("{}", l[i]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn write_series_csv(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------- train-ae

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct TrainAeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    /// Dataset cache (.csv or raw .f64 with sidecar manifest).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Treat the final CSV column as a label.
    #[arg(long)]
    pub labeled: Option<bool>,
    /// IDX image file (paired with --mnist-labels).
    #[arg(long)]
    pub mnist_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_labels: Option<PathBuf>,
    /// Generate this many synthetic two-class digits instead of reading data.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Architecture: dense | conv | invertible.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Comma-separated hidden widths (dense), or the single hidden width of
    /// the invertible perceptron.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Conv architecture: comma-separated channel widths.
    #[arg(long)]
    pub conv_channels: Option<String>,
    /// Conv architecture: comma-separated strides.
    #[arg(long)]
    pub conv_strides: Option<String>,
    #[arg(long)]
    pub filter_len: Option<usize>,
    /// Bundle directory to write (default <out-dir>/model).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_usize_list(text: &str, what: &str) -> Result<Vec<usize>> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {what} entry: {s}")))
        })
        .collect()
}

fn load_training_data(
    data: &Option<PathBuf>,
    labeled: bool,
    mnist_images: &Option<PathBuf>,
    mnist_labels: &Option<PathBuf>,
    synthetic: &Option<usize>,
    rng: &SeededRng,
) -> Result<LabeledDataset> {
    match (data, mnist_images, synthetic) {
        (Some(path), _, _) => datasets::load_cache(path, labeled),
        (None, Some(images), _) => {
            let labels = mnist_labels
                .as_ref()
                .ok_or_else(|| Error::Config("--mnist-labels required with --mnist-images".into()))?;
            datasets::load_mnist_idx(images, labels)
        }
        (None, None, Some(n)) => Ok(demos::fig2_fallback_dataset(rng, *n)),
        _ => Err(Error::Config(
            "provide --data, --mnist-images/--mnist-labels, or --synthetic".into(),
        )),
    }
}

pub fn cmd_train_ae(args: &TrainAeArgs) -> Result<()> {
    let file: Option<TrainAeArgs> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args
        .common
        .merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);
    let mut train_rng = rng.substream("ae");

    let data = load_training_data(
        &pick!(args, file, data),
        pick!(args, file, labeled).unwrap_or(false),
        &pick!(args, file, mnist_images),
        &pick!(args, file, mnist_labels),
        &pick!(args, file, synthetic),
        &rng.substream("data"),
    )?;
    if data.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }

    let arch = pick!(args, file, arch).unwrap_or_else(|| "dense".into());
    let latent_dim = pick!(args, file, latent_dim).unwrap_or(2);
    let epochs = pick!(args, file, epochs).unwrap_or(20);
    let lr = pick!(args, file, lr).unwrap_or(1e-3);
    let batch_size = pick!(args, file, batch_size).unwrap_or(128);
    let train_cfg = TrainConfig {
        epochs,
        batch_size,
        adam: AdamConfig {
            learning_rate: lr,
            ..AdamConfig::default()
        },
    };
    let vectors = data.vectors();

    let (mapping, history) = match arch.as_str() {
        "dense" => {
            let hidden = match pick!(args, file, hidden) {
                Some(h) => parse_usize_list(&h, "hidden")?,
                None => vec![64],
            };
            let output_act = if vectors.iter().flatten().all(|&v| (0.0..=1.0).contains(&v)) {
                Activation::Sigmoid
            } else {
                Activation::Identity
            };
            let mut model = DenseAutoencoder::from_spec(
                data.dim,
                &hidden,
                latent_dim,
                Activation::Tanh,
                output_act,
                &mut train_rng,
            );
            let history = train_stage1(&mut model, &vectors, &train_cfg, &mut train_rng)?;
            (Mapping::Dense(model), history)
        }
        "invertible" => {
            let hidden = match pick!(args, file, hidden) {
                Some(h) => parse_usize_list(&h, "hidden")?[0],
                None => 600,
            };
            let net = InvertibleNet::perceptron(latent_dim, hidden, data.dim, &mut train_rng);
            let mut tied = TiedInvertibleNet::new(net);
            let history = train_stage1(&mut tied, &vectors, &train_cfg, &mut train_rng)?;
            (Mapping::Invertible(tied.into_net()), history)
        }
        "conv" => {
            let mut cfg = Conv1dConfig {
                input_len: data.dim,
                ..Conv1dConfig::default()
            };
            if let Some(ch) = pick!(args, file, conv_channels) {
                cfg.channels = parse_usize_list(&ch, "conv-channels")?;
                let stages = cfg.channels.len() - 1;
                cfg.encoder_acts = vec![Activation::Tanh; stages];
                *cfg.encoder_acts.last_mut().unwrap() = Activation::Identity;
                cfg.decoder_acts = vec![Activation::Tanh; stages];
            }
            if let Some(st) = pick!(args, file, conv_strides) {
                cfg.strides = parse_usize_list(&st, "conv-strides")?;
            }
            if let Some(f) = pick!(args, file, filter_len) {
                cfg.filter_len = f;
            }
            let mut model = Conv1dAutoencoder::new(cfg, &mut train_rng)?;
            let history = train_stage1(&mut model, &vectors, &train_cfg, &mut train_rng)?;
            (Mapping::Conv1d(model), history)
        }
        other => return Err(Error::Config(format!("unknown arch {other}"))),
    };

    let training = serde_json::json!({
        "arch": arch,
        "epochs": epochs,
        "learning_rate": lr,
        "batch_size": batch_size,
        "n_items": data.len(),
        "data_dim": data.dim,
    });
    let bundle = ModelBundle::new(seed, mapping, None, training);
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("model"));
    save_bundle(&bundle, &out)?;
    write_series_csv(&out_dir.join("train_loss.csv"), "epoch,loss", &history)?;
    println!(
        "trained {arch} autoencoder: {} epochs, final loss {}",
        history.len(),
        history.last().unwrap()
    );
    println!("bundle written to {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------- fit-base

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct FitBaseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub labeled: Option<bool>,
    #[arg(long)]
    pub mnist_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_labels: Option<PathBuf>,
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Base kind: gmm | hmm.
    #[arg(long)]
    pub base: Option<String>,
    /// Mixture components (gmm).
    #[arg(long)]
    pub components: Option<usize>,
    /// HMM states.
    #[arg(long)]
    pub states: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn cmd_fit_base(args: &FitBaseArgs) -> Result<()> {
    let file: Option<FitBaseArgs> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);
    let mut base_rng = rng.substream("base");

    let bundle_path = pick!(args, file, bundle)
        .ok_or_else(|| Error::Config("--bundle is required".into()))?;
    let mut bundle = load_bundle(&bundle_path)?;
    let data = load_training_data(
        &pick!(args, file, data),
        pick!(args, file, labeled).unwrap_or(false),
        &pick!(args, file, mnist_images),
        &pick!(args, file, mnist_labels),
        &pick!(args, file, synthetic),
        &rng.substream("data"),
    )?;
    let embeddings = bundle.mapping.encode_batch(&data.vectors())?;

    let base_kind = pick!(args, file, base).unwrap_or_else(|| "gmm".into());
    let max_iters = pick!(args, file, max_iters).unwrap_or(200);
    let tol = pick!(args, file, tol).unwrap_or(1e-6);

    let trace = match base_kind.as_str() {
        "gmm" => {
            let m = pick!(args, file, components).unwrap_or(30);
            let (mixture, trace) = gmm::fit_em(&embeddings, m, &mut base_rng, max_iters, tol)?;
            bundle.set_base(BaseDistribution::Gmm(mixture));
            trace
        }
        "hmm" => {
            if !matches!(bundle.mapping, Mapping::Conv1d(_)) {
                log::warn!(
                    "fitting an HMM on a non-sequential bundle: items are treated as one ordered sequence"
                );
            }
            let s = pick!(args, file, states).unwrap_or(300);
            let seq = SequenceEmbedding::new(embeddings);
            let (model, trace) = hmm::fit_baum_welch(&[seq], s, &mut base_rng, max_iters, tol)?;
            bundle.set_base(BaseDistribution::Hmm(model));
            trace
        }
        other => return Err(Error::Config(format!("unknown base kind {other}"))),
    };

    save_bundle(&bundle, &bundle_path)?;
    write_series_csv(
        &out_dir.join("em_trace.csv"),
        "iteration,log_likelihood",
        &trace,
    )?;
    println!(
        "fitted {base_kind} base in {} iterations, final log-likelihood {}",
        trace.len(),
        trace.last().unwrap()
    );
    Ok(())
}

// ------------------------------------------------------------------ sample

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct SampleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Number of samples (vectors) or frames (sequential bundles).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Audio bundles only: overlap-add the decoded frames into a WAV at
    /// this path instead of writing a CSV.
    #[arg(long)]
    pub wav: Option<PathBuf>,
}

pub fn cmd_sample(args: &SampleArgs) -> Result<()> {
    let file: Option<SampleArgs> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);
    let mut sample_rng = rng.substream("sample");

    let bundle_path = pick!(args, file, bundle)
        .ok_or_else(|| Error::Config("--bundle is required".into()))?;
    let n = pick!(args, file, n).unwrap_or(10);
    let model = load_bundle(&bundle_path)?.into_model()?;
    if let Some(wav_path) = pick!(args, file, wav) {
        let generated = audio::generate_audio(&model, &mut sample_rng, n)?;
        audio::save_wav(&generated.signal, &wav_path)?;
        println!(
            "wrote {} samples ({n} frames) to {}",
            generated.signal.len(),
            wav_path.display()
        );
        return Ok(());
    }
    let (samples, labels) = model.sample(&mut sample_rng, n)?;
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("samples.csv"));
    write_vectors_csv(&out, &samples, Some(&labels))?;
    println!("wrote {n} samples to {}", out.display());
    Ok(())
}

// ------------------------------------------------------------------- score

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct ScoreArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Test set cache (.csv or .f64).
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub labeled: Option<bool>,
    /// Gaussian kernel variance.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Model samples drawn for the score.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let file: Option<ScoreArgs> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);
    let mut sample_rng = rng.substream("sample");

    let bundle_path = pick!(args, file, bundle)
        .ok_or_else(|| Error::Config("--bundle is required".into()))?;
    let test_path =
        pick!(args, file, test).ok_or_else(|| Error::Config("--test is required".into()))?;
    let test = datasets::load_cache(&test_path, pick!(args, file, labeled).unwrap_or(false))?;

    let cfg = KdeConfig {
        bandwidth_variance: pick!(args, file, bandwidth).unwrap_or(0.1),
        samples_per_batch: pick!(args, file, samples).unwrap_or(1000),
    };
    let model = load_bundle(&bundle_path)?.into_model()?;
    let (samples, _) = model.sample(&mut sample_rng, cfg.samples_per_batch)?;
    let name = bundle_path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into());
    let rows = kde_compare(&test.vectors(), &[(name, samples)], &cfg)?;
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("kde_score.csv"));
    std::fs::write(&out, kde_rows_to_csv(&rows))?;
    println!(
        "kde score {} (log {}) written to {}",
        rows[0].kde_score,
        rows[0].log_kde_score,
        out.display()
    );
    Ok(())
}

// -------------------------------------------------------------- demo-fig1

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct DemoFig1Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub components: Option<usize>,
}

pub fn cmd_demo_fig1(args: &DemoFig1Args) -> Result<()> {
    let file: Option<DemoFig1Args> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);

    let cfg = demos::Fig1Config {
        n_train: pick!(args, file, n_train).unwrap_or(2000),
        n_test: pick!(args, file, n_test).unwrap_or(500),
        epochs: pick!(args, file, epochs).unwrap_or(150),
        learning_rate: pick!(args, file, lr).unwrap_or(0.02),
        base_components: pick!(args, file, components).unwrap_or(2),
        ..demos::Fig1Config::default()
    };
    let out = demos::run_fig1(&cfg, &rng)?;

    for (tag, run) in [("fixed", &out.fixed), ("learned", &out.learned)] {
        write_vectors_csv(
            &out_dir.join(format!("fig1_{tag}_data.csv")),
            &out.train.vectors(),
            None,
        )?;
        write_vectors_csv(
            &out_dir.join(format!("fig1_{tag}_generated.csv")),
            &run.generated,
            None,
        )?;
        write_vectors_csv(
            &out_dir.join(format!("fig1_{tag}_latent.csv")),
            &run.latent_draws,
            None,
        )?;
        write_vectors_csv(
            &out_dir.join(format!("fig1_{tag}_embedded.csv")),
            &run.embedded,
            None,
        )?;
    }
    std::fs::write(
        out_dir.join("fig1_summary.csv"),
        format!(
            "run,test_log_likelihood\nfixed,{}\nlearned,{}\noracle,{}\n",
            out.fixed.test_log_likelihood,
            out.learned.test_log_likelihood,
            out.oracle_test_log_likelihood
        ),
    )?;
    println!(
        "fixed-base test log-likelihood:   {}",
        out.fixed.test_log_likelihood
    );
    println!(
        "learned-base test log-likelihood: {}",
        out.learned.test_log_likelihood
    );
    println!(
        "oracle mixture log-likelihood:    {}",
        out.oracle_test_log_likelihood
    );
    Ok(())
}

// -------------------------------------------------------------- demo-fig2

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct DemoFig2Args {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub mnist_images: Option<PathBuf>,
    #[arg(long)]
    pub mnist_labels: Option<PathBuf>,
    /// Synthetic stand-in size when no IDX files are given.
    #[arg(long)]
    pub synthetic: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub components: Option<usize>,
    /// Cap on the number of training images.
    #[arg(long)]
    pub limit: Option<usize>,
}

pub fn cmd_demo_fig2(args: &DemoFig2Args) -> Result<()> {
    let file: Option<DemoFig2Args> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);

    let mut data = match (
        pick!(args, file, mnist_images),
        pick!(args, file, mnist_labels),
    ) {
        (Some(images), Some(labels)) => {
            let full = datasets::load_mnist_idx(&images, &labels)?;
            datasets::filter_classes(&full, &[0, 1])?
        }
        (None, None) => {
            demos::fig2_fallback_dataset(&rng, pick!(args, file, synthetic).unwrap_or(200))
        }
        _ => {
            return Err(Error::Config(
                "provide both --mnist-images and --mnist-labels, or neither".into(),
            ))
        }
    };
    if let Some(limit) = pick!(args, file, limit) {
        data.items.truncate(limit);
    }

    let cfg = demos::Fig2Config {
        epochs: pick!(args, file, epochs).unwrap_or(250),
        learning_rate: pick!(args, file, lr).unwrap_or(1e-3),
        components: pick!(args, file, components).unwrap_or(3),
        ..demos::Fig2Config::default()
    };
    let out = demos::run_fig2(&data, &cfg, &rng)?;

    // embeddings with digit labels
    {
        let rows: Vec<Vec<f64>> = out.embeddings.iter().map(|(h, _)| h.clone()).collect();
        let labels: Vec<usize> = out.embeddings.iter().map(|(_, l)| *l as usize).collect();
        write_vectors_csv(&out_dir.join("fig2_embeddings.csv"), &rows, Some(&labels))?;
    }
    // per-component mean and covariance for ellipse drawing
    {
        let mut text = String::from("weight,mean_x,mean_y,cov_xx,cov_xy,cov_yy\n");
        for m in 0..out.mixture.num_components() {
            let mu = out.mixture.mean(m);
            let cov = out.mixture.covariance(m);
            text.push_str(&format!(
                "{},{},{},{},{},{}\n",
                out.mixture.weights()[m],
                mu[0],
                mu[1],
                cov[(0, 0)],
                cov[(0, 1)],
                cov[(1, 1)]
            ));
        }
        std::fs::write(out_dir.join("fig2_ellipses.csv"), text)?;
    }
    // decoded samples grouped by component
    {
        let rows: Vec<Vec<f64>> = out.decoded.iter().map(|(x, _)| x.clone()).collect();
        let labels: Vec<usize> = out.decoded.iter().map(|(_, c)| *c).collect();
        write_vectors_csv(&out_dir.join("fig2_decoded.csv"), &rows, Some(&labels))?;
    }
    println!("component purity against digit labels: {}", out.purity);
    Ok(())
}

// -------------------------------------------------------------- audio-prep

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct AudioPrepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Output dataset cache (.csv or raw .f64).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_audio_prep(args: &AudioPrepArgs) -> Result<()> {
    let file: Option<AudioPrepArgs> = load_config_file(&args.common.config)?;
    let (_seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let wav = pick!(args, file, wav).ok_or_else(|| Error::Config("--wav is required".into()))?;
    let signal = audio::load_wav(&wav)?;
    let chunks = audio::chunk(&signal)?;
    let ds = LabeledDataset::new(
        chunks.chunks.iter().map(|c| (c.clone(), None)).collect(),
        wav.display().to_string(),
    );
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("chunks.f64"));
    datasets::save_cache(&ds, &out)?;
    println!(
        "wrote {} windowed chunks of {} samples to {}",
        ds.len(),
        audio::CHUNK_LEN,
        out.display()
    );
    Ok(())
}

// --------------------------------------------------------------- audio-gen

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct AudioGenArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub bundle: Option<PathBuf>,
    /// Latent frames to sample; output length is (frames-1)*400 + 800.
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_audio_gen(args: &AudioGenArgs) -> Result<()> {
    let file: Option<AudioGenArgs> = load_config_file(&args.common.config)?;
    let (seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let rng = SeededRng::new(seed);
    let mut sample_rng = rng.substream("sample");

    let bundle_path = pick!(args, file, bundle)
        .ok_or_else(|| Error::Config("--bundle is required".into()))?;
    let frames = pick!(args, file, frames).unwrap_or(19);
    let model = load_bundle(&bundle_path)?.into_model()?;
    let generated = audio::generate_audio(&model, &mut sample_rng, frames)?;
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("generated.wav"));
    audio::save_wav(&generated.signal, &out)?;
    println!(
        "generated {} samples ({} frames, clip fraction {}) to {}",
        generated.signal.len(),
        frames,
        generated.clip_fraction,
        out.display()
    );
    Ok(())
}

// ------------------------------------------------------------- spectrogram

#[derive(Debug, Args, Deserialize, Default, Clone)]
#[serde(default)]
pub struct SpectrogramArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub wav: Option<PathBuf>,
    #[arg(long)]
    pub fft_size: Option<usize>,
    #[arg(long)]
    pub hop: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_spectrogram(args: &SpectrogramArgs) -> Result<()> {
    let file: Option<SpectrogramArgs> = load_config_file(&args.common.config)?;
    let (_seed, out_dir) = args.common.merged(file.as_ref().map(|f| &f.common))?;
    ensure_out_dir(&out_dir)?;
    let wav = pick!(args, file, wav).ok_or_else(|| Error::Config("--wav is required".into()))?;
    let signal = audio::load_wav(&wav)?;
    let grid = audio::spectrogram(
        &signal,
        pick!(args, file, fft_size).unwrap_or(audio::DEFAULT_FFT_SIZE),
        pick!(args, file, hop).unwrap_or(audio::DEFAULT_SPEC_HOP),
    )?;
    let out = pick!(args, file, out).unwrap_or_else(|| out_dir.join("spectrogram.csv"));
    std::fs::write(&out, grid.to_csv())?;
    println!(
        "wrote {} bins x {} frames spectrogram to {}",
        grid.bins,
        grid.frames,
        out.display()
    );
    Ok(())
}

/// Dispatch a parsed command; errors map to the documented exit codes.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::TrainAe(a) => cmd_train_ae(a),
        Command::FitBase(a) => cmd_fit_base(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Score(a) => cmd_score(a),
        Command::DemoFig1(a) => cmd_demo_fig1(a),
        Command::DemoFig2(a) => cmd_demo_fig2(a),
        Command::AudioPrep(a) => cmd_audio_prep(a),
        Command::AudioGen(a) => cmd_audio_gen(a),
        Command::Spectrogram(a) => cmd_spectrogram(a),
    }
}

/// Signals produced by the demo usage examples; kept here so tests can
/// synthesize audio inputs without a real recording.
pub fn synth_multitone(seconds: f64, rng: &mut SeededRng) -> AudioSignal {
    let n = (seconds * audio::SAMPLE_RATE as f64) as usize;
    let freqs = [330.0, 495.0, 660.0, 880.0];
    let segment = audio::SAMPLE_RATE as usize / 2; // 0.5 s notes
    let mut samples = Vec::with_capacity(n);
    let mut freq = freqs[0];
    for i in 0..n {
        if i % segment == 0 {
            freq = freqs[rng.next_index(freqs.len())];
        }
        let t = i as f64 / audio::SAMPLE_RATE as f64;
        let envelope = 0.6 + 0.2 * (2.0 * std::f64::consts::PI * 2.0 * t).sin();
        samples.push(envelope * (2.0 * std::f64::consts::PI * freq * t).sin() * 0.7);
    }
    AudioSignal::new(samples)
}
