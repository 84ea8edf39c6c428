//! Model persistence: a bundle is a directory holding `manifest.json` plus
//! one raw little-endian f64 file per named tensor. Bundles are written to
//! a temp directory and renamed into place, so concurrent readers only ever
//! see complete bundles.

use crate::autoencoder::{
    Activation, Conv1dAutoencoder, Conv1dConfig, DenseAutoencoder, DenseLayer, LatentMapping,
    TrainableModel,
};
use crate::error::{Error, Result};
use crate::gmm::GaussianMixture;
use crate::hmm::GaussianHMM;
use crate::implicit::{BaseDistribution, Mapping};
use crate::invertible::{
    InvertibleNet, InvertibleNonlinearity, NonlinearityKind, PseudoLinearLayer, Stage,
};
use crate::numerics::{Matrix, SeededRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageManifest {
    pub in_dim: usize,
    pub out_dim: usize,
    /// "tanh" or "sigmoid"; absent for a bare linear stage.
    pub activation: Option<String>,
    pub slope_c: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerManifest {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MappingManifest {
    Invertible {
        stages: Vec<StageManifest>,
    },
    Dense {
        latent_dim: usize,
        encoder: Vec<LayerManifest>,
        decoder: Vec<LayerManifest>,
    },
    Conv1d {
        config: Conv1dConfig,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaseManifest {
    Gmm { components: usize, dim: usize },
    Hmm { states: usize, dim: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub file: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: u32,
    pub seed: u64,
    pub mapping: MappingManifest,
    pub base: Option<BaseManifest>,
    /// Free-form record of the training configuration that produced the
    /// bundle.
    pub training: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

/// In-memory bundle contents.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub manifest: BundleManifest,
    pub mapping: Mapping,
    pub base: Option<BaseDistribution>,
}

impl ModelBundle {
    pub fn new(seed: u64, mapping: Mapping, base: Option<BaseDistribution>, training: serde_json::Value) -> Self {
        let manifest = BundleManifest {
            version: BUNDLE_VERSION,
            seed,
            mapping: describe_mapping(&mapping),
            base: base.as_ref().map(describe_base),
            training,
            tensors: Vec::new(), // filled on save
        };
        ModelBundle {
            manifest,
            mapping,
            base,
        }
    }

    /// Pair the mapping with a base distribution (stage 2 output).
    pub fn set_base(&mut self, base: BaseDistribution) {
        self.manifest.base = Some(describe_base(&base));
        self.base = Some(base);
    }

    pub fn into_model(self) -> Result<crate::implicit::ImplicitModel> {
        let base = self
            .base
            .ok_or_else(|| Error::InvalidBundle("bundle has no base distribution".into()))?;
        crate::implicit::ImplicitModel::new(self.mapping, base)
    }
}

fn describe_mapping(mapping: &Mapping) -> MappingManifest {
    match mapping {
        Mapping::Invertible(net) => MappingManifest::Invertible {
            stages: net
                .stages()
                .iter()
                .map(|s| StageManifest {
                    in_dim: s.linear.in_dim(),
                    out_dim: s.linear.out_dim(),
                    activation: s.activation.as_ref().map(|a| {
                        match a.kind() {
                            NonlinearityKind::TanhInvertible => "tanh".to_string(),
                            NonlinearityKind::SigmoidInvertible => "sigmoid".to_string(),
                        }
                    }),
                    slope_c: s
                        .activation
                        .as_ref()
                        .map(|a| a.slope_c())
                        .unwrap_or(crate::invertible::DEFAULT_TAIL_SLOPE),
                })
                .collect(),
        },
        Mapping::Dense(m) => MappingManifest::Dense {
            latent_dim: m.latent_dim(),
            encoder: m
                .encoder_layers
                .iter()
                .map(|l| LayerManifest {
                    in_dim: l.weight.cols(),
                    out_dim: l.weight.rows(),
                    activation: l.activation,
                })
                .collect(),
            decoder: m
                .decoder_layers
                .iter()
                .map(|l| LayerManifest {
                    in_dim: l.weight.cols(),
                    out_dim: l.weight.rows(),
                    activation: l.activation,
                })
                .collect(),
        },
        Mapping::Conv1d(m) => MappingManifest::Conv1d {
            config: m.config().clone(),
        },
    }
}

fn describe_base(base: &BaseDistribution) -> BaseManifest {
    match base {
        BaseDistribution::Gmm(g) => BaseManifest::Gmm {
            components: g.num_components(),
            dim: g.dim(),
        },
        BaseDistribution::Hmm(h) => BaseManifest::Hmm {
            states: h.num_states(),
            dim: h.dim(),
        },
    }
}

fn write_f64_file(path: &Path, data: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 8);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

fn read_f64_file(path: &Path, expected_len: usize) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() != expected_len * 8 {
        return Err(Error::InvalidBundle(format!(
            "tensor file {} holds {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected_len * 8
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

/// Tensor name/shape/data triples for the mapping, in load order.
fn mapping_tensors(mapping: &Mapping) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    let mut out = Vec::new();
    match mapping {
        Mapping::Invertible(net) => {
            for (i, s) in net.stages().iter().enumerate() {
                out.push((
                    format!("stage{i}.weight"),
                    vec![s.linear.out_dim(), s.linear.in_dim()],
                    s.linear.weight.data().to_vec(),
                ));
                out.push((
                    format!("stage{i}.bias"),
                    vec![s.linear.out_dim()],
                    s.linear.bias.clone(),
                ));
            }
        }
        Mapping::Dense(m) => {
            for (prefix, layers) in [("enc", &m.encoder_layers), ("dec", &m.decoder_layers)] {
                for (i, l) in layers.iter().enumerate() {
                    out.push((
                        format!("{prefix}{i}.weight"),
                        vec![l.weight.rows(), l.weight.cols()],
                        l.weight.data().to_vec(),
                    ));
                    out.push((
                        format!("{prefix}{i}.bias"),
                        vec![l.weight.rows()],
                        l.bias.clone(),
                    ));
                }
            }
        }
        Mapping::Conv1d(m) => {
            let cfg = m.config();
            let stages = cfg.strides.len();
            for i in 0..m.num_tensors() {
                let stage = i / 2;
                let (prefix, local) = if stage < stages {
                    ("cenc", stage)
                } else {
                    ("cdec", stage - stages)
                };
                let name = if i % 2 == 0 {
                    format!("{prefix}{local}.weight")
                } else {
                    format!("{prefix}{local}.bias")
                };
                out.push((name, vec![m.tensor(i).len()], m.tensor(i).to_vec()));
            }
        }
    }
    out
}

fn base_tensors(base: &BaseDistribution) -> Vec<(String, Vec<usize>, Vec<f64>)> {
    match base {
        BaseDistribution::Gmm(g) => {
            let m = g.num_components();
            let k = g.dim();
            let mut means = Vec::with_capacity(m * k);
            let mut covs = Vec::with_capacity(m * k * k);
            for c in 0..m {
                means.extend_from_slice(g.mean(c));
                covs.extend_from_slice(g.covariance(c).data());
            }
            vec![
                ("gmm.weights".into(), vec![m], g.weights().to_vec()),
                ("gmm.means".into(), vec![m, k], means),
                ("gmm.covariances".into(), vec![m, k, k], covs),
            ]
        }
        BaseDistribution::Hmm(h) => {
            let s = h.num_states();
            let k = h.dim();
            let mut means = Vec::with_capacity(s * k);
            let mut vars = Vec::with_capacity(s * k);
            for i in 0..s {
                means.extend_from_slice(h.emission_mean(i));
                vars.extend_from_slice(h.emission_var(i));
            }
            vec![
                ("hmm.initial".into(), vec![s], h.initial().to_vec()),
                (
                    "hmm.transitions".into(),
                    vec![s, s],
                    h.transitions().data().to_vec(),
                ),
                ("hmm.means".into(), vec![s, k], means),
                ("hmm.vars".into(), vec![s, k], vars),
            ]
        }
    }
}

/// Write the bundle atomically: everything goes into `<dir>.tmp`, which is
/// then renamed over the destination.
pub fn save_bundle(bundle: &ModelBundle, dir: &Path) -> Result<()> {
    let tmp = dir.with_extension("tmp");
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp)?;
    }
    std::fs::create_dir_all(&tmp)?;

    let mut tensors = mapping_tensors(&bundle.mapping);
    if let Some(base) = &bundle.base {
        tensors.extend(base_tensors(base));
    }
    let mut manifest = bundle.manifest.clone();
    manifest.tensors = tensors
        .iter()
        .map(|(name, shape, _)| TensorEntry {
            name: name.clone(),
            file: format!("{name}.f64"),
            shape: shape.clone(),
        })
        .collect();
    for (name, _, data) in &tensors {
        write_f64_file(&tmp.join(format!("{name}.f64")), data)?;
    }
    std::fs::write(
        tmp.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;

    if dir.exists() {
        std::fs::remove_dir_all(dir)?;
    }
    std::fs::rename(&tmp, dir)?;
    Ok(())
}

pub fn load_bundle(dir: &Path) -> Result<ModelBundle> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::InvalidBundle(format!(
            "no manifest.json in {}",
            dir.display()
        )));
    }
    let manifest: BundleManifest =
        serde_json::from_str(&std::fs::read_to_string(&manifest_path)?)?;
    if manifest.version != BUNDLE_VERSION {
        return Err(Error::InvalidBundle(format!(
            "unsupported bundle version {}",
            manifest.version
        )));
    }

    // the manifest must reference exactly the tensor files present
    let referenced: BTreeSet<String> = manifest.tensors.iter().map(|t| t.file.clone()).collect();
    let mut present = BTreeSet::new();
    for entry in std::fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        if name.ends_with(".f64") {
            present.insert(name);
        }
    }
    if referenced != present {
        return Err(Error::InvalidBundle(format!(
            "manifest references {referenced:?} but directory holds {present:?}"
        )));
    }

    let read_tensor = |name: &str| -> Result<(Vec<usize>, Vec<f64>)> {
        let entry = manifest
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::InvalidBundle(format!("missing tensor {name}")))?;
        let len: usize = entry.shape.iter().product();
        Ok((entry.shape.clone(), read_f64_file(&dir.join(&entry.file), len)?))
    };

    let mapping = match &manifest.mapping {
        MappingManifest::Invertible { stages } => {
            let mut built = Vec::with_capacity(stages.len());
            for (i, sm) in stages.iter().enumerate() {
                let (shape, w) = read_tensor(&format!("stage{i}.weight"))?;
                let (_, b) = read_tensor(&format!("stage{i}.bias"))?;
                let weight = Matrix::from_vec(shape[0], shape[1], w);
                let activation = match sm.activation.as_deref() {
                    Some("tanh") => Some(InvertibleNonlinearity::tanh_invertible(sm.slope_c)),
                    Some("sigmoid") => {
                        Some(InvertibleNonlinearity::sigmoid_invertible(sm.slope_c))
                    }
                    Some(other) => {
                        return Err(Error::InvalidBundle(format!(
                            "unknown invertible activation {other}"
                        )))
                    }
                    None => None,
                };
                built.push(Stage {
                    linear: PseudoLinearLayer::new(weight, b),
                    activation,
                });
            }
            Mapping::Invertible(InvertibleNet::new(built))
        }
        MappingManifest::Dense {
            encoder, decoder, ..
        } => {
            let read_layers = |prefix: &str, list: &[LayerManifest]| -> Result<Vec<DenseLayer>> {
                list.iter()
                    .enumerate()
                    .map(|(i, lm)| {
                        let (shape, w) = read_tensor(&format!("{prefix}{i}.weight"))?;
                        let (_, b) = read_tensor(&format!("{prefix}{i}.bias"))?;
                        Ok(DenseLayer {
                            weight: Matrix::from_vec(shape[0], shape[1], w),
                            bias: b,
                            activation: lm.activation,
                        })
                    })
                    .collect()
            };
            let enc = read_layers("enc", encoder)?;
            let dec = read_layers("dec", decoder)?;
            Mapping::Dense(DenseAutoencoder::new(enc, dec))
        }
        MappingManifest::Conv1d { config } => {
            let mut model = Conv1dAutoencoder::new(config.clone(), &mut SeededRng::new(0))?;
            let stages = config.strides.len();
            for i in 0..model.num_tensors() {
                let stage = i / 2;
                let (prefix, local) = if stage < stages {
                    ("cenc", stage)
                } else {
                    ("cdec", stage - stages)
                };
                let name = if i % 2 == 0 {
                    format!("{prefix}{local}.weight")
                } else {
                    format!("{prefix}{local}.bias")
                };
                let (_, data) = read_tensor(&name)?;
                if data.len() != model.tensor(i).len() {
                    return Err(Error::InvalidBundle(format!(
                        "tensor {name} length mismatch"
                    )));
                }
                model.tensor_mut(i).copy_from_slice(&data);
            }
            Mapping::Conv1d(model)
        }
    };

    let base = match &manifest.base {
        None => None,
        Some(BaseManifest::Gmm { components, dim }) => {
            let (_, weights) = read_tensor("gmm.weights")?;
            let (_, means_flat) = read_tensor("gmm.means")?;
            let (_, covs_flat) = read_tensor("gmm.covariances")?;
            let means: Vec<Vec<f64>> = (0..*components)
                .map(|c| means_flat[c * dim..(c + 1) * dim].to_vec())
                .collect();
            let covs: Vec<Matrix> = (0..*components)
                .map(|c| {
                    Matrix::from_vec(
                        *dim,
                        *dim,
                        covs_flat[c * dim * dim..(c + 1) * dim * dim].to_vec(),
                    )
                })
                .collect();
            Some(BaseDistribution::Gmm(GaussianMixture::new(
                weights, means, covs,
            )?))
        }
        Some(BaseManifest::Hmm { states, dim }) => {
            let (_, initial) = read_tensor("hmm.initial")?;
            let (_, trans_flat) = read_tensor("hmm.transitions")?;
            let (_, means_flat) = read_tensor("hmm.means")?;
            let (_, vars_flat) = read_tensor("hmm.vars")?;
            let means: Vec<Vec<f64>> = (0..*states)
                .map(|s| means_flat[s * dim..(s + 1) * dim].to_vec())
                .collect();
            let vars: Vec<Vec<f64>> = (0..*states)
                .map(|s| vars_flat[s * dim..(s + 1) * dim].to_vec())
                .collect();
            Some(BaseDistribution::Hmm(GaussianHMM::new(
                initial,
                Matrix::from_vec(*states, *states, trans_flat),
                means,
                vars,
            )?))
        }
    };

    Ok(ModelBundle {
        manifest,
        mapping,
        base,
    })
}
