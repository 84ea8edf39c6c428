//! Full-covariance Gaussian mixture base distribution: EM fitting on latent
//! embeddings, stable log-density evaluation, and ancestral sampling with
//! component labels.

use crate::cluster::{kmeans_pp_init, lloyd};
use crate::error::{Error, Result};
use crate::numerics::{
    cholesky, log_sum_exp, sample_gaussian, Matrix, SeededRng, SpdFactorization,
};

const LN_2PI: f64 = 1.8378770664093453;

/// Covariance jitter applied after every M-step; EM on small clusters
/// produces near-singular components otherwise.
pub const COVARIANCE_JITTER: f64 = 1e-6;

/// Responsibility mass below which a component is considered empty and
/// reseeded from a random data point.
const EMPTY_CLUSTER_MASS: f64 = 1e-8;

#[derive(Debug, Clone)]
struct Component {
    mean: Vec<f64>,
    cov: Matrix,
    chol: SpdFactorization,
    /// `-0.5 * (K ln 2pi + ln det cov)`
    log_norm: f64,
}

impl Component {
    fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        let chol = cholesky(&cov)?;
        let log_norm = -0.5 * (mean.len() as f64 * LN_2PI + chol.log_det());
        Ok(Component {
            mean,
            cov,
            chol,
            log_norm,
        })
    }

    fn log_pdf(&self, h: &[f64]) -> Result<f64> {
        let centered: Vec<f64> = h.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let y = self.chol.solve_lower(&centered)?;
        let maha: f64 = y.iter().map(|v| v * v).sum();
        Ok(self.log_norm - 0.5 * maha)
    }
}

/// Mixture of full-covariance Gaussians over the latent space.
#[derive(Debug, Clone)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<Component>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covariances: Vec<Matrix>) -> Result<Self> {
        if weights.len() != means.len() || weights.len() != covariances.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                actual: means.len().min(covariances.len()),
                context: "mixture component counts",
            });
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 || weights.iter().any(|&w| w < 0.0) {
            return Err(Error::Config(format!(
                "mixture weights must be a simplex vector (sum {total})"
            )));
        }
        let components = means
            .into_iter()
            .zip(covariances)
            .map(|(m, c)| Component::new(m, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianMixture {
            weights,
            components,
        })
    }

    /// Standard-normal base with `m` equal components (the "untrained"
    /// isotropic base).
    pub fn standard(dim: usize) -> Self {
        GaussianMixture::new(vec![1.0], vec![vec![0.0; dim]], vec![Matrix::identity(dim)])
            .expect("identity covariance is SPD")
    }

    pub fn isotropic(dim: usize, variance: f64) -> Self {
        let cov = Matrix::diag(&vec![variance; dim]);
        GaussianMixture::new(vec![1.0], vec![vec![0.0; dim]], vec![cov])
            .expect("isotropic covariance is SPD")
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, m: usize) -> &[f64] {
        &self.components[m].mean
    }

    pub fn covariance(&self, m: usize) -> &Matrix {
        &self.components[m].cov
    }

    /// `log sum_m w_m N(h; mu_m, Sigma_m)` via log-sum-exp.
    pub fn log_pdf(&self, h: &[f64]) -> Result<f64> {
        if h.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: h.len(),
                context: "gmm log_pdf input",
            });
        }
        let terms = self.weighted_log_terms(h)?;
        Ok(log_sum_exp(&terms))
    }

    fn weighted_log_terms(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| Ok(w.ln() + c.log_pdf(h)?))
            .collect()
    }

    /// Gradient of `log_pdf` with respect to `h`:
    /// `sum_m resp_m(h) * Sigma_m^-1 (mu_m - h)`.
    pub fn grad_log_pdf(&self, h: &[f64]) -> Result<Vec<f64>> {
        let terms = self.weighted_log_terms(h)?;
        let total = log_sum_exp(&terms);
        let mut grad = vec![0.0; h.len()];
        for (t, c) in terms.iter().zip(&self.components) {
            let resp = (t - total).exp();
            let centered: Vec<f64> = c.mean.iter().zip(h).map(|(m, v)| m - v).collect();
            let dir = c.chol.solve(&centered)?;
            for (g, d) in grad.iter_mut().zip(&dir) {
                *g += resp * d;
            }
        }
        Ok(grad)
    }

    /// Posterior component responsibilities at `h`.
    pub fn responsibilities(&self, h: &[f64]) -> Result<Vec<f64>> {
        let terms = self.weighted_log_terms(h)?;
        let total = log_sum_exp(&terms);
        Ok(terms.iter().map(|t| (t - total).exp()).collect())
    }

    /// Ancestral sampling: categorical component choice, then a Gaussian
    /// draw. Labels are returned so samples can be grouped by component.
    pub fn sample(&self, rng: &mut SeededRng, n: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        assert!(n >= 1);
        let mut samples = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let m = rng.next_weighted_index(&self.weights);
            let s = sample_gaussian(rng, &self.components[m].mean, &self.components[m].chol)
                .expect("component dims are consistent");
            samples.push(s);
            labels.push(m);
        }
        (samples, labels)
    }
}

/// EM fit of an `m`-component full-covariance mixture. Initialization is
/// k-means++ seeding with a few Lloyd iterations and the global sample
/// covariance. Returns the fitted mixture and the per-iteration total
/// log-likelihood trace (non-decreasing up to floating-point noise).
pub fn fit_em(
    embeddings: &[Vec<f64>],
    m: usize,
    rng: &mut SeededRng,
    max_iters: usize,
    tol: f64,
) -> Result<(GaussianMixture, Vec<f64>)> {
    assert!(m >= 1, "need at least one component");
    if embeddings.len() < m {
        return Err(Error::Config(format!(
            "need at least {m} embeddings to fit {m} components, got {}",
            embeddings.len()
        )));
    }
    let centers = kmeans_pp_init(embeddings, m, rng);
    let (centers, _) = lloyd(embeddings, centers, 10, rng);
    let global_cov = sample_covariance(embeddings);
    let init = GaussianMixture::new(
        vec![1.0 / m as f64; m],
        centers,
        vec![jittered(global_cov); m],
    )?;
    fit_em_from(embeddings, init, rng, max_iters, tol)
}

/// EM from an explicit starting mixture. Given the same initialization the
/// result does not depend on embedding order (all statistics are sums over
/// points).
pub fn fit_em_from(
    embeddings: &[Vec<f64>],
    init: GaussianMixture,
    rng: &mut SeededRng,
    max_iters: usize,
    tol: f64,
) -> Result<(GaussianMixture, Vec<f64>)> {
    let n = embeddings.len();
    let dim = embeddings[0].len();
    let m = init.num_components();
    let global_cov = sample_covariance(embeddings);
    let mut mixture = init;

    let mut trace: Vec<f64> = Vec::new();
    let mut log_resp = vec![vec![0.0; m]; n];
    for _ in 0..max_iters {
        // E-step
        let mut total_ll = 0.0;
        for (i, h) in embeddings.iter().enumerate() {
            let terms = mixture.weighted_log_terms(h)?;
            let norm = log_sum_exp(&terms);
            total_ll += norm;
            for (slot, t) in log_resp[i].iter_mut().zip(&terms) {
                *slot = t - norm;
            }
        }
        let converged = match trace.last() {
            Some(&prev) => (total_ll - prev).abs() < tol * prev.abs().max(1.0),
            None => false,
        };
        trace.push(total_ll);
        if converged {
            break;
        }

        // M-step
        let mut masses = vec![0.0; m];
        for row in &log_resp {
            for (mass, lr) in masses.iter_mut().zip(row) {
                *mass += lr.exp();
            }
        }
        let mut weights = Vec::with_capacity(m);
        let mut means = Vec::with_capacity(m);
        let mut covs = Vec::with_capacity(m);
        for c in 0..m {
            if masses[c] < EMPTY_CLUSTER_MASS {
                // Empty cluster: reseed from a random data point.
                log::warn!("EM component {c} collapsed; reseeding from a random point");
                let pick = embeddings[rng.next_index(n)].clone();
                weights.push(1.0 / n as f64);
                means.push(pick);
                covs.push(jittered(global_cov.clone()));
                continue;
            }
            weights.push(masses[c] / n as f64);
            let mut mean = vec![0.0; dim];
            for (row, h) in log_resp.iter().zip(embeddings) {
                let r = row[c].exp();
                for (mu, v) in mean.iter_mut().zip(h) {
                    *mu += r * v;
                }
            }
            for mu in mean.iter_mut() {
                *mu /= masses[c];
            }
            let mut cov = Matrix::zeros(dim, dim);
            for (row, h) in log_resp.iter().zip(embeddings) {
                let r = row[c].exp();
                for a in 0..dim {
                    let da = h[a] - mean[a];
                    for b in a..dim {
                        cov[(a, b)] += r * da * (h[b] - mean[b]);
                    }
                }
            }
            for a in 0..dim {
                for b in 0..a {
                    cov[(a, b)] = cov[(b, a)];
                }
            }
            for v in cov.data_mut() {
                *v /= masses[c];
            }
            means.push(mean);
            covs.push(jittered(cov));
        }
        // renormalize (reseeded components perturb the simplex)
        let wsum: f64 = weights.iter().sum();
        for w in weights.iter_mut() {
            *w /= wsum;
        }
        mixture = GaussianMixture::new(weights, means, covs)?;
    }
    Ok((mixture, trace))
}

fn jittered(mut cov: Matrix) -> Matrix {
    cov.add_scaled_identity(COVARIANCE_JITTER);
    cov
}

pub fn sample_covariance(data: &[Vec<f64>]) -> Matrix {
    let n = data.len();
    let dim = data[0].len();
    let mut mean = vec![0.0; dim];
    for p in data {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(dim, dim);
    for p in data {
        for a in 0..dim {
            let da = p[a] - mean[a];
            for b in a..dim {
                cov[(a, b)] += da * (p[b] - mean[b]);
            }
        }
    }
    for a in 0..dim {
        for b in 0..a {
            cov[(a, b)] = cov[(b, a)];
        }
    }
    for v in cov.data_mut() {
        *v /= n as f64;
    }
    cov
}

pub fn sample_mean(data: &[Vec<f64>]) -> Vec<f64> {
    let dim = data[0].len();
    let mut mean = vec![0.0; dim];
    for p in data {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= data.len() as f64;
    }
    mean
}
