//! Gaussian-emission hidden Markov base distribution for sequential
//! latents: scaled forward likelihood, Baum-Welch fitting over one or more
//! sequences, and ancestral sampling.

use crate::cluster::{kmeans_pp_init, lloyd};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

const LN_2PI: f64 = 1.8378770664093453;

/// Per-dimension emission variance floor applied after every M-step.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// State occupancy below which an emission model is reseeded from a random
/// frame.
const DEGENERATE_OCCUPANCY: f64 = 1e-8;

/// Ordered latent frames for one sequence.
#[derive(Debug, Clone)]
pub struct SequenceEmbedding {
    pub frames: Vec<Vec<f64>>,
}

impl SequenceEmbedding {
    pub fn new(frames: Vec<Vec<f64>>) -> Self {
        assert!(!frames.is_empty(), "sequence must be nonempty");
        let dim = frames[0].len();
        assert!(frames.iter().all(|f| f.len() == dim), "uniform frame dim");
        SequenceEmbedding { frames }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.frames[0].len()
    }
}

/// Hidden Markov model with diagonal-covariance Gaussian emissions.
#[derive(Debug, Clone)]
pub struct GaussianHMM {
    initial: Vec<f64>,
    transitions: Matrix,
    emission_means: Vec<Vec<f64>>,
    emission_vars: Vec<Vec<f64>>,
}

impl GaussianHMM {
    pub fn new(
        initial: Vec<f64>,
        transitions: Matrix,
        emission_means: Vec<Vec<f64>>,
        emission_vars: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let s = initial.len();
        if transitions.rows() != s || transitions.cols() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                actual: transitions.rows(),
                context: "transition matrix size",
            });
        }
        if emission_means.len() != s || emission_vars.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                actual: emission_means.len(),
                context: "emission parameter count",
            });
        }
        let check_simplex = |v: &[f64]| -> bool {
            v.iter().all(|&p| p >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-12
        };
        if !check_simplex(&initial) {
            return Err(Error::Config("initial distribution is not a simplex".into()));
        }
        for r in 0..s {
            if !check_simplex(transitions.row(r)) {
                return Err(Error::Config(format!("transition row {r} is not a simplex")));
            }
        }
        if emission_vars
            .iter()
            .any(|v| v.iter().any(|&x| x < 1e-8 || !x.is_finite()))
        {
            return Err(Error::Config("emission variances below floor".into()));
        }
        Ok(GaussianHMM {
            initial,
            transitions,
            emission_means,
            emission_vars,
        })
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn dim(&self) -> usize {
        self.emission_means[0].len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &Matrix {
        &self.transitions
    }

    pub fn emission_mean(&self, s: usize) -> &[f64] {
        &self.emission_means[s]
    }

    pub fn emission_var(&self, s: usize) -> &[f64] {
        &self.emission_vars[s]
    }

    pub fn emission_log_pdf(&self, state: usize, frame: &[f64]) -> f64 {
        let mean = &self.emission_means[state];
        let var = &self.emission_vars[state];
        let mut acc = 0.0;
        for d in 0..frame.len() {
            let diff = frame[d] - mean[d];
            acc += LN_2PI + var[d].ln() + diff * diff / var[d];
        }
        -0.5 * acc
    }

    /// Scaled forward algorithm. Per-step scale factors (and the max-shift
    /// of the emission log-densities) are accumulated in log space, so the
    /// recursion stays finite for sequences of tens of thousands of frames.
    pub fn log_likelihood(&self, seq: &SequenceEmbedding) -> Result<f64> {
        if seq.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: seq.dim(),
                context: "hmm frame dim",
            });
        }
        let s = self.num_states();
        let mut log_like = 0.0;
        let mut alpha = vec![0.0; s];
        for (t, frame) in seq.frames.iter().enumerate() {
            let log_b: Vec<f64> = (0..s).map(|j| self.emission_log_pdf(j, frame)).collect();
            let shift = log_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut next = vec![0.0; s];
            if t == 0 {
                for j in 0..s {
                    next[j] = self.initial[j] * (log_b[j] - shift).exp();
                }
            } else {
                for j in 0..s {
                    let mut acc = 0.0;
                    for i in 0..s {
                        acc += alpha[i] * self.transitions[(i, j)];
                    }
                    next[j] = acc * (log_b[j] - shift).exp();
                }
            }
            let scale: f64 = next.iter().sum();
            if scale <= 0.0 || !scale.is_finite() {
                return Err(Error::NonFiniteObjective {
                    epoch: t,
                    trace: vec![],
                });
            }
            for v in next.iter_mut() {
                *v /= scale;
            }
            log_like += scale.ln() + shift;
            alpha = next;
        }
        Ok(log_like)
    }

    /// Ancestral sampling: initial state, Markov transitions, diagonal
    /// Gaussian emissions. Returns frames and the hidden state path.
    pub fn sample(&self, rng: &mut SeededRng, t: usize) -> (SequenceEmbedding, Vec<usize>) {
        assert!(t >= 1);
        let dim = self.dim();
        let mut states = Vec::with_capacity(t);
        let mut frames = Vec::with_capacity(t);
        let mut state = rng.next_weighted_index(&self.initial);
        for step in 0..t {
            if step > 0 {
                state = rng.next_weighted_index(self.transitions.row(state));
            }
            states.push(state);
            let mean = &self.emission_means[state];
            let var = &self.emission_vars[state];
            let frame: Vec<f64> = (0..dim)
                .map(|d| mean[d] + var[d].sqrt() * rng.next_normal())
                .collect();
            frames.push(frame);
        }
        (SequenceEmbedding::new(frames), states)
    }
}

/// Forward-backward statistics for one sequence (scaled).
struct ForwardBackward {
    /// gamma[t][s]: posterior state marginals
    gamma: Vec<Vec<f64>>,
    /// xi_sum[i][j]: summed transition posteriors over t
    xi_sum: Matrix,
    log_like: f64,
}

fn forward_backward(hmm: &GaussianHMM, seq: &SequenceEmbedding) -> Result<ForwardBackward> {
    let s = hmm.num_states();
    let t_len = seq.len();
    let mut log_b = vec![vec![0.0; s]; t_len];
    let mut shifts = vec![0.0; t_len];
    for (t, frame) in seq.frames.iter().enumerate() {
        for j in 0..s {
            log_b[t][j] = hmm.emission_log_pdf(j, frame);
        }
        shifts[t] = log_b[t].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    let b_scaled =
        |t: usize, j: usize| -> f64 { (log_b[t][j] - shifts[t]).exp() };

    let mut alpha = vec![vec![0.0; s]; t_len];
    let mut scales = vec![0.0; t_len];
    let mut log_like = 0.0;
    for t in 0..t_len {
        for j in 0..s {
            let prior = if t == 0 {
                hmm.initial[j]
            } else {
                (0..s).map(|i| alpha[t - 1][i] * hmm.transitions[(i, j)]).sum()
            };
            alpha[t][j] = prior * b_scaled(t, j);
        }
        let scale: f64 = alpha[t].iter().sum();
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::NonFiniteObjective {
                epoch: t,
                trace: vec![],
            });
        }
        for v in alpha[t].iter_mut() {
            *v /= scale;
        }
        scales[t] = scale;
        log_like += scale.ln() + shifts[t];
    }

    let mut beta = vec![vec![1.0; s]; t_len];
    for t in (0..t_len - 1).rev() {
        for i in 0..s {
            let mut acc = 0.0;
            for j in 0..s {
                acc += hmm.transitions[(i, j)] * b_scaled(t + 1, j) * beta[t + 1][j];
            }
            beta[t][i] = acc / scales[t + 1];
        }
    }

    let mut gamma = vec![vec![0.0; s]; t_len];
    for t in 0..t_len {
        let mut norm = 0.0;
        for j in 0..s {
            gamma[t][j] = alpha[t][j] * beta[t][j];
            norm += gamma[t][j];
        }
        // alpha/beta scaling makes this 1 up to rounding
        for v in gamma[t].iter_mut() {
            *v /= norm;
        }
    }

    let mut xi_sum = Matrix::zeros(s, s);
    for t in 0..t_len - 1 {
        let mut norm = 0.0;
        let mut local = Matrix::zeros(s, s);
        for i in 0..s {
            for j in 0..s {
                let v = alpha[t][i]
                    * hmm.transitions[(i, j)]
                    * b_scaled(t + 1, j)
                    * beta[t + 1][j];
                local[(i, j)] = v;
                norm += v;
            }
        }
        for i in 0..s {
            for j in 0..s {
                xi_sum[(i, j)] += local[(i, j)] / norm;
            }
        }
    }

    Ok(ForwardBackward {
        gamma,
        xi_sum,
        log_like,
    })
}

/// Baum-Welch fit over one or more sequences. Emission means are seeded by
/// k-means on the pooled frames; initial and transition rows start uniform
/// with a small random perturbation to break symmetry. Returns the model and
/// the total log-likelihood trace.
pub fn fit_baum_welch(
    sequences: &[SequenceEmbedding],
    s: usize,
    rng: &mut SeededRng,
    max_iters: usize,
    tol: f64,
) -> Result<(GaussianHMM, Vec<f64>)> {
    assert!(s >= 1);
    assert!(!sequences.is_empty());
    let dim = sequences[0].dim();
    let frames: Vec<Vec<f64>> = sequences
        .iter()
        .flat_map(|q| q.frames.iter().cloned())
        .collect();
    if frames.len() < s {
        return Err(Error::Config(format!(
            "need at least {s} frames to fit {s} states, got {}",
            frames.len()
        )));
    }

    let centers = kmeans_pp_init(&frames, s, rng);
    let (centers, _) = lloyd(&frames, centers, 10, rng);
    let global_var = global_variance(&frames);
    let initial = perturbed_uniform(s, rng);
    let mut transitions = Matrix::zeros(s, s);
    for i in 0..s {
        let row = perturbed_uniform(s, rng);
        for j in 0..s {
            transitions[(i, j)] = row[j];
        }
    }
    let mut hmm = GaussianHMM::new(
        initial,
        transitions,
        centers,
        vec![global_var.clone(); s],
    )?;

    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..max_iters {
        let mut total_ll = 0.0;
        let mut gamma_first = vec![0.0; s];
        let mut xi_total = Matrix::zeros(s, s);
        let mut occupancy = vec![0.0; s];
        let mut mean_acc = vec![vec![0.0; dim]; s];
        let mut var_acc = vec![vec![0.0; dim]; s];

        for seq in sequences {
            let fb = forward_backward(&hmm, seq)?;
            total_ll += fb.log_like;
            for j in 0..s {
                gamma_first[j] += fb.gamma[0][j];
                for i in 0..s {
                    xi_total[(j, i)] += fb.xi_sum[(j, i)];
                }
            }
            for (t, frame) in seq.frames.iter().enumerate() {
                for j in 0..s {
                    let g = fb.gamma[t][j];
                    occupancy[j] += g;
                    for d in 0..dim {
                        mean_acc[j][d] += g * frame[d];
                    }
                }
            }
            // second pass for variances needs the new means, accumulate
            // sufficient statistics instead: E[x^2]
            for (t, frame) in seq.frames.iter().enumerate() {
                for j in 0..s {
                    let g = fb.gamma[t][j];
                    for d in 0..dim {
                        var_acc[j][d] += g * frame[d] * frame[d];
                    }
                }
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
        let mut new_initial: Vec<f64> = gamma_first
            .iter()
            .map(|g| g / sequences.len() as f64)
            .collect();
        normalize(&mut new_initial);

        let mut new_transitions = Matrix::zeros(s, s);
        for i in 0..s {
            let row_sum: f64 = (0..s).map(|j| xi_total[(i, j)]).sum();
            if row_sum > 0.0 {
                for j in 0..s {
                    new_transitions[(i, j)] = xi_total[(i, j)] / row_sum;
                }
            } else {
                for j in 0..s {
                    new_transitions[(i, j)] = 1.0 / s as f64;
                }
            }
        }

        let mut new_means = Vec::with_capacity(s);
        let mut new_vars = Vec::with_capacity(s);
        for j in 0..s {
            if occupancy[j] < DEGENERATE_OCCUPANCY {
                log::warn!("HMM state {j} starved; reseeding emission from a random frame");
                let pick = &frames[rng.next_index(frames.len())];
                new_means.push(pick.clone());
                new_vars.push(global_var.clone());
                continue;
            }
            let mean: Vec<f64> = mean_acc[j].iter().map(|v| v / occupancy[j]).collect();
            let var: Vec<f64> = (0..dim)
                .map(|d| {
                    let ex2 = var_acc[j][d] / occupancy[j];
                    (ex2 - mean[d] * mean[d]).max(VARIANCE_FLOOR)
                })
                .collect();
            new_means.push(mean);
            new_vars.push(var);
        }

        hmm = GaussianHMM::new(new_initial, new_transitions, new_means, new_vars)?;
    }
    Ok((hmm, trace))
}

fn global_variance(frames: &[Vec<f64>]) -> Vec<f64> {
    let dim = frames[0].len();
    let n = frames.len() as f64;
    let mut mean = vec![0.0; dim];
    for f in frames {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for f in frames {
        for d in 0..dim {
            let diff = f[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    for v in var.iter_mut() {
        *v = (*v / n).max(VARIANCE_FLOOR);
    }
    var
}

/// Uniform distribution with a small Dirichlet(1) perturbation to break
/// symmetry between states.
fn perturbed_uniform(s: usize, rng: &mut SeededRng) -> Vec<f64> {
    let draws: Vec<f64> = (0..s).map(|_| -rng.next_f64().max(1e-12).ln()).collect();
    let total: f64 = draws.iter().sum();
    let mut row: Vec<f64> = draws
        .iter()
        .map(|d| 1.0 / s as f64 + 0.05 * d / total)
        .collect();
    normalize(&mut row);
    row
}

fn normalize(v: &mut [f64]) {
    let total: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= total;
    }
}
