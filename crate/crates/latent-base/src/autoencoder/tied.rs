//! Stage-1 training for the tied invertible perceptron. The encoder is the
//! exact analytic inverse of the decoder (shared `W`, `b`), so the
//! reconstruction objective `|f(f^-1(x)) - x|^2` pushes the data into the
//! net's range. Gradients flow through both passes; the encoder side
//! differentiates the pseudo-inverse
//! `h = (W^T W)^-1 W^T (z - b)` exactly:
//!
//!   dh = (W^T W)^-1 dW^T r - P dW h + P d(z - b),   r = (z - b) - W h
//!
//! with `P = (W^T W)^-1 W^T`, which in adjoint form contributes
//! `r u^T - (W u) h^T` to the weight gradient and `-W u` to the bias
//! gradient, where `u = (W^T W)^-1 g`.

use super::{LatentMapping, TrainableModel};
use crate::error::{Error, Result};
use crate::invertible::InvertibleNet;
use crate::invertible::GramSolver;

#[derive(Debug, Clone)]
pub struct TiedInvertibleNet {
    net: InvertibleNet,
}

impl TiedInvertibleNet {
    pub fn new(net: InvertibleNet) -> Self {
        TiedInvertibleNet { net }
    }

    pub fn net(&self) -> &InvertibleNet {
        &self.net
    }

    pub fn into_net(self) -> InvertibleNet {
        self.net
    }
}

/// Caches from one inverse pass, stage-indexed in forward order.
struct InverseTrace {
    /// `z_s`: value after undoing stage s's activation (the forward
    /// pre-activation when x is in range).
    z: Vec<Vec<f64>>,
    /// `v_s`: stage s's pseudo-inverse output (input side of stage s).
    v: Vec<Vec<f64>>,
    /// Least-squares residual `(z_s - b_s) - W_s v_s`.
    residual: Vec<Vec<f64>>,
}

fn inverse_trace(
    net: &InvertibleNet,
    grams: &[GramSolver],
    x: &[f64],
) -> Result<InverseTrace> {
    let n = net.stages().len();
    let mut z = vec![Vec::new(); n];
    let mut v = vec![Vec::new(); n];
    let mut residual = vec![Vec::new(); n];
    let mut cur = x.to_vec();
    for s in (0..n).rev() {
        let stage = &net.stages()[s];
        let zs: Vec<f64> = match &stage.activation {
            Some(act) => cur.iter().map(|&y| act.invert(y)).collect(),
            None => cur.clone(),
        };
        let centered: Vec<f64> = zs.iter().zip(&stage.linear.bias).map(|(a, b)| a - b).collect();
        let wt = stage.linear.weight.matvec_transpose(&centered);
        let vs = grams[s].solve(&wt)?;
        let wv = stage.linear.weight.matvec(&vs);
        residual[s] = centered.iter().zip(&wv).map(|(c, w)| c - w).collect();
        z[s] = zs;
        cur = vs.clone();
        v[s] = vs;
    }
    Ok(InverseTrace {
        z,
        v,
        residual,
    })
}

impl LatentMapping for TiedInvertibleNet {
    fn latent_dim(&self) -> usize {
        self.net.latent_dim()
    }

    fn data_dim(&self) -> usize {
        self.net.output_dim()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.inverse(x)
    }

    fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(h)
    }

    fn encode_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let grams = self.net.gram_solvers()?;
        xs.iter().map(|x| self.net.inverse_with(&grams, x)).collect()
    }
}

impl TrainableModel for TiedInvertibleNet {
    fn num_tensors(&self) -> usize {
        2 * self.net.stages().len()
    }

    fn tensor(&self, i: usize) -> &[f64] {
        let stage = &self.net.stages()[i / 2];
        if i % 2 == 0 {
            stage.linear.weight.data()
        } else {
            &stage.linear.bias
        }
    }

    fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        let stage = &mut self.net.stages_mut()[i / 2];
        if i % 2 == 0 {
            stage.linear.weight.data_mut()
        } else {
            &mut stage.linear.bias
        }
    }

    fn loss_and_grads(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        assert!(!batch.is_empty());
        let stages = self.net.stages();
        let n_stages = stages.len();
        let grams = self.net.gram_solvers()?;
        let mut grads: Vec<Vec<f64>> = (0..self.num_tensors())
            .map(|i| vec![0.0; self.tensor(i).len()])
            .collect();
        let mut total_loss = 0.0;
        let inv_n = 1.0 / batch.len() as f64;

        for x in batch {
            if x.len() != self.data_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.data_dim(),
                    actual: x.len(),
                    context: "tied training input",
                });
            }
            let enc = inverse_trace(&self.net, &grams, x)?;
            let latent = enc.v[0].clone();
            let dec = self.net.forward_trace(&latent)?;

            total_loss += dec
                .output
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                * inv_n;

            // decoder backprop (standard feedforward)
            let mut delta: Vec<f64> = dec
                .output
                .iter()
                .zip(x)
                .map(|(a, b)| 2.0 * (a - b) * inv_n)
                .collect();
            for s in (0..n_stages).rev() {
                let stage = &stages[s];
                if let Some(act) = &stage.activation {
                    for (d, z) in delta.iter_mut().zip(&dec.pre_activations[s]) {
                        *d *= act.deriv(*z);
                    }
                }
                let in_dim = stage.linear.in_dim();
                let input = &dec.inputs[s];
                let (gw, rest) = grads[2 * s..].split_first_mut().unwrap();
                let gb = &mut rest[0];
                for (r, d) in delta.iter().enumerate() {
                    gb[r] += d;
                    let row = &mut gw[r * in_dim..(r + 1) * in_dim];
                    for (g, a) in row.iter_mut().zip(input) {
                        *g += d * a;
                    }
                }
                delta = stage.linear.weight.matvec_transpose(&delta);
            }

            // encoder backprop: delta now holds dL/d(latent); walk the
            // inverse chain outward toward x.
            let mut g = delta;
            for s in 0..n_stages {
                let stage = &stages[s];
                let u = grams[s].solve(&g)?;
                let wu = stage.linear.weight.matvec(&u);
                let in_dim = stage.linear.in_dim();
                let (gw, rest) = grads[2 * s..].split_first_mut().unwrap();
                let gb = &mut rest[0];
                for (r, (&ru, &wur)) in enc.residual[s].iter().zip(&wu).enumerate() {
                    gb[r] -= wur;
                    let row = &mut gw[r * in_dim..(r + 1) * in_dim];
                    for c in 0..in_dim {
                        row[c] += ru * u[c] - wur * enc.v[s][c];
                    }
                }
                // dL/dz_s = W u; through z = act^-1(v): divide by act'(z)
                g = match &stage.activation {
                    Some(act) => wu
                        .iter()
                        .zip(&enc.z[s])
                        .map(|(w, z)| w / act.deriv(*z))
                        .collect(),
                    None => wu,
                };
            }
        }
        Ok((total_loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{reconstruction_loss, train_stage1, AdamConfig, TrainConfig};
    use crate::numerics::SeededRng;
    use crate::test_util::rel_err;

    #[test]
    fn in_range_inputs_reconstruct_exactly() {
        // Exact-inverse property: any x in the net's range reconstructs
        // regardless of training.
        let mut rng = SeededRng::new(1);
        let tied = TiedInvertibleNet::new(crate::invertible::InvertibleNet::perceptron(
            2, 5, 9, &mut rng,
        ));
        let batch: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let h: Vec<f64> = (0..2).map(|_| rng.next_normal() * 2.0).collect();
                tied.decode(&h).unwrap()
            })
            .collect();
        let loss = reconstruction_loss(&tied, &batch).unwrap();
        assert!(loss < 1e-8, "loss {loss}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(2);
        let mut tied = TiedInvertibleNet::new(crate::invertible::InvertibleNet::perceptron(
            2, 3, 4, &mut rng,
        ));
        let batch: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..4).map(|_| rng.next_f64() * 0.8 + 0.1).collect())
            .collect();
        let (_, grads) = tied.loss_and_grads(&batch).unwrap();
        let delta = 1e-6;
        for i in 0..tied.num_tensors() {
            for j in 0..tied.tensor(i).len() {
                let orig = tied.tensor(i)[j];
                tied.tensor_mut(i)[j] = orig + delta;
                let up = reconstruction_loss(&tied, &batch).unwrap();
                tied.tensor_mut(i)[j] = orig - delta;
                let down = reconstruction_loss(&tied, &batch).unwrap();
                tied.tensor_mut(i)[j] = orig;
                let fd = (up - down) / (2.0 * delta);
                assert!(
                    rel_err(grads[i][j], fd) < 1e-4,
                    "tensor {i} entry {j}: analytic {} vs fd {fd}",
                    grads[i][j]
                );
            }
        }
    }

    #[test]
    fn tied_training_loss_decreases() {
        // toy two-cluster data off the net's range: the loss should fall
        // monotonically over the first epochs at lr 1e-3
        let mut rng = SeededRng::new(3);
        let data: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                let center = if i % 2 == 0 { 0.3 } else { 0.7 };
                (0..8)
                    .map(|_| center + rng.next_normal() * 0.05)
                    .collect()
            })
            .collect();
        let mut tied = TiedInvertibleNet::new(crate::invertible::InvertibleNet::perceptron(
            2, 6, 8, &mut rng,
        ));
        let cfg = TrainConfig {
            epochs: 5,
            batch_size: 16,
            adam: AdamConfig::default(),
        };
        let history = train_stage1(&mut tied, &data, &cfg, &mut rng).unwrap();
        for w in history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss increased: {:?}", history);
        }
    }
}
