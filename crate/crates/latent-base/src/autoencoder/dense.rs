//! Untied dense autoencoder with manual backpropagation.

use super::{Activation, LatentMapping, TrainableModel};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SeededRng};

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn init(out_dim: usize, in_dim: usize, activation: Activation, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut weight = Matrix::zeros(out_dim, in_dim);
        for v in weight.data_mut() {
            *v = (rng.next_f64() * 2.0 - 1.0) * bound;
        }
        DenseLayer {
            weight,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    fn forward(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.weight.matvec(x);
        for (zi, b) in z.iter_mut().zip(&self.bias) {
            *zi += b;
        }
        let a = z.iter().map(|&v| self.activation.eval(v)).collect();
        (z, a)
    }
}

/// Encoder/decoder stacks with independent parameters.
#[derive(Debug, Clone)]
pub struct DenseAutoencoder {
    pub encoder_layers: Vec<DenseLayer>,
    pub decoder_layers: Vec<DenseLayer>,
    latent_dim: usize,
}

impl DenseAutoencoder {
    pub fn new(encoder_layers: Vec<DenseLayer>, decoder_layers: Vec<DenseLayer>) -> Self {
        assert!(!encoder_layers.is_empty() && !decoder_layers.is_empty());
        let latent_dim = encoder_layers.last().unwrap().weight.rows();
        assert_eq!(
            latent_dim,
            decoder_layers[0].weight.cols(),
            "latent dims must agree"
        );
        DenseAutoencoder {
            encoder_layers,
            decoder_layers,
            latent_dim,
        }
    }

    /// Symmetric architecture: `input -> hidden... -> latent` and its
    /// mirror. Hidden layers use `hidden_act`; the latent layer is linear;
    /// the output layer uses `output_act`.
    pub fn from_spec(
        input_dim: usize,
        hidden: &[usize],
        latent_dim: usize,
        hidden_act: Activation,
        output_act: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let mut encoder = Vec::new();
        let mut prev = input_dim;
        for &h in hidden {
            encoder.push(DenseLayer::init(h, prev, hidden_act, rng));
            prev = h;
        }
        encoder.push(DenseLayer::init(latent_dim, prev, Activation::Identity, rng));

        let mut decoder = Vec::new();
        prev = latent_dim;
        for &h in hidden.iter().rev() {
            decoder.push(DenseLayer::init(h, prev, hidden_act, rng));
            prev = h;
        }
        decoder.push(DenseLayer::init(input_dim, prev, output_act, rng));
        DenseAutoencoder::new(encoder, decoder)
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder_layers.iter().chain(self.decoder_layers.iter())
    }

    fn num_layers(&self) -> usize {
        self.encoder_layers.len() + self.decoder_layers.len()
    }

    fn layer(&self, i: usize) -> &DenseLayer {
        if i < self.encoder_layers.len() {
            &self.encoder_layers[i]
        } else {
            &self.decoder_layers[i - self.encoder_layers.len()]
        }
    }

    fn layer_mut(&mut self, i: usize) -> &mut DenseLayer {
        if i < self.encoder_layers.len() {
            &mut self.encoder_layers[i]
        } else {
            &mut self.decoder_layers[i - self.encoder_layers.len()]
        }
    }
}

impl LatentMapping for DenseAutoencoder {
    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn data_dim(&self) -> usize {
        self.encoder_layers[0].weight.cols()
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.data_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.data_dim(),
                actual: x.len(),
                context: "dense encode input",
            });
        }
        let mut cur = x.to_vec();
        for layer in &self.encoder_layers {
            cur = layer.forward(&cur).1;
        }
        Ok(cur)
    }

    fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.latent_dim {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim,
                actual: h.len(),
                context: "dense decode input",
            });
        }
        let mut cur = h.to_vec();
        for layer in &self.decoder_layers {
            cur = layer.forward(&cur).1;
        }
        Ok(cur)
    }
}

impl TrainableModel for DenseAutoencoder {
    fn num_tensors(&self) -> usize {
        2 * self.num_layers()
    }

    fn tensor(&self, i: usize) -> &[f64] {
        let layer = self.layer(i / 2);
        if i % 2 == 0 {
            layer.weight.data()
        } else {
            &layer.bias
        }
    }

    fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        let layer = self.layer_mut(i / 2);
        if i % 2 == 0 {
            layer.weight.data_mut()
        } else {
            &mut layer.bias
        }
    }

    fn loss_and_grads(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        assert!(!batch.is_empty());
        let n_layers = self.num_layers();
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
                    context: "dense training input",
                });
            }
            // forward with caches
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut pre_acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers);
            let mut cur = x.clone();
            for layer in self.layers() {
                inputs.push(cur.clone());
                let (z, a) = layer.forward(&cur);
                pre_acts.push(z);
                cur = a;
            }
            let mut delta: Vec<f64> = cur
                .iter()
                .zip(x)
                .map(|(a, b)| 2.0 * (a - b) * inv_n)
                .collect();
            total_loss += cur
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                * inv_n;

            // backward
            for l in (0..n_layers).rev() {
                let layer = self.layer(l);
                for (d, z) in delta.iter_mut().zip(&pre_acts[l]) {
                    *d *= layer.activation.deriv(*z);
                }
                let (gw, rest) = grads[2 * l..].split_first_mut().unwrap();
                let gb = &mut rest[0];
                let in_dim = layer.weight.cols();
                for (r, d) in delta.iter().enumerate() {
                    gb[r] += d;
                    let row = &mut gw[r * in_dim..(r + 1) * in_dim];
                    for (g, a) in row.iter_mut().zip(&inputs[l]) {
                        *g += d * a;
                    }
                }
                if l > 0 {
                    delta = layer.weight.matvec_transpose(&delta);
                }
            }
        }
        Ok((total_loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::reconstruction_loss;
    use crate::test_util::rel_err;

    #[test]
    fn single_linear_layer_gradient_closed_form() {
        // one linear "autoencoder" layer y = Wx + b, single sample:
        // dL/dW = 2 (Wx + b - x) x^T
        let mut rng = SeededRng::new(1);
        let enc = DenseLayer::init(2, 2, Activation::Identity, &mut rng);
        let dec = DenseLayer {
            weight: Matrix::identity(2),
            bias: vec![0.0, 0.0],
            activation: Activation::Identity,
        };
        let model = DenseAutoencoder::new(vec![enc], vec![dec]);
        let x = vec![0.7, -1.3];
        let (_, grads) = model.loss_and_grads(std::slice::from_ref(&x)).unwrap();
        let y = model.encode(&x).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let expect = 2.0 * (y[r] - x[r]) * x[c];
                assert!((grads[0][r * 2 + c] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_error_batch_zero_gradients() {
        let model = DenseAutoencoder::new(
            vec![DenseLayer {
                weight: Matrix::identity(3),
                bias: vec![0.0; 3],
                activation: Activation::Identity,
            }],
            vec![DenseLayer {
                weight: Matrix::identity(3),
                bias: vec![0.0; 3],
                activation: Activation::Identity,
            }],
        );
        let batch = vec![vec![1.0, -2.0, 0.5]];
        let (loss, grads) = model.loss_and_grads(&batch).unwrap();
        assert_eq!(loss, 0.0);
        for g in grads {
            assert!(g.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = SeededRng::new(7);
        let mut model = DenseAutoencoder::from_spec(
            5,
            &[4],
            2,
            Activation::Tanh,
            Activation::Sigmoid,
            &mut rng,
        );
        let batch: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.next_f64()).collect())
            .collect();
        let (_, grads) = model.loss_and_grads(&batch).unwrap();
        let delta = 1e-5;
        for i in 0..model.num_tensors() {
            for j in 0..model.tensor(i).len() {
                let orig = model.tensor(i)[j];
                model.tensor_mut(i)[j] = orig + delta;
                let up = reconstruction_loss(&model, &batch).unwrap();
                model.tensor_mut(i)[j] = orig - delta;
                let down = reconstruction_loss(&model, &batch).unwrap();
                model.tensor_mut(i)[j] = orig;
                let fd = (up - down) / (2.0 * delta);
                assert!(
                    rel_err(grads[i][j], fd) < 1e-4,
                    "tensor {i} entry {j}: analytic {} vs fd {fd}",
                    grads[i][j]
                );
            }
        }
    }
}
