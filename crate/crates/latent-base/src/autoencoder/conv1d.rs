//! Untied 1-D convolutional autoencoder for audio chunks: strided
//! convolution stages down to a flat latent vector and mirrored transposed
//! convolutions back up. Feature maps are channel-major flat buffers.

use super::{Activation, LatentMapping, TrainableModel};
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Geometry of the chunk autoencoder. The defaults map 800-sample chunks
/// through three stages of filters 200 samples long down to an
/// 80-dimensional latent vector; strides and channel widths are
/// configuration, and any setting that divides the chunk length cleanly
/// keeps the 800 -> latent -> 800 shape contract.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Conv1dConfig {
    pub input_len: usize,
    pub channels: Vec<usize>,
    pub strides: Vec<usize>,
    pub filter_len: usize,
    pub encoder_acts: Vec<Activation>,
    pub decoder_acts: Vec<Activation>,
}

impl Default for Conv1dConfig {
    fn default() -> Self {
        Conv1dConfig {
            input_len: 800,
            channels: vec![1, 16, 32, 1],
            strides: vec![2, 5, 1],
            filter_len: 200,
            encoder_acts: vec![Activation::Tanh, Activation::Tanh, Activation::Identity],
            decoder_acts: vec![Activation::Tanh, Activation::Tanh, Activation::Tanh],
        }
    }
}

impl Conv1dConfig {
    pub fn validate(&self) -> Result<()> {
        let stages = self.strides.len();
        if self.channels.len() != stages + 1 {
            return Err(Error::Config(
                "channels must have one more entry than strides".into(),
            ));
        }
        if self.channels[0] != 1 {
            return Err(Error::Config("first channel width must be 1".into()));
        }
        if self.encoder_acts.len() != stages || self.decoder_acts.len() != stages {
            return Err(Error::Config(
                "activation lists must match the stage count".into(),
            ));
        }
        let mut len = self.input_len;
        for &s in &self.strides {
            if s == 0 || len % s != 0 {
                return Err(Error::Config(format!(
                    "stride {s} does not divide feature length {len}"
                )));
            }
            len /= s;
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        let down: usize = self.strides.iter().product();
        self.input_len / down * self.channels.last().unwrap()
    }

    fn stage_lens(&self) -> Vec<usize> {
        let mut lens = vec![self.input_len];
        for &s in &self.strides {
            lens.push(lens.last().unwrap() / s);
        }
        lens
    }
}

/// One strided convolution: `[in_ch][len] -> [out_ch][len/stride]`.
#[derive(Debug, Clone)]
struct ConvStage {
    weight: Vec<f64>, // [out_ch][in_ch][filter_len]
    bias: Vec<f64>,
    in_ch: usize,
    out_ch: usize,
    filter_len: usize,
    stride: usize,
    pad: usize,
    activation: Activation,
}

impl ConvStage {
    fn init(
        in_ch: usize,
        out_ch: usize,
        filter_len: usize,
        stride: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = in_ch * filter_len;
        let fan_out = out_ch * filter_len;
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = (0..out_ch * in_ch * filter_len)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * bound)
            .collect();
        ConvStage {
            weight,
            bias: vec![0.0; out_ch],
            in_ch,
            out_ch,
            filter_len,
            stride,
            pad: (filter_len.saturating_sub(stride)) / 2,
            activation,
        }
    }

    fn w(&self, oc: usize, ic: usize, k: usize) -> f64 {
        self.weight[(oc * self.in_ch + ic) * self.filter_len + k]
    }

    /// Returns (pre-activation, activation) maps of shape [out_ch][out_len].
    fn forward(&self, x: &[f64], in_len: usize) -> (Vec<f64>, Vec<f64>) {
        let out_len = in_len / self.stride;
        let mut z = vec![0.0; self.out_ch * out_len];
        for oc in 0..self.out_ch {
            for t in 0..out_len {
                let mut acc = self.bias[oc];
                let base = t * self.stride;
                for ic in 0..self.in_ch {
                    let xrow = &x[ic * in_len..(ic + 1) * in_len];
                    for k in 0..self.filter_len {
                        let u = base + k;
                        if u < self.pad || u - self.pad >= in_len {
                            continue;
                        }
                        acc += self.w(oc, ic, k) * xrow[u - self.pad];
                    }
                }
                z[oc * out_len + t] = acc;
            }
        }
        let a = z.iter().map(|&v| self.activation.eval(v)).collect();
        (z, a)
    }

    /// Gradients given `delta` with respect to the pre-activation; returns
    /// the gradient with respect to the input map.
    fn backward(
        &self,
        x: &[f64],
        in_len: usize,
        delta: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Vec<f64> {
        let out_len = in_len / self.stride;
        let mut gx = vec![0.0; self.in_ch * in_len];
        for oc in 0..self.out_ch {
            for t in 0..out_len {
                let d = delta[oc * out_len + t];
                if d == 0.0 {
                    continue;
                }
                gb[oc] += d;
                let base = t * self.stride;
                for ic in 0..self.in_ch {
                    let xrow = &x[ic * in_len..(ic + 1) * in_len];
                    let grow = &mut gx[ic * in_len..(ic + 1) * in_len];
                    let wbase = (oc * self.in_ch + ic) * self.filter_len;
                    for k in 0..self.filter_len {
                        let u = base + k;
                        if u < self.pad || u - self.pad >= in_len {
                            continue;
                        }
                        gw[wbase + k] += d * xrow[u - self.pad];
                        grow[u - self.pad] += d * self.weight[wbase + k];
                    }
                }
            }
        }
        gx
    }
}

/// One transposed convolution: `[in_ch][len] -> [out_ch][len*stride]`.
#[derive(Debug, Clone)]
struct TconvStage {
    weight: Vec<f64>, // [out_ch][in_ch][filter_len]
    bias: Vec<f64>,
    in_ch: usize,
    out_ch: usize,
    filter_len: usize,
    stride: usize,
    pad: usize,
    activation: Activation,
}

impl TconvStage {
    fn init(
        in_ch: usize,
        out_ch: usize,
        filter_len: usize,
        stride: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        let fan_in = in_ch * filter_len;
        let fan_out = out_ch * filter_len;
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weight = (0..out_ch * in_ch * filter_len)
            .map(|_| (rng.next_f64() * 2.0 - 1.0) * bound)
            .collect();
        TconvStage {
            weight,
            bias: vec![0.0; out_ch],
            in_ch,
            out_ch,
            filter_len,
            stride,
            pad: (filter_len.saturating_sub(stride)) / 2,
            activation,
        }
    }

    fn forward(&self, x: &[f64], in_len: usize) -> (Vec<f64>, Vec<f64>) {
        let out_len = in_len * self.stride;
        let mut z = vec![0.0; self.out_ch * out_len];
        for oc in 0..self.out_ch {
            let zrow = &mut z[oc * out_len..(oc + 1) * out_len];
            for v in zrow.iter_mut() {
                *v = self.bias[oc];
            }
            for ic in 0..self.in_ch {
                let xrow = &x[ic * in_len..(ic + 1) * in_len];
                let wbase = (oc * self.in_ch + ic) * self.filter_len;
                for t in 0..in_len {
                    let xv = xrow[t];
                    if xv == 0.0 {
                        continue;
                    }
                    let base = t * self.stride;
                    for k in 0..self.filter_len {
                        let u = base + k;
                        if u < self.pad || u - self.pad >= out_len {
                            continue;
                        }
                        zrow[u - self.pad] += self.weight[wbase + k] * xv;
                    }
                }
            }
        }
        let a = z.iter().map(|&v| self.activation.eval(v)).collect();
        (z, a)
    }

    fn backward(
        &self,
        x: &[f64],
        in_len: usize,
        delta: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
    ) -> Vec<f64> {
        let out_len = in_len * self.stride;
        let mut gx = vec![0.0; self.in_ch * in_len];
        for oc in 0..self.out_ch {
            let drow = &delta[oc * out_len..(oc + 1) * out_len];
            gb[oc] += drow.iter().sum::<f64>();
            for ic in 0..self.in_ch {
                let xrow = &x[ic * in_len..(ic + 1) * in_len];
                let grow = &mut gx[ic * in_len..(ic + 1) * in_len];
                let wbase = (oc * self.in_ch + ic) * self.filter_len;
                for t in 0..in_len {
                    let base = t * self.stride;
                    let mut acc = 0.0;
                    for k in 0..self.filter_len {
                        let u = base + k;
                        if u < self.pad || u - self.pad >= out_len {
                            continue;
                        }
                        let d = drow[u - self.pad];
                        gw[wbase + k] += d * xrow[t];
                        acc += d * self.weight[wbase + k];
                    }
                    grow[t] += acc;
                }
            }
        }
        gx
    }
}

/// Three-stage (by default) convolutional chunk autoencoder.
#[derive(Debug, Clone)]
pub struct Conv1dAutoencoder {
    cfg: Conv1dConfig,
    encoder: Vec<ConvStage>,
    decoder: Vec<TconvStage>,
}

impl Conv1dAutoencoder {
    pub fn new(cfg: Conv1dConfig, rng: &mut SeededRng) -> Result<Self> {
        cfg.validate()?;
        let stages = cfg.strides.len();
        let mut encoder = Vec::with_capacity(stages);
        for i in 0..stages {
            encoder.push(ConvStage::init(
                cfg.channels[i],
                cfg.channels[i + 1],
                cfg.filter_len,
                cfg.strides[i],
                cfg.encoder_acts[i],
                rng,
            ));
        }
        let mut decoder = Vec::with_capacity(stages);
        for i in (0..stages).rev() {
            decoder.push(TconvStage::init(
                cfg.channels[i + 1],
                cfg.channels[i],
                cfg.filter_len,
                cfg.strides[i],
                cfg.decoder_acts[i],
                rng,
            ));
        }
        Ok(Conv1dAutoencoder {
            cfg,
            encoder,
            decoder,
        })
    }

    pub fn config(&self) -> &Conv1dConfig {
        &self.cfg
    }

    fn encoder_lens(&self) -> Vec<usize> {
        self.cfg.stage_lens()
    }
}

impl LatentMapping for Conv1dAutoencoder {
    fn latent_dim(&self) -> usize {
        self.cfg.latent_dim()
    }

    fn data_dim(&self) -> usize {
        self.cfg.input_len
    }

    fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cfg.input_len {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.input_len,
                actual: x.len(),
                context: "conv encode input",
            });
        }
        let lens = self.encoder_lens();
        let mut cur = x.to_vec();
        for (i, stage) in self.encoder.iter().enumerate() {
            cur = stage.forward(&cur, lens[i]).1;
        }
        Ok(cur)
    }

    fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.latent_dim(),
                actual: h.len(),
                context: "conv decode input",
            });
        }
        let lens = self.encoder_lens();
        let mut cur = h.to_vec();
        for (i, stage) in self.decoder.iter().enumerate() {
            let in_len = lens[lens.len() - 1 - i];
            cur = stage.forward(&cur, in_len).1;
        }
        Ok(cur)
    }
}

impl TrainableModel for Conv1dAutoencoder {
    fn num_tensors(&self) -> usize {
        2 * (self.encoder.len() + self.decoder.len())
    }

    fn tensor(&self, i: usize) -> &[f64] {
        let ne = self.encoder.len();
        let (stage_w, stage_b): (&[f64], &[f64]) = if i / 2 < ne {
            (&self.encoder[i / 2].weight, &self.encoder[i / 2].bias)
        } else {
            (
                &self.decoder[i / 2 - ne].weight,
                &self.decoder[i / 2 - ne].bias,
            )
        };
        if i % 2 == 0 {
            stage_w
        } else {
            stage_b
        }
    }

    fn tensor_mut(&mut self, i: usize) -> &mut [f64] {
        let ne = self.encoder.len();
        if i / 2 < ne {
            let s = &mut self.encoder[i / 2];
            if i % 2 == 0 {
                &mut s.weight
            } else {
                &mut s.bias
            }
        } else {
            let s = &mut self.decoder[i / 2 - ne];
            if i % 2 == 0 {
                &mut s.weight
            } else {
                &mut s.bias
            }
        }
    }

    fn loss_and_grads(&self, batch: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        assert!(!batch.is_empty());
        let ne = self.encoder.len();
        let lens = self.encoder_lens();
        let mut grads: Vec<Vec<f64>> = (0..self.num_tensors())
            .map(|i| vec![0.0; self.tensor(i).len()])
            .collect();
        let mut total_loss = 0.0;
        let inv_n = 1.0 / batch.len() as f64;

        for x in batch {
            if x.len() != self.cfg.input_len {
                return Err(Error::DimensionMismatch {
                    expected: self.cfg.input_len,
                    actual: x.len(),
                    context: "conv training input",
                });
            }
            // encoder forward
            let mut enc_inputs = Vec::with_capacity(ne);
            let mut enc_preacts = Vec::with_capacity(ne);
            let mut cur = x.clone();
            for (i, stage) in self.encoder.iter().enumerate() {
                enc_inputs.push(cur.clone());
                let (z, a) = stage.forward(&cur, lens[i]);
                enc_preacts.push(z);
                cur = a;
            }
            // decoder forward
            let mut dec_inputs = Vec::with_capacity(ne);
            let mut dec_preacts = Vec::with_capacity(ne);
            for (i, stage) in self.decoder.iter().enumerate() {
                dec_inputs.push(cur.clone());
                let in_len = lens[lens.len() - 1 - i];
                let (z, a) = stage.forward(&cur, in_len);
                dec_preacts.push(z);
                cur = a;
            }

            total_loss += cur
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                * inv_n;
            let mut delta: Vec<f64> = cur
                .iter()
                .zip(x)
                .map(|(a, b)| 2.0 * (a - b) * inv_n)
                .collect();

            // decoder backward
            for i in (0..ne).rev() {
                let stage = &self.decoder[i];
                for (d, z) in delta.iter_mut().zip(&dec_preacts[i]) {
                    *d *= stage.activation.deriv(*z);
                }
                let in_len = lens[lens.len() - 1 - i];
                let ti = 2 * (ne + i);
                let (head, tail) = grads.split_at_mut(ti + 1);
                delta = stage.backward(
                    &dec_inputs[i],
                    in_len,
                    &delta,
                    head.last_mut().unwrap(),
                    &mut tail[0],
                );
            }
            // encoder backward
            for i in (0..ne).rev() {
                let stage = &self.encoder[i];
                for (d, z) in delta.iter_mut().zip(&enc_preacts[i]) {
                    *d *= stage.activation.deriv(*z);
                }
                let ti = 2 * i;
                let (head, tail) = grads.split_at_mut(ti + 1);
                delta = stage.backward(
                    &enc_inputs[i],
                    lens[i],
                    &delta,
                    head.last_mut().unwrap(),
                    &mut tail[0],
                );
            }
        }
        Ok((total_loss, grads))
    }
}
