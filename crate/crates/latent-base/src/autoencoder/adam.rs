//! Adam with bias correction, operating on the flat tensor views exposed by
//! `TrainableModel`.

use super::TrainableModel;

#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    cfg: AdamConfig,
    step: usize,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_shapes: &[usize], cfg: AdamConfig) -> Self {
        AdamState {
            cfg,
            step: 0,
            first_moment: tensor_shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: tensor_shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One Adam update for every parameter tensor; gradient shapes must
    /// match the model's tensors.
    pub fn step<M: TrainableModel>(&mut self, model: &mut M, grads: &[Vec<f64>]) {
        assert_eq!(grads.len(), model.num_tensors(), "gradient tensor count");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        for i in 0..grads.len() {
            let params = model.tensor_mut(i);
            assert_eq!(params.len(), grads[i].len(), "gradient shape for tensor {i}");
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            for j in 0..params.len() {
                let g = grads[i][j];
                m[j] = self.cfg.beta1 * m[j] + (1.0 - self.cfg.beta1) * g;
                v[j] = self.cfg.beta2 * v[j] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                params[j] -= self.cfg.learning_rate * m_hat / (v_hat.sqrt() + self.cfg.epsilon);
            }
        }
    }
}
