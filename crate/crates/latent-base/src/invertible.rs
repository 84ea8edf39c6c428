//! Invertible perceptron: piecewise-invertible nonlinearities, linear layers
//! with a shared-parameter pseudo-inverse, and exact per-layer log-volume
//! terms for change-of-variables likelihoods.
//!
//! Each nonlinearity keeps the original curve in its non-saturated regime and
//! hands off to a linear tail of slope `c` outside it, with the knot and
//! offset solved at construction so the function is continuous with a
//! continuous first derivative. That makes the whole map a strictly
//! increasing bijection of the real line with a derivative bounded below
//! by `c`.

use crate::error::{Error, Result};
use crate::numerics::{cholesky, Matrix, SeededRng, SpdFactorization};

pub const DEFAULT_TAIL_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonlinearityKind {
    TanhInvertible,
    SigmoidInvertible,
}

/// Piecewise-invertible scalar nonlinearity.
#[derive(Debug, Clone)]
pub struct InvertibleNonlinearity {
    kind: NonlinearityKind,
    slope_c: f64,
    /// Positive knot `t*` where the curve's derivative equals `slope_c`;
    /// tails take over beyond `±knot`.
    knot: f64,
    /// Continuity offset of the upper tail `c*t + b`. The lower tail offset
    /// follows from symmetry (`-b` for tanh, `1 - b` for sigmoid).
    offset_b: f64,
    /// Curve value at the positive knot; inversion switches branch here.
    value_at_knot: f64,
}

fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Bisection for the knot: the inner derivative is strictly decreasing in
/// |t|, so the slope-matching equation `deriv(t*) = c` has a unique positive
/// root.
fn solve_knot(deriv: impl Fn(f64) -> f64, c: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    debug_assert!(deriv(lo) > c && deriv(hi) < c);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) > c {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl InvertibleNonlinearity {
    pub fn tanh_invertible(slope_c: f64) -> Self {
        assert!(slope_c > 0.0 && slope_c < 1.0, "tail slope must be in (0,1)");
        let knot = solve_knot(|t| 1.0 - t.tanh() * t.tanh(), slope_c);
        let value_at_knot = knot.tanh();
        InvertibleNonlinearity {
            kind: NonlinearityKind::TanhInvertible,
            slope_c,
            knot,
            offset_b: value_at_knot - slope_c * knot,
            value_at_knot,
        }
    }

    pub fn sigmoid_invertible(slope_c: f64) -> Self {
        assert!(slope_c > 0.0 && slope_c < 0.25, "tail slope must be in (0,0.25)");
        let knot = solve_knot(
            |t| {
                let s = sigmoid(t);
                s * (1.0 - s)
            },
            slope_c,
        );
        let value_at_knot = sigmoid(knot);
        InvertibleNonlinearity {
            kind: NonlinearityKind::SigmoidInvertible,
            slope_c,
            knot,
            offset_b: value_at_knot - slope_c * knot,
            value_at_knot,
        }
    }

    pub fn kind(&self) -> NonlinearityKind {
        self.kind
    }

    pub fn slope_c(&self) -> f64 {
        self.slope_c
    }

    pub fn knot(&self) -> f64 {
        self.knot
    }

    pub fn offset_b(&self) -> f64 {
        self.offset_b
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.kind {
            NonlinearityKind::TanhInvertible => {
                if t > self.knot {
                    self.slope_c * t + self.offset_b
                } else if t < -self.knot {
                    self.slope_c * t - self.offset_b
                } else {
                    t.tanh()
                }
            }
            NonlinearityKind::SigmoidInvertible => {
                if t > self.knot {
                    self.slope_c * t + self.offset_b
                } else if t < -self.knot {
                    self.slope_c * t + (1.0 - self.offset_b)
                } else {
                    sigmoid(t)
                }
            }
        }
    }

    pub fn invert(&self, y: f64) -> f64 {
        match self.kind {
            NonlinearityKind::TanhInvertible => {
                if y > self.value_at_knot {
                    (y - self.offset_b) / self.slope_c
                } else if y < -self.value_at_knot {
                    (y + self.offset_b) / self.slope_c
                } else {
                    y.atanh()
                }
            }
            NonlinearityKind::SigmoidInvertible => {
                if y > self.value_at_knot {
                    (y - self.offset_b) / self.slope_c
                } else if y < 1.0 - self.value_at_knot {
                    (y - (1.0 - self.offset_b)) / self.slope_c
                } else {
                    (y / (1.0 - y)).ln()
                }
            }
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        if t.abs() > self.knot {
            return self.slope_c;
        }
        match self.kind {
            NonlinearityKind::TanhInvertible => 1.0 - t.tanh() * t.tanh(),
            NonlinearityKind::SigmoidInvertible => {
                let s = sigmoid(t);
                s * (1.0 - s)
            }
        }
    }

    pub fn log_abs_deriv(&self, t: f64) -> f64 {
        self.deriv(t).ln()
    }

    /// `-f''(t)/f'(t)`, the derivative of `-log f'(t)`. Needed when the
    /// volume term is differentiated with respect to pre-activations.
    pub fn neg_log_deriv_grad(&self, t: f64) -> f64 {
        if t.abs() > self.knot {
            return 0.0;
        }
        match self.kind {
            NonlinearityKind::TanhInvertible => 2.0 * t.tanh(),
            NonlinearityKind::SigmoidInvertible => 2.0 * sigmoid(t) - 1.0,
        }
    }
}

/// Linear layer `W h + b` whose inverse direction reuses the same
/// parameters: `(W^T W)^-1 W^T (x - b)`. `W` is `out_dim x in_dim` with
/// `out_dim >= in_dim` and full column rank.
#[derive(Debug, Clone)]
pub struct PseudoLinearLayer {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl PseudoLinearLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Self {
        assert!(
            weight.rows() >= weight.cols(),
            "output dim must be >= input dim"
        );
        assert_eq!(weight.rows(), bias.len());
        PseudoLinearLayer { weight, bias }
    }

    /// Uniform init in ±sqrt(6/(fan_in+fan_out)).
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut SeededRng) -> Self {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let mut w = Matrix::zeros(out_dim, in_dim);
        for v in w.data_mut() {
            *v = (rng.next_f64() * 2.0 - 1.0) * bound;
        }
        PseudoLinearLayer {
            weight: w,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        if h.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                actual: h.len(),
                context: "linear forward input",
            });
        }
        let mut out = self.weight.matvec(h);
        for (o, b) in out.iter_mut().zip(&self.bias) {
            *o += b;
        }
        Ok(out)
    }

    /// Solver for `W^T W` systems, shared across a batch of inversions.
    pub fn gram_solver(&self) -> Result<GramSolver> {
        GramSolver::new(self.weight.gram())
    }

    pub fn pseudo_inverse_with(&self, gram: &GramSolver, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.out_dim(),
                actual: x.len(),
                context: "linear pseudo-inverse input",
            });
        }
        let centered: Vec<f64> = x.iter().zip(&self.bias).map(|(v, b)| v - b).collect();
        let wt_x = self.weight.matvec_transpose(&centered);
        gram.solve(&wt_x)
    }

    /// Least-squares pre-image; the exact inverse whenever `x` lies in the
    /// layer's affine range.
    pub fn pseudo_inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let gram = self.gram_solver()?;
        self.pseudo_inverse_with(&gram, x)
    }

    /// `0.5 * log det(W^T W)`, the log of the volume scaling of the
    /// rectangular map.
    pub fn log_volume(&self) -> Result<f64> {
        Ok(0.5 * self.gram_solver()?.log_det())
    }
}

/// Cholesky solver for a Gram matrix `W^T W`. Factorization happens on a
/// jittered copy so near-rank-deficient layers still factor; one iterative
/// refinement step against the unjittered matrix restores the accuracy the
/// round-trip contracts need.
#[derive(Debug, Clone)]
pub struct GramSolver {
    gram: Matrix,
    chol: SpdFactorization,
}

impl GramSolver {
    pub fn new(gram: Matrix) -> Result<Self> {
        let jitter = 1e-10 * gram.trace() / gram.rows().max(1) as f64;
        let mut damped = gram.clone();
        damped.add_scaled_identity(jitter);
        let chol = cholesky(&damped)?;
        Ok(GramSolver { gram, chol })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = self.chol.solve(b)?;
        let gx = self.gram.matvec(&x);
        let residual: Vec<f64> = b.iter().zip(&gx).map(|(bi, gi)| bi - gi).collect();
        let correction = self.chol.solve(&residual)?;
        for (xi, c) in x.iter_mut().zip(&correction) {
            *xi += c;
        }
        Ok(x)
    }

    pub fn log_det(&self) -> f64 {
        self.chol.log_det()
    }
}

/// One stage of an invertible net: a pseudo-invertible linear layer followed
/// by an optional elementwise invertible nonlinearity.
#[derive(Debug, Clone)]
pub struct Stage {
    pub linear: PseudoLinearLayer,
    pub activation: Option<InvertibleNonlinearity>,
}

/// Feedforward net built from invertible stages. The canonical image
/// architecture is `perceptron`: latent -> tanh stage -> sigmoid stage; a
/// bare linear map (used by the 2-D demos) is a single stage without an
/// activation.
#[derive(Debug, Clone)]
pub struct InvertibleNet {
    stages: Vec<Stage>,
}

/// Per-stage records from a forward pass: pre-activations feed the volume
/// term and its gradients.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Stage inputs, i.e. `h` before each linear layer.
    pub inputs: Vec<Vec<f64>>,
    /// Pre-activations `W h + b` per stage.
    pub pre_activations: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl InvertibleNet {
    pub fn new(stages: Vec<Stage>) -> Self {
        assert!(!stages.is_empty());
        for pair in stages.windows(2) {
            assert_eq!(
                pair[0].linear.out_dim(),
                pair[1].linear.in_dim(),
                "stage dims must chain"
            );
        }
        InvertibleNet { stages }
    }

    /// The two-stage invertible perceptron: `latent_dim -> hidden_dim`
    /// through an invertible tanh, then `hidden_dim -> out_dim` through an
    /// invertible sigmoid. Defaults elsewhere are K -> 600 -> 784.
    pub fn perceptron(
        latent_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        rng: &mut SeededRng,
    ) -> Self {
        InvertibleNet::new(vec![
            Stage {
                linear: PseudoLinearLayer::init(hidden_dim, latent_dim, rng),
                activation: Some(InvertibleNonlinearity::tanh_invertible(DEFAULT_TAIL_SLOPE)),
            },
            Stage {
                linear: PseudoLinearLayer::init(out_dim, hidden_dim, rng),
                activation: Some(InvertibleNonlinearity::sigmoid_invertible(
                    DEFAULT_TAIL_SLOPE,
                )),
            },
        ])
    }

    /// Single linear stage `x = W h + b` (square when `weight` is square).
    pub fn linear(weight: Matrix, bias: Vec<f64>) -> Self {
        InvertibleNet::new(vec![Stage {
            linear: PseudoLinearLayer::new(weight, bias),
            activation: None,
        }])
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stages_mut(&mut self) -> &mut [Stage] {
        &mut self.stages
    }

    pub fn latent_dim(&self) -> usize {
        self.stages[0].linear.in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.stages.last().unwrap().linear.out_dim()
    }

    pub fn is_square(&self) -> bool {
        self.stages
            .iter()
            .all(|s| s.linear.in_dim() == s.linear.out_dim())
    }

    pub fn forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(h)?.output)
    }

    pub fn forward_trace(&self, h: &[f64]) -> Result<ForwardTrace> {
        let mut inputs = Vec::with_capacity(self.stages.len());
        let mut pre_activations = Vec::with_capacity(self.stages.len());
        let mut cur = h.to_vec();
        for stage in &self.stages {
            inputs.push(cur.clone());
            let z = stage.linear.forward(&cur)?;
            pre_activations.push(z.clone());
            cur = match &stage.activation {
                Some(act) => z.iter().map(|&t| act.eval(t)).collect(),
                None => z,
            };
        }
        Ok(ForwardTrace {
            inputs,
            pre_activations,
            output: cur,
        })
    }

    /// Exact reverse composition: undo each stage's activation, then its
    /// linear layer, from the last stage back to the first. Equals the true
    /// inverse whenever `x` is in the net's range; otherwise each linear
    /// step takes the least-squares pre-image.
    pub fn inverse(&self, x: &[f64]) -> Result<Vec<f64>> {
        let grams = self.gram_solvers()?;
        self.inverse_with(&grams, x)
    }

    /// Gram solvers for every stage, computed once per batch.
    pub fn gram_solvers(&self) -> Result<Vec<GramSolver>> {
        self.stages.iter().map(|s| s.linear.gram_solver()).collect()
    }

    pub fn inverse_with(&self, grams: &[GramSolver], x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                actual: x.len(),
                context: "net inverse input",
            });
        }
        let mut cur = x.to_vec();
        for (stage, gram) in self.stages.iter().zip(grams).rev() {
            if let Some(act) = &stage.activation {
                for v in cur.iter_mut() {
                    *v = act.invert(*v);
                }
            }
            cur = stage.linear.pseudo_inverse_with(gram, &cur)?;
        }
        Ok(cur)
    }

    /// Log-volume expansion of the forward map at `h`: the sum of each
    /// stage's `0.5*log det(W^T W)` plus the log-derivatives of its
    /// activation at the actual pre-activations. Likelihoods subtract this
    /// value (the inverse map's volume term is its negation).
    pub fn log_volume(&self, h: &[f64]) -> Result<f64> {
        let trace = self.forward_trace(h)?;
        self.log_volume_from_trace(&trace)
    }

    pub fn log_volume_from_trace(&self, trace: &ForwardTrace) -> Result<f64> {
        let mut total = 0.0;
        for (stage, z) in self.stages.iter().zip(&trace.pre_activations) {
            total += stage.linear.log_volume()?;
            if let Some(act) = &stage.activation {
                total += z.iter().map(|&t| act.log_abs_deriv(t)).sum::<f64>();
            }
        }
        Ok(total)
    }
}
