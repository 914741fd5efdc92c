//! Fusion of the two filtering paths and the supervised MLP that turns the
//! fused representation into node embeddings.
//!
//! Architecture: `H = act(act(Z W1 + b1) W2 + b2)` followed by an affine
//! two-way softmax head `p = softmax(H Wp + bp)`. The loss is class-weighted
//! cross-entropy over the training nodes, averaged by total sample weight,
//! plus an optional L2 penalty on the weight matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};

use crate::error::{Error, Result};
use crate::labels::{Label, LabelSet, Split};
use crate::math;
use crate::matrix::{EmbeddingMatrix, Matrix};
use crate::metrics;
use crate::rng;

/// `[z1 || z2]`; an empty (zero-width) block is an identity.
pub fn fuse(z1: &EmbeddingMatrix, z2: &EmbeddingMatrix) -> Result<EmbeddingMatrix> {
    z1.hconcat(z2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => math::tanh(x),
        }
    }

    /// Derivative given the pre-activation `x` and output `y`.
    #[inline]
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ClassWeight {
    None,
    /// Each class weighted by `n_train / (2 * n_class)`.
    #[default]
    Balanced,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub hidden_dim: usize,
    pub embedding_dim: usize,
    pub weight_decay: f64,
    pub class_weight: ClassWeight,
    pub activation: Activation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            learning_rate: 0.01,
            optimizer: Optimizer::Adam,
            hidden_dim: 64,
            embedding_dim: 64,
            weight_decay: 0.0,
            class_weight: ClassWeight::Balanced,
            activation: Activation::Relu,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("train: {what}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.hidden_dim == 0 || self.embedding_dim == 0 {
            return bad("hidden_dim and embedding_dim must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be non-negative");
        }
        Ok(())
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerShape {
    fan_in: usize,
    fan_out: usize,
    w_offset: usize,
    b_offset: usize,
}

/// Two hidden transforms plus a two-way classification head, with all
/// parameters in one flat vector: for each layer the `fan_in x fan_out`
/// row-major weight matrix followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    shapes: [LayerShape; 3],
    params: Vec<f64>,
    activation: Activation,
    seed: u64,
}

/// Index of the classification head in [`MlpModel::layer_weights`].
pub const HEAD: usize = 2;

/// One training example: node row, class (1 = fraud) and loss weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub node: usize,
    pub class: u8,
    pub weight: f64,
}

/// Output of [`MlpModel::forward`].
#[derive(Debug, Clone)]
pub struct Forward {
    /// Embeddings `H`, one row per input row.
    pub embeddings: EmbeddingMatrix,
    /// `[p_benign, p_fraud]` per row.
    pub probs: Vec<[f64; 2]>,
}

impl Forward {
    pub fn fraud_probs(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p[1]).collect()
    }
}

fn softmax2(l: [f64; 2]) -> [f64; 2] {
    // stable two-way softmax
    let p1 = math::sigmoid(l[1] - l[0]);
    [1.0 - p1, p1]
}

/// `-ln softmax(l)[class]` computed from log-sum-exp.
fn cross_entropy(l: [f64; 2], class: u8) -> f64 {
    let m = l[0].max(l[1]);
    let lse = m + math::ln(math::exp(l[0] - m) + math::exp(l[1] - m));
    lse - l[class as usize]
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(input_dim: usize, hidden_dim: usize, embedding_dim: usize, activation: Activation) -> Self {
        let dims = [(input_dim, hidden_dim), (hidden_dim, embedding_dim), (embedding_dim, 2)];
        let mut offset = 0;
        let shapes = dims.map(|(fan_in, fan_out)| {
            let s = LayerShape {
                fan_in,
                fan_out,
                w_offset: offset,
                b_offset: offset + fan_in * fan_out,
            };
            offset += fan_in * fan_out + fan_out;
            s
        });
        MlpModel {
            shapes,
            params: vec![0.0; offset],
            activation,
            seed: 0,
        }
    }

    /// Glorot-uniform weights and zero biases drawn from the `init` stream of `seed`.
    pub fn new(input_dim: usize, hidden_dim: usize, embedding_dim: usize, activation: Activation, seed: u64) -> Self {
        let mut m = Self::zeros(input_dim, hidden_dim, embedding_dim, activation);
        m.seed = seed;
        let mut rng = rng::stream(seed, rng::STREAM_INIT);
        for s in m.shapes {
            let bound = math::sqrt(6.0 / (s.fan_in + s.fan_out).max(1) as f64);
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            for w in &mut m.params[s.w_offset..s.b_offset] {
                *w = dist.sample(&mut rng);
            }
        }
        m
    }

    /// Rebuilds a model from per-layer `(weights, bias)` pairs.
    pub fn from_layers(layers: [(&[f64], &[f64]); 3], input_dim: usize, activation: Activation, seed: u64) -> Result<Self> {
        let hidden = layers[0].1.len();
        let embedding = layers[1].1.len();
        let mut m = Self::zeros(input_dim, hidden, embedding, activation);
        m.seed = seed;
        for (l, (w, b)) in layers.iter().enumerate() {
            let s = m.shapes[l];
            if w.len() != s.fan_in * s.fan_out || b.len() != s.fan_out {
                return Err(Error::DimensionMismatch {
                    expected: s.fan_in * s.fan_out + s.fan_out,
                    actual: w.len() + b.len(),
                });
            }
            m.params[s.w_offset..s.b_offset].copy_from_slice(w);
            m.params[s.b_offset..s.b_offset + s.fan_out].copy_from_slice(b);
        }
        Ok(m)
    }

    /// Rebuilds a model from `[in, hidden, embedding, 2]` and the flat parameter vector.
    pub fn from_flat(layer_sizes: [usize; 4], params: Vec<f64>, activation: Activation, seed: u64) -> Result<Self> {
        if layer_sizes[3] != 2 {
            return Err(Error::InvalidConfig(format!("head width {} (expected 2)", layer_sizes[3])));
        }
        let mut m = Self::zeros(layer_sizes[0], layer_sizes[1], layer_sizes[2], activation);
        if params.len() != m.params.len() {
            return Err(Error::DimensionMismatch {
                expected: m.params.len(),
                actual: params.len(),
            });
        }
        if let Some(i) = params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        m.params = params;
        m.seed = seed;
        Ok(m)
    }

    /// `[in, hidden, embedding, 2]`.
    pub fn layer_sizes(&self) -> [usize; 4] {
        [
            self.shapes[0].fan_in,
            self.shapes[0].fan_out,
            self.shapes[1].fan_out,
            self.shapes[2].fan_out,
        ]
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].fan_in
    }

    pub fn embedding_dim(&self) -> usize {
        self.shapes[1].fan_out
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major `fan_in x fan_out` weights of layer `l` (0, 1, or [`HEAD`]).
    pub fn layer_weights(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        &self.params[s.w_offset..s.b_offset]
    }

    pub fn layer_bias(&self, l: usize) -> &[f64] {
        let s = self.shapes[l];
        &self.params[s.b_offset..s.b_offset + s.fan_out]
    }

    pub fn layer_weights_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.shapes[l];
        &mut self.params[s.w_offset..s.b_offset]
    }

    pub fn layer_bias_mut(&mut self, l: usize) -> &mut [f64] {
        let s = self.shapes[l];
        &mut self.params[s.b_offset..s.b_offset + s.fan_out]
    }

    fn check_input(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: z.cols(),
            });
        }
        if let Some(pos) = self.params.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: pos });
        }
        Ok(())
    }

    /// `out = act(input W + b)` for one layer; stores pre-activations in `pre`.
    fn layer_forward(&self, l: usize, input: &[f64], pre: &mut [f64], out: &mut [f64], activate: bool) {
        let s = self.shapes[l];
        pre.copy_from_slice(&self.params[s.b_offset..s.b_offset + s.fan_out]);
        let w = &self.params[s.w_offset..s.b_offset];
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let w_row = &w[i * s.fan_out..(i + 1) * s.fan_out];
            for (p, &wv) in pre.iter_mut().zip(w_row) {
                *p += a * wv;
            }
        }
        if activate {
            for (o, &p) in out.iter_mut().zip(pre.iter()) {
                *o = self.activation.apply(p);
            }
        } else {
            out.copy_from_slice(pre);
        }
    }

    /// Embeddings and class probabilities for every row of `z`.
    pub fn forward(&self, z: &Matrix) -> Result<Forward> {
        self.check_input(z)?;
        let [_, hd, ed, _] = self.layer_sizes();
        let mut embeddings = Matrix::zeros(z.rows(), ed);
        let mut probs = Vec::with_capacity(z.rows());
        let (mut pre1, mut a1) = (vec![0.0; hd], vec![0.0; hd]);
        let mut pre2 = vec![0.0; ed];
        let (mut pre3, mut logits) = ([0.0; 2], [0.0; 2]);
        for r in 0..z.rows() {
            self.layer_forward(0, z.row(r), &mut pre1, &mut a1, true);
            let h = embeddings.row_mut(r);
            self.layer_forward(1, &a1, &mut pre2, h, true);
            self.layer_forward(HEAD, embeddings.row(r), &mut pre3, &mut logits, false);
            probs.push(softmax2(logits));
        }
        Ok(Forward { embeddings, probs })
    }

    /// Smallest |pre-activation| over the hidden units for the given rows;
    /// used to keep finite-difference checks away from ReLU kinks.
    pub fn min_abs_preactivation(&self, z: &Matrix) -> Result<f64> {
        self.check_input(z)?;
        let [_, hd, ed, _] = self.layer_sizes();
        let (mut pre1, mut a1) = (vec![0.0; hd], vec![0.0; hd]);
        let (mut pre2, mut a2) = (vec![0.0; ed], vec![0.0; ed]);
        let mut best = f64::INFINITY;
        for r in 0..z.rows() {
            self.layer_forward(0, z.row(r), &mut pre1, &mut a1, true);
            self.layer_forward(1, &a1, &mut pre2, &mut a2, true);
            for v in pre1.iter().chain(&pre2) {
                best = best.min(v.abs());
            }
        }
        Ok(best)
    }

    /// Weighted cross-entropy summed over `samples` and its gradient with
    /// respect to the flat parameter vector (no normalization, no penalty).
    pub fn ce_sum_and_grad(&self, z: &Matrix, samples: &[Sample]) -> Result<(f64, Vec<f64>)> {
        self.check_input(z)?;
        let [_, hd, ed, _] = self.layer_sizes();
        let act = self.activation;
        let [s1, s2, s3] = self.shapes;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;

        let (mut pre1, mut a1) = (vec![0.0; hd], vec![0.0; hd]);
        let (mut pre2, mut a2) = (vec![0.0; ed], vec![0.0; ed]);
        let (mut pre3, mut logits) = ([0.0; 2], [0.0; 2]);
        let mut d2 = vec![0.0; ed];
        let mut d1 = vec![0.0; hd];

        for s in samples {
            let x = z.row(s.node);
            self.layer_forward(0, x, &mut pre1, &mut a1, true);
            self.layer_forward(1, &a1, &mut pre2, &mut a2, true);
            self.layer_forward(HEAD, &a2, &mut pre3, &mut logits, false);
            loss += s.weight * cross_entropy(logits, s.class);

            let p = softmax2(logits);
            let dl = [
                s.weight * (p[0] - if s.class == 0 { 1.0 } else { 0.0 }),
                s.weight * (p[1] - if s.class == 1 { 1.0 } else { 0.0 }),
            ];

            // head
            let wp = &self.params[s3.w_offset..s3.b_offset];
            for i in 0..ed {
                let g = &mut grad[s3.w_offset + i * 2..s3.w_offset + i * 2 + 2];
                g[0] += a2[i] * dl[0];
                g[1] += a2[i] * dl[1];
                let back = wp[i * 2] * dl[0] + wp[i * 2 + 1] * dl[1];
                d2[i] = back * act.derivative(pre2[i], a2[i]);
            }
            grad[s3.b_offset] += dl[0];
            grad[s3.b_offset + 1] += dl[1];

            // second hidden layer
            let w2 = &self.params[s2.w_offset..s2.b_offset];
            for i in 0..hd {
                let a = a1[i];
                let row = &mut grad[s2.w_offset + i * ed..s2.w_offset + (i + 1) * ed];
                if a != 0.0 {
                    for (g, &d) in row.iter_mut().zip(&d2) {
                        *g += a * d;
                    }
                }
                let w_row = &w2[i * ed..(i + 1) * ed];
                let back: f64 = w_row.iter().zip(&d2).map(|(w, d)| w * d).sum();
                d1[i] = back * act.derivative(pre1[i], a1[i]);
            }
            for (g, &d) in grad[s2.b_offset..s2.b_offset + ed].iter_mut().zip(&d2) {
                *g += d;
            }

            // first hidden layer
            for (i, &a) in x.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut grad[s1.w_offset + i * hd..s1.w_offset + (i + 1) * hd];
                for (g, &d) in row.iter_mut().zip(&d1) {
                    *g += a * d;
                }
            }
            for (g, &d) in grad[s1.b_offset..s1.b_offset + hd].iter_mut().zip(&d1) {
                *g += d;
            }
        }
        Ok((loss, grad))
    }

    /// Training objective: weighted-mean cross-entropy plus
    /// `weight_decay / 2 * sum(W^2)` over the three weight matrices.
    pub fn objective_and_grad(&self, z: &Matrix, samples: &[Sample], weight_decay: f64) -> Result<(f64, Vec<f64>)> {
        let (sum, mut grad) = self.ce_sum_and_grad(z, samples)?;
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        let inv = if total > 0.0 { 1.0 / total } else { 0.0 };
        for g in &mut grad {
            *g *= inv;
        }
        let mut loss = sum * inv;
        if weight_decay > 0.0 {
            for s in self.shapes {
                for k in s.w_offset..s.b_offset {
                    let w = self.params[k];
                    loss += 0.5 * weight_decay * w * w;
                    grad[k] += weight_decay * w;
                }
            }
        }
        Ok((loss, grad))
    }

    pub fn objective(&self, z: &Matrix, samples: &[Sample], weight_decay: f64) -> Result<f64> {
        // TODO: a forward-only loss would avoid the unused gradient work here
        Ok(self.objective_and_grad(z, samples, weight_decay)?.0)
    }
}

/// Compares analytic gradients of [`MlpModel::objective_and_grad`] with
/// central finite differences (step `1e-5`) and returns the largest relative
/// error `|a - n| / max(|a|, |n|, floor)`.
pub fn gradient_oracle_check(m: &MlpModel, z: &Matrix, samples: &[Sample], weight_decay: f64) -> Result<f64> {
    const STEP: f64 = 1e-5;
    const FLOOR: f64 = 1e-8;
    let (_, analytic) = m.objective_and_grad(z, samples, weight_decay)?;
    let mut probe = m.clone();
    let mut worst = 0.0f64;
    for k in 0..m.num_params() {
        let orig = probe.params[k];
        probe.params[k] = orig + STEP;
        let up = probe.objective(z, samples, weight_decay)?;
        probe.params[k] = orig - STEP;
        let down = probe.objective(z, samples, weight_decay)?;
        probe.params[k] = orig;
        let numeric = (up - down) / (2.0 * STEP);
        let a = analytic[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Training samples of a label set, weighted per `class_weight`.
pub fn training_samples(labels: &LabelSet, class_weight: ClassWeight) -> Result<Vec<Sample>> {
    let (fraud, benign) = labels.class_counts(Split::Train);
    if fraud == 0 || benign == 0 {
        return Err(Error::SingleClass { fraud, benign });
    }
    let total = (fraud + benign) as f64;
    let weight_of = |class: u8| match class_weight {
        ClassWeight::None => 1.0,
        ClassWeight::Balanced => {
            let count = if class == 1 { fraud } else { benign };
            total / (2.0 * count as f64)
        }
    };
    Ok(labels
        .indices(Split::Train)
        .into_iter()
        .map(|node| {
            let class = if labels.label(node) == Label::Fraud { 1 } else { 0 };
            Sample {
                node,
                class,
                weight: weight_of(class),
            }
        })
        .collect())
}

/// Result of [`train_mlp`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot with the best validation AP (or the last epoch when the
    /// validation split cannot be scored).
    pub model: MlpModel,
    /// Training objective before each update, plus the final value.
    pub loss_history: Vec<f64>,
    /// 1-based epoch of the returned snapshot; 0 means untrained.
    pub best_epoch: usize,
    pub best_val_ap: Option<f64>,
}

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Full-batch training on the train mask with best-validation-AP selection.
pub fn train_mlp(z: &Matrix, labels: &LabelSet, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if z.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: z.rows(),
        });
    }
    let samples = training_samples(labels, cfg.class_weight)?;
    let mut model = MlpModel::new(z.cols(), cfg.hidden_dim, cfg.embedding_dim, cfg.activation, cfg.seed);

    let val_nodes = labels.indices(Split::Val);
    let val_x = z.select_rows(&val_nodes);
    let val_y: Vec<bool> = val_nodes.iter().map(|&i| labels.label(i) == Label::Fraud).collect();
    let val_scorable = val_y.iter().any(|&y| y);

    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_ap: Option<f64> = None;
    let mut history = Vec::with_capacity(cfg.epochs + 1);
    let mut adam = AdamState {
        m: vec![0.0; model.num_params()],
        v: vec![0.0; model.num_params()],
        t: 0,
    };

    for epoch in 1..=cfg.epochs {
        let (loss, grad) = model.objective_and_grad(z, &samples, cfg.weight_decay)?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        history.push(loss);
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in model.params.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
            }
            Optimizer::Adam => {
                adam.t += 1;
                let c1 = 1.0 - libm::pow(ADAM_BETA1, adam.t as f64);
                let c2 = 1.0 - libm::pow(ADAM_BETA2, adam.t as f64);
                for k in 0..model.params.len() {
                    let g = grad[k];
                    adam.m[k] = ADAM_BETA1 * adam.m[k] + (1.0 - ADAM_BETA1) * g;
                    adam.v[k] = ADAM_BETA2 * adam.v[k] + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = adam.m[k] / c1;
                    let v_hat = adam.v[k] / c2;
                    model.params[k] -= cfg.learning_rate * m_hat / (math::sqrt(v_hat) + ADAM_EPS);
                }
            }
        }
        if let Some(pos) = model.params.iter().position(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: model.params[pos],
            });
        }

        if val_scorable {
            let scores = model.forward(&val_x)?.fraud_probs();
            let ap = metrics::average_precision_raw(&scores, &val_y);
            if best_ap.is_none_or(|b| ap > b) {
                best_ap = Some(ap);
                best_epoch = epoch;
                best = model.clone();
            }
        }
    }
    if cfg.epochs > 0 {
        let (loss, _) = model.objective_and_grad(z, &samples, cfg.weight_decay)?;
        history.push(loss);
    }
    if !val_scorable {
        best = model;
        best_epoch = cfg.epochs;
    }
    Ok(TrainOutcome {
        model: best,
        loss_history: history,
        best_epoch,
        best_val_ap: best_ap,
    })
}
