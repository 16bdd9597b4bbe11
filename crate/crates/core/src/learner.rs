//! Built-in feed-forward classifier.
//!
//! A plain MLP (ReLU hidden layers, softmax cross-entropy output) that
//! supplies every model-derived quantity the acquisition strategies need:
//! probabilities, MC-dropout probability tensors, penultimate-layer
//! embeddings, output-layer gradient embeddings, input gradients, and an
//! optional loss-prediction head.
//!
//! Numerical conventions: He-normal weight init, inverted dropout (scaling
//! at train time), per-feature standardization fitted on the training
//! portion only, natural-log cross-entropy. All randomness is seeded and
//! every reduction runs in a fixed order, so training is bit-reproducible.

use crate::error::{AlError, Result};
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::{dot, Matrix};
use crate::rng;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Extra epochs the loss head trains alone after co-training.
pub const LOSS_HEAD_EXTRA_EPOCHS: usize = 20;
/// Learning rate for the detached loss-head phase.
pub const LOSS_HEAD_LR: f64 = 1e-2;
/// Weight of the ranking loss during co-training.
pub const LOSS_HEAD_LAMBDA: f64 = 1.0;

const SNAPSHOT_MAGIC: [u8; 4] = *b"ALSN";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    /// Layer widths: input, hidden…, output class count k.
    pub layer_sizes: Vec<usize>,
    /// Dropout probability on hidden activations, in [0, 1).
    pub dropout_rate: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub batch_size_train: usize,
    /// Base seed mixed into every training call's weight initialization.
    pub weight_init_seed: u64,
    /// Train the loss-prediction head alongside the classifier.
    pub loss_head: bool,
    /// Standardize features per dimension using the training portion.
    pub standardize: bool,
    /// Margin ξ of the pairwise ranking loss.
    pub ranking_xi: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            layer_sizes: Vec::new(),
            dropout_rate: 0.0,
            epochs: 30,
            learning_rate: 0.01,
            optimizer: Optimizer::Adam,
            batch_size_train: 32,
            weight_init_seed: 0,
            loss_head: false,
            standardize: true,
            ranking_xi: 1.0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(AlError::Config(
                "layer_sizes needs at least input and output widths".into(),
            ));
        }
        if self.layer_sizes.contains(&0) {
            return Err(AlError::Config("layer widths must be positive".into()));
        }
        let k = *self.layer_sizes.last().expect("checked len");
        if k < 2 {
            return Err(AlError::Config(format!("output width must be >= 2, got {k}")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(AlError::Config(format!(
                "dropout_rate must be in [0,1), got {}",
                self.dropout_rate
            )));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(AlError::Config("learning_rate must be positive".into()));
        }
        if self.batch_size_train == 0 {
            return Err(AlError::Config("batch_size_train must be positive".into()));
        }
        if self.ranking_xi < 0.0 {
            return Err(AlError::Config("ranking_xi must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossHeadParams {
    /// Linear head over the final hidden activation.
    pub w: Vec<f64>,
    pub b: f64,
}

/// Immutable trained model. The forward pass in deterministic mode is a
/// pure function of (snapshot, input).
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSnapshot {
    pub config: LearnerConfig,
    /// weights[l] has shape layer_sizes[l+1] × layer_sizes[l].
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub loss_head_params: Option<LossHeadParams>,
    /// Per-feature standardization fitted at train time (identity when
    /// `standardize` is off).
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
}

/// T × n × k tensor of MC-dropout probabilities, pass-major.
#[derive(Debug, Clone, PartialEq)]
pub struct McProbTensor {
    pub passes: usize,
    pub n: usize,
    pub k: usize,
    pub data: Vec<f64>,
}

impl McProbTensor {
    #[inline]
    pub fn row(&self, pass: usize, i: usize) -> &[f64] {
        let start = (pass * self.n + i) * self.k;
        &self.data[start..start + self.k]
    }

    /// Per-sample mean probability over passes (n × k).
    pub fn mean_proba(&self) -> Matrix {
        let mut out = Matrix::zeros(self.n, self.k);
        for t in 0..self.passes {
            for i in 0..self.n {
                let row = self.row(t, i);
                let o = out.row_mut(i);
                for c in 0..self.k {
                    o[c] += row[c];
                }
            }
        }
        let inv = 1.0 / self.passes as f64;
        for v in out.data_mut() {
            *v *= inv;
        }
        out
    }
}

/// Gradients of a scalar loss with respect to every parameter.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    pub head_w: Option<Vec<f64>>,
    pub head_b: Option<f64>,
}

fn validate_training_inputs(
    cfg: &LearnerConfig,
    features: &Matrix,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
) -> Result<()> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(AlError::Config("empty training set".into()));
    }
    if features.rows() != labels.len() {
        return Err(AlError::Shape(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if features.cols() != cfg.input_dim() {
        return Err(AlError::Shape(format!(
            "feature width {} vs input layer {}",
            features.cols(),
            cfg.input_dim()
        )));
    }
    if !features.is_finite() {
        return Err(AlError::Config("non-finite feature values".into()));
    }
    let k = cfg.n_classes();
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(AlError::Config(format!("label {bad} out of range for k={k}")));
    }
    if let Some(w) = sample_weights {
        if w.len() != labels.len() {
            return Err(AlError::Shape(format!(
                "{} sample weights for {} samples",
                w.len(),
                labels.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AlError::Config(
                "sample weights must be finite and nonnegative".into(),
            ));
        }
    }
    Ok(())
}

fn softmax_rows(logits: &mut Matrix) {
    let cols = logits.cols();
    for i in 0..logits.rows() {
        let row = logits.row_mut(i);
        let mut max = f64::NEG_INFINITY;
        for &v in row.iter() {
            if v > max {
                max = v;
            }
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
        debug_assert_eq!(row.len(), cols);
    }
}

#[inline]
fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Z = A · Wᵀ + b, rows of A are samples.
fn affine(a: &Matrix, w: &Matrix, b: &[f64]) -> Matrix {
    let mut z = Matrix::zeros(a.rows(), w.rows());
    for i in 0..a.rows() {
        let ar = a.row(i);
        let zr = z.row_mut(i);
        for (o, zo) in zr.iter_mut().enumerate() {
            *zo = dot(ar, w.row(o)) + b[o];
        }
    }
    z
}

struct TrainForward {
    /// acts[0] = standardized input; acts[l+1] = output of layer l
    /// (hidden: post-ReLU post-dropout; last: raw logits).
    acts: Vec<Matrix>,
    /// Pre-activation values per layer (for the ReLU derivative).
    zs: Vec<Matrix>,
    /// Dropout scale per hidden layer (entries 0 or 1/(1−rate)); None in
    /// deterministic mode.
    scales: Vec<Option<Matrix>>,
}

fn forward_full(
    weights: &[Matrix],
    biases: &[Vec<f64>],
    x_std: &Matrix,
    dropout_rate: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> TrainForward {
    let layers = weights.len();
    let mut acts = Vec::with_capacity(layers + 1);
    let mut zs = Vec::with_capacity(layers);
    let mut scales = Vec::with_capacity(layers);
    acts.push(x_std.clone());
    let mut rng = rng;
    for l in 0..layers {
        let z = affine(&acts[l], &weights[l], &biases[l]);
        let mut a = z.clone();
        zs.push(z);
        if l < layers - 1 {
            for v in a.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            if dropout_rate > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    let keep = 1.0 - dropout_rate;
                    let mut scale = Matrix::zeros(a.rows(), a.cols());
                    for (sv, av) in scale.data_mut().iter_mut().zip(a.data_mut().iter_mut()) {
                        if r.random::<f64>() < keep {
                            *sv = 1.0 / keep;
                            *av *= *sv;
                        } else {
                            *sv = 0.0;
                            *av = 0.0;
                        }
                    }
                    scales.push(Some(scale));
                } else {
                    scales.push(None);
                }
            } else {
                scales.push(None);
            }
        } else {
            scales.push(None);
        }
        acts.push(a);
    }
    TrainForward { acts, zs, scales }
}

/// Backpropagate `delta_out` (dL/dlogits) through the network.
/// `head_delta` is dL/d(head output) per sample; the head reads the final
/// hidden activation, so its gradient joins there.
fn backprop(
    weights: &[Matrix],
    fwd: &TrainForward,
    delta_out: Matrix,
    head: Option<(&LossHeadParams, &[f64])>,
) -> ParamGrads {
    let layers = weights.len();
    let mut g_w: Vec<Matrix> = weights
        .iter()
        .map(|w| Matrix::zeros(w.rows(), w.cols()))
        .collect();
    let mut g_b: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.rows()]).collect();
    let mut head_w_grad = None;
    let mut head_b_grad = None;

    if let Some((params, hdelta)) = head {
        // Head gradient over the final hidden activation acts[layers-1].
        let h = &fwd.acts[layers - 1];
        let mut gw = vec![0.0; params.w.len()];
        let mut gb = 0.0;
        for i in 0..h.rows() {
            let d = hdelta[i];
            gb += d;
            let row = h.row(i);
            for (g, x) in gw.iter_mut().zip(row.iter()) {
                *g += d * x;
            }
        }
        head_w_grad = Some(gw);
        head_b_grad = Some(gb);
    }

    let mut delta = delta_out;
    for l in (0..layers).rev() {
        // Parameter gradients for layer l.
        let a_prev = &fwd.acts[l];
        for i in 0..delta.rows() {
            let drow = delta.row(i);
            let arow = a_prev.row(i);
            for (o, &d) in drow.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g_b[l][o] += d;
                let grow = g_w[l].row_mut(o);
                for (g, x) in grow.iter_mut().zip(arow.iter()) {
                    *g += d * x;
                }
            }
        }
        if l == 0 {
            break;
        }
        // dL/d(acts[l]) = delta · W[l], plus the head term at the final
        // hidden activation.
        let mut d_act = Matrix::zeros(delta.rows(), weights[l].cols());
        for i in 0..delta.rows() {
            let drow = delta.row(i);
            let orow = d_act.row_mut(i);
            for (o, &d) in drow.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let wrow = weights[l].row(o);
                for (ov, wv) in orow.iter_mut().zip(wrow.iter()) {
                    *ov += d * wv;
                }
            }
        }
        if l == layers - 1 {
            if let Some((params, hdelta)) = head {
                for i in 0..d_act.rows() {
                    let d = hdelta[i];
                    if d == 0.0 {
                        continue;
                    }
                    let row = d_act.row_mut(i);
                    for (ov, wv) in row.iter_mut().zip(params.w.iter()) {
                        *ov += d * wv;
                    }
                }
            }
        }
        // Through dropout and ReLU of layer l-1.
        if let Some(scale) = &fwd.scales[l - 1] {
            for (dv, sv) in d_act.data_mut().iter_mut().zip(scale.data().iter()) {
                *dv *= sv;
            }
        }
        let z = &fwd.zs[l - 1];
        for (dv, zv) in d_act.data_mut().iter_mut().zip(z.data().iter()) {
            if *zv <= 0.0 {
                *dv = 0.0;
            }
        }
        delta = d_act;
    }
    ParamGrads {
        weights: g_w,
        biases: g_b,
        head_w: head_w_grad,
        head_b: head_b_grad,
    }
}

/// Pairwise ranking loss over within-batch pairs (i, i + ⌊n/2⌋) with fixed
/// target losses. Returns (loss, per-sample dL/d(prediction)).
fn ranking_loss_core(preds: &[f64], targets: &[f64], xi: f64) -> (f64, Vec<f64>) {
    let n = preds.len();
    let half = n / 2;
    let mut grad = vec![0.0; n];
    if half == 0 {
        return (0.0, grad);
    }
    let mut pairs = 0usize;
    let mut loss_sum = 0.0;
    let mut active: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..half {
        let j = i + half;
        if targets[i] == targets[j] {
            continue;
        }
        pairs += 1;
        let s = if targets[i] > targets[j] { 1.0 } else { -1.0 };
        let l = -s * (preds[i] - preds[j]) + xi;
        if l > 0.0 {
            loss_sum += l;
            active.push((i, j, s));
        }
    }
    if pairs == 0 {
        return (0.0, grad);
    }
    let inv = 1.0 / pairs as f64;
    for (i, j, s) in active {
        grad[i] += -s * inv;
        grad[j] += s * inv;
    }
    (loss_sum * inv, grad)
}

/// Optimizer state for one parameter tensor.
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

fn apply_update(
    opt: Optimizer,
    lr: f64,
    t: usize,
    params: &mut [f64],
    grads: &[f64],
    moments: &mut Moments,
) {
    match opt {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grads.iter()) {
                *p -= lr * g;
            }
        }
        Optimizer::Adam => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            const EPS: f64 = 1e-8;
            let bc1 = 1.0 - B1.powi(t as i32);
            let bc2 = 1.0 - B2.powi(t as i32);
            for i in 0..params.len() {
                let g = grads[i];
                moments.m[i] = B1 * moments.m[i] + (1.0 - B1) * g;
                moments.v[i] = B2 * moments.v[i] + (1.0 - B2) * g * g;
                let mh = moments.m[i] / bc1;
                let vh = moments.v[i] / bc2;
                params[i] -= lr * mh / (vh.sqrt() + EPS);
            }
        }
    }
}

/// Train the classifier (and, when `cfg.loss_head` is set, the loss head,
/// co-trained then refined for [`LOSS_HEAD_EXTRA_EPOCHS`] with the trunk
/// frozen). Deterministic given (cfg, data, seed).
pub fn train(
    cfg: &LearnerConfig,
    features: &Matrix,
    labels: &[usize],
    sample_weights: Option<&[f64]>,
    seed: u64,
) -> Result<LearnerSnapshot> {
    validate_training_inputs(cfg, features, labels, sample_weights)?;
    let n = features.rows();
    let d = features.cols();
    let layers = cfg.layer_sizes.len() - 1;

    // Standardization from the training portion only.
    let (norm_mean, norm_std) = if cfg.standardize {
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (j, x) in features.row(i).iter().enumerate() {
                mean[j] += x;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for i in 0..n {
            for (j, x) in features.row(i).iter().enumerate() {
                let c = x - mean[j];
                var[j] += c * c;
            }
        }
        let std: Vec<f64> = var
            .iter()
            .map(|v| {
                let s = (v / n as f64).sqrt();
                if s < 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        (mean, std)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };

    // He-normal initialization.
    let mut init_rng = rng::rng_from_seed(rng::derive_seed(cfg.weight_init_seed, seed));
    let mut weights: Vec<Matrix> = Vec::with_capacity(layers);
    let mut biases: Vec<Vec<f64>> = Vec::with_capacity(layers);
    for l in 0..layers {
        let fan_in = cfg.layer_sizes[l];
        let fan_out = cfg.layer_sizes[l + 1];
        let sd = (2.0 / fan_in as f64).sqrt();
        let mut w = Matrix::zeros(fan_out, fan_in);
        for v in w.data_mut() {
            *v = sd * rng::next_gaussian(&mut init_rng);
        }
        weights.push(w);
        biases.push(vec![0.0; fan_out]);
    }
    let hidden_dim = cfg.layer_sizes[layers - 1];
    let mut head = if cfg.loss_head {
        let sd = (2.0 / hidden_dim as f64).sqrt();
        let w: Vec<f64> = (0..hidden_dim)
            .map(|_| sd * rng::next_gaussian(&mut init_rng))
            .collect();
        Some(LossHeadParams { w, b: 0.0 })
    } else {
        None
    };

    // Standardize once up front.
    let mut x_std = features.clone();
    for i in 0..n {
        let row = x_std.row_mut(i);
        for j in 0..d {
            row[j] = (row[j] - norm_mean[j]) / norm_std[j];
        }
    }

    let mut train_rng = rng::rng_from_seed(rng::derive_seed(seed, 1));
    let mut w_moments: Vec<Moments> = weights.iter().map(|w| Moments::new(w.data().len())).collect();
    let mut b_moments: Vec<Moments> = biases.iter().map(|b| Moments::new(b.len())).collect();
    let mut head_moments = head
        .as_ref()
        .map(|h| (Moments::new(h.w.len()), Moments::new(1)));
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..n).collect();

    for _epoch in 0..cfg.epochs {
        rng::shuffle(&mut order, &mut train_rng);
        for chunk in order.chunks(cfg.batch_size_train) {
            let xb = x_std.select_rows(chunk);
            let fwd = forward_full(
                &weights,
                &biases,
                &xb,
                cfg.dropout_rate,
                if cfg.dropout_rate > 0.0 {
                    Some(&mut train_rng)
                } else {
                    None
                },
            );
            let mut probs = fwd.acts[layers].clone();
            softmax_rows(&mut probs);
            let bsz = chunk.len();
            // dL/dlogits for mean weighted CE.
            let mut delta = probs.clone();
            for (r, &i) in chunk.iter().enumerate() {
                let wgt = sample_weights.map_or(1.0, |w| w[i]);
                let row = delta.row_mut(r);
                row[labels[i]] -= 1.0;
                for v in row.iter_mut() {
                    *v *= wgt / bsz as f64;
                }
            }
            // Co-trained ranking loss on detached per-sample CE targets.
            let head_delta: Option<Vec<f64>> = head.as_ref().map(|h| {
                let targets: Vec<f64> = chunk
                    .iter()
                    .enumerate()
                    .map(|(r, &i)| -(probs.get(r, labels[i]).max(1e-300)).ln())
                    .collect();
                let hacts = &fwd.acts[layers - 1];
                let preds: Vec<f64> = (0..bsz).map(|r| dot(hacts.row(r), &h.w) + h.b).collect();
                let (_l, grad) = ranking_loss_core(&preds, &targets, cfg.ranking_xi);
                grad.into_iter().map(|g| g * LOSS_HEAD_LAMBDA).collect()
            });
            let grads = backprop(
                &weights,
                &fwd,
                delta,
                head
                    .as_ref()
                    .zip(head_delta.as_ref())
                    .map(|(h, d)| (h, d.as_slice())),
            );
            step += 1;
            for l in 0..layers {
                apply_update(
                    cfg.optimizer,
                    cfg.learning_rate,
                    step,
                    weights[l].data_mut(),
                    grads.weights[l].data(),
                    &mut w_moments[l],
                );
                apply_update(
                    cfg.optimizer,
                    cfg.learning_rate,
                    step,
                    &mut biases[l],
                    &grads.biases[l],
                    &mut b_moments[l],
                );
            }
            if let (Some(h), Some((mw, mb))) = (head.as_mut(), head_moments.as_mut()) {
                let gw = grads.head_w.as_ref().expect("head grads present");
                let gb = grads.head_b.expect("head grads present");
                apply_update(cfg.optimizer, cfg.learning_rate, step, &mut h.w, gw, mw);
                let mut bparam = [h.b];
                apply_update(cfg.optimizer, cfg.learning_rate, step, &mut bparam, &[gb], mb);
                h.b = bparam[0];
            }
        }
    }

    // Detached head refinement: trunk frozen, fresh Adam on the head only.
    if let Some(h) = head.as_mut() {
        let fwd = forward_full(&weights, &biases, &x_std, 0.0, None);
        let mut probs = fwd.acts[layers].clone();
        softmax_rows(&mut probs);
        let targets: Vec<f64> = (0..n)
            .map(|i| -(probs.get(i, labels[i]).max(1e-300)).ln())
            .collect();
        let hacts = &fwd.acts[layers - 1];
        let mut mw = Moments::new(h.w.len());
        let mut mb = Moments::new(1);
        let mut t = 0usize;
        for _ in 0..LOSS_HEAD_EXTRA_EPOCHS {
            rng::shuffle(&mut order, &mut train_rng);
            for chunk in order.chunks(cfg.batch_size_train) {
                let preds: Vec<f64> = chunk
                    .iter()
                    .map(|&i| dot(hacts.row(i), &h.w) + h.b)
                    .collect();
                let tg: Vec<f64> = chunk.iter().map(|&i| targets[i]).collect();
                let (_l, grad) = ranking_loss_core(&preds, &tg, cfg.ranking_xi);
                let mut gw = vec![0.0; h.w.len()];
                let mut gb = 0.0;
                for (r, &i) in chunk.iter().enumerate() {
                    let g = grad[r];
                    if g == 0.0 {
                        continue;
                    }
                    gb += g;
                    for (a, x) in gw.iter_mut().zip(hacts.row(i).iter()) {
                        *a += g * x;
                    }
                }
                t += 1;
                apply_update(Optimizer::Adam, LOSS_HEAD_LR, t, &mut h.w, &gw, &mut mw);
                let mut bparam = [h.b];
                apply_update(Optimizer::Adam, LOSS_HEAD_LR, t, &mut bparam, &[gb], &mut mb);
                h.b = bparam[0];
            }
        }
    }

    Ok(LearnerSnapshot {
        config: cfg.clone(),
        weights,
        biases,
        loss_head_params: head,
        norm_mean,
        norm_std,
    })
}

/// [`train`] with the loss head required (LPL strategy entry point).
pub fn train_with_loss_head(
    cfg: &LearnerConfig,
    features: &Matrix,
    labels: &[usize],
    seed: u64,
) -> Result<LearnerSnapshot> {
    if !cfg.loss_head {
        return Err(AlError::Config(
            "train_with_loss_head requires cfg.loss_head".into(),
        ));
    }
    train(cfg, features, labels, None, seed)
}

impl LearnerSnapshot {
    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_dim() {
            return Err(AlError::Shape(format!(
                "input width {} vs network input {}",
                x.cols(),
                self.config.input_dim()
            )));
        }
        Ok(())
    }

    fn standardize(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for j in 0..row.len() {
                row[j] = (row[j] - self.norm_mean[j]) / self.norm_std[j];
            }
        }
        out
    }

    /// Deterministic class probabilities (n × k, rows sum to 1).
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let x_std = self.standardize(x);
        let fwd = forward_full(&self.weights, &self.biases, &x_std, 0.0, None);
        let mut probs = fwd.acts[self.weights.len()].clone();
        softmax_rows(&mut probs);
        Ok(probs)
    }

    /// Argmax class per sample (ties to the lower class id).
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let p = self.predict_proba(x)?;
        Ok((0..p.rows()).map(|i| argmax(p.row(i))).collect())
    }

    /// T stochastic dropout passes with seeded masks.
    pub fn mc_predict(&self, x: &Matrix, passes: usize, seed: u64) -> Result<McProbTensor> {
        if passes == 0 {
            return Err(AlError::Config("mc_predict needs passes >= 1".into()));
        }
        self.check_width(x)?;
        let x_std = self.standardize(x);
        let k = self.config.n_classes();
        let mut data = Vec::with_capacity(passes * x.rows() * k);
        let mut mask_rng = rng::rng_from_seed(rng::derive_seed(seed, 2));
        for _t in 0..passes {
            let fwd = forward_full(
                &self.weights,
                &self.biases,
                &x_std,
                self.config.dropout_rate,
                if self.config.dropout_rate > 0.0 {
                    Some(&mut mask_rng)
                } else {
                    None
                },
            );
            let mut probs = fwd.acts[self.weights.len()].clone();
            softmax_rows(&mut probs);
            data.extend_from_slice(probs.data());
        }
        Ok(McProbTensor {
            passes,
            n: x.rows(),
            k,
            data,
        })
    }

    /// Post-activation penultimate-layer values in deterministic mode.
    /// A network with no hidden layer returns the raw inputs.
    pub fn embed(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        if self.weights.len() == 1 {
            return Ok(x.clone());
        }
        let x_std = self.standardize(x);
        let fwd = forward_full(&self.weights, &self.biases, &x_std, 0.0, None);
        Ok(fwd.acts[self.weights.len() - 1].clone())
    }

    /// Per-sample flattened gradient of the cross-entropy loss at the
    /// pseudo-label ŷ = argmax p with respect to output-layer weights:
    /// (p − onehot(ŷ)) ⊗ h(x), laid out class-major (width k · dim h).
    pub fn grad_embedding(&self, x: &Matrix) -> Result<Matrix> {
        let probs = self.predict_proba(x)?;
        let h = self.embed(x)?;
        let k = self.config.n_classes();
        let hd = h.cols();
        let mut out = Matrix::zeros(x.rows(), k * hd);
        for i in 0..x.rows() {
            let p = probs.row(i);
            let yhat = argmax(p);
            let hrow = h.row(i);
            let orow = out.row_mut(i);
            for c in 0..k {
                let coef = p[c] - if c == yhat { 1.0 } else { 0.0 };
                for j in 0..hd {
                    orow[c * hd + j] = coef * hrow[j];
                }
            }
        }
        Ok(out)
    }

    /// Gradient of the cross-entropy loss at class `target` with respect
    /// to the raw (unstandardized) input vector.
    pub fn input_gradient(&self, x: &[f64], target: usize) -> Result<Vec<f64>> {
        let k = self.config.n_classes();
        if target >= k {
            return Err(AlError::Config(format!("target {target} out of range for k={k}")));
        }
        let xm = Matrix::from_vec(1, x.len(), x.to_vec())?;
        self.check_width(&xm)?;
        let x_std = self.standardize(&xm);
        let fwd = forward_full(&self.weights, &self.biases, &x_std, 0.0, None);
        let layers = self.weights.len();
        let mut probs = fwd.acts[layers].clone();
        softmax_rows(&mut probs);
        let mut delta: Vec<f64> = probs.row(0).to_vec();
        delta[target] -= 1.0;
        // Walk back to the input.
        for l in (0..layers).rev() {
            let w = &self.weights[l];
            let mut prev = vec![0.0; w.cols()];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (pv, wv) in prev.iter_mut().zip(w.row(o).iter()) {
                    *pv += d * wv;
                }
            }
            if l > 0 {
                let z = fwd.zs[l - 1].row(0);
                for (pv, &zv) in prev.iter_mut().zip(z.iter()) {
                    if zv <= 0.0 {
                        *pv = 0.0;
                    }
                }
            }
            delta = prev;
        }
        // Chain through standardization: d(x_std)/d(x_raw) = 1/std.
        for (g, s) in delta.iter_mut().zip(self.norm_std.iter()) {
            *g /= s;
        }
        Ok(delta)
    }

    /// Predicted per-sample loss from the head.
    pub fn predict_loss(&self, x: &Matrix) -> Result<Vec<f64>> {
        let head = self.loss_head_params.as_ref().ok_or_else(|| {
            AlError::Config("predict_loss requires a snapshot trained with loss_head".into())
        })?;
        let h = self.embed(x)?;
        Ok((0..h.rows()).map(|i| dot(h.row(i), &head.w) + head.b).collect())
    }
}

/// Mean weighted cross-entropy of the snapshot on a batch, deterministic
/// mode. Exposed so gradients can be verified against finite differences.
pub fn ce_loss(
    snap: &LearnerSnapshot,
    x: &Matrix,
    y: &[usize],
    sample_weights: Option<&[f64]>,
) -> Result<f64> {
    let probs = snap.predict_proba(x)?;
    if y.len() != x.rows() {
        return Err(AlError::Shape(format!("{} labels for {} rows", y.len(), x.rows())));
    }
    let mut loss = 0.0;
    for i in 0..x.rows() {
        let w = sample_weights.map_or(1.0, |w| w[i]);
        loss += -w * probs.get(i, y[i]).max(1e-300).ln();
    }
    Ok(loss / x.rows() as f64)
}

/// Analytic gradients of [`ce_loss`] for every trunk parameter.
pub fn ce_grads(
    snap: &LearnerSnapshot,
    x: &Matrix,
    y: &[usize],
    sample_weights: Option<&[f64]>,
) -> Result<ParamGrads> {
    if y.len() != x.rows() {
        return Err(AlError::Shape(format!("{} labels for {} rows", y.len(), x.rows())));
    }
    let x_std = snap.standardize(x);
    let fwd = forward_full(&snap.weights, &snap.biases, &x_std, 0.0, None);
    let layers = snap.weights.len();
    let mut probs = fwd.acts[layers].clone();
    softmax_rows(&mut probs);
    let mut delta = probs;
    let n = x.rows();
    for i in 0..n {
        let w = sample_weights.map_or(1.0, |w| w[i]);
        let row = delta.row_mut(i);
        row[y[i]] -= 1.0;
        for v in row.iter_mut() {
            *v *= w / n as f64;
        }
    }
    Ok(backprop(&snap.weights, &fwd, delta, None))
}

/// Pairwise ranking loss of the head on `x` against fixed `targets`,
/// pairing row i with row i + ⌊n/2⌋. Deterministic mode.
pub fn ranking_loss(snap: &LearnerSnapshot, x: &Matrix, targets: &[f64], xi: f64) -> Result<f64> {
    if targets.len() != x.rows() {
        return Err(AlError::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            x.rows()
        )));
    }
    let preds = snap.predict_loss(x)?;
    Ok(ranking_loss_core(&preds, targets, xi).0)
}

/// Analytic gradients of [`ranking_loss`] for the head parameters and the
/// trunk parameters it backpropagates into.
pub fn ranking_grads(
    snap: &LearnerSnapshot,
    x: &Matrix,
    targets: &[f64],
    xi: f64,
) -> Result<ParamGrads> {
    let head = snap.loss_head_params.as_ref().ok_or_else(|| {
        AlError::Config("ranking_grads requires a snapshot with a loss head".into())
    })?;
    if targets.len() != x.rows() {
        return Err(AlError::Shape(format!(
            "{} targets for {} rows",
            targets.len(),
            x.rows()
        )));
    }
    let x_std = snap.standardize(x);
    let fwd = forward_full(&snap.weights, &snap.biases, &x_std, 0.0, None);
    let layers = snap.weights.len();
    let hacts = &fwd.acts[layers - 1];
    let preds: Vec<f64> = (0..x.rows())
        .map(|i| dot(hacts.row(i), &head.w) + head.b)
        .collect();
    let (_loss, grad) = ranking_loss_core(&preds, targets, xi);
    // The ranking loss does not touch the output layer, so dL/dlogits = 0.
    let delta = Matrix::zeros(x.rows(), snap.config.n_classes());
    Ok(backprop(
        &snap.weights,
        &fwd,
        delta,
        Some((head, grad.as_slice())),
    ))
}

// --- snapshot serialization -------------------------------------------------

fn push_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn push_f64_slice(buf: &mut Vec<u8>, vs: &[f64]) {
    for &v in vs {
        push_f64(buf, v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(AlError::Format("snapshot truncated".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("len 4")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("len 8")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("len 8")))
    }

    fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(self.f64()?);
        }
        Ok(v)
    }
}

impl LearnerSnapshot {
    /// Serialize to the versioned `ALSN` little-endian format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(&SNAPSHOT_MAGIC);
        push_u32(&mut buf, SNAPSHOT_VERSION);
        push_u32(&mut buf, self.config.layer_sizes.len() as u32);
        for &s in &self.config.layer_sizes {
            push_u32(&mut buf, s as u32);
        }
        push_f64(&mut buf, self.config.dropout_rate);
        push_u64(&mut buf, self.config.epochs as u64);
        push_f64(&mut buf, self.config.learning_rate);
        buf.push(match self.config.optimizer {
            Optimizer::Sgd => 0,
            Optimizer::Adam => 1,
        });
        push_u64(&mut buf, self.config.batch_size_train as u64);
        push_u64(&mut buf, self.config.weight_init_seed);
        buf.push(self.config.loss_head as u8);
        buf.push(self.config.standardize as u8);
        push_f64(&mut buf, self.config.ranking_xi);
        push_f64_slice(&mut buf, &self.norm_mean);
        push_f64_slice(&mut buf, &self.norm_std);
        for (w, b) in self.weights.iter().zip(self.biases.iter()) {
            push_f64_slice(&mut buf, w.data());
            push_f64_slice(&mut buf, b);
        }
        match &self.loss_head_params {
            Some(h) => {
                buf.push(1);
                push_f64_slice(&mut buf, &h.w);
                push_f64(&mut buf, h.b);
            }
            None => buf.push(0),
        }
        buf
    }

    /// Parse the `ALSN` format back into a snapshot.
    pub fn from_bytes(bytes: &[u8]) -> Result<LearnerSnapshot> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(AlError::Format("bad snapshot magic".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(AlError::Format(format!("unsupported snapshot version {version}")));
        }
        let n_sizes = r.u32()? as usize;
        if !(2..=64).contains(&n_sizes) {
            return Err(AlError::Format(format!("implausible layer count {n_sizes}")));
        }
        let mut layer_sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            layer_sizes.push(r.u32()? as usize);
        }
        let dropout_rate = r.f64()?;
        let epochs = r.u64()? as usize;
        let learning_rate = r.f64()?;
        let optimizer = match r.take(1)?[0] {
            0 => Optimizer::Sgd,
            1 => Optimizer::Adam,
            o => return Err(AlError::Format(format!("unknown optimizer tag {o}"))),
        };
        let batch_size_train = r.u64()? as usize;
        let weight_init_seed = r.u64()?;
        let loss_head = r.take(1)?[0] != 0;
        let standardize = r.take(1)?[0] != 0;
        let ranking_xi = r.f64()?;
        let d = layer_sizes[0];
        let norm_mean = r.f64_vec(d)?;
        let norm_std = r.f64_vec(d)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..n_sizes - 1 {
            let rows = layer_sizes[l + 1];
            let cols = layer_sizes[l];
            weights.push(Matrix::from_vec(rows, cols, r.f64_vec(rows * cols)?)?);
            biases.push(r.f64_vec(rows)?);
        }
        let loss_head_params = if r.take(1)?[0] != 0 {
            let hidden = layer_sizes[n_sizes - 2];
            Some(LossHeadParams {
                w: r.f64_vec(hidden)?,
                b: r.f64()?,
            })
        } else {
            None
        };
        if r.pos != bytes.len() {
            return Err(AlError::Format("trailing bytes after snapshot".into()));
        }
        let config = LearnerConfig {
            layer_sizes,
            dropout_rate,
            epochs,
            learning_rate,
            optimizer,
            batch_size_train,
            weight_init_seed,
            loss_head,
            standardize,
            ranking_xi,
        };
        config.validate().map_err(|e| match e {
            AlError::Config(m) => AlError::Format(m),
            other => other,
        })?;
        Ok(LearnerSnapshot {
            config,
            weights,
            biases,
            loss_head_params,
            norm_mean,
            norm_std,
        })
    }
}

/// Name string for error messages in optimizer parsing elsewhere.
pub fn optimizer_name(o: Optimizer) -> &'static str {
    match o {
        Optimizer::Sgd => "sgd",
        Optimizer::Adam => "adam",
    }
}

/// Parse an optimizer name.
pub fn parse_optimizer(s: &str) -> Result<Optimizer> {
    match s {
        "sgd" => Ok(Optimizer::Sgd),
        "adam" => Ok(Optimizer::Adam),
        other => Err(AlError::Config(String::from("unknown optimizer: ") + other)),
    }
}
