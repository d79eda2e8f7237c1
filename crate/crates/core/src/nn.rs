//! From-scratch ReLU feedforward network: random initialization, forward
//! pass, backpropagation, SGD-with-momentum and Adam updates, and the
//! training loop with early stopping, learning-rate reduction, and
//! weight-drift telemetry.
//!
//! Architecture: input layer A (m x d_x), K hidden matrices W_k (m x m),
//! linear output layer B (d_y x m); ReLU after A and after every W_k.
//! No additive biases anywhere (the input carries a bias slot instead).

use crate::dataset::LabeledSample;
use crate::linalg::Mat;
use crate::ofdm::Fnv1a;
use crate::rng::{purpose, substream};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

const CHECKPOINT_MAGIC: &[u8; 4] = b"DSCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("input has length {got}, network expects {want}")]
    InputDim { want: usize, got: usize },
    #[error("non-finite {what} encountered at step {step}; training aborted")]
    NonFinite { what: &'static str, step: u64 },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint file: {0}")]
    BadFile(String),
}

/// Which weight matrices the optimizer may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trainability {
    /// Every matrix trains (A, all W_k, B).
    AllLayers,
    /// Only the hidden W_k train; A and B stay at initialization.
    #[default]
    HiddenOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdMomentum,
    #[default]
    Adam,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub lr_reduce_patience: usize,
    pub lr_reduce_factor: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 50,
            max_epochs: 10,
            early_stop_patience: 5,
            lr_reduce_patience: 5,
            lr_reduce_factor: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.learning_rate <= 0.0 || self.learning_rate.is_nan() {
            return Err(TrainError::BadConfig(
                "learning rate must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::BadConfig("momentum must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig(
                "batch size must be at least 1".into(),
            ));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::BadConfig(
                "max epochs must be at least 1".into(),
            ));
        }
        if !(self.lr_reduce_factor > 0.0 && self.lr_reduce_factor < 1.0) {
            return Err(TrainError::BadConfig(
                "learning-rate reduction factor must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Per-layer binary activation masks (1 where the pre-activation is >= 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignPattern {
    /// masks[0] is the layer after A; masks[k] the layer after W_k.
    pub masks: Vec<Vec<bool>>,
}

/// Cache from a single-sample forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Pre-activations for the K+1 ReLU layers.
    pub pre_acts: Vec<Vec<f64>>,
    /// Post-ReLU activations for the K+1 layers.
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn sign_pattern(&self) -> SignPattern {
        SignPattern {
            masks: self
                .pre_acts
                .iter()
                .map(|v| v.iter().map(|&x| x >= 0.0).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReluNetwork {
    d_x: usize,
    d_y: usize,
    m: usize,
    k: usize,
    a: Mat,
    w: Vec<Mat>,
    b: Mat,
    trainability: Trainability,
}

impl ReluNetwork {
    /// Random initialization: A, W_k ~ N(0, 2/m), B ~ N(0, 1/d_y).
    pub fn init(
        m: usize,
        d_x: usize,
        d_y: usize,
        k: usize,
        trainability: Trainability,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(
            m >= 1 && d_x >= 1 && d_y >= 1 && k >= 1,
            "dims must be >= 1"
        );
        let hidden_std = (2.0 / m as f64).sqrt();
        let out_std = (1.0 / d_y as f64).sqrt();
        let sample_mat = |rows: usize, cols: usize, std: f64, rng: &mut dyn rand::RngCore| {
            Mat::from_fn(rows, cols, |_, _| {
                let g: f64 = rng.sample(StandardNormal);
                std * g
            })
        };
        let a = sample_mat(m, d_x, hidden_std, rng);
        let w = (0..k).map(|_| sample_mat(m, m, hidden_std, rng)).collect();
        let b = sample_mat(d_y, m, out_std, rng);
        Self {
            d_x,
            d_y,
            m,
            k,
            a,
            w,
            b,
            trainability,
        }
    }

    /// All-zero network of the given shape; forwards everything to zero.
    /// Useful as the trivial baseline estimator.
    pub fn zeros(m: usize, d_x: usize, d_y: usize, k: usize, trainability: Trainability) -> Self {
        assert!(
            m >= 1 && d_x >= 1 && d_y >= 1 && k >= 1,
            "dims must be >= 1"
        );
        Self {
            d_x,
            d_y,
            m,
            k,
            a: Mat::zeros(m, d_x),
            w: (0..k).map(|_| Mat::zeros(m, m)).collect(),
            b: Mat::zeros(d_y, m),
            trainability,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.d_x
    }

    pub fn output_dim(&self) -> usize {
        self.d_y
    }

    pub fn width(&self) -> usize {
        self.m
    }

    pub fn num_hidden(&self) -> usize {
        self.k
    }

    pub fn trainability(&self) -> Trainability {
        self.trainability
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn w(&self) -> &[Mat] {
        &self.w
    }

    pub fn b(&self) -> &Mat {
        &self.b
    }

    pub fn a_mut(&mut self) -> &mut Mat {
        &mut self.a
    }

    pub fn w_mut(&mut self) -> &mut [Mat] {
        &mut self.w
    }

    pub fn b_mut(&mut self) -> &mut Mat {
        &mut self.b
    }

    /// Slots in optimizer order: A, W_1..W_K, B.
    fn num_slots(&self) -> usize {
        self.k + 2
    }

    fn slot(&self, idx: usize) -> &Mat {
        if idx == 0 {
            &self.a
        } else if idx <= self.k {
            &self.w[idx - 1]
        } else {
            &self.b
        }
    }

    fn slot_mut(&mut self, idx: usize) -> &mut Mat {
        if idx == 0 {
            &mut self.a
        } else if idx <= self.k {
            &mut self.w[idx - 1]
        } else {
            &mut self.b
        }
    }

    fn slot_trainable(&self, idx: usize) -> bool {
        match self.trainability {
            Trainability::AllLayers => true,
            Trainability::HiddenOnly => idx >= 1 && idx <= self.k,
        }
    }

    /// Single-sample forward pass with cached pre-activations.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), TrainError> {
        if x.len() != self.d_x {
            return Err(TrainError::InputDim {
                want: self.d_x,
                got: x.len(),
            });
        }
        let mut pre_acts = Vec::with_capacity(self.k + 1);
        let mut acts = Vec::with_capacity(self.k + 1);
        let v0 = self.a.mul_vec(x);
        acts.push(relu_vec(&v0));
        pre_acts.push(v0);
        for wk in &self.w {
            let v = wk.mul_vec(acts.last().unwrap());
            acts.push(relu_vec(&v));
            pre_acts.push(v);
        }
        let y = self.b.mul_vec(acts.last().unwrap());
        Ok((y, ForwardCache { pre_acts, acts }))
    }

    /// Output through the explicit sign-matrix product
    /// B (Sigma_K W_K ... Sigma_1 W_1) Sigma_0 A x.
    pub fn forward_via_sign_product(&self, x: &[f64], pattern: &SignPattern) -> Vec<f64> {
        let mut v = self.a.mul_vec(x);
        mask_vec(&mut v, &pattern.masks[0]);
        for (k, wk) in self.w.iter().enumerate() {
            v = wk.mul_vec(&v);
            mask_vec(&mut v, &pattern.masks[k + 1]);
        }
        self.b.mul_vec(&v)
    }

    /// Batched forward: `x0` is d_x x b with one sample per column.
    fn forward_batch(&self, x0: &Mat) -> BatchCache {
        let mut pre = Vec::with_capacity(self.k + 1);
        let mut act = Vec::with_capacity(self.k + 1);
        let v0 = self.a.matmul(x0);
        act.push(relu_mat(&v0));
        pre.push(v0);
        for wk in &self.w {
            let v = wk.matmul(act.last().unwrap());
            act.push(relu_mat(&v));
            pre.push(v);
        }
        let out = self.b.matmul(act.last().unwrap());
        BatchCache { pre, act, out }
    }

    /// Mean eval loss (1/(2n)) sum ||y - y*||^2, streamed in chunks.
    pub fn eval_loss(&self, samples: &[LabeledSample]) -> Result<f64, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::Empty("evaluation set"));
        }
        let mut acc = 0.0;
        for chunk in samples.chunks(128) {
            let (x0, ystar) = batch_matrices(chunk, self.d_x, self.d_y)?;
            let cache = self.forward_batch(&x0);
            let e = cache.out.sub(&ystar);
            acc += e.data().iter().map(|v| v * v).sum::<f64>();
        }
        Ok(acc / (2.0 * samples.len() as f64))
    }

    /// Frobenius drift of the hidden stack from a reference snapshot.
    fn hidden_drift(&self, w0: &[Mat]) -> f64 {
        self.w
            .iter()
            .zip(w0)
            .map(|(w, w0)| {
                w.data()
                    .iter()
                    .zip(w0.data())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

struct BatchCache {
    pre: Vec<Mat>,
    act: Vec<Mat>,
    out: Mat,
}

fn relu_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

fn relu_mat(v: &Mat) -> Mat {
    let mut out = v.clone();
    for x in out.data_mut() {
        *x = x.max(0.0);
    }
    out
}

fn mask_vec(v: &mut [f64], mask: &[bool]) {
    for (x, &keep) in v.iter_mut().zip(mask) {
        if !keep {
            *x = 0.0;
        }
    }
}

/// Derivative mask: rho'(v) with rho'(0) = 0, applied in place.
fn mask_by_positive(target: &mut Mat, pre: &Mat) {
    for (t, &p) in target.data_mut().iter_mut().zip(pre.data()) {
        if p <= 0.0 {
            *t = 0.0;
        }
    }
}

fn batch_matrices(
    samples: &[LabeledSample],
    d_x: usize,
    d_y: usize,
) -> Result<(Mat, Mat), TrainError> {
    let b = samples.len();
    let mut x0 = Mat::zeros(d_x, b);
    let mut ystar = Mat::zeros(d_y, b);
    for (col, s) in samples.iter().enumerate() {
        if s.x.len() != d_x {
            return Err(TrainError::InputDim {
                want: d_x,
                got: s.x.len(),
            });
        }
        for (r, &v) in s.x.iter().enumerate() {
            x0.set(r, col, v);
        }
        for (r, &v) in s.y_star.iter().enumerate() {
            ystar.set(r, col, v);
        }
    }
    Ok((x0, ystar))
}

/// Optimizer state, one slot per weight matrix (None where frozen).
#[derive(Debug, Clone)]
pub struct OptState {
    kind: OptimizerKind,
    momentum: f64,
    step: u64,
    /// SGD momentum buffers, or Adam first moments.
    first: Vec<Option<Mat>>,
    /// Adam second moments.
    second: Vec<Option<Mat>>,
}

impl OptState {
    pub fn new(net: &ReluNetwork, cfg: &TrainConfig) -> Self {
        let first = (0..net.num_slots())
            .map(|i| {
                net.slot_trainable(i)
                    .then(|| Mat::zeros(net.slot(i).rows(), net.slot(i).cols()))
            })
            .collect();
        let second = (0..net.num_slots())
            .map(|i| {
                (net.slot_trainable(i) && cfg.optimizer == OptimizerKind::Adam)
                    .then(|| Mat::zeros(net.slot(i).rows(), net.slot(i).cols()))
            })
            .collect();
        Self {
            kind: cfg.optimizer,
            momentum: cfg.momentum,
            step: 0,
            first,
            second,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update: weight -= lr * m_hat / (sqrt(v_hat) + eps).
/// `step` is the 1-based update count.
pub fn adam_step(weight: &mut Mat, m: &mut Mat, v: &mut Mat, grad: &Mat, lr: f64, step: u64) {
    let b1t = 1.0 - ADAM_BETA1.powi(step as i32);
    let b2t = 1.0 - ADAM_BETA2.powi(step as i32);
    let wdata = weight.data_mut();
    for (((wi, mi), vi), &gi) in wdata
        .iter_mut()
        .zip(m.data_mut())
        .zip(v.data_mut())
        .zip(grad.data())
    {
        *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
        *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
        let m_hat = *mi / b1t;
        let v_hat = *vi / b2t;
        *wi -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
    }
}

/// One SGD-with-momentum update (the generalized delta rule):
/// vel = alpha * vel - lr * grad; weight += vel.
pub fn sgd_momentum_step(weight: &mut Mat, vel: &mut Mat, grad: &Mat, lr: f64, alpha: f64) {
    for ((wi, vi), &gi) in weight
        .data_mut()
        .iter_mut()
        .zip(vel.data_mut())
        .zip(grad.data())
    {
        *vi = alpha * *vi - lr * gi;
        *wi += *vi;
    }
}

/// Gradients of the mean half-square batch loss for every weight matrix,
/// in slot order [A, W_1..W_K, B], plus the loss itself.
pub fn batch_gradients(
    net: &ReluNetwork,
    batch: &[LabeledSample],
) -> Result<(f64, Vec<Mat>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::Empty("batch"));
    }
    let bsz = batch.len() as f64;
    let (x0, ystar) = batch_matrices(batch, net.d_x, net.d_y)?;
    let cache = net.forward_batch(&x0);
    let err = cache.out.sub(&ystar);
    let loss = err.data().iter().map(|v| v * v).sum::<f64>() / (2.0 * bsz);

    let k = net.k;
    let mut grads = vec![Mat::zeros(0, 0); net.num_slots()];
    // output layer: grad_B = (1/b) E act_K^T
    let mut g_b = err.matmul_t(&cache.act[k]);
    g_b.scale_in_place(1.0 / bsz);
    grads[k + 1] = g_b;
    // delta through B
    let mut delta = net.b.t_matmul(&err);
    mask_by_positive(&mut delta, &cache.pre[k]);
    // hidden layers W_K .. W_1
    for layer in (1..=k).rev() {
        let mut g_w = delta.matmul_t(&cache.act[layer - 1]);
        g_w.scale_in_place(1.0 / bsz);
        grads[layer] = g_w;
        let mut next = net.w[layer - 1].t_matmul(&delta);
        mask_by_positive(&mut next, &cache.pre[layer - 1]);
        delta = next;
    }
    // input layer A
    let mut g_a = delta.matmul_t(&x0);
    g_a.scale_in_place(1.0 / bsz);
    grads[0] = g_a;
    Ok((loss, grads))
}

/// One optimizer step on a mini-batch. Frozen matrices are untouched.
/// Returns the batch loss (1/(2B)) sum ||e_b||^2.
pub fn train_step(
    net: &mut ReluNetwork,
    opt: &mut OptState,
    batch: &[LabeledSample],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<f64, TrainError> {
    let (loss, grads) = batch_gradients(net, batch)?;
    if !loss.is_finite() {
        return Err(TrainError::NonFinite {
            what: "loss",
            step: opt.step,
        });
    }
    for g in &grads {
        if g.data().iter().any(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite {
                what: "gradient",
                step: opt.step,
            });
        }
    }
    opt.step += 1;
    for idx in 0..net.num_slots() {
        if !net.slot_trainable(idx) {
            continue;
        }
        match cfg.optimizer {
            OptimizerKind::Adam => {
                let (first, second) = (&mut opt.first[idx], &mut opt.second[idx]);
                adam_step(
                    net.slot_mut(idx),
                    first.as_mut().expect("adam first moment"),
                    second.as_mut().expect("adam second moment"),
                    &grads[idx],
                    lr,
                    opt.step,
                );
            }
            OptimizerKind::SgdMomentum => {
                let vel = opt.first[idx].as_mut().expect("momentum buffer");
                sgd_momentum_step(net.slot_mut(idx), vel, &grads[idx], lr, opt.momentum);
            }
        }
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    /// ||W^(t) - W^(0)||_F over the hidden stack.
    pub weight_drift: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Full training loop: shuffled mini-batches, validation monitoring,
/// learning-rate reduction and early stopping on stagnation, best-weights
/// restoration, per-epoch drift telemetry.
pub fn fit(
    net: &mut ReluNetwork,
    opt: &mut OptState,
    train: &[LabeledSample],
    val: &[LabeledSample],
    cfg: &TrainConfig,
) -> Result<TrainingReport, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::Empty("training set"));
    }
    if val.is_empty() {
        return Err(TrainError::Empty("validation set"));
    }
    let w0: Vec<Mat> = net.w.clone();
    let mut lr = cfg.learning_rate;
    let mut history = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_weights: Vec<Mat> = snapshot_trainable(net);
    let mut stop_wait = 0usize;
    let mut lr_wait = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut rng = substream(cfg.seed, &[purpose::SHUFFLE, epoch as u64]);
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_acc = 0.0;
        let mut loss_count = 0.0;
        let mut batch_buf: Vec<LabeledSample> = Vec::with_capacity(cfg.batch_size);
        for chunk in order.chunks(cfg.batch_size) {
            batch_buf.clear();
            batch_buf.extend(chunk.iter().map(|&i| train[i].clone()));
            let loss = train_step(net, opt, &batch_buf, cfg, lr)?;
            loss_acc += loss * chunk.len() as f64;
            loss_count += chunk.len() as f64;
        }
        let train_loss = loss_acc / loss_count;
        let val_loss = net.eval_loss(val)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
            weight_drift: net.hidden_drift(&w0),
        });

        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_weights = snapshot_trainable(net);
            stop_wait = 0;
            lr_wait = 0;
        } else {
            stop_wait += 1;
            lr_wait += 1;
            if lr_wait >= cfg.lr_reduce_patience {
                lr *= cfg.lr_reduce_factor;
                lr_wait = 0;
            }
            if stop_wait >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    restore_trainable(net, &best_weights);
    Ok(TrainingReport {
        history,
        best_epoch,
        best_val_loss: best_val,
        stopped_early,
    })
}

fn snapshot_trainable(net: &ReluNetwork) -> Vec<Mat> {
    (0..net.num_slots())
        .filter(|&i| net.slot_trainable(i))
        .map(|i| net.slot(i).clone())
        .collect()
}

fn restore_trainable(net: &mut ReluNetwork, snapshot: &[Mat]) {
    let slots: Vec<usize> = (0..net.num_slots())
        .filter(|&i| net.slot_trainable(i))
        .collect();
    for (slot, saved) in slots.into_iter().zip(snapshot) {
        *net.slot_mut(slot) = saved.clone();
    }
}

/// Stable hash of the network hyperparameters, stored in checkpoints.
pub fn net_hash(net: &ReluNetwork) -> u64 {
    let mut h = Fnv1a::new();
    h.write_u64(net.d_x as u64);
    h.write_u64(net.d_y as u64);
    h.write_u64(net.m as u64);
    h.write_u64(net.k as u64);
    h.finish()
}

/// Checkpoint layout (all little-endian): magic "DSCK", version u32,
/// config_hash u64, d_x/d_y/m/K u64, trainability u8, optimizer u8,
/// step u64, weight matrices in slot order, optimizer buffers, epoch
/// history.
pub fn write_checkpoint(
    net: &ReluNetwork,
    opt: &OptState,
    history: &[EpochStats],
    config_hash: u64,
    w: &mut impl Write,
) -> Result<(), TrainError> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&config_hash.to_le_bytes())?;
    for v in [net.d_x, net.d_y, net.m, net.k] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&[match net.trainability {
        Trainability::AllLayers => 0u8,
        Trainability::HiddenOnly => 1u8,
    }])?;
    w.write_all(&[match opt.kind {
        OptimizerKind::SgdMomentum => 0u8,
        OptimizerKind::Adam => 1u8,
    }])?;
    w.write_all(&opt.momentum.to_le_bytes())?;
    w.write_all(&opt.step.to_le_bytes())?;
    for idx in 0..net.num_slots() {
        write_mat(w, net.slot(idx))?;
    }
    for buf in opt.first.iter().chain(&opt.second) {
        match buf {
            Some(m) => {
                w.write_all(&[1u8])?;
                write_mat(w, m)?;
            }
            None => w.write_all(&[0u8])?,
        }
    }
    w.write_all(&(history.len() as u64).to_le_bytes())?;
    for e in history {
        w.write_all(&(e.epoch as u64).to_le_bytes())?;
        for v in [e.train_loss, e.val_loss, e.lr, e.weight_drift] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(
    r: &mut impl Read,
) -> Result<(ReluNetwork, OptState, Vec<EpochStats>, u64), TrainError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(TrainError::BadFile("bad magic".into()));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::BadFile(format!(
            "unsupported version {version}"
        )));
    }
    let config_hash = read_u64(r)?;
    let d_x = read_u64(r)? as usize;
    let d_y = read_u64(r)? as usize;
    let m = read_u64(r)? as usize;
    let k = read_u64(r)? as usize;
    let mut flags = [0u8; 2];
    r.read_exact(&mut flags)?;
    let trainability = match flags[0] {
        0 => Trainability::AllLayers,
        1 => Trainability::HiddenOnly,
        other => return Err(TrainError::BadFile(format!("bad trainability {other}"))),
    };
    let kind = match flags[1] {
        0 => OptimizerKind::SgdMomentum,
        1 => OptimizerKind::Adam,
        other => return Err(TrainError::BadFile(format!("bad optimizer {other}"))),
    };
    let momentum = read_f64(r)?;
    let step = read_u64(r)?;
    let a = read_mat(r, m, d_x)?;
    let mut w_mats = Vec::with_capacity(k);
    for _ in 0..k {
        w_mats.push(read_mat(r, m, m)?);
    }
    let b = read_mat(r, d_y, m)?;
    let net = ReluNetwork {
        d_x,
        d_y,
        m,
        k,
        a,
        w: w_mats,
        b,
        trainability,
    };
    let mut read_bufs = |net: &ReluNetwork| -> Result<Vec<Option<Mat>>, TrainError> {
        let mut out = Vec::with_capacity(net.num_slots());
        for idx in 0..net.num_slots() {
            let mut flag = [0u8; 1];
            r.read_exact(&mut flag)?;
            if flag[0] == 1 {
                let s = net.slot(idx);
                out.push(Some(read_mat(r, s.rows(), s.cols())?));
            } else {
                out.push(None);
            }
        }
        Ok(out)
    };
    let first = read_bufs(&net)?;
    let second = read_bufs(&net)?;
    let opt = OptState {
        kind,
        momentum,
        step,
        first,
        second,
    };
    let n_hist = read_u64(r)? as usize;
    let mut history = Vec::with_capacity(n_hist);
    for _ in 0..n_hist {
        let epoch = read_u64(r)? as usize;
        let train_loss = read_f64(r)?;
        let val_loss = read_f64(r)?;
        let lr = read_f64(r)?;
        let weight_drift = read_f64(r)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
            weight_drift,
        });
    }
    Ok((net, opt, history, config_hash))
}

fn write_mat(w: &mut impl Write, m: &Mat) -> std::io::Result<()> {
    for v in m.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_mat(r: &mut impl Read, rows: usize, cols: usize) -> Result<Mat, TrainError> {
    let mut data = vec![0.0f64; rows * cols];
    for v in &mut data {
        *v = read_f64(r)?;
    }
    Ok(Mat::from_vec(rows, cols, data))
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
