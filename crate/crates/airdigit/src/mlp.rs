//! Three-layer perceptron and the transfer-training protocol: repeated
//! warm-started trainings on fresh robot-data splits with early stopping,
//! always evaluated on the human-like test set.

use crate::eval::{ConfusionMatrix, EvalError, RunReport, CLASS_COUNT};
use crate::imu::Provenance;
use crate::math::{derive_seed, fnv1a64_f64};
use crate::signal::{ChannelKind, FEATURE_LEN};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error("provenance violation: {context} contains a {found} sample")]
    ProvenanceViolation { context: &'static str, found: Provenance },
    #[error("bad example: {0}")]
    BadExample(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Training protocol settings. Defaults follow the experiment description:
/// 100 warm-started iterations of up to 20 epochs with patience 10,
/// validating on a random 20% of the robot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub max_epochs: usize,
    pub patience_epochs: usize,
    pub val_fraction: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 100,
            max_epochs: 20,
            patience_epochs: 10,
            val_fraction: 0.2,
            learning_rate: 0.01,
            batch_size: 32,
            seed: 0,
            hidden_width: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(TrainError::BadExample(format!(
                "val_fraction {} outside (0, 1)",
                self.val_fraction
            )));
        }
        if self.patience_epochs > self.max_epochs {
            return Err(TrainError::BadExample(format!(
                "patience {} exceeds max epochs {}",
                self.patience_epochs, self.max_epochs
            )));
        }
        if self.iterations == 0 || self.max_epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::BadExample(
                "iterations, epochs and batch size must be positive".into(),
            ));
        }
        if self.hidden_width == 0 {
            return Err(TrainError::BadExample("hidden width must be >= 1".into()));
        }
        Ok(())
    }
}

/// One feature vector with its label and origin tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u8,
    pub provenance: Provenance,
}

/// Normalized example handed to the optimizer.
#[derive(Debug, Clone)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Fully connected input -> hidden (rectifier) -> output (normalized
/// exponential) network. Weights are row-major `[out_idx * in_dim + in_idx]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MlpModel {
    /// Fan-in/fan-out scaled uniform initialization, biases zero.
    pub fn init(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut layer = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect()
        };
        MlpModel {
            input,
            hidden,
            output,
            w1: layer(input, hidden),
            b1: vec![0.0; hidden],
            w2: layer(hidden, output),
            b2: vec![0.0; output],
        }
    }

    pub fn zeroed(input: usize, hidden: usize, output: usize) -> Self {
        MlpModel {
            input,
            hidden,
            output,
            w1: vec![0.0; input * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * output],
            b2: vec![0.0; output],
        }
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input, "input width mismatch");
        let mut h = self.b1.clone();
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * self.input..(j + 1) * self.input];
            *hj += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        h
    }

    fn logits(&self, hidden_act: &[f64]) -> Vec<f64> {
        let mut o = self.b2.clone();
        for (k, ok) in o.iter_mut().enumerate() {
            let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
            *ok += row.iter().zip(hidden_act).map(|(w, v)| w * v).sum::<f64>();
        }
        o
    }

    /// Class probabilities; always a distribution (sums to 1).
    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.hidden_pre(x);
        for v in &mut h {
            *v = v.max(0.0);
        }
        softmax(&self.logits(&h))
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }

    /// Cross-entropy of one example.
    pub fn loss(&self, x: &[f64], label: usize) -> f64 {
        -self.forward(x)[label].max(1e-300).ln()
    }

    /// Cross-entropy and analytic gradients for one example, accumulated
    /// into `grad`.
    pub fn loss_and_grad(&self, x: &[f64], label: usize, grad: &mut Gradients) -> f64 {
        let h_pre = self.hidden_pre(x);
        let h: Vec<f64> = h_pre.iter().map(|v| v.max(0.0)).collect();
        let probs = softmax(&self.logits(&h));
        let loss = -probs[label].max(1e-300).ln();

        let mut d_logits = probs;
        d_logits[label] -= 1.0;
        for (k, dk) in d_logits.iter().enumerate() {
            grad.b2[k] += dk;
            let row = &mut grad.w2[k * self.hidden..(k + 1) * self.hidden];
            for (g, hv) in row.iter_mut().zip(&h) {
                *g += dk * hv;
            }
        }
        for j in 0..self.hidden {
            if h_pre[j] <= 0.0 {
                continue;
            }
            let mut dh = 0.0;
            for (k, dk) in d_logits.iter().enumerate() {
                dh += dk * self.w2[k * self.hidden + j];
            }
            grad.b1[j] += dh;
            let row = &mut grad.w1[j * self.input..(j + 1) * self.input];
            for (g, xv) in row.iter_mut().zip(x) {
                *g += dh * xv;
            }
        }
        loss
    }

    /// Gradient-descent update: `params -= scale * grad`.
    pub fn apply_step(&mut self, grad: &Gradients, scale: f64) {
        for (w, g) in self.w1.iter_mut().zip(&grad.w1) {
            *w -= scale * g;
        }
        for (b, g) in self.b1.iter_mut().zip(&grad.b1) {
            *b -= scale * g;
        }
        for (w, g) in self.w2.iter_mut().zip(&grad.w2) {
            *w -= scale * g;
        }
        for (b, g) in self.b2.iter_mut().zip(&grad.b2) {
            *b -= scale * g;
        }
    }

    pub fn params(&self) -> impl Iterator<Item = f64> + '_ {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
    }

    /// Fingerprint of the exact parameter bit patterns.
    pub fn params_digest(&self) -> u64 {
        fnv1a64_f64(self.params())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradient accumulator shaped like a model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeroed_like(model: &MlpModel) -> Self {
        Gradients {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    pub fn reset(&mut self) {
        for v in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *v = 0.0;
        }
    }
}

/// Early-stopping rule: stop after `patience` consecutive epochs without a
/// strict improvement of the best validation loss.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    since_improvement: usize,
    observed: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            since_improvement: 0,
            observed: 0,
        }
    }

    /// Record one epoch's validation loss; returns whether it improved.
    pub fn observe(&mut self, loss: f64) -> bool {
        self.observed += 1;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_epoch = self.observed;
            self.since_improvement = 0;
            true
        } else {
            self.since_improvement += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_improvement >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }
}

/// Run the epoch loop against a scripted loss sequence; the harness used to
/// pin the stop rule's exact behaviour independently of real training.
pub fn scripted_epoch_run(
    losses: &[f64],
    max_epochs: usize,
    patience: usize,
) -> (usize, usize) {
    let mut stopper = EarlyStopping::new(patience);
    let mut epochs_run = 0;
    for epoch in 1..=max_epochs {
        let loss = losses[(epoch - 1).min(losses.len() - 1)];
        stopper.observe(loss);
        epochs_run = epoch;
        if stopper.should_stop() {
            break;
        }
    }
    (epochs_run, stopper.best_epoch())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOutcome {
    pub epochs_run: usize,
    pub best_val_loss: f64,
}

/// One training: mini-batch gradient descent on cross-entropy with per-epoch
/// validation and early stopping; the model is left at the parameters of the
/// best validation epoch.
pub fn train_once(
    model: &mut MlpModel,
    train: &[Example],
    val: &[Example],
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grad = Gradients::zeroed_like(model);
    let mut stopper = EarlyStopping::new(cfg.patience_epochs);
    let mut best_params: Option<MlpModel> = None;
    let mut epochs_run = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.reset();
            for &i in batch {
                let ex = &train[i];
                model.loss_and_grad(&ex.features, ex.label as usize, &mut grad);
            }
            model.apply_step(&grad, cfg.learning_rate / batch.len() as f64);
        }
        let val_loss = mean_loss(model, val);
        epochs_run = epoch;
        if stopper.observe(val_loss) {
            best_params = Some(model.clone());
        }
        if stopper.should_stop() {
            break;
        }
    }
    if let Some(best) = best_params {
        *model = best;
    }
    Ok(TrainOutcome { epochs_run, best_val_loss: stopper.best_loss() })
}

pub fn mean_loss(model: &MlpModel, set: &[Example]) -> f64 {
    set.iter().map(|ex| model.loss(&ex.features, ex.label as usize)).sum::<f64>()
        / set.len() as f64
}

pub fn accuracy(model: &MlpModel, set: &[Example]) -> f64 {
    let correct = set
        .iter()
        .filter(|ex| model.predict(&ex.features) == ex.label as usize)
        .count();
    correct as f64 / set.len() as f64
}

/// Per-feature standardization statistics, fit on a training split only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(rows: impl Iterator<Item = &'a [f64]> + Clone, width: usize) -> Normalizer {
        let mut mean = vec![0.0; width];
        let mut count = 0usize;
        for row in rows.clone() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
            count += 1;
        }
        let n = count.max(1) as f64;
        for m in &mut mean {
            *m /= n;
        }
        let mut var = vec![0.0; width];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(1e-9)).collect();
        Normalizer { mean, std }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// One protocol iteration's outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub confusion: ConfusionMatrix,
    pub epochs_run: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Parameter fingerprints at iteration start/end; consecutive records
    /// chain end-to-start under warm starting.
    pub params_digest_start: u64,
    pub params_digest_end: u64,
}

/// The warm-start training protocol, stepwise.
///
/// Each step draws a fresh seeded 80/20 split of the robot set, standardizes
/// features on the training split, trains from the previous step's final
/// parameters (the first step from fresh initialization), and scores the
/// human-like test set.
pub struct Protocol<'a> {
    robot: &'a [LabeledSample],
    human: &'a [LabeledSample],
    cfg: &'a TrainConfig,
    model: MlpModel,
    normalizer: Option<Normalizer>,
    iteration: usize,
}

impl<'a> Protocol<'a> {
    pub fn new(
        robot: &'a [LabeledSample],
        human: &'a [LabeledSample],
        cfg: &'a TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate()?;
        if robot.is_empty() {
            return Err(TrainError::EmptySplit("robot"));
        }
        if human.is_empty() {
            return Err(TrainError::EmptySplit("human test"));
        }
        check_provenance(robot, Provenance::Robot, "training pool")?;
        check_provenance(human, Provenance::HumanLike, "test set")?;
        for s in robot.iter().chain(human) {
            if s.features.len() != FEATURE_LEN {
                return Err(TrainError::BadExample(format!(
                    "feature width {} != {FEATURE_LEN}",
                    s.features.len()
                )));
            }
            if s.label > 9 {
                return Err(TrainError::BadExample(format!("label {} outside 0-9", s.label)));
            }
        }
        let model = MlpModel::init(
            FEATURE_LEN,
            cfg.hidden_width,
            CLASS_COUNT,
            derive_seed(cfg.seed, &[0x6d6f64656c]),
        );
        Ok(Protocol { robot, human, cfg, model, normalizer: None, iteration: 0 })
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn completed_iterations(&self) -> usize {
        self.iteration
    }

    /// Sizes of the next train/validation split.
    pub fn split_sizes(&self) -> (usize, usize) {
        let n = self.robot.len();
        let n_val = ((n as f64 * self.cfg.val_fraction).round() as usize).clamp(1, n - 1);
        (n - n_val, n_val)
    }

    pub fn step(&mut self) -> Result<IterationRecord, TrainError> {
        self.iteration += 1;
        let index = self.iteration;
        let params_digest_start = self.model.params_digest();

        // Fresh seeded split of the robot pool.
        let mut order: Vec<usize> = (0..self.robot.len()).collect();
        let mut rng =
            ChaCha12Rng::seed_from_u64(derive_seed(self.cfg.seed, &[0x73706c6974, index as u64]));
        order.shuffle(&mut rng);
        let (_, n_val) = self.split_sizes();
        let (val_idx, train_idx) = order.split_at(n_val);

        // The split must never contain human-provenance data; this is the
        // protocol's central bias control, so re-check at the point of use.
        for &i in val_idx.iter().chain(train_idx) {
            if self.robot[i].provenance != Provenance::Robot {
                return Err(TrainError::ProvenanceViolation {
                    context: "train/validation split",
                    found: self.robot[i].provenance,
                });
            }
        }

        let normalizer = Normalizer::fit(
            train_idx.iter().map(|&i| self.robot[i].features.as_slice()),
            FEATURE_LEN,
        );
        let to_examples = |idx: &[usize]| -> Vec<Example> {
            idx.iter()
                .map(|&i| Example {
                    features: normalizer.apply(&self.robot[i].features),
                    label: self.robot[i].label,
                })
                .collect()
        };
        let train_set = to_examples(train_idx);
        let val_set = to_examples(val_idx);

        let outcome = train_once(
            &mut self.model,
            &train_set,
            &val_set,
            self.cfg,
            derive_seed(self.cfg.seed, &[0x65706f6368, index as u64]),
        )?;

        // Score the human-like test set with this iteration's normalizer.
        let mut confusion = ConfusionMatrix::new();
        let mut loss_acc = 0.0;
        for s in self.human {
            let x = normalizer.apply(&s.features);
            let probs = self.model.forward(&x);
            confusion.record(argmax(&probs), s.label as usize);
            loss_acc += -probs[s.label as usize].max(1e-300).ln();
        }
        let test_accuracy = confusion.accuracy();
        let test_loss = loss_acc / self.human.len() as f64;
        self.normalizer = Some(normalizer);

        Ok(IterationRecord {
            index,
            test_accuracy,
            test_loss,
            confusion,
            epochs_run: outcome.epochs_run,
            train_size: train_set.len(),
            val_size: val_set.len(),
            params_digest_start,
            params_digest_end: self.model.params_digest(),
        })
    }
}

fn check_provenance(
    set: &[LabeledSample],
    want: Provenance,
    context: &'static str,
) -> Result<(), TrainError> {
    for s in set {
        if s.provenance != want {
            return Err(TrainError::ProvenanceViolation { context, found: s.provenance });
        }
    }
    Ok(())
}

/// Run the full protocol and assemble the report.
pub fn run_protocol(
    robot: &[LabeledSample],
    human: &[LabeledSample],
    cfg: &TrainConfig,
    channel: ChannelKind,
) -> Result<RunReport, TrainError> {
    let mut protocol = Protocol::new(robot, human, cfg)?;
    let mut records = Vec::with_capacity(cfg.iterations);
    for _ in 0..cfg.iterations {
        records.push(protocol.step()?);
    }
    Ok(RunReport::from_records(channel, records)?)
}
