//! Mini-batch training: Adam with bias correction, piecewise learning-rate
//! decay, global-norm gradient clipping, and seeded per-epoch reshuffling.
//!
//! Determinism contract: given the same dataset, configs, and seed, the
//! trained parameters and every logged loss/accuracy/lr value are
//! bit-identical across runs (wall-clock seconds are the one exception).

use std::time::Instant;

use crate::eval::argmax;
use crate::model::{backward_into, forward, ModelConfig, ModelParams};
use crate::numerics::cross_entropy;
use crate::rng::SplitMix64;
use crate::textpipe::EncodedExample;
use crate::{Error, Result};

/// Optimization hyperparameters. Every field has a documented default.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Epoch budget (default 150).
    pub epochs: usize,
    /// Examples per optimizer step; the final partial batch is kept
    /// (default 128).
    pub batch_size: usize,
    /// Initial learning rate (default 0.001).
    pub lr0: f64,
    /// Multiplier applied at each milestone (default 0.1).
    pub decay_factor: f64,
    /// Milestones as fractions of the epoch budget, strictly increasing in
    /// (0, 1) (default [0.5, 0.75]).
    pub decay_milestones: Vec<f64>,
    /// Seed for the per-epoch reshuffle stream.
    pub seed: u64,
    /// Global gradient-norm ceiling; 0 switches clipping off (default 5.0).
    pub grad_clip_norm: f64,
    /// Optional hard cap on total optimizer steps; training stops mid-epoch
    /// when reached (default none).
    pub max_steps: Option<u64>,
    /// Adam first-moment decay (default 0.9).
    pub adam_beta1: f64,
    /// Adam second-moment decay (default 0.999).
    pub adam_beta2: f64,
    /// Adam denominator offset (default 1e-8).
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 150,
            batch_size: 128,
            lr0: 0.001,
            decay_factor: 0.1,
            decay_milestones: vec![0.5, 0.75],
            seed: 0,
            grad_clip_norm: 5.0,
            max_steps: None,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be positive (got {})", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must lie in (0, 1] (got {})",
                self.decay_factor
            )));
        }
        for pair in self.decay_milestones.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config(
                    "decay_milestones must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&m) = self.decay_milestones.iter().find(|&&m| !(0.0 < m && m < 1.0)) {
            return Err(Error::Config(format!(
                "decay milestone {m} outside (0, 1)"
            )));
        }
        if !(self.grad_clip_norm >= 0.0 && self.grad_clip_norm.is_finite()) {
            return Err(Error::Config(format!(
                "grad_clip_norm must be 0 (off) or positive (got {})",
                self.grad_clip_norm
            )));
        }
        if self.max_steps == Some(0) {
            return Err(Error::Config("max_steps must be at least 1 when set".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if !(self.adam_eps > 0.0 && self.adam_eps.is_finite()) {
            return Err(Error::Config("adam_eps must be positive and finite".into()));
        }
        Ok(())
    }
}

/// First/second moments (shape-matched to the parameters) plus the step
/// counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model_cfg: &ModelConfig, cfg: &TrainConfig) -> Self {
        AdamState {
            m: ModelParams::zeros(model_cfg),
            v: ModelParams::zeros(model_cfg),
            t: 0,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            eps: cfg.adam_eps,
        }
    }
}

/// One bias-corrected Adam update:
/// t += 1; m = b1 m + (1-b1) g; v = b2 v + (1-b2) g^2;
/// theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps).
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((name, p), (_, g)), ((_, m), (_, v))) in params
        .entries_mut()
        .into_iter()
        .zip(grads.entries())
        .zip(state.m.entries_mut().into_iter().zip(state.v.entries_mut()))
    {
        for ((pv, &gv), (mv, vv)) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut().zip(v.data_mut()))
        {
            if !gv.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in parameter '{name}' at optimizer step {}",
                    state.t
                )));
            }
            *mv = b1 * *mv + (1.0 - b1) * gv;
            *vv = b2 * *vv + (1.0 - b2) * gv * gv;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Learning rate for a 0-based epoch: lr0 times decay_factor for every
/// milestone fraction already reached (epoch >= fraction * epochs).
pub fn lr_schedule(epoch: usize, cfg: &TrainConfig) -> f64 {
    let mut lr = cfg.lr0;
    for &frac in &cfg.decay_milestones {
        if epoch as f64 >= frac * cfg.epochs as f64 {
            lr *= cfg.decay_factor;
        }
    }
    lr
}

/// Scale gradients so their global L2 norm does not exceed `max_norm`
/// (0 disables). Returns the pre-clip norm. Summation runs in canonical
/// parameter order, so the result is deterministic.
pub fn clip_gradients(grads: &mut ModelParams, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, g) in grads.entries() {
        for &v in g.data() {
            sq += v * v;
        }
    }
    let norm = sq.sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        for (_, g) in grads.entries_mut() {
            g.scale(s);
        }
    }
    norm
}

/// One completed epoch. Loss and accuracy are measured on the forward
/// passes used for the gradients, i.e. before each batch's own update.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    /// CSV with columns epoch,loss,train_acc,lr,seconds. Floats use Rust's
    /// shortest round-trip formatting.
    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("epoch,loss,train_acc,lr,seconds\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.loss, r.train_acc, r.lr, r.seconds
            ));
        }
        s
    }
}

/// Train `params` in place over `dataset`. `progress` runs after every
/// completed epoch (commands use it for live log lines).
///
/// Per epoch: seeded reshuffle; contiguous batches (final partial batch
/// kept); per-batch mean gradient accumulated in ascending example order,
/// clipped, then one Adam step.
pub fn train(
    params: &mut ModelParams,
    model_cfg: &ModelConfig,
    dataset: &[EncodedExample],
    cfg: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainLog> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = SplitMix64::new(cfg.seed);
    let mut state = AdamState::new(model_cfg, cfg);
    let mut grads = ModelParams::zeros(model_cfg);
    let mut log = TrainLog::default();
    let mut steps: u64 = 0;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        rng.shuffle(&mut order);
        let lr = lr_schedule(epoch, cfg);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut seen = 0usize;
        let mut capped = false;
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.zero_all();
            for &idx in batch {
                let ex = &dataset[idx];
                let cache = forward(ex, params, model_cfg)?;
                let loss = cross_entropy(&cache.probs, ex.label)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {epoch}, batch {bi}, example {idx}"
                    )));
                }
                loss_sum += loss;
                if argmax(cache.probs.row(0)) == ex.label {
                    correct += 1;
                }
                backward_into(ex, ex.label, params, model_cfg, &cache, &mut grads)?;
            }
            seen += batch.len();
            let scale = 1.0 / batch.len() as f64;
            for (_, g) in grads.entries_mut() {
                g.scale(scale);
            }
            clip_gradients(&mut grads, cfg.grad_clip_norm);
            adam_step(params, &grads, &mut state, lr)?;
            steps += 1;
            if Some(steps) == cfg.max_steps {
                capped = true;
                break;
            }
        }
        let record = EpochRecord {
            epoch,
            loss: loss_sum / seen as f64,
            train_acc: correct as f64 / seen as f64,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        progress(&record);
        log.records.push(record);
        if capped {
            break;
        }
    }
    Ok(log)
}
