//! Adadelta training loop with early stopping, metric logging, and
//! best/last checkpointing.

#[cfg(test)]
mod tests;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::{batches, eval_batches, CorpusSplit};
use crate::error::{Error, Result};
use crate::model::{checkpoint, lm_loss, DecoderModel, ModelConfig};
use crate::tensor::{Elem, Tensor};

/// Adadelta: each parameter moves by the ratio of running RMS update
/// magnitude to running RMS gradient magnitude; no learning rate.
pub struct Adadelta<E: Elem> {
    rho: f64,
    eps: f64,
    clip_norm: Option<f64>,
    slots: Vec<Slot<E>>,
}

struct Slot<E> {
    avg_sq_grad: Vec<E>,
    avg_sq_delta: Vec<E>,
}

impl<E: Elem> Adadelta<E> {
    pub const DEFAULT_RHO: f64 = 0.95;
    pub const DEFAULT_EPS: f64 = 1e-6;

    pub fn new(params: &[(String, Tensor<E>)], rho: f64, eps: f64, clip_norm: Option<f64>) -> Self {
        let slots = params
            .iter()
            .map(|(_, t)| Slot {
                avg_sq_grad: vec![E::ZERO; t.numel()],
                avg_sq_delta: vec![E::ZERO; t.numel()],
            })
            .collect();
        Adadelta {
            rho,
            eps,
            clip_norm,
            slots,
        }
    }

    /// Apply one update from the gradients accumulated on `params`,
    /// then clear them. A missing gradient counts as zero: the value is
    /// untouched but the accumulators still decay.
    pub fn step(&mut self, params: &[(String, Tensor<E>)]) -> Result<()> {
        assert_eq!(
            params.len(),
            self.slots.len(),
            "optimizer/parameter mismatch"
        );
        let mut grads: Vec<Vec<E>> = Vec::with_capacity(params.len());
        for (name, tensor) in params {
            let g = tensor.grad_or_zeros();
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite gradient in parameter `{name}`; aborting the step"
                )));
            }
            grads.push(g);
        }
        if let Some(max_norm) = self.clip_norm {
            let norm: f64 = grads
                .iter()
                .flat_map(|g| g.iter())
                .map(|v| v.to_f64() * v.to_f64())
                .sum::<f64>()
                .sqrt();
            if norm > max_norm {
                let scale = E::from_f64(max_norm / norm);
                for g in grads.iter_mut() {
                    for v in g.iter_mut() {
                        *v = *v * scale;
                    }
                }
            }
        }
        let rho = E::from_f64(self.rho);
        let one_minus_rho = E::from_f64(1.0 - self.rho);
        let eps = E::from_f64(self.eps);
        for (slot, ((_, tensor), grad)) in self.slots.iter_mut().zip(params.iter().zip(&grads)) {
            let mut values = tensor.to_vec();
            for i in 0..values.len() {
                let g = grad[i];
                slot.avg_sq_grad[i] = rho * slot.avg_sq_grad[i] + one_minus_rho * g * g;
                let delta =
                    -((slot.avg_sq_delta[i] + eps).sqrt() / (slot.avg_sq_grad[i] + eps).sqrt()) * g;
                slot.avg_sq_delta[i] = rho * slot.avg_sq_delta[i] + one_minus_rho * delta * delta;
                values[i] = values[i] + delta;
            }
            tensor.set_values(&values)?;
            tensor.zero_grad();
        }
        Ok(())
    }

    #[cfg(test)]
    fn accumulators(&self, idx: usize) -> (&[E], &[E]) {
        (&self.slots[idx].avg_sq_grad, &self.slots[idx].avg_sq_delta)
    }
}

/// Patience bookkeeping: stop once validation has not improved for
/// `patience` consecutive epochs.
pub struct EarlyStopper {
    patience: usize,
    pub best: f64,
    pub best_epoch: usize,
    misses: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            misses: 0,
        }
    }

    /// Record one epoch's validation loss; true means halt now.
    /// Returns the halt decision; `improved()` via best_epoch == epoch.
    pub fn observe(&mut self, epoch: usize, valid: f64) -> bool {
        if valid < self.best {
            self.best = valid;
            self.best_epoch = epoch;
            self.misses = 0;
            false
        } else {
            self.misses += 1;
            self.misses >= self.patience
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TargetReached,
}

/// Loss history and outcome of one training run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub epochs_run: usize,
    pub train_bits: Vec<f64>,
    pub valid_bits: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    pub best_valid_bits: f64,
    pub best_epoch: usize,
    pub stop: StopReason,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub rho: f64,
    pub eps: f64,
    /// Global gradient-norm clip; None disables (oracle tests do).
    pub clip_norm: Option<f64>,
    /// Stop as soon as validation drops below this, for bounded runs.
    pub target_valid_bits: Option<f64>,
    /// Where metrics.csv, best.ckpt and last.ckpt go; None keeps the
    /// run entirely in memory.
    pub out_dir: Option<PathBuf>,
    /// Echo one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            batch_size: 32,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            rho: Adadelta::<f32>::DEFAULT_RHO,
            eps: Adadelta::<f32>::DEFAULT_EPS,
            clip_norm: Some(5.0),
            target_valid_bits: None,
            out_dir: None,
            verbose: false,
        }
    }
}

fn epoch_seed(seed: u64, epoch: usize) -> u64 {
    // splitmix-style decorrelation of per-epoch shuffle streams
    (seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(0x6A09_E667_F3BC_C909)
}

/// Checkpoint write with rename, so an interrupted run never leaves a
/// half-written file where a good one was.
fn save_atomic<E: Elem>(model: &DecoderModel<E>, path: &Path) -> Result<()> {
    let tmp = path.with_extension("ckpt.tmp");
    checkpoint::save(model, &tmp)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Mean loss in bits per token over every window of a stream.
pub fn evaluate<E: Elem>(
    model: &DecoderModel<E>,
    stream: &[u32],
    seq_len: usize,
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0f64;
    let mut windows = 0usize;
    for (inputs, targets) in eval_batches(stream, seq_len, batch_size)? {
        let loss = lm_loss(&model.forward(&inputs)?, &targets)?.item()?;
        total += loss.to_f64() * inputs.rows as f64;
        windows += inputs.rows;
    }
    Ok(total / windows as f64)
}

/// Full training loop: per-epoch shuffled batches, adadelta updates,
/// validation, best-checkpoint retention, early stopping. Returns the
/// history and the model restored to its best-validation weights.
pub fn train<E: Elem>(
    config: &ModelConfig,
    corpus: &CorpusSplit,
    opts: &TrainOptions,
) -> Result<(TrainRun, DecoderModel<E>)> {
    config.validate()?;
    crate::retain_large_allocations();
    let model = DecoderModel::<E>::new(config, opts.seed)?;
    let params = model.named_params();
    let mut optimizer = Adadelta::new(&params, opts.rho, opts.eps, opts.clip_norm);
    let mut stopper = EarlyStopper::new(opts.patience);

    let mut metrics: Option<std::fs::File> = match &opts.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut f = std::fs::File::create(dir.join("metrics.csv"))?;
            writeln!(f, "epoch,train_loss_bits,valid_loss_bits,epoch_seconds")?;
            Some(f)
        }
        None => None,
    };

    let mut run = TrainRun {
        epochs_run: 0,
        train_bits: Vec::new(),
        valid_bits: Vec::new(),
        epoch_seconds: Vec::new(),
        best_valid_bits: f64::INFINITY,
        best_epoch: 0,
        stop: StopReason::MaxEpochs,
    };
    let mut best_snapshot: Option<Vec<Vec<E>>> = None;

    for epoch in 1..=opts.max_epochs {
        let started = Instant::now();
        let mut batch_losses = 0.0f64;
        let mut batch_count = 0usize;
        for (inputs, targets) in batches(
            &corpus.train,
            config.seq_len,
            opts.batch_size,
            epoch_seed(opts.seed, epoch),
        )? {
            let loss = lm_loss(&model.forward(&inputs)?, &targets)?;
            batch_losses += loss.item()?.to_f64();
            batch_count += 1;
            loss.backward()?;
            optimizer.step(&params)?;
        }
        if batch_count == 0 {
            return Err(Error::data(
                "training stream yields no full batch; shrink batch_size or seq_len".to_string(),
            ));
        }
        let train_bits = batch_losses / batch_count as f64;
        let valid_bits = evaluate(&model, &corpus.valid, config.seq_len, opts.batch_size)?;
        let secs = started.elapsed().as_secs_f64();

        run.epochs_run = epoch;
        run.train_bits.push(train_bits);
        run.valid_bits.push(valid_bits);
        run.epoch_seconds.push(secs);
        if let Some(f) = metrics.as_mut() {
            writeln!(f, "{epoch},{train_bits:.6},{valid_bits:.6},{secs:.3}")?;
            f.flush()?;
        }
        if opts.verbose {
            eprintln!(
                "epoch {epoch}: train {train_bits:.4} bits, valid {valid_bits:.4} bits, {secs:.1}s"
            );
        }

        let halt = stopper.observe(epoch, valid_bits);
        if stopper.best_epoch == epoch {
            run.best_valid_bits = valid_bits;
            run.best_epoch = epoch;
            best_snapshot = Some(params.iter().map(|(_, t)| t.to_vec()).collect());
            if let Some(dir) = &opts.out_dir {
                save_atomic(&model, &dir.join("best.ckpt"))?;
            }
        }
        if let Some(dir) = &opts.out_dir {
            save_atomic(&model, &dir.join("last.ckpt"))?;
        }

        if let Some(target) = opts.target_valid_bits {
            if valid_bits < target {
                run.stop = StopReason::TargetReached;
                break;
            }
        }
        if halt {
            run.stop = StopReason::Patience;
            break;
        }
    }

    if let Some(snapshot) = best_snapshot {
        for ((_, tensor), values) in params.iter().zip(&snapshot) {
            tensor.set_values(values)?;
        }
    }
    Ok((run, model))
}
