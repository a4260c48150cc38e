//! Mini-batch training loop with periodic validation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aggregate::Dropout;
use crate::config::HyperParams;
use crate::error::{Error, IoContext, Result};
use crate::gce::{build_from_sequences, NormalizedAdjacency};
use crate::ingest::Dataset;
use crate::scalar::Scalar;
use crate::serve_eval::{evaluate, MetricsReport, DEFAULT_CUTOFFS};
use crate::sparse::CsrMatrix;

use super::adam::{AdamConfig, AdamState};
use super::checkpoint::write_checkpoint;
use super::params::{ModelDims, ModelParams};
use super::pipeline::{backward, forward_loss, GatheredRows, GradAccumulator, ModelConfig, TrainingExample};
use super::sampling::ExampleSampler;

/// Examples per reduction chunk. Fixed so the floating-point summation order
/// does not depend on the number of worker threads.
pub const GRAD_CHUNK: usize = 8;

/// Cutoff used to pick the best checkpoint.
pub const SELECTION_CUTOFF: usize = 20;

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// RNG seed of the dropout masks of example `idx` in step `step`.
pub fn dropout_seed(seed: u64, step: usize, idx: usize) -> u64 {
    mix(mix(mix(seed) ^ step as u64) ^ idx as u64)
}

/// Dropout settings for [`batch_gradients`]: `(rate, seed, step)`.
#[derive(Clone, Copy, Debug)]
pub struct DropoutPlan {
    pub rate: f64,
    pub seed: u64,
    pub step: usize,
}

/// Mean loss and mean gradient over a batch.
pub fn batch_gradients<T: Scalar>(
    examples: &[TrainingExample],
    params: &ModelParams<T>,
    a_norm: &CsrMatrix<T>,
    cfg: &ModelConfig,
    dropout: Option<DropoutPlan>,
) -> Result<(T, ModelParams<T>)> {
    if examples.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let globals = GatheredRows::for_examples(a_norm, &params.item_table, examples);
    let partials: Vec<GradAccumulator<T>> = examples
        .par_chunks(GRAD_CHUNK)
        .enumerate()
        .map(|(c, chunk)| {
            let mut acc = GradAccumulator::new(&cfg.dims);
            for (j, ex) in chunk.iter().enumerate() {
                let trace = match dropout.filter(|p| p.rate > 0.0) {
                    Some(plan) => {
                        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed(plan.seed, plan.step, c * GRAD_CHUNK + j));
                        let mut d = Dropout {
                            rate: plan.rate,
                            rng: &mut rng,
                        };
                        forward_loss(ex, &params.encoder, cfg, &globals, Some(&mut d))?
                    }
                    None => forward_loss(ex, &params.encoder, cfg, &globals, None)?,
                };
                backward(&trace, &params.encoder, cfg, &mut acc);
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = GradAccumulator::new(&cfg.dims);
    for p in partials {
        total.merge(p);
    }
    let scale = T::one() / T::of_usize(examples.len());
    let loss = total.loss_sum * scale;
    let grads = total.finalize(a_norm, cfg.dims.num_items, scale)?;
    Ok((loss, grads))
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRecord {
    pub step: usize,
    /// Mean batch loss since the previous record (NaN at step 0).
    pub loss: f64,
    pub report: MetricsReport,
    pub wall_secs: f64,
}

impl EvalRecord {
    pub fn log_line(&self) -> String {
        format!(
            "step={} loss={:.6} {} wall={:.2}s",
            self.step,
            self.loss,
            self.report.summary(),
            self.wall_secs
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    /// Where `checkpoint.bin`, `train.log` and `config.txt` go; nothing is
    /// written when `None`.
    pub out_dir: Option<PathBuf>,
}

pub struct TrainOutput<T> {
    pub dims: ModelDims,
    pub model: ModelConfig,
    pub adjacency: NormalizedAdjacency<T>,
    /// Parameters with the best validation Recall@20 (earliest on ties).
    pub best: ModelParams<T>,
    pub best_step: usize,
    pub last: ModelParams<T>,
    pub log: Vec<EvalRecord>,
}

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LOG_FILE: &str = "train.log";
pub const CONFIG_FILE: &str = "config.txt";

fn write_log(dir: &Path, log: &[EvalRecord]) -> Result<()> {
    let mut text = String::new();
    for r in log {
        let _ = writeln!(text, "{}", r.log_line());
    }
    let path = dir.join(LOG_FILE);
    fs::write(&path, text).with_path(path)
}

/// Trains on the split's training users, validating on its validation
/// users. The adjacency is built once from training users only.
pub fn train<T: Scalar>(hp: &HyperParams, data: &Dataset, opts: &TrainOptions) -> Result<TrainOutput<T>> {
    hp.validate()?;
    let started = Instant::now();
    let num_items = data.num_items();
    let train_seqs = data.train_sequences();
    let valid_seqs = data.select(&data.split.valid);
    let (_, adjacency) = build_from_sequences::<T, _>(train_seqs.iter().copied(), hp, num_items);
    let dims = ModelDims::from_hyper(hp, num_items);
    let model = ModelConfig::from_hyper(hp, num_items);

    let mut init_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut params = ModelParams::<T>::init(&dims, &mut init_rng);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(hp.seed);
    sample_rng.set_stream(1);
    let mut sampler = ExampleSampler::new(train_seqs, num_items, hp.l_rec, hp.neg_samples, hp.sampling, sample_rng)?;
    let mut adam = AdamState::new(&dims, AdamConfig::with_lr(hp.lr));

    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir).with_path(dir)?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, hp.to_kv_string()).with_path(path)?;
    }

    let eval = |p: &ModelParams<T>| evaluate(&valid_seqs, p, &adjacency.a_norm, &model, &DEFAULT_CUTOFFS);
    let mut log = vec![EvalRecord {
        step: 0,
        loss: f64::NAN,
        report: eval(&params)?,
        wall_secs: started.elapsed().as_secs_f64(),
    }];
    log::info!("{}", log[0].log_line());
    let mut best = params.clone();
    let mut best_step = 0;
    let mut best_recall = log[0].report.recall(SELECTION_CUTOFF);
    let (mut loss_sum, mut loss_n) = (0.0, 0usize);

    for step in 1..=hp.max_steps {
        let batch = sampler.next_batch(hp.batch);
        let plan = DropoutPlan {
            rate: hp.dropout,
            seed: hp.seed,
            step,
        };
        let result = batch_gradients(&batch, &params, &adjacency.a_norm, &model, Some(plan));
        let (loss, grads) = match result {
            Ok((loss, grads)) if loss.is_finite() => (loss, grads),
            Ok((loss, _)) => return diverged(opts, &dims, &params, &log, step, loss.to_f64_lossy()),
            Err(Error::NonFiniteGradient(name)) => {
                log::error!("non-finite gradient in {name} at step {step}");
                return diverged(opts, &dims, &params, &log, step, f64::NAN);
            }
            Err(e) => return Err(e),
        };
        adam.step(&mut params, &grads);
        loss_sum += loss.to_f64_lossy();
        loss_n += 1;

        let due = (hp.eval_every > 0 && step % hp.eval_every == 0) || step == hp.max_steps;
        if due {
            let rec = EvalRecord {
                step,
                loss: loss_sum / loss_n as f64,
                report: eval(&params)?,
                wall_secs: started.elapsed().as_secs_f64(),
            };
            log::info!("{}", rec.log_line());
            (loss_sum, loss_n) = (0.0, 0);
            let r = rec.report.recall(SELECTION_CUTOFF);
            if r > best_recall {
                best_recall = r;
                best_step = step;
                best = params.clone();
            }
            log.push(rec);
        }
    }

    if let Some(dir) = &opts.out_dir {
        write_checkpoint(&dir.join(CHECKPOINT_FILE), &dims, &best)?;
        write_log(dir, &log)?;
    }
    Ok(TrainOutput {
        dims,
        model,
        adjacency,
        best,
        best_step,
        last: params,
        log,
    })
}

fn diverged<T: Scalar, R>(
    opts: &TrainOptions,
    dims: &ModelDims,
    last_good: &ModelParams<T>,
    log: &[EvalRecord],
    step: usize,
    loss: f64,
) -> Result<R> {
    if let Some(dir) = &opts.out_dir {
        write_checkpoint(&dir.join(CHECKPOINT_FILE), dims, last_good)?;
        write_log(dir, log)?;
    }
    Err(Error::Diverged { step, loss })
}
