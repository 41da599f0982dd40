//! LoRA fine-tuning with a frozen base network, per-step metrics, finite
//! difference gradient checks and paired multi-seed comparisons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::adapter::{param_count, AdapterSet, InitKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::{backward, lora_a_key, lora_b_key, loss_and_grad, Batch, Gradients, Loss, ToyNetwork};
use crate::pipeline::Experiment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Optimizer {
    Sgd,
    AdamW,
}

impl Optimizer {
    pub fn default_lr(self) -> f64 {
        match self {
            Optimizer::Sgd => 1e-2,
            Optimizer::AdamW => 1e-3,
        }
    }
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::AdamW => "adamw",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adamw" | "adam" => Ok(Optimizer::AdamW),
            other => Err(Error::invalid(format!("unknown optimizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    Constant,
    LinearDecay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub seed: u64,
    pub warmup_fraction: f64,
    pub schedule: Schedule,
    pub loss: Loss,
    /// Loss level for `steps_to_threshold`.
    pub threshold: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 500,
            lr: Optimizer::Sgd.default_lr(),
            optimizer: Optimizer::Sgd,
            batch_size: 16,
            seed: 0,
            warmup_fraction: 0.0,
            schedule: Schedule::Constant,
            loss: Loss::Mse,
            threshold: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn adamw(steps: usize) -> Self {
        Self {
            steps,
            optimizer: Optimizer::AdamW,
            lr: Optimizer::AdamW.default_lr(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.lr)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config("warmup_fraction must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Learning rate for 1-based `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let warmup = (self.warmup_fraction * self.steps as f64).round() as usize;
        if step <= warmup {
            return self.lr * step as f64 / warmup as f64;
        }
        match self.schedule {
            Schedule::Constant => self.lr,
            Schedule::LinearDecay => {
                let span = (self.steps - warmup) as f64;
                self.lr * (self.steps - step + 1) as f64 / span
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Loss before this step's update.
    pub loss: f64,
    /// Global ℓ2 norm over every adapter gradient.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub records: Vec<StepRecord>,
    pub final_loss: f64,
    /// First step whose loss is at or below the threshold.
    pub steps_to_threshold: Option<usize>,
}

fn adapter_grads(grads: &Gradients, adapters: &AdapterSet) -> Vec<(String, Matrix, Matrix)> {
    adapters
        .keys()
        .map(|name| {
            (
                name.clone(),
                grads[&lora_a_key(name)].clone(),
                grads[&lora_b_key(name)].clone(),
            )
        })
        .collect()
}

struct AdamState {
    m: BTreeMap<String, Matrix>,
    v: BTreeMap<String, Matrix>,
}

impl AdamState {
    fn step(
        &mut self,
        key: String,
        param: &mut Matrix,
        grad: &Matrix,
        lr: f64,
        t: usize,
        cfg: &TrainConfig,
    ) {
        let m = self
            .m
            .entry(key.clone())
            .or_insert_with(|| Matrix::zeros(grad.rows(), grad.cols()));
        let v = self
            .v
            .entry(key)
            .or_insert_with(|| Matrix::zeros(grad.rows(), grad.cols()));
        let bc1 = 1.0 - cfg.beta1.powi(t as i32);
        let bc2 = 1.0 - cfg.beta2.powi(t as i32);
        let params = param.as_mut_slice();
        let (ms, vs) = (m.as_mut_slice(), v.as_mut_slice());
        for (i, &g) in grad.as_slice().iter().enumerate() {
            ms[i] = cfg.beta1 * ms[i] + (1.0 - cfg.beta1) * g;
            vs[i] = cfg.beta2 * vs[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = ms[i] / bc1;
            let v_hat = vs[i] / bc2;
            params[i] -= lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * params[i]);
        }
    }
}

/// Trains the adapters in place; the base network is never modified.
pub fn finetune<I>(
    net: &ToyNetwork,
    adapters: &mut AdapterSet,
    data: I,
    cfg: &TrainConfig,
) -> Result<RunMetrics>
where
    I: IntoIterator<Item = Batch>,
{
    cfg.validate()?;
    if !net.all_frozen() {
        return Err(Error::InvalidState(
            "base network must be frozen before fine-tuning".into(),
        ));
    }
    let mut data = data.into_iter();
    let mut adam = AdamState {
        m: BTreeMap::new(),
        v: BTreeMap::new(),
    };
    let mut records = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let batch = data
            .next()
            .ok_or_else(|| Error::invalid(format!("data ran out at step {step}")))?;
        let (loss, grads) = backward(net, Some(adapters), &batch, cfg.loss)
            .map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("step {step}: {msg}")),
                other => other,
            })?;
        let per_adapter = adapter_grads(&grads, adapters);
        let grad_norm = per_adapter
            .iter()
            .flat_map(|(_, ga, gb)| ga.as_slice().iter().chain(gb.as_slice()))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt();
        if !grad_norm.is_finite() {
            return Err(Error::Numeric(format!("step {step}: non-finite gradient")));
        }
        records.push(StepRecord {
            step,
            loss,
            grad_norm,
        });

        let lr = cfg.lr_at(step);
        for (name, ga, gb) in per_adapter {
            let ad = adapters.get_mut(&name).expect("gradient for a known adapter");
            match cfg.optimizer {
                Optimizer::Sgd => {
                    ad.a.add_scaled_assign(&ga, -lr)?;
                    ad.b.add_scaled_assign(&gb, -lr)?;
                }
                Optimizer::AdamW => {
                    adam.step(lora_a_key(&name), &mut ad.a, &ga, lr, step, cfg);
                    adam.step(lora_b_key(&name), &mut ad.b, &gb, lr, step, cfg);
                }
            }
            if !ad.a.is_finite() || !ad.b.is_finite() {
                return Err(Error::Numeric(format!(
                    "step {step}: adapter `{name}` diverged"
                )));
            }
        }
    }
    let final_loss = records.last().map_or(f64::NAN, |r| r.loss);
    let steps_to_threshold = cfg
        .threshold
        .and_then(|t| records.iter().find(|r| r.loss <= t).map(|r| r.step));
    Ok(RunMetrics {
        records,
        final_loss,
        steps_to_threshold,
    })
}

/// Mean loss of the adapted network on one batch.
pub fn evaluate(net: &ToyNetwork, adapters: &AdapterSet, batch: &Batch, loss: Loss) -> Result<f64> {
    let out = net.forward_adapted(adapters, &batch.inputs)?;
    Ok(loss_and_grad(&out, &batch.targets, loss)?.0)
}

/// Denominator floor for the relative error, so entries where both gradients
/// vanish do not divide by zero.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;
/// Upper bound on adapter parameters for a full finite-difference sweep.
pub const GRAD_CHECK_MAX_PARAMS: usize = 5000;

fn entry<'a>(set: &'a mut AdapterSet, name: &str, is_b: bool, idx: usize) -> &'a mut f64 {
    let ad = set.get_mut(name).expect("cloned adapter");
    let m = if is_b { &mut ad.b } else { &mut ad.a };
    &mut m.as_mut_slice()[idx]
}

/// Largest relative error between analytic adapter gradients and central
/// differences over every `A`/`B` entry.
pub fn gradient_check(
    net: &ToyNetwork,
    adapters: &AdapterSet,
    batch: &Batch,
    eps: f64,
    loss: Loss,
) -> Result<f64> {
    let count = param_count(adapters);
    if count > GRAD_CHECK_MAX_PARAMS {
        return Err(Error::invalid(format!(
            "{count} adapter parameters exceeds the finite-difference limit of {GRAD_CHECK_MAX_PARAMS}"
        )));
    }
    let (_, grads) = backward(net, Some(adapters), batch, loss)?;
    let mut probe = adapters.clone();
    let mut worst = 0.0f64;
    for name in adapters.keys() {
        for is_b in [false, true] {
            let key = if is_b { lora_b_key(name) } else { lora_a_key(name) };
            let analytic = &grads[&key];
            for idx in 0..analytic.as_slice().len() {
                let original = *entry(&mut probe, name, is_b, idx);
                *entry(&mut probe, name, is_b, idx) = original + eps;
                let up = evaluate(net, &probe, batch, loss)?;
                *entry(&mut probe, name, is_b, idx) = original - eps;
                let down = evaluate(net, &probe, batch, loss)?;
                *entry(&mut probe, name, is_b, idx) = original;

                let fd = (up - down) / (2.0 * eps);
                let an = analytic.as_slice()[idx];
                let denom = an.abs().max(fd.abs()).max(GRAD_CHECK_FLOOR);
                worst = worst.max((an - fd).abs() / denom);
            }
        }
    }
    Ok(worst)
}

/// One (mode, seed) run inside a comparison.
#[derive(Debug, Clone)]
pub struct ModeRun {
    pub seed: u64,
    pub result: std::result::Result<RunMetrics, String>,
    pub init_batches: usize,
}

#[derive(Debug, Clone)]
pub struct ModeSummary {
    pub kind: InitKind,
    pub runs: Vec<ModeRun>,
    pub mean_loss: Vec<f64>,
    pub std_loss: Vec<f64>,
    pub mean_grad_norm: Vec<f64>,
    pub mean_final_loss: f64,
    pub std_final_loss: f64,
    /// Mean over runs that reached the threshold; `None` if none did.
    pub mean_steps_to_threshold: Option<f64>,
    pub mean_grad_norm_step1: f64,
    pub partial: bool,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub modes: Vec<ModeSummary>,
    pub seeds: Vec<u64>,
    pub threshold: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    // population sd, so a single seed reports exactly 0
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn summarize(kind: InitKind, runs: Vec<ModeRun>) -> ModeSummary {
    let ok: Vec<&RunMetrics> = runs.iter().filter_map(|r| r.result.as_ref().ok()).collect();
    let steps = ok.iter().map(|m| m.records.len()).min().unwrap_or(0);
    let column = |f: &dyn Fn(&StepRecord) -> f64, i: usize| -> Vec<f64> {
        ok.iter().map(|m| f(&m.records[i])).collect()
    };
    let (mut mean_loss, mut std_loss, mut mean_grad_norm) = (vec![], vec![], vec![]);
    for i in 0..steps {
        let (m, s) = mean_std(&column(&|r| r.loss, i));
        mean_loss.push(m);
        std_loss.push(s);
        mean_grad_norm.push(mean_std(&column(&|r| r.grad_norm, i)).0);
    }
    let finals: Vec<f64> = ok.iter().map(|m| m.final_loss).collect();
    let (mean_final_loss, std_final_loss) = mean_std(&finals);
    let reached: Vec<f64> = ok
        .iter()
        .filter_map(|m| m.steps_to_threshold.map(|s| s as f64))
        .collect();
    ModeSummary {
        kind,
        partial: ok.len() < runs.len(),
        runs,
        mean_grad_norm_step1: mean_grad_norm.first().copied().unwrap_or(f64::NAN),
        mean_loss,
        std_loss,
        mean_grad_norm,
        mean_final_loss,
        std_final_loss,
        mean_steps_to_threshold: (!reached.is_empty()).then(|| mean_std(&reached).0),
    }
}

/// Runs every (mode, seed) pair on a bounded worker pool. Runs with the same
/// seed see identical networks and data, so modes are compared pairwise.
pub fn compare_inits(
    modes: &[InitKind],
    seeds: &[u64],
    experiment: &Experiment,
    threads: usize,
) -> Result<ComparisonReport> {
    if modes.len() < 2 {
        return Err(Error::invalid("comparison needs at least two modes"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("comparison needs at least one seed"));
    }
    let jobs: Vec<(InitKind, u64)> = modes
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    let results: Vec<ModeRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(kind, seed)| {
                let outcome = experiment
                    .prepare(kind, seed)
                    .and_then(|mut prepared| {
                        let init_batches = prepared.init_batches();
                        experiment.train(&mut prepared).map(|m| (m, init_batches))
                    });
                match outcome {
                    Ok((metrics, init_batches)) => ModeRun {
                        seed,
                        result: Ok(metrics),
                        init_batches,
                    },
                    Err(e) => ModeRun {
                        seed,
                        result: Err(e.to_string()),
                        init_batches: 0,
                    },
                }
            })
            .collect()
    });
    let mut by_mode = results.chunks(seeds.len());
    let summaries = modes
        .iter()
        .map(|&kind| summarize(kind, by_mode.next().expect("one chunk per mode").to_vec()))
        .collect();
    Ok(ComparisonReport {
        modes: summaries,
        seeds: seeds.to_vec(),
        threshold: experiment.threshold(),
    })
}
