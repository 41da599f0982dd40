//! End-to-end experiment on the teacher-student task: activation SVD pass,
//! rank allocation, adapter init and fine-tuning.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::adapter::{init_adapters, AdapterSet, InitKind, InitMode};
use crate::alloc::{redistribute_ranks, Measure, RankAllocation};
use crate::error::Result;
use crate::io::{EvaCheckpoint, ExperimentConfig};
use crate::net::{make_teacher_student, DataGen, TeacherStudentConfig, ToyNetwork};
use crate::svdstream::{run_initialization_pass, InitPass, StreamConfig};
use crate::train::{finetune, RunMetrics, TrainConfig};

/// Workload used by the CLI and the comparison harness: rank-deficient inputs
/// (4 latent directions in 32 features) and a student far enough from the
/// teacher that the adapters have real work to do.
pub fn default_workload() -> TeacherStudentConfig {
    TeacherStudentConfig::default()
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub workload: TeacherStudentConfig,
    pub stream: StreamConfig,
    pub measure: Measure,
    pub alpha: f64,
    pub whiten_exponent: f64,
    pub train: TrainConfig,
    /// Loss threshold as a multiple of the task's noise floor.
    pub threshold_factor: f64,
}

impl Default for Experiment {
    fn default() -> Self {
        Self::from_config(&ExperimentConfig::default()).expect("default config is valid")
    }
}

/// Everything needed to fine-tune one (mode, seed) run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub kind: InitKind,
    pub seed: u64,
    pub net: ToyNetwork,
    pub data: DataGen,
    /// `None` for modes that skip the activation pass.
    pub pass: Option<InitPass>,
    pub allocation: RankAllocation,
    pub adapters: AdapterSet,
    pub init_seconds: f64,
}

impl Prepared {
    /// Batches consumed by the SVD pass (`T`); 0 when it was skipped.
    pub fn init_batches(&self) -> usize {
        self.pass.as_ref().map_or(0, |p| p.batches_consumed)
    }

    pub fn checkpoint(&self, alpha: f64) -> Result<EvaCheckpoint> {
        let empty = BTreeMap::new();
        let states = self.pass.as_ref().map_or(&empty, |p| &p.states);
        EvaCheckpoint::from_parts(&self.allocation, states, &self.adapters, &host_shapes(&self.net), alpha)
    }
}

/// `(out, in)` for every linear layer.
pub fn host_shapes(net: &ToyNetwork) -> BTreeMap<String, (usize, usize)> {
    net.linear_layers()
        .map(|l| (l.name.clone(), (l.out_features(), l.in_features())))
        .collect()
}

impl Experiment {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let workload = TeacherStudentConfig {
            batch_size: cfg.batch_size,
            mask_fraction: cfg.mask,
            ..default_workload()
        };
        workload.validate()?;
        let stream = StreamConfig {
            rank: cfg.rank,
            rho: cfg.rho,
            tau: cfg.tau,
            delta: cfg.delta,
            max_batches: cfg.max_batches,
            ..Default::default()
        };
        let train = TrainConfig {
            steps: cfg.steps,
            lr: cfg.lr(),
            optimizer: cfg.optimizer,
            batch_size: cfg.batch_size,
            ..Default::default()
        };
        Ok(Self {
            workload,
            stream,
            measure: cfg.measure,
            alpha: cfg.alpha,
            whiten_exponent: cfg.whiten_exponent,
            train,
            threshold_factor: 2.0,
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold_factor * self.workload.noise_floor()
    }

    /// Student network and data for `seed`.
    pub fn task(&self, seed: u64) -> Result<(ToyNetwork, DataGen)> {
        let (_, student, data) = make_teacher_student(&self.workload, seed)?;
        Ok((student, data))
    }

    /// Runs the activation pass (if the mode needs it), allocates ranks and
    /// initializes the adapters.
    pub fn prepare(&self, kind: InitKind, seed: u64) -> Result<Prepared> {
        let (net, data) = self.task(seed)?;
        let start = Instant::now();
        let (pass, allocation) = if kind.needs_activation_svd() {
            let cfg = StreamConfig {
                seed,
                ..self.stream.clone()
            };
            let pass = run_initialization_pass(&net, data.stream("init"), &cfg)?;
            let allocation =
                redistribute_ranks(&pass.states, cfg.rank, cfg.rho, self.measure)?;
            (Some(pass), allocation)
        } else {
            let names = net.layer_names();
            (None, RankAllocation::uniform(&names, self.stream.rank, self.measure))
        };
        let states = pass.as_ref().map(|p| p.states.clone()).unwrap_or_default();
        let mode = InitMode {
            whiten_exponent: self.whiten_exponent,
            ..InitMode::new(kind, seed)
        };
        let adapters = init_adapters(&net, &states, &allocation, &mode, self.alpha)?;
        Ok(Prepared {
            kind,
            seed,
            net,
            data,
            pass,
            allocation,
            adapters,
            init_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            threshold: Some(self.threshold()),
            ..self.train.clone()
        }
    }

    /// Fine-tunes `adapters` on the seed's training stream.
    pub fn train_adapters(&self, net: &ToyNetwork, data: &DataGen, adapters: &mut AdapterSet) -> Result<RunMetrics> {
        finetune(net, adapters, data.stream("train"), &self.train_config())
    }

    pub fn train(&self, prepared: &mut Prepared) -> Result<RunMetrics> {
        self.train_adapters(&prepared.net, &prepared.data, &mut prepared.adapters)
    }

    pub fn run(&self, kind: InitKind, seed: u64) -> Result<(Prepared, RunMetrics)> {
        let mut prepared = self.prepare(kind, seed)?;
        let metrics = self.train(&mut prepared)?;
        Ok((prepared, metrics))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Experiment {
        let cfg = ExperimentConfig {
            rank: 2,
            steps: 5,
            max_batches: 20,
            ..Default::default()
        };
        Experiment::from_config(&cfg).unwrap()
    }

    #[test]
    fn random_mode_skips_the_pass() {
        let p = small().prepare(InitKind::Random, 0).unwrap();
        assert_eq!(p.init_batches(), 0);
        assert!(p.allocation.ranks.values().all(|&r| r == 2));
    }

    #[test]
    fn runs_are_deterministic() {
        let exp = small();
        let (_, a) = exp.run(InitKind::Eva, 3).unwrap();
        let (_, b) = exp.run(InitKind::Eva, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn checkpoint_reloads_the_same_adapters() {
        let p = small().prepare(InitKind::Eva, 1).unwrap();
        let ckpt = p.checkpoint(1.0).unwrap();
        assert_eq!(ckpt.budget, p.allocation.total());
        assert_eq!(ckpt.to_adapters().unwrap(), p.adapters);
    }
}
