//! Incremental estimation of each layer's top right-singular subspace from a
//! stream of activation minibatches, with per-layer convergence detection.
//!
//! The summary after `t` batches is the truncated SVD of the row-stacked stream
//! `[X₁; …; X_t]`, maintained by re-factoring `[diag(σ)·V; X_new]`. This is
//! exact as long as nothing was truncated away.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{component_cosine_similarity, svd_randomized, svd_truncated, Matrix};
use crate::net::{forward_with_taps, Batch, ToyNetwork};
use crate::seed;

/// Number of components tracked per layer for base rank `r` and
/// over-provisioning factor `rho`: `⌈r·ρ⌉`.
pub fn tracked_components(rank: usize, rho: f64) -> usize {
    // the epsilon keeps e.g. 10 × 1.1 = 11.000000000000002 at 11
    ((rank as f64 * rho) - 1e-9).ceil().max(0.0) as usize
}

/// Which components must be stable before a layer counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvergenceScope {
    /// Every tracked component.
    #[default]
    AllTracked,
    /// Only the leading `rank` components.
    LeadingRank,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub rank: usize,
    pub rho: f64,
    pub tau: f64,
    /// Fraction of layers that must converge before the pass stops.
    pub delta: f64,
    pub max_batches: usize,
    pub use_randomized: bool,
    pub oversample: usize,
    pub seed: u64,
    pub scope: ConvergenceScope,
    /// Subtract the running mean before factoring. Off by default.
    pub center: bool,
    /// Layers to track; `None` tracks every linear layer.
    pub layers: Option<Vec<String>>,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            rho: 1.0,
            tau: 0.99,
            delta: 1.0,
            max_batches: 100,
            use_randomized: false,
            oversample: 4,
            seed: 0,
            scope: ConvergenceScope::AllTracked,
            center: false,
            layers: None,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::Config("rank must be >= 1".into()));
        }
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return Err(Error::Config(format!("rho must be >= 1, got {}", self.rho)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!("delta must be in (0, 1], got {}", self.delta)));
        }
        if self.max_batches == 0 {
            return Err(Error::Config("max_batches must be >= 1".into()));
        }
        Ok(())
    }

    pub fn tracked(&self) -> usize {
        tracked_components(self.rank, self.rho)
    }

    fn update_options(&self) -> UpdateOptions {
        UpdateOptions {
            randomized: self.use_randomized.then_some((self.oversample, self.seed)),
            center: self.center,
        }
    }
}

/// How [`SvdState::update`] factors the stacked matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateOptions {
    /// `(oversample, seed)` for the randomized path; exact SVD when `None`
    /// or when the sketch would not fit.
    pub randomized: Option<(usize, u64)>,
    pub center: bool,
}

/// Streaming summary of one layer's input activations.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdState {
    pub layer: String,
    /// Right-singular vectors as rows; zero rows before the first update.
    pub v: Matrix,
    pub sigma: Vec<f64>,
    /// Target number of components, already capped at the feature dimension.
    pub tracked: usize,
    /// Total rows consumed (`M`).
    pub samples_seen: usize,
    pub updates: usize,
    pub converged: bool,
    pub last_similarity: Vec<f64>,
    pub mean: Option<Vec<f64>>,
}

impl SvdState {
    pub fn new(layer: impl Into<String>, dim: usize, tracked: usize) -> Self {
        Self {
            layer: layer.into(),
            v: Matrix::zeros(0, dim),
            sigma: Vec::new(),
            tracked: tracked.min(dim),
            samples_seen: 0,
            updates: 0,
            converged: false,
            last_similarity: Vec::new(),
            mean: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.v.cols()
    }

    /// Returns the state summarizing the stream extended by `x`.
    pub fn update(&self, x: &Matrix, opts: &UpdateOptions) -> Result<SvdState> {
        if self.converged {
            return Err(Error::InvalidState(format!(
                "layer `{}` already converged",
                self.layer
            )));
        }
        if x.cols() != self.dim() {
            return Err(Error::dims(format!(
                "layer `{}` tracks {} features, batch has {}",
                self.layer,
                self.dim(),
                x.cols()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::invalid(format!("empty batch for layer `{}`", self.layer)));
        }

        let prior = self.v.scale_rows(&self.sigma)?;
        let (stacked, mean) = if opts.center {
            self.centered_stack(prior, x)?
        } else {
            (prior.vstack(x)?, None)
        };

        let samples_seen = self.samples_seen + x.rows();
        let k = self
            .tracked
            .min(samples_seen)
            .min(stacked.rows())
            .min(self.dim());
        let svd = match opts.randomized {
            Some((oversample, seed))
                if k + oversample <= stacked.rows().min(stacked.cols()) =>
            {
                let seed = seed::derive(seed, &format!("{}#{}", self.layer, self.updates));
                svd_randomized(&stacked, k, oversample, seed)?
            }
            _ => svd_truncated(&stacked, k)?,
        };

        let common = self.v.rows().min(k);
        let mut similarity = if common > 0 {
            component_cosine_similarity(&self.v.row_range(0, common), &svd.vt.row_range(0, common))?
        } else {
            Vec::new()
        };
        // components without a predecessor cannot be stable yet
        similarity.resize(k, 0.0);

        Ok(SvdState {
            layer: self.layer.clone(),
            v: svd.vt,
            sigma: svd.sigma,
            tracked: self.tracked,
            samples_seen,
            updates: self.updates + 1,
            converged: false,
            last_similarity: similarity,
            mean,
        })
    }

    /// Incremental-PCA stack with the mean-shift correction row.
    fn centered_stack(&self, prior: Matrix, x: &Matrix) -> Result<(Matrix, Option<Vec<f64>>)> {
        let d = self.dim();
        let n_new = x.rows() as f64;
        let mut batch_mean = vec![0.0; d];
        for row in x.row_iter() {
            batch_mean.iter_mut().zip(row).for_each(|(m, v)| *m += v / n_new);
        }
        let centered = Matrix::from_fn(x.rows(), d, |i, j| x[(i, j)] - batch_mean[j]);
        match &self.mean {
            None => Ok((centered, Some(batch_mean))),
            Some(old) => {
                let n_old = self.samples_seen as f64;
                let total = n_old + n_new;
                let w = (n_old * n_new / total).sqrt();
                let shift = Matrix::from_fn(1, d, |_, j| w * (old[j] - batch_mean[j]));
                let mean = old
                    .iter()
                    .zip(&batch_mean)
                    .map(|(a, b)| (n_old * a + n_new * b) / total)
                    .collect();
                Ok((prior.vstack(&centered)?.vstack(&shift)?, Some(mean)))
            }
        }
    }
}

/// Exact-SVD update with default options.
pub fn svd_update(state: &SvdState, x: &Matrix) -> Result<SvdState> {
    state.update(x, &UpdateOptions::default())
}

/// Whether every component in scope moved by less than `tau` (absolute
/// cosine) during the latest update.
pub fn check_convergence(state: &SvdState, tau: f64, scope: ConvergenceScope, rank: usize) -> Result<bool> {
    if state.updates < 2 {
        return Err(Error::InvalidState(format!(
            "layer `{}` needs two updates before a convergence check, has {}",
            state.layer, state.updates
        )));
    }
    let needed = match scope {
        ConvergenceScope::AllTracked => state.tracked,
        ConvergenceScope::LeadingRank => rank.min(state.tracked),
    };
    if state.last_similarity.len() < needed {
        return Ok(false);
    }
    Ok(state.last_similarity[..needed].iter().all(|&s| s >= tau))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    AllConverged,
    /// The converged fraction reached `delta` before every layer converged.
    DeltaReached,
    MaxBatches,
    StreamExhausted,
}

/// Outcome of an initialization pass.
#[derive(Debug, Clone)]
pub struct InitPass {
    pub states: BTreeMap<String, SvdState>,
    /// Batches that contributed at least one row (`T`).
    pub batches_consumed: usize,
    /// Batches dropped because masking removed every row.
    pub batches_skipped: usize,
    pub stop: StopReason,
}

impl InitPass {
    pub fn converged_layers(&self) -> usize {
        self.states.values().filter(|s| s.converged).count()
    }
}

/// Batch-by-batch driver shared by the network path and raw activation
/// sources (dumps, CSV tables).
#[derive(Debug, Clone)]
pub struct StreamPass {
    cfg: StreamConfig,
    opts: UpdateOptions,
    states: BTreeMap<String, SvdState>,
    consumed: usize,
    skipped: usize,
    stop: Option<StopReason>,
}

impl StreamPass {
    /// `layers` pairs each tracked layer with its input dimension.
    pub fn new(layers: &[(String, usize)], cfg: &StreamConfig) -> Result<Self> {
        cfg.validate()?;
        if layers.is_empty() {
            return Err(Error::invalid("no layers to track"));
        }
        let tracked = cfg.tracked();
        let states = layers
            .iter()
            .map(|(name, dim)| (name.clone(), SvdState::new(name.clone(), *dim, tracked)))
            .collect();
        Ok(Self {
            opts: cfg.update_options(),
            cfg: cfg.clone(),
            states,
            consumed: 0,
            skipped: 0,
            stop: None,
        })
    }

    pub fn is_done(&self) -> bool {
        self.stop.is_some()
    }

    /// Layers still receiving updates.
    pub fn pending(&self) -> BTreeSet<String> {
        self.states
            .values()
            .filter(|s| !s.converged)
            .map(|s| s.layer.clone())
            .collect()
    }

    /// Consumes one batch of activations for the pending layers. Returns
    /// `false` when the batch was skipped because every row was masked.
    pub fn feed(&mut self, taps: &BTreeMap<String, Matrix>) -> Result<bool> {
        if self.is_done() {
            return Err(Error::InvalidState("pass already finished".into()));
        }
        let pending = self.pending();
        let mut inputs = Vec::with_capacity(pending.len());
        for name in &pending {
            let x = taps
                .get(name)
                .ok_or_else(|| Error::invalid(format!("no activations for layer `{name}`")))?;
            inputs.push((name, x));
        }
        if inputs.iter().any(|(_, x)| x.rows() == 0) {
            self.skipped += 1;
            return Ok(false);
        }

        let (cfg, opts) = (&self.cfg, &self.opts);
        let updated: Vec<SvdState> = inputs
            .par_iter()
            .map(|(name, x)| {
                let mut next = self.states[*name].update(x, opts)?;
                if next.updates >= 2 {
                    next.converged = check_convergence(&next, cfg.tau, cfg.scope, cfg.rank)?;
                }
                Ok(next)
            })
            .collect::<Result<_>>()?;
        for state in updated {
            self.states.insert(state.layer.clone(), state);
        }
        self.consumed += 1;

        let converged = self.states.values().filter(|s| s.converged).count();
        let total = self.states.len();
        if converged == total {
            self.stop = Some(StopReason::AllConverged);
        } else if converged as f64 >= self.cfg.delta * total as f64 {
            self.stop = Some(StopReason::DeltaReached);
        } else if self.consumed >= self.cfg.max_batches {
            self.stop = Some(StopReason::MaxBatches);
        }
        Ok(true)
    }

    pub fn finish(self) -> Result<InitPass> {
        if self.consumed == 0 {
            return Err(Error::InvalidState(
                "stream ended before any activations were consumed".into(),
            ));
        }
        Ok(InitPass {
            states: self.states,
            batches_consumed: self.consumed,
            batches_skipped: self.skipped,
            stop: self.stop.unwrap_or(StopReason::StreamExhausted),
        })
    }
}

/// Streams batches through `net`, updating the SVD summary of every tracked
/// layer's input until the stopping rule fires.
pub fn run_initialization_pass<I>(net: &ToyNetwork, data: I, cfg: &StreamConfig) -> Result<InitPass>
where
    I: IntoIterator<Item = Batch>,
{
    let names = match &cfg.layers {
        Some(list) => list.clone(),
        None => net.layer_names(),
    };
    let mut layers = Vec::with_capacity(names.len());
    for name in names {
        let layer = net.layer(&name).ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        layers.push((name, layer.in_features()));
    }
    let mut pass = StreamPass::new(&layers, cfg)?;
    for batch in data {
        let tapped = forward_with_taps(net, &batch, &pass.pending())?;
        pass.feed(&tapped.taps)?;
        if pass.is_done() {
            break;
        }
    }
    pass.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use crate::net::{Activation, Block, LinearLayer};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn tracked_component_count() {
        assert_eq!(tracked_components(16, 1.0), 16);
        assert_eq!(tracked_components(2, 1.5), 3);
        assert_eq!(tracked_components(10, 1.1), 11);
        assert_eq!(tracked_components(3, 1.01), 4);
    }

    #[test]
    fn first_update_is_plain_svd() {
        let x = random(6, 4, 1);
        let s = svd_update(&SvdState::new("l", 4, 3), &x).unwrap();
        let direct = svd_truncated(&x, 3).unwrap();
        assert_eq!(s.v, direct.vt);
        assert_eq!(s.sigma, direct.sigma);
        assert_eq!(s.samples_seen, 6);
        assert_eq!(s.last_similarity, vec![0.0; 3]);
    }

    #[test]
    fn zero_batch_changes_nothing() {
        let s1 = svd_update(&SvdState::new("l", 5, 2), &random(4, 5, 2)).unwrap();
        let s2 = svd_update(&s1, &Matrix::zeros(3, 5)).unwrap();
        for (a, b) in s1.sigma.iter().zip(&s2.sigma) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(s2.last_similarity.iter().all(|&c| c > 1.0 - 1e-12));
        assert_eq!(s2.samples_seen, 7);
    }

    #[test]
    fn two_updates_match_concatenation() {
        let x1 = random(3, 6, 3);
        let x2 = random(2, 6, 4);
        let s = svd_update(&svd_update(&SvdState::new("l", 6, 5), &x1).unwrap(), &x2).unwrap();
        let oracle = svd_truncated(&x1.vstack(&x2).unwrap(), 5).unwrap();
        for (a, b) in s.sigma.iter().zip(&oracle.sigma) {
            assert!((a - b).abs() < 1e-8 * oracle.sigma[0]);
        }
        assert!(max_principal_angle(&s.v, &oracle.vt).unwrap() < 1e-6);
    }

    #[test]
    fn update_errors() {
        let s = SvdState::new("l", 3, 2);
        assert!(svd_update(&s, &Matrix::zeros(2, 4)).is_err());
        assert!(svd_update(&s, &Matrix::zeros(0, 3)).is_err());
        let mut done = svd_update(&s, &random(3, 3, 0)).unwrap();
        assert!(matches!(
            check_convergence(&done, 0.99, ConvergenceScope::AllTracked, 2),
            Err(Error::InvalidState(_))
        ));
        done.converged = true;
        assert!(svd_update(&done, &random(3, 3, 1)).is_err());
    }

    #[test]
    fn convergence_threshold() {
        let mut s = SvdState::new("l", 4, 3);
        s.updates = 2;
        s.last_similarity = vec![1.0, 1.0, 1.0];
        assert!(check_convergence(&s, 0.99, ConvergenceScope::AllTracked, 3).unwrap());
        s.tracked = 2;
        s.last_similarity = vec![1.0, 0.98];
        assert!(!check_convergence(&s, 0.99, ConvergenceScope::AllTracked, 2).unwrap());
        assert!(check_convergence(&s, 0.99, ConvergenceScope::LeadingRank, 1).unwrap());
    }

    #[test]
    fn stationary_rank_one_stream_converges_after_two_updates() {
        let x = Matrix::from_fn(5, 4, |i, j| (i as f64 + 1.0) * [1.0, -2.0, 0.5, 3.0][j]);
        let s1 = svd_update(&SvdState::new("l", 4, 1), &x).unwrap();
        let s2 = svd_update(&s1, &x).unwrap();
        assert!(check_convergence(&s2, 0.99, ConvergenceScope::AllTracked, 1).unwrap());
    }

    #[test]
    fn mass_never_decreases() {
        let mut s = SvdState::new("l", 6, 3);
        let mut prev = 0.0;
        for i in 0..8 {
            s = svd_update(&s, &random(4, 6, 10 + i)).unwrap();
            let mass: f64 = s.sigma.iter().map(|v| v * v).sum();
            assert!(mass >= prev - 1e-12);
            prev = mass;
        }
    }

    #[test]
    fn centered_updates_match_centered_concatenation() {
        let x1 = random(4, 3, 20).map(|v| v + 5.0);
        let x2 = random(5, 3, 21).map(|v| v + 5.0);
        let opts = UpdateOptions {
            center: true,
            ..Default::default()
        };
        let s = SvdState::new("l", 3, 3)
            .update(&x1, &opts)
            .unwrap()
            .update(&x2, &opts)
            .unwrap();
        let all = x1.vstack(&x2).unwrap();
        let n = all.rows() as f64;
        let mean: Vec<f64> = (0..3).map(|j| all.column(j).iter().sum::<f64>() / n).collect();
        let centered = Matrix::from_fn(all.rows(), 3, |i, j| all[(i, j)] - mean[j]);
        let oracle = svd_truncated(&centered, 3).unwrap();
        for (a, b) in s.sigma.iter().zip(&oracle.sigma) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn randomized_updates_track_the_exact_path_on_low_rank_data() {
        let basis = random(2, 12, 30);
        let opts = UpdateOptions {
            randomized: Some((2, 7)),
            center: false,
        };
        let mut exact = SvdState::new("l", 12, 2);
        let mut approx = exact.clone();
        for i in 0..4 {
            let x = random(6, 2, 40 + i).matmul(&basis).unwrap();
            exact = svd_update(&exact, &x).unwrap();
            approx = approx.update(&x, &opts).unwrap();
        }
        for (a, b) in approx.sigma.iter().zip(&exact.sigma) {
            assert!((a - b).abs() < 1e-6 * b);
        }
    }

    fn rank_one_net() -> ToyNetwork {
        ToyNetwork::new(vec![Block::dense(
            LinearLayer::new("w", Matrix::identity(3), None).unwrap(),
            Activation::Identity,
        )])
        .unwrap()
    }

    fn rank_one_batch() -> Batch {
        let x = Matrix::from_fn(4, 3, |i, j| (i + 1) as f64 * [1.0, 2.0, -1.0][j]);
        Batch::new(x, Matrix::zeros(4, 3), None).unwrap()
    }

    #[test]
    fn pass_converges_on_stationary_stream() {
        let cfg = StreamConfig {
            rank: 1,
            ..Default::default()
        };
        let pass =
            run_initialization_pass(&rank_one_net(), std::iter::repeat(rank_one_batch()), &cfg)
                .unwrap();
        assert_eq!(pass.batches_consumed, 2);
        assert_eq!(pass.stop, StopReason::AllConverged);
        assert!(pass.states["w"].converged);
    }

    #[test]
    fn pass_respects_max_batches() {
        let cfg = StreamConfig {
            rank: 1,
            max_batches: 1,
            ..Default::default()
        };
        let pass =
            run_initialization_pass(&rank_one_net(), std::iter::repeat(rank_one_batch()), &cfg)
                .unwrap();
        assert_eq!(pass.batches_consumed, 1);
        assert_eq!(pass.stop, StopReason::MaxBatches);
        let state = &pass.states["w"];
        assert!(!state.converged);
        assert_eq!(state.v, svd_truncated(&rank_one_batch().inputs, 1).unwrap().vt);
    }

    #[test]
    fn masked_batches_are_skipped() {
        let cfg = StreamConfig {
            rank: 1,
            ..Default::default()
        };
        let mut masked = rank_one_batch();
        masked.mask = Some(vec![false; 4]);
        let stream = vec![masked.clone(), rank_one_batch(), masked, rank_one_batch()];
        let pass = run_initialization_pass(&rank_one_net(), stream, &cfg).unwrap();
        assert_eq!(pass.batches_consumed, 2);
        assert_eq!(pass.batches_skipped, 2);
        assert_eq!(pass.states["w"].samples_seen, 8);
    }

    #[test]
    fn pass_errors() {
        let cfg = StreamConfig {
            rank: 1,
            ..Default::default()
        };
        assert!(run_initialization_pass(&rank_one_net(), Vec::<Batch>::new(), &cfg).is_err());
        let none = StreamConfig {
            layers: Some(vec![]),
            ..cfg.clone()
        };
        assert!(run_initialization_pass(&rank_one_net(), vec![rank_one_batch()], &none).is_err());
        let bad = StreamConfig { rho: 0.5, ..cfg };
        assert!(run_initialization_pass(&rank_one_net(), vec![rank_one_batch()], &bad).is_err());
    }

    #[test]
    fn stream_exhaustion_is_reported() {
        let cfg = StreamConfig {
            rank: 2,
            tau: 1.0,
            ..Default::default()
        };
        let stream = (0..2).map(|i| Batch::new(random(4, 3, i), Matrix::zeros(4, 3), None).unwrap());
        let pass = run_initialization_pass(&rank_one_net(), stream, &cfg).unwrap();
        assert_eq!(pass.stop, StopReason::StreamExhausted);
    }
}
