//! LoRA adapters `h = W·x + (α/r)·B·A·x` and their initialization modes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alloc::RankAllocation;
use crate::error::{Error, Result};
use crate::linalg::{random_orthogonal, svd_truncated, Matrix};
use crate::net::ToyNetwork;
use crate::seed;
use crate::svdstream::SvdState;

/// Adapters keyed by host layer name.
pub type AdapterSet = BTreeMap<String, LoraAdapter>;

#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    pub layer: String,
    /// `r × d`
    pub a: Matrix,
    /// `k × r`
    pub b: Matrix,
    pub alpha: f64,
    pub rank: usize,
    /// `α / r`
    pub scaling: f64,
}

impl LoraAdapter {
    pub fn new(layer: impl Into<String>, a: Matrix, b: Matrix, alpha: f64) -> Result<Self> {
        let layer = layer.into();
        let rank = a.rows();
        if rank == 0 || a.cols() == 0 {
            return Err(Error::invalid(format!("adapter `{layer}` has rank 0")));
        }
        if b.cols() != rank || b.rows() == 0 {
            return Err(Error::dims(format!(
                "adapter `{layer}`: A is {}x{}, B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if !alpha.is_finite() {
            return Err(Error::NonFinite(format!("alpha of `{layer}`")));
        }
        Ok(Self {
            layer,
            scaling: alpha / rank as f64,
            a,
            b,
            alpha,
            rank,
        })
    }

    /// Adapter with the given `A` and `B = 0`.
    pub fn zero_init(layer: impl Into<String>, a: Matrix, out_features: usize, alpha: f64) -> Result<Self> {
        let rank = a.rows();
        Self::new(layer, a, Matrix::zeros(out_features, rank), alpha)
    }

    pub fn in_features(&self) -> usize {
        self.a.cols()
    }

    pub fn out_features(&self) -> usize {
        self.b.rows()
    }

    pub fn param_count(&self) -> usize {
        self.a.rows() * self.a.cols() + self.b.rows() * self.b.cols()
    }

    pub fn check_host(&self, w: &Matrix) -> Result<()> {
        if w.shape() != (self.out_features(), self.in_features()) {
            return Err(Error::dims(format!(
                "adapter `{}` expects a {}x{} host, got {}x{}",
                self.layer,
                self.out_features(),
                self.in_features(),
                w.rows(),
                w.cols()
            )));
        }
        Ok(())
    }

    /// `(α/r)·B·A`
    pub fn delta_weight(&self) -> Matrix {
        self.b
            .matmul(&self.a)
            .expect("validated adapter shapes")
            .scaled(self.scaling)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Eva,
    EvaWhiten,
    EvaPerm,
    EvaRot,
    LoraRedist,
    WeightSvd,
    Random,
}

impl InitKind {
    pub const ALL: [InitKind; 7] = [
        InitKind::Eva,
        InitKind::EvaWhiten,
        InitKind::EvaPerm,
        InitKind::EvaRot,
        InitKind::LoraRedist,
        InitKind::WeightSvd,
        InitKind::Random,
    ];

    /// Whether this mode consumes the activation SVD pass.
    pub fn needs_activation_svd(self) -> bool {
        !matches!(self, InitKind::WeightSvd | InitKind::Random)
    }
}

impl fmt::Display for InitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitKind::Eva => "eva",
            InitKind::EvaWhiten => "eva_whiten",
            InitKind::EvaPerm => "eva_perm",
            InitKind::EvaRot => "eva_rot",
            InitKind::LoraRedist => "lora_redist",
            InitKind::WeightSvd => "weight_svd",
            InitKind::Random => "random",
        })
    }
}

impl FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InitKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s.replace('-', "_"))
            .ok_or_else(|| Error::invalid(format!("unknown init mode `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitMode {
    pub kind: InitKind,
    pub seed: u64,
    /// Power applied to the inverse eigenvalues in `eva_whiten`.
    pub whiten_exponent: f64,
}

impl InitMode {
    pub fn new(kind: InitKind, seed: u64) -> Self {
        Self {
            kind,
            seed,
            whiten_exponent: 0.5,
        }
    }
}

/// Uniform `[-1/√d, 1/√d]` entries, the usual LoRA default for `A`.
fn uniform_a(rank: usize, dim: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (dim as f64).sqrt();
    Matrix::from_fn(rank, dim, |_, _| rng.gen_range(-bound..=bound))
}

fn leading_components(state: &SvdState, rank: usize) -> Result<Matrix> {
    if rank > state.v.rows() {
        return Err(Error::invalid(format!(
            "layer `{}` needs rank {rank} but tracks {} components",
            state.layer,
            state.v.rows()
        )));
    }
    Ok(state.v.row_range(0, rank))
}

/// Builds one adapter per layer with nonzero rank. `B` is zero in every mode.
///
/// `random` and `weight_svd` ignore the activation statistics and give every
/// allocated layer the base rank `budget / N`.
pub fn init_adapters(
    net: &ToyNetwork,
    states: &BTreeMap<String, SvdState>,
    allocation: &RankAllocation,
    mode: &InitMode,
    alpha: f64,
) -> Result<AdapterSet> {
    let uniform = !mode.kind.needs_activation_svd();
    let mut adapters = AdapterSet::new();
    for (name, &allocated) in &allocation.ranks {
        let rank = if uniform { allocation.base_rank() } else { allocated };
        if rank == 0 {
            continue;
        }
        let layer = net.layer(name).ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        let dim = layer.in_features();
        let layer_seed = seed::derive(mode.seed, name);
        let state = || {
            states
                .get(name)
                .ok_or_else(|| Error::invalid(format!("no SVD state for layer `{name}`")))
        };

        let a = match mode.kind {
            InitKind::Eva => leading_components(state()?, rank)?,
            InitKind::EvaWhiten => {
                let st = state()?;
                let dof = st.samples_seen.saturating_sub(1).max(1) as f64;
                let scales: Vec<f64> = st.sigma[..rank]
                    .iter()
                    .map(|s| (s * s / dof).powf(-mode.whiten_exponent))
                    .collect();
                if scales.iter().any(|s| !s.is_finite()) {
                    return Err(Error::Numeric(format!(
                        "cannot whiten `{name}`: zero eigenvalue among its top {rank} components"
                    )));
                }
                leading_components(st, rank)?.scale_rows(&scales)?
            }
            InitKind::EvaPerm => {
                let base = leading_components(state()?, rank)?;
                let mut order: Vec<usize> = (0..rank).collect();
                order.shuffle(&mut ChaCha8Rng::seed_from_u64(layer_seed));
                base.select_rows(order)
            }
            InitKind::EvaRot => {
                let q = random_orthogonal(dim, layer_seed)?;
                leading_components(state()?, rank)?.matmul(&q)?
            }
            InitKind::LoraRedist | InitKind::Random => uniform_a(rank, dim, layer_seed),
            InitKind::WeightSvd => {
                let max = layer.w.rows().min(dim);
                if rank > max {
                    return Err(Error::invalid(format!(
                        "rank {rank} exceeds the {max} singular vectors of `{name}`"
                    )));
                }
                svd_truncated(&layer.w, rank)?.vt
            }
        };
        adapters.insert(
            name.clone(),
            LoraAdapter::zero_init(name.clone(), a, layer.out_features(), alpha)?,
        );
    }
    Ok(adapters)
}

/// `W·x + (α/r)·B·(A·x)` for a single input vector.
pub fn adapter_forward(w: &Matrix, adapter: &LoraAdapter, x: &[f64]) -> Result<Vec<f64>> {
    adapter.check_host(w)?;
    let mut h = w.matvec(x)?;
    let ax = adapter.a.matvec(x)?;
    let bax = adapter.b.matvec(&ax)?;
    h.iter_mut()
        .zip(bax)
        .for_each(|(h, d)| *h += adapter.scaling * d);
    Ok(h)
}

/// `W + (α/r)·B·A`
pub fn merge(w: &Matrix, adapter: &LoraAdapter) -> Result<Matrix> {
    adapter.check_host(w)?;
    w.add(&adapter.delta_weight())
}

/// A copy of `net` with every adapter folded into its host weight.
pub fn merge_all(net: &ToyNetwork, adapters: &AdapterSet) -> Result<ToyNetwork> {
    let mut merged = net.clone();
    for (name, adapter) in adapters {
        let layer = merged
            .layer_mut(name)
            .ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        layer.w = merge(&layer.w, adapter)?;
    }
    Ok(merged)
}

/// Total adapter parameter count.
pub fn param_count(adapters: &AdapterSet) -> usize {
    adapters.values().map(LoraAdapter::param_count).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alloc::Measure;
    use crate::net::{Activation, Block, LinearLayer};
    use crate::svdstream::svd_update;

    fn setup() -> (ToyNetwork, BTreeMap<String, SvdState>) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w = Matrix::from_fn(3, 4, |_, _| rng.gen_range(-1.0..1.0));
        let net = ToyNetwork::new(vec![Block::dense(
            LinearLayer::new("l", w, None).unwrap(),
            Activation::Identity,
        )])
        .unwrap();
        let x = Matrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let state = svd_update(&SvdState::new("l", 4, 3), &x).unwrap();
        (net, BTreeMap::from([("l".to_string(), state)]))
    }

    fn alloc(rank: usize) -> RankAllocation {
        RankAllocation::uniform(&["l"], rank, Measure::Eva)
    }

    #[test]
    fn eva_rows_are_orthonormal_and_b_zero() {
        let (net, states) = setup();
        let set = init_adapters(&net, &states, &alloc(2), &InitMode::new(InitKind::Eva, 0), 1.0)
            .unwrap();
        let ad = &set["l"];
        assert!(ad.a.matmul_t(&ad.a).unwrap().max_abs_diff(&Matrix::identity(2)) < 1e-8);
        assert_eq!(ad.b, Matrix::zeros(3, 2));
        assert_eq!(ad.scaling, 0.5);
    }

    #[test]
    fn whitening_example() {
        let (net, mut states) = setup();
        let st = states.get_mut("l").unwrap();
        st.sigma = vec![2.0, 1.0, 0.5];
        st.samples_seen = 5;
        let set = init_adapters(
            &net,
            &states,
            &alloc(2),
            &InitMode::new(InitKind::EvaWhiten, 0),
            1.0,
        )
        .unwrap();
        let norms: Vec<f64> = set["l"].a.row_iter().map(crate::linalg::norm).collect();
        assert!((norms[0] - 1.0).abs() < 1e-12);
        assert!((norms[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_preserves_gram() {
        let (net, states) = setup();
        let set = init_adapters(&net, &states, &alloc(3), &InitMode::new(InitKind::EvaRot, 4), 1.0)
            .unwrap();
        let a = &set["l"].a;
        assert!(a.matmul_t(a).unwrap().max_abs_diff(&Matrix::identity(3)) < 1e-8);
    }

    #[test]
    fn zero_rank_layers_get_no_adapter() {
        let (net, states) = setup();
        let set = init_adapters(&net, &states, &alloc(0), &InitMode::new(InitKind::Eva, 0), 1.0)
            .unwrap();
        assert!(set.is_empty());
    }

    #[test]
    fn rank_beyond_tracked_is_an_error() {
        let (net, states) = setup();
        let err = init_adapters(&net, &states, &alloc(4), &InitMode::new(InitKind::Eva, 0), 1.0);
        assert!(err.is_err());
    }

    #[test]
    fn random_and_weight_svd_ignore_states() {
        let (net, _) = setup();
        let empty = BTreeMap::new();
        for kind in [InitKind::Random, InitKind::WeightSvd] {
            let set = init_adapters(&net, &empty, &alloc(2), &InitMode::new(kind, 1), 1.0).unwrap();
            assert_eq!(set["l"].rank, 2);
        }
        let ws = init_adapters(&net, &empty, &alloc(2), &InitMode::new(InitKind::WeightSvd, 0), 1.0)
            .unwrap();
        let w_svd = svd_truncated(&net.layer("l").unwrap().w, 2).unwrap();
        assert_eq!(ws["l"].a, w_svd.vt);
        let bound = 0.5;
        let rnd = init_adapters(&net, &empty, &alloc(2), &InitMode::new(InitKind::Random, 1), 1.0)
            .unwrap();
        assert!(rnd["l"].a.as_slice().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn forward_cases() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let zero = LoraAdapter::zero_init("l", Matrix::identity(2), 2, 1.0).unwrap();
        assert_eq!(adapter_forward(&w, &zero, &[1.0, -1.0]).unwrap(), vec![-1.0, -1.0]);

        let ident = LoraAdapter::new("l", Matrix::identity(2), Matrix::identity(2), 2.0).unwrap();
        assert_eq!(
            adapter_forward(&Matrix::zeros(2, 2), &ident, &[0.3, -0.7]).unwrap(),
            vec![0.3, -0.7]
        );

        // k=3, d=2, r=1 against the dense product
        let w = Matrix::from_rows(&[vec![1.0, 0.5], vec![-1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        let a = Matrix::from_rows(&[vec![0.2, -0.4]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![-3.0]]).unwrap();
        let ad = LoraAdapter::new("l", a.clone(), b.clone(), 3.0).unwrap();
        let x = [0.7, 1.1];
        let dense = w.add(&b.matmul(&a).unwrap().scaled(3.0)).unwrap().matvec(&x).unwrap();
        let h = adapter_forward(&w, &ad, &x).unwrap();
        for (p, q) in h.iter().zip(&dense) {
            assert!((p - q).abs() < 1e-14);
        }
        assert!(adapter_forward(&Matrix::zeros(2, 3), &ad, &x).is_err());
    }

    #[test]
    fn merge_cases() {
        let w = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let zero = LoraAdapter::zero_init("l", Matrix::identity(2), 2, 1.0).unwrap();
        assert_eq!(merge(&w, &zero).unwrap(), w);
        let no_alpha = LoraAdapter::new("l", Matrix::identity(2), Matrix::identity(2), 0.0).unwrap();
        assert_eq!(merge(&w, &no_alpha).unwrap(), w);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in InitKind::ALL {
            assert_eq!(kind.to_string().parse::<InitKind>().unwrap(), kind);
        }
        assert_eq!("eva-rot".parse::<InitKind>().unwrap(), InitKind::EvaRot);
        assert!("pissa".parse::<InitKind>().is_err());
    }
}
