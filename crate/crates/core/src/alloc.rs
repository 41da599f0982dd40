//! Explained-variance scores and the global rank redistribution.
//!
//! Each layer offers `⌈r·ρ⌉` candidate components; all candidates are ranked
//! together by score and the top `N·r` are kept. A layer's rank is the number
//! of its candidates that survive.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::svdstream::{tracked_components, SvdState};

/// How singular values are turned into component scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Measure {
    /// `σ_j² / ((M−1)·‖σ‖₁)`
    #[default]
    Eva,
    /// `σ_j² / (M−1)`
    Raw,
    /// `σ_j² / σ_1²`
    Max,
}

impl Measure {
    pub fn tag(self) -> u8 {
        match self {
            Measure::Eva => 0,
            Measure::Raw => 1,
            Measure::Max => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Measure::Eva),
            1 => Some(Measure::Raw),
            2 => Some(Measure::Max),
            _ => None,
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Eva => "eva",
            Measure::Raw => "raw",
            Measure::Max => "max",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eva" => Ok(Measure::Eva),
            "raw" => Ok(Measure::Raw),
            "max" => Ok(Measure::Max),
            other => Err(Error::invalid(format!("unknown measure `{other}`"))),
        }
    }
}

/// Per-component explained-variance scores for one layer.
pub fn explained_variance_ratio(sigma: &[f64], m_samples: usize, measure: Measure) -> Result<Vec<f64>> {
    if m_samples < 2 {
        return Err(Error::invalid(format!("need at least 2 samples, got {m_samples}")));
    }
    if sigma.is_empty() {
        return Err(Error::invalid("empty singular value vector"));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("singular values must be finite and non-negative"));
    }
    let l1: f64 = sigma.iter().sum();
    if l1 == 0.0 {
        return Err(Error::invalid("all singular values are zero"));
    }
    let dof = (m_samples - 1) as f64;
    let denom = match measure {
        Measure::Eva => dof * l1,
        Measure::Raw => dof,
        Measure::Max => {
            let top = sigma.iter().copied().fold(0.0, f64::max);
            top * top
        }
    };
    Ok(sigma.iter().map(|s| s * s / denom).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentScore {
    pub layer: String,
    pub component: usize,
    pub xi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankAllocation {
    pub ranks: BTreeMap<String, usize>,
    /// Requested total rank `N·r`.
    pub budget: usize,
    pub measure: Measure,
}

impl RankAllocation {
    /// Every layer gets `rank`.
    pub fn uniform<S: AsRef<str>>(layers: &[S], rank: usize, measure: Measure) -> Self {
        Self {
            ranks: layers.iter().map(|l| (l.as_ref().to_string(), rank)).collect(),
            budget: layers.len() * rank,
            measure,
        }
    }

    pub fn total(&self) -> usize {
        self.ranks.values().sum()
    }

    /// Budget left unallocated because too few components were tracked.
    pub fn shortfall(&self) -> usize {
        self.budget.saturating_sub(self.total())
    }

    /// Base rank `r` of a budget spread over every layer.
    pub fn base_rank(&self) -> usize {
        if self.ranks.is_empty() {
            0
        } else {
            self.budget / self.ranks.len()
        }
    }
}

/// Scores every tracked component of every layer.
///
/// A layer whose singular values are all zero (e.g. dead activations) scores
/// zero everywhere instead of failing the whole allocation.
pub fn score_components(
    states: &BTreeMap<String, SvdState>,
    measure: Measure,
) -> Result<BTreeMap<String, Vec<f64>>> {
    states
        .iter()
        .map(|(name, state)| {
            let scores = if !state.sigma.is_empty() && state.sigma.iter().all(|&s| s == 0.0) {
                vec![0.0; state.sigma.len()]
            } else {
                explained_variance_ratio(&state.sigma, state.samples_seen, measure)?
            };
            Ok((name.clone(), scores))
        })
        .collect()
}

/// Global top-`N·r` selection over per-layer score vectors.
///
/// Ties break by component index, then layer name, so equal scores are dealt
/// out round-robin and the result does not depend on the order in which
/// layers were enumerated.
pub fn redistribute_scores(
    scores: &BTreeMap<String, Vec<f64>>,
    rank: usize,
    rho: f64,
    measure: Measure,
) -> Result<RankAllocation> {
    if scores.is_empty() {
        return Err(Error::invalid("no layers to allocate"));
    }
    if rank == 0 {
        return Err(Error::invalid("rank must be >= 1"));
    }
    if !(rho >= 1.0) || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be >= 1, got {rho}")));
    }
    let budget = scores.len() * rank;
    let mut counts: BTreeMap<String, usize> = scores.keys().map(|k| (k.clone(), 0)).collect();
    for c in ranked_components(scores, rank, rho).iter().take(budget) {
        *counts.get_mut(&c.layer).expect("scored layer") += 1;
    }
    Ok(RankAllocation {
        ranks: counts,
        budget,
        measure,
    })
}

/// Every candidate component (the first `⌈r·ρ⌉` of each layer) in global
/// selection order.
pub fn ranked_components(
    scores: &BTreeMap<String, Vec<f64>>,
    rank: usize,
    rho: f64,
) -> Vec<ComponentScore> {
    let per_layer = tracked_components(rank, rho);
    // BTreeMap iteration is name-ordered, so the index is a stable key.
    let mut candidates: Vec<(f64, usize, usize, &str)> = scores
        .iter()
        .enumerate()
        .flat_map(|(li, (name, xi))| {
            xi.iter()
                .take(per_layer)
                .enumerate()
                .map(move |(j, &x)| (x, li, j, name.as_str()))
        })
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)).then(a.1.cmp(&b.1)));
    candidates
        .into_iter()
        .map(|(xi, _, component, layer)| ComponentScore {
            layer: layer.to_string(),
            component,
            xi,
        })
        .collect()
}

/// Allocates `N·r` ranks across the finalized layer states.
pub fn redistribute_ranks(
    states: &BTreeMap<String, SvdState>,
    rank: usize,
    rho: f64,
    measure: Measure,
) -> Result<RankAllocation> {
    redistribute_scores(&score_components(states, measure)?, rank, rho, measure)
}

/// Per-layer `b − a`.
pub fn allocation_delta(a: &RankAllocation, b: &RankAllocation) -> Result<BTreeMap<String, i64>> {
    if !a.ranks.keys().eq(b.ranks.keys()) {
        return Err(Error::invalid("allocations cover different layers"));
    }
    Ok(a.ranks
        .iter()
        .zip(b.ranks.values())
        .map(|((name, &ra), &rb)| (name.clone(), rb as i64 - ra as i64))
        .collect())
}

/// Σ|delta| over layers.
pub fn l1_delta(a: &RankAllocation, b: &RankAllocation) -> Result<u64> {
    Ok(allocation_delta(a, b)?.values().map(|d| d.unsigned_abs()).sum())
}
