//! On-disk formats: activation dumps, adapter checkpoints, experiment
//! configs and CSV tables. Integers are little-endian; floats are raw
//! IEEE-754 bits so every round-trip is exact.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::adapter::{AdapterSet, InitKind, LoraAdapter};
use crate::alloc::{Measure, RankAllocation};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::svdstream::SvdState;
use crate::train::{Optimizer, StepRecord};

pub const DUMP_MAGIC: &[u8; 4] = b"EVAD";
pub const DUMP_VERSION: u32 = 1;
pub const CHECKPOINT_MAGIC: &[u8; 4] = b"EVAC";
pub const CHECKPOINT_VERSION: u32 = 1;
/// Magic, version and payload length.
pub const CHECKPOINT_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: Vec<u8> },

    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Crc { stored: u32, computed: u32 },

    #[error("malformed file: {0}")]
    Malformed(String),
}

impl FormatError {
    /// Stable numeric code, also used across the C ABI.
    pub fn code(&self) -> i32 {
        match self {
            FormatError::BadMagic { .. } => 1,
            FormatError::VersionMismatch { .. } => 2,
            FormatError::Truncated { .. } => 3,
            FormatError::Crc { .. } => 4,
            FormatError::Malformed(_) => 5,
        }
    }
}

fn malformed(msg: impl Into<String>) -> FormatError {
    FormatError::Malformed(msg.into())
}

/// Writes through a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(FormatError::Truncated {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> std::result::Result<[u8; N], FormatError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u8(&mut self) -> std::result::Result<u8, FormatError> {
        Ok(self.array::<1>()?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> std::result::Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> std::result::Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn size(&mut self) -> std::result::Result<usize, FormatError> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| malformed(format!("size {v} does not fit in memory")))
    }

    fn name(&mut self) -> std::result::Result<String, FormatError> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| malformed("layer name is not UTF-8"))
    }

    fn floats(&mut self, n: usize) -> std::result::Result<Vec<f64>, FormatError> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| malformed("float count overflows"))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> std::result::Result<Matrix, FormatError> {
        let n = rows
            .checked_mul(cols)
            .ok_or_else(|| malformed("matrix size overflows"))?;
        let data = self.floats(n)?;
        Matrix::new(rows, cols, data).map_err(|e| malformed(e.to_string()))
    }

    fn magic(&mut self, expected: &[u8; 4]) -> std::result::Result<(), FormatError> {
        let found = &self.buf[..self.buf.len().min(4)];
        if found != expected {
            return Err(FormatError::BadMagic {
                expected: *expected,
                found: found.to_vec(),
            });
        }
        self.pos = 4;
        Ok(())
    }

    fn version(&mut self, expected: u32) -> std::result::Result<(), FormatError> {
        let found = self.u32()?;
        if found != expected {
            return Err(FormatError::VersionMismatch { expected, found });
        }
        Ok(())
    }

    fn finish(&self) -> std::result::Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(malformed(format!(
                "{} trailing bytes",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn put_name(out: &mut Vec<u8>, name: &str) -> Result<()> {
    let len = u16::try_from(name.len())
        .map_err(|_| Error::invalid(format!("layer name of {} bytes is too long", name.len())))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    Ok(())
}

fn put_floats(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Raw per-layer activations, in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationDump {
    pub layers: Vec<(String, Matrix)>,
}

impl ActivationDump {
    pub fn new(layers: Vec<(String, Matrix)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &layers {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate layer `{name}` in dump")));
            }
        }
        Ok(Self { layers })
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.layers.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(DUMP_MAGIC);
        out.extend_from_slice(&DUMP_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for (name, m) in &self.layers {
            put_name(&mut out, name)?;
            out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
            put_floats(&mut out, m.as_slice());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(DUMP_MAGIC)?;
        r.version(DUMP_VERSION)?;
        let count = r.u32()?;
        let mut layers = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let name = r.name()?;
            if !seen.insert(name.clone()) {
                return Err(malformed(format!("duplicate layer `{name}`")));
            }
            let rows = r.size()?;
            let cols = r.size()?;
            layers.push((name, r.matrix(rows, cols)?));
        }
        r.finish()?;
        Ok(Self { layers })
    }
}

pub fn write_dump(path: &Path, dump: &ActivationDump) -> Result<()> {
    write_atomic(path, &dump.to_bytes()?)
}

pub fn read_dump(path: &Path) -> Result<ActivationDump> {
    Ok(ActivationDump::from_bytes(&fs::read(path)?)?)
}

/// One layer's entry in a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointLayer {
    pub name: String,
    pub rank: usize,
    pub samples_seen: u64,
    pub converged: bool,
    pub in_features: usize,
    pub out_features: usize,
    /// Leading `rank` singular values.
    pub sigma: Vec<f64>,
    /// `rank × in_features`; empty when `rank == 0`.
    pub a: Matrix,
    /// `out_features × rank`; empty when `rank == 0`.
    pub b: Matrix,
}

/// Initialized (or trained) adapters plus the statistics they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaCheckpoint {
    pub alpha: f64,
    pub measure: Measure,
    pub budget: usize,
    pub layers: Vec<CheckpointLayer>,
}

impl EvaCheckpoint {
    /// Packs an allocation with its adapters. Layers without an adapter are
    /// stored with rank 0; `states` may be empty for data-free init modes.
    pub fn from_parts(
        allocation: &RankAllocation,
        states: &BTreeMap<String, SvdState>,
        adapters: &AdapterSet,
        host_shapes: &BTreeMap<String, (usize, usize)>,
        alpha: f64,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(allocation.ranks.len());
        for name in allocation.ranks.keys() {
            let &(out_features, in_features) = host_shapes
                .get(name)
                .ok_or_else(|| Error::UnknownLayer(name.clone()))?;
            let state = states.get(name);
            let (samples_seen, converged) =
                state.map_or((0, false), |s| (s.samples_seen as u64, s.converged));
            let layer = match adapters.get(name) {
                Some(ad) => {
                    if (ad.out_features(), ad.in_features()) != (out_features, in_features) {
                        return Err(Error::dims(format!("adapter `{name}` does not fit its host")));
                    }
                    let sigma = match state {
                        Some(s) if s.sigma.len() >= ad.rank => s.sigma[..ad.rank].to_vec(),
                        _ => vec![0.0; ad.rank],
                    };
                    CheckpointLayer {
                        name: name.clone(),
                        rank: ad.rank,
                        samples_seen,
                        converged,
                        in_features,
                        out_features,
                        sigma,
                        a: ad.a.clone(),
                        b: ad.b.clone(),
                    }
                }
                None => CheckpointLayer {
                    name: name.clone(),
                    rank: 0,
                    samples_seen,
                    converged,
                    in_features,
                    out_features,
                    sigma: Vec::new(),
                    a: Matrix::zeros(0, in_features),
                    b: Matrix::zeros(out_features, 0),
                },
            };
            layers.push(layer);
        }
        let ckpt = Self {
            alpha,
            measure: allocation.measure,
            budget: layers.iter().map(|l| l.rank).sum(),
            layers,
        };
        Ok(ckpt)
    }

    pub fn ranks(&self) -> BTreeMap<String, usize> {
        self.layers.iter().map(|l| (l.name.clone(), l.rank)).collect()
    }

    pub fn to_adapters(&self) -> Result<AdapterSet> {
        let mut set = AdapterSet::new();
        for l in self.layers.iter().filter(|l| l.rank > 0) {
            set.insert(
                l.name.clone(),
                LoraAdapter::new(l.name.clone(), l.a.clone(), l.b.clone(), self.alpha)?,
            );
        }
        Ok(set)
    }

    /// Same layers with `A`/`B` replaced by `adapters` (e.g. after training).
    pub fn with_adapters(&self, adapters: &AdapterSet) -> Result<Self> {
        let mut out = self.clone();
        for l in out.layers.iter_mut().filter(|l| l.rank > 0) {
            let ad = adapters
                .get(&l.name)
                .ok_or_else(|| Error::UnknownLayer(l.name.clone()))?;
            if ad.a.shape() != l.a.shape() || ad.b.shape() != l.b.shape() {
                return Err(Error::dims(format!("adapter `{}` changed shape", l.name)));
            }
            l.a = ad.a.clone();
            l.b = ad.b.clone();
        }
        Ok(out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut payload = Vec::new();
        payload.extend_from_slice(&self.alpha.to_le_bytes());
        payload.push(self.measure.tag());
        let budget = u32::try_from(self.budget).map_err(|_| Error::invalid("budget too large"))?;
        payload.extend_from_slice(&budget.to_le_bytes());
        payload.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for l in &self.layers {
            put_name(&mut payload, &l.name)?;
            let rank = u32::try_from(l.rank).map_err(|_| Error::invalid("rank too large"))?;
            payload.extend_from_slice(&rank.to_le_bytes());
            payload.extend_from_slice(&l.samples_seen.to_le_bytes());
            payload.push(l.converged as u8);
            payload.extend_from_slice(&(l.in_features as u64).to_le_bytes());
            payload.extend_from_slice(&(l.out_features as u64).to_le_bytes());
            if l.rank > 0 {
                if l.sigma.len() != l.rank
                    || l.a.shape() != (l.rank, l.in_features)
                    || l.b.shape() != (l.out_features, l.rank)
                {
                    return Err(Error::dims(format!("checkpoint layer `{}` is inconsistent", l.name)));
                }
                put_floats(&mut payload, &l.sigma);
                put_floats(&mut payload, l.a.as_slice());
                put_floats(&mut payload, l.b.as_slice());
            }
        }
        let mut out = Vec::with_capacity(CHECKPOINT_HEADER_LEN + payload.len() + 4);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(CHECKPOINT_MAGIC)?;
        r.version(CHECKPOINT_VERSION)?;
        let len = r.size()?;
        let payload = r.take(len)?;
        let stored = r.u32()?;
        r.finish()?;
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(FormatError::Crc { stored, computed });
        }

        let mut r = Reader::new(payload);
        let alpha = r.f64()?;
        let tag = r.u8()?;
        let measure =
            Measure::from_tag(tag).ok_or_else(|| malformed(format!("unknown measure tag {tag}")))?;
        let budget = r.u32()? as usize;
        let count = r.u32()?;
        let mut layers = Vec::new();
        let mut seen = BTreeSet::new();
        for _ in 0..count {
            let name = r.name()?;
            if !seen.insert(name.clone()) {
                return Err(malformed(format!("duplicate layer `{name}`")));
            }
            let rank = r.u32()? as usize;
            let samples_seen = r.u64()?;
            let converged = match r.u8()? {
                0 => false,
                1 => true,
                b => return Err(malformed(format!("converged flag {b}"))),
            };
            let in_features = r.size()?;
            let out_features = r.size()?;
            let (sigma, a, b) = if rank == 0 {
                (
                    Vec::new(),
                    Matrix::zeros(0, in_features),
                    Matrix::zeros(out_features, 0),
                )
            } else {
                (
                    r.floats(rank)?,
                    r.matrix(rank, in_features)?,
                    r.matrix(out_features, rank)?,
                )
            };
            layers.push(CheckpointLayer {
                name,
                rank,
                samples_seen,
                converged,
                in_features,
                out_features,
                sigma,
                a,
                b,
            });
        }
        r.finish()?;
        let total: usize = layers.iter().map(|l| l.rank).sum();
        if total != budget {
            return Err(malformed(format!(
                "ranks sum to {total} but the budget field says {budget}"
            )));
        }
        if !alpha.is_finite() {
            return Err(malformed("non-finite alpha"));
        }
        Ok(Self {
            alpha,
            measure,
            budget,
            layers,
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &EvaCheckpoint) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes()?)
}

pub fn read_checkpoint(path: &Path) -> Result<EvaCheckpoint> {
    Ok(EvaCheckpoint::from_bytes(&fs::read(path)?)?)
}

/// Parsed `key = value` experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub rank: usize,
    pub rho: f64,
    pub tau: f64,
    pub delta: f64,
    pub alpha: f64,
    pub mode: InitKind,
    pub seed: u64,
    pub steps: usize,
    /// Optimizer default when unset.
    pub lr: Option<f64>,
    pub optimizer: Optimizer,
    pub batch_size: usize,
    pub measure: Measure,
    pub whiten_exponent: f64,
    /// Fraction of rows hidden from the activation taps.
    pub mask: f64,
    pub max_batches: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rank: 16,
            rho: 1.0,
            tau: 0.99,
            delta: 1.0,
            alpha: 1.0,
            mode: InitKind::Eva,
            seed: 0,
            steps: 300,
            lr: None,
            optimizer: Optimizer::Sgd,
            batch_size: 16,
            measure: Measure::Eva,
            whiten_exponent: 0.5,
            mask: 0.0,
            max_batches: 100,
        }
    }
}

pub const CONFIG_KEYS: [&str; 15] = [
    "rank",
    "rho",
    "tau",
    "delta",
    "alpha",
    "mode",
    "seed",
    "steps",
    "lr",
    "optimizer",
    "batch_size",
    "measure",
    "whiten_exponent",
    "mask",
    "max_batches",
];

impl ExperimentConfig {
    pub fn lr(&self) -> f64 {
        self.lr.unwrap_or_else(|| self.optimizer.default_lr())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
        }
        match key {
            "rank" => self.rank = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "alpha" => self.alpha = num(key, value)?,
            "mode" => self.mode = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?,
            "seed" => self.seed = num(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "lr" => self.lr = Some(num(key, value)?),
            "optimizer" => {
                self.optimizer = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "batch_size" => self.batch_size = num(key, value)?,
            "measure" => {
                self.measure = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
            }
            "whiten_exponent" => self.whiten_exponent = num(key, value)?,
            "mask" => self.mask = num(key, value)?,
            "max_batches" => self.max_batches = num(key, value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
            cfg.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.rank == 0 {
            return bad("rank must be >= 1".into());
        }
        if !(self.rho >= 1.0) || !self.rho.is_finite() {
            return bad(format!("rho must be >= 1, got {}", self.rho));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must be in (0, 1], got {}", self.delta));
        }
        if !self.alpha.is_finite() || !self.whiten_exponent.is_finite() {
            return bad("alpha and whiten_exponent must be finite".into());
        }
        if !(0.0..1.0).contains(&self.mask) {
            return bad(format!("mask must be in [0, 1), got {}", self.mask));
        }
        if self.steps == 0 || self.batch_size == 0 || self.max_batches == 0 {
            return bad("steps, batch_size and max_batches must be >= 1".into());
        }
        if matches!(self.lr, Some(lr) if !(lr >= 0.0 && lr.is_finite())) {
            return bad("lr must be finite and >= 0".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rank = {}", self.rank);
        let _ = writeln!(s, "rho = {}", self.rho);
        let _ = writeln!(s, "tau = {}", self.tau);
        let _ = writeln!(s, "delta = {}", self.delta);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "steps = {}", self.steps);
        if let Some(lr) = self.lr {
            let _ = writeln!(s, "lr = {lr}");
        }
        let _ = writeln!(s, "optimizer = {}", self.optimizer);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "measure = {}", self.measure);
        let _ = writeln!(s, "whiten_exponent = {}", self.whiten_exponent);
        let _ = writeln!(s, "mask = {}", self.mask);
        let _ = writeln!(s, "max_batches = {}", self.max_batches);
        s
    }
}

/// Float formatting used by every CSV writer: 17 significant digits, enough
/// to recover the exact bits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn metrics_csv(records: &[StepRecord]) -> String {
    let mut s = String::from("step,loss,grad_norm\n");
    for r in records {
        let _ = writeln!(s, "{},{},{}", r.step, fmt_float(r.loss), fmt_float(r.grad_norm));
    }
    s
}

pub fn write_metrics(path: &Path, records: &[StepRecord]) -> Result<()> {
    write_atomic(path, metrics_csv(records).as_bytes())
}

pub fn parse_metrics(text: &str) -> Result<Vec<StepRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some("step,loss,grad_norm") {
        return Err(FormatError::Malformed("metrics header".into()).into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::from(malformed(format!("metrics row {}", i + 1)));
            let mut f = line.split(',');
            let step = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let loss = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let grad_norm = f.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            if f.next().is_some() {
                return Err(bad());
            }
            Ok(StepRecord {
                step,
                loss,
                grad_norm,
            })
        })
        .collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<StepRecord>> {
    parse_metrics(&fs::read_to_string(path)?)
}

pub fn allocation_csv(ranks: &BTreeMap<String, usize>) -> String {
    let mut s = String::from("layer,rank\n");
    for (layer, rank) in ranks {
        let _ = writeln!(s, "{layer},{rank}");
    }
    s
}

pub fn write_allocation(path: &Path, ranks: &BTreeMap<String, usize>) -> Result<()> {
    write_atomic(path, allocation_csv(ranks).as_bytes())
}

/// Numeric table with rows as samples. Blank lines are skipped.
pub fn parse_numeric_csv(text: &str, has_header: bool) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let skip = usize::from(has_header);
    for (i, line) in text.lines().enumerate().skip(skip) {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| {
                    Error::from(malformed(format!("line {}: `{}` is not a number", i + 1, v.trim())))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(malformed(format!(
                    "line {}: {} columns, expected {}",
                    i + 1,
                    row.len(),
                    first.len()
                ))
                .into());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(malformed("no data rows").into());
    }
    Matrix::from_rows(&rows).map_err(|e| malformed(e.to_string()).into())
}

pub fn read_numeric_csv(path: &Path, has_header: bool) -> Result<Matrix> {
    parse_numeric_csv(&fs::read_to_string(path)?, has_header)
}
