//! Small differentiable networks built from named linear layers, with
//! activation taps for the SVD pass and hand-written backprop.
//!
//! Rows of an input matrix are observation vectors (tokens). Dense blocks act
//! on every row independently; an attention block groups consecutive rows into
//! fixed-length sequences and runs single-head softmax attention inside each.

mod teacher;

use std::collections::{BTreeMap, BTreeSet};

pub use teacher::{make_teacher_student, DataGen, TeacherStudentConfig};

use crate::adapter::{AdapterSet, LoraAdapter};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Gradients keyed by parameter identifier: `<layer>.weight`, `<layer>.bias`,
/// `<layer>.lora_a`, `<layer>.lora_b`.
pub type Gradients = BTreeMap<String, Matrix>;

pub fn weight_key(layer: &str) -> String {
    format!("{layer}.weight")
}

pub fn bias_key(layer: &str) -> String {
    format!("{layer}.bias")
}

pub fn lora_a_key(layer: &str) -> String {
    format!("{layer}.lora_a")
}

pub fn lora_b_key(layer: &str) -> String {
    format!("{layer}.lora_b")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Gelu,
    Tanh,
    Identity,
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Gelu => 0.5 * z * (1.0 + (GELU_C * (z + GELU_K * z * z * z)).tanh()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative at the pre-activation `z`.
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Gelu => {
                let t = (GELU_C * (z + GELU_K * z * z * z)).tanh();
                0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * z * z)
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Gelu => "gelu",
            Activation::Tanh => "tanh",
            Activation::Identity => "none",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "gelu" => Ok(Activation::Gelu),
            "tanh" => Ok(Activation::Tanh),
            "none" | "identity" => Ok(Activation::Identity),
            other => Err(Error::invalid(format!("unknown activation `{other}`"))),
        }
    }
}

/// `y = x·Wᵀ + bias`, with `W` of shape `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub name: String,
    pub w: Matrix,
    pub bias: Option<Vec<f64>>,
    pub frozen: bool,
}

impl LinearLayer {
    pub fn new(name: impl Into<String>, w: Matrix, bias: Option<Vec<f64>>) -> Result<Self> {
        let name = name.into();
        if w.is_empty() {
            return Err(Error::invalid(format!("layer `{name}` has an empty weight")));
        }
        if let Some(b) = &bias {
            if b.len() != w.rows() {
                return Err(Error::dims(format!(
                    "layer `{name}`: bias of length {} for {} outputs",
                    b.len(),
                    w.rows()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("bias of `{name}`")));
            }
        }
        Ok(Self {
            name,
            w,
            bias,
            frozen: false,
        })
    }

    pub fn in_features(&self) -> usize {
        self.w.cols()
    }

    pub fn out_features(&self) -> usize {
        self.w.rows()
    }
}

/// Single-head self-attention over fixed-length row groups. The four
/// projections are `d×d` linear layers named `<name>.q`, `.k`, `.v`, `.o`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    pub name: String,
    pub q: LinearLayer,
    pub k: LinearLayer,
    pub v: LinearLayer,
    pub o: LinearLayer,
    pub seq_len: usize,
}

impl AttentionBlock {
    pub fn new(
        name: impl Into<String>,
        [wq, wk, wv, wo]: [Matrix; 4],
        seq_len: usize,
    ) -> Result<Self> {
        let name = name.into();
        let d = wq.rows();
        for w in [&wq, &wk, &wv, &wo] {
            if w.shape() != (d, d) {
                return Err(Error::dims(format!(
                    "attention `{name}` projections must all be {d}x{d}"
                )));
            }
        }
        if seq_len == 0 {
            return Err(Error::invalid("attention sequence length must be >= 1"));
        }
        Ok(Self {
            q: LinearLayer::new(format!("{name}.q"), wq, None)?,
            k: LinearLayer::new(format!("{name}.k"), wk, None)?,
            v: LinearLayer::new(format!("{name}.v"), wv, None)?,
            o: LinearLayer::new(format!("{name}.o"), wo, None)?,
            name,
            seq_len,
        })
    }

    pub fn dim(&self) -> usize {
        self.q.w.rows()
    }

    fn layers(&self) -> [&LinearLayer; 4] {
        [&self.q, &self.k, &self.v, &self.o]
    }

    fn layers_mut(&mut self) -> [&mut LinearLayer; 4] {
        [&mut self.q, &mut self.k, &mut self.v, &mut self.o]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Dense {
        layer: LinearLayer,
        activation: Activation,
    },
    Attention(AttentionBlock),
}

impl Block {
    pub fn dense(layer: LinearLayer, activation: Activation) -> Self {
        Block::Dense { layer, activation }
    }

    fn in_dim(&self) -> usize {
        match self {
            Block::Dense { layer, .. } => layer.in_features(),
            Block::Attention(a) => a.dim(),
        }
    }

    fn out_dim(&self) -> usize {
        match self {
            Block::Dense { layer, .. } => layer.out_features(),
            Block::Attention(a) => a.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetwork {
    blocks: Vec<Block>,
    input_dim: usize,
    output_dim: usize,
}

impl ToyNetwork {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::invalid("network needs at least one block"))?;
        let input_dim = first.in_dim();
        let mut prev = input_dim;
        for (i, block) in blocks.iter().enumerate() {
            if block.in_dim() != prev {
                return Err(Error::dims(format!(
                    "block {i} expects {} inputs but receives {prev}",
                    block.in_dim()
                )));
            }
            prev = block.out_dim();
        }
        let net = Self {
            input_dim,
            output_dim: prev,
            blocks,
        };
        let mut seen = BTreeSet::new();
        for layer in net.linear_layers() {
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::invalid(format!("duplicate layer name `{}`", layer.name)));
            }
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    /// Every linear layer in forward order.
    pub fn linear_layers(&self) -> impl Iterator<Item = &LinearLayer> {
        self.blocks.iter().flat_map(|b| match b {
            Block::Dense { layer, .. } => vec![layer],
            Block::Attention(a) => a.layers().to_vec(),
        })
    }

    fn linear_layers_mut(&mut self) -> Vec<&mut LinearLayer> {
        self.blocks
            .iter_mut()
            .flat_map(|b| match b {
                Block::Dense { layer, .. } => vec![layer],
                Block::Attention(a) => a.layers_mut().into_iter().collect(),
            })
            .collect()
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.linear_layers().map(|l| l.name.clone()).collect()
    }

    pub fn layer(&self, name: &str) -> Option<&LinearLayer> {
        self.linear_layers().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut LinearLayer> {
        self.linear_layers_mut().into_iter().find(|l| l.name == name)
    }

    pub fn set_frozen(&mut self, frozen: bool) {
        for layer in self.linear_layers_mut() {
            layer.frozen = frozen;
        }
    }

    pub fn all_frozen(&self) -> bool {
        self.linear_layers().all(|l| l.frozen)
    }

    /// Plain forward pass.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        Ok(run_forward(self, None, x, None, None)?.output)
    }

    /// Forward pass with LoRA adapters attached to some layers.
    pub fn forward_adapted(&self, adapters: &AdapterSet, x: &Matrix) -> Result<Matrix> {
        check_adapters(self, adapters)?;
        Ok(run_forward(self, Some(adapters), x, None, None)?.output)
    }
}

/// One minibatch. `mask[i] == true` keeps row `i` in activation taps.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub mask: Option<Vec<bool>>,
}

impl Batch {
    pub fn new(inputs: Matrix, targets: Matrix, mask: Option<Vec<bool>>) -> Result<Self> {
        if inputs.rows() != targets.rows() {
            return Err(Error::dims(format!(
                "{} input rows vs {} target rows",
                inputs.rows(),
                targets.rows()
            )));
        }
        if let Some(m) = &mask {
            if m.len() != inputs.rows() {
                return Err(Error::dims(format!(
                    "mask of length {} for {} rows",
                    m.len(),
                    inputs.rows()
                )));
            }
        }
        Ok(Self {
            inputs,
            targets,
            mask,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kept_rows(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.len(), |m| m.iter().filter(|&&k| k).count())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Mean over every output element.
    Mse,
    /// Mean over rows; targets must be one-hot.
    CrossEntropy,
}

/// Result of [`forward_with_taps`].
#[derive(Debug, Clone)]
pub struct TapOutput {
    pub output: Matrix,
    /// Input rows seen by each tapped layer, masked rows removed.
    pub taps: BTreeMap<String, Matrix>,
    /// Set when masking left zero rows in the taps.
    pub empty_tap: bool,
}

/// Forward pass that records the inputs of the named layers.
pub fn forward_with_taps(
    net: &ToyNetwork,
    batch: &Batch,
    tap_layers: &BTreeSet<String>,
) -> Result<TapOutput> {
    for name in tap_layers {
        if net.layer(name).is_none() {
            return Err(Error::UnknownLayer(name.clone()));
        }
    }
    let fwd = run_forward(net, None, &batch.inputs, Some(tap_layers), None)?;
    let keep: Option<Vec<usize>> = batch.mask.as_ref().map(|m| {
        m.iter()
            .enumerate()
            .filter_map(|(i, &k)| k.then_some(i))
            .collect()
    });
    let taps: BTreeMap<String, Matrix> = fwd
        .taps
        .into_iter()
        .map(|(name, m)| {
            let m = match &keep {
                Some(rows) => m.select_rows(rows.iter().copied()),
                None => m,
            };
            (name, m)
        })
        .collect();
    let empty_tap = !tap_layers.is_empty() && taps.values().any(|m| m.rows() == 0);
    Ok(TapOutput {
        output: fwd.output,
        taps,
        empty_tap,
    })
}

/// Mean loss and its analytic gradients with respect to every non-frozen base
/// parameter and every adapter parameter.
pub fn backward(
    net: &ToyNetwork,
    adapters: Option<&AdapterSet>,
    batch: &Batch,
    loss: Loss,
) -> Result<(f64, Gradients)> {
    if let Some(set) = adapters {
        check_adapters(net, set)?;
    }
    if batch.targets.cols() != net.output_dim {
        return Err(Error::dims(format!(
            "targets have {} columns, network outputs {}",
            batch.targets.cols(),
            net.output_dim
        )));
    }
    let mut traces = Vec::with_capacity(net.blocks.len());
    let fwd = run_forward(net, adapters, &batch.inputs, None, Some(&mut traces))?;
    let (value, mut upstream) = loss_and_grad(&fwd.output, &batch.targets, loss)?;

    let mut grads = Gradients::new();
    for (block, trace) in net.blocks.iter().zip(&traces).rev() {
        upstream = match (block, trace) {
            (Block::Dense { layer, activation }, BlockTrace::Dense { lin, pre }) => {
                let dz = upstream.zip_with(pre, |g, z| g * activation.derivative(z))?;
                linear_backward(layer, adapter_for(adapters, layer), lin, &dz, &mut grads)?
            }
            (Block::Attention(att), BlockTrace::Attention(t)) => {
                attention_backward(att, adapters, t, &upstream, &mut grads)?
            }
            _ => unreachable!("trace recorded for a different block kind"),
        };
    }
    Ok((value, grads))
}

/// Scalar loss and `∂loss/∂output`.
pub fn loss_and_grad(output: &Matrix, targets: &Matrix, loss: Loss) -> Result<(f64, Matrix)> {
    if output.shape() != targets.shape() {
        return Err(Error::dims(format!(
            "output {:?} vs targets {:?}",
            output.shape(),
            targets.shape()
        )));
    }
    let (n, k) = output.shape();
    if n == 0 {
        return Err(Error::invalid("loss over an empty batch"));
    }
    let (value, grad) = match loss {
        Loss::Mse => {
            let diff = output.sub(targets)?;
            let count = (n * k) as f64;
            let value = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count;
            (value, diff.scaled(2.0 / count))
        }
        Loss::CrossEntropy => {
            let mut grad = Matrix::zeros(n, k);
            let mut total = 0.0;
            for i in 0..n {
                let t = targets.row(i);
                let class = one_hot_class(t)
                    .ok_or_else(|| Error::invalid(format!("target row {i} is not one-hot")))?;
                let y = output.row(i);
                let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + y.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                total += lse - y[class];
                for j in 0..k {
                    grad[(i, j)] = ((y[j] - lse).exp() - t[j]) / n as f64;
                }
            }
            (total / n as f64, grad)
        }
    };
    if !value.is_finite() || !grad.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {value}")));
    }
    Ok((value, grad))
}

fn one_hot_class(row: &[f64]) -> Option<usize> {
    let mut class = None;
    for (j, &v) in row.iter().enumerate() {
        if v == 1.0 {
            if class.is_some() {
                return None;
            }
            class = Some(j);
        } else if v != 0.0 {
            return None;
        }
    }
    class
}

pub(crate) fn check_adapters(net: &ToyNetwork, adapters: &AdapterSet) -> Result<()> {
    for (name, adapter) in adapters {
        let layer = net
            .layer(name)
            .ok_or_else(|| Error::UnknownLayer(name.clone()))?;
        adapter.check_host(&layer.w)?;
    }
    Ok(())
}

fn adapter_for<'a>(adapters: Option<&'a AdapterSet>, layer: &LinearLayer) -> Option<&'a LoraAdapter> {
    adapters.and_then(|set| set.get(&layer.name))
}

struct LinearTrace {
    input: Matrix,
    /// `input · Aᵀ` when an adapter is attached.
    projected: Option<Matrix>,
}

struct AttentionTrace {
    q_in: LinearTrace,
    k_in: LinearTrace,
    v_in: LinearTrace,
    o_in: LinearTrace,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    probs: Vec<Matrix>,
}

enum BlockTrace {
    Dense { lin: LinearTrace, pre: Matrix },
    Attention(Box<AttentionTrace>),
}

struct ForwardOutput {
    output: Matrix,
    taps: BTreeMap<String, Matrix>,
}

fn linear_forward(
    layer: &LinearLayer,
    adapter: Option<&LoraAdapter>,
    x: &Matrix,
) -> Result<(Matrix, Option<Matrix>)> {
    let mut y = x.matmul_t(&layer.w)?;
    if let Some(bias) = &layer.bias {
        for i in 0..y.rows() {
            y.row_mut(i).iter_mut().zip(bias).for_each(|(v, b)| *v += b);
        }
    }
    let projected = match adapter {
        Some(ad) => {
            let u = x.matmul_t(&ad.a)?;
            let delta = u.matmul_t(&ad.b)?;
            y.add_scaled_assign(&delta, ad.scaling)?;
            Some(u)
        }
        None => None,
    };
    Ok((y, projected))
}

fn tap(
    taps: &mut BTreeMap<String, Matrix>,
    wanted: Option<&BTreeSet<String>>,
    layer: &LinearLayer,
    x: &Matrix,
) {
    if wanted.is_some_and(|w| w.contains(&layer.name)) {
        taps.insert(layer.name.clone(), x.clone());
    }
}

fn run_forward(
    net: &ToyNetwork,
    adapters: Option<&AdapterSet>,
    x: &Matrix,
    wanted: Option<&BTreeSet<String>>,
    mut traces: Option<&mut Vec<BlockTrace>>,
) -> Result<ForwardOutput> {
    if x.cols() != net.input_dim {
        return Err(Error::dims(format!(
            "input has {} columns, network expects {}",
            x.cols(),
            net.input_dim
        )));
    }
    let mut taps = BTreeMap::new();
    let mut h = x.clone();
    for block in &net.blocks {
        match block {
            Block::Dense { layer, activation } => {
                tap(&mut taps, wanted, layer, &h);
                let (pre, projected) = linear_forward(layer, adapter_for(adapters, layer), &h)?;
                let out = pre.map(|z| activation.apply(z));
                if let Some(t) = traces.as_deref_mut() {
                    t.push(BlockTrace::Dense {
                        lin: LinearTrace {
                            input: h,
                            projected,
                        },
                        pre,
                    });
                }
                h = out;
            }
            Block::Attention(att) => {
                let (out, trace) = attention_forward(att, adapters, &h, &mut taps, wanted)?;
                if let Some(t) = traces.as_deref_mut() {
                    t.push(BlockTrace::Attention(Box::new(trace)));
                }
                h = out;
            }
        }
    }
    Ok(ForwardOutput { output: h, taps })
}

fn softmax_rows(scores: &mut Matrix) {
    for i in 0..scores.rows() {
        let row = scores.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
}

fn write_rows(dst: &mut Matrix, start: usize, src: &Matrix) {
    for i in 0..src.rows() {
        dst.row_mut(start + i).copy_from_slice(src.row(i));
    }
}

fn attention_forward(
    att: &AttentionBlock,
    adapters: Option<&AdapterSet>,
    s: &Matrix,
    taps: &mut BTreeMap<String, Matrix>,
    wanted: Option<&BTreeSet<String>>,
) -> Result<(Matrix, AttentionTrace)> {
    let n = s.rows();
    let len = att.seq_len;
    if !n.is_multiple_of(len) {
        return Err(Error::dims(format!(
            "attention `{}` needs a multiple of {len} rows, got {n}",
            att.name
        )));
    }
    for layer in [&att.q, &att.k, &att.v] {
        tap(taps, wanted, layer, s);
    }
    let (q, uq) = linear_forward(&att.q, adapter_for(adapters, &att.q), s)?;
    let (k, uk) = linear_forward(&att.k, adapter_for(adapters, &att.k), s)?;
    let (v, uv) = linear_forward(&att.v, adapter_for(adapters, &att.v), s)?;
    let scale = 1.0 / (att.dim() as f64).sqrt();

    let mut mixed = Matrix::zeros(n, att.dim());
    let mut probs = Vec::with_capacity(n / len);
    for start in (0..n).step_by(len) {
        let qg = q.row_range(start, start + len);
        let kg = k.row_range(start, start + len);
        let vg = v.row_range(start, start + len);
        let mut p = qg.matmul_t(&kg)?.scaled(scale);
        softmax_rows(&mut p);
        write_rows(&mut mixed, start, &p.matmul(&vg)?);
        probs.push(p);
    }

    tap(taps, wanted, &att.o, &mixed);
    let (out, uo) = linear_forward(&att.o, adapter_for(adapters, &att.o), &mixed)?;
    let trace = AttentionTrace {
        q_in: LinearTrace {
            input: s.clone(),
            projected: uq,
        },
        k_in: LinearTrace {
            input: s.clone(),
            projected: uk,
        },
        v_in: LinearTrace {
            input: s.clone(),
            projected: uv,
        },
        o_in: LinearTrace {
            input: mixed,
            projected: uo,
        },
        q,
        k,
        v,
        probs,
    };
    Ok((out, trace))
}

/// Accumulates parameter gradients for one linear layer and returns `∂/∂input`.
fn linear_backward(
    layer: &LinearLayer,
    adapter: Option<&LoraAdapter>,
    trace: &LinearTrace,
    dy: &Matrix,
    grads: &mut Gradients,
) -> Result<Matrix> {
    if !layer.frozen {
        grads.insert(weight_key(&layer.name), dy.t_matmul(&trace.input)?);
        if layer.bias.is_some() {
            let mut db = Matrix::zeros(1, dy.cols());
            for row in dy.row_iter() {
                db.row_mut(0).iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            grads.insert(bias_key(&layer.name), db);
        }
    }
    let mut dx = dy.matmul(&layer.w)?;
    if let Some(ad) = adapter {
        let u = trace
            .projected
            .as_ref()
            .expect("adapter projection recorded in forward");
        let s = ad.scaling;
        let g = dy.matmul(&ad.b)?;
        grads.insert(lora_b_key(&layer.name), dy.t_matmul(u)?.scaled(s));
        grads.insert(lora_a_key(&layer.name), g.t_matmul(&trace.input)?.scaled(s));
        dx.add_scaled_assign(&g.matmul(&ad.a)?, s)?;
    }
    Ok(dx)
}

fn attention_backward(
    att: &AttentionBlock,
    adapters: Option<&AdapterSet>,
    t: &AttentionTrace,
    upstream: &Matrix,
    grads: &mut Gradients,
) -> Result<Matrix> {
    let dmixed = linear_backward(&att.o, adapter_for(adapters, &att.o), &t.o_in, upstream, grads)?;
    let (n, d) = dmixed.shape();
    let len = att.seq_len;
    let scale = 1.0 / (d as f64).sqrt();
    let mut dq = Matrix::zeros(n, d);
    let mut dk = Matrix::zeros(n, d);
    let mut dv = Matrix::zeros(n, d);
    for (g, p) in t.probs.iter().enumerate() {
        let start = g * len;
        let dh = dmixed.row_range(start, start + len);
        let qg = t.q.row_range(start, start + len);
        let kg = t.k.row_range(start, start + len);
        let vg = t.v.row_range(start, start + len);
        let dp = dh.matmul_t(&vg)?;
        write_rows(&mut dv, start, &p.t_matmul(&dh)?);
        // softmax Jacobian, row by row
        let mut ds = Matrix::zeros(len, len);
        for i in 0..len {
            let inner: f64 = dp.row(i).iter().zip(p.row(i)).map(|(a, b)| a * b).sum();
            for j in 0..len {
                ds[(i, j)] = p[(i, j)] * (dp[(i, j)] - inner);
            }
        }
        write_rows(&mut dq, start, &ds.matmul(&kg)?.scaled(scale));
        write_rows(&mut dk, start, &ds.t_matmul(&qg)?.scaled(scale));
    }
    let mut ds_in = linear_backward(&att.q, adapter_for(adapters, &att.q), &t.q_in, &dq, grads)?;
    let dk_in = linear_backward(&att.k, adapter_for(adapters, &att.k), &t.k_in, &dk, grads)?;
    let dv_in = linear_backward(&att.v, adapter_for(adapters, &att.v), &t.v_in, &dv, grads)?;
    ds_in.add_scaled_assign(&dk_in, 1.0)?;
    ds_in.add_scaled_assign(&dv_in, 1.0)?;
    Ok(ds_in)
}
