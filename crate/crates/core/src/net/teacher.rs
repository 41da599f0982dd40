use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Activation, AttentionBlock, Batch, Block, LinearLayer, ToyNetwork};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, random_orthogonal, Matrix};
use crate::seed;

/// Synthetic fine-tuning task: a random teacher network defines the targets,
/// the student starts from the teacher's weights plus Gaussian noise, and the
/// inputs live near a low-dimensional latent subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherStudentConfig {
    pub input_dim: usize,
    pub width: usize,
    pub output_dim: usize,
    /// Number of dense hidden blocks before the output head.
    pub depth: usize,
    /// Insert one attention block after the first dense block.
    pub attention: bool,
    pub seq_len: usize,
    pub activation: Activation,
    pub latent_dim: usize,
    /// Scale ratio between consecutive latent directions.
    pub latent_decay: f64,
    pub input_noise: f64,
    /// Student weight noise, relative to the teacher's init scale.
    pub perturbation: f64,
    pub target_noise: f64,
    pub batch_size: usize,
    /// Probability that a row is masked out of the activation taps.
    pub mask_fraction: f64,
}

impl Default for TeacherStudentConfig {
    fn default() -> Self {
        Self {
            input_dim: 32,
            width: 32,
            output_dim: 8,
            depth: 2,
            attention: true,
            seq_len: 4,
            activation: Activation::Relu,
            latent_dim: 4,
            latent_decay: 0.15,
            input_noise: 0.01,
            perturbation: 0.3,
            target_noise: 0.1,
            batch_size: 16,
            mask_fraction: 0.0,
        }
    }
}

impl TeacherStudentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.input_dim == 0 || self.width == 0 || self.output_dim == 0 {
            return fail("dimensions must be positive");
        }
        if self.depth == 0 {
            return fail("depth must be >= 1");
        }
        if self.latent_dim == 0 || self.latent_dim >= self.input_dim {
            return fail("latent_dim must be in 1..input_dim");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1");
        }
        if self.attention && (self.seq_len == 0 || !self.batch_size.is_multiple_of(self.seq_len)) {
            return fail("batch_size must be a multiple of seq_len");
        }
        if !(self.latent_decay > 0.0 && self.latent_decay <= 1.0) {
            return fail("latent_decay must be in (0, 1]");
        }
        for (name, v) in [
            ("input_noise", self.input_noise),
            ("perturbation", self.perturbation),
            ("target_noise", self.target_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0")));
            }
        }
        if !(0.0..1.0).contains(&self.mask_fraction) {
            return fail("mask_fraction must be in [0, 1)");
        }
        Ok(())
    }

    /// Expected MSE of a student that matches the teacher exactly.
    pub fn noise_floor(&self) -> f64 {
        self.target_noise * self.target_noise
    }

    fn gain(&self) -> f64 {
        match self.activation {
            Activation::Relu => std::f64::consts::SQRT_2,
            _ => 1.0,
        }
    }
}

fn init_weight(out: usize, inp: usize, gain: f64, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian_matrix(out, inp, rng).scaled(gain / (inp as f64).sqrt())
}

fn build_teacher(cfg: &TeacherStudentConfig, rng: &mut ChaCha8Rng) -> Result<ToyNetwork> {
    let gain = cfg.gain();
    let mut blocks = vec![Block::dense(
        LinearLayer::new("fc0", init_weight(cfg.width, cfg.input_dim, gain, rng), None)?,
        cfg.activation,
    )];
    if cfg.attention {
        let d = cfg.width;
        let projections = [(); 4].map(|_| init_weight(d, d, 1.0, rng));
        blocks.push(Block::Attention(AttentionBlock::new(
            "attn",
            projections,
            cfg.seq_len,
        )?));
    }
    for i in 1..cfg.depth {
        blocks.push(Block::dense(
            LinearLayer::new(
                format!("fc{i}"),
                init_weight(cfg.width, cfg.width, gain, rng),
                None,
            )?,
            cfg.activation,
        ));
    }
    blocks.push(Block::dense(
        LinearLayer::new(
            "head",
            init_weight(cfg.output_dim, cfg.width, 1.0, rng),
            None,
        )?,
        Activation::Identity,
    ));
    let mut net = ToyNetwork::new(blocks)?;
    net.set_frozen(true);
    Ok(net)
}

fn perturb(teacher: &ToyNetwork, cfg: &TeacherStudentConfig, rng: &mut ChaCha8Rng) -> ToyNetwork {
    let mut student = teacher.clone();
    for name in teacher.layer_names() {
        let layer = student.layer_mut(&name).expect("layer from the same network");
        let noise = gaussian_matrix(layer.w.rows(), layer.w.cols(), rng)
            .scaled(cfg.perturbation * cfg.gain() / (layer.w.cols() as f64).sqrt());
        layer
            .w
            .add_scaled_assign(&noise, 1.0)
            .expect("noise has the weight's shape");
    }
    student
}

/// Orthonormal latent directions with geometrically decaying scales,
/// normalized so each input feature has unit variance on average.
fn mixing_matrix(cfg: &TeacherStudentConfig, seed: u64) -> Result<Matrix> {
    let q = random_orthogonal(cfg.input_dim, seed)?.row_range(0, cfg.latent_dim);
    let raw: Vec<f64> = (0..cfg.latent_dim).map(|k| cfg.latent_decay.powi(k as i32)).collect();
    let norm = (cfg.input_dim as f64 / raw.iter().map(|s| s * s).sum::<f64>()).sqrt();
    let scales: Vec<f64> = raw.iter().map(|s| s * norm).collect();
    q.scale_rows(&scales)
}

/// Builds the teacher, the perturbed student (both frozen) and the data
/// stream. Everything is a deterministic function of `(cfg, seed)`.
pub fn make_teacher_student(
    cfg: &TeacherStudentConfig,
    seed: u64,
) -> Result<(ToyNetwork, ToyNetwork, DataGen)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "teacher"));
    let teacher = build_teacher(cfg, &mut rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, "student"));
    let student = perturb(&teacher, cfg, &mut rng);
    let mixing = mixing_matrix(cfg, seed::derive(seed, "mixing"))?;
    let data = DataGen {
        teacher: teacher.clone(),
        mixing,
        cfg: cfg.clone(),
        seed,
        rng: ChaCha8Rng::seed_from_u64(seed::derive(seed, "data")),
    };
    Ok((teacher, student, data))
}

/// Infinite stream of teacher-labelled batches: `x = z·S·Q + ε`, `t = teacher(x) + η`.
#[derive(Debug, Clone)]
pub struct DataGen {
    teacher: ToyNetwork,
    mixing: Matrix,
    cfg: TeacherStudentConfig,
    seed: u64,
    rng: ChaCha8Rng,
}

impl DataGen {
    pub fn config(&self) -> &TeacherStudentConfig {
        &self.cfg
    }

    pub fn teacher(&self) -> &ToyNetwork {
        &self.teacher
    }

    pub fn noise_floor(&self) -> f64 {
        self.cfg.noise_floor()
    }

    /// An independent stream over the same task, named by `tag`.
    pub fn stream(&self, tag: &str) -> DataGen {
        DataGen {
            rng: ChaCha8Rng::seed_from_u64(seed::derive(self.seed, tag)),
            ..self.clone()
        }
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Result<DataGen> {
        self.cfg.batch_size = batch_size;
        self.cfg.validate()?;
        Ok(self)
    }

    pub fn with_mask_fraction(mut self, fraction: f64) -> Result<DataGen> {
        self.cfg.mask_fraction = fraction;
        self.cfg.validate()?;
        Ok(self)
    }

    pub fn next_batch(&mut self) -> Batch {
        let b = self.cfg.batch_size;
        let latent = gaussian_matrix(b, self.cfg.latent_dim, &mut self.rng);
        let mut inputs = latent.matmul(&self.mixing).expect("latent·mixing shapes");
        let noise = gaussian_matrix(b, self.cfg.input_dim, &mut self.rng);
        inputs
            .add_scaled_assign(&noise, self.cfg.input_noise)
            .expect("same shape");
        let mut targets = self.teacher.forward(&inputs).expect("teacher accepts inputs");
        for v in targets.as_mut_slice() {
            let eta: f64 = StandardNormal.sample(&mut self.rng);
            *v += self.cfg.target_noise * eta;
        }
        let mask = (self.cfg.mask_fraction > 0.0).then(|| {
            (0..b)
                .map(|_| !self.rng.gen_bool(self.cfg.mask_fraction))
                .collect()
        });
        Batch::new(inputs, targets, mask).expect("generated batch is consistent")
    }
}

impl Iterator for DataGen {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        Some(self.next_batch())
    }
}
