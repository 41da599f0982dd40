//! Acceptance checks. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use eva_core::adapter::{adapter_forward, merge, merge_all, InitKind};
use eva_core::alloc::{explained_variance_ratio, l1_delta, redistribute_ranks, Measure, RankAllocation};
use eva_core::io::{self, ActivationDump, EvaCheckpoint, ExperimentConfig, FormatError};
use eva_core::linalg::{component_cosine_similarity, max_principal_angle, svd_truncated, Matrix};
use eva_core::net::{forward_with_taps, make_teacher_student, Activation, Batch, Loss, TeacherStudentConfig};
use eva_core::pipeline::Experiment;
use eva_core::svdstream::{run_initialization_pass, svd_update, StreamConfig, SvdState};
use eva_core::train::{compare_inits, gradient_check};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    use rand_distr::{Distribution, StandardNormal};
    Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Workload for the mechanism checks: 4-dimensional latent inputs, rank-4
/// adapters.
fn mechanism_experiment() -> Experiment {
    let cfg = ExperimentConfig {
        rank: 4,
        steps: 500,
        lr: Some(0.05),
        ..Default::default()
    };
    Experiment::from_config(&cfg).unwrap()
}

fn c1_uniform_at_rho_one() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for (seed, rank) in [(0u64, 1usize), (1, 2), (2, 4), (3, 8), (4, 16)] {
        let cfg = StreamConfig {
            rank,
            rho: 1.0,
            max_batches: 10,
            ..Default::default()
        };
        let (_, student, data) = make_teacher_student(&TeacherStudentConfig::default(), seed).map_err(e2s)?;
        let pass = run_initialization_pass(&student, data, &cfg).map_err(e2s)?;
        for measure in [Measure::Eva, Measure::Raw, Measure::Max] {
            let alloc = redistribute_ranks(&pass.states, rank, 1.0, measure).map_err(e2s)?;
            ensure(alloc.ranks.values().all(|&r| r == rank), || {
                format!("seed {seed}, r={rank}, {measure}: {:?}", alloc.ranks)
            })?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} allocations uniform, {elapsed:.2?}"))
}

fn c2_budget_conservation() -> Outcome {
    let workload = TeacherStudentConfig {
        depth: 5,
        attention: false,
        ..Default::default()
    };
    let (_, student, data) = make_teacher_student(&workload, 11).map_err(e2s)?;
    let n = student.layer_names().len();
    ensure(n == 6, || format!("expected 6 layers, got {n}"))?;
    let rank = 4;
    let mut totals = Vec::new();
    for rho in [1.0, 1.5, 2.0, 3.0] {
        let cfg = StreamConfig {
            rank,
            rho,
            max_batches: 30,
            ..Default::default()
        };
        let pass = run_initialization_pass(&student, data.stream("init"), &cfg).map_err(e2s)?;
        let alloc = redistribute_ranks(&pass.states, rank, rho, Measure::Eva).map_err(e2s)?;
        ensure(alloc.total() == n * rank, || format!("rho {rho}: {:?}", alloc.ranks))?;
        totals.push(alloc.total());
    }
    Ok(format!("sum = {} for rho in {{1, 1.5, 2, 3}}", totals[0]))
}

fn c3_score_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.gen_range(1..=20);
        let m = rng.gen_range(2..=10_000usize);
        let mut sigma: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..50.0)).collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        for (measure, tag) in [(Measure::Eva, 0), (Measure::Raw, 1), (Measure::Max, 2)] {
            let got = explained_variance_ratio(&sigma, m, measure).map_err(e2s)?;
            for (j, &s) in sigma.iter().enumerate() {
                let mut l1 = 0.0;
                for &v in &sigma {
                    l1 += v.abs();
                }
                let expect = match tag {
                    0 => s.powi(2) / ((m as f64 - 1.0) * l1),
                    1 => s.powi(2) / (m as f64 - 1.0),
                    _ => (s / sigma[0]).powi(2),
                };
                let rel = (got[j] - expect).abs() / expect.abs().max(f64::MIN_POSITIVE);
                worst = worst.max(if expect == 0.0 { got[j].abs() } else { rel });
            }
        }
    }
    ensure(worst <= 1e-12, || format!("max relative error {worst:e}"))?;
    Ok(format!("300 score vectors, max relative error {worst:.1e}"))
}

fn c4_incremental_equals_batch() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_sigma, mut worst_angle) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let d = rng.gen_range(6..=24);
        let m = rng.gen_range(3..=d.min(10));
        let true_rank = rng.gen_range(1..=m);
        let basis = gaussian(true_rank, d, &mut rng);
        let batches: Vec<Matrix> = (0..rng.gen_range(2..=8))
            .map(|_| {
                let rows = rng.gen_range(1..=12);
                gaussian(rows, true_rank, &mut rng).matmul(&basis).unwrap()
            })
            .collect();
        let mut state = SvdState::new("s", d, m);
        let mut all = Matrix::zeros(0, d);
        for b in &batches {
            state = svd_update(&state, b).map_err(e2s)?;
            all = all.vstack(b).unwrap();
        }
        let k = true_rank.min(all.rows());
        let oneshot = svd_truncated(&all, k).map_err(e2s)?;
        for j in 0..k {
            let rel = (state.sigma[j] - oneshot.sigma[j]).abs() / oneshot.sigma[j];
            worst_sigma = worst_sigma.max(rel);
        }
        let angle = max_principal_angle(&state.v.row_range(0, k), &oneshot.vt).map_err(e2s)?;
        worst_angle = worst_angle.max(angle);
    }
    let elapsed = start.elapsed();
    ensure(worst_sigma <= 1e-8, || format!("sigma rel error {worst_sigma:e}"))?;
    ensure(worst_angle < 1e-6, || format!("principal angle {worst_angle:e} rad"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "20 streams, sigma rel err {worst_sigma:.1e}, max angle {worst_angle:.1e} rad, {elapsed:.2?}"
    ))
}

/// Top-half components per layer from a pass over the given input batches.
fn pass_components(
    net: &eva_core::ToyNetwork,
    batches: &[Batch],
    cfg: &StreamConfig,
) -> Result<BTreeMap<String, Matrix>, String> {
    let pass = run_initialization_pass(net, batches.iter().cloned(), cfg).map_err(e2s)?;
    let half = cfg.rank / 2;
    Ok(pass
        .states
        .into_iter()
        .map(|(name, s)| (name, s.v.row_range(0, half)))
        .collect())
}

fn pairwise_min_cos(runs: &[BTreeMap<String, Matrix>]) -> Result<(f64, String), String> {
    let mut worst = (f64::INFINITY, String::new());
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            for (layer, a) in &runs[i] {
                let cos = component_cosine_similarity(a, &runs[j][layer]).map_err(e2s)?;
                for c in cos {
                    if c < worst.0 {
                        worst = (c, layer.clone());
                    }
                }
            }
        }
    }
    Ok(worst)
}

fn low_rank_inputs() -> (eva_core::ToyNetwork, StreamConfig) {
    let (_, student, _) = make_teacher_student(&TeacherStudentConfig::default(), 5).unwrap();
    let cfg = StreamConfig {
        rank: 4,
        max_batches: 200,
        layers: Some(vec!["fc0".into()]),
        ..Default::default()
    };
    (student, cfg)
}

fn c5_batch_order_invariance() -> Outcome {
    let (net, cfg) = low_rank_inputs();
    let (_, _, data) = make_teacher_student(&TeacherStudentConfig::default(), 5).map_err(e2s)?;
    let pool: Vec<Batch> = data.stream("pool").take(200).collect();
    let mut runs = Vec::new();
    for rep in 0..10u64 {
        let mut order = pool.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(rep));
        runs.push(pass_components(&net, &order, &cfg)?);
    }
    let (worst, layer) = pairwise_min_cos(&runs)?;
    ensure(worst >= 0.99, || format!("min |cos| {worst:.5} on {layer}"))?;
    Ok(format!("10 orderings, min pairwise |cos| {worst:.6}"))
}

fn c6_batch_size_invariance() -> Outcome {
    let (net, cfg) = low_rank_inputs();
    let (_, _, data) = make_teacher_student(&TeacherStudentConfig::default(), 5).map_err(e2s)?;
    let big: Vec<Batch> = data.stream("pool").with_batch_size(32).map_err(e2s)?.take(100).collect();
    let mut runs = Vec::new();
    for size in [4usize, 8, 16, 32] {
        let batches: Vec<Batch> = big
            .iter()
            .flat_map(|b| {
                (0..32 / size).map(move |k| {
                    Batch::new(
                        b.inputs.row_range(k * size, (k + 1) * size),
                        b.targets.row_range(k * size, (k + 1) * size),
                        None,
                    )
                    .unwrap()
                })
            })
            .collect();
        runs.push(pass_components(&net, &batches, &cfg)?);
    }
    let (worst, layer) = pairwise_min_cos(&runs)?;
    ensure(worst >= 0.99, || format!("min |cos| {worst:.5} on {layer}"))?;
    Ok(format!("batch sizes 4/8/16/32, min pairwise |cos| {worst:.6}"))
}

fn c7_rho_sweep_converges() -> Outcome {
    let mut details = Vec::new();
    for (label, exp) in [("default r=16", Experiment::default()), ("r=4", mechanism_experiment())] {
        let alloc = |rho: f64| -> Result<RankAllocation, String> {
            let mut e = exp.clone();
            e.stream.rho = rho;
            Ok(e.prepare(InitKind::Eva, 0).map_err(e2s)?.allocation)
        };
        let d = l1_delta(&alloc(2.5)?, &alloc(3.0)?).map_err(e2s)?;
        ensure(d <= 2, || format!("{label}: l1 delta {d}"))?;
        details.push(format!("{label}: {d}"));
    }
    Ok(format!("l1 delta rho 2.5 -> 3: {}", details.join(", ")))
}

fn c8_gradient_check() -> Outcome {
    let start = Instant::now();
    let mut exp = mechanism_experiment();
    exp.stream.rank = 2;
    exp.stream.max_batches = 20;
    exp.workload.activation = Activation::Gelu;
    let mut worst = 0.0f64;
    let mut runs = 0;
    for seed in 0..5u64 {
        for kind in InitKind::ALL {
            let p = exp.prepare(kind, seed).map_err(e2s)?;
            let batch = p.data.stream("check").next().unwrap();
            // at init B = 0; also probe a point where both factors are live
            let mut live = p.adapters.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for ad in live.values_mut() {
                ad.b = gaussian(ad.b.rows(), ad.b.cols(), &mut rng).scaled(0.3);
            }
            for set in [&p.adapters, &live] {
                let err = gradient_check(&p.net, set, &batch, 1e-5, Loss::Mse).map_err(e2s)?;
                ensure(err < 1e-4, || format!("{kind} seed {seed}: rel error {err:e}"))?;
                worst = worst.max(err);
            }
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("{runs} (mode, seed) pairs, max rel error {worst:.1e}, {elapsed:.2?}"))
}

fn c9_zero_init_equivalence() -> Outcome {
    let exp = mechanism_experiment();
    for seed in 0..3u64 {
        for kind in InitKind::ALL {
            let mut p = exp.prepare(kind, seed).map_err(e2s)?;
            let x = p.data.next().unwrap().inputs;
            let base = p.net.forward(&x).map_err(e2s)?;
            let adapted = p.net.forward_adapted(&p.adapters, &x).map_err(e2s)?;
            let same = base
                .as_slice()
                .iter()
                .zip(adapted.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits());
            ensure(same, || format!("{kind} seed {seed}: outputs differ"))?;
        }
    }
    Ok("7 modes x 3 seeds bit-identical".into())
}

fn c10_merge_equivalence() -> Outcome {
    let mut exp = mechanism_experiment();
    exp.train.steps = 50;
    let (p, _) = exp.run(InitKind::Eva, 2).map_err(e2s)?;
    ensure(p.adapters.values().any(|a| a.b.max_abs() > 0.0), || "training left B at zero".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0f64;
    for (name, ad) in &p.adapters {
        let w = &p.net.layer(name).unwrap().w;
        let merged = merge(w, ad).map_err(e2s)?;
        for _ in 0..100 {
            let x: Vec<f64> = (0..w.cols()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let a = adapter_forward(w, ad, &x).map_err(e2s)?;
            let b = merged.matvec(&x).map_err(e2s)?;
            for (u, v) in a.iter().zip(&b) {
                worst = worst.max((u - v).abs());
            }
        }
    }
    let whole = merge_all(&p.net, &p.adapters).map_err(e2s)?;
    let x = gaussian(16, p.net.input_dim(), &mut rng);
    let net_err = whole
        .forward(&x)
        .map_err(e2s)?
        .max_abs_diff(&p.net.forward_adapted(&p.adapters, &x).map_err(e2s)?);
    ensure(worst <= 1e-10, || format!("layer error {worst:e}"))?;
    ensure(net_err <= 1e-10, || format!("network error {net_err:e}"))?;
    Ok(format!(
        "{} layers x 100 inputs, max error {worst:.1e}; whole network {net_err:.1e}",
        p.adapters.len()
    ))
}

fn c11_gradient_signal_and_speed() -> Outcome {
    let start = Instant::now();
    let exp = mechanism_experiment();
    let seeds = [0u64, 1, 2, 3, 4];
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let report = compare_inits(&[InitKind::Eva, InitKind::Random], &seeds, &exp, threads).map_err(e2s)?;
    let (eva, random) = (&report.modes[0], &report.modes[1]);
    ensure(!eva.partial && !random.partial, || "some runs failed".into())?;
    ensure(eva.mean_grad_norm_step1 > random.mean_grad_norm_step1, || {
        format!(
            "step-1 grad norm eva {:.4} <= random {:.4}",
            eva.mean_grad_norm_step1, random.mean_grad_norm_step1
        )
    })?;
    let steps = |r: &eva_core::train::ModeRun| r.result.as_ref().unwrap().steps_to_threshold;
    let mut wins = 0;
    let mut pairs = Vec::new();
    for (e, r) in eva.runs.iter().zip(&random.runs) {
        let (se, sr) = (steps(e), steps(r));
        // a run that never reaches the threshold counts as infinitely slow
        if se.is_some() && (sr.is_none() || se <= sr) {
            wins += 1;
        }
        let show = |s: Option<usize>| s.map_or("-".to_string(), |v| v.to_string());
        pairs.push(format!("{}/{}", show(se), show(sr)));
    }
    let elapsed = start.elapsed();
    ensure(wins >= 4, || format!("eva no slower in only {wins}/5 seeds ({})", pairs.join(" ")))?;
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "grad norm at step 1 {:.3} vs {:.3}; steps to loss {:.3} (eva/random) {}; {wins}/5; {elapsed:.1?}",
        eva.mean_grad_norm_step1,
        random.mean_grad_norm_step1,
        report.threshold,
        pairs.join(" ")
    ))
}

fn c12_ablation_structure() -> Outcome {
    let exp = mechanism_experiment();
    let get = |kind| exp.prepare(kind, 7).map_err(e2s);
    let eva = get(InitKind::Eva)?;
    let whiten = get(InitKind::EvaWhiten)?;
    let rot = get(InitKind::EvaRot)?;
    let perm = get(InitKind::EvaPerm)?;
    let redist = get(InitKind::LoraRedist)?;
    for (name, a) in &eva.adapters {
        let a = &a.a;
        let w = &whiten.adapters[name].a;
        for (x, y) in a.row_iter().zip(w.row_iter()) {
            let (nx, ny) = (eva_core::linalg::norm(x), eva_core::linalg::norm(y));
            let diff = x.iter().zip(y).map(|(p, q)| (p / nx - q / ny).abs()).fold(0.0, f64::max);
            ensure(diff <= 1e-10, || format!("eva_whiten changed a direction of {name}: {diff:e}"))?;
        }
        let r = &rot.adapters[name].a;
        let gram = a.matmul_t(a).unwrap().max_abs_diff(&r.matmul_t(r).unwrap());
        ensure(gram <= 1e-10, || format!("eva_rot Gram of {name} off by {gram:e}"))?;
        for (x, y) in a.row_iter().zip(r.row_iter()) {
            let d = (eva_core::linalg::norm(x) - eva_core::linalg::norm(y)).abs();
            ensure(d <= 1e-10, || format!("eva_rot row norm of {name} off by {d:e}"))?;
        }
        let rows = |m: &Matrix| {
            let mut v: Vec<Vec<u64>> = m.row_iter().map(|r| r.iter().map(|x| x.to_bits()).collect()).collect();
            v.sort();
            v
        };
        ensure(rows(a) == rows(&perm.adapters[name].a), || format!("eva_perm rows of {name} differ"))?;
    }
    ensure(redist.allocation == eva.allocation, || "lora_redist allocation differs".into())?;
    ensure(redist.adapters.values().zip(eva.adapters.values()).all(|(x, y)| x.a != y.a), || {
        "lora_redist reused the activation components".into()
    })?;
    Ok(format!("{} layers checked", eva.adapters.len()))
}

fn c13_io_and_split_process(tmp: &Path) -> Outcome {
    // dump round trip on real activations
    let (_, student, mut data) = make_teacher_student(&TeacherStudentConfig::default(), 1).map_err(e2s)?;
    let taps = forward_with_taps(&student, &data.next().unwrap(), &student.layer_names().into_iter().collect())
        .map_err(e2s)?
        .taps;
    let dump = ActivationDump::new(taps.into_iter().collect()).map_err(e2s)?;
    let dump_path = tmp.join("a.evad");
    io::write_dump(&dump_path, &dump).map_err(e2s)?;
    let bytes = std::fs::read(&dump_path).map_err(e2s)?;
    let back = io::read_dump(&dump_path).map_err(e2s)?;
    ensure(back == dump && back.to_bytes().unwrap() == bytes, || "dump round trip differs".into())?;

    // config for both pipelines
    let cfg = ExperimentConfig {
        rank: 4,
        steps: 60,
        lr: Some(0.05),
        seed: 3,
        ..Default::default()
    };
    let cfg_path = tmp.join("exp.cfg");
    std::fs::write(&cfg_path, cfg.to_text()).map_err(e2s)?;
    let exp = Experiment::from_config(&cfg).map_err(e2s)?;
    let (prepared, metrics) = exp.run(cfg.mode, cfg.seed).map_err(e2s)?;
    let ckpt = exp.prepare(cfg.mode, cfg.seed).map_err(e2s)?.checkpoint(cfg.alpha).map_err(e2s)?;
    let ckpt_bytes = ckpt.to_bytes().map_err(e2s)?;
    ensure(EvaCheckpoint::from_bytes(&ckpt_bytes).map_err(e2s)? == ckpt, || "checkpoint round trip".into())?;

    let mut corrupted = 0;
    for i in io::CHECKPOINT_HEADER_LEN..ckpt_bytes.len() {
        let mut bad = ckpt_bytes.clone();
        bad[i] ^= 0x10;
        if matches!(EvaCheckpoint::from_bytes(&bad), Err(FormatError::Crc { .. })) {
            corrupted += 1;
        }
    }
    let payload = ckpt_bytes.len() - io::CHECKPOINT_HEADER_LEN;
    ensure(corrupted == payload, || format!("CRC caught {corrupted}/{payload} flips"))?;

    let bin = env!("CARGO_BIN_EXE_eva");
    let out = tmp.join("split");
    for sub in ["init", "train"] {
        let status = Command::new(bin)
            .arg(sub)
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .output()
            .map_err(e2s)?;
        ensure(status.status.success(), || {
            format!("eva {sub} failed: {}", String::from_utf8_lossy(&status.stderr))
        })?;
    }
    let file_ckpt = std::fs::read(out.join("checkpoint.evac")).map_err(e2s)?;
    ensure(file_ckpt == ckpt_bytes, || "CLI checkpoint differs from in-process".into())?;
    let split = io::read_metrics(&out.join("metrics.csv")).map_err(e2s)?;
    let identical = split.len() == metrics.records.len()
        && split.iter().zip(&metrics.records).all(|(a, b)| {
            a.step == b.step && a.loss.to_bits() == b.loss.to_bits() && a.grad_norm.to_bits() == b.grad_norm.to_bits()
        });
    ensure(identical, || "split-process metrics differ".into())?;
    ensure(prepared.adapters.len() == ckpt.to_adapters().unwrap().len(), || "adapter count".into())?;
    Ok(format!(
        "dump {} B and checkpoint {} B bit-exact; {payload}/{payload} flips caught; {} steps identical across processes",
        bytes.len(),
        ckpt_bytes.len(),
        split.len()
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Box<dyn FnOnce() -> Outcome>)> = vec![
        ("uniform allocation at rho = 1", Box::new(c1_uniform_at_rho_one)),
        ("rank budget conserved", Box::new(c2_budget_conservation)),
        ("explained variance matches direct evaluation", Box::new(c3_score_oracle)),
        ("incremental SVD equals one-shot SVD", Box::new(c4_incremental_equals_batch)),
        ("batch order invariance", Box::new(c5_batch_order_invariance)),
        ("batch size invariance", Box::new(c6_batch_size_invariance)),
        ("rho sweep settles", Box::new(c7_rho_sweep_converges)),
        ("adapter gradients match finite differences", Box::new(c8_gradient_check)),
        ("zero-init output equals base output", Box::new(c9_zero_init_equivalence)),
        ("merged weights equal adapter forward", Box::new(c10_merge_equivalence)),
        ("eva beats random init on gradient signal and speed", Box::new(c11_gradient_signal_and_speed)),
        ("ablation variants keep their structure", Box::new(c12_ablation_structure)),
        ("file formats and split-process pipeline", Box::new(move || c13_io_and_split_process(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS  criterion {:>2}: {name} ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {:>2}: {name} ({why})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
