//! `eva` command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::adapter::{init_adapters, InitKind, InitMode};
use crate::alloc::{allocation_delta, redistribute_ranks, RankAllocation};
use crate::error::{Error, Result};
use crate::io::{
    self, fmt_float, read_checkpoint, read_dump, read_metrics, read_numeric_csv, write_atomic,
    write_checkpoint, write_dump, ActivationDump, EvaCheckpoint, ExperimentConfig,
};
use crate::linalg::Matrix;
use crate::net::forward_with_taps;
use crate::pipeline::{host_shapes, Experiment};
use crate::svdstream::{InitPass, StopReason, StreamPass};
use crate::svg::{heatmap, line_chart, Series};
use crate::train::{compare_inits, ComparisonReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "eva", version, about = "Activation-driven LoRA initialization on a toy network")]
pub struct Cli {
    /// Experiment config (`key = value` lines)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record layer-input activations of the student network to a dump file
    Collect(CollectArgs),
    /// Run the activation SVD pass, allocate ranks and write a checkpoint
    Init(InitArgs),
    /// Fine-tune the adapters stored in a checkpoint
    Train(TrainArgs),
    /// Compare init modes over paired seeds
    Compare(CompareArgs),
    /// Plot one or more metrics CSVs
    Report(ReportArgs),
    /// Rank allocation across a list of rho values
    RhoSweep(RhoSweepArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    /// Number of batches to record
    #[arg(long, default_value_t = 8)]
    pub batches: usize,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Dump file name inside the output directory
    #[arg(long, default_value = "activations.evad")]
    pub file: String,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Init mode (eva, eva_whiten, eva_perm, eva_rot, lora_redist, weight_svd, random)
    #[arg(long)]
    pub mode: Option<InitKind>,
    /// Read activations from a dump instead of the synthetic generator
    #[arg(long, conflicts_with = "csv")]
    pub dump: Option<PathBuf>,
    /// Read one layer's activations from a numeric CSV (rows = samples)
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Skip the first CSV line
    #[arg(long)]
    pub csv_header: bool,
    /// Layer whose inputs the CSV columns are
    #[arg(long, default_value = "fc0")]
    pub csv_layer: String,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Checkpoint to train (default: OUT/checkpoint.evac)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated init modes (default: all)
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<InitKind>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1, 2, 3, 4])]
    pub seeds: Vec<u64>,
    /// Worker threads (default: available cores; EVA_THREADS overrides)
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Metrics CSVs to plot
    #[arg(required = true)]
    pub metrics: Vec<PathBuf>,
    /// SVG file name inside the output directory
    #[arg(long, default_value = "report.svg")]
    pub file: String,
}

#[derive(Debug, Args)]
pub struct RhoSweepArgs {
    /// Comma-separated rho values, each >= 1
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.5, 2.0, 2.5, 3.0])]
    pub rhos: Vec<f64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Parses `args` (including the program name) and runs the command, writing
/// human-readable output to `stdout`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                stdout.write_all(text.as_bytes())
            } else {
                stderr.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Numeric(_) | Error::NonFinite(_) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn load_config(cli: &Cli, overrides: Option<&Overrides>) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| match e {
            Error::Io(io) => Error::Config(format!("{}: {io}", path.display())),
            other => other,
        })?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(o) = overrides {
        if let Some(v) = o.rank {
            cfg.rank = v;
        }
        if let Some(v) = o.rho {
            cfg.rho = v;
        }
        if let Some(v) = o.tau {
            cfg.tau = v;
        }
        if let Some(v) = o.steps {
            cfg.steps = v;
        }
        if let Some(v) = o.batch_size {
            cfg.batch_size = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<&Path> {
    std::fs::create_dir_all(&cli.out)?;
    Ok(&cli.out)
}

/// Worker count: `EVA_THREADS`, then the flag, then available cores.
pub fn worker_threads(flag: Option<usize>) -> usize {
    std::env::var("EVA_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n: &usize| n > 0)
        .or(flag)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Collect(args) => cmd_collect(cli, args, stdout),
        Command::Init(args) => cmd_init(cli, args, stdout, stderr),
        Command::Train(args) => cmd_train(cli, args, stdout),
        Command::Compare(args) => cmd_compare(cli, args, stdout),
        Command::Report(args) => cmd_report(cli, args, stdout),
        Command::RhoSweep(args) => cmd_rho_sweep(cli, args, stdout),
    }
}

fn cmd_collect(cli: &Cli, args: &CollectArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(cli, None)?;
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    if args.batches == 0 {
        return Err(Error::Config("--batches must be >= 1".into()));
    }
    let exp = Experiment::from_config(&cfg)?;
    let (net, data) = exp.task(cfg.seed)?;
    let names = net.layer_names();
    let wanted = names.iter().cloned().collect();
    let mut stacked: BTreeMap<String, Matrix> = names
        .iter()
        .map(|n| (n.clone(), Matrix::zeros(0, net.layer(n).expect("own layer").in_features())))
        .collect();
    for batch in data.stream("init").take(args.batches) {
        let tapped = forward_with_taps(&net, &batch, &wanted)?;
        for (name, x) in tapped.taps {
            let acc = stacked.get_mut(&name).expect("tapped layer");
            *acc = acc.vstack(&x)?;
        }
    }
    let dump = ActivationDump::new(names.iter().map(|n| (n.clone(), stacked[n].clone())).collect())?;
    let path = out_dir(cli)?.join(&args.file);
    write_dump(&path, &dump)?;
    writeln!(
        stdout,
        "wrote {} ({} layers, {} batches of {})",
        path.display(),
        dump.layers.len(),
        args.batches,
        cfg.batch_size
    )?;
    Ok(())
}

/// Streams pre-recorded activations through the SVD pass in row chunks.
fn pass_from_tables(tables: &[(String, Matrix)], exp: &Experiment, seed: u64) -> Result<InitPass> {
    let rows = tables[0].1.rows();
    if tables.iter().any(|(_, m)| m.rows() != rows) {
        return Err(Error::dims("all layers in the source must have the same row count"));
    }
    let cfg = crate::svdstream::StreamConfig {
        seed,
        ..exp.stream.clone()
    };
    let dims: Vec<(String, usize)> = tables.iter().map(|(n, m)| (n.clone(), m.cols())).collect();
    let mut pass = StreamPass::new(&dims, &cfg)?;
    let chunk = exp.workload.batch_size;
    let mut start = 0;
    while start < rows && !pass.is_done() {
        let end = (start + chunk).min(rows);
        let taps = tables
            .iter()
            .map(|(n, m)| (n.clone(), m.row_range(start, end)))
            .collect();
        pass.feed(&taps)?;
        start = end;
    }
    pass.finish()
}

fn cmd_init(cli: &Cli, args: &InitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(cli, Some(&args.overrides))?;
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    let exp = Experiment::from_config(&cfg)?;
    let dir = out_dir(cli)?;
    let start = Instant::now();

    let external = match (&args.dump, &args.csv) {
        (Some(path), _) => Some(read_dump(path)?.layers),
        (None, Some(path)) => Some(vec![(
            args.csv_layer.clone(),
            read_numeric_csv(path, args.csv_header)?,
        )]),
        (None, None) => None,
    };
    let (net, pass, allocation, adapters) = match external {
        None => {
            let p = exp.prepare(cfg.mode, cfg.seed)?;
            (p.net, p.pass, p.allocation, p.adapters)
        }
        Some(tables) => {
            let (net, _) = exp.task(cfg.seed)?;
            if tables.is_empty() {
                return Err(Error::invalid("activation source has no layers"));
            }
            for (name, m) in &tables {
                let layer = net.layer(name).ok_or_else(|| Error::UnknownLayer(name.clone()))?;
                if layer.in_features() != m.cols() {
                    return Err(Error::dims(format!(
                        "layer `{name}` takes {} inputs, source has {} columns",
                        layer.in_features(),
                        m.cols()
                    )));
                }
            }
            let names: Vec<String> = tables.iter().map(|(n, _)| n.clone()).collect();
            let (pass, allocation) = if cfg.mode.needs_activation_svd() {
                let pass = pass_from_tables(&tables, &exp, cfg.seed)?;
                let allocation = redistribute_ranks(&pass.states, cfg.rank, cfg.rho, cfg.measure)?;
                (Some(pass), allocation)
            } else {
                (None, RankAllocation::uniform(&names, cfg.rank, cfg.measure))
            };
            let states = pass.as_ref().map(|p| p.states.clone()).unwrap_or_default();
            let mode = InitMode {
                whiten_exponent: cfg.whiten_exponent,
                ..InitMode::new(cfg.mode, cfg.seed)
            };
            let adapters = init_adapters(&net, &states, &allocation, &mode, cfg.alpha)?;
            (net, pass, allocation, adapters)
        }
    };
    let seconds = start.elapsed().as_secs_f64();

    let empty = BTreeMap::new();
    let states = pass.as_ref().map_or(&empty, |p| &p.states);
    let ckpt = EvaCheckpoint::from_parts(&allocation, states, &adapters, &host_shapes(&net), cfg.alpha)?;
    write_checkpoint(&dir.join("checkpoint.evac"), &ckpt)?;
    io::write_allocation(&dir.join("allocation.csv"), &allocation.ranks)?;

    let t = pass.as_ref().map_or(0, |p| p.batches_consumed);
    writeln!(stdout, "mode: {}", cfg.mode)?;
    writeln!(stdout, "T = {t}")?;
    if let Some(p) = &pass {
        for (name, s) in &p.states {
            if s.converged {
                writeln!(stdout, "{name}: converged after {} batches, rank {}", s.updates, allocation.ranks[name])?;
            } else {
                writeln!(stdout, "{name}: not converged after {} batches, rank {}", s.updates, allocation.ranks[name])?;
            }
        }
        if p.batches_skipped > 0 {
            writeln!(stdout, "skipped {} fully masked batches", p.batches_skipped)?;
        }
        if p.converged_layers() < p.states.len() {
            let why = match p.stop {
                StopReason::MaxBatches => "max_batches reached",
                StopReason::StreamExhausted => "data exhausted",
                _ => "stopped at delta",
            };
            writeln!(
                stderr,
                "warning: {} of {} layers did not converge ({why})",
                p.states.len() - p.converged_layers(),
                p.states.len()
            )?;
        }
    } else {
        for (name, r) in &allocation.ranks {
            writeln!(stdout, "{name}: rank {r}")?;
        }
    }
    if allocation.shortfall() > 0 {
        writeln!(stderr, "warning: {} ranks of the budget could not be placed", allocation.shortfall())?;
    }
    writeln!(stdout, "init time: {seconds:.3} s")?;
    if cli.verbose {
        writeln!(stdout, "wrote {}", dir.join("checkpoint.evac").display())?;
    }
    Ok(())
}

fn cmd_train(cli: &Cli, args: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli, Some(&args.overrides))?;
    let exp = Experiment::from_config(&cfg)?;
    let dir = out_dir(cli)?;
    let path = args.checkpoint.clone().unwrap_or_else(|| dir.join("checkpoint.evac"));
    let ckpt = read_checkpoint(&path)?;
    let mut adapters = ckpt.to_adapters()?;
    if adapters.is_empty() {
        return Err(Error::invalid("checkpoint has no adapters to train"));
    }
    let (net, data) = exp.task(cfg.seed)?;
    let metrics = exp.train_adapters(&net, &data, &mut adapters)?;
    io::write_metrics(&dir.join("metrics.csv"), &metrics.records)?;
    write_checkpoint(&dir.join("trained.evac"), &ckpt.with_adapters(&adapters)?)?;
    if cli.verbose {
        for r in &metrics.records {
            writeln!(stdout, "step {:>5}  loss {:.6e}  grad_norm {:.6e}", r.step, r.loss, r.grad_norm)?;
        }
    }
    writeln!(stdout, "final loss: {:.6e}", metrics.final_loss)?;
    match metrics.steps_to_threshold {
        Some(s) => writeln!(stdout, "threshold {:.4e} reached at step {s}", exp.threshold())?,
        None => writeln!(stdout, "threshold {:.4e} not reached", exp.threshold())?,
    }
    Ok(())
}

pub fn summary_csv(report: &ComparisonReport) -> String {
    let mut s = String::from(
        "mode,mean_final_loss,std_final_loss,mean_steps_to_threshold,mean_gradnorm_step1,failed_runs\n",
    );
    for m in &report.modes {
        let steps = m.mean_steps_to_threshold.map_or("NA".to_string(), fmt_float);
        let failed = m.runs.iter().filter(|r| r.result.is_err()).count();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            m.kind,
            fmt_float(m.mean_final_loss),
            fmt_float(m.std_final_loss),
            steps,
            fmt_float(m.mean_grad_norm_step1),
            failed
        );
    }
    s
}

fn curves_csv(m: &crate::train::ModeSummary) -> String {
    let mut s = String::from("step,mean_loss,std_loss,mean_grad_norm\n");
    for i in 0..m.mean_loss.len() {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            i + 1,
            fmt_float(m.mean_loss[i]),
            fmt_float(m.std_loss[i]),
            fmt_float(m.mean_grad_norm[i])
        );
    }
    s
}

fn cmd_compare(cli: &Cli, args: &CompareArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli, Some(&args.overrides))?;
    let exp = Experiment::from_config(&cfg)?;
    let modes = if args.modes.is_empty() {
        InitKind::ALL.to_vec()
    } else {
        args.modes.clone()
    };
    if modes.len() < 2 {
        return Err(Error::Config("compare needs at least two modes".into()));
    }
    let dir = out_dir(cli)?;
    let report = compare_inits(&modes, &args.seeds, &exp, worker_threads(args.threads))?;

    for m in &report.modes {
        for run in &m.runs {
            match &run.result {
                Ok(metrics) => io::write_metrics(
                    &dir.join(format!("metrics_{}_seed{}.csv", m.kind, run.seed)),
                    &metrics.records,
                )?,
                Err(e) => writeln!(stdout, "{} seed {} failed: {e}", m.kind, run.seed)?,
            }
        }
        write_atomic(&dir.join(format!("curves_{}.csv", m.kind)), curves_csv(m).as_bytes())?;
    }
    let summary = summary_csv(&report);
    write_atomic(&dir.join("summary.csv"), summary.as_bytes())?;

    let names: Vec<String> = report.modes.iter().map(|m| m.kind.to_string()).collect();
    let loss: Vec<Series> = report
        .modes
        .iter()
        .zip(&names)
        .map(|(m, n)| Series { name: n, values: &m.mean_loss })
        .collect();
    write_atomic(&dir.join("loss.svg"), line_chart("mean training loss", "loss", &loss, true).as_bytes())?;
    let grads: Vec<Series> = report
        .modes
        .iter()
        .zip(&names)
        .map(|(m, n)| Series { name: n, values: &m.mean_grad_norm })
        .collect();
    write_atomic(
        &dir.join("grad_norm.svg"),
        line_chart("mean adapter gradient norm", "grad norm", &grads, true).as_bytes(),
    )?;
    stdout.write_all(summary.as_bytes())?;
    Ok(())
}

fn cmd_report(cli: &Cli, args: &ReportArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut names = Vec::new();
    let mut losses = Vec::new();
    for path in &args.metrics {
        let records = read_metrics(path)?;
        let last = records.last().map_or(f64::NAN, |r| r.loss);
        writeln!(stdout, "{}: {} steps, final loss {:.6e}", path.display(), records.len(), last)?;
        names.push(
            path.file_stem()
                .map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned()),
        );
        losses.push(records.iter().map(|r| r.loss).collect::<Vec<f64>>());
    }
    let series: Vec<Series> = names
        .iter()
        .zip(&losses)
        .map(|(n, v)| Series { name: n, values: v })
        .collect();
    let path = out_dir(cli)?.join(&args.file);
    write_atomic(&path, line_chart("training loss", "loss", &series, true).as_bytes())?;
    writeln!(stdout, "wrote {}", path.display())?;
    Ok(())
}

/// Allocation per ρ, one SVD pass per value (the tracked count depends on ρ).
pub fn rho_sweep(exp: &Experiment, seed: u64, rhos: &[f64], threads: usize) -> Result<Vec<RankAllocation>> {
    if rhos.is_empty() {
        return Err(Error::Config("empty rho list".into()));
    }
    if let Some(bad) = rhos.iter().find(|r| !(**r >= 1.0)) {
        return Err(Error::Config(format!("rho must be >= 1, got {bad}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("worker pool: {e}")))?;
    pool.install(|| {
        rhos.par_iter()
            .map(|&rho| {
                let mut e = exp.clone();
                e.stream.rho = rho;
                Ok(e.prepare(InitKind::Eva, seed)?.allocation)
            })
            .collect()
    })
}

fn cmd_rho_sweep(cli: &Cli, args: &RhoSweepArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_config(cli, Some(&args.overrides))?;
    let exp = Experiment::from_config(&cfg)?;
    let allocations = rho_sweep(&exp, cfg.seed, &args.rhos, worker_threads(args.threads))?;
    let dir = out_dir(cli)?;
    let layers: Vec<String> = allocations[0].ranks.keys().cloned().collect();
    let labels: Vec<String> = args.rhos.iter().map(|r| r.to_string()).collect();

    let mut matrix = format!("layer,{}\n", labels.iter().map(|l| format!("rho={l}")).collect::<Vec<_>>().join(","));
    let mut values = Vec::new();
    for layer in &layers {
        let row: Vec<usize> = allocations.iter().map(|a| a.ranks[layer]).collect();
        let _ = writeln!(
            matrix,
            "{layer},{}",
            row.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
        );
        values.push(row.iter().map(|&r| r as f64).collect::<Vec<f64>>());
    }
    write_atomic(&dir.join("rho_allocation.csv"), matrix.as_bytes())?;

    let mut delta = String::from("from_rho,to_rho,layer,delta\n");
    let mut l1 = Vec::new();
    for (i, pair) in allocations.windows(2).enumerate() {
        let d = allocation_delta(&pair[0], &pair[1])?;
        l1.push(d.values().map(|v| v.unsigned_abs()).sum::<u64>());
        for (layer, v) in d {
            let _ = writeln!(delta, "{},{},{layer},{v}", labels[i], labels[i + 1]);
        }
    }
    write_atomic(&dir.join("rho_delta.csv"), delta.as_bytes())?;
    write_atomic(
        &dir.join("rho_allocation.svg"),
        heatmap("rank per layer vs rho", &layers, &labels, &values).as_bytes(),
    )?;
    stdout.write_all(matrix.as_bytes())?;
    for (i, d) in l1.iter().enumerate() {
        writeln!(stdout, "l1 delta rho {} -> {}: {d}", labels[i], labels[i + 1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("eva").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn help_exits_zero_everywhere() {
        for sub in ["collect", "init", "train", "compare", "report", "rho-sweep"] {
            let (code, out, _) = run_args(&[sub, "--help"]);
            assert_eq!(code, 0, "{sub}");
            assert!(out.contains("--out"), "{sub}");
        }
        assert_eq!(run_args(&["--help"]).0, 0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run_args(&[]).0, EXIT_USAGE);
        assert_eq!(run_args(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run_args(&["init", "--mode", "nope"]).0, EXIT_USAGE);
    }

    #[test]
    fn missing_checkpoint_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run_args(&["train", "--out", out]).0, EXIT_DATA);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::Numeric("x".into())), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::UnknownLayer("x".into())), EXIT_DATA);
    }

    #[test]
    fn random_init_reports_zero_batches() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, stdout, _) = run_args(&["init", "--mode", "random", "--rank", "2", "--out", out]);
        assert_eq!(code, 0);
        assert!(stdout.contains("T = 0"));
        let csv = std::fs::read_to_string(dir.path().join("allocation.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",2")));
    }
}
