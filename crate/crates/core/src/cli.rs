//! The `aode` command line: `train`, `eval`, `diagnose` and `gendata`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
//! 3 a hard diagnostic check failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::adjoint::{Objective, ParticleBatch};
use crate::config::{DiagnosticsConfig, Problem, RunConfig};
use crate::data_io::{
    gen_gaussian_classification, gen_parabola, load_checkpoint, load_dataset, save_checkpoint, save_dataset,
    Checkpoint, Dataset, DatasetFormat, DatasetKind, Provenance,
};
use crate::diagnostics::{
    active_coordinates, default_radius, entropy_profiles, gradient_check_sampled, hessian_extreme_eigs,
    latent_sparsity_report, lipschitz_profile, wasserstein1_exact, write_delta_csv, write_entropy_csv,
    write_hessian_csv, write_w1_csv, DiagnosticsReport, HessianEigs, W1Value, W1_MAX_POINTS,
};
use crate::dynamics::Network;
use crate::error::Error;
use crate::trainer::{evaluate, train_from, Metrics};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "aode", version, about = "Train and inspect width-varying neural ODE autoencoders")]
pub struct Cli {
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true, env = "AODE_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train from a config file and write a checkpoint plus history.csv.
    Train(TrainArgs),
    /// Print a CSV metrics record for a checkpoint.
    Eval(EvalArgs),
    /// Run diagnostics on a checkpoint, one CSV per check plus summary.txt.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic dataset.
    Gendata(GendataArgs),
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Dataset file replacing the task's generator.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run seed (data generation, splitting, diagnostic sampling).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train on this fraction of the data and report the rest.
    #[arg(long)]
    pub split: Option<f64>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Grad,
    Lip,
    Hessian,
    Entropy,
    Latent,
    W1,
}

#[derive(Debug, clap::Args)]
pub struct DiagnoseArgs {
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated subset; every check when omitted.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub checks: Vec<Check>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Treat nodes with delta below dt as failures.
    #[arg(long)]
    pub strict: bool,
    /// Config whose diagnostics section replaces the stored one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Binary,
    Csv,
}

#[derive(Debug, clap::Args)]
pub struct GendataArgs {
    /// classify2d or parabola.
    pub kind: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Binary unless the output ends in `.csv`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["LO", "HI"])]
    pub x_range: Option<Vec<f64>>,
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
    Check(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => EXIT_CONFIG,
            Failure::Numerical(_) => EXIT_NUMERICAL,
            Failure::Check(_) => EXIT_CHECK,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Numerical(m) | Failure::Check(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

/// Parses `args`, runs the command and returns the exit code. Messages go to
/// standard error; records meant for other tools go to `out`.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Failure::Config("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&cli.command, out)),
            Err(e) => Err(Failure::Config(format!("thread pool: {e}"))),
        },
        None => execute(&cli.command, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

pub fn execute(command: &Command, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    match command {
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::Gendata(a) => cmd_gendata(a),
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn metrics_line(label: &str, n: usize, m: &Metrics) -> String {
    let acc = m.accuracy.map_or(String::new(), |a| format!("{a}"));
    format!("{label},{n},{:e},{acc}", m.mse)
}

fn metrics_of(net: &Network, theta: &crate::dynamics::ControlParams, problem: &Problem, data: &Dataset) -> Result<Metrics, Failure> {
    let batch = data.batch(net.dim())?;
    Ok(evaluate(net, theta, &batch, &problem.loss, data.kind.is_classification())?)
}

pub fn cmd_train(a: &TrainArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = &a.data {
        cfg.paths.data = Some(absolute(d));
    }
    if let Some(f) = a.split {
        cfg.data.train_fraction = Some(f);
    }
    cfg.validate()?;
    cfg.absolutize();

    let (train_set, test_set) = cfg.split(cfg.dataset()?)?;
    let problem = cfg.problem_for(train_set)?;
    let net = &problem.net;
    let batch = problem.dataset.batch(net.dim())?;
    let tc = &cfg.trainer;
    let hess_obj = Objective::new(net, &batch, &problem.loss, tc.lambda).with_reduction(tc.reduction());
    let probe = cfg.diagnostics.hessian_probe(cfg.seed);
    let every = cfg.diagnostics.hessian_every;
    let mut hessian: Vec<(usize, HessianEigs)> = Vec::new();
    let mut hessian_err: Option<Error> = None;
    let outcome = train_from(net, &batch, &problem.loss, tc, tc.init.controls(net), |k, e| {
        if every > 0 && k % every == 0 && hessian_err.is_none() {
            match hessian_extreme_eigs(&hess_obj, &e.theta, probe, cfg.diagnostics.hessian_tol) {
                Ok(h) => hessian.push((k, h)),
                Err(err) => hessian_err = Some(err),
            }
        }
    })?;
    if let Some(e) = hessian_err {
        return Err(e.into());
    }
    let last_iter = outcome.history.rows.len() - 1;
    if every > 0 && hessian.last().is_none_or(|(k, _)| *k != last_iter) {
        hessian.push((
            last_iter,
            hessian_extreme_eigs(&hess_obj, &outcome.theta, probe, cfg.diagnostics.hessian_tol)?,
        ));
    }

    let provenance = Provenance::from_config(cfg.seed, &cfg.to_toml());
    let ck = Checkpoint::new(net, tc.lambda, outcome.theta.clone(), provenance)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_checkpoint(&a.out, &ck)?;
    let dir = a.out.parent().map(Path::to_path_buf).unwrap_or_default();
    let history_path = cfg.paths.history.clone().unwrap_or_else(|| dir.join("history.csv"));
    outcome.history.write_csv(create(&history_path)?)?;
    if !hessian.is_empty() {
        write_hessian_csv(&hessian, create(&dir.join("hessian.csv"))?)?;
    }

    let last = outcome.history.last().expect("history has the initial row");
    eprintln!(
        "trained {} outer steps: cost {:.6e} (data {:.6e}), tau {:e}{}",
        last.iter,
        last.cost,
        last.data_term,
        last.tau,
        if outcome.converged { ", stationary" } else { "" }
    );
    writeln!(out, "split,n,mse,accuracy")?;
    let train_m = metrics_of(net, &outcome.theta, &problem, &problem.dataset)?;
    writeln!(out, "{}", metrics_line("train", problem.dataset.len(), &train_m))?;
    if let Some(test) = &test_set {
        let m = metrics_of(net, &outcome.theta, &problem, test)?;
        writeln!(out, "{}", metrics_line("test", test.len(), &m))?;
    }
    Ok(())
}

/// The config stored in a checkpoint, when it has one.
fn stored_config(ck: &Checkpoint) -> Result<Option<RunConfig>, Failure> {
    if ck.provenance.config_text.trim().is_empty() {
        return Ok(None);
    }
    Ok(Some(RunConfig::from_toml(&ck.provenance.config_text)?))
}

/// Dataset for a checkpoint: `--data` first, else the stored config's source.
fn checkpoint_data(data: Option<&Path>, cfg: Option<&RunConfig>) -> Result<Dataset, Failure> {
    match (data, cfg) {
        (Some(p), cfg) => {
            let mut ds = load_dataset(p)?;
            if let (DatasetKind::Other, Some(cfg)) = (ds.kind, cfg) {
                ds.kind = cfg.task.dataset_kind();
            }
            Ok(ds)
        }
        (None, Some(cfg)) => Ok(cfg.dataset()?),
        (None, None) => Err(Failure::Config(
            "checkpoint carries no config; pass --data".into(),
        )),
    }
}

fn problem_for_checkpoint(net: Network, dataset: Dataset) -> Result<Problem, Failure> {
    if dataset.input_dim() > net.dim() {
        return Err(Failure::Config(format!(
            "data has {} input components, the network state has {}",
            dataset.input_dim(),
            net.dim()
        )));
    }
    let loss = crate::adjoint::LossSpec::for_schedule(net.schedule(), dataset.target_dim())?;
    Ok(Problem { net, dataset, loss })
}

pub fn cmd_eval(a: &EvalArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let cfg = stored_config(&ck)?;
    let dataset = checkpoint_data(a.data.as_deref(), cfg.as_ref())?;
    let problem = problem_for_checkpoint(ck.network()?, dataset)?;
    let fraction = a.split.or(cfg.as_ref().and_then(|c| c.data.train_fraction));
    let seed = a.seed.or(cfg.as_ref().map(|c| c.seed)).unwrap_or(ck.provenance.seed);
    let net = &problem.net;

    writeln!(out, "split,n,mse,accuracy")?;
    match fraction {
        None => {
            let m = metrics_of(net, &ck.theta, &problem, &problem.dataset)?;
            writeln!(out, "{}", metrics_line("all", problem.dataset.len(), &m))?;
        }
        Some(f) => {
            let (train, test) = problem.dataset.split(f, seed)?;
            for (label, part) in [("train", &train), ("test", &test)] {
                let m = metrics_of(net, &ck.theta, &problem, part)?;
                writeln!(out, "{}", metrics_line(label, part.len(), &m))?;
            }
        }
    }
    Ok(())
}

pub fn cmd_diagnose(a: &DiagnoseArgs, out: &mut (dyn Write + Send)) -> Result<(), Failure> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let stored = stored_config(&ck)?;
    let diag: DiagnosticsConfig = match &a.config {
        Some(p) => RunConfig::load(p)?.diagnostics,
        None => stored.as_ref().map(|c| c.diagnostics.clone()).unwrap_or_default(),
    };
    let seed = a.seed.or(stored.as_ref().map(|c| c.seed)).unwrap_or(ck.provenance.seed);
    let dataset = checkpoint_data(a.data.as_deref(), stored.as_ref())?;
    let problem = problem_for_checkpoint(ck.network()?, dataset)?;
    let net = &problem.net;
    let theta = &ck.theta;
    let batch = problem.dataset.batch(net.dim())?;
    let checks: Vec<Check> = if a.checks.is_empty() {
        Check::value_variants().to_vec()
    } else {
        a.checks.clone()
    };
    std::fs::create_dir_all(&a.out)?;
    let head = |n: usize| -> Result<ParticleBatch, Failure> {
        let rows: Vec<usize> = (0..n.min(batch.len())).collect();
        Ok(batch.select(&rows)?)
    };

    let mut report = DiagnosticsReport::default();
    let mut failures = Vec::new();
    for check in &checks {
        match check {
            Check::Grad => {
                let sub = head(diag.grad_samples)?;
                let obj = Objective::new(net, &sub, &problem.loss, ck.lambda);
                let err = gradient_check_sampled(&obj, theta, diag.grad_h, diag.grad_coords, seed)?;
                let mut w = create(&a.out.join("grad.csv"))?;
                writeln!(w, "max_rel_err,tol,coords,samples")?;
                writeln!(w, "{err:e},{:e},{},{}", diag.grad_tol, diag.grad_coords.min(theta.param_count()), sub.len())?;
                if !(err <= diag.grad_tol) {
                    failures.push(format!("gradient check: {err:e} exceeds {:e}", diag.grad_tol));
                }
                report.grad_check_max_rel_err = Some(err);
            }
            Check::Lip => {
                let sub = head(diag.lip_samples)?;
                let profile = lipschitz_profile(net, theta, sub.inputs())?;
                write_delta_csv(&profile, create(&a.out.join("delta.csv"))?)?;
                let flagged: Vec<usize> = profile.iter().filter(|e| e.unstable).map(|e| e.node).collect();
                if a.strict && !flagged.is_empty() {
                    failures.push(format!("delta below dt at nodes {flagged:?}"));
                }
                report.delta_profile = profile;
            }
            Check::Hessian => {
                let obj = Objective::new(net, &batch, &problem.loss, ck.lambda);
                let eigs = hessian_extreme_eigs(&obj, theta, diag.hessian_probe(seed), diag.hessian_tol)?;
                report.hessian = vec![(0, eigs)];
                write_hessian_csv(&report.hessian, create(&a.out.join("hessian.csv"))?)?;
            }
            Check::Entropy => {
                let sub = head(diag.entropy_samples)?;
                let traj = net.forward_batch(sub.inputs(), theta)?;
                let coords = active_coordinates(net.schedule());
                let eps = match diag.entropy_eps {
                    Some(e) => e,
                    None => default_radius(crate::dynamics::gather_cols(sub.inputs(), &coords[0]).view()),
                };
                let rows = entropy_profiles(&traj, &coords, eps, diag.centers_k.min(sub.len()), seed)?;
                write_entropy_csv(&rows, create(&a.out.join("entropy.csv"))?)?;
                report.entropy = rows;
                report.entropy_radius = Some(eps);
            }
            Check::Latent => {
                let node = diag.latent_node.unwrap_or_else(|| net.schedule().bottleneck_node());
                let labels = problem.dataset.labels.as_deref();
                let rep = latent_sparsity_report(net, theta, batch.inputs(), labels, node, diag.zero_tol)?;
                write_latent_csv(&rep, &a.out)?;
                report.latent = Some(rep);
            }
            Check::W1 => {
                let n = diag.w1_samples.min(batch.len()).min(W1_MAX_POINTS);
                let sub = head(n)?;
                let traj = net.forward_batch(sub.inputs(), theta)?;
                let out_set = problem.loss.output();
                let targets = crate::dynamics::gather_cols(sub.targets(), out_set);
                let outputs = crate::dynamics::gather_cols(traj.final_states(), out_set);
                let inputs = crate::dynamics::gather_cols(sub.inputs(), out_set);
                report.w1 = vec![
                    W1Value {
                        label: "input_vs_target".into(),
                        n,
                        value: wasserstein1_exact(inputs.view(), targets.view())?,
                    },
                    W1Value {
                        label: "output_vs_target".into(),
                        n,
                        value: wasserstein1_exact(outputs.view(), targets.view())?,
                    },
                ];
                write_w1_csv(&report.w1, create(&a.out.join("w1.csv"))?)?;
            }
        }
    }
    let mut summary = create(&a.out.join("summary.txt"))?;
    write!(summary, "{report}")?;
    for f in &failures {
        writeln!(summary, "FAILED {f}")?;
    }
    summary.flush()?;
    write!(out, "{report}")?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}

fn write_latent_csv(rep: &crate::diagnostics::LatentReport, dir: &Path) -> Result<(), Failure> {
    let mut w = create(&dir.join("latent.csv"))?;
    writeln!(w, "node,latent_width,modal_support_size,consistency,union_support_size,mean_support_size,modal_support")?;
    let support: Vec<String> = rep.modal_support.iter().map(|k| k.to_string()).collect();
    writeln!(
        w,
        "{},{},{},{},{},{},{}",
        rep.node,
        rep.latent.len(),
        rep.modal_support.len(),
        rep.consistency,
        rep.union_support.len(),
        rep.mean_support_size,
        support.join(" ")
    )?;
    w.flush()?;
    if !rep.class_means.is_empty() {
        let mut w = create(&dir.join("latent_means.csv"))?;
        let header: Vec<String> = rep.latent.iter().map(|k| format!("x{k}")).collect();
        writeln!(w, "label,{}", header.join(","))?;
        for (label, mean) in &rep.class_means {
            let vals: Vec<String> = mean.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{label},{}", vals.join(","))?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn cmd_gendata(a: &GendataArgs) -> Result<(), Failure> {
    let ds = match a.kind.as_str() {
        "classify2d" => gen_gaussian_classification(a.n, a.seed)?,
        "parabola" => {
            let range = a.x_range.as_ref().map_or((-1.0, 1.0), |r| (r[0], r[1]));
            gen_parabola(a.n, a.seed, range)?
        }
        "mnist" => {
            return Err(Failure::Config(
                "mnist is read from IDX files, not generated".into(),
            ))
        }
        other => {
            return Err(Failure::Config(format!(
                "unknown dataset kind {other:?} (expected classify2d or parabola)"
            )))
        }
    };
    let format = match a.format {
        Some(Format::Csv) => DatasetFormat::Csv,
        Some(Format::Binary) => DatasetFormat::Binary,
        None if a.out.extension().is_some_and(|e| e == "csv") => DatasetFormat::Csv,
        None => DatasetFormat::Binary,
    };
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_dataset(&a.out, &ds, format)?;
    Ok(())
}
