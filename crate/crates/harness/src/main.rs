use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use straggler_core::frames::container::write_frame;
use straggler_core::frames::{brip_estimate, BripMode, FrameSpec};

use straggler_harness::config::ExperimentConfig;
use straggler_harness::data::{dataset_of, write_dataset, write_dataset_csv, write_sidecar, Sidecar};
use straggler_harness::error::HarnessError;
use straggler_harness::experiment::{build_instance, run_config, run_schemes, steiner_order};
use straggler_harness::output::{output_dir, trace_csv, write_atomic, write_atomic_with, write_json};
use straggler_harness::report::compare_report;

#[derive(Parser)]
#[command(name = "straggler", version, about = "Encoded distributed optimization under stragglers, simulated")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the configured instance: binary container, JSON sidecar, optional CSV.
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        csv: bool,
    },
    /// Measure the subset spectrum of an encoding frame.
    Spectrum(SpectrumArgs),
    /// Run one configuration and write its trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Print {total_sim_time, final_objective, final_metric, iterations} as JSON.
        #[arg(long)]
        summary: bool,
    },
    /// Repeat a configuration and report timings.
    Bench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the configured schemes on paired seeds.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of scheme names, in report order.
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Steiner,
    Haar,
    Hadamard,
    Gaussian,
    Identity,
    Replication,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Sampled,
}

#[derive(clap::Args)]
struct SpectrumArgs {
    #[arg(long, value_enum)]
    frame: FrameArg,
    /// Steiner order.
    #[arg(long)]
    v: Option<usize>,
    /// Encoded dimension (non-Steiner kinds; Steiner truncation).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 2)]
    beta: u64,
    #[arg(long)]
    m: usize,
    #[arg(long, conflicts_with = "k")]
    eta: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the dense matrix as CSV.
    #[arg(long)]
    dense_export: Option<PathBuf>,
    /// Also write the frame container.
    #[arg(long)]
    container: Option<PathBuf>,
    /// JSON destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SpectrumJson {
    eta: f64,
    epsilon: f64,
    min_eig: f64,
    max_eig: f64,
    subsets: usize,
    mode: &'static str,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), HarnessError> {
    match cmd {
        Cmd::GenData { config, csv } => gen_data(&config, csv),
        Cmd::Spectrum(args) => spectrum(args),
        Cmd::Run { config, summary } => run(&config, summary),
        Cmd::Bench { config } => bench(&config),
        Cmd::Compare { config, schemes } => compare(&config, schemes),
    }
}

fn out_base(cfg: &ExperimentConfig, default: &str) -> (PathBuf, String) {
    let dir = output_dir(cfg.output.dir.as_deref());
    (dir, cfg.output.name.clone().unwrap_or_else(|| default.to_string()))
}

fn gen_data(path: &Path, csv: bool) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    let (dir, name) = out_base(&cfg, "data");
    let instance = build_instance(&cfg.problem, cfg.seeds.data_seed)?;
    let (data, reference) = dataset_of(&instance);
    write_dataset(&dir.join(format!("{name}.bin")), &data)?;
    write_sidecar(
        &dir.join(format!("{name}.json")),
        &Sidecar {
            problem: cfg.problem.clone(),
            data_seed: cfg.seeds.data_seed,
            rows: data.x.rows(),
            cols: data.x.cols(),
            reference,
        },
    )?;
    if csv {
        write_dataset_csv(&dir.join(format!("{name}.csv")), &data)?;
    }
    Ok(())
}

fn spectrum(a: SpectrumArgs) -> Result<(), HarnessError> {
    let need = |v: Option<usize>, flag: &str| v.ok_or_else(|| HarnessError::Config(format!("--{flag} is required")));
    let spec = match a.frame {
        FrameArg::Steiner => {
            let v = match (a.v, a.n) {
                (Some(v), _) => v,
                (None, Some(n)) => steiner_order(n),
                (None, None) => return Err(HarnessError::Config("--v or --n is required".into())),
            };
            let full = v * (v - 1) / 2;
            // smallest block split that lets m workers share the v blocks evenly
            let split = (1..=v)
                .find(|s| v % s == 0 && (v * s) % a.m == 0)
                .ok_or_else(|| HarnessError::Config(format!("{} workers cannot share a v = {v} frame", a.m)))?;
            FrameSpec::Steiner { v, columns: a.n.filter(|&n| n < full), split_blocks: split, seed: a.seed }
        }
        FrameArg::Haar => {
            let n = need(a.n, "n")?;
            FrameSpec::HaarSubsampled { order: n * a.beta as usize, beta: a.beta, seed: a.seed }
        }
        FrameArg::Hadamard => FrameSpec::HadamardRandomized { n: need(a.n, "n")?, beta: a.beta, seed: a.seed },
        FrameArg::Gaussian => FrameSpec::Gaussian { n: need(a.n, "n")?, beta: a.beta, seed: a.seed },
        FrameArg::Identity => FrameSpec::Identity { n: need(a.n, "n")? },
        FrameArg::Replication => FrameSpec::Replication { n: need(a.n, "n")?, beta: a.beta },
    };
    let frame = spec.build::<f64>(a.m)?;
    let k = match (a.k, a.eta) {
        (Some(k), _) => k,
        (None, Some(eta)) => {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(HarnessError::Config(format!("eta = {eta} outside (0, 1]")));
            }
            (eta * a.m as f64).round() as usize
        }
        (None, None) => a.m,
    };
    let mode = match a.mode {
        ModeArg::Exhaustive => BripMode::Exhaustive,
        ModeArg::Sampled => BripMode::Sampled { trials: a.trials, seed: a.seed },
    };
    let r = brip_estimate(&frame, k, &mode)?;
    let json = SpectrumJson {
        eta: r.eta,
        epsilon: r.epsilon,
        min_eig: r.min_eig,
        max_eig: r.max_eig,
        subsets: r.subsets_examined,
        mode: r.mode_label(),
    };
    if let Some(path) = &a.dense_export {
        let dense = frame.to_dense();
        write_atomic_with(path, |w| {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            for i in 0..dense.rows() {
                out.write_record(dense.row(i).iter().map(|v| format!("{v:e}")))?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    if let Some(path) = &a.container {
        let mut bytes = Vec::new();
        write_frame(&frame, &mut bytes)?;
        write_atomic(path, &bytes)?;
    }
    match &a.out {
        Some(path) => write_json(path, &json),
        None => {
            println!("{}", serde_json::to_string_pretty(&json)?);
            Ok(())
        }
    }
}

fn run(path: &Path, summary: bool) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    let (dir, name) = out_base(&cfg, "trace");
    let mut fault = None;
    for rep in 0..cfg.repetitions {
        let o = run_config(&cfg, rep, false)?;
        let file = if cfg.repetitions == 1 { format!("{name}.csv") } else { format!("{name}.rep{rep}.csv") };
        write_atomic(&dir.join(file), &trace_csv(&o.trace)?)?;
        if summary {
            println!("{}", serde_json::to_string(&o.trace.summary())?);
        }
        fault = fault.or(o.trace.fault.clone());
    }
    match fault {
        Some(f) => Err(HarnessError::Numerical(f)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct BenchRow {
    scheme: String,
    repetition: usize,
    iterations: usize,
    total_sim_time: f64,
    mean_iteration_sim_time: f64,
    wall_seconds: f64,
    final_objective: f64,
}

fn bench(path: &Path) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(path)?;
    let (dir, name) = out_base(&cfg, "bench");
    let mut rows = Vec::new();
    for rep in 0..cfg.repetitions {
        for o in run_schemes(&cfg, rep)? {
            let s = o.trace.summary();
            rows.push(BenchRow {
                scheme: o.name,
                repetition: rep,
                iterations: s.iterations,
                total_sim_time: s.total_sim_time,
                mean_iteration_sim_time: s.total_sim_time / s.iterations.max(1) as f64,
                wall_seconds: o.wall_seconds,
                final_objective: s.final_objective,
            });
        }
    }
    write_json(&dir.join(format!("{name}.json")), &rows)
}

fn compare(path: &Path, only: Option<Vec<String>>) -> Result<(), HarnessError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if cfg.schemes.is_empty() {
        return Err(HarnessError::Config("compare needs a schemes list".into()));
    }
    if let Some(names) = only {
        let mut picked = Vec::new();
        for n in &names {
            let s = cfg.schemes.iter().find(|s| &s.name == n).ok_or_else(|| HarnessError::Config(format!("no scheme named {n}")))?;
            picked.push(s.clone());
        }
        cfg.schemes = picked;
    }
    let (dir, name) = out_base(&cfg, "compare");
    for rep in 0..cfg.repetitions {
        let outcomes = run_schemes(&cfg, rep)?;
        let report = compare_report(&cfg, &outcomes, rep)?;
        let suffix = if cfg.repetitions == 1 { String::new() } else { format!(".rep{rep}") };
        for o in &outcomes {
            write_atomic(&dir.join(format!("{name}.{}{suffix}.csv", o.name)), &trace_csv(&o.trace)?)?;
        }
        write_json(&dir.join(format!("{name}{suffix}.json")), &report)?;
    }
    Ok(())
}
