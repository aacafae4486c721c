//! The `fwda` command line.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use fwda_core::{fit_with_report, FitConfig, FwdaModel, GlassoOptions, Variant};
use serde_json::json;

use crate::data_io::{
    generate_synthetic, load_csv, load_features, save_csv, ColumnRef, SyntheticData, SyntheticSpec,
};
use crate::error::{Error, Result};
use crate::eval::{
    convergence_study, run_experiment, timing_comparison, ExperimentConfig, Integrand,
};
use crate::persist::{load_model, save_model};

#[derive(Debug, Parser)]
#[command(name = "fwda", version, about = "Fast Wishart discriminant analysis")]
pub struct Cli {
    /// No human-readable text on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a labeled CSV file.
    Fit(FitArgs),
    /// Score a CSV of feature rows with a saved model.
    Predict(PredictArgs),
    /// Write a synthetic two-Gaussian dataset and its ground truth.
    Synth(SynthArgs),
    /// Run a repeated-split experiment described by a JSON config.
    Eval(EvalArgs),
    /// Measure how the ensemble score converges as the ensemble grows.
    Converge(ConvergeArgs),
    /// Time lazy sampling against per-input resampling.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Header name or 0-based index of the label column.
    #[arg(long, default_value = "label")]
    pub label_column: ColumnRef,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Ensemble size.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = Variant::Fwda)]
    pub variant: Variant,
    /// Graphical lasso convergence tolerance.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Column to ignore; by default a header column named `label` is ignored.
    #[arg(long)]
    pub label_column: Option<ColumnRef>,
    /// Output CSV; standard output if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 40)]
    pub n_per_class: usize,
    /// Distance between the class means along the first axis.
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    /// Off-diagonal of the banded true precision.
    #[arg(long, default_value_t = 0.4)]
    pub rho: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth JSON; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-run rows as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    /// Saved model; if omitted one is fitted on synthetic data.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Test points CSV (a `label` column is ignored); synthetic if omitted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "10,40,160,640,2560")]
    pub grid: Vec<usize>,
    /// Reference ensemble size as a multiple of the largest grid point.
    #[arg(long, default_value_t = 20)]
    pub reference_factor: usize,
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 50)]
    pub points: usize,
    #[arg(long, default_value_t = 5)]
    pub dim: usize,
    /// Training samples per class for the synthetic model.
    #[arg(long, default_value_t = 4)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Clamp member contributions to [0, 1].
    #[arg(long)]
    pub clamp: bool,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Saved model; if omitted one is fitted on synthetic data.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    pub dim: usize,
    #[arg(long, default_value_t = 40)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Ensemble size of the fitted model.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value_t = 400)]
    pub points: usize,
    /// Fresh draws per input for the resampling path.
    #[arg(long, default_value_t = 1000)]
    pub oracle_m: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    configure_threads();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("FWDA_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Synth(a) => cmd_synth(a, cli.quiet),
        Command::Eval(a) => cmd_eval(a, cli.quiet),
        Command::Converge(a) => cmd_converge(a),
        Command::Bench(a) => cmd_bench(a, cli.quiet),
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let start = Instant::now();
    let data = load_csv(&a.input, &a.label_column)?;
    let config = FitConfig {
        lambda: a.lambda,
        ensemble_size: a.samples,
        seed: a.seed,
        variant: a.variant,
        glasso: GlassoOptions {
            tol: a.tol,
            max_iter: a.max_iter,
        },
        ..FitConfig::default()
    };
    let (model, report) = fit_with_report(&data, &config)?;
    save_model(&model, &a.out)?;
    print_json(&json!({
        "n": report.n,
        "p": report.dim,
        "dof_requested": report.dof_requested,
        "dof": report.dof,
        "kkt_residual": report.kkt_residual,
        "outer_iterations": report.outer_iterations,
        "converged": report.converged,
        "ridge_applied": report.ridge_applied,
        "wall_seconds": start.elapsed().as_secs_f64(),
    }));
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let table = load_features(&a.input, a.label_column.as_ref())?;
    if table.dim != model.dim() {
        return Err(Error::ShapeError {
            what: format!(
                "feature count (model has {}, input has {})",
                model.dim(),
                table.dim
            ),
            expected: model.dim(),
            found: table.dim,
        });
    }
    let predictions = model.predict(table.rows.iter().map(Vec::as_slice))?;
    let mut text = String::from("row_index,score,label\n");
    for (i, p) in predictions.iter().enumerate() {
        text.push_str(&format!("{i},{:?},{}\n", p.score, p.label.as_i8()));
    }
    match &a.out {
        Some(path) => write_text(path, &text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn truth_json(synth: &SyntheticData, spec: &SyntheticSpec) -> serde_json::Value {
    json!({
        "dim": spec.dim,
        "n_per_class": spec.n_per_class,
        "rho": spec.rho,
        "mean_separation": spec.mean_separation,
        "seed": spec.seed,
        "precision": synth.true_precision.to_row_major(),
        "pos_mean": synth.pos_mean,
        "neg_mean": synth.neg_mean,
        "bayes_accuracy": synth.bayes_accuracy(),
    })
}

fn cmd_synth(a: &SynthArgs, quiet: bool) -> Result<()> {
    let spec = SyntheticSpec {
        dim: a.dim,
        n_per_class: a.n_per_class,
        true_precision: None,
        rho: a.rho,
        mean_separation: a.separation,
        seed: a.seed,
    };
    let synth = generate_synthetic(&spec)?;
    save_csv(&synth.data, &a.out)?;
    let truth_path = a.truth.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".truth.json");
        p.into()
    });
    write_text(&truth_path, &format!("{}\n", truth_json(&synth, &spec)))?;
    if !quiet {
        println!(
            "wrote {} rows to {} and ground truth to {}",
            synth.data.len(),
            a.out.display(),
            truth_path.display()
        );
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, quiet: bool) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidConfig(format!("{}: {e}", a.config.display())))?;
    let report = run_experiment(&config)?;
    let json = serde_json::to_string(&report).expect("report serializes");
    write_text(&a.out, &format!("{json}\n"))?;
    if let Some(path) = &a.csv {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        report.write_csv(BufWriter::new(file))?;
    }
    if !quiet {
        for s in &report.summary {
            println!(
                "{:<28} n={:<5} accuracy {:.4} ± {:.4}  f1 {:.4} ± {:.4}",
                s.method, s.train_per_class, s.mean_accuracy, s.sd_accuracy, s.mean_f1, s.sd_f1
            );
        }
    }
    Ok(())
}

/// Fits a model on a fresh synthetic draw and returns it with held-out
/// points from the same distribution.
fn synthetic_model(
    dim: usize,
    n_per_class: usize,
    n_points: usize,
    lambda: f64,
    ensemble_size: usize,
    seed: u64,
) -> Result<(FwdaModel, Vec<Vec<f64>>)> {
    let spec = |n, s| SyntheticSpec {
        dim,
        n_per_class: n,
        seed: s,
        ..SyntheticSpec::default()
    };
    let train = generate_synthetic(&spec(n_per_class, seed))?.data;
    let model = fwda_core::fit(
        &train,
        &FitConfig {
            lambda,
            ensemble_size,
            seed,
            ..FitConfig::default()
        },
    )?;
    let test = generate_synthetic(&spec(n_points.div_ceil(2), seed.wrapping_add(1)))?.data;
    let points = test.rows().take(n_points).map(<[f64]>::to_vec).collect();
    Ok((model, points))
}

fn cmd_converge(a: &ConvergeArgs) -> Result<()> {
    let (mut model, mut points) =
        synthetic_model(a.dim, a.n_per_class, a.points, a.lambda, 1, a.seed)?;
    if let Some(path) = &a.model {
        model = load_model(path)?;
    }
    if let Some(path) = &a.input {
        points = load_features(path, None)?.rows;
    }
    let max = a.grid.iter().copied().max().unwrap_or(0);
    let seeds: Vec<u64> = (0..a.seeds)
        .map(|s| a.seed.wrapping_add(1000 + s))
        .collect();
    let integrand = if a.clamp {
        Integrand::Clamped
    } else {
        Integrand::Raw
    };
    let report = convergence_study(
        &model,
        &points,
        &a.grid,
        max * a.reference_factor,
        &seeds,
        integrand,
    )?;
    let json = serde_json::to_string(&report).expect("report serializes");
    match &a.out {
        Some(path) => write_text(path, &format!("{json}\n")),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn cmd_bench(a: &BenchArgs, quiet: bool) -> Result<()> {
    let (mut model, points) =
        synthetic_model(a.dim, a.n_per_class, a.points, a.lambda, a.samples, a.seed)?;
    if let Some(path) = &a.model {
        model = load_model(path)?;
        if model.dim() != a.dim {
            return Err(Error::ShapeError {
                what: format!(
                    "model dimension vs --dim (model has {}, --dim is {})",
                    model.dim(),
                    a.dim
                ),
                expected: a.dim,
                found: model.dim(),
            });
        }
    }
    let report = timing_comparison(&model, &points, a.oracle_m, a.seed)?;
    if !quiet {
        println!("{:<34}{:>14}", "path", "seconds");
        println!(
            "{:<34}{:>14.6}",
            format!("lazy (m={}, one ensemble)", report.ensemble_size),
            report.lazy_total_seconds
        );
        println!(
            "{:<34}{:>14.6}",
            format!("adaptive (m={} per input)", report.oracle_m),
            report.adaptive_total_seconds
        );
        println!("{:<34}{:>14.1}", "ratio", report.ratio);
    }
    print_json(&serde_json::to_value(&report).expect("report serializes"));
    Ok(())
}
