mod config;
mod data;
mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ppls::em::{fit_extended_em, fit_original_em};
use ppls::linalg::RngStream;
use ppls::model::{sample_dataset_with, ConstraintPolicy, PplsParams};
use ppls::params_io::{parse_params, write_params};
use ppls::study::{aggregates_to_csv, run_study_with_threads, Scenario};
use serde_json::json;

use config::{ModelKind, RunConfig, ScenarioName};
use manifest::{write_atomic, RunManifest, SNR_CONVENTION};

/// Stream of the seed used by `fit` (only consulted by random starts).
const FIT_STREAM: u64 = 0;
/// Stream of the seed used by `sample`.
const SAMPLE_STREAM: u64 = 1;

#[derive(Parser)]
#[command(
    name = "ppls",
    version,
    about = "Probabilistic PLS estimation and simulation studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation study and write results.csv, aggregates.csv, config.toml and manifest.json.
    Study(StudyArgs),
    /// Fit a model to X and Y data files and write params.txt and emtrace.csv.
    Fit(FitArgs),
    /// Check a parameter file against its model's constraints.
    Validate(ValidateArgs),
    /// Draw X and Y data files from a parameter file.
    Sample(SampleArgs),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "ppls-output")]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioName>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Sample size; repeat for several.
    #[arg(long = "n", value_name = "N")]
    sample_sizes: Vec<usize>,
    /// Number of latent components.
    #[arg(long)]
    r: Option<usize>,
    /// Worker threads; defaults to all available cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Headerless CSV of the x block, one observation per row.
    #[arg(long, value_name = "PATH")]
    x: PathBuf,
    /// Headerless CSV of the y block, rows matching `--x`.
    #[arg(long, value_name = "PATH")]
    y: PathBuf,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Parameter file as written by `fit`.
    params: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Parameter file to sample from.
    #[arg(long, value_name = "PATH")]
    params: PathBuf,
    #[arg(long = "n", value_name = "N")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "DIR", default_value = "ppls-output")]
    out: PathBuf,
}

/// Outcome of a command that ran to completion.
enum Verdict {
    Ok,
    /// The input was read but failed its checks.
    Rejected,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Study(a) => study(a).map(|_| Verdict::Ok),
        Command::Fit(a) => fit(a).map(|_| Verdict::Ok),
        Command::Validate(a) => validate(a),
        Command::Sample(a) => sample(a).map(|_| Verdict::Ok),
    };
    match result {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::Rejected) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Write the manifest as running, do the work, then record how it ended.
fn tracked(
    dir: &Path,
    mut manifest: RunManifest,
    work: impl FnOnce(&mut RunManifest) -> Result<()>,
) -> Result<()> {
    manifest.write(dir)?;
    let config = manifest.config.to_toml();
    let outcome =
        put(dir, &mut manifest, "config.toml", &config).and_then(|()| work(&mut manifest));
    manifest.finish(&outcome);
    manifest.write(dir)?;
    outcome
}

fn put(dir: &Path, manifest: &mut RunManifest, name: &str, contents: &str) -> Result<()> {
    write_atomic(&dir.join(name), contents)?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn study(args: StudyArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(s) = args.scenario {
        cfg.study.scenario = s;
    }
    if let Some(n) = args.replicates {
        cfg.study.replicates = n;
    }
    if !args.sample_sizes.is_empty() {
        cfg.study.sample_sizes = args.sample_sizes;
    }
    if let Some(r) = args.r {
        cfg.study.r = r;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let study_cfg = cfg.study_config()?;
    let threads = cfg.thread_count()?;
    let scenario: Scenario = cfg.study.scenario.into();

    let dir = args.common.out;
    create_out_dir(&dir)?;
    tracked(&dir, RunManifest::start("study", &cfg, threads), |m| {
        let result = run_study_with_threads(&study_cfg, scenario, threads)?;
        let aggregates = result.aggregates()?;
        put(&dir, m, "results.csv", &result.to_csv())?;
        put(&dir, m, "aggregates.csv", &aggregates_to_csv(&aggregates))?;
        m.summary = json!({
            "scenario": scenario.name(),
            "rows": result.rows.len(),
            "failed_rows": result.failed_rows(),
            "acceptance_rate": { scenario.name(): result.acceptance_rate() },
            "noise_draws": result.draws.iter().sum::<usize>(),
            "warnings": result.warnings,
            "snr_convention": SNR_CONVENTION,
        });
        eprintln!(
            "{}: {} rows, {} failed, written to {}",
            scenario.name(),
            result.rows.len(),
            result.failed_rows(),
            dir.display()
        );
        Ok(())
    })
}

fn fit(args: FitArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(model) = args.model {
        cfg.fit.model = model;
    }
    if let Some(r) = args.r {
        cfg.fit.r = r;
    }
    cfg.check_fit()?;
    let em = cfg.em_config()?;
    let x = data::read_matrix(&args.x)?;
    let y = data::read_matrix(&args.y)?;
    if x.nrows() != y.nrows() {
        bail!(
            "{} has {} rows but {} has {}",
            args.x.display(),
            x.nrows(),
            args.y.display(),
            y.nrows()
        );
    }

    let dir = args.common.out;
    create_out_dir(&dir)?;
    tracked(&dir, RunManifest::start("fit", &cfg, 1), |m| {
        m.summary = json!({
            "x": args.x.display().to_string(),
            "y": args.y.display().to_string(),
            "n": x.nrows(),
            "p": x.ncols(),
            "q": y.ncols(),
        });
        let mut rng = RngStream::new(cfg.seed, FIT_STREAM);
        let r = cfg.fit.r;
        let (params, trace) = match cfg.fit.model {
            ModelKind::Original => {
                let (p, t) = fit_original_em(&x, &y, r, &em, &mut rng)?;
                (PplsParams::Original(p), t)
            }
            ModelKind::Extended => {
                let (p, t) = fit_extended_em(&x, &y, r, &em, &mut rng)?;
                (PplsParams::Extended(p), t)
            }
        };
        put(&dir, m, "params.txt", &write_params(&params))?;
        put(&dir, m, "emtrace.csv", &trace.to_csv())?;
        m.summary["iterations"] = json!(trace.rows.len());
        m.summary["converged"] = json!(trace.converged);
        m.summary["final_loglik"] = json!(trace.final_loglik());
        m.summary["max_relative_decrease"] = json!(trace.max_relative_decrease());
        eprintln!(
            "fitted {} model with r = {r} in {} iterations (converged: {})",
            match cfg.fit.model {
                ModelKind::Original => "original",
                ModelKind::Extended => "extended",
            },
            trace.rows.len(),
            trace.converged
        );
        Ok(())
    })
}

fn read_params(path: &Path) -> Result<PplsParams> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_params(&text).with_context(|| format!("invalid parameter file {}", path.display()))
}

fn validate(args: ValidateArgs) -> Result<Verdict> {
    let params = read_params(&args.params)?;
    let (w, c) = params.weights();
    let kind = match params {
        PplsParams::Original(_) => "original",
        PplsParams::Extended(_) => "extended",
    };
    let report = params.validate();
    if report.is_empty() {
        println!(
            "{}: valid {kind} parameters (p = {}, q = {}, r = {})",
            args.params.display(),
            w.nrows(),
            c.nrows(),
            params.r()
        );
        return Ok(Verdict::Ok);
    }
    eprintln!(
        "error: {} violates {} constraint(s) of the {kind} model",
        args.params.display(),
        report.violations().len()
    );
    for v in report.violations() {
        eprintln!("  {} {}", v.constraint, v.detail);
    }
    Ok(Verdict::Rejected)
}

fn sample(args: SampleArgs) -> Result<()> {
    let params = read_params(&args.params)?;
    let mut rng = RngStream::new(args.seed, SAMPLE_STREAM);
    let warnings = ConstraintPolicy::AllowUnordered.enforce(params.validate())?;
    if !warnings.is_empty() {
        eprintln!("warning: {warnings}");
    }
    let data = sample_dataset_with(&params, args.n, &mut rng, ConstraintPolicy::AllowUnordered)?;
    create_out_dir(&args.out)?;
    data::write_matrix(&args.out.join("x.csv"), &data.x)?;
    data::write_matrix(&args.out.join("y.csv"), &data.y)?;
    Ok(())
}
