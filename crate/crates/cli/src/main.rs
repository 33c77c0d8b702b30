//! Batch front end: simulate benchmark data, estimate the conditional CDF,
//! run the bounds loop, and render solution-path charts.

mod config;
mod render;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use pathbounds::bounds::{nested_restriction_check, Checkpoint, Runner};
use pathbounds::cdf::{cdf_field, cv_bandwidth, CdfField};
use pathbounds::error::{Error, Result};
use pathbounds::grid::{Dataset, Grid};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "pathbounds", version, about = "Partial-identification bounds via sampled counterfactual paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the configured two-stage model.
    Simulate(CommonArgs),
    /// Tabulate the smoothed conditional CDF and cache it.
    EstimateCdf(CommonArgs),
    /// Run the iterative bounds loop and write the solution path.
    Bounds(BoundsArgs),
    /// Solve min/max over one fixed pool and its shape-filtered subset.
    NestedCheck(CommonArgs),
    /// Re-render a stored trace CSV as an SVG chart.
    RenderTrace(RenderArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured penalty.
    #[arg(long)]
    lambda: Option<f64>,
    /// Override the configured dyadic grid order.
    #[arg(long)]
    grid_order: Option<u32>,
    /// Override the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Resume from a checkpoint file written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Trace CSV produced by the bounds command.
    #[arg(long)]
    trace: PathBuf,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
    /// Trailing-average window for the overlay curves.
    #[arg(long, default_value_t = 200)]
    window: usize,
}

/// Exit codes by error family; 1 is reserved for unexpected panics.
fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::MeshResolution { .. } => 2,
        Error::Io { .. } | Error::Csv(_) | Error::Json(_) | Error::Parse { .. }
        | Error::DegenerateAxis { .. } => 3,
        Error::Numeric(_) | Error::FilterInfeasible { .. } | Error::BandwidthSelection(_) => 4,
        Error::Capacity { .. } => 5,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("PATHBOUNDS_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    if let Err(err) = dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::EstimateCdf(args) => cmd_estimate_cdf(&args),
        Command::Bounds(args) => cmd_bounds(&args),
        Command::NestedCheck(args) => cmd_nested_check(&args),
        Command::RenderTrace(args) => cmd_render_trace(&args),
    }
}

fn out_dir(config: &RunConfig, args: &CommonArgs) -> Result<PathBuf> {
    let dir = args.out.clone().unwrap_or_else(|| config.output.dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    Ok(dir)
}

fn write_manifest(path: &Path, manifest: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path.display().to_string(), e))
}

fn resolved_seed(config: &RunConfig, args: &CommonArgs) -> u64 {
    args.seed.unwrap_or(config.solver.seed)
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let dir = out_dir(&config, args)?;
    let seed = resolved_seed(&config, args);
    let section = config.data.simulate.clone().unwrap_or_default();
    let spec = section.to_spec()?;
    let dataset = spec.generate(seed)?;
    let csv_path = dir.join("dataset.csv");
    dataset.to_csv(&csv_path)?;
    let manifest = serde_json::json!({
        "command": "simulate",
        "seed": seed,
        "spec": spec,
        "rows": dataset.len(),
        "outputs": [csv_path.display().to_string()],
    });
    write_manifest(&dir.join("simulate_manifest.json"), &manifest)?;
    println!("wrote {} rows to {}", dataset.len(), csv_path.display());
    Ok(())
}

fn load_dataset(config: &RunConfig, seed: u64) -> Result<Dataset> {
    match (&config.data.csv, &config.data.simulate) {
        (Some(path), _) => Dataset::from_csv(path, &config.data.columns()),
        (None, Some(section)) => section.to_spec()?.generate(seed),
        (None, None) => Err(Error::validation(
            "[data] needs either csv or a simulate section",
        )),
    }
}

/// Pick the bandwidth (fixed or cross-validated) and tabulate the field.
fn estimate_field(config: &RunConfig, data: &Dataset, grid: &Grid) -> Result<(CdfField, f64)> {
    let h = match (&config.cdf.candidates, config.cdf.bandwidth) {
        (Some(candidates), _) if !candidates.is_empty() => {
            cv_bandwidth(data, grid, candidates)?
        }
        (_, Some(h)) => h,
        _ => return Err(Error::validation("[cdf] needs bandwidth or candidates")),
    };
    Ok((cdf_field(data, grid, h)?, h))
}

fn cmd_estimate_cdf(args: &CommonArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let dir = out_dir(&config, args)?;
    let seed = resolved_seed(&config, args);
    let data = load_dataset(&config, seed)?;
    let grid = config.grid.build(args.grid_order)?;
    let (field, h) = estimate_field(&config, &data, &grid)?;
    let cache = config
        .cdf
        .cache
        .clone()
        .unwrap_or_else(|| dir.join("cdf.json"));
    field.save(&cache)?;
    let manifest = serde_json::json!({
        "command": "estimate-cdf",
        "seed": seed,
        "grid_order": grid.order(),
        "bandwidth": h,
        "records": data.len(),
        "fallback_slices": field.fallback_slices(),
        "outputs": [cache.display().to_string()],
    });
    write_manifest(&dir.join("estimate_manifest.json"), &manifest)?;
    println!(
        "estimated {}-cell field (h = {h}) into {}",
        field.values().len(),
        cache.display()
    );
    Ok(())
}

/// Load the cached field when it matches the requested grid, otherwise
/// estimate and (when a cache path is configured) store it.
fn obtain_field(config: &RunConfig, args: &CommonArgs, seed: u64) -> Result<CdfField> {
    let grid = config.grid.build(args.grid_order)?;
    if let Some(cache) = &config.cdf.cache {
        if cache.exists() {
            let field = CdfField::load(cache)?;
            if field.grid() == &grid {
                return Ok(field);
            }
            return Err(Error::validation(format!(
                "cached field in {} was built on a different grid",
                cache.display()
            )));
        }
    }
    let data = load_dataset(config, seed)?;
    let (field, _) = estimate_field(config, &data, &grid)?;
    if let Some(cache) = &config.cdf.cache {
        field.save(cache)?;
    }
    Ok(field)
}

fn cmd_bounds(args: &BoundsArgs) -> Result<()> {
    let config = RunConfig::load(&args.common.config)?;
    let dir = out_dir(&config, &args.common)?;
    let seed = resolved_seed(&config, &args.common);
    let field = obtain_field(&config, &args.common, seed)?;
    let solve_config = config.solve_config(args.common.seed, args.common.lambda)?;

    let mut runner = match &args.resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            Runner::from_checkpoint(solve_config.clone(), &field, ckpt)?
        }
        None => Runner::new(solve_config.clone(), &field)?,
    };
    if let Some(ckpt_path) = &config.output.checkpoint {
        runner.checkpoint_path = Some(ckpt_path.clone());
        runner.checkpoint_every = config.output.checkpoint_every;
    }
    let trace = runner.run()?;

    let csv_path = dir.join("trace.csv");
    let jsonl_path = dir.join("trace.jsonl");
    trace.write_csv(&csv_path)?;
    trace.write_jsonl(&jsonl_path)?;
    let mut outputs = vec![
        csv_path.display().to_string(),
        jsonl_path.display().to_string(),
    ];
    if config.output.emit_plots {
        let svg_path = dir.join("bounds.svg");
        let svg = render::render_trace(&trace, solve_config.window)?;
        std::fs::write(&svg_path, svg)
            .map_err(|e| Error::io(svg_path.display().to_string(), e))?;
        outputs.push(svg_path.display().to_string());
    }
    let trailing = trace.trailing_average(solve_config.window);
    let manifest = serde_json::json!({
        "command": "bounds",
        "seed": seed,
        "lambda": solve_config.lambda,
        "grid_order": field.grid().order(),
        "status": trace.status,
        "iterations": trace.records.len(),
        "trailing_lower": trailing.map(|t| t.0),
        "trailing_upper": trailing.map(|t| t.1),
        "outputs": outputs,
    });
    write_manifest(&dir.join("bounds_manifest.json"), &manifest)?;
    match trailing {
        Some((lo, hi)) => println!(
            "{:?} after {} iterations; trailing bounds [{lo:.4}, {hi:.4}]",
            trace.status,
            trace.records.len()
        ),
        None => println!("{:?} with empty trace", trace.status),
    }
    Ok(())
}

fn cmd_nested_check(args: &CommonArgs) -> Result<()> {
    let config = RunConfig::load(&args.config)?;
    let dir = out_dir(&config, args)?;
    let seed = resolved_seed(&config, args);
    let field = obtain_field(&config, args, seed)?;
    let solve_config = config.solve_config(args.seed, args.lambda)?;
    let report = nested_restriction_check(&solve_config, &field)?;
    let manifest = serde_json::json!({
        "command": "nested-check",
        "seed": seed,
        "report": report,
    });
    write_manifest(&dir.join("nested_manifest.json"), &manifest)?;
    println!(
        "pool of {}: functionals [{:.4}, {:.4}], program optima ({:.4}, {:.4})",
        report.pool_size,
        report.full.lower_functional,
        report.full.upper_functional,
        report.full.lower_objective,
        report.full.upper_objective
    );
    match report.subset {
        Some(s) => println!(
            "subset of {}: functionals [{:.4}, {:.4}], program optima ({:.4}, {:.4})",
            report.subset_size,
            s.lower_functional,
            s.upper_functional,
            s.lower_objective,
            s.upper_objective
        ),
        None => println!("subset of 0: no shape-conforming columns in the pool"),
    }
    Ok(())
}

fn cmd_render_trace(args: &RenderArgs) -> Result<()> {
    let trace = pathbounds::bounds::BoundsTrace::read_csv(&args.trace)?;
    let svg = render::render_trace(&trace, args.window)?;
    std::fs::write(&args.out, svg)
        .map_err(|e| Error::io(args.out.display().to_string(), e))?;
    println!("rendered {} records to {}", trace.records.len(), args.out.display());
    Ok(())
}
