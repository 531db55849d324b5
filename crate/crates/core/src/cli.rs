//! The `redisgrowth` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::config::{Config, SEED_ENV};
use crate::error::{Error, Result};
use crate::output::{self, Checkpoint};
use crate::report::{demo_redistribution, stats_report, trajectory_records};
use crate::sweep::{assemble_surfaces, SweepRunner};

#[derive(Debug, Parser)]
#[command(
    name = "redisgrowth",
    version,
    about = "Redistribution on risky human capital"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Override a setting by dotted key, e.g. `sweep.samples=20`. Repeatable.
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Base seed; beats the config file and the environment.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One redistribution round under every scheme.
    DemoRedis(OutArgs),
    /// Trajectories of all schemes on shared draws, with analytic guides.
    Trajectories(OutArgs),
    /// Growth surfaces over the tax and admin rate grid.
    Sweep(SweepArgs),
    /// Log-normal parameters, tail probabilities and growth condition.
    Stats(OutArgs),
    /// Recompute curves and boundaries from an existing surfaces file.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; prints to stdout when omitted.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, short = 'o', default_value = "sweep-out")]
    pub out: PathBuf,
    /// Worker threads (`sweep.threads`).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Stop after computing this many new cells; rerun to resume.
    #[arg(long)]
    pub max_cells: Option<usize>,
    /// Discard an existing checkpoint instead of resuming it.
    #[arg(long)]
    pub no_resume: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Surfaces file written by `sweep`.
    #[arg(long)]
    pub surfaces: PathBuf,
    #[arg(long, short = 'o')]
    pub out: PathBuf,
}

impl Cli {
    pub fn resolve_config(&self) -> Result<Config> {
        let env_seed = std::env::var(SEED_ENV).ok();
        let mut config = Config::resolve(
            self.global.config.as_deref(),
            env_seed.as_deref(),
            &self.global.overrides,
        )?;
        if let Some(seed) = self.global.seed {
            config.seed = seed;
        }
        if let Command::Sweep(args) = &self.command {
            if args.threads.is_some() {
                config.sweep.threads = args.threads;
            }
        }
        Ok(config)
    }
}

fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<Option<PathBuf>> {
    use std::io::Write;
    match out {
        Some(dir) => {
            output::ensure_dir(dir)?;
            let path = dir.join(name);
            output::write_atomic(&path, bytes)?;
            Ok(Some(path))
        }
        None => {
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| Error::io("<stdout>", e))?;
            Ok(None)
        }
    }
}

fn finish(out: Option<&Path>, command: &str, config: &Config, files: &[PathBuf]) -> Result<()> {
    if let Some(dir) = out {
        let manifest = output::finish_run(dir, command, config, files)?;
        info!("wrote {}", manifest.display());
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = cli.resolve_config()?;
    match &cli.command {
        Command::DemoRedis(args) => demo(&config, args.out.as_deref()),
        Command::Trajectories(args) => trajectories(&config, args.out.as_deref()),
        Command::Stats(args) => stats(&config, args.out.as_deref()),
        Command::Sweep(args) => sweep(&config, args),
        Command::Analyze(args) => analyze(&config, args),
    }
}

fn demo(config: &Config, out: Option<&Path>) -> Result<()> {
    let c = &config.demo;
    let demo = demo_redistribution(&c.incomes()?, c.tax_rate, c.admin_rate)?;
    let mut files = Vec::new();
    match out {
        Some(_) => {
            files.extend(emit(
                out,
                "redistribution.csv",
                &output::redistribution_csv(&demo)?,
            )?);
            files.extend(emit(
                out,
                "redistribution.json",
                &output::json_bytes(&demo)?,
            )?);
        }
        None => {
            println!(
                "Y = {}  a = {}  b = {}  pg = {}  gi = {}  c_fee = {}  c_max = {}",
                demo.total_income,
                demo.tax_rate,
                demo.admin_rate,
                demo.public_good,
                demo.government_income,
                demo.fee,
                demo.max_threshold
            );
            emit(None, "", &output::redistribution_csv(&demo)?)?;
        }
    }
    finish(out, "demo-redis", config, &files)
}

fn trajectories(config: &Config, out: Option<&Path>) -> Result<()> {
    let c = &config.trajectories;
    let records = trajectory_records(
        c.agents,
        c.periods,
        c.tax_rate,
        c.admin_rate,
        &c.eta.resolve()?,
        config.seed,
    )?;
    let files: Vec<PathBuf> = emit(
        out,
        "trajectories.csv",
        &output::trajectories_csv(&records)?,
    )?
    .into_iter()
    .collect();
    finish(out, "trajectories", config, &files)
}

fn stats(config: &Config, out: Option<&Path>) -> Result<()> {
    let report = stats_report(&config.stats.eta.resolve()?, &config.stats.times)?;
    let files: Vec<PathBuf> = emit(out, "stats.json", &output::json_bytes(&report)?)?
        .into_iter()
        .collect();
    finish(out, "stats", config, &files)
}

fn sweep(config: &Config, args: &SweepArgs) -> Result<()> {
    let grid = config.sweep.grid(config.seed)?;
    output::ensure_dir(&args.out)?;
    let cp_path = args.out.join(output::CHECKPOINT_FILE);
    let (mut checkpoint, done) = if args.no_resume {
        (Checkpoint::create(&cp_path, &grid)?, Default::default())
    } else {
        let (cp, done, torn) = Checkpoint::resume(&cp_path, &grid)?;
        if torn > 0 {
            warn!("dropped an incomplete final checkpoint record ({torn} bytes)");
        }
        (cp, done)
    };
    let total = grid.cell_count();
    info!(
        "sweep: {total} cells, {} already done, {} threads",
        done.len(),
        config
            .sweep
            .threads
            .map_or_else(|| "default".to_string(), |n| n.to_string())
    );
    let step = (total / 20).max(1);
    let mut seen = done.len();
    let outcome = SweepRunner::new(&grid)
        .threads(config.sweep.threads)
        .chunk(config.sweep.chunk)
        .limit(args.max_cells)
        .run(done, |key, summary| {
            checkpoint.append(key, summary)?;
            seen += 1;
            if seen % step == 0 {
                info!("{seen}/{total} cells");
            }
            Ok(())
        })?;
    checkpoint.sync()?;
    if !outcome.complete {
        info!(
            "stopped after {} new cells ({}/{total}); rerun to resume",
            outcome.computed,
            outcome.cells.len()
        );
        return Ok(());
    }
    let surfaces = assemble_surfaces(&grid, &outcome.cells)?;
    let surfaces_path = args.out.join(output::SURFACES_FILE);
    output::write_atomic(&surfaces_path, &output::surfaces_csv(&surfaces)?)?;
    let analysis = output::analyze(&surfaces, &config.analysis)?;
    let mut files = vec![surfaces_path];
    files.extend(output::write_analysis(&args.out, &surfaces, &analysis)?);
    finish(Some(&args.out), "sweep", config, &files)?;
    check_degenerate(&surfaces)
}

fn analyze(config: &Config, args: &AnalyzeArgs) -> Result<()> {
    let surfaces = output::read_surfaces(&args.surfaces)?;
    output::ensure_dir(&args.out)?;
    let analysis = output::analyze(&surfaces, &config.analysis)?;
    let files = output::write_analysis(&args.out, &surfaces, &analysis)?;
    finish(Some(&args.out), "analyze", config, &files)?;
    check_degenerate(&surfaces)
}

fn check_degenerate(surfaces: &[crate::GrowthSurface]) -> Result<()> {
    let cells: usize = surfaces.iter().map(|s| s.cells.len()).sum();
    let missing: usize = surfaces.iter().map(|s| s.missing_cells()).sum();
    if missing == cells {
        return Err(Error::Degenerate(format!(
            "all {cells} cells lack a finite growth estimate"
        )));
    }
    if missing > 0 {
        warn!("{missing} of {cells} cells lack a finite growth estimate");
    }
    Ok(())
}
