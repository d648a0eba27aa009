//! `sensorgrid` command-line entry point.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 estimation did not converge.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sensorgrid::array::stochastic_load;
use sensorgrid::assembly::{assign, repeated_assembly, sequence_moves};
use sensorgrid::config::RunConfig;
use sensorgrid::dataset::{sha256_hex, write_atomic_with, Dataset};
use sensorgrid::estimate::report::Analysis;
use sensorgrid::rng;

#[derive(Parser)]
#[command(name = "sensorgrid", version, about = "Tweezer-array Ramsey magnetometer simulator and estimator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; paper defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the array experiment and write the shot dataset.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Add hidden-truth columns to the dataset.
        #[arg(long)]
        diagnostic_truth: bool,
    },
    /// Fit a dataset and write field map, gradients and summary.
    Estimate {
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Plan and run repeated sub-array assembly.
    Rearrange {
        #[command(flatten)]
        common: Common,
    },
    /// Scanning-probe run over the configured positions, with fits.
    Scan {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        diagnostic_truth: bool,
    },
    /// Print the default configuration.
    DefaultConfig,
}

enum Failure {
    Config(anyhow::Error),
    Data(anyhow::Error),
    NotConverged(String),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Data(_) => 3,
            Failure::NotConverged(_) => 4,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e:#}"),
            Failure::Data(e) => write!(f, "data error: {e:#}"),
            Failure::NotConverged(m) => write!(f, "estimation did not converge: {m}"),
            Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

fn io<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Io(e.into())
}

fn load_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(|e| Failure::Config(anyhow::Error::new(e).context(p.display().to_string())))?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    write_atomic_with(&path, |w| w.write_all(text.as_bytes()))
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io)?;
    Ok(path)
}

fn write_dataset(dir: &Path, name: &str, ds: &Dataset) -> Result<(PathBuf, String), Failure> {
    let text = ds.to_text();
    let path = write_text(dir, name, &text)?;
    Ok((path, sha256_hex(text.as_bytes())))
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(io)
}

fn simulate(common: &Common, diagnostic: bool) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let exp = cfg.experiment().map_err(|e| Failure::Config(e.into()))?;
    prepare_out(&common.out)?;
    let ds = exp.run_experiment(&cfg.cycle_plan(), cfg.seed, &cfg.hash(), common.jobs, diagnostic);
    let (path, hash) = write_dataset(&common.out, &cfg.output.dataset, &ds)?;
    println!("wrote {} ({} records, sha256 {hash})", path.display(), ds.records.len());
    Ok(())
}

fn write_analysis(dir: &Path, cfg: &RunConfig, a: &Analysis) -> Result<(), Failure> {
    for (name, text) in [
        (&cfg.output.field_map, a.map_table()),
        (&cfg.output.gradients, a.gradient_table()),
        (&cfg.output.summary, a.summary()),
    ] {
        let p = write_text(dir, name, &text)?;
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn estimate(dataset: &Path, common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let bytes = std::fs::read(dataset)
        .with_context(|| format!("reading {}", dataset.display()))
        .map_err(Failure::Data)?;
    let ds = Dataset::read_from(bytes.as_slice())
        .map_err(|e| Failure::Data(anyhow::Error::new(e).context(dataset.display().to_string())))?;
    let analysis = Analysis::run(&ds, &sha256_hex(&bytes), cfg.projection(), common.jobs)
        .map_err(|e| Failure::Data(anyhow::Error::new(e).context(dataset.display().to_string())))?;
    prepare_out(&common.out)?;
    write_analysis(&common.out, &cfg, &analysis)?;
    print!("{}", analysis.summary());
    if analysis.failed() {
        return Err(Failure::NotConverged("no pixel produced a converged on/off fit pair".into()));
    }
    Ok(())
}

fn rearrange(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let pattern = cfg.pattern().map_err(|e| Failure::Config(e.into()))?;
    let setup = cfg.assembly_setup();
    let geom = setup.geom;
    let mut rng = rng::stream(cfg.seed, rng::ASSEMBLY_STREAM);

    let occ = stochastic_load(&geom, setup.p_load, &mut rng);
    let matching = assign(&geom, &occ, &pattern);
    let plan = sequence_moves(&geom, &matching, &occ, setup.blocking_radius)
        .map_err(|e| Failure::Config(anyhow::Error::new(e).context("first-round move plan")))?;
    let history = repeated_assembly(&setup, &pattern, cfg.assembly.rounds, &mut rng);

    let mut out = format!("# sensorgrid rearrange\n# config_hash={}\n# seed={}\n", cfg.hash(), cfg.seed);
    let _ = writeln!(out, "# first round: loaded={} targets={} unfilled={} cost_m={:e}", occ.count(), pattern.len(), matching.unfilled.len(), matching.cost);
    out.push_str(&plan.trace(&geom));
    let _ = writeln!(out, "# rounds={} duty_cycle={} mean_fill={}", history.rounds.len(), history.duty_cycle(), history.mean_fill_fraction());
    match history.first_full_round() {
        Some(r) => {
            let _ = writeln!(out, "# first_full_round={r}");
        }
        None => out.push_str("# first_full_round=none\n"),
    }
    out.push_str("# columns: round loaded moves lost filled full unreachable\n");
    for (i, r) in history.rounds.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", i + 1, r.loaded, r.moves, r.lost, r.filled, r.full as u8, r.unreachable as u8);
    }
    prepare_out(&common.out)?;
    let p = write_text(&common.out, "rearrange.tsv", &out)?;
    println!("wrote {}", p.display());
    println!("moves={} duty_cycle={:.3}", plan.moves.len(), history.duty_cycle());
    Ok(())
}

fn scan(common: &Common, diagnostic: bool) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let exp = cfg.experiment().map_err(|e| Failure::Config(e.into()))?;
    let positions = cfg.probe_positions();
    let ds = exp
        .scanning_probe_run(&positions, &cfg.cycle_plan(), cfg.seed, &cfg.hash(), common.jobs, diagnostic)
        .map_err(|e| Failure::Config(anyhow::Error::new(e).context("probe positions")))?;
    prepare_out(&common.out)?;
    let (path, hash) = write_dataset(&common.out, "scan_dataset.tsv", &ds)?;
    println!("wrote {}", path.display());
    if ds.records.is_empty() {
        return Ok(());
    }
    let analysis = Analysis::run(&ds, &hash, cfg.projection(), common.jobs).map_err(|e| Failure::Data(e.into()))?;
    for (name, text) in [
        ("scan_fits.tsv", analysis.map_table()),
        ("scan_gradient.tsv", analysis.gradient_table()),
        ("scan_summary.txt", analysis.summary()),
    ] {
        let p = write_text(&common.out, name, &text)?;
        println!("wrote {}", p.display());
    }
    if analysis.failed() {
        return Err(Failure::NotConverged("no probe position produced a converged fit pair".into()));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { common, diagnostic_truth } => simulate(&common, diagnostic_truth),
        Command::Estimate { dataset, common } => estimate(&dataset, &common),
        Command::Rearrange { common } => rearrange(&common),
        Command::Scan { common, diagnostic_truth } => scan(&common, diagnostic_truth),
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sensorgrid: {e}");
            ExitCode::from(e.code())
        }
    }
}
