use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qwalk::config::{parse_config, parse_formats, parse_overrides, ExperimentConfig, Protocol};
use qwalk::protocol::{compare_to_oracle, run_protocol, write_bundle, RunOptions};
use qwalk::selftest::run_selftest;

/// Two-loop quantum walk experiments: bands, Hall-drift transport and edge states.
#[derive(Parser, Debug)]
#[command(version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output directory (default: results/<protocol>, or `output` from the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated output formats: csv, json, svg
    #[arg(long, global = true)]
    format: Option<String>,

    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for randomized checks; recorded in the manifest
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Treat warnings and failed reference checks as errors
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Args, Debug)]
struct Overrides {
    /// Parameter overrides as key=value; angles, force and dk in units of pi
    params: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML file
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Quasienergy bands, gaps and Berry curvature
    Bands(Overrides),
    /// Chern number over a grid of (theta1, theta2)
    PhaseDiagram(Overrides),
    /// Chern number from full-zone Bloch-oscillation drives
    ChernBloch(Overrides),
    /// Berry curvature reconstructed from packet Hall drifts
    CurvatureMap(Overrides),
    /// Packet centre of mass under a Bloch-oscillation drive
    Recurrence(Overrides),
    /// Walk from a domain wall and measure edge transport
    Edge(Overrides),
    /// Strip spectrum and interface-mode counting
    Ribbon(Overrides),
    /// Bulk Chern difference against interface modes and edge drift
    BulkBoundary(Overrides),
    /// Randomized invariant checks
    Selftest {
        /// Trials per check
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn resolve(cli: &Cli) -> Result<ExperimentConfig, String> {
    let (mut config, overrides) = match &cli.command {
        Command::Run { config, overrides } => {
            let text = std::fs::read_to_string(config)
                .map_err(|e| format!("reading {}: {e}", config.display()))?;
            (parse_config(&text).map_err(|e| e.to_string())?, &overrides.params)
        }
        Command::Bands(o) => (ExperimentConfig::new(Protocol::Bands), &o.params),
        Command::PhaseDiagram(o) => (ExperimentConfig::new(Protocol::PhaseDiagram), &o.params),
        Command::ChernBloch(o) => (ExperimentConfig::new(Protocol::ChernBloch), &o.params),
        Command::CurvatureMap(o) => (ExperimentConfig::new(Protocol::CurvatureMap), &o.params),
        Command::Recurrence(o) => (ExperimentConfig::new(Protocol::Recurrence), &o.params),
        Command::Edge(o) => (ExperimentConfig::new(Protocol::Edge), &o.params),
        Command::Ribbon(o) => (ExperimentConfig::new(Protocol::Ribbon), &o.params),
        Command::BulkBoundary(o) => (ExperimentConfig::new(Protocol::BulkBoundary), &o.params),
        Command::Selftest { .. } => unreachable!("selftest has no config"),
    };
    let table = parse_overrides(overrides).map_err(|e| e.to_string())?;
    if table.contains_key("protocol") {
        return Err("key `protocol` cannot be overridden".into());
    }
    config.apply(&table).map_err(|e| e.to_string())?;
    if let Some(out) = &cli.out {
        config.output = out.clone();
    }
    if let Some(f) = &cli.format {
        config.formats = parse_formats(f).map_err(|e| e.to_string())?;
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err("--workers must be at least 1".into());
        }
        config.workers = Some(w);
    }
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn selftest(seed: u64, trials: usize) -> ExitCode {
    let checks = run_selftest(seed, trials);
    for c in &checks {
        println!(
            "{} {}: worst {:.3e} (tolerance {:.1e})",
            if c.pass() { "PASS" } else { "FAIL" },
            c.name,
            c.worst,
            c.tolerance
        );
    }
    if checks.iter().all(|c| c.pass()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_RUNTIME)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Command::Selftest { trials } = cli.command {
        return selftest(cli.seed.unwrap_or(0), trials);
    }

    let config = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let options = RunOptions {
        strict: cli.strict,
        seed: cli.seed,
    };
    let bundle = match run_protocol(&config, &options) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME });
        }
    };
    let files = match write_bundle(&bundle, &config.output, &config.formats) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };

    println!("{} ({:.2} s)", config.protocol, bundle.wall_time_s);
    for (k, v) in &bundle.summary {
        println!("  {k} = {v}");
    }
    for w in &bundle.warnings {
        println!("  warning: {w}");
    }
    let mut failed = false;
    if let Some(report) = compare_to_oracle(&bundle) {
        for c in &report.checks {
            println!(
                "  {} {}: {:.4} (tolerance {})",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            );
        }
        failed = !report.pass();
    }
    println!("wrote {} files to {}", files.len(), config.output.display());
    if cli.strict && failed {
        eprintln!("error: reference checks failed");
        return ExitCode::from(EXIT_RUNTIME);
    }
    ExitCode::SUCCESS
}
