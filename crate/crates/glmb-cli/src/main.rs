//! Command-line front end for the delta-GLMB tracking filter.
//!
//! Exit status: 0 = success, 1 = configuration error, 2 = runtime failure
//! in at least one trial or a failed oracle comparison. Log verbosity is
//! controlled by the GLMB_LOG environment variable (error/warn/info/debug).

mod config;
mod oracle_cmd;
mod run;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Parser)]
#[command(
    name = "glmb",
    version,
    about = "delta-GLMB multi-target tracking filter"
)]
struct Cli {
    /// Worker threads for the trial pool (default: all cores). Output is
    /// independent of this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario: simulate measurements, filter, write results.
    Run {
        /// Run configuration file (JSON).
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Schema-check a run configuration and its scenario, print the
    /// resolved model constants.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Brute-force oracle comparisons for the core enumerations.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Ranked assignment vs exhaustive association-map enumeration.
    Assign {
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long, default_value_t = 4)]
        cols: usize,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// K-shortest subsets vs exhaustive subset sort.
    Ksp {
        #[arg(long, default_value_t = 10)]
        size: usize,
        #[arg(long, default_value_t = 100)]
        seeds: u64,
    },
    /// Exhaustive-T Bayes update vs direct evaluation.
    Update {
        #[arg(long, default_value_t = 2)]
        tracks: usize,
        #[arg(long, default_value_t = 2)]
        meas: usize,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
    },
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GLMB_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: setting thread count: {e}");
            std::process::exit(1);
        }
    }
    let code = match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    };
    std::process::exit(code);
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config, overrides } => {
            let resolved = config::load_and_resolve(&config, &overrides)?;
            run::cmd_run(&resolved)
        }
        Command::Validate { config, overrides } => cmd_validate(&config, &overrides),
        Command::Oracle { which } => match which {
            OracleCommand::Assign { rows, cols, seeds } => {
                oracle_cmd::cmd_assign(rows, cols, seeds)
            }
            OracleCommand::Ksp { size, seeds } => oracle_cmd::cmd_ksp(size, seeds),
            OracleCommand::Update {
                tracks,
                meas,
                seeds,
            } => oracle_cmd::cmd_update(tracks, meas, seeds),
        },
    }
}

fn cmd_validate(config: &std::path::Path, overrides: &Overrides) -> Result<i32> {
    let resolved = config::load_and_resolve(config, overrides)?;
    let model = resolved.scenario.build_model()?;
    let m = &resolved.scenario.model;
    println!("configuration OK");
    println!(
        "  scenario: {} steps, region area {:.3e} m^2",
        resolved.scenario.duration,
        resolved.scenario.region.area()
    );
    println!("  truth tracks: {}", resolved.scenario.truth.len());
    println!(
        "  dt = {} s, sigma_process = {} m/s^2, sigma_meas = {} m",
        m.dt, m.process_noise_std, m.measurement_noise_std
    );
    println!("  p_S = {}, p_D = {}", m.survival_prob, m.detection_prob);
    println!(
        "  clutter: {} per scan (intensity {:.4e} per m^2)",
        m.clutter_mean_per_scan,
        m.clutter_mean_per_scan / resolved.scenario.region.area()
    );
    for (i, b) in model.births.iter().enumerate() {
        println!("  birth {}: r_B = {}", i + 1, b.existence);
    }
    println!(
        "  filter: j_max = {}, lookahead = {}, birth fraction = {}, lookahead fraction = {}, n_max = {}, weight floor = {:e}",
        resolved.filter.j_max,
        resolved.filter.lookahead_enabled,
        resolved.filter.birth_mass_fraction,
        resolved.filter.lookahead_mass_fraction,
        resolved.filter.n_max,
        resolved.filter.weight_floor
    );
    println!(
        "  trials = {}, base seed = {}, out = {}",
        resolved.trials,
        resolved.seed,
        resolved.out_dir.display()
    );
    println!(
        "  OSPA: c = {} m, p = {}",
        resolved.ospa_cutoff, resolved.ospa_order
    );
    Ok(0)
}
