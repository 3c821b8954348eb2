//! Run configuration: a JSON file referencing the scenario, merged with
//! command-line overrides (flag > file > default).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use glmb::filter::FilterConfig;
use glmb::scenario::ScenarioSpec;

pub const RUN_FORMAT: &str = "glmb-run";
pub const RUN_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfigFile {
    pub format: String,
    pub version: u32,
    /// Scenario file path, resolved relative to this config file.
    pub scenario: String,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: String,
    #[serde(default)]
    pub filter: FilterFile,
    #[serde(default)]
    pub ospa: OspaFile,
    #[serde(default)]
    pub emit: EmitFile,
}

fn default_trials() -> u64 {
    1
}
fn default_seed() -> u64 {
    0
}
fn default_out_dir() -> String {
    "out".into()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FilterFile {
    pub j_max: Option<usize>,
    pub lookahead_enabled: Option<bool>,
    pub birth_mass_fraction: Option<f64>,
    pub lookahead_mass_fraction: Option<f64>,
    pub n_max: Option<usize>,
    pub weight_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OspaFile {
    pub cutoff: f64,
    pub order: f64,
}

impl Default for OspaFile {
    fn default() -> Self {
        OspaFile {
            cutoff: 100.0,
            order: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmitFile {
    pub estimates: bool,
    pub diagnostics: bool,
    pub ospa: bool,
    pub truth: bool,
    pub measurements: bool,
}

impl Default for EmitFile {
    fn default() -> Self {
        EmitFile {
            estimates: true,
            diagnostics: true,
            ospa: true,
            truth: true,
            measurements: false,
        }
    }
}

/// Model-constant and filter overrides shared by `run` and `validate`.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Number of Monte Carlo trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Base RNG seed; trial t uses seed + t.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overall hypothesis cap J_max.
    #[arg(long)]
    pub jmax: Option<usize>,
    /// Disable the PHD look-ahead.
    #[arg(long)]
    pub no_lookahead: bool,
    /// Birth-subset mass coverage.
    #[arg(long)]
    pub birth_fraction: Option<f64>,
    /// Look-ahead PHD mass coverage.
    #[arg(long)]
    pub lookahead_fraction: Option<f64>,
    /// Cardinality cap for the MAP estimator.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Minimum hypothesis weight retained after normalization.
    #[arg(long)]
    pub weight_floor: Option<f64>,
    /// Detection probability p_D.
    #[arg(long)]
    pub pd: Option<f64>,
    /// Survival probability p_S.
    #[arg(long)]
    pub ps: Option<f64>,
    /// Expected clutter points per scan.
    #[arg(long)]
    pub clutter_mean: Option<f64>,
    /// Measurement noise standard deviation (m).
    #[arg(long)]
    pub sigma_meas: Option<f64>,
    /// Process noise standard deviation (m/s^2).
    #[arg(long)]
    pub sigma_process: Option<f64>,
    /// Birth existence probability applied to every birth component.
    #[arg(long)]
    pub birth_existence: Option<f64>,
    /// OSPA cutoff (m).
    #[arg(long)]
    pub ospa_cutoff: Option<f64>,
    /// OSPA order.
    #[arg(long)]
    pub ospa_order: Option<f64>,
}

/// Fully resolved run: scenario loaded, every knob merged.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub scenario: ScenarioSpec,
    pub trials: u64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub filter: FilterConfig,
    pub ospa_cutoff: f64,
    pub ospa_order: f64,
    pub emit: EmitFile,
}

pub fn load_and_resolve(config_path: &Path, overrides: &Overrides) -> Result<ResolvedRun> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading config {}", config_path.display()))?;
    let file: RunConfigFile = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    if file.format != RUN_FORMAT || file.version != RUN_VERSION {
        bail!("unsupported run config {}/{}", file.format, file.version);
    }
    let base_dir = config_path.parent().unwrap_or_else(|| Path::new("."));
    let scenario_path = base_dir.join(&file.scenario);
    let scenario_text = std::fs::read_to_string(&scenario_path)
        .with_context(|| format!("reading scenario {}", scenario_path.display()))?;
    let mut scenario = ScenarioSpec::from_json(&scenario_text)
        .with_context(|| format!("parsing scenario {}", scenario_path.display()))?;

    // flag > file > default
    if let Some(pd) = overrides.pd {
        scenario.model.detection_prob = pd;
    }
    if let Some(ps) = overrides.ps {
        scenario.model.survival_prob = ps;
    }
    if let Some(c) = overrides.clutter_mean {
        scenario.model.clutter_mean_per_scan = c;
    }
    if let Some(s) = overrides.sigma_meas {
        scenario.model.measurement_noise_std = s;
    }
    if let Some(s) = overrides.sigma_process {
        scenario.model.process_noise_std = s;
    }
    if let Some(r) = overrides.birth_existence {
        for b in &mut scenario.model.births {
            b.existence = r;
        }
    }
    let errors = scenario.validate();
    if !errors.is_empty() {
        bail!(
            "scenario invalid after overrides:\n  {}",
            errors.join("\n  ")
        );
    }

    let defaults = FilterConfig::default();
    let filter = FilterConfig {
        j_max: overrides
            .jmax
            .or(file.filter.j_max)
            .unwrap_or(defaults.j_max),
        lookahead_enabled: if overrides.no_lookahead {
            false
        } else {
            file.filter
                .lookahead_enabled
                .unwrap_or(defaults.lookahead_enabled)
        },
        birth_mass_fraction: overrides
            .birth_fraction
            .or(file.filter.birth_mass_fraction)
            .unwrap_or(defaults.birth_mass_fraction),
        lookahead_mass_fraction: overrides
            .lookahead_fraction
            .or(file.filter.lookahead_mass_fraction)
            .unwrap_or(defaults.lookahead_mass_fraction),
        n_max: overrides
            .nmax
            .or(file.filter.n_max)
            .unwrap_or(defaults.n_max),
        weight_floor: overrides
            .weight_floor
            .or(file.filter.weight_floor)
            .unwrap_or(defaults.weight_floor),
    };
    filter.validate().context("filter configuration")?;

    let trials = overrides.trials.unwrap_or(file.trials);
    if trials == 0 {
        bail!("trials must be at least 1");
    }

    Ok(ResolvedRun {
        scenario,
        trials,
        filter,
        seed: overrides.seed.unwrap_or(file.seed),
        out_dir: overrides
            .out
            .clone()
            .unwrap_or_else(|| base_dir.join(&file.out_dir)),
        ospa_cutoff: overrides.ospa_cutoff.unwrap_or(file.ospa.cutoff),
        ospa_order: overrides.ospa_order.unwrap_or(file.ospa.order),
        emit: file.emit,
    })
}
