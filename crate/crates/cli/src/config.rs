//! Run configuration: JSON file, command-line overrides and `QPOL_SEED`.
//!
//! Precedence for the seed is `--seed`, then `QPOL_SEED`, then the file's
//! `seed`, then [`DEFAULT_SEED`]. Every other flag overrides its file key.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use qpol_core::analyzer::default_gaussian_sigma;
use qpol_core::{AngleGrid, ChshSettings, Criterion, SamplingDistribution};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 1;
pub const SEED_ENV: &str = "QPOL_SEED";
pub const DEFAULT_OUTPUT_DIR: &str = "results";

#[derive(Debug, Parser)]
#[command(
    name = "qpol",
    version,
    about = "Quasi-deterministic analyzer model: Malus, coincidence and CHSH runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub experiment: ExperimentKind,

    /// JSON run configuration
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Master seed (overrides QPOL_SEED and the config file)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Photons or pairs per angle
    #[arg(long, global = true)]
    pub count: Option<u64>,

    /// Angle grid in degrees, inclusive
    #[arg(long, global = true, value_name = "START:STOP:STEP")]
    pub angles: Option<String>,

    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Also write figN.svg charts
    #[arg(long, global = true)]
    pub svg: bool,

    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Two analyzers in sequence
    Malus,
    /// Two-wing coincidence counting
    Coincidence,
    /// CHSH combination of four coincidence settings
    Chsh,
    /// Property and reproducibility suite
    Verify,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Malus => "malus",
            ExperimentKind::Coincidence => "coincidence",
            ExperimentKind::Chsh => "chsh",
            ExperimentKind::Verify => "verify",
        }
    }

    fn default_count(self) -> u64 {
        match self {
            ExperimentKind::Malus => 40_000,
            ExperimentKind::Coincidence => 10_000,
            ExperimentKind::Chsh | ExperimentKind::Verify => 100_000,
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AnglesSpec {
    List(Vec<f64>),
    Range(AngleRange),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    ArccosUniform,
    Gaussian { sigma_rad: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionSpec {
    Deterministic,
    MalusProbabilistic,
}

/// On-disk JSON document. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub seed: Option<u64>,
    pub angles_deg: Option<AnglesSpec>,
    pub count_per_angle: Option<u64>,
    pub distribution: Option<DistributionSpec>,
    pub criterion: Option<CriterionSpec>,
    pub coupled: Option<bool>,
    pub chsh_angles_deg: Option<[f64; 4]>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfigFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            CliError::config(format!(
                "{origin}:{}:{}: {}",
                e.line(),
                e.column(),
                strip_position(&e.to_string())
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn strip_position(msg: &str) -> &str {
    msg.find(" at line ").map_or(msg, |i| &msg[..i])
}

/// Fully resolved, validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPlan {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub grid: AngleGrid,
    pub count_per_angle: u64,
    pub distribution: SamplingDistribution,
    pub criterion: Criterion,
    pub coupled: bool,
    pub chsh: ChshSettings,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub svg: bool,
}

fn field_error(field: &str, msg: impl fmt::Display) -> CliError {
    CliError::config(format!("field `{field}`: {msg}"))
}

pub fn parse_angle_flag(text: &str) -> Result<AngleGrid, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(field_error(
            "--angles",
            format!("expected START:STOP:STEP, got `{text}`"),
        ));
    }
    let mut nums = [0.0; 3];
    for (slot, part) in nums.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| field_error("--angles", format!("`{part}` is not a number")))?;
    }
    AngleGrid::range(nums[0], nums[1], nums[2]).map_err(|e| field_error("--angles", e))
}

fn grid_from_spec(spec: &AnglesSpec) -> Result<AngleGrid, CliError> {
    match spec {
        AnglesSpec::List(v) => AngleGrid::new(v.clone()).map_err(|e| field_error("angles_deg", e)),
        AnglesSpec::Range(r) => {
            AngleGrid::range(r.start, r.stop, r.step).map_err(|e| field_error("angles_deg", e))
        }
    }
}

fn distribution_from_spec(spec: &DistributionSpec) -> Result<SamplingDistribution, CliError> {
    match spec {
        DistributionSpec::ArccosUniform => Ok(SamplingDistribution::ArccosUniform),
        DistributionSpec::Gaussian { sigma_rad } => {
            SamplingDistribution::gaussian(sigma_rad.unwrap_or_else(default_gaussian_sigma))
                .map_err(|e| field_error("distribution.sigma_rad", e))
        }
    }
}

impl RunPlan {
    /// Merges the file, flags and environment and validates every range.
    pub fn resolve(
        cli: &Cli,
        file: &RunConfigFile,
        env_seed: Option<&str>,
    ) -> Result<Self, CliError> {
        let experiment = cli.experiment;
        if let Some(declared) = file.experiment {
            if declared != experiment {
                return Err(field_error(
                    "experiment",
                    format!("config declares `{declared}` but the subcommand is `{experiment}`"),
                ));
            }
        }

        let uses_grid = matches!(
            experiment,
            ExperimentKind::Malus | ExperimentKind::Coincidence
        );
        let uses_pairs = matches!(
            experiment,
            ExperimentKind::Coincidence | ExperimentKind::Chsh
        );
        let is_verify = experiment == ExperimentKind::Verify;
        let reject = |present: bool, field: &str| {
            if present {
                Err(field_error(field, format!("not used by `{experiment}`")))
            } else {
                Ok(())
            }
        };
        reject(!uses_grid && file.angles_deg.is_some(), "angles_deg")?;
        reject(!uses_grid && cli.angles.is_some(), "--angles")?;
        reject(!uses_pairs && file.coupled.is_some(), "coupled")?;
        reject(
            experiment != ExperimentKind::Chsh && file.chsh_angles_deg.is_some(),
            "chsh_angles_deg",
        )?;
        reject(
            is_verify && file.count_per_angle.is_some(),
            "count_per_angle",
        )?;
        reject(is_verify && cli.count.is_some(), "--count")?;
        reject(is_verify && file.distribution.is_some(), "distribution")?;
        reject(is_verify && file.criterion.is_some(), "criterion")?;

        let env_seed = env_seed
            .map(|s| {
                s.trim().parse::<u64>().map_err(|_| {
                    field_error(SEED_ENV, format!("`{s}` is not a 64-bit unsigned integer"))
                })
            })
            .transpose()?;
        let seed = cli.seed.or(env_seed).or(file.seed).unwrap_or(DEFAULT_SEED);

        let grid = match (&cli.angles, &file.angles_deg) {
            (Some(flag), _) => parse_angle_flag(flag)?,
            (None, Some(spec)) => grid_from_spec(spec)?,
            (None, None) => AngleGrid::default(),
        };

        let count_per_angle = cli
            .count
            .or(file.count_per_angle)
            .unwrap_or_else(|| experiment.default_count());
        if count_per_angle == 0 {
            let field = if cli.count.is_some() {
                "--count"
            } else {
                "count_per_angle"
            };
            return Err(field_error(field, "must be >= 1"));
        }

        let distribution = match &file.distribution {
            Some(spec) => distribution_from_spec(spec)?,
            None => SamplingDistribution::ArccosUniform,
        };
        let criterion = match file.criterion {
            Some(CriterionSpec::MalusProbabilistic) => Criterion::MalusProbabilistic,
            _ => Criterion::Deterministic,
        };

        let chsh = match file.chsh_angles_deg {
            Some([a1, a2, b1, b2]) => {
                ChshSettings::new(a1, a2, b1, b2).map_err(|e| field_error("chsh_angles_deg", e))?
            }
            None => ChshSettings::standard(),
        };

        if cli.threads == Some(0) {
            return Err(field_error("--threads", "must be >= 1"));
        }

        let output_dir = cli
            .output
            .clone()
            .or_else(|| file.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));

        Ok(RunPlan {
            experiment,
            seed,
            grid,
            count_per_angle,
            distribution,
            criterion,
            coupled: file.coupled.unwrap_or(true),
            chsh,
            output_dir,
            threads: cli.threads,
            svg: cli.svg,
        })
    }
}
