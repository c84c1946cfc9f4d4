//! Command-line flags and `--config` files.
//!
//! Every subcommand flag has a snake_case key of the same name that may be
//! set in a TOML config file. Precedence: flag, then file, then default.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::manifest::{
    AllocateParams, EnergyParams, FeasibleParams, Params, PlanParams, SimulateParams, SurfaceParams,
};

#[derive(Debug, Parser)]
#[command(
    name = "disac",
    version,
    about = "Distributed successive approximation coding of two Gaussian sources"
)]
pub struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel sections; output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output file. Relative paths are resolved against $DISAC_OUT_DIR when
    /// set. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<String>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rates, distortions and posteriors of a three-stage schedule (JSON).
    Plan(PlanArgs),
    /// Refinement curves on the minimum sum-rate surface (CSV).
    Surface(SurfaceArgs),
    /// Feasible distortion-pair region after stage 2 or 3 (CSV).
    Feasible(FeasibleArgs),
    /// Rate split between the two encoders at a fixed target (CSV).
    Allocate(AllocateArgs),
    /// Transmission energy against the separate-coding bound (CSV).
    Energy(EnergyArgs),
    /// Monte Carlo validation of a schedule (JSON).
    Simulate(SimulateArgs),
    /// Re-execute the manifest embedded in an output file.
    Rerun(RerunArgs),
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct PlanArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub dx1: Option<f64>,
    #[arg(long)]
    pub dy2: Option<f64>,
    #[arg(long)]
    pub dx3: Option<f64>,
    /// Relative tolerance of the on-surface residual check.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    /// 2: fix R1 and sweep R2. 3: fix R1 and R2, sweep R3.
    #[arg(long)]
    pub stage: Option<u8>,
    /// Number of stage-2 curves (R1 = r1_max * k / r1_count).
    #[arg(long)]
    pub r1_count: Option<u32>,
    #[arg(long)]
    pub r1_max: Option<f64>,
    /// Fixed R1 of the stage-3 curves.
    #[arg(long)]
    pub r1: Option<f64>,
    /// Number of stage-3 curves (R2 = r2_max * k / r2_count).
    #[arg(long)]
    pub r2_count: Option<u32>,
    #[arg(long)]
    pub r2_max: Option<f64>,
    /// Upper end of the swept rate, nats.
    #[arg(long)]
    pub rate_max: Option<f64>,
    /// Points per curve.
    #[arg(long)]
    pub n_points: Option<u32>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct FeasibleArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub stage: Option<u8>,
    /// Grid cells per axis.
    #[arg(long)]
    pub resolution: Option<u32>,
    /// d_x1 samples per grid row or column.
    #[arg(long)]
    pub inner_points: Option<u32>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct AllocateArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub dx_target: Option<f64>,
    #[arg(long)]
    pub dy_target: Option<f64>,
    #[arg(long)]
    pub n_points: Option<u32>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct EnergyArgs {
    /// Comma-separated correlations.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(deserialize_with = "one_or_many")]
    pub rho: Option<Vec<f64>>,
    #[arg(long)]
    pub dx_target: Option<f64>,
    #[arg(long)]
    pub dy_target: Option<f64>,
    /// Noise spectral-density scale N0.
    #[arg(long)]
    pub n0: Option<f64>,
    #[arg(long)]
    pub n_points: Option<u32>,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(default)]
#[command(allow_negative_numbers = true)]
pub struct SimulateArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub dx1: Option<f64>,
    #[arg(long)]
    pub dy2: Option<f64>,
    #[arg(long)]
    pub dx3: Option<f64>,
    #[arg(long = "n-samples", alias = "n")]
    pub n_samples: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pass band in standard errors.
    #[arg(long)]
    pub k_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// CSV or JSON file written by this tool.
    pub file: PathBuf,
}

/// Top-level keys of a config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct GlobalFileArgs {
    pub threads: Option<usize>,
    pub out: Option<String>,
}

/// Accepts `rho = 0.6` as well as `rho = [0.3, 0.6]` in config files.
fn one_or_many<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Some(match OneOrMany::deserialize(d)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    }))
}

pub fn read_config(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.parse::<toml::Table>().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn from_table<T: for<'de> Deserialize<'de>>(table: &toml::Table, path: &Path) -> Result<T> {
    table
        .clone()
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

macro_rules! overlay {
    ($flags:ident, $file:ident; $($field:ident),+) => {
        $( let $field = $flags.$field.or($file.$field); )+
    };
}

fn need<T>(v: Option<T>, name: &'static str) -> Result<T> {
    v.ok_or(CliError::Missing(name))
}

impl PlanArgs {
    pub fn resolve(self, file: PlanArgs) -> Result<Params> {
        overlay!(self, file; rho, dx1, dy2, dx3, tol);
        Ok(Params::Plan(PlanParams {
            rho: need(rho, "rho")?,
            dx1: need(dx1, "dx1")?,
            dy2: need(dy2, "dy2")?,
            dx3: need(dx3, "dx3")?,
            tol: tol.unwrap_or(1e-9),
        }))
    }
}

impl SurfaceArgs {
    pub fn resolve(self, file: SurfaceArgs) -> Result<Params> {
        overlay!(self, file; rho, stage, r1_count, r1_max, r1, r2_count, r2_max, rate_max, n_points);
        Ok(Params::Surface(SurfaceParams {
            rho: need(rho, "rho")?,
            stage: stage.unwrap_or(2),
            r1_count: r1_count.unwrap_or(10),
            r1_max: r1_max.unwrap_or(1.0),
            r1: r1.unwrap_or(0.5),
            r2_count: r2_count.unwrap_or(10),
            r2_max: r2_max.unwrap_or(1.0),
            rate_max: rate_max.unwrap_or(2.0),
            n_points: n_points.unwrap_or(50),
        }))
    }
}

impl FeasibleArgs {
    pub fn resolve(self, file: FeasibleArgs) -> Result<Params> {
        overlay!(self, file; rho, stage, resolution, inner_points);
        Ok(Params::Feasible(FeasibleParams {
            rho: need(rho, "rho")?,
            stage: stage.unwrap_or(2),
            resolution: resolution.unwrap_or(200),
            inner_points: inner_points.unwrap_or(disac::refinement::DEFAULT_INNER_POINTS as u32),
        }))
    }
}

impl AllocateArgs {
    pub fn resolve(self, file: AllocateArgs) -> Result<Params> {
        overlay!(self, file; rho, dx_target, dy_target, n_points);
        Ok(Params::Allocate(AllocateParams {
            rho: need(rho, "rho")?,
            dx_target: dx_target.unwrap_or(0.5),
            dy_target: dy_target.unwrap_or(0.5),
            n_points: n_points.unwrap_or(disac::refinement::DEFAULT_SWEEP_POINTS as u32),
        }))
    }
}

impl EnergyArgs {
    pub fn resolve(self, file: EnergyArgs) -> Result<Params> {
        overlay!(self, file; rho, dx_target, dy_target, n0, n_points);
        let rho = need(rho, "rho")?;
        if rho.is_empty() {
            return Err(CliError::Missing("rho"));
        }
        Ok(Params::Energy(EnergyParams {
            rho,
            dx_target: dx_target.unwrap_or(0.5),
            dy_target: dy_target.unwrap_or(0.5),
            n0: n0.unwrap_or(2.0),
            n_points: n_points.unwrap_or(disac::refinement::DEFAULT_SWEEP_POINTS as u32),
        }))
    }
}

impl SimulateArgs {
    pub fn resolve(self, file: SimulateArgs) -> Result<Params> {
        overlay!(self, file; rho, dx1, dy2, dx3, n_samples, seed, k_sigma);
        Ok(Params::Simulate(SimulateParams {
            rho: need(rho, "rho")?,
            dx1: need(dx1, "dx1")?,
            dy2: need(dy2, "dy2")?,
            dx3: need(dx3, "dx3")?,
            n_samples: n_samples.unwrap_or(1_000_000),
            seed: seed.unwrap_or(42),
            k_sigma: k_sigma.unwrap_or(3.0),
        }))
    }
}
