//! Run manifests: the complete, resolved parameter set of an invocation,
//! embedded in every output so that the file alone can reproduce itself.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const TOOL: &str = "disac";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub rho: f64,
    pub dx1: f64,
    pub dy2: f64,
    pub dx3: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub rho: f64,
    pub stage: u8,
    pub r1_count: u32,
    pub r1_max: f64,
    pub r1: f64,
    pub r2_count: u32,
    pub r2_max: f64,
    pub rate_max: f64,
    pub n_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleParams {
    pub rho: f64,
    pub stage: u8,
    pub resolution: u32,
    pub inner_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocateParams {
    pub rho: f64,
    pub dx_target: f64,
    pub dy_target: f64,
    pub n_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub rho: Vec<f64>,
    pub dx_target: f64,
    pub dy_target: f64,
    pub n0: f64,
    pub n_points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateParams {
    pub rho: f64,
    pub dx1: f64,
    pub dy2: f64,
    pub dx3: f64,
    pub n_samples: u64,
    pub seed: u64,
    pub k_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Params {
    Plan(PlanParams),
    Surface(SurfaceParams),
    Feasible(FeasibleParams),
    Allocate(AllocateParams),
    Energy(EnergyParams),
    Simulate(SimulateParams),
}

impl Params {
    pub fn command(&self) -> &'static str {
        match self {
            Params::Plan(_) => "plan",
            Params::Surface(_) => "surface",
            Params::Feasible(_) => "feasible",
            Params::Allocate(_) => "allocate",
            Params::Energy(_) => "energy",
            Params::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    #[serde(flatten)]
    pub params: Params,
    /// Output path as given on the command line; `None` for stdout.
    pub output: Option<String>,
}

impl RunManifest {
    pub fn new(params: Params, output: Option<String>) -> Self {
        RunManifest {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            params,
            output,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("manifest serializes")
    }

    /// Recovers the manifest from a CSV preamble or a JSON document
    /// produced by this tool.
    pub fn extract(contents: &str, path: &Path) -> Result<Self> {
        let parse = |s: &str| {
            serde_json::from_str::<RunManifest>(s).map_err(|e| CliError::Config {
                path: path.to_path_buf(),
                message: format!("malformed manifest: {e}"),
            })
        };
        if contents.trim_start().starts_with('{') {
            let doc: serde_json::Value =
                serde_json::from_str(contents).map_err(|e| CliError::Config {
                    path: path.to_path_buf(),
                    message: format!("not a JSON document: {e}"),
                })?;
            let m = doc
                .get("manifest")
                .ok_or_else(|| CliError::NoManifest(path.to_path_buf()))?;
            return parse(&m.to_string());
        }
        contents
            .lines()
            .take_while(|l| l.starts_with('#'))
            .find_map(|l| l.strip_prefix("# manifest: "))
            .map(parse)
            .unwrap_or_else(|| Err(CliError::NoManifest(path.to_path_buf())))
    }
}
