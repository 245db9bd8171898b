//! TOML run configuration. Physical parameters never default silently:
//! dt, horizons, and model parameters must be spelled out.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Task name; may also be given on the command line (the flag wins only
    /// if the file omits it).
    pub task: Option<String>,
    pub seed: Option<u64>,
    pub model: ModelConfig,
    pub discretization: Option<DiscretizationConfig>,
    pub run: RunSection,
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum ModelConfig {
    Btc {
        n: usize,
        omega: f64,
        kappa: f64,
    },
    SpinMonitor {
        n: usize,
        omega: f64,
        kappa: f64,
        e: f64,
    },
    Ghz {
        delta: f64,
        /// Working point; defaults to 0.
        theta: Option<f64>,
    },
    Dephasing {
        kappa: f64,
    },
    Random {
        d: usize,
        d_photon: usize,
        encoding: String,
    },
    File {
        path: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    pub dt: f64,
    /// "first-order", "exact-isometry", or "strang".
    pub mode: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Step horizon for curve-type tasks.
    pub t_max: Option<usize>,
    /// Initial state for degenerate-spectrum tasks:
    /// "steady", "maximally-mixed", "plus", "ghz-extremal", or "basis:<k>".
    pub initial: Option<String>,
    /// Monte Carlo samples (haar task).
    pub samples: Option<usize>,
    /// Random instances (oracle-check task).
    pub instances: Option<usize>,
    /// Optimizer restarts (degenerate task).
    pub restarts: Option<usize>,
    /// System sizes for the btc-collapse sweep.
    pub ns: Option<Vec<usize>>,
    /// Rescaled-time grid for btc-collapse: x = kappa t / N.
    pub x_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub peripheral: Option<f64>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("config parse error: {e}"))
    }
}
