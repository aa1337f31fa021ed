//! JSON inputs of the subcommands.

use std::fs;
use std::path::Path;

use hyperpol::exact::ExactOptions;
use hyperpol::sequence::{SequenceError, SequenceSpec};
use hyperpol::sweep::RobustnessConfig;
use hyperpol::timeexpr::TimeValue;
use hyperpol::{SequenceParams, SystemParams};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

fn default_cycles() -> usize {
    200
}

/// Input of `simulate` and `steady`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub sequence: SequenceSpec,
    /// Number of polarization values written by `simulate`.
    #[serde(default = "default_cycles")]
    pub cycles: usize,
    #[serde(default)]
    pub exact: ExactOptions,
}

impl RunConfig {
    pub fn resolve(&self) -> Result<(SystemParams, SequenceParams), SequenceError> {
        self.system.validate()?;
        let seq = self.sequence.resolve(self.system.omega)?;
        seq.validate()?;
        Ok((self.system, seq))
    }
}

/// Input of `find-tau-res`. `sequence.tau` is the spacing for ideal pulses.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauResConfig {
    pub system: SystemParams,
    pub sequence: SequenceSpec,
    pub tau_pi: TimeValue,
    pub search_halfwidth: TimeValue,
    pub grid_step: TimeValue,
    #[serde(default)]
    pub exact: ExactOptions,
}

/// Input of `robustness`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustnessInput {
    pub system: SystemParams,
    pub configs: Vec<RobustnessConfig>,
    pub tau_pi: Vec<TimeValue>,
    #[serde(default)]
    pub exact: ExactOptions,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}
