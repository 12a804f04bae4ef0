//! Scenario presets: a graph, an initial state, a disturbance model and a
//! simulation configuration in one JSON file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{DisturbanceSpec, SimConfig};
use crate::error::{Error, Result};
use crate::graph::{NodeSet, WeightedDigraph};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioPreset {
    pub label: String,
    pub graph: WeightedDigraph,
    pub x0: Vec<f64>,
    #[serde(default = "zero_disturbance")]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub config: SimConfig,
    /// Groups for the extremal trajectory (1-based); the polarization
    /// witness is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extremal: Option<ExtremalGroups>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalGroups {
    pub v1: Vec<usize>,
    pub v2: Vec<usize>,
}

impl ExtremalGroups {
    pub fn sets(&self, n: usize) -> Result<(NodeSet, NodeSet)> {
        Ok((NodeSet::from_one_based(&self.v1, n)?, NodeSet::from_one_based(&self.v2, n)?))
    }
}

fn zero_disturbance() -> DisturbanceSpec {
    DisturbanceSpec::Zero
}

impl ScenarioPreset {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: ScenarioPreset = serde_json::from_str(text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if self.x0.len() != n || self.x0.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "preset {:?}: x0 must hold {n} finite numbers",
                self.label
            )));
        }
        self.config.validate()?;
        if let Some(groups) = &self.extremal {
            let (v1, v2) = groups.sets(n)?;
            if v1.is_empty() || v2.is_empty() {
                return Err(Error::EmptySet);
            }
            if !v1.is_disjoint(&v2) {
                return Err(Error::Overlap);
            }
        }
        // builds the model once to surface dimension and bound errors
        crate::dynamics::Disturbance::new(&self.disturbance, &self.graph, &self.x0, 0.0)?;
        Ok(())
    }
}
