//! Model spec files: a chain given either explicitly or by builtin selector,
//! plus an optional roof.
//!
//! ```json
//! {
//!   "states": ["a", "b"],
//!   "transitions": [{"from": "a", "to": "b", "p": 1.0}, {"from": "b", "to": "a", "p": 1.0}],
//!   "roof": {"a": 1, "b": 2}
//! }
//! ```
//!
//! or `{"builtin": "pitskel", "truncation": 100, "roof_builtin": "sqrtlog"}`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chain::MarkovChain;
use crate::error::{Error, Result};
use crate::tower::{RoofFunction, Suspension};
use crate::zoo::{ChainBuiltin, RoofBuiltin, DEFAULT_TRUNCATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub from: String,
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transitions: Option<Vec<TransitionSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roof: Option<BTreeMap<String, u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roof_builtin: Option<String>,
}

/// A loaded chain with its roof, if one was given or implied by a builtin.
#[derive(Debug, Clone)]
pub struct Model {
    pub chain: MarkovChain,
    pub roof: Option<RoofFunction>,
    pub spec: ModelSpec,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ModelSpec(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ModelSpec(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str, truncation: Option<usize>, roof_builtin: Option<&str>) -> Self {
        Self {
            builtin: Some(name.to_string()),
            truncation,
            roof_builtin: roof_builtin.map(str::to_string),
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<Model> {
        let explicit = self.states.is_some() || self.transitions.is_some();
        let (chain, default_roof) = match (&self.builtin, explicit) {
            (Some(_), true) => {
                return Err(Error::ModelSpec(
                    "`builtin` cannot be combined with `states`/`transitions`".into(),
                ))
            }
            (Some(name), false) => {
                let b: ChainBuiltin = name.parse()?;
                if self.truncation.is_some() && b != ChainBuiltin::Pitskel {
                    return Err(Error::ModelSpec(format!(
                        "`truncation` does not apply to builtin `{b}`"
                    )));
                }
                let chain = b.chain(self.truncation.unwrap_or(DEFAULT_TRUNCATION))?;
                (chain, Some(b.default_roof()))
            }
            (None, true) => {
                let states = self
                    .states
                    .clone()
                    .ok_or_else(|| Error::ModelSpec("`transitions` given without `states`".into()))?;
                let transitions: Vec<(String, String, f64)> = self
                    .transitions
                    .iter()
                    .flatten()
                    .map(|t| (t.from.clone(), t.to.clone(), t.p))
                    .collect();
                if self.truncation.is_some() {
                    return Err(Error::ModelSpec(
                        "`truncation` only applies to builtin chains".into(),
                    ));
                }
                (MarkovChain::from_transitions(states, &transitions)?, None)
            }
            (None, false) => {
                return Err(Error::ModelSpec(
                    "spec needs either `builtin` or `states` and `transitions`".into(),
                ))
            }
        };
        let roof = match (&self.roof, &self.roof_builtin) {
            (Some(_), Some(_)) => {
                return Err(Error::ModelSpec(
                    "`roof` and `roof_builtin` are mutually exclusive".into(),
                ))
            }
            (Some(map), None) => Some(RoofFunction::from_ids(
                &chain,
                map.iter().map(|(k, &v)| (k.as_str(), v)),
            )?),
            (None, Some(name)) => Some(name.parse::<RoofBuiltin>()?.build(chain.len())),
            (None, None) => default_roof.map(|r| r.build(chain.len())),
        };
        Ok(Model {
            chain,
            roof,
            spec: self.clone(),
        })
    }
}

impl Model {
    pub fn suspension(&self) -> Result<Suspension> {
        let roof = self.roof.clone().ok_or_else(|| {
            Error::ModelSpec("model has no roof; set `roof` or `roof_builtin`".into())
        })?;
        Suspension::new(self.chain.clone(), roof)
    }
}
