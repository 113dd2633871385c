//! Scenario files: a network, initial state and exogenous inflow series.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Network, NetworkState};

/// An inflow series given either as one constant or as per-step values.
/// Reading past the end repeats the last value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Series {
    Constant(f64),
    Values(Vec<f64>),
}

impl Series {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Series::Constant(v) => *v,
            Series::Values(vals) => vals
                .get(k)
                .or_else(|| vals.last())
                .copied()
                .unwrap_or(0.0),
        }
    }

    pub fn window(&self, start: usize, len: usize) -> Vec<f64> {
        (start..start + len).map(|k| self.at(k)).collect()
    }

    fn values(&self) -> &[f64] {
        match self {
            Series::Constant(v) => std::slice::from_ref(v),
            Series::Values(vals) => vals,
        }
    }
}

impl Default for Series {
    fn default() -> Self {
        Series::Constant(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub network: Network,
    #[serde(rename = "K")]
    pub k: usize,
    pub lambda0: Series,
    /// One series per cell; cells without an onramp should carry zero.
    pub lambda: Vec<Series>,
    pub x0: Vec<f64>,
    pub r0: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid scenario JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate().map_err(ScenarioError::Invalid)?;
        Ok(scenario)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("scenario serializes");
        text.push('\n');
        text
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn n(&self) -> usize {
        self.network.len()
    }

    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs: Vec<String> = match self.network.validate() {
            Ok(()) => Vec::new(),
            Err(v) => v.iter().map(|e| format!("network: {e}")).collect(),
        };
        let n = self.network.len();
        if self.k == 0 {
            errs.push("K must be at least 1".into());
        }
        for (what, vec) in [("x0", &self.x0), ("r0", &self.r0)] {
            if vec.len() != n {
                errs.push(format!("{what} has {} entries for {n} cells", vec.len()));
            }
            if let Some(i) = vec.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                errs.push(format!("{what}[{}] = {} must be non-negative", i + 1, vec[i]));
            }
        }
        if self.lambda.len() != n {
            errs.push(format!(
                "lambda has {} series for {n} cells",
                self.lambda.len()
            ));
        }
        let series = std::iter::once(("lambda0".to_string(), &self.lambda0)).chain(
            self.lambda
                .iter()
                .enumerate()
                .map(|(i, s)| (format!("lambda[{}]", i + 1), s)),
        );
        for (what, s) in series {
            if let Series::Values(vals) = s {
                if vals.len() != self.k {
                    errs.push(format!("{what} has {} values, expected K = {}", vals.len(), self.k));
                }
            }
            if s.values().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                errs.push(format!("{what} contains a negative or non-finite inflow"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    pub fn initial_state(&self) -> NetworkState {
        NetworkState::initial(&self.network, self.x0.clone(), self.r0.clone())
    }

    pub fn lambda0_at(&self, k: usize) -> f64 {
        self.lambda0.at(k)
    }

    pub fn lambda_at(&self, k: usize) -> Vec<f64> {
        self.lambda.iter().map(|s| s.at(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_CELL: &str = r#"{
        "name": "two",
        "network": {
            "h": 0.008333333333333333,
            "cells": [
                {"v": 60, "w": 20, "x_jam": 320, "x_hi": 110, "x_lo": 70, "beta": 0.9},
                {"v": 60, "w": 20, "x_jam": 320, "x_hi": 110, "x_lo": 70, "beta": 1}
            ],
            "ramps": [{"present": true, "c": 60}, {"present": false, "c": 0}]
        },
        "K": 4,
        "lambda0": 30,
        "lambda": [[80, 80, 0, 0], 0],
        "x0": [0, 150],
        "r0": [0, 0]
    }"#;

    #[test]
    fn parses_and_pads_series() {
        let s = Scenario::from_json(TWO_CELL).unwrap();
        assert_eq!(s.k, 4);
        assert_eq!(s.lambda0_at(100), 30.0);
        assert_eq!(s.lambda_at(1), vec![80.0, 0.0]);
        assert_eq!(s.lambda[0].at(9), 0.0);
        assert_eq!(s.initial_state().sigma, vec![false, true]);
    }

    #[test]
    fn round_trip_is_stable() {
        let s = Scenario::from_json(TWO_CELL).unwrap();
        let once = s.to_json();
        let again = Scenario::from_json(&once).unwrap().to_json();
        assert_eq!(once, again);
    }

    #[test]
    fn missing_field_is_named() {
        let text = TWO_CELL.replacen("\"x_jam\": 320, ", "", 1);
        let err = Scenario::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("x_jam"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn semantic_errors_are_collected() {
        let text = TWO_CELL
            .replace("\"K\": 4", "\"K\": 5")
            .replace("\"x0\": [0, 150]", "\"x0\": [0, -1]");
        match Scenario::from_json(&text) {
            Err(ScenarioError::Invalid(errs)) => {
                assert!(errs.iter().any(|e| e.contains("x0[2]")));
                assert!(errs.iter().any(|e| e.contains("lambda[1] has 4 values")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
