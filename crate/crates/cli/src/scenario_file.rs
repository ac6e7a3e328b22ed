//! TOML scenario files.
//!
//! ```toml
//! n_consumers = 500
//! re_ratio = 0.25            # or: res_capacity = 16250.0 (exactly one)
//!
//! [tariffs]
//! c_res = 100.0
//! beta = 2.0
//! gamma = 4.0
//!
//! [epsilon_calibration]      # optional
//! base_type = 0              # position in the [[types]] list
//! base_epsilon = 1.0
//!
//! [[types]]
//! day_demand = 100.0
//! share = 0.7
//! inv_risk = 1.0             # optional when calibrated
//! ```

use std::path::Path;

use esgame_core::{EpsilonCalibration, Scenario, ScenarioRecord, TariffSet, TypeRecord};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileTariffs {
    c_res: f64,
    beta: f64,
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileType {
    day_demand: f64,
    share: f64,
    inv_risk: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCalibration {
    base_type: usize,
    base_epsilon: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    n_consumers: u64,
    res_capacity: Option<f64>,
    re_ratio: Option<f64>,
    tariffs: FileTariffs,
    types: Vec<FileType>,
    epsilon_calibration: Option<FileCalibration>,
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Parse {
        location: format!("field `{field}`"),
        message: message.into(),
    }
}

/// Parses scenario text. `origin` names the source in error messages.
pub fn parse_scenario(text: &str, origin: &str) -> CliResult<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
                format!("{origin}:{line}")
            }
            None => origin.to_string(),
        };
        CliError::Parse {
            location,
            message: e.message().trim().replace('\n', "; "),
        }
    })?;

    let calibrated = file.epsilon_calibration.is_some();
    let mut types = Vec::with_capacity(file.types.len());
    for (i, t) in file.types.iter().enumerate() {
        let inv_risk = match (t.inv_risk, calibrated) {
            (Some(v), _) => v,
            // Placeholder; overwritten by the calibration below.
            (None, true) => 1.0,
            (None, false) => {
                return Err(field_error(
                    &format!("types[{i}].inv_risk"),
                    "required unless epsilon_calibration is given",
                ))
            }
        };
        types.push(TypeRecord {
            day_demand: t.day_demand,
            share: t.share,
            inv_risk,
        });
    }

    let mut record = ScenarioRecord {
        n_consumers: file.n_consumers,
        tariffs: TariffSet {
            c_res: file.tariffs.c_res,
            beta: file.tariffs.beta,
            gamma: file.tariffs.gamma,
        },
        res_capacity: 0.0,
        types,
    };
    let total: f64 = record
        .types
        .iter()
        .map(|t| record.n_consumers as f64 * t.share * t.day_demand)
        .sum();
    record.res_capacity = match (file.res_capacity, file.re_ratio) {
        (Some(_), Some(_)) => {
            return Err(field_error(
                "res_capacity",
                "res_capacity and re_ratio are mutually exclusive",
            ))
        }
        (None, None) => {
            return Err(field_error(
                "res_capacity",
                "one of res_capacity or re_ratio is required",
            ))
        }
        (Some(re), None) => re,
        (None, Some(ratio)) => {
            if !(ratio.is_finite() && ratio >= 0.0) {
                return Err(field_error("re_ratio", "must be finite and >= 0"));
            }
            ratio * total
        }
    };

    let scenario = Scenario::from_record(&record)?;
    match file.epsilon_calibration {
        None => Ok(scenario),
        Some(cal) => {
            let base_type = scenario
                .type_for_record_index(cal.base_type)
                .ok_or_else(|| {
                    field_error(
                        "epsilon_calibration.base_type",
                        format!("no type at position {}", cal.base_type),
                    )
                })?;
            Ok(scenario.with_calibration(EpsilonCalibration {
                base_type,
                base_epsilon: cal.base_epsilon,
            })?)
        }
    }
}

/// Reads and parses a scenario file.
pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text, &path.display().to_string())
}
