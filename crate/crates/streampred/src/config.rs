//! Pipeline and scenario configuration files, with command-line overrides
//! merged key by key before validation.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use streampred_core::harness::PipelineConfig;
use streampred_core::scenario::ScenarioConfig;

use crate::error::{AppError, Result};
use crate::scene_io::{from_value, parse_json};

fn read_object(path: &Path) -> Result<Map<String, Value>> {
    let bytes = fs::read(path).map_err(|source| AppError::Io { path: path.into(), source })?;
    match parse_json(&bytes).map_err(|e| e.in_file(path))? {
        Value::Object(m) => Ok(m),
        _ => Err(AppError::validation(".", "configuration must be a JSON object").in_file(path)),
    }
}

/// File contents (or defaults), then every key set in `overrides`.
pub fn merge<T: DeserializeOwned>(file: Option<&Path>, overrides: &impl Serialize) -> Result<T> {
    let mut obj = match file {
        Some(p) => read_object(p)?,
        None => Map::new(),
    };
    if let Value::Object(o) = serde_json::to_value(overrides).map_err(|e| AppError::Usage(e.to_string()))? {
        obj.extend(o);
    }
    let parsed = from_value(Value::Object(obj));
    match file {
        Some(p) => parsed.map_err(|e| e.in_file(p)),
        None => parsed,
    }
}

pub fn load_pipeline_config(file: Option<&Path>, overrides: &impl Serialize) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = merge(file, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_scenario_config(file: Option<&Path>, overrides: &impl Serialize) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = merge(file, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_pipeline_config(path: &Path) -> Result<PipelineConfig> {
    load_pipeline_config(Some(path), &Map::new())
}
