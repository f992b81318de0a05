//! Scene files: JSON with top-level `{schema_version, scene}`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use streampred_core::scenario::Scene;

use crate::error::{AppError, Result};

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Serialize)]
struct SceneFileOut<'a> {
    schema_version: u64,
    scene: &'a Scene,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFileIn {
    #[allow(dead_code)]
    schema_version: u64,
    scene: Scene,
}

/// Parses JSON, mapping syntax errors (including truncation) to a
/// validation error at the reported line and column.
pub(crate) fn parse_json(bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes)
        .map_err(|e| AppError::validation(format!("line {} column {}", e.line(), e.column()), e.to_string()))
}

/// Deserializes with the failing field path in the error.
pub(crate) fn from_value<T: serde::de::DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        AppError::validation(path, e.into_inner().to_string())
    })
}

pub fn load_scene(bytes: &[u8]) -> Result<Scene> {
    let value = parse_json(bytes)?;
    let Some(obj) = value.as_object() else {
        return Err(AppError::validation(".", "scene file must be a JSON object"));
    };
    let version = match obj.get("schema_version") {
        None => return Err(AppError::validation("schema_version", "missing field")),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| AppError::validation("schema_version", "expected a non-negative integer"))?,
    };
    if version != SCHEMA_VERSION {
        return Err(AppError::Version { found: version, expected: SCHEMA_VERSION });
    }
    let file: SceneFileIn = from_value(value)?;
    file.scene.validate()?;
    Ok(file.scene)
}

/// Validates before serializing, so an invalid scene is never written.
pub fn save_scene(scene: &Scene) -> Result<Vec<u8>> {
    scene.validate()?;
    let mut out = serde_json::to_vec_pretty(&SceneFileOut { schema_version: SCHEMA_VERSION, scene })
        .map_err(|e| AppError::Usage(format!("scene serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

pub fn read_scene_file(path: &Path) -> Result<Scene> {
    let bytes = fs::read(path).map_err(|source| AppError::Io { path: path.into(), source })?;
    load_scene(&bytes).map_err(|e| e.in_file(path))
}

pub fn write_scene_file(path: &Path, scene: &Scene) -> Result<()> {
    let bytes = save_scene(scene)?;
    fs::write(path, bytes).map_err(|source| AppError::Io { path: path.into(), source })
}
