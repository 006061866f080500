//! Versioned JSON documents.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

/// A JSON object carrying `schema_version` next to the body's own fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versioned<T> {
    pub schema_version: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Versioned {
            schema_version: SCHEMA_VERSION,
            body,
        }
    }
}

pub fn to_json<T: Serialize>(body: &T) -> String {
    serde_json::to_string_pretty(&Versioned::new(body)).expect("report types serialize")
}

/// The version key is split off before the body is decoded, so bodies may
/// reject unknown fields.
pub fn from_json<T: DeserializeOwned>(text: &str) -> anyhow::Result<T> {
    let mut doc: serde_json::Value = serde_json::from_str(text)?;
    let Some(obj) = doc.as_object_mut() else {
        bail!("expected a JSON object");
    };
    match obj.remove("schema_version").map(|v| v.as_u64()) {
        Some(Some(v)) if v == SCHEMA_VERSION as u64 => {}
        Some(Some(v)) => bail!("unsupported schema_version {v} (this build reads {SCHEMA_VERSION})"),
        Some(None) => bail!("schema_version must be an integer"),
        None => bail!("missing schema_version"),
    }
    Ok(serde_json::from_value(doc)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_json(&text).with_context(|| format!("parsing {}", path.display()))
}
