//! `formats.json`: the float registry with per-format special-value flags.

use serde::{Deserialize, Serialize};
use xtramac_core::{FloatFormat, FloatKind, FormatRegistry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatEntry {
    pub name: String,
    pub exp_bits: u32,
    pub mant_bits: u32,
    pub encodes_infinity: bool,
    pub all_ones_exp_is_special: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatsFile {
    pub formats: Vec<FormatEntry>,
}

impl From<&FormatRegistry> for FormatsFile {
    fn from(registry: &FormatRegistry) -> Self {
        FormatsFile {
            formats: registry
                .floats()
                .iter()
                .map(|f| FormatEntry {
                    name: f.name().to_string(),
                    exp_bits: f.exp_bits(),
                    mant_bits: f.mant_bits(),
                    encodes_infinity: f.encodes_infinity(),
                    all_ones_exp_is_special: f.all_ones_exp_is_special(),
                })
                .collect(),
        }
    }
}

impl FormatsFile {
    pub fn registry(&self) -> anyhow::Result<FormatRegistry> {
        let floats = self
            .formats
            .iter()
            .map(|e| {
                let kind = FloatKind::from_name(&e.name)
                    .ok_or_else(|| anyhow::anyhow!("unknown float format {}", e.name))?;
                Ok(FloatFormat::new(
                    kind,
                    e.exp_bits,
                    e.mant_bits,
                    e.encodes_infinity,
                    e.all_ones_exp_is_special,
                )?)
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        Ok(FormatRegistry::new(floats)?)
    }
}
