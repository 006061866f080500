//! Tool configuration and its discovery order: explicit flag, then the
//! `XTRAMAC_CONFIG` environment variable, then `./xtramac.json`.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use xtramac_core::gemv::{GemvConfig, Platform};
use xtramac_core::pipeline::{EvalMode, MacConfig};
use xtramac_core::{FormatRegistry, MacDatatype};

use crate::formats_file::FormatsFile;
use crate::schema;

pub const ENV_VAR: &str = "XTRAMAC_CONFIG";
pub const DEFAULT_FILE: &str = "xtramac.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    /// Path to a `formats.json`, relative to the config file.
    #[serde(default)]
    pub formats: Option<PathBuf>,
    #[serde(default)]
    pub stage_depths: Option<[usize; 4]>,
    #[serde(default)]
    pub fast: bool,
    #[serde(default)]
    pub gemv: Option<GemvConfig>,
    #[serde(default)]
    pub platform: Option<Platform>,
}

/// A loaded configuration plus where it came from.
#[derive(Debug, Clone, Default)]
pub struct Loaded {
    pub config: ToolConfig,
    pub source: Option<PathBuf>,
    pub registry: FormatRegistry,
}

impl Loaded {
    pub fn mac_config(&self, datatypes: &[MacDatatype]) -> anyhow::Result<MacConfig> {
        let mut cfg = MacConfig::new(datatypes)?;
        if let Some(d) = self.config.stage_depths {
            cfg = cfg.with_stage_depths(d)?;
        }
        if self.config.fast {
            cfg = cfg.with_mode(EvalMode::Fast);
        }
        Ok(cfg)
    }

    pub fn gemv(&self) -> GemvConfig {
        self.config.gemv.clone().unwrap_or_else(GemvConfig::u55c)
    }

    pub fn platform(&self) -> Platform {
        self.config.platform.clone().unwrap_or_else(Platform::v80)
    }
}

/// Picks the config file per the discovery order; `None` means built-in
/// defaults.
pub fn locate(flag: Option<&Path>, env: Option<&str>, cwd: &Path) -> Option<PathBuf> {
    if let Some(p) = flag {
        return Some(p.to_path_buf());
    }
    if let Some(p) = env.filter(|s| !s.is_empty()) {
        return Some(PathBuf::from(p));
    }
    let local = cwd.join(DEFAULT_FILE);
    local.is_file().then_some(local)
}

pub fn load(path: Option<&Path>) -> anyhow::Result<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded::default());
    };
    let config: ToolConfig = schema::read_json(path)?;
    let registry = match &config.formats {
        None => FormatRegistry::default(),
        Some(rel) => {
            let base = path.parent().unwrap_or(Path::new("."));
            let file: FormatsFile = schema::read_json(&base.join(rel))?;
            file.registry()
                .with_context(|| format!("formats file {}", rel.display()))?
        }
    };
    Ok(Loaded {
        config,
        source: Some(path.to_path_buf()),
        registry,
    })
}

/// Discovers and loads the configuration for this process.
pub fn discover(flag: Option<&Path>) -> anyhow::Result<Loaded> {
    let env = std::env::var(ENV_VAR).ok();
    let cwd = std::env::current_dir()?;
    load(locate(flag, env.as_deref(), &cwd).as_deref())
}
