use std::path::Path;

use serde::{Deserialize, Serialize};
use windlayout::driver::RunConfig;
use windlayout::wind_resource::SectorAlignment;
use windlayout::{Error, FarmBoundary, Result};

/// Farm configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarmConfig {
    #[serde(default)]
    pub name: String,
    /// Four corners, counter-clockwise, meters.
    pub boundary: FarmBoundary,
    /// Surface roughness length, m.
    pub z0_m: f64,
    #[serde(default = "default_sectors")]
    pub n_sectors: usize,
    #[serde(default)]
    pub sector_alignment: SectorAlignment,
    /// Selling price, €/kWh.
    #[serde(default)]
    pub price_eur_per_kwh: Option<f64>,
    /// Production cost, €/kWh.
    #[serde(default)]
    pub cost_eur_per_kwh: Option<f64>,
    /// Run settings used when no flag overrides them.
    #[serde(default)]
    pub defaults: RunConfig,
}

fn default_sectors() -> usize {
    12
}

impl FarmConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: FarmConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })?;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message,
        };
        if !(cfg.z0_m > 0.0 && cfg.z0_m.is_finite()) {
            return Err(bad("z0_m must be positive".into()));
        }
        if cfg.n_sectors == 0 {
            return Err(bad("n_sectors must be at least 1".into()));
        }
        cfg.defaults.validate().map_err(|e| bad(format!("defaults: {e}")))?;
        Ok(cfg)
    }

    /// Price minus cost, when both are configured.
    pub fn margin_eur_per_kwh(&self) -> Option<(f64, f64)> {
        self.price_eur_per_kwh.zip(self.cost_eur_per_kwh)
    }
}
