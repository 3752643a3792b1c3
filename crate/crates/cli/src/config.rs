//! Optional JSON run configuration. Command-line flags take precedence over
//! the file, and the file over built-in defaults.

use std::path::{Path, PathBuf};

use imitate_core::{ImitationMode, KernelConfig, RgdConfig};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelConfig>,
    pub mode: Option<ImitationMode>,
    pub delta: Option<f64>,
    pub rgd: Option<RgdConfig>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub io: IoPaths,
}

/// Uniform grid of `count` points from `start` to `end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoPaths {
    pub data: Option<PathBuf>,
    pub via: Option<PathBuf>,
    pub superpose: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = crate::io::read_text(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e.to_string()))?;
        cfg.validate().map_err(|e| CliError::parse(path, e))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        if let Some(k) = &self.kernel {
            k.validate().map_err(|e| format!("kernel: {e}"))?;
        }
        if let Some(r) = &self.rgd {
            r.validate().map_err(|e| format!("rgd: {e}"))?;
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(format!("delta: must be positive, got {d}"));
            }
        }
        if let Some(g) = &self.grid {
            g.validate().map_err(|e| format!("grid: {e}"))?;
        }
        Ok(())
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.count == 0 {
            return Err("count must be at least 1".into());
        }
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err("start and end must be finite".into());
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `start:end:count`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, end, count] = parts[..] else {
            return Err(format!("expected start:end:count, got '{s}'"));
        };
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}"));
        let grid = GridSpec {
            start: num(start)?,
            end: num(end)?,
            count: count.trim().parse().map_err(|e| format!("'{count}': {e}"))?,
        };
        grid.validate()?;
        Ok(grid)
    }
}
