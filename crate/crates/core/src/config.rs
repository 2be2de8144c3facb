//! Effective pipeline configuration, read from TOML with one section per
//! stage. Every field has a default, so any subset may be given.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emd::EemdConfig;
use crate::error::{Error, Result};
use crate::filterbank::FilterbankConfig;
use crate::metrics::EstoiConfig;
use crate::pitch::PitchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrameConfig {
    pub frame_ms: f64,
    pub overlap: f64,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_ms: 32.0,
            overlap: 0.5,
        }
    }
}

/// What the filters see beyond the edges of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameBoundary {
    /// Zeros: each frame is filtered in isolation.
    Zero,
    /// The neighbouring input samples, one frame length on each side.
    #[default]
    Context,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceOptions {
    /// Scale the output down when its peak exceeds `peak_target`.
    pub normalize: bool,
    pub peak_target: f64,
    /// Without labels, frames this far below the loudest frame skip pitch
    /// analysis and pass through.
    pub energy_gate_db: f64,
    pub boundary: FrameBoundary,
}

impl Default for EnhanceOptions {
    fn default() -> Self {
        Self {
            normalize: true,
            peak_target: 0.99,
            energy_gate_db: 40.0,
            boundary: FrameBoundary::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub frame: FrameConfig,
    pub eemd: EemdConfig,
    pub pitch: PitchConfig,
    pub filterbank: FilterbankConfig,
    pub enhance: EnhanceOptions,
    pub estoi: EstoiConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// The TOML form with every line prefixed by `# `, for report headers.
    pub fn header(&self) -> String {
        self.to_toml()
            .lines()
            .map(|l| format!("# {l}\n"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.frame;
        if !(f.frame_ms > 0.0 && (0.0..1.0).contains(&f.overlap)) {
            return Err(Error::Config(format!("frame settings {f:?}")));
        }
        if self.eemd.ensemble_size == 0 || self.eemd.max_imfs == 0 {
            return Err(Error::Config("eemd ensemble_size and max_imfs must be positive".into()));
        }
        if !(self.eemd.noise_std_ratio >= 0.0) {
            return Err(Error::Config("eemd noise_std_ratio must be nonnegative".into()));
        }
        let p = &self.pitch;
        if !(p.f_min_hz > 0.0 && p.f_min_hz < p.f_max_hz && p.gamma_hz > 0.0) {
            return Err(Error::Config(format!("pitch settings {p:?}")));
        }
        self.filterbank.validate()?;
        let e = &self.enhance;
        if !(e.peak_target > 0.0 && e.peak_target <= 1.0 && e.energy_gate_db > 0.0) {
            return Err(Error::Config(format!("enhance settings {e:?}")));
        }
        Ok(())
    }
}
