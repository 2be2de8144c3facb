use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{Error, Result};

/// Processing compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unprocessed,
    Hdag,
    GtfF0,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Unprocessed => "unprocessed",
            Method::Hdag => "hdag",
            Method::GtfF0 => "gtf_f0",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unprocessed" | "unp" => Ok(Method::Unprocessed),
            "hdag" => Ok(Method::Hdag),
            "gtf_f0" | "gtf" => Ok(Method::GtfF0),
            _ => Err(Error::InvalidParameter(format!(
                "unknown method {s:?} (expected hdag, gtf_f0 or unprocessed)"
            ))),
        }
    }
}

/// A noise in the grid: generated, or read from a WAV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NoiseSource {
    White,
    /// Speech-shaped: spectral tilt fitted to the clean corpus.
    SpeechShaped,
    File(PathBuf),
}

impl NoiseSource {
    /// `"white"`, `"ssn"` or a path.
    pub fn parse(s: &str) -> Self {
        match s {
            "white" => NoiseSource::White,
            "ssn" | "speech_shaped" => NoiseSource::SpeechShaped,
            _ => NoiseSource::File(PathBuf::from(s)),
        }
    }

    /// Short name used in output tables.
    pub fn name(&self) -> String {
        match self {
            NoiseSource::White => "white".into(),
            NoiseSource::SpeechShaped => "ssn".into(),
            NoiseSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }
}

/// Generated clean material, for runs without a speech corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpus {
    pub count: usize,
    pub sample_rate_hz: u32,
    pub duration_s: f64,
    pub f0_hz: f64,
}

impl Default for SyntheticCorpus {
    fn default() -> Self {
        Self {
            count: 4,
            sample_rate_hz: 16_000,
            duration_s: 2.0,
            f0_hz: 120.0,
        }
    }
}

/// An experiment grid: clean files × noises × SNRs × methods.
///
/// Relative paths are resolved against the manifest's directory by
/// [`JobManifest::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobManifest {
    /// Every `*.wav` in this directory, sorted by name.
    #[serde(default)]
    pub clean_dir: Option<PathBuf>,
    /// Explicit clean files, used before those from `clean_dir`.
    #[serde(default)]
    pub files: Vec<PathBuf>,
    #[serde(default)]
    pub synthetic: Option<SyntheticCorpus>,
    /// Named file lists, e.g. a train/test split of a corpus.
    #[serde(default)]
    pub splits: BTreeMap<String, Vec<PathBuf>>,
    /// Runs one entry of `splits` instead of `files` and `clean_dir`.
    #[serde(default)]
    pub split: Option<String>,
    /// `"white"`, `"ssn"` or WAV paths.
    pub noises: Vec<String>,
    pub snr_list_db: Vec<f64>,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Write every processed mixture to `output_dir/audio`.
    #[serde(default)]
    pub write_audio: bool,
    /// Pipeline overrides, same sections as a config file.
    #[serde(default)]
    pub config: Config,
}

impl JobManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    /// Reads a manifest and resolves its relative paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::from_toml_str(&text)?;
        if let Some(base) = path.parent() {
            m.resolve_paths(base);
        }
        Ok(m)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(d) = self.clean_dir.as_mut() {
            fix(d);
        }
        self.files.iter_mut().for_each(fix);
        self.splits.values_mut().flatten().for_each(fix);
        fix(&mut self.output_dir);
        for n in &mut self.noises {
            if let NoiseSource::File(p) = NoiseSource::parse(n) {
                if p.is_relative() {
                    *n = base.join(p).to_string_lossy().into_owned();
                }
            }
        }
    }

    pub fn noise_sources(&self) -> Vec<NoiseSource> {
        self.noises.iter().map(|s| NoiseSource::parse(s)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.snr_list_db.is_empty() {
            return bad("snr_list_db is empty");
        }
        if self.snr_list_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_list_db has a non-finite value");
        }
        if self.methods.is_empty() {
            return bad("methods is empty");
        }
        if self.noises.is_empty() {
            return bad("noises is empty");
        }
        if self.clean_dir.is_none() && self.files.is_empty() && self.synthetic.is_none() && self.split.is_none() {
            return bad("no clean material: set clean_dir, files, split or synthetic");
        }
        if let Some(s) = &self.split {
            if !self.splits.contains_key(s) {
                return Err(Error::InvalidParameter(format!("split {s:?} is not declared")));
            }
        }
        if let Some(s) = &self.synthetic {
            if s.count == 0 || !(s.duration_s > 0.0) {
                return bad("synthetic corpus needs count > 0 and a positive duration");
            }
        }
        self.config.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        files = ["a.wav"]
        noises = ["white", "ssn", "noise/babble.wav"]
        snr_list_db = [0.0, 5.0]
        methods = ["unprocessed", "hdag"]
        output_dir = "out"
        seed = 7

        [config.filterbank]
        c = 0.5
    "#;

    #[test]
    fn parses_with_overrides() {
        let m = JobManifest::from_toml_str(MINIMAL).unwrap();
        assert_eq!(m.methods, vec![Method::Unprocessed, Method::Hdag]);
        assert_eq!(m.config.filterbank.c, 0.5);
        assert_eq!(m.config.filterbank.num_filters, 10);
        let noises = m.noise_sources();
        assert_eq!(noises[0], NoiseSource::White);
        assert_eq!(noises[1], NoiseSource::SpeechShaped);
        assert_eq!(noises[2].name(), "babble");
    }

    #[test]
    fn resolves_relative_paths() {
        let mut m = JobManifest::from_toml_str(MINIMAL).unwrap();
        m.resolve_paths(Path::new("/data"));
        assert_eq!(m.files[0], PathBuf::from("/data/a.wav"));
        assert_eq!(m.output_dir, PathBuf::from("/data/out"));
        assert_eq!(m.noises[0], "white");
        assert_eq!(m.noises[2], "/data/noise/babble.wav");
    }

    #[test]
    fn rejects_empty_lists() {
        let text = MINIMAL.replace("snr_list_db = [0.0, 5.0]", "snr_list_db = []");
        assert!(JobManifest::from_toml_str(&text).is_err());
        let text = MINIMAL.replace(r#"methods = ["unprocessed", "hdag"]"#, "methods = []");
        assert!(JobManifest::from_toml_str(&text).is_err());
    }

    #[test]
    fn rejects_unknown_split() {
        let text = format!("split = \"test\"\n{MINIMAL}");
        assert!(JobManifest::from_toml_str(&text).is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Unprocessed, Method::Hdag, Method::GtfF0] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("pesq".parse::<Method>().is_err());
    }
}
