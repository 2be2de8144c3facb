//! Per-frame voicing and reference-F0 sidecar files.
//!
//! One line per frame: `frame_index v|uv f0_hz`, separated by whitespace or
//! commas. Lines starting with `#` are comments. Unvoiced frames carry an F0
//! of 0.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameLabel {
    pub frame_index: usize,
    pub voiced: bool,
    pub f0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VoicingLabels {
    pub frames: Vec<FrameLabel>,
}

impl VoicingLabels {
    pub fn parse(text: &str) -> Result<Self> {
        let mut frames = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Format(format!("labels line {}: {what}", lineno + 1));
            let mut fields = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty());
            let idx = fields.next().ok_or_else(|| bad("missing frame index"))?;
            let flag = fields.next().ok_or_else(|| bad("missing v/uv flag"))?;
            let f0 = fields.next().ok_or_else(|| bad("missing f0"))?;
            if fields.next().is_some() {
                return Err(bad("trailing fields"));
            }
            let frame_index = idx.parse().map_err(|_| bad("bad frame index"))?;
            let voiced = match flag {
                "v" | "V" | "1" => true,
                "uv" | "UV" | "u" | "0" => false,
                _ => return Err(bad("flag must be v or uv")),
            };
            let f0_hz: f64 = f0.parse().map_err(|_| bad("bad f0"))?;
            if !f0_hz.is_finite() || f0_hz < 0.0 {
                return Err(bad("f0 must be finite and nonnegative"));
            }
            frames.push(FrameLabel {
                frame_index,
                voiced,
                f0_hz,
            });
        }
        Ok(Self { frames })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# frame_index v/uv f0_hz\n");
        for f in &self.frames {
            let flag = if f.voiced { "v" } else { "uv" };
            let _ = writeln!(s, "{} {} {:.3}", f.frame_index, flag, f.f0_hz);
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Voicing flags for `count` frames; frames without a label are unvoiced.
    pub fn voiced_mask(&self, count: usize) -> Vec<bool> {
        let mut mask = vec![false; count];
        for f in &self.frames {
            if f.frame_index < count {
                mask[f.frame_index] = f.voiced;
            }
        }
        mask
    }

    pub fn get(&self, frame_index: usize) -> Option<&FrameLabel> {
        self.frames.iter().find(|f| f.frame_index == frame_index)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let text = "# header\n0 uv 0\n1, v, 120.5\n2\tv\t121.0\n";
        let l = VoicingLabels::parse(text).unwrap();
        assert_eq!(l.frames.len(), 3);
        assert!(l.frames[1].voiced);
        assert_eq!(l.frames[1].f0_hz, 120.5);
        assert_eq!(VoicingLabels::parse(&l.to_text()).unwrap(), l);
        assert_eq!(l.voiced_mask(5), vec![false, true, true, false, false]);
    }

    #[test]
    fn rejects_bad_flag() {
        assert!(VoicingLabels::parse("0 maybe 100").is_err());
        assert!(VoicingLabels::parse("0 v").is_err());
        assert!(VoicingLabels::parse("0 v -3").is_err());
    }
}
