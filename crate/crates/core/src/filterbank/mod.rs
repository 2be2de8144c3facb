//! Gammachirp filterbank placed on the harmonic structure of a frame,
//! subtractive band splitting and gain reconstruction.

mod design;
mod recursive;

pub use design::{
    design_gammachirp, design_gammatone, impulse_response_table, GammachirpSpec, ImpulseResponse,
    TRUNCATION_LEVEL,
};
pub use recursive::{reconstruct_frame, recursive_filter, FilterOutputs};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch::FrameClass;

/// Centers above this fraction of the sample rate are dropped.
pub const MAX_CENTER_FRACTION: f64 = 0.45;

pub const GAINS_LOW: [f64; 10] = [14.0, 1.0, 4.0, 8.0, 4.0, 3.5, 3.0, 2.0, 2.0, 1.5];
pub const GAINS_HIGH: [f64; 10] = [14.0, 1.0, 1.0, 4.5, 2.0, 3.5, 2.5, 2.0, 1.5, 1.5];
pub const GTF_F0_GAINS: [f64; 4] = [5.0, 5.0, 4.0, 2.5];

/// How filter centers follow the frame's F0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    /// `f_ref * 2^(k/3)`.
    #[default]
    ThirdOctave,
    /// `(k + 1) * f_ref`.
    Harmonic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterbankConfig {
    #[serde(rename = "L")]
    pub num_filters: usize,
    /// Gammachirp asymmetry.
    pub c: f64,
    /// Filter order `n`.
    pub order: u32,
    /// Bandwidth as a fraction of the reference frequency.
    pub bandwidth_factor: f64,
    pub spacing: Spacing,
    pub gains_low: Vec<f64>,
    pub gains_high: Vec<f64>,
}

impl Default for FilterbankConfig {
    fn default() -> Self {
        Self {
            num_filters: 10,
            c: -1.0,
            order: 4,
            bandwidth_factor: 0.15,
            spacing: Spacing::ThirdOctave,
            gains_low: GAINS_LOW.to_vec(),
            gains_high: GAINS_HIGH.to_vec(),
        }
    }
}

impl FilterbankConfig {
    /// The GTF_F0 baseline: four gammatones on the first harmonics,
    /// `b = 0.25 F0`, fixed gains.
    pub fn gtf_f0() -> Self {
        Self {
            num_filters: 4,
            c: 0.0,
            order: 4,
            bandwidth_factor: 0.25,
            spacing: Spacing::Harmonic,
            gains_low: GTF_F0_GAINS.to_vec(),
            gains_high: GTF_F0_GAINS.to_vec(),
        }
    }

    /// Same layout with every gain at 1.
    pub fn with_unity_gains(&self) -> Self {
        Self {
            gains_low: vec![1.0; self.num_filters],
            gains_high: vec![1.0; self.num_filters],
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_filters == 0 {
            return Err(Error::Config("L must be at least 1".into()));
        }
        if self.order == 0 {
            return Err(Error::Config("order must be at least 1".into()));
        }
        if !(self.bandwidth_factor > 0.0 && self.bandwidth_factor.is_finite()) {
            return Err(Error::Config(format!("bandwidth_factor = {}", self.bandwidth_factor)));
        }
        if !self.c.is_finite() {
            return Err(Error::Config(format!("c = {}", self.c)));
        }
        for (name, g) in [("gains_low", &self.gains_low), ("gains_high", &self.gains_high)] {
            if g.len() != self.num_filters {
                return Err(Error::Config(format!(
                    "{name} has {} entries for L = {}",
                    g.len(),
                    self.num_filters
                )));
            }
            if let Some(v) = g.iter().find(|v| !(**v >= 1.0 && v.is_finite())) {
                return Err(Error::Config(format!("{name} entry {v} is below 1")));
            }
        }
        Ok(())
    }

    /// Gain profile for a voiced class; `None` for unvoiced frames.
    pub fn gains(&self, class: FrameClass) -> Option<&[f64]> {
        match class {
            FrameClass::LowPitch => Some(&self.gains_low),
            FrameClass::HighPitch => Some(&self.gains_high),
            FrameClass::Unvoiced => None,
        }
    }

    pub fn gains_mut(&mut self, class: FrameClass) -> Option<&mut Vec<f64>> {
        match class {
            FrameClass::LowPitch => Some(&mut self.gains_low),
            FrameClass::HighPitch => Some(&mut self.gains_high),
            FrameClass::Unvoiced => None,
        }
    }

    /// Center frequencies for reference `f_ref_hz`, and how many were dropped
    /// for lying above `MAX_CENTER_FRACTION * fs`.
    pub fn centers(&self, f_ref_hz: f64, sample_rate_hz: u32) -> (Vec<f64>, usize) {
        let all = match self.spacing {
            Spacing::ThirdOctave => third_octave_centers(f_ref_hz, self.num_filters),
            Spacing::Harmonic => (1..=self.num_filters).map(|k| k as f64 * f_ref_hz).collect(),
        };
        let limit = MAX_CENTER_FRACTION * sample_rate_hz as f64;
        let kept: Vec<f64> = all.iter().copied().take_while(|&f| f <= limit).collect();
        let dropped = all.len() - kept.len();
        (kept, dropped)
    }
}

/// Third-octave ladder `f_adj * 2^(k/3)`, `k = 0..l`.
///
/// Built as `(f_adj * 2^(m/3)) * 2^q` with `k = 3q + m`, so every third
/// center is exactly double.
pub fn third_octave_centers(f_adj_hz: f64, l: usize) -> Vec<f64> {
    let steps = [1.0, 2f64.powf(1.0 / 3.0), 2f64.powf(2.0 / 3.0)];
    (0..l)
        .map(|k| f_adj_hz * steps[k % 3] * 2f64.powi((k / 3) as i32))
        .collect()
}

/// Gain set printed for the two pitch classes.
pub fn default_gains(class: FrameClass) -> Option<[f64; 10]> {
    match class {
        FrameClass::LowPitch => Some(GAINS_LOW),
        FrameClass::HighPitch => Some(GAINS_HIGH),
        FrameClass::Unvoiced => None,
    }
}

/// Filters designed for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank {
    pub centers_hz: Vec<f64>,
    pub bandwidth_hz: f64,
    /// Centers dropped near Nyquist.
    pub dropped: usize,
    pub filters: Vec<ImpulseResponse>,
}

impl Filterbank {
    /// Designs the bank around `f_ref_hz`. Each filter's support is capped at
    /// `frame_len` samples per side, beyond which a frame-truncated
    /// convolution cannot see it anyway.
    pub fn design(
        cfg: &FilterbankConfig,
        f_ref_hz: f64,
        sample_rate_hz: u32,
        frame_len: usize,
    ) -> Result<Self> {
        if !(f_ref_hz > 0.0 && f_ref_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("reference frequency {f_ref_hz} Hz")));
        }
        let (centers_hz, dropped) = cfg.centers(f_ref_hz, sample_rate_hz);
        let bandwidth_hz = cfg.bandwidth_factor * f_ref_hz;
        let filters = centers_hz
            .iter()
            .map(|&fc| {
                let spec = GammachirpSpec::new(fc, bandwidth_hz, cfg.c, cfg.order, frame_len.max(1))?;
                design_gammachirp(&spec, sample_rate_hz)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            centers_hz,
            bandwidth_hz,
            dropped,
            filters,
        })
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }

    /// Filters, applies the leading `len()` gains, and reconstructs.
    pub fn process(&self, frame: &[f64], gains: &[f64]) -> Result<Vec<f64>> {
        if gains.len() < self.len() {
            return Err(Error::Contract(format!(
                "{} gains for {} filters",
                gains.len(),
                self.len()
            )));
        }
        let outputs = recursive_filter(frame, &self.filters);
        reconstruct_frame(&outputs, &gains[..self.len()])
    }
}
