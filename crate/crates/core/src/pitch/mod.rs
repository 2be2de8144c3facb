//! F0 estimation from EEMD envelopes, FSFFE low/high pitch separation and
//! octave-error correction.

mod acf;
mod fsffe;
mod labels;

pub use acf::{acf, f0_candidate, periodicity_candidate, strongest_candidate, F0Candidate, F0SearchRange};
pub use fsffe::{
    adjust_f0, fsffe_classify, normalized_distance, DistanceMatrix, FrameClass, FsffeResult,
    DEFAULT_GAMMA_HZ, FSFFE_MODES,
};
pub use labels::{FrameLabel, VoicingLabels};

use serde::{Deserialize, Serialize};

use crate::emd::{analytic_envelope, eemd_decompose, EemdConfig, ImfSet};
use crate::error::Result;

/// Which built-in estimator fills the per-IMF FSFFE vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerImfEstimator {
    /// ACF of the IMF's analytic envelope.
    #[default]
    Envelope,
    /// ACF of the IMF waveform.
    Waveform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchConfig {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Minimum normalized ACF peak height for a voiced candidate.
    pub voicing_threshold: f64,
    pub gamma_hz: f64,
    pub per_imf_estimator: PerImfEstimator,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            f_min_hz: 50.0,
            f_max_hz: 400.0,
            voicing_threshold: 0.30,
            gamma_hz: DEFAULT_GAMMA_HZ,
            per_imf_estimator: PerImfEstimator::default(),
        }
    }
}

impl PitchConfig {
    pub fn range(&self, sample_rate_hz: u32) -> Result<F0SearchRange> {
        F0SearchRange::new(self.f_min_hz, self.f_max_hz, sample_rate_hz)
    }

    /// The configured per-IMF estimator.
    pub fn estimator(&self) -> Box<dyn PitchEstimator> {
        let voicing_threshold = self.voicing_threshold;
        match self.per_imf_estimator {
            PerImfEstimator::Envelope => Box::new(EnvelopeAcfEstimator { voicing_threshold }),
            PerImfEstimator::Waveform => Box::new(AcfPitchEstimator { voicing_threshold }),
        }
    }
}

/// Per-IMF pitch estimator feeding the FSFFE vector.
pub trait PitchEstimator {
    fn estimate(&self, imf: &[f64], range: &F0SearchRange) -> Option<f64>;
}

/// Autocorrelation peak picking on the IMF's analytic envelope, the same
/// kernel HHT-Amp uses.
#[derive(Debug, Clone, Copy)]
pub struct EnvelopeAcfEstimator {
    pub voicing_threshold: f64,
}

impl Default for EnvelopeAcfEstimator {
    fn default() -> Self {
        Self {
            voicing_threshold: PitchConfig::default().voicing_threshold,
        }
    }
}

impl PitchEstimator for EnvelopeAcfEstimator {
    fn estimate(&self, imf: &[f64], range: &F0SearchRange) -> Option<f64> {
        f0_candidate(&analytic_envelope(imf), range, self.voicing_threshold)
            .ok()
            .flatten()
            .map(|c| c.f0_hz)
    }
}

/// Autocorrelation peak picking on the IMF waveform itself.
#[derive(Debug, Clone, Copy)]
pub struct AcfPitchEstimator {
    pub voicing_threshold: f64,
}

impl Default for AcfPitchEstimator {
    fn default() -> Self {
        Self {
            voicing_threshold: PitchConfig::default().voicing_threshold,
        }
    }
}

impl PitchEstimator for AcfPitchEstimator {
    fn estimate(&self, imf: &[f64], range: &F0SearchRange) -> Option<f64> {
        periodicity_candidate(imf, range, self.voicing_threshold)
            .ok()
            .flatten()
            .map(|c| c.f0_hz)
    }
}

/// Everything the pitch stage learns about one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PitchFrame {
    pub f_est_hz: Option<f64>,
    pub per_imf_f0: [Option<f64>; FSFFE_MODES],
    /// HHT-Amp candidates of the leading IMFs, in IMF order.
    pub candidates: [Option<F0Candidate>; FSFFE_MODES],
    pub f_bar_hz: Option<f64>,
    pub class: FrameClass,
    pub f_adj_hz: Option<f64>,
    pub distances: Option<DistanceMatrix>,
    /// True when FSFFE had too few estimates and the class came from `f_est`.
    pub fsffe_fallback: bool,
    /// True when no candidate passed the voicing threshold and the strongest
    /// peak was used because the frame was known to be voiced.
    pub forced: bool,
}

impl PitchFrame {
    pub fn unvoiced() -> Self {
        Self {
            f_est_hz: None,
            per_imf_f0: [None; FSFFE_MODES],
            candidates: [None; FSFFE_MODES],
            f_bar_hz: None,
            class: FrameClass::Unvoiced,
            f_adj_hz: None,
            distances: None,
            fsffe_fallback: false,
            forced: false,
        }
    }
}

/// HHT-Amp candidates of the first four modes (one per mode).
pub fn imf_candidates(
    imfs: &ImfSet,
    range: &F0SearchRange,
    voicing_threshold: f64,
) -> Result<[Option<F0Candidate>; FSFFE_MODES]> {
    let mut out = [None; FSFFE_MODES];
    for (slot, imf) in out.iter_mut().zip(&imfs.imfs) {
        *slot = f0_candidate(&analytic_envelope(imf), range, voicing_threshold)?;
    }
    Ok(out)
}

/// Strongest envelope peak of each of the first four modes, ignoring the
/// voicing threshold.
pub fn forced_imf_candidates(imfs: &ImfSet, range: &F0SearchRange) -> Result<[Option<F0Candidate>; FSFFE_MODES]> {
    let mut out = [None; FSFFE_MODES];
    for (slot, imf) in out.iter_mut().zip(&imfs.imfs) {
        *slot = strongest_candidate(analytic_envelope(imf).values(), range)?;
    }
    Ok(out)
}

/// The candidate with the largest salience; ties go to the earlier mode.
pub fn select_candidate(candidates: &[Option<F0Candidate>]) -> Option<F0Candidate> {
    candidates
        .iter()
        .flatten()
        .fold(None, |best: Option<F0Candidate>, c| match best {
            Some(b) if b.salience >= c.salience => Some(b),
            _ => Some(*c),
        })
}

/// Per-IMF F0 vector of the first four modes; missing modes stay `None`.
pub fn per_imf_pitch_vector(
    imfs: &ImfSet,
    range: &F0SearchRange,
    estimator: &dyn PitchEstimator,
) -> [Option<f64>; FSFFE_MODES] {
    let mut out = [None; FSFFE_MODES];
    for (slot, imf) in out.iter_mut().zip(&imfs.imfs) {
        *slot = estimator.estimate(imf, range);
    }
    out
}

/// HHT-Amp F0 estimate of one frame, `None` when no mode is periodic.
pub fn hht_amp_estimate(
    frame: &[f64],
    range: &F0SearchRange,
    eemd: &EemdConfig,
    voicing_threshold: f64,
) -> Result<Option<f64>> {
    let imfs = eemd_decompose(frame, eemd)?;
    let candidates = imf_candidates(&imfs, range, voicing_threshold)?;
    Ok(select_candidate(&candidates).map(|c| c.f0_hz))
}

/// Full per-frame pitch analysis: one EEMD shared by HHT-Amp and FSFFE,
/// then classification and octave correction.
///
/// With `known_voiced` (voicing from reference labels) a frame whose
/// envelopes all fall below the voicing threshold still gets the strongest
/// envelope peak as its estimate. The adjusted F0 is clamped to at most
/// twice `f_max`.
pub fn analyze_frame(
    frame: &[f64],
    sample_rate_hz: u32,
    cfg: &PitchConfig,
    eemd: &EemdConfig,
    estimator: &dyn PitchEstimator,
    known_voiced: bool,
) -> Result<PitchFrame> {
    let range = cfg.range(sample_rate_hz)?;
    let imfs = eemd_decompose(frame, eemd)?;
    let mut candidates = imf_candidates(&imfs, &range, cfg.voicing_threshold)?;
    let mut forced = false;
    if known_voiced && select_candidate(&candidates).is_none() {
        candidates = forced_imf_candidates(&imfs, &range)?;
        forced = true;
    }
    let Some(best) = select_candidate(&candidates) else {
        return Ok(PitchFrame {
            candidates,
            ..PitchFrame::unvoiced()
        });
    };
    let f_est = best.f0_hz;
    let per_imf_f0 = per_imf_pitch_vector(&imfs, &range, estimator);
    let (class, f_bar, distances, fallback) = match fsffe_classify(&per_imf_f0, cfg.gamma_hz) {
        Ok(r) => (r.class, Some(r.f_bar_hz), Some(r.distances), false),
        Err(_) => (FrameClass::from_f0(f_est, cfg.gamma_hz), None, None, true),
    };
    // Without a consensus class there is nothing to correct against.
    let f_adj = if fallback {
        f_est
    } else {
        adjust_f0(f_est, class)
    }
    .min(2.0 * cfg.f_max_hz);
    Ok(PitchFrame {
        f_est_hz: Some(f_est),
        per_imf_f0,
        candidates,
        f_bar_hz: f_bar,
        class,
        f_adj_hz: Some(f_adj),
        distances,
        fsffe_fallback: fallback,
        forced,
    })
}
