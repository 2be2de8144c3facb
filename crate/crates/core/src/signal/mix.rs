use super::{mean_square, AudioSignal};
use crate::error::{Error, Result};

/// Which samples count towards the SNR power estimates.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum MixScope {
    #[default]
    FullSignal,
    /// Only samples flagged `true` (same length as the speech) are measured.
    SpeechActive(Vec<bool>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub snr_db: f64,
    pub scope: MixScope,
}

impl MixSpec {
    pub fn full(snr_db: f64) -> Self {
        Self {
            snr_db,
            scope: MixScope::FullSignal,
        }
    }
}

/// Adds `noise` to `speech` scaled so the mixture has the requested SNR.
///
/// Noise shorter than the speech is tiled with wraparound; longer noise is
/// cropped from offset 0. The speech component is left unscaled.
pub fn mix_at_snr(speech: &AudioSignal, noise: &AudioSignal, spec: &MixSpec) -> Result<AudioSignal> {
    if !spec.snr_db.is_finite() {
        return Err(Error::InvalidParameter(format!("snr_db = {}", spec.snr_db)));
    }
    if speech.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::Contract(format!(
            "sample rates differ: speech {} Hz, noise {} Hz",
            speech.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    if noise.is_empty() {
        return Err(Error::Degenerate("empty noise".into()));
    }
    let n = speech.len();
    let fitted: Vec<f64> = noise.samples().iter().copied().cycle().take(n).collect();
    let (ps, pn) = match &spec.scope {
        MixScope::FullSignal => (speech.power(), mean_square(&fitted)),
        MixScope::SpeechActive(mask) => {
            if mask.len() != n {
                return Err(Error::Contract(format!(
                    "activity mask has {} entries for {n} samples",
                    mask.len()
                )));
            }
            let pick = |x: &[f64]| -> Vec<f64> {
                x.iter().zip(mask).filter(|(_, &m)| m).map(|(&v, _)| v).collect()
            };
            (mean_square(&pick(speech.samples())), mean_square(&pick(&fitted)))
        }
    };
    if ps <= 0.0 {
        return Err(Error::Degenerate("speech has zero power".into()));
    }
    if pn <= 0.0 {
        return Err(Error::Degenerate("noise has zero power".into()));
    }
    let gain = noise_gain(ps, pn, spec.snr_db);
    let mixed = speech
        .samples()
        .iter()
        .zip(&fitted)
        .map(|(s, v)| s + gain * v)
        .collect();
    AudioSignal::new(mixed, speech.sample_rate_hz())
}

/// Amplitude factor `g` solving `10 log10(ps / (g^2 pn)) = snr_db`.
pub(crate) fn noise_gain(ps: f64, pn: f64, snr_db: f64) -> f64 {
    (ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt()
}
