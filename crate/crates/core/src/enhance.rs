//! Frame-wise HDAG enhancement: pitch analysis, filterbank band split, class
//! gains, overlap-add.
//!
//! The stages are separate so that parameter sweeps can reuse the expensive
//! pitch analysis and band split across many gain settings.

use std::fmt::Write as _;

use crate::config::{Config, EnhanceOptions, FrameBoundary};
use crate::error::{Error, Result};
use crate::filterbank::{recursive_filter, reconstruct_frame, FilterOutputs, Filterbank, FilterbankConfig, Spacing};
use crate::pitch::{analyze_frame, FrameClass, PitchFrame, VoicingLabels};
use crate::signal::{frame_signal, overlap_add, AudioSignal, FrameSequence};

/// Framed input plus per-frame pitch results.
#[derive(Debug, Clone)]
pub struct SignalAnalysis {
    pub source: AudioSignal,
    pub frames: FrameSequence,
    pub pitch: Vec<PitchFrame>,
}

/// Frames and analyses `noisy`.
///
/// Voicing comes from `labels` when given, and every labelled-voiced frame
/// gets an F0. Otherwise frames within `energy_gate_db` of the loudest frame
/// are candidates and the pitch stage decides; a frame is voiced when
/// HHT-Amp finds a peak above the voicing threshold.
pub fn analyze_signal(noisy: &AudioSignal, cfg: &Config, labels: Option<&VoicingLabels>) -> Result<SignalAnalysis> {
    cfg.validate()?;
    let mut frames = frame_signal(noisy, cfg.frame.frame_ms, cfg.frame.overlap)?;
    let candidates = match labels {
        Some(l) => l.voiced_mask(frames.len()),
        None => energy_gate(&frames.frames, cfg.enhance.energy_gate_db),
    };
    let estimator = cfg.pitch.estimator();
    let mut pitch = Vec::with_capacity(frames.len());
    for (q, frame) in frames.frames.iter().enumerate() {
        if !candidates[q] {
            pitch.push(PitchFrame::unvoiced());
            continue;
        }
        let eemd = crate::emd::EemdConfig {
            seed: cfg.eemd.seed.wrapping_add(q as u64),
            ..cfg.eemd
        };
        let known = labels.is_some();
        pitch.push(analyze_frame(frame, frames.sample_rate_hz, &cfg.pitch, &eemd, estimator.as_ref(), known)?);
    }
    frames.voiced_mask = pitch.iter().map(|p| p.class != FrameClass::Unvoiced).collect();
    Ok(SignalAnalysis {
        source: noisy.clone(),
        frames,
        pitch,
    })
}

fn energy_gate(frames: &[Vec<f64>], gate_db: f64) -> Vec<bool> {
    let energy: Vec<f64> = frames.iter().map(|f| f.iter().map(|v| v * v).sum()).collect();
    let loudest = energy.iter().copied().fold(0.0, f64::max);
    if loudest == 0.0 {
        return vec![false; frames.len()];
    }
    let floor = loudest * 10f64.powf(-gate_db / 10.0);
    energy.iter().map(|&e| e > 0.0 && e >= floor).collect()
}

/// `x[start - pad .. start + len + pad]`, zero outside the signal.
fn extended_segment(x: &[f64], start: usize, len: usize, pad: usize) -> Vec<f64> {
    (0..len + 2 * pad)
        .map(|i| {
            let j = (start + i) as isize - pad as isize;
            if j >= 0 && (j as usize) < x.len() {
                x[j as usize]
            } else {
                0.0
            }
        })
        .collect()
}

/// Band split of one voiced frame.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    pub class: FrameClass,
    /// Frequency the filterbank was built on.
    pub f_ref_hz: f64,
    pub centers_hz: Vec<f64>,
    pub dropped: usize,
    pub outputs: FilterOutputs,
}

/// Per-frame band splits; `None` marks pass-through frames.
#[derive(Debug, Clone)]
pub struct BandSplit {
    pub frames: Vec<Option<SplitFrame>>,
}

/// Reference frequency for the bank: the octave-corrected F0 for
/// third-octave spacing, the raw estimate for harmonic spacing.
fn reference_frequency(p: &PitchFrame, spacing: Spacing) -> Option<f64> {
    match spacing {
        Spacing::ThirdOctave => p.f_adj_hz,
        Spacing::Harmonic => p.f_est_hz,
    }
}

/// Filters every voiced frame. With [`FrameBoundary::Context`] the frame is
/// filtered inside a window of the input that extends one frame length on
/// both sides, and the frame's own samples are kept; bands and residual
/// still sum to the frame exactly.
pub fn split_bands(analysis: &SignalAnalysis, fb: &FilterbankConfig, boundary: FrameBoundary) -> Result<BandSplit> {
    fb.validate()?;
    let x = analysis.source.samples();
    let fs = analysis.frames.sample_rate_hz;
    let frame_len = analysis.frames.frame_len;
    let frames = analysis
        .frames
        .frames
        .iter()
        .zip(&analysis.pitch)
        .enumerate()
        .map(|(q, (frame, p))| {
            let Some(f_ref) = reference_frequency(p, fb.spacing) else {
                return Ok(None);
            };
            if p.class == FrameClass::Unvoiced {
                return Ok(None);
            }
            let bank = Filterbank::design(fb, f_ref, fs, frame_len)?;
            Ok(Some(SplitFrame {
                class: p.class,
                f_ref_hz: f_ref,
                outputs: match boundary {
                    FrameBoundary::Zero => recursive_filter(frame, &bank.filters),
                    FrameBoundary::Context => {
                        let start = analysis.frames.frame_start(q);
                        let ext = extended_segment(x, start, frame_len, frame_len);
                        let full = recursive_filter(&ext, &bank.filters);
                        let cut = |v: &[f64]| v[frame_len..2 * frame_len].to_vec();
                        FilterOutputs {
                            bands: full.bands.iter().map(|b| cut(b)).collect(),
                            // The frame may be zero-padded past the signal end.
                            residual: {
                                let mut r = frame.clone();
                                for b in &full.bands {
                                    for (ri, bi) in r.iter_mut().zip(cut(b)) {
                                        *ri -= bi;
                                    }
                                }
                                r
                            },
                        }
                    }
                },
                centers_hz: bank.centers_hz,
                dropped: bank.dropped,
            }))
        })
        .collect::<Result<_>>()?;
    Ok(BandSplit { frames })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameReport {
    pub index: usize,
    pub f_est_hz: Option<f64>,
    pub class: FrameClass,
    pub f_adj_hz: Option<f64>,
    pub f_ref_hz: Option<f64>,
    pub centers_hz: Vec<f64>,
    pub gains: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhancementReport {
    pub frames: Vec<FrameReport>,
    /// Factor applied to the whole output by peak normalization (1 if none).
    pub normalization_scale: f64,
}

impl EnhancementReport {
    pub fn voiced_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.class != FrameClass::Unvoiced).count()
    }

    /// Tab-separated per-frame table, preceded by `header` lines.
    pub fn to_text(&self, header: &str) -> String {
        let mut s = String::from(header);
        let _ = writeln!(s, "# normalization_scale = {:.9}", self.normalization_scale);
        s.push_str("frame\tclass\tf_est_hz\tf_adj_hz\tf_ref_hz\tnum_filters\tgains\n");
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |f| format!("{f:.3}"));
        for f in &self.frames {
            let gains = if f.gains.is_empty() {
                "-".to_string()
            } else {
                f.gains.iter().map(|g| format!("{g}")).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                f.index,
                f.class.as_str(),
                opt(f.f_est_hz),
                opt(f.f_adj_hz),
                opt(f.f_ref_hz),
                f.centers_hz.len(),
                gains
            );
        }
        s
    }
}

/// Applies the class gains of `fb` to each split frame and overlap-adds.
pub fn synthesize(
    analysis: &SignalAnalysis,
    split: &BandSplit,
    fb: &FilterbankConfig,
    opts: &EnhanceOptions,
) -> Result<(AudioSignal, EnhancementReport)> {
    if split.frames.len() != analysis.frames.len() {
        return Err(Error::Contract("band split does not match the analysis".into()));
    }
    let mut out = analysis.frames.clone();
    let mut reports = Vec::with_capacity(split.frames.len());
    for (q, (s, p)) in split.frames.iter().zip(&analysis.pitch).enumerate() {
        let mut report = FrameReport {
            index: q,
            f_est_hz: p.f_est_hz,
            class: p.class,
            f_adj_hz: p.f_adj_hz,
            f_ref_hz: None,
            centers_hz: Vec::new(),
            gains: Vec::new(),
        };
        if let Some(s) = s {
            let gains = fb
                .gains(s.class)
                .ok_or_else(|| Error::Contract("split frame without a voiced class".into()))?;
            let gains = &gains[..s.outputs.num_bands()];
            out.frames[q] = reconstruct_frame(&s.outputs, gains)?;
            report.f_ref_hz = Some(s.f_ref_hz);
            report.centers_hz = s.centers_hz.clone();
            report.gains = gains.to_vec();
        }
        reports.push(report);
    }
    let mut signal = overlap_add(&out)?;
    let mut scale = 1.0;
    if opts.normalize && signal.peak() > opts.peak_target {
        scale = opts.peak_target / signal.peak();
        signal = signal.scaled(scale);
    }
    if signal.samples().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite output sample".into()));
    }
    Ok((
        signal,
        EnhancementReport {
            frames: reports,
            normalization_scale: scale,
        },
    ))
}

/// Runs the whole pipeline with `cfg.filterbank`.
pub fn enhance_signal(
    noisy: &AudioSignal,
    cfg: &Config,
    labels: Option<&VoicingLabels>,
) -> Result<(AudioSignal, EnhancementReport)> {
    let analysis = analyze_signal(noisy, cfg, labels)?;
    let split = split_bands(&analysis, &cfg.filterbank, cfg.enhance.boundary)?;
    synthesize(&analysis, &split, &cfg.filterbank, &cfg.enhance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_utterance, white_noise, UtteranceSpec};

    fn fast_config() -> Config {
        let mut cfg = Config::default();
        cfg.eemd.ensemble_size = 4;
        cfg
    }

    #[test]
    fn silence_passes_through() {
        let x = AudioSignal::new(vec![0.0; 4000], 16_000).unwrap();
        let (y, report) = enhance_signal(&x, &fast_config(), None).unwrap();
        assert_eq!(y, x);
        assert_eq!(report.voiced_frames(), 0);
    }

    #[test]
    fn all_unvoiced_labels_pass_through() {
        let x = white_noise(8000, 16_000, 1).unwrap().scaled(0.1);
        let labels = VoicingLabels::default();
        let (y, _) = enhance_signal(&x, &fast_config(), Some(&labels)).unwrap();
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unity_gains_reproduce_input() {
        let u = synth_utterance(&UtteranceSpec::default(), 16_000, 4).unwrap();
        let mut cfg = fast_config();
        cfg.filterbank = cfg.filterbank.with_unity_gains();
        cfg.enhance.normalize = false;
        let (y, report) = enhance_signal(&u.signal, &cfg, Some(&u.labels)).unwrap();
        assert!(report.voiced_frames() > 10);
        let err: f64 = u.signal.samples().iter().zip(y.samples()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((err / u.signal.power() / u.signal.len() as f64).sqrt() < 1e-6);
    }

    #[test]
    fn gains_change_voiced_frames_and_stay_in_range() {
        let u = synth_utterance(&UtteranceSpec::default(), 16_000, 9).unwrap();
        let (y, report) = enhance_signal(&u.signal, &fast_config(), Some(&u.labels)).unwrap();
        assert!(y.peak() <= 0.99 + 1e-12);
        assert!(report.normalization_scale <= 1.0);
        let voiced = report.frames.iter().find(|f| f.class != FrameClass::Unvoiced).unwrap();
        assert_eq!(voiced.gains.len(), voiced.centers_hz.len());
        assert!(voiced.gains[0] == 14.0);
        let text = report.to_text("# hi\n");
        assert!(text.starts_with("# hi\n# normalization_scale"));
        assert_eq!(text.lines().count(), 3 + report.frames.len());
    }

    #[test]
    fn gtf_f0_uses_four_harmonic_filters() {
        let u = synth_utterance(&UtteranceSpec::default(), 16_000, 2).unwrap();
        let mut cfg = fast_config();
        cfg.filterbank = FilterbankConfig::gtf_f0();
        let (_, report) = enhance_signal(&u.signal, &cfg, Some(&u.labels)).unwrap();
        for f in report.frames.iter().filter(|f| f.f_ref_hz.is_some()) {
            assert_eq!(f.centers_hz.len(), 4);
            assert_eq!(f.f_ref_hz, f.f_est_hz);
            assert_eq!(f.gains, vec![5.0, 5.0, 4.0, 2.5]);
        }
    }
}
