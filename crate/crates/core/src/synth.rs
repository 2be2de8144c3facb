//! Synthetic test material: harmonic vowels with known F0 and voicing, plus
//! white and speech-shaped noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pitch::{FrameLabel, VoicingLabels};
use crate::signal::{hann_window, AudioSignal};

/// A vocal-tract resonance shaping harmonic amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Formant {
    pub freq_hz: f64,
    pub bandwidth_hz: f64,
}

/// Formants of an open vowel like /a/.
pub const VOWEL_A: [Formant; 3] = [
    Formant { freq_hz: 730.0, bandwidth_hz: 90.0 },
    Formant { freq_hz: 1090.0, bandwidth_hz: 110.0 },
    Formant { freq_hz: 2440.0, bandwidth_hz: 170.0 },
];

/// Close front vowel /i/.
pub const VOWEL_I: [Formant; 3] = [
    Formant { freq_hz: 270.0, bandwidth_hz: 60.0 },
    Formant { freq_hz: 2290.0, bandwidth_hz: 100.0 },
    Formant { freq_hz: 3010.0, bandwidth_hz: 120.0 },
];

/// Close back vowel /u/.
pub const VOWEL_U: [Formant; 3] = [
    Formant { freq_hz: 300.0, bandwidth_hz: 60.0 },
    Formant { freq_hz: 870.0, bandwidth_hz: 90.0 },
    Formant { freq_hz: 2240.0, bandwidth_hz: 150.0 },
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VowelSpec {
    pub f0_hz: f64,
    pub harmonics: usize,
    /// Amplitude fall-off per octave of harmonic number.
    pub rolloff_db_per_octave: f64,
    pub formants: Vec<Formant>,
    /// Peak F0 deviation as a fraction of `f0_hz`.
    pub vibrato_depth: f64,
    pub vibrato_rate_hz: f64,
}

impl Default for VowelSpec {
    fn default() -> Self {
        Self {
            f0_hz: 120.0,
            harmonics: 5,
            rolloff_db_per_octave: 6.0,
            formants: Vec::new(),
            vibrato_depth: 0.0,
            vibrato_rate_hz: 5.0,
        }
    }
}

impl VowelSpec {
    /// A vowel with harmonics up to about 4 kHz shaped by the /a/ formants.
    pub fn open_vowel(f0_hz: f64) -> Self {
        Self {
            f0_hz,
            harmonics: (4000.0 / f0_hz).floor().max(1.0) as usize,
            rolloff_db_per_octave: 6.0,
            formants: VOWEL_A.to_vec(),
            ..Default::default()
        }
    }

    fn validate(&self, fs: u32) -> Result<()> {
        if !(50.0..=400.0).contains(&self.f0_hz) {
            return Err(Error::InvalidParameter(format!(
                "f0 {} Hz outside [50, 400]",
                self.f0_hz
            )));
        }
        if self.harmonics == 0 {
            return Err(Error::InvalidParameter("need at least one harmonic".into()));
        }
        if !(0.0..0.5).contains(&self.vibrato_depth) {
            return Err(Error::InvalidParameter("vibrato depth must be in [0, 0.5)".into()));
        }
        if self.f0_hz >= fs as f64 / 2.0 {
            return Err(Error::InvalidParameter("f0 above Nyquist".into()));
        }
        Ok(())
    }

    /// Linear amplitude of harmonic `h` (1-based) at frequency `f_hz`.
    pub fn harmonic_amplitude(&self, h: usize, f_hz: f64) -> f64 {
        let tilt = 10f64.powf(-self.rolloff_db_per_octave * (h as f64).log2() / 20.0);
        let shape: f64 = self
            .formants
            .iter()
            .map(|fm| {
                let f2 = fm.freq_hz * fm.freq_hz;
                f2 / ((f2 - f_hz * f_hz).powi(2) + (fm.bandwidth_hz * f_hz).powi(2)).sqrt()
            })
            .product();
        tilt * shape
    }
}

/// Instantaneous F0 at time `t`.
fn f0_at(spec: &VowelSpec, t: f64) -> f64 {
    spec.f0_hz * (1.0 + spec.vibrato_depth * (2.0 * PI * spec.vibrato_rate_hz * t).sin())
}

/// A steady (gapless) vowel of `len` samples, unit peak, with random
/// harmonic phases drawn from `seed`. Returns samples and per-sample F0.
pub fn steady_vowel(spec: &VowelSpec, len: usize, fs: u32, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.validate(fs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phases: Vec<f64> = (0..spec.harmonics).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    let fsf = fs as f64;
    let f0_peak = spec.f0_hz * (1.0 + spec.vibrato_depth);
    let active: Vec<usize> = (1..=spec.harmonics)
        .filter(|&h| h as f64 * f0_peak < 0.45 * fsf)
        .collect();
    let amps: Vec<f64> = active
        .iter()
        .map(|&h| spec.harmonic_amplitude(h, h as f64 * spec.f0_hz))
        .collect();
    let mut phase = 0.0;
    let mut x = Vec::with_capacity(len);
    let mut track = Vec::with_capacity(len);
    for t in 0..len {
        let f0 = f0_at(spec, t as f64 / fsf);
        let v: f64 = active
            .iter()
            .zip(&amps)
            .map(|(&h, &a)| a * (h as f64 * phase + phases[h - 1]).sin())
            .sum();
        x.push(v);
        track.push(f0);
        phase += 2.0 * PI * f0 / fsf;
        if phase > 2.0 * PI * 1e6 {
            phase %= 2.0 * PI;
        }
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v /= peak);
    }
    Ok((x, track))
}

/// Synthetic utterance with voicing ground truth.
#[derive(Debug, Clone)]
pub struct SynthUtterance {
    pub signal: AudioSignal,
    /// Per-sample F0, 0 where unvoiced.
    pub f0_track: Vec<f64>,
    pub labels: VoicingLabels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtteranceSpec {
    pub vowel: VowelSpec,
    pub duration_s: f64,
    pub peak: f64,
    /// Range of voiced segment lengths in seconds.
    pub voiced_s: (f64, f64),
    /// Range of gap lengths in seconds.
    pub gap_s: (f64, f64),
    pub ramp_s: f64,
    /// Each segment's F0 is drawn within this fraction of `vowel.f0_hz`.
    pub f0_spread: f64,
    pub frame_ms: f64,
    /// Formant sets drawn per segment; empty keeps the vowel's own formants.
    pub formant_sets: Vec<Vec<Formant>>,
    /// Segment levels are drawn uniformly within this many dB below full.
    pub level_range_db: f64,
    /// Level of the unvoiced noise filling the gaps, in dB re the peak.
    /// `None` leaves the gaps silent.
    pub gap_noise_db: Option<f64>,
}

impl Default for UtteranceSpec {
    fn default() -> Self {
        Self {
            vowel: VowelSpec::open_vowel(120.0),
            duration_s: 2.0,
            peak: 0.5,
            voiced_s: (0.25, 0.5),
            gap_s: (0.08, 0.2),
            ramp_s: 0.02,
            f0_spread: 0.1,
            frame_ms: 32.0,
            formant_sets: vec![VOWEL_A.to_vec(), VOWEL_I.to_vec(), VOWEL_U.to_vec()],
            level_range_db: 10.0,
            gap_noise_db: Some(-35.0),
        }
    }
}

/// Builds an utterance of alternating voiced segments and unvoiced gaps.
///
/// Segment and gap lengths, the F0 offset of each segment, its
/// formant set and level, and harmonic phases are drawn from `seed`. Gaps
/// optionally carry low-level white noise, a stand-in for unvoiced sounds. Frames are labelled voiced when at
/// least half their samples are voiced; their F0 is the mean over those
/// samples.
pub fn synth_utterance(spec: &UtteranceSpec, fs: u32, seed: u64) -> Result<SynthUtterance> {
    if !(spec.duration_s > 0.0) {
        return Err(Error::InvalidParameter("duration must be positive".into()));
    }
    if !(0.0..0.5).contains(&spec.f0_spread) {
        return Err(Error::InvalidParameter("f0 spread must be in [0, 0.5)".into()));
    }
    spec.vowel.validate(fs)?;
    let fsf = fs as f64;
    let n = (spec.duration_s * fsf).round() as usize;
    let frame_len = (spec.frame_ms * fsf / 1000.0).round() as usize;
    if n < frame_len {
        return Err(Error::InvalidParameter(format!(
            "duration {} s is shorter than one frame",
            spec.duration_s
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; n];
    let mut track = vec![0.0; n];
    let ramp = (spec.ramp_s * fsf).round() as usize;
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| -> usize {
        ((lo + (hi - lo) * rng.random::<f64>()) * fsf).round() as usize
    };
    let mut pos = draw(&mut rng, spec.gap_s).min(n / 4);
    let mut segment = 0u64;
    while pos + 2 * ramp < n {
        let len = draw(&mut rng, spec.voiced_s).max(2 * ramp + 1).min(n - pos);
        let mut vowel = spec.vowel.clone();
        let offset = 1.0 + spec.f0_spread * (2.0 * rng.random::<f64>() - 1.0);
        vowel.f0_hz = (vowel.f0_hz * offset).clamp(50.0, 400.0);
        if !spec.formant_sets.is_empty() {
            vowel.formants = spec.formant_sets[rng.random_range(0..spec.formant_sets.len())].clone();
        }
        let level = 10f64.powf(-spec.level_range_db * rng.random::<f64>() / 20.0);
        let (seg, f0s) = steady_vowel(&vowel, len, fs, seed.wrapping_add(1 + segment))?;
        for i in 0..len {
            let g = if i < ramp {
                0.5 - 0.5 * (PI * i as f64 / ramp as f64).cos()
            } else if i >= len - ramp {
                0.5 - 0.5 * (PI * (len - 1 - i) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            x[pos + i] = level * g * seg[i];
            track[pos + i] = f0s[i];
        }
        pos += len + draw(&mut rng, spec.gap_s);
        segment += 1;
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if let Some(db) = spec.gap_noise_db {
        // Unit-variance noise has peaks near 4; scale so they sit at `db`.
        let g = peak * 10f64.powf(db / 20.0) / 4.0;
        for (v, &f) in x.iter_mut().zip(&track) {
            if f == 0.0 {
                *v += g * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
            }
        }
    }
    let peak = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = spec.peak / peak;
        x.iter_mut().for_each(|v| *v *= g);
    }
    let labels = labels_from_track(&track, frame_len, frame_len / 2);
    Ok(SynthUtterance {
        signal: AudioSignal::new(x, fs)?,
        f0_track: track,
        labels,
    })
}

/// Frame labels on the analysis grid from a per-sample F0 track.
pub fn labels_from_track(track: &[f64], frame_len: usize, hop: usize) -> VoicingLabels {
    let n = track.len();
    let count = if n < frame_len { 0 } else { (n - frame_len).div_ceil(hop) + 1 };
    let frames = (0..count)
        .map(|q| {
            let start = q * hop;
            let seg = &track[start..(start + frame_len).min(n)];
            let voiced: Vec<f64> = seg.iter().copied().filter(|&f| f > 0.0).collect();
            let is_voiced = 2 * voiced.len() >= frame_len;
            FrameLabel {
                frame_index: q,
                voiced: is_voiced,
                f0_hz: if is_voiced {
                    voiced.iter().sum::<f64>() / voiced.len() as f64
                } else {
                    0.0
                },
            }
        })
        .collect();
    VoicingLabels { frames }
}

/// Zero-mean unit-variance Gaussian noise.
pub fn white_noise(len: usize, fs: u32, seed: u64) -> Result<AudioSignal> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioSignal::new((0..len).map(|_| StandardNormal.sample(&mut rng)).collect(), fs)
}

/// Lowest frequency at which the fitted tilt applies; below it the shaping
/// is flat.
const TILT_REF_HZ: f64 = 100.0;

/// Least-squares slope, in dB per octave, of the long-term spectrum of
/// `signals` measured in third-octave bands from 100 Hz to 0.45 fs.
pub fn fit_spectral_tilt(signals: &[&AudioSignal]) -> Result<f64> {
    let first = signals
        .first()
        .ok_or_else(|| Error::Degenerate("no signals to fit".into()))?;
    let fs = first.sample_rate_hz();
    let nfft = 512;
    let window = hann_window(nfft);
    let mut psd = vec![0.0; nfft / 2 + 1];
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(nfft);
    let mut frames = 0usize;
    for s in signals {
        if s.sample_rate_hz() != fs {
            return Err(Error::Contract("signals must share a sample rate".into()));
        }
        let x = s.samples();
        let mut start = 0;
        while start + nfft <= x.len() {
            let mut buf: Vec<Complex<f64>> = x[start..start + nfft]
                .iter()
                .zip(&window)
                .map(|(v, w)| Complex::new(v * w, 0.0))
                .collect();
            fft.process(&mut buf);
            for (p, c) in psd.iter_mut().zip(&buf) {
                *p += c.norm_sqr();
            }
            frames += 1;
            start += nfft / 2;
        }
    }
    if frames == 0 {
        return Err(Error::Degenerate("signals shorter than one analysis frame".into()));
    }
    let bin_hz = fs as f64 / nfft as f64;
    let mut pts = Vec::new();
    let mut fc = TILT_REF_HZ;
    while fc * 2f64.powf(1.0 / 6.0) < 0.45 * fs as f64 {
        let lo = fc * 2f64.powf(-1.0 / 6.0);
        let hi = fc * 2f64.powf(1.0 / 6.0);
        let bins: Vec<f64> = (0..psd.len())
            .filter(|&k| (lo..hi).contains(&(k as f64 * bin_hz)))
            .map(|k| psd[k])
            .collect();
        if !bins.is_empty() {
            let density = bins.iter().sum::<f64>() / bins.len() as f64;
            if density > 0.0 {
                pts.push(((fc / TILT_REF_HZ).log2(), 10.0 * density.log10()));
            }
        }
        fc *= 2f64.powf(1.0 / 3.0);
    }
    if pts.len() < 2 {
        return Err(Error::Degenerate("not enough spectral energy to fit a tilt".into()));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Stationary Gaussian noise with a constant spectral slope of
/// `tilt_db_per_octave` above 100 Hz, normalized to unit variance.
pub fn tilted_noise(len: usize, fs: u32, tilt_db_per_octave: f64, seed: u64) -> Result<AudioSignal> {
    let white = white_noise(len, fs, seed)?;
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex<f64>> = white.samples().iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    let bin_hz = fs as f64 / len as f64;
    for (k, c) in buf.iter_mut().enumerate() {
        let f = (k.min(len - k) as f64 * bin_hz).max(TILT_REF_HZ);
        *c *= 10f64.powf(tilt_db_per_octave * (f / TILT_REF_HZ).log2() / 20.0);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    let mut x: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    AudioSignal::new(x, fs)
}

/// Speech-shaped noise whose tilt is fitted to `corpus`.
pub fn speech_shaped_noise(len: usize, corpus: &[&AudioSignal], seed: u64) -> Result<AudioSignal> {
    let tilt = fit_spectral_tilt(corpus)?;
    tilted_noise(len, corpus[0].sample_rate_hz(), tilt, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum_peaks(x: &[f64], fs: u32, count: usize) -> Vec<f64> {
        let n = x.len();
        let mut planner = FftPlanner::<f64>::new();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        planner.plan_fft_forward(n).process(&mut buf);
        let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
        let mut peaks: Vec<usize> = (1..mag.len() - 1)
            .filter(|&k| mag[k] > mag[k - 1] && mag[k] >= mag[k + 1])
            .collect();
        peaks.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]));
        let mut f: Vec<f64> = peaks[..count].iter().map(|&k| k as f64 * fs as f64 / n as f64).collect();
        f.sort_by(f64::total_cmp);
        f
    }

    #[test]
    fn harmonic_peaks() {
        let spec = VowelSpec {
            f0_hz: 120.0,
            harmonics: 5,
            ..Default::default()
        };
        let (x, _) = steady_vowel(&spec, 16_000, 16_000, 3).unwrap();
        let peaks = spectrum_peaks(&x, 16_000, 5);
        for (h, f) in peaks.iter().enumerate() {
            assert!((f - 120.0 * (h + 1) as f64).abs() <= 1.0, "{peaks:?}");
        }
    }

    #[test]
    fn utterance_has_gaps_and_labels() {
        let u = synth_utterance(&UtteranceSpec::default(), 16_000, 11).unwrap();
        assert_eq!(u.signal.len(), 32_000);
        assert!((u.signal.peak() - 0.5).abs() < 1e-12);
        let voiced = u.labels.frames.iter().filter(|f| f.voiced).count();
        assert!(voiced > 0 && voiced < u.labels.frames.len());
        for f in u.labels.frames.iter().filter(|f| f.voiced) {
            assert!((108.0..=132.0).contains(&f.f0_hz), "{f:?}");
        }
        // Gap noise sits about 35 dB under the peak.
        let gap_peak = u
            .signal
            .samples()
            .iter()
            .zip(&u.f0_track)
            .filter(|(_, f)| **f == 0.0)
            .fold(0.0f64, |m, (x, _)| m.max(x.abs()));
        assert!(gap_peak > 0.0 && gap_peak < 0.5 * 10f64.powf(-28.0 / 20.0), "{gap_peak}");
        let silent = UtteranceSpec {
            gap_noise_db: None,
            ..Default::default()
        };
        let s = synth_utterance(&silent, 16_000, 11).unwrap();
        assert!(s.signal.samples().iter().zip(&s.f0_track).all(|(x, f)| *f > 0.0 || *x == 0.0));
    }

    #[test]
    fn deterministic_by_seed() {
        let a = synth_utterance(&UtteranceSpec::default(), 16_000, 5).unwrap();
        let b = synth_utterance(&UtteranceSpec::default(), 16_000, 5).unwrap();
        assert_eq!(a.signal, b.signal);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut s = UtteranceSpec::default();
        s.duration_s = 0.0;
        assert!(synth_utterance(&s, 16_000, 0).is_err());
        let mut s = UtteranceSpec::default();
        s.vowel.f0_hz = 450.0;
        assert!(synth_utterance(&s, 16_000, 0).is_err());
    }

    #[test]
    fn tilt_fit_recovers_generated_slope() {
        for tilt in [-9.0, -3.0, 0.0] {
            let n = tilted_noise(64_000, 16_000, tilt, 1).unwrap();
            let fit = fit_spectral_tilt(&[&n]).unwrap();
            assert!((fit - tilt).abs() < 0.5, "{tilt} -> {fit}");
        }
    }
}
