use serde::{Deserialize, Serialize};

use super::resample::resample;
use crate::error::{Error, Result};
use crate::signal::AudioSignal;
use rustfft::{num_complex::Complex, FftPlanner};
use std::f64::consts::PI;

/// Structural constants of ESTOI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstoiConfig {
    pub sample_rate_hz: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub nfft: usize,
    pub num_bands: usize,
    pub min_freq_hz: f64,
    /// Frames per analysis segment.
    pub segment_frames: usize,
    /// Drop frames more than `dynamic_range_db` below the loudest clean frame.
    pub remove_silent_frames: bool,
    pub dynamic_range_db: f64,
}

impl Default for EstoiConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 10_000,
            frame_len: 256,
            hop: 128,
            nfft: 512,
            num_bands: 15,
            min_freq_hz: 150.0,
            segment_frames: 30,
            remove_silent_frames: true,
            dynamic_range_db: 40.0,
        }
    }
}

impl EstoiConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.sample_rate_hz > 0
            && self.frame_len > 0
            && self.hop > 0
            && self.nfft >= self.frame_len
            && self.num_bands > 0
            && self.min_freq_hz > 0.0
            && self.segment_frames > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid ESTOI settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstoiScore {
    pub value: f64,
    /// Segments that entered the average.
    pub segments: usize,
    /// Segments skipped for having no energy in either signal.
    pub skipped: usize,
}

/// One-third-octave band layout over FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdOctaveBands {
    pub centers_hz: Vec<f64>,
    /// Nominal edges before snapping to bins.
    pub lower_hz: Vec<f64>,
    pub upper_hz: Vec<f64>,
    /// Half-open bin ranges `[lo, hi)`.
    pub bins: Vec<(usize, usize)>,
}

impl ThirdOctaveBands {
    pub fn new(cfg: &EstoiConfig) -> Self {
        let fs = cfg.sample_rate_hz as f64;
        let bin_hz = fs / cfg.nfft as f64;
        let nearest = |f: f64| -> usize {
            (0..=cfg.nfft / 2)
                .min_by(|&a, &b| {
                    let da = (a as f64 * bin_hz - f).powi(2);
                    let db = (b as f64 * bin_hz - f).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap_or(0)
        };
        let mut out = Self {
            centers_hz: Vec::new(),
            lower_hz: Vec::new(),
            upper_hz: Vec::new(),
            bins: Vec::new(),
        };
        for k in 0..cfg.num_bands {
            let k = k as f64;
            let lo = cfg.min_freq_hz * 2f64.powf((2.0 * k - 1.0) / 6.0);
            let hi = cfg.min_freq_hz * 2f64.powf((2.0 * k + 1.0) / 6.0);
            out.centers_hz.push(cfg.min_freq_hz * 2f64.powf(k / 3.0));
            out.lower_hz.push(lo);
            out.upper_hz.push(hi);
            out.bins.push((nearest(lo), nearest(hi)));
        }
        out
    }
}

/// Band magnitudes, `bands[b][frame]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThirdOctaveSpectrogram {
    pub bands: Vec<Vec<f64>>,
}

impl ThirdOctaveSpectrogram {
    pub fn num_frames(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    /// Square root of the summed bin power in each band of each frame.
    pub fn compute(x: &[f64], cfg: &EstoiConfig, layout: &ThirdOctaveBands) -> Self {
        let window = hanning(cfg.frame_len);
        let starts = frame_starts(x.len(), cfg.frame_len, cfg.hop);
        let fft = FftPlanner::new().plan_fft_forward(cfg.nfft);
        let mut bands = vec![Vec::with_capacity(starts.len()); layout.bins.len()];
        let mut buf = vec![Complex::new(0.0, 0.0); cfg.nfft];
        for s in starts {
            for (i, b) in buf.iter_mut().enumerate() {
                *b = if i < cfg.frame_len {
                    Complex::new(x[s + i] * window[i], 0.0)
                } else {
                    Complex::new(0.0, 0.0)
                };
            }
            fft.process(&mut buf);
            for (band, &(lo, hi)) in bands.iter_mut().zip(&layout.bins) {
                let p: f64 = buf[lo..hi].iter().map(|c| c.norm_sqr()).sum();
                band.push(p.sqrt());
            }
        }
        Self { bands }
    }
}

/// `hanning(N + 2)` without its zero end points.
fn hanning(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * (i + 1) as f64 / (n + 1) as f64).cos())
        .collect()
}

/// Frame starts `0, hop, ...` strictly below `len - frame_len`.
fn frame_starts(len: usize, frame_len: usize, hop: usize) -> Vec<usize> {
    if len <= frame_len {
        return Vec::new();
    }
    (0..len - frame_len).step_by(hop).collect()
}

/// Drops frames of `x` that are more than `range_db` below its loudest frame,
/// drops the same frames of `y`, and overlap-adds what is left.
fn remove_silent_frames(x: &[f64], y: &[f64], cfg: &EstoiConfig) -> (Vec<f64>, Vec<f64>) {
    let window = hanning(cfg.frame_len);
    let starts = frame_starts(x.len(), cfg.frame_len, cfg.hop);
    let energy_db: Vec<f64> = starts
        .iter()
        .map(|&s| {
            let e: f64 = x[s..s + cfg.frame_len]
                .iter()
                .zip(&window)
                .map(|(v, w)| (v * w) * (v * w))
                .sum();
            20.0 * (e.sqrt() + f64::EPSILON).log10()
        })
        .collect();
    let loudest = energy_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let kept: Vec<usize> = starts
        .iter()
        .zip(&energy_db)
        .filter(|(_, &e)| loudest - cfg.dynamic_range_db - e < 0.0)
        .map(|(&s, _)| s)
        .collect();
    let out_len = if kept.is_empty() {
        0
    } else {
        (kept.len() - 1) * cfg.hop + cfg.frame_len
    };
    let mut xo = vec![0.0; out_len];
    let mut yo = vec![0.0; out_len];
    for (j, &s) in kept.iter().enumerate() {
        let o = j * cfg.hop;
        for i in 0..cfg.frame_len {
            xo[o + i] += x[s + i] * window[i];
            yo[o + i] += y[s + i] * window[i];
        }
    }
    (xo, yo)
}

/// Normalizes each row of a bands-by-frames segment over time, then each
/// column over bands. Zero-norm vectors become zeros.
fn normalize_segment(seg: &mut [Vec<f64>]) {
    for row in seg.iter_mut() {
        center_and_scale(row);
    }
    let frames = seg.first().map_or(0, Vec::len);
    for t in 0..frames {
        let mut col: Vec<f64> = seg.iter().map(|r| r[t]).collect();
        center_and_scale(&mut col);
        for (r, v) in seg.iter_mut().zip(col) {
            r[t] = v;
        }
    }
}

fn center_and_scale(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x = if norm > 0.0 { *x / norm } else { 0.0 });
}

/// ESTOI of `processed` against `clean` with default settings.
pub fn estoi(clean: &AudioSignal, processed: &AudioSignal) -> Result<EstoiScore> {
    estoi_with(clean, processed, &EstoiConfig::default())
}

/// ESTOI with explicit settings. `processed` is trimmed or zero-padded to the
/// clean length.
pub fn estoi_with(clean: &AudioSignal, processed: &AudioSignal, cfg: &EstoiConfig) -> Result<EstoiScore> {
    cfg.validate()?;
    if clean.sample_rate_hz() != processed.sample_rate_hz() {
        return Err(Error::Contract(format!(
            "sample rates differ: {} vs {}",
            clean.sample_rate_hz(),
            processed.sample_rate_hz()
        )));
    }
    let mut y = processed.samples().to_vec();
    y.resize(clean.len(), 0.0);
    let fs = clean.sample_rate_hz();
    let mut x = resample(clean.samples(), fs, cfg.sample_rate_hz)?;
    let mut y = resample(&y, fs, cfg.sample_rate_hz)?;
    if cfg.remove_silent_frames {
        (x, y) = remove_silent_frames(&x, &y, cfg);
    }
    let layout = ThirdOctaveBands::new(cfg);
    let xs = ThirdOctaveSpectrogram::compute(&x, cfg, &layout);
    let ys = ThirdOctaveSpectrogram::compute(&y, cfg, &layout);
    let n = cfg.segment_frames;
    let frames = xs.num_frames();
    if frames < n {
        return Err(Error::Degenerate(format!(
            "{frames} spectrogram frames, need at least {n} for one segment"
        )));
    }
    let mut total = 0.0;
    let (mut segments, mut skipped) = (0, 0);
    for m in n..=frames {
        let cut = |s: &ThirdOctaveSpectrogram| -> Vec<Vec<f64>> {
            s.bands.iter().map(|b| b[m - n..m].to_vec()).collect()
        };
        let (mut xn, mut yn) = (cut(&xs), cut(&ys));
        let silent = |s: &[Vec<f64>]| s.iter().flatten().all(|&v| v == 0.0);
        if silent(&xn) || silent(&yn) {
            skipped += 1;
            continue;
        }
        normalize_segment(&mut xn);
        normalize_segment(&mut yn);
        let dot: f64 = xn
            .iter()
            .flatten()
            .zip(yn.iter().flatten())
            .map(|(a, b)| a * b)
            .sum();
        total += dot / n as f64;
        segments += 1;
    }
    if segments == 0 {
        return Err(Error::Degenerate("every ESTOI segment is silent".into()));
    }
    let value = total / segments as f64;
    if !value.is_finite() {
        return Err(Error::Numerical("ESTOI is not finite".into()));
    }
    Ok(EstoiScore {
        value,
        segments,
        skipped,
    })
}
