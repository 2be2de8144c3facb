use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::num_complex::Complex;

use crate::error::{Error, Result};
use crate::signal::fft_forward;

/// Envelope decay (relative to its peak) at which the response is cut.
pub const TRUNCATION_LEVEL: f64 = 1e-4;

const MIN_NORMALIZATION_FFT: usize = 4096;

/// One gammachirp filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammachirpSpec {
    pub f_c_hz: f64,
    pub b_hz: f64,
    /// Asymmetry (chirp) coefficient; 0 gives a gammatone.
    pub c: f64,
    pub n: u32,
    /// Longest allowed support on either side of the peak, in samples.
    pub max_len_samples: usize,
}

impl GammachirpSpec {
    pub fn new(f_c_hz: f64, b_hz: f64, c: f64, n: u32, max_len_samples: usize) -> Result<Self> {
        let spec = Self {
            f_c_hz,
            b_hz,
            c,
            n,
            max_len_samples,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.f_c_hz > 0.0 && self.f_c_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("f_c = {} Hz", self.f_c_hz)));
        }
        if !(self.b_hz > 0.0 && self.b_hz.is_finite()) {
            return Err(Error::InvalidParameter(format!("b = {} Hz", self.b_hz)));
        }
        if !self.c.is_finite() {
            return Err(Error::InvalidParameter(format!("c = {}", self.c)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("filter order must be at least 1".into()));
        }
        if self.max_len_samples == 0 {
            return Err(Error::InvalidParameter("max_len_samples must be positive".into()));
        }
        Ok(())
    }

    /// Envelope compensation time `(n - 1) / (2 pi b)` in seconds.
    pub fn t_c_s(&self) -> f64 {
        (self.n as f64 - 1.0) / (2.0 * PI * self.b_hz)
    }
}

/// Sampled, amplitude-normalized impulse response whose envelope peak sits
/// at `peak_index` (time zero).
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
    pub peak_index: usize,
    pub sample_rate_hz: u32,
    /// Amplitude factor `a` that gives unit peak magnitude response.
    pub scale: f64,
}

impl ImpulseResponse {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Time in seconds of tap `i`.
    pub fn time_s(&self, i: usize) -> f64 {
        (i as f64 - self.peak_index as f64) / self.sample_rate_hz as f64
    }

    /// `|H(f)|` by direct DTFT evaluation.
    pub fn magnitude_at(&self, f_hz: f64) -> f64 {
        dtft_magnitude(&self.taps, f_hz / self.sample_rate_hz as f64)
    }

    /// Frequency of the magnitude-response maximum.
    pub fn peak_frequency_hz(&self) -> f64 {
        peak_of(&self.taps).0 * self.sample_rate_hz as f64
    }
}

fn envelope(t: f64, t_c: f64, n: u32, b: f64) -> f64 {
    let u = t + t_c;
    if u <= 0.0 {
        return 0.0;
    }
    u.powi(n as i32 - 1) * (-2.0 * PI * b * u).exp()
}

/// Support `[-pre, post]` in samples around the envelope peak.
fn support(t_c: f64, n: u32, b: f64, fs: f64, max_len: usize) -> (usize, usize) {
    let pre = ((t_c * fs).floor() as usize).min(max_len);
    let peak = envelope(0.0, t_c, n, b);
    let post = (1..=max_len)
        .find(|&i| envelope(i as f64 / fs, t_c, n, b) < TRUNCATION_LEVEL * peak)
        .unwrap_or(max_len);
    (pre, post)
}

/// Gammachirp `a (t+t_c)^(n-1) cos(2 pi f_c t + c ln(t+t_c)) e^(-2 pi b (t+t_c))`
/// sampled on `[-t_c, T_end]`, where `T_end` is the point the envelope
/// drops below [`TRUNCATION_LEVEL`] of its peak. Both sides are capped at
/// `max_len_samples`.
pub fn design_gammachirp(spec: &GammachirpSpec, sample_rate_hz: u32) -> Result<ImpulseResponse> {
    spec.validate()?;
    let fs = sample_rate_hz as f64;
    if spec.f_c_hz >= fs / 2.0 {
        return Err(Error::Design(format!(
            "center {} Hz at or above Nyquist for {sample_rate_hz} Hz",
            spec.f_c_hz
        )));
    }
    let t_c = spec.t_c_s();
    let (pre, post) = support(t_c, spec.n, spec.b_hz, fs, spec.max_len_samples);
    let raw: Vec<f64> = (0..=pre + post)
        .map(|i| {
            let t = (i as f64 - pre as f64) / fs;
            let e = envelope(t, t_c, spec.n, spec.b_hz);
            if e == 0.0 {
                return 0.0;
            }
            e * (2.0 * PI * spec.f_c_hz * t + spec.c * ((t + t_c) / t_c).ln()).cos()
        })
        .collect();
    normalized(raw, pre, sample_rate_hz)
}

/// Gammatone `a t^(n-1) e^(-2 pi b t) cos(2 pi f_c t)` on the same shifted
/// time axis and support as [`design_gammachirp`].
pub fn design_gammatone(
    f_c_hz: f64,
    b_hz: f64,
    n: u32,
    max_len_samples: usize,
    sample_rate_hz: u32,
) -> Result<ImpulseResponse> {
    let spec = GammachirpSpec::new(f_c_hz, b_hz, 0.0, n, max_len_samples)?;
    let fs = sample_rate_hz as f64;
    if f_c_hz >= fs / 2.0 {
        return Err(Error::Design(format!("center {f_c_hz} Hz at or above Nyquist")));
    }
    let t_c = spec.t_c_s();
    let (pre, post) = support(t_c, n, b_hz, fs, max_len_samples);
    let raw: Vec<f64> = (0..=pre + post)
        .map(|i| {
            let t = (i as f64 - pre as f64) / fs;
            envelope(t, t_c, n, b_hz) * (2.0 * PI * f_c_hz * t).cos()
        })
        .collect();
    normalized(raw, pre, sample_rate_hz)
}

fn normalized(raw: Vec<f64>, peak_index: usize, sample_rate_hz: u32) -> Result<ImpulseResponse> {
    let (_, peak) = peak_of(&raw);
    if !(peak > 0.0 && peak.is_finite()) {
        return Err(Error::Design("impulse response has no passband".into()));
    }
    let scale = 1.0 / peak;
    Ok(ImpulseResponse {
        taps: raw.into_iter().map(|v| v * scale).collect(),
        peak_index,
        sample_rate_hz,
        scale,
    })
}

fn dtft_magnitude(h: &[f64], f_norm: f64) -> f64 {
    // Horner in z = e^{-jw}: one complex multiply per tap instead of a sin_cos.
    let z = Complex::from_polar(1.0, -2.0 * PI * f_norm);
    h.iter()
        .rev()
        .fold(Complex::new(0.0, 0.0), |acc, &v| acc * z + v)
        .norm()
}

/// Normalized frequency and value of the magnitude maximum: coarse FFT
/// search, then golden-section refinement on the DTFT.
fn peak_of(h: &[f64]) -> (f64, f64) {
    let nfft = h.len().next_power_of_two().max(MIN_NORMALIZATION_FFT);
    let mut buf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(nfft, Complex::new(0.0, 0.0));
    fft_forward(nfft).process(&mut buf);
    let k = (0..=nfft / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap_or(0);
    let step = 1.0 / nfft as f64;
    let (mut lo, mut hi) = ((k as f64 - 1.0).max(0.0) * step, ((k as f64 + 1.0) * step).min(0.5));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (dtft_magnitude(h, x1), dtft_magnitude(h, x2));
    for _ in 0..32 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = dtft_magnitude(h, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = dtft_magnitude(h, x1);
        }
    }
    let f = 0.5 * (lo + hi);
    let refined = dtft_magnitude(h, f);
    let coarse = buf[k].norm();
    if refined >= coarse {
        (f, refined)
    } else {
        (k as f64 * step, coarse)
    }
}

/// Columnar text of several responses on a shared time axis (seconds in the
/// first column, one column per filter, zeros outside each support).
pub fn impulse_response_table(filters: &[ImpulseResponse]) -> String {
    let mut out = String::from("# t_s");
    for k in 0..filters.len() {
        let _ = write!(out, "\th{k}");
    }
    out.push('\n');
    let Some(first) = filters.first() else {
        return out;
    };
    let fs = first.sample_rate_hz as f64;
    let pre = filters.iter().map(|f| f.peak_index).max().unwrap_or(0) as isize;
    let post = filters
        .iter()
        .map(|f| f.len() - f.peak_index)
        .max()
        .unwrap_or(0) as isize;
    for t in -pre..post {
        let _ = write!(out, "{:.8}", t as f64 / fs);
        for f in filters {
            let i = t + f.peak_index as isize;
            let v = if i >= 0 && (i as usize) < f.len() {
                f.taps[i as usize]
            } else {
                0.0
            };
            let _ = write!(out, "\t{v:.10e}");
        }
        out.push('\n');
    }
    out
}
