use serde::{Deserialize, Serialize};

use crate::emd::Envelope;
use crate::error::{Error, Result};

/// Admissible F0 interval and the matching lag interval at `sample_rate_hz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0SearchRange {
    f_min_hz: f64,
    f_max_hz: f64,
    sample_rate_hz: u32,
}

impl F0SearchRange {
    pub fn new(f_min_hz: f64, f_max_hz: f64, sample_rate_hz: u32) -> Result<Self> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(f_min_hz > 0.0 && f_min_hz < f_max_hz && f_max_hz < nyquist) {
            return Err(Error::InvalidParameter(format!(
                "F0 range [{f_min_hz}, {f_max_hz}] Hz invalid at {sample_rate_hz} Hz"
            )));
        }
        Ok(Self {
            f_min_hz,
            f_max_hz,
            sample_rate_hz,
        })
    }

    /// 50-400 Hz at 16 kHz.
    pub fn speech_default() -> Self {
        Self::new(50.0, 400.0, 16_000).expect("static range")
    }

    pub fn f_min_hz(&self) -> f64 {
        self.f_min_hz
    }

    pub fn f_max_hz(&self) -> f64 {
        self.f_max_hz
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Shortest admissible lag, `ceil(fs / f_max)`.
    pub fn tau_min(&self) -> usize {
        (self.sample_rate_hz as f64 / self.f_max_hz).ceil() as usize
    }

    /// Longest admissible lag, `floor(fs / f_min)`.
    pub fn tau_max(&self) -> usize {
        (self.sample_rate_hz as f64 / self.f_min_hz).floor() as usize
    }

    pub fn contains(&self, f_hz: f64) -> bool {
        (self.f_min_hz..=self.f_max_hz).contains(&f_hz)
    }
}

/// An F0 hypothesis from one autocorrelation peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Candidate {
    pub f0_hz: f64,
    /// Peak height over the zero-lag value.
    pub salience: f64,
    /// Integer lag of the picked peak.
    pub lag: usize,
}

/// Raw autocorrelation `r[tau] = sum_t a(t) a(t + tau)` for `tau` in
/// `0..=tau_max`.
pub fn acf(envelope: &Envelope, range: &F0SearchRange) -> Result<Vec<f64>> {
    raw_acf(envelope.values(), range.tau_max())
}

pub(crate) fn raw_acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() <= max_lag {
        return Err(Error::Degenerate(format!(
            "sequence of {} samples too short for lag {max_lag}",
            x.len()
        )));
    }
    Ok((0..=max_lag)
        .map(|tau| x[..x.len() - tau].iter().zip(&x[tau..]).map(|(a, b)| a * b).sum())
        .collect())
}

/// Picks the F0 candidate of an envelope.
///
/// The envelope is centred first so salience measures periodicity rather than
/// the envelope's DC level. The plain (biased) sum is kept, which keeps
/// salience in [-1, 1] and damps long-lag noise peaks. The first (shortest-lag) local maximum
/// inside the search range whose salience reaches `voicing_threshold` wins.
/// The lag is refined by a parabola through the peak and its neighbours and
/// clamped back into range.
pub fn f0_candidate(
    envelope: &Envelope,
    range: &F0SearchRange,
    voicing_threshold: f64,
) -> Result<Option<F0Candidate>> {
    periodicity_candidate(envelope.values(), range, voicing_threshold)
}

/// [`f0_candidate`] on an arbitrary real sequence.
pub fn periodicity_candidate(
    x: &[f64],
    range: &F0SearchRange,
    voicing_threshold: f64,
) -> Result<Option<F0Candidate>> {
    let Some(r) = centred_acf(x, range)? else {
        return Ok(None);
    };
    let tau = (range.tau_min().max(1)..=range.tau_max())
        .find(|&tau| is_peak(&r, tau) && r[tau] / r[0] >= voicing_threshold);
    Ok(tau.map(|tau| refine(&r, tau, range)))
}

/// The highest positive ACF peak in range regardless of the voicing
/// threshold, for frames already known to be voiced.
pub fn strongest_candidate(x: &[f64], range: &F0SearchRange) -> Result<Option<F0Candidate>> {
    let Some(r) = centred_acf(x, range)? else {
        return Ok(None);
    };
    let tau = (range.tau_min().max(1)..=range.tau_max())
        .filter(|&tau| is_peak(&r, tau) && r[tau] > 0.0)
        .fold(None, |best: Option<usize>, tau| match best {
            Some(b) if r[b] >= r[tau] => Some(b),
            _ => Some(tau),
        });
    Ok(tau.map(|tau| refine(&r, tau, range)))
}

/// Biased ACF of the mean-removed sequence up to `tau_max + 1`; `None` when
/// the sequence is constant.
fn centred_acf(x: &[f64], range: &F0SearchRange) -> Result<Option<Vec<f64>>> {
    let tau_max = range.tau_max();
    if x.len() <= tau_max + 1 {
        return Err(Error::Degenerate(format!(
            "sequence of {} samples too short for lag {}",
            x.len(),
            tau_max + 1
        )));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let r = raw_acf(&centred, tau_max + 1)?;
    Ok(if r[0] > 0.0 { Some(r) } else { None })
}

fn is_peak(r: &[f64], tau: usize) -> bool {
    r[tau] > r[tau - 1] && r[tau] >= r[tau + 1]
}

/// Parabolic refinement of the peak at `tau`, clamped into range.
fn refine(r: &[f64], tau: usize, range: &F0SearchRange) -> F0Candidate {
    let fs = range.sample_rate_hz() as f64;
    let (a, b, c) = (r[tau - 1], r[tau], r[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom < 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    let lag = (tau as f64 + shift.clamp(-0.5, 0.5)).clamp(fs / range.f_max_hz(), fs / range.f_min_hz());
    F0Candidate {
        f0_hz: fs / lag,
        salience: r[tau] / r[0],
        lag: tau,
    }
}
