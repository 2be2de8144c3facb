//! Empirical mode decomposition (plain and ensemble) and analytic-signal
//! envelopes of the resulting modes.

mod hilbert;
mod spline;

pub use hilbert::analytic_envelope;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shortest frame the sifting process accepts.
pub const MIN_FRAME_LEN: usize = 8;

/// Intrinsic mode functions of one frame plus the final residual.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet {
    pub imfs: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl ImfSet {
    pub fn source_len(&self) -> usize {
        self.residual.len()
    }

    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }

    /// Sum of every mode and the residual.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o += v;
            }
        }
        out
    }
}

/// Instantaneous amplitude of one mode; nonnegative and finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope(pub(crate) Vec<f64>);

impl Envelope {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter(
                "envelope values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftConfig {
    /// Cauchy-type stop: sum of squared change over sum of squares.
    pub sd_threshold: f64,
    pub max_iterations: usize,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            sd_threshold: 0.2,
            max_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EemdConfig {
    pub ensemble_size: usize,
    /// Added white-noise std as a fraction of the frame std.
    pub noise_std_ratio: f64,
    pub max_imfs: usize,
    pub seed: u64,
    pub sift: SiftConfig,
}

impl Default for EemdConfig {
    fn default() -> Self {
        Self {
            ensemble_size: 50,
            noise_std_ratio: 0.2,
            max_imfs: 8,
            seed: 0,
            sift: SiftConfig::default(),
        }
    }
}

/// Plain EMD with the default sifting criterion.
pub fn emd_decompose(frame: &[f64], max_imfs: usize) -> Result<ImfSet> {
    emd_with(frame, max_imfs, &SiftConfig::default())
}

/// Plain EMD. The residual is whatever sifting leaves behind, so the modes
/// plus residual sum back to `frame` up to rounding.
pub fn emd_with(frame: &[f64], max_imfs: usize, sift: &SiftConfig) -> Result<ImfSet> {
    check_frame(frame)?;
    let n = frame.len();
    let mut residual = frame.to_vec();
    let mut imfs = Vec::new();
    let mut scratch = Scratch::default();
    while imfs.len() < max_imfs {
        let (maxima, minima) = extrema(&residual, &mut scratch);
        if maxima + minima <= 2 {
            break;
        }
        let imf = sift_one(&residual, sift, &mut scratch);
        for (r, v) in residual.iter_mut().zip(&imf) {
            *r -= v;
        }
        imfs.push(imf);
    }
    debug_assert!(imfs.iter().all(|m| m.len() == n));
    Ok(ImfSet { imfs, residual })
}

/// Ensemble EMD: the average of `ensemble_size` decompositions of the frame
/// plus independent white noise.
///
/// Member `i` draws its noise from a ChaCha stream keyed by `(seed, i)`, so
/// the result depends only on the inputs. With one member and zero noise the
/// output is bitwise identical to [`emd_with`].
pub fn eemd_decompose(frame: &[f64], cfg: &EemdConfig) -> Result<ImfSet> {
    check_frame(frame)?;
    if cfg.ensemble_size == 0 {
        return Err(Error::InvalidParameter("ensemble_size must be >= 1".into()));
    }
    if !(cfg.noise_std_ratio >= 0.0) || !cfg.noise_std_ratio.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "noise_std_ratio = {}",
            cfg.noise_std_ratio
        )));
    }
    let n = frame.len();
    let noise_std = cfg.noise_std_ratio * std_dev(frame);
    let normal = if noise_std > 0.0 {
        Some(Normal::new(0.0, noise_std).map_err(|e| Error::Numerical(e.to_string()))?)
    } else {
        None
    };

    let mut imf_sums: Vec<Vec<f64>> = Vec::new();
    let mut residual_sum = vec![0.0; n];
    let mut member = frame.to_vec();
    for i in 0..cfg.ensemble_size {
        if let Some(normal) = &normal {
            let mut rng = member_rng(cfg.seed, i);
            for (m, &x) in member.iter_mut().zip(frame) {
                *m = x + normal.sample(&mut rng);
            }
        }
        let set = emd_with(&member, cfg.max_imfs, &cfg.sift)?;
        if set.imfs.len() > imf_sums.len() {
            imf_sums.resize(set.imfs.len(), vec![0.0; n]);
        }
        for (acc, imf) in imf_sums.iter_mut().zip(&set.imfs) {
            for (a, v) in acc.iter_mut().zip(imf) {
                *a += v;
            }
        }
        for (a, v) in residual_sum.iter_mut().zip(&set.residual) {
            *a += v;
        }
    }
    let inv = 1.0 / cfg.ensemble_size as f64;
    let scale = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x *= inv);
    imf_sums.iter_mut().for_each(scale);
    scale(&mut residual_sum);
    Ok(ImfSet {
        imfs: imf_sums,
        residual: residual_sum,
    })
}

fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

fn check_frame(frame: &[f64]) -> Result<()> {
    if frame.len() < MIN_FRAME_LEN {
        return Err(Error::Degenerate(format!(
            "frame of {} samples, need at least {MIN_FRAME_LEN}",
            frame.len()
        )));
    }
    if frame.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite sample in frame".into()));
    }
    Ok(())
}

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[derive(Default)]
struct Scratch {
    max_pos: Vec<usize>,
    min_pos: Vec<usize>,
    knot_x: Vec<f64>,
    knot_y: Vec<f64>,
}

/// Locates local maxima and minima; returns their counts.
fn extrema(x: &[f64], s: &mut Scratch) -> (usize, usize) {
    s.max_pos.clear();
    s.min_pos.clear();
    for i in 1..x.len() - 1 {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            s.max_pos.push(i);
        } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            s.min_pos.push(i);
        }
    }
    (s.max_pos.len(), s.min_pos.len())
}

/// Extracts one IMF from `signal` by repeated sifting.
fn sift_one(signal: &[f64], cfg: &SiftConfig, s: &mut Scratch) -> Vec<f64> {
    let n = signal.len();
    let mut h = signal.to_vec();
    for _ in 0..cfg.max_iterations {
        let (maxima, minima) = extrema(&h, s);
        if maxima == 0 || minima == 0 || maxima + minima <= 2 {
            break;
        }
        let upper = envelope_through(&h, &s.max_pos.clone(), s);
        let lower = envelope_through(&h, &s.min_pos.clone(), s);
        let mut num = 0.0;
        let mut den = 0.0;
        for t in 0..n {
            let mean = 0.5 * (upper[t] + lower[t]);
            num += mean * mean;
            den += h[t] * h[t];
            h[t] -= mean;
        }
        if den == 0.0 || num / den < cfg.sd_threshold {
            break;
        }
    }
    h
}

/// Spline through the given extrema, with the two nearest extrema mirrored
/// across each end of the frame.
fn envelope_through(x: &[f64], pos: &[usize], s: &mut Scratch) -> Vec<f64> {
    let n = x.len();
    let last = (n - 1) as f64;
    s.knot_x.clear();
    s.knot_y.clear();
    let mirror = pos.len().min(2);
    for &p in pos[..mirror].iter().rev() {
        s.knot_x.push(-(p as f64));
        s.knot_y.push(x[p]);
    }
    for &p in pos {
        s.knot_x.push(p as f64);
        s.knot_y.push(x[p]);
    }
    for &p in pos[pos.len() - mirror..].iter().rev() {
        s.knot_x.push(2.0 * last - p as f64);
        s.knot_y.push(x[p]);
    }
    spline::natural_cubic_on_grid(&s.knot_x, &s.knot_y, n)
}

/// Mean zero-crossing rate in crossings per sample.
pub fn zero_crossing_rate(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let crossings = x.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0)).count();
    crossings as f64 / (x.len() - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const FS: f64 = 16_000.0;

    fn tone(n: usize, f: f64, a: f64) -> Vec<f64> {
        (0..n).map(|t| a * (2.0 * PI * f * t as f64 / FS).sin()).collect()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    /// Zero-crossing frequency estimate in Hz.
    fn zc_hz(x: &[f64]) -> f64 {
        zero_crossing_rate(x) * FS / 2.0
    }

    #[test]
    fn sinusoid_is_first_imf() {
        let x = tone(512, 1000.0, 1.0);
        let set = emd_decompose(&x, 8).unwrap();
        assert!(!set.is_empty());
        assert!(correlation(&set.imfs[0][16..496], &x[16..496]) >= 0.99);
    }

    #[test]
    fn ramp_has_no_imfs() {
        let x: Vec<f64> = (0..100).map(|t| 0.01 * t as f64 - 0.3).collect();
        let set = emd_decompose(&x, 8).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.residual, x);
    }

    #[test]
    fn short_frame_rejected() {
        assert!(matches!(emd_decompose(&[0.0; 7], 4), Err(Error::Degenerate(_))));
    }

    #[test]
    fn two_tones_separate_by_frequency() {
        let n = 1024;
        let lo = tone(n, 100.0, 1.0);
        let x: Vec<f64> = tone(n, 1000.0, 1.0).iter().zip(&lo).map(|(a, b)| a + b).collect();
        let set = emd_decompose(&x, 8).unwrap();
        assert!(set.len() >= 2);
        let f1 = zc_hz(&set.imfs[0]);
        let f2 = zc_hz(&set.imfs[1]);
        // Oracle: zero-crossing rate of the generating tones.
        assert!((f1 - zc_hz(&tone(n, 1000.0, 1.0))).abs() < 100.0, "imf1 at {f1} Hz");
        assert!((f2 - zc_hz(&lo)).abs() < 30.0, "imf2 at {f2} Hz");
        // Strict ordering on clean input.
        let rates: Vec<f64> = set.imfs.iter().map(|m| zero_crossing_rate(m)).collect();
        assert!(rates.windows(2).all(|w| w[0] >= w[1]), "{rates:?}");
    }

    #[test]
    fn emd_is_complete() {
        let x: Vec<f64> = (0..777).map(|t| ((t * 7919) % 211) as f64 / 100.0 - 1.0).collect();
        let set = emd_decompose(&x, 8).unwrap();
        let back = set.reconstruct();
        let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9);
    }

    #[test]
    fn degenerate_ensemble_matches_plain_emd_bitwise() {
        let x: Vec<f64> = tone(512, 330.0, 0.5).iter().zip(tone(512, 2100.0, 0.2)).map(|(a, b)| a + b).collect();
        let plain = emd_decompose(&x, 8).unwrap();
        let cfg = EemdConfig {
            ensemble_size: 1,
            noise_std_ratio: 0.0,
            ..Default::default()
        };
        assert_eq!(eemd_decompose(&x, &cfg).unwrap(), plain);
    }

    #[test]
    fn eemd_is_seed_deterministic() {
        let x = tone(512, 440.0, 0.3);
        let cfg = EemdConfig {
            ensemble_size: 8,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(eemd_decompose(&x, &cfg).unwrap(), eemd_decompose(&x, &cfg).unwrap());
        let other = EemdConfig { seed: 43, ..cfg };
        assert_ne!(eemd_decompose(&x, &cfg).unwrap(), eemd_decompose(&x, &other).unwrap());
    }

    /// Completeness error of EEMD is the ensemble-mean noise, whose std is
    /// `ratio * std(frame) / sqrt(M)`.
    #[test]
    fn eemd_completeness_floor_scales() {
        let x: Vec<f64> = tone(512, 200.0, 1.0).iter().zip(tone(512, 1500.0, 0.5)).map(|(a, b)| a + b).collect();
        let sd = std_dev(&x);
        for (ratio, m) in [(0.2, 4usize), (0.2, 16), (0.4, 16)] {
            let cfg = EemdConfig {
                ensemble_size: m,
                noise_std_ratio: ratio,
                seed: 7,
                ..Default::default()
            };
            let set = eemd_decompose(&x, &cfg).unwrap();
            let err: Vec<f64> = set.reconstruct().iter().zip(&x).map(|(a, b)| a - b).collect();
            let rms = (err.iter().map(|e| e * e).sum::<f64>() / err.len() as f64).sqrt();
            let predicted = ratio * sd / (m as f64).sqrt();
            assert!(
                rms <= 3.0 * predicted && rms >= predicted / 3.0,
                "ratio {ratio}, M {m}: rms {rms}, predicted {predicted}"
            );
        }
    }

    /// Spectral leakage of the 100 Hz tone into IMF1 and of 1 kHz into IMF2.
    fn mode_mixing(set: &ImfSet, n: usize) -> f64 {
        let hi = tone(n, 1000.0, 1.0);
        let lo = tone(n, 100.0, 1.0);
        correlation(&set.imfs[0], &lo).abs() + correlation(&set.imfs[1], &hi).abs()
    }

    #[test]
    fn eemd_mixing_no_worse_than_emd() {
        let n = 1024;
        let x: Vec<f64> = tone(n, 1000.0, 1.0).iter().zip(tone(n, 100.0, 1.0)).map(|(a, b)| a + b).collect();
        let plain = emd_decompose(&x, 8).unwrap();
        let cfg = EemdConfig {
            ensemble_size: 50,
            noise_std_ratio: 0.2,
            seed: 1,
            ..Default::default()
        };
        let ens = eemd_decompose(&x, &cfg).unwrap();
        // Locate the IMFs closest to each tone by zero-crossing rate.
        let pick = |set: &ImfSet, f: f64| -> f64 {
            set.imfs
                .iter()
                .map(|m| (zc_hz(m) - f).abs())
                .fold(f64::INFINITY, f64::min)
        };
        assert!(pick(&ens, 1000.0) <= pick(&plain, 1000.0) + 50.0);
        assert!(pick(&ens, 100.0) <= pick(&plain, 100.0) + 20.0);
        let _ = mode_mixing(&plain, n);
    }
}
