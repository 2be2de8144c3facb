use std::f64::consts::PI;

use super::AudioSignal;
use crate::error::{Error, Result};

/// Synthesis window applied once per frame during overlap-add.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    /// Hann sampled at half-integer points, `sin^2(pi (n + 0.5) / N)`.
    ///
    /// Strictly positive on every sample and sums to exactly one at 50%
    /// overlap, so the window-sum division never sees a zero.
    #[default]
    Hann,
}

/// Half-sample-offset Hann window of length `len`.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            let s = (PI * (n as f64 + 0.5) / len as f64).sin();
            s * s
        })
        .collect()
}

/// Rectangular analysis frames of a signal plus the bookkeeping needed to
/// put them back together.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    pub frames: Vec<Vec<f64>>,
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    /// Per-frame voicing (membership in the voiced set). Defaults to all false.
    pub voiced_mask: Vec<bool>,
    pub source_len: usize,
    pub sample_rate_hz: u32,
}

impl FrameSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// First sample index covered by frame `q`.
    pub fn frame_start(&self, q: usize) -> usize {
        q * self.hop
    }
}

/// Number of samples in a frame of `frame_ms` at `fs`.
pub fn frame_len_samples(frame_ms: f64, fs: u32) -> usize {
    (frame_ms * fs as f64 / 1000.0).round() as usize
}

/// Cuts `signal` into rectangular frames of `frame_ms` with the given overlap.
///
/// The final partial frame is zero-padded. Frame count is
/// `ceil((len - frame_len) / hop) + 1`.
pub fn frame_signal(
    signal: &AudioSignal,
    frame_ms: f64,
    overlap_fraction: f64,
) -> Result<FrameSequence> {
    if !(frame_ms > 0.0) {
        return Err(Error::InvalidParameter(format!("frame_ms = {frame_ms}")));
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(Error::InvalidParameter(format!(
            "overlap fraction {overlap_fraction} outside [0, 1)"
        )));
    }
    let frame_len = frame_len_samples(frame_ms, signal.sample_rate_hz());
    if frame_len == 0 {
        return Err(Error::InvalidParameter("frame length rounds to zero".into()));
    }
    let hop = ((frame_len as f64) * (1.0 - overlap_fraction)).round().max(1.0) as usize;
    let hop = hop.min(frame_len);
    let n = signal.len();
    if n < frame_len {
        return Err(Error::Degenerate(format!(
            "signal of {n} samples is shorter than one {frame_len}-sample frame"
        )));
    }
    let count = (n - frame_len).div_ceil(hop) + 1;
    let x = signal.samples();
    let frames = (0..count)
        .map(|q| {
            let start = q * hop;
            let end = (start + frame_len).min(n);
            let mut f = x[start..end].to_vec();
            f.resize(frame_len, 0.0);
            f
        })
        .collect();
    Ok(FrameSequence {
        frames,
        frame_len,
        hop,
        window: Window::Hann,
        voiced_mask: vec![false; count],
        source_len: n,
        sample_rate_hz: signal.sample_rate_hz(),
    })
}

/// Windows every frame once, overlap-adds, and divides by the window sum.
///
/// Unmodified frames reproduce the source exactly up to rounding.
pub fn overlap_add(frames: &FrameSequence) -> Result<AudioSignal> {
    let len = frames.frame_len;
    if len == 0 || frames.hop == 0 || frames.hop > len {
        return Err(Error::Contract(format!(
            "bad frame geometry: frame_len {len}, hop {}",
            frames.hop
        )));
    }
    if let Some((q, f)) = frames.frames.iter().enumerate().find(|(_, f)| f.len() != len) {
        return Err(Error::Contract(format!(
            "frame {q} has {} samples, expected {len}",
            f.len()
        )));
    }
    let window = match frames.window {
        Window::Hann => hann_window(len),
    };
    let total = frames
        .frames
        .len()
        .saturating_sub(1)
        .checked_mul(frames.hop)
        .map(|s| s + len)
        .unwrap_or(0)
        .max(frames.source_len);
    let mut acc = vec![0.0; total];
    let mut wsum = vec![0.0; total];
    for (q, frame) in frames.frames.iter().enumerate() {
        let start = q * frames.hop;
        for (i, (&v, &w)) in frame.iter().zip(&window).enumerate() {
            acc[start + i] += v * w;
            wsum[start + i] += w;
        }
    }
    let out: Vec<f64> = acc
        .iter()
        .zip(&wsum)
        .take(frames.source_len)
        .map(|(&a, &w)| if w > 0.0 { a / w } else { 0.0 })
        .collect();
    AudioSignal::new(out, frames.sample_rate_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sig(n: usize) -> AudioSignal {
        AudioSignal::new((0..n).map(|i| ((i * 7919) % 113) as f64 / 113.0 - 0.5).collect(), 16_000)
            .unwrap()
    }

    #[test]
    fn frame_length_at_16k() {
        let f = frame_signal(&sig(2000), 32.0, 0.5).unwrap();
        assert_eq!(f.frame_len, 512);
        assert_eq!(f.hop, 256);
    }

    #[test]
    fn frame_counts() {
        // Starts enumerate as 0, 256, 512.
        assert_eq!(frame_signal(&sig(1024), 32.0, 0.5).unwrap().len(), 3);
        assert_eq!(frame_signal(&sig(512), 32.0, 0.5).unwrap().len(), 1);
        let f = frame_signal(&sig(1025), 32.0, 0.5).unwrap();
        assert_eq!(f.len(), 4);
        assert!(f.frames[3][257..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_short_is_degenerate() {
        assert!(matches!(
            frame_signal(&sig(511), 32.0, 0.5),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn window_is_cola_at_half_overlap() {
        let w = hann_window(512);
        for i in 0..256 {
            assert!((w[i] + w[i + 256] - 1.0).abs() < 1e-15);
        }
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn zero_frames_give_zero_signal() {
        let mut f = frame_signal(&sig(3000), 32.0, 0.5).unwrap();
        for fr in &mut f.frames {
            fr.iter_mut().for_each(|v| *v = 0.0);
        }
        let y = overlap_add(&f).unwrap();
        assert_eq!(y.len(), 3000);
        assert!(y.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_frame_is_window_compensated() {
        let s = sig(512);
        let f = frame_signal(&s, 32.0, 0.5).unwrap();
        let w = hann_window(512);
        let y = overlap_add(&f).unwrap();
        for i in 0..512 {
            // Oracle: windowed frame over its own window sum.
            let expect = s.samples()[i] * w[i] / w[i];
            assert!((y.samples()[i] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn inconsistent_frames_rejected() {
        let mut f = frame_signal(&sig(2000), 32.0, 0.5).unwrap();
        f.frames[1].pop();
        assert!(matches!(overlap_add(&f), Err(Error::Contract(_))));
    }

    proptest! {
        #[test]
        fn perfect_reconstruction(
            x in prop::collection::vec(-1.0f64..1.0, 512..4000),
        ) {
            let s = AudioSignal::new(x, 16_000).unwrap();
            let y = overlap_add(&frame_signal(&s, 32.0, 0.5).unwrap()).unwrap();
            prop_assert_eq!(y.len(), s.len());
            let err: f64 = s.samples().iter().zip(y.samples()).map(|(a, b)| (a - b).powi(2)).sum();
            let ref_e: f64 = s.samples().iter().map(|a| a * a).sum();
            prop_assert!((err / ref_e.max(1e-300)).sqrt() <= 1e-10);
        }
    }
}
