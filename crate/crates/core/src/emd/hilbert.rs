use rustfft::num_complex::Complex;

use super::Envelope;
use crate::signal::{fft_forward, fft_inverse};

/// Instantaneous amplitude `|x + j H{x}|` via the FFT analytic signal.
///
/// Negative-frequency bins are zeroed and positive ones doubled; DC and (for
/// even lengths) Nyquist are kept as they are.
pub fn analytic_envelope(imf: &[f64]) -> Envelope {
    let n = imf.len();
    if n == 0 {
        return Envelope(Vec::new());
    }
    let mut buf: Vec<Complex<f64>> = imf.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(n).process(&mut buf);
    let half = n / 2;
    let positive_end = if n % 2 == 0 { half } else { half + 1 };
    for b in buf.iter_mut().take(positive_end).skip(1) {
        *b *= 2.0;
    }
    for b in buf.iter_mut().skip(half + 1) {
        *b = Complex::new(0.0, 0.0);
    }
    fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    Envelope(buf.iter().map(|c| c.norm() * scale).collect())
}
