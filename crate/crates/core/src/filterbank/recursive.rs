use rustfft::num_complex::Complex;

use super::ImpulseResponse;
use crate::error::{Error, Result};
use crate::signal::{fft_forward, fft_inverse};

/// Band signals of one frame plus what no filter took.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutputs {
    pub bands: Vec<Vec<f64>>,
    pub residual: Vec<f64>,
}

impl FilterOutputs {
    pub fn num_bands(&self) -> usize {
        self.bands.len()
    }
}

/// Subtractive filter cascade: each filter sees what the previous ones left.
///
/// `y_k = x_{k-1} * h_k` with the envelope peak of `h_k` at lag zero,
/// truncated to the frame; `x_k = x_{k-1} - y_k`; the residual is `x_L`.
/// The bands and residual sum back to the frame by construction.
pub fn recursive_filter(frame: &[f64], filters: &[ImpulseResponse]) -> FilterOutputs {
    let mut x = frame.to_vec();
    let mut bands = Vec::with_capacity(filters.len());
    for h in filters {
        let y = aligned_convolution(&x, h);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi -= yi;
        }
        bands.push(y);
    }
    FilterOutputs { bands, residual: x }
}

fn aligned_convolution(x: &[f64], h: &ImpulseResponse) -> Vec<f64> {
    let n = x.len();
    if n == 0 || h.is_empty() {
        return vec![0.0; n];
    }
    let nfft = (n + h.len() - 1).next_power_of_two();
    let zero = Complex::new(0.0, 0.0);
    let mut a: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(nfft, zero);
    let mut b: Vec<Complex<f64>> = h.taps.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(nfft, zero);
    let fwd = fft_forward(nfft);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (p, q) in a.iter_mut().zip(&b) {
        *p *= q;
    }
    fft_inverse(nfft).process(&mut a);
    let scale = 1.0 / nfft as f64;
    a[h.peak_index..h.peak_index + n].iter().map(|c| c.re * scale).collect()
}

/// `sum_k G_k y_k + residual`; the residual is never amplified.
pub fn reconstruct_frame(outputs: &FilterOutputs, gains: &[f64]) -> Result<Vec<f64>> {
    if gains.len() != outputs.bands.len() {
        return Err(Error::Contract(format!(
            "{} gains for {} bands",
            gains.len(),
            outputs.bands.len()
        )));
    }
    if let Some(g) = gains.iter().find(|g| !(**g >= 1.0 && g.is_finite())) {
        return Err(Error::Contract(format!("gain {g} below 1")));
    }
    let mut out = outputs.residual.clone();
    for (band, g) in outputs.bands.iter().zip(gains) {
        for (o, y) in out.iter_mut().zip(band) {
            *o += g * y;
        }
    }
    Ok(out)
}
