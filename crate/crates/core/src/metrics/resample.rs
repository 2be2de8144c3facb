use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Zero crossings of the sinc kept on each side, per unit of the larger
/// rate factor.
const HALF_ZEROS: usize = 10;
const KAISER_BETA: f64 = 5.0;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..64 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Rational-ratio resampler: zero-stuff by `up`, Kaiser-windowed sinc
/// lowpass at the narrower Nyquist, keep every `down`-th sample. The filter
/// delay is compensated, so output sample `m` sits at time `m / to_hz`.
///
/// Output length is `ceil(len * to / from)`.
pub fn resample(x: &[f64], from_hz: u32, to_hz: u32) -> Result<Vec<f64>> {
    if from_hz == 0 || to_hz == 0 {
        return Err(Error::InvalidParameter("sample rates must be positive".into()));
    }
    if from_hz == to_hz {
        return Ok(x.to_vec());
    }
    let g = gcd(from_hz as u64, to_hz as u64);
    let up = (to_hz as u64 / g) as usize;
    let down = (from_hz as u64 / g) as usize;
    let factor = up.max(down);
    let half = HALF_ZEROS * factor;
    // Cutoff in cycles per upsampled sample.
    let fc = 0.5 / factor as f64;
    let i0_beta = bessel_i0(KAISER_BETA);
    let h: Vec<f64> = (0..=2 * half)
        .map(|k| {
            let m = k as f64 - half as f64;
            let arg = 2.0 * fc * m;
            let sinc = if m == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
            let r = m / half as f64;
            let w = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
            up as f64 * 2.0 * fc * sinc * w
        })
        .collect();
    let out_len = (x.len() * up).div_ceil(down);
    let upsampled_len = (x.len() * up) as isize;
    Ok((0..out_len)
        .map(|m| {
            let centre = (m * down + half) as isize;
            // Taps k with (centre - k) a multiple of `up`.
            let first = (centre.rem_euclid(up as isize)) as usize;
            let mut acc = 0.0;
            let mut k = first;
            while k <= 2 * half {
                let j = centre - k as isize;
                if j >= 0 && j < upsampled_len {
                    acc += h[k] * x[j as usize / up];
                }
                k += up;
            }
            acc
        })
        .collect())
}
