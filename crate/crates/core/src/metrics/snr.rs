use crate::error::{Error, Result};
use crate::signal::AudioSignal;

/// `10 log10(P_ref / P_(degraded - reference))`; `+inf` when the two are equal.
pub fn measure_snr(reference: &AudioSignal, degraded: &AudioSignal) -> Result<f64> {
    if reference.len() != degraded.len() {
        return Err(Error::Contract(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            degraded.len()
        )));
    }
    let pr: f64 = reference.samples().iter().map(|v| v * v).sum();
    let pd: f64 = reference
        .samples()
        .iter()
        .zip(degraded.samples())
        .map(|(r, d)| (d - r) * (d - r))
        .sum();
    if pd == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (pr / pd).log10())
}
