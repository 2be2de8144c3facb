//! Objective scores: ESTOI and SNR.

mod estoi;
mod resample;
mod snr;

pub use estoi::{estoi, estoi_with, EstoiConfig, EstoiScore, ThirdOctaveBands, ThirdOctaveSpectrogram};
pub use resample::resample;
pub use snr::measure_snr;
