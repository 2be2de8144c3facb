//! HDAG: intelligibility enhancement of noisy voiced speech.
//!
//! Each frame's F0 is estimated from the envelopes of its EEMD modes. FSFFE
//! then sorts the frame into a low- or high-pitch class and corrects octave
//! errors. A gammachirp filterbank is placed at third-octave steps above
//! the corrected F0, and each band is amplified with a class-specific gain
//! before overlap-add.
//!
//! ```no_run
//! use hdag::{enhance_signal, read_wav, write_wav, Config};
//!
//! let noisy = read_wav("noisy.wav")?;
//! let (enhanced, report) = enhance_signal(&noisy, &Config::default(), None)?;
//! write_wav("enhanced.wav", &enhanced)?;
//! println!("{} voiced frames", report.voiced_frames());
//! # Ok::<(), hdag::Error>(())
//! ```

pub mod config;
pub mod emd;
pub mod enhance;
pub mod error;
pub mod experiment;
pub mod filterbank;
pub mod metrics;
pub mod pitch;
pub mod signal;
pub mod synth;

pub use config::Config;
pub use enhance::{enhance_signal, EnhancementReport};
pub use error::{Error, Result};
pub use experiment::{JobManifest, Method};
pub use filterbank::{FilterbankConfig, Spacing};
pub use metrics::{estoi, EstoiScore};
pub use pitch::{FrameClass, PitchFrame, VoicingLabels};
pub use signal::{read_wav, write_wav, AudioSignal};
