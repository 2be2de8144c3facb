use std::path::Path;

use hound::{SampleFormat, WavSpec, WavWriter};

use super::AudioSignal;
use crate::error::{Error, Result};

/// Reads a PCM (8/16/24/32-bit integer) or 32-bit float WAV file.
///
/// Multichannel input is downmixed by averaging channels. Integer samples are
/// scaled by `2^-(bits-1)`, so a 16-bit value of 32767 maps to 32767/32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioSignal> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format("zero channels".into()));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => {
            if !(1..=32).contains(&spec.bits_per_sample) {
                return Err(Error::Format(format!(
                    "unsupported bit depth {}",
                    spec.bits_per_sample
                )));
            }
            let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| v as f64 * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
        SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::Format(format!(
                    "unsupported float bit depth {}",
                    spec.bits_per_sample
                )));
            }
            reader
                .into_samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
    };
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|c| c.iter().sum::<f64>() / channels as f64)
            .collect()
    };
    AudioSignal::new(samples, spec.sample_rate)
}

/// Writes a mono 16-bit PCM WAV file.
///
/// Samples are rounded to the nearest step of 1/32768 and clamped to the
/// representable range.
pub fn write_wav(path: impl AsRef<Path>, signal: &AudioSignal) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in signal.samples() {
        writer
            .write_sample(quantize_i16(s))
            .map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}

pub(crate) fn quantize_i16(s: f64) -> i16 {
    (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_i16(path: &Path, values: &[i16]) {
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(path, spec).unwrap();
        for &v in values {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
    }

    #[test]
    fn pcm16_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        write_raw_i16(&p, &[32767, 0, -32768]);
        let s = read_wav(&p).unwrap();
        assert_eq!(s.samples()[0], 32767.0 / 32768.0);
        assert_eq!(s.samples()[1], 0.0);
        assert_eq!(s.samples()[2], -1.0);
        assert_eq!(s.sample_rate_hz(), 16_000);
    }

    #[test]
    fn tone_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tone.wav");
        let x: Vec<f64> = (0..16_000)
            .map(|i| 0.8 * (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 16_000.0).sin())
            .collect();
        let sig = AudioSignal::new(x.clone(), 16_000).unwrap();
        write_wav(&p, &sig).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.len(), x.len());
        for (a, b) in x.iter().zip(back.samples()) {
            // Oracle: direct integer rounding.
            let expect = (a * 32768.0).round() / 32768.0;
            assert_eq!(*b, expect);
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
    }

    #[test]
    fn stereo_is_downmixed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8_000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for _ in 0..4 {
            w.write_sample(16384i16).unwrap();
            w.write_sample(0i16).unwrap();
        }
        w.finalize().unwrap();
        let s = read_wav(&p).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.samples()[0], 0.25);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_wav("/nonexistent/nope.wav").unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err:?}");
    }

    #[test]
    fn garbage_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        std::fs::write(&p, b"this is not a riff file at all").unwrap();
        assert!(matches!(read_wav(&p).unwrap_err(), Error::Format(_)));
    }
}
