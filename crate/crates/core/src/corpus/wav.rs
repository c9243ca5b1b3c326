use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::AudioSignal;
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

const SCALE: f64 = 32768.0;

fn hound_err(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    }
}

fn check_spec(path: &Path, spec: &WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(Error::format(path, format!("channels: expected 1, found {}", spec.channels)));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::format(
            path,
            format!("sample_rate: expected {SAMPLE_RATE}, found {}", spec.sample_rate),
        ));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::format(
            path,
            format!(
                "sample_format: expected 16-bit PCM, found {}-bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        ));
    }
    Ok(())
}

/// Length in samples of a conforming WAV file, read from its header.
pub fn wav_len(path: &Path) -> Result<usize> {
    let reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    check_spec(path, &reader.spec())?;
    Ok(reader.duration() as usize)
}

/// Reads 16-bit PCM mono 16 kHz audio, scaling samples by 1/32768.
pub fn load_wav(path: &Path) -> Result<AudioSignal> {
    let mut reader = WavReader::open(path).map_err(|e| hound_err(path, e))?;
    check_spec(path, &reader.spec())?;
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| hound_err(path, e))?;
    AudioSignal::new(samples)
}

/// Writes 16-bit PCM, rounding to the nearest code and saturating at full scale.
pub fn save_wav(signal: &AudioSignal, path: &Path) -> Result<()> {
    if signal.sample_rate != SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "sample_rate: expected {SAMPLE_RATE}, found {}",
            signal.sample_rate
        )));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for &x in &signal.samples {
        let v = (x * SCALE).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        writer.write_sample(v).map_err(|e| hound_err(path, e))?;
    }
    writer.finalize().map_err(|e| hound_err(path, e))
}
