//! PCM-16 mono WAV files.

use std::io::{Read, Seek, Write};
use std::path::Path;

use spoofguard_core::dsp::AudioClip;

use crate::error::{Error, Result};

const SCALE: f64 = 32768.0;

pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let id = path.to_string_lossy().into_owned();
    decode(reader, path, id)
}

/// Reads from any seekable source; `source_id` labels the resulting clip.
pub fn read_wav_from<R: Read>(source: R, source_id: &str) -> Result<AudioClip> {
    let path = Path::new(source_id);
    let reader = hound::WavReader::new(source).map_err(|e| wav_error(path, e))?;
    decode(reader, path, source_id.to_owned())
}

fn decode<R: Read>(mut reader: hound::WavReader<R>, path: &Path, id: String) -> Result<AudioClip> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(unsupported(path, format!("{} channels, expected mono", spec.channels)));
    }
    if spec.bits_per_sample != 16 || spec.sample_format != hound::SampleFormat::Int {
        return Err(unsupported(path, format!("{}-bit {:?}, expected 16-bit PCM", spec.bits_per_sample, spec.sample_format)));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / SCALE))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    Ok(AudioClip::new(samples, spec.sample_rate, id)?)
}

/// Quantizes to 16 bits; `x * 32768` is rounded and clamped to the i16 range.
pub fn quantize(x: f64) -> i16 {
    (x * SCALE).round().clamp(-SCALE, SCALE - 1.0) as i16
}

pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav_to(std::io::BufWriter::new(file), clip).map_err(|e| match e {
        Error::Format { reason, .. } => Error::format(path, "WAV", reason),
        other => other,
    })
}

pub fn write_wav_to<W: Write + Seek>(sink: W, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let path = Path::new(clip.source_id());
    let mut writer = hound::WavWriter::new(sink, spec).map_err(|e| wav_error(path, e))?;
    let mut i16_writer = writer.get_i16_writer(clip.samples().len() as u32);
    for &s in clip.samples() {
        i16_writer.write_sample(quantize(s));
    }
    i16_writer.flush().map_err(|e| wav_error(path, e))?;
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn unsupported(path: &Path, reason: String) -> Error {
    Error::UnsupportedFormat { path: path.to_path_buf(), reason }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => unsupported(path, "unsupported WAV encoding".into()),
        other => Error::format(path, "WAV", other.to_string()),
    }
}
