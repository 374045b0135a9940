//! Front end: framing, voice activity detection, per-frame DCT.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math;
use crate::DCT_COEFFS;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32, source_id: impl Into<String>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.is_empty() {
            return Err(Error::Empty("audio clip"));
        }
        if let Some(pos) = samples.iter().position(|s| !(-1.0..=1.0).contains(s)) {
            return Err(Error::invalid(format!("sample {pos} outside [-1, 1]: {}", samples[pos])));
        }
        Ok(AudioClip { samples, sample_rate, source_id: source_id.into() })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Samples per frame for a given rate and frame duration.
pub fn frame_len_for(sample_rate: u32, frame_ms: u32) -> usize {
    math::round(sample_rate as f64 * frame_ms as f64 / 1000.0) as usize
}

/// Consecutive, non-overlapping, unwindowed frames of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSequence {
    frame_len: usize,
    data: Vec<f64>,
    speech_flags: Vec<bool>,
    source_id: String,
}

impl FrameSequence {
    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn n_frames(&self) -> usize {
        self.speech_flags.len()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.frame_len..(i + 1) * self.frame_len]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.n_frames()).map(move |i| self.frame(i))
    }

    /// All frame samples back to back.
    pub fn samples(&self) -> &[f64] {
        &self.data
    }

    pub fn speech_flags(&self) -> &[bool] {
        &self.speech_flags
    }

    pub fn speech_count(&self) -> usize {
        self.speech_flags.iter().filter(|&&f| f).count()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

/// Splits a clip into 20 ms frames, dropping the trailing partial frame.
pub fn frame_signal(clip: &AudioClip) -> Result<FrameSequence> {
    frame_signal_ms(clip, crate::FRAME_MS)
}

pub fn frame_signal_ms(clip: &AudioClip, frame_ms: u32) -> Result<FrameSequence> {
    let frame_len = frame_len_for(clip.sample_rate, frame_ms);
    if frame_len == 0 {
        return Err(Error::config("frame length rounds to zero samples"));
    }
    let len = clip.samples.len();
    if len < frame_len {
        return Err(Error::TooShort { len, min: frame_len });
    }
    let n_frames = len / frame_len;
    Ok(FrameSequence {
        frame_len,
        data: clip.samples[..n_frames * frame_len].to_vec(),
        speech_flags: alloc::vec![false; n_frames],
        source_id: clip.source_id.clone(),
    })
}

/// Energy-threshold VAD with hangover.
///
/// A frame is speech when its log energy exceeds the file's noise floor
/// (a low percentile of frame log energies) by `margin_db`. The
/// `hangover` frames following a speech run are kept as speech too.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    pub margin_db: f64,
    pub noise_percentile: f64,
    pub hangover: usize,
}

impl Default for VadConfig {
    fn default() -> Self {
        VadConfig { margin_db: 9.0, noise_percentile: 0.10, hangover: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameStats {
    /// Mean-square energy in dB.
    pub log_energy: f64,
    /// Fraction of adjacent sample pairs that change sign.
    pub zero_crossing_rate: f64,
}

// keeps silent frames finite; far below 16-bit quantization noise
const ENERGY_FLOOR: f64 = 1e-20;

pub fn frame_stats(frame: &[f64]) -> FrameStats {
    let energy = frame.iter().map(|x| x * x).sum::<f64>() / frame.len() as f64;
    let crossings = frame.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count();
    FrameStats {
        log_energy: 10.0 * math::log10(energy + ENERGY_FLOOR),
        zero_crossing_rate: crossings as f64 / (frame.len().max(2) - 1) as f64,
    }
}

/// Fills the speech flags of `frames` and returns it.
pub fn detect_speech(mut frames: FrameSequence, cfg: &VadConfig) -> FrameSequence {
    let flags = vad_flags(&frames, cfg);
    frames.speech_flags = flags;
    frames
}

pub fn vad_flags(frames: &FrameSequence, cfg: &VadConfig) -> Vec<bool> {
    let energies: Vec<f64> = frames.frames().map(|f| frame_stats(f).log_energy).collect();
    if energies.is_empty() {
        return Vec::new();
    }
    let mut sorted = energies.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = math::floor(cfg.noise_percentile.clamp(0.0, 1.0) * (sorted.len() - 1) as f64) as usize;
    let threshold = sorted[idx] + cfg.margin_db;

    let mut flags = Vec::with_capacity(energies.len());
    let mut hang = 0usize;
    for &e in &energies {
        if e > threshold {
            flags.push(true);
            hang = cfg.hangover;
        } else if hang > 0 {
            flags.push(true);
            hang -= 1;
        } else {
            flags.push(false);
        }
    }
    flags
}

/// Leading coefficients of one frame's orthonormal DCT-II.
#[derive(Debug, Clone, PartialEq)]
pub struct DctFrame {
    pub coeffs: Vec<f64>,
    pub is_speech: bool,
}

/// Orthonormal DCT-II over `len` samples, truncated to `n_coeffs` outputs.
///
/// The basis is tabulated once. Angles are reduced modulo a full period
/// in integer arithmetic before the cosine is taken.
#[derive(Debug, Clone)]
pub struct Dct {
    len: usize,
    n_coeffs: usize,
    basis: Vec<f64>,
}

impl Dct {
    pub fn new(len: usize, n_coeffs: usize) -> Result<Self> {
        if n_coeffs == 0 || len < n_coeffs {
            return Err(Error::config(format!(
                "DCT of {n_coeffs} coefficients needs frames of at least that length, got {len}"
            )));
        }
        // cos(pi * m / (2N)) for m in 0..4N covers every (2n+1)k mod 4N
        let period = 4 * len;
        let table: Vec<f64> =
            (0..period).map(|m| math::cos(PI * m as f64 / (2 * len) as f64)).collect();
        let s0 = math::sqrt(1.0 / len as f64);
        let sk = math::sqrt(2.0 / len as f64);
        let mut basis = Vec::with_capacity(n_coeffs * len);
        for k in 0..n_coeffs {
            let scale = if k == 0 { s0 } else { sk };
            for n in 0..len {
                basis.push(scale * table[((2 * n + 1) * k) % period]);
            }
        }
        Ok(Dct { len, n_coeffs, basis })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }

    pub fn transform_into(&self, frame: &[f64], out: &mut [f64]) -> Result<()> {
        crate::error::check_dim(self.len, frame.len())?;
        crate::error::check_dim(self.n_coeffs, out.len())?;
        for (o, row) in out.iter_mut().zip(self.basis.chunks_exact(self.len)) {
            *o = crate::linalg::dot(row, frame);
        }
        Ok(())
    }

    pub fn transform(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let mut out = alloc::vec![0.0; self.n_coeffs];
        self.transform_into(frame, &mut out)?;
        Ok(out)
    }

    /// Transforms every frame of a sequence, carrying the speech flags.
    pub fn frames(&self, seq: &FrameSequence) -> Result<Vec<DctFrame>> {
        seq.frames()
            .zip(seq.speech_flags())
            .map(|(f, &is_speech)| Ok(DctFrame { coeffs: self.transform(f)?, is_speech }))
            .collect()
    }
}

/// First 128 DCT coefficients of a single frame, flagged non-speech.
pub fn dct_frame(frame: &[f64]) -> Result<DctFrame> {
    let dct = Dct::new(frame.len(), DCT_COEFFS)?;
    Ok(DctFrame { coeffs: dct.transform(frame)?, is_speech: false })
}
