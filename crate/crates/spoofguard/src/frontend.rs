//! Clip to network input: framing, VAD, truncated DCT and context stacking.

use std::fmt::Write as _;

use spoofguard_core::dsp::{detect_speech, frame_len_for, frame_signal_ms, frame_stats, AudioClip, Dct, DctFrame, VadConfig};
use spoofguard_core::features::stack_matrix;
use spoofguard_core::Matrix;

use crate::config::PipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct FrontEnd {
    dct: Dct,
    sample_rate: u32,
    frame_ms: u32,
    context: usize,
    vad: VadConfig,
}

/// Per-frame analysis of one clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub source_id: String,
    pub frames: Vec<DctFrame>,
    pub log_energy: Vec<f64>,
    pub zero_crossing_rate: Vec<f64>,
}

impl FrontEnd {
    pub fn new(cfg: &PipelineConfig) -> Result<Self> {
        let len = frame_len_for(cfg.sample_rate, cfg.frame_ms);
        Ok(FrontEnd {
            dct: Dct::new(len, cfg.dct_coeffs)?,
            sample_rate: cfg.sample_rate,
            frame_ms: cfg.frame_ms,
            context: cfg.context,
            vad: cfg.vad,
        })
    }

    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * self.dct.n_coeffs()
    }

    pub fn analyze(&self, clip: &AudioClip) -> Result<Analysis> {
        if clip.sample_rate() != self.sample_rate {
            return Err(Error::validation(format!(
                "{}: sample rate {} Hz, configuration expects {} Hz",
                clip.source_id(),
                clip.sample_rate(),
                self.sample_rate
            )));
        }
        let seq = detect_speech(frame_signal_ms(clip, self.frame_ms)?, &self.vad);
        let stats: Vec<_> = seq.frames().map(frame_stats).collect();
        Ok(Analysis {
            source_id: clip.source_id().to_owned(),
            frames: self.dct.frames(&seq)?,
            log_energy: stats.iter().map(|s| s.log_energy).collect(),
            zero_crossing_rate: stats.iter().map(|s| s.zero_crossing_rate).collect(),
        })
    }

    /// Stacked inputs, one row per speech frame (possibly none).
    pub fn stacked(&self, analysis: &Analysis) -> Result<Matrix> {
        Ok(stack_matrix(&analysis.frames, self.context)?.rows)
    }
}

impl Analysis {
    pub fn speech_count(&self) -> usize {
        self.frames.iter().filter(|f| f.is_speech).count()
    }

    /// `frame,log_energy_db,zcr,speech` rows for VAD debugging.
    pub fn vad_csv(&self) -> String {
        let mut s = String::from("frame,log_energy_db,zcr,speech\n");
        for (i, f) in self.frames.iter().enumerate() {
            let _ = writeln!(s, "{i},{:.4},{:.4},{}", self.log_energy[i], self.zero_crossing_rate[i], u8::from(f.is_speech));
        }
        s
    }
}
