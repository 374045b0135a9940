//! Synthetic bona fide and spoofed clips for desk-scale experiments.
//!
//! "Human" clips are voiced segments made of a few harmonics with a slowly
//! sweeping fundamental, separated by quiet noisy pauses, over a constant
//! low-frequency rumble. Each attack re-processes freshly generated
//! human-style material.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use spoofguard_core::dsp::{frame_len_for, AudioClip};
use spoofguard_core::{Label, CONTEXT_FRAMES, FRAME_MS};

use crate::error::{Error, IoContext, Result};
use crate::manifest::{write_manifest, Manifest, ManifestEntry};
use crate::wav::write_wav;

/// Upper edge of the band removed by the artifact injector.
pub const LF_CUTOFF_HZ: f64 = 100.0;
/// Length of the alternating artifact stretches.
pub const LF_STRETCH_MS: u32 = 200;
/// Block size of the spectral attacks.
pub const BLOCK: usize = 512;

const PEAK: f64 = 0.8;
const RUMBLE_LEVEL: f64 = 0.12;
const NOISE_LEVEL: f64 = 0.0005;
const SMOOTH_HALF_WIDTH: usize = 16;
const RESYNTH_HALF_WIDTH: usize = 7;
const ENVELOPE_HALF_WIDTH: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AttackType {
    Concat,
    PhaseDistort,
    SpectralSmooth,
    FormantShift,
    NoiseResynth,
}

impl AttackType {
    pub const ALL: [AttackType; 5] = [
        AttackType::Concat,
        AttackType::PhaseDistort,
        AttackType::SpectralSmooth,
        AttackType::FormantShift,
        AttackType::NoiseResynth,
    ];

    /// Position in [`AttackType::ALL`]; labels are `S{index+1}` / `U{index+1}`.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            AttackType::Concat => "concat",
            AttackType::PhaseDistort => "phase_distort",
            AttackType::SpectralSmooth => "spectral_smooth",
            AttackType::FormantShift => "formant_shift",
            AttackType::NoiseResynth => "noise_resynth",
        }
    }

    pub fn label(self, known: bool) -> Label {
        let n = self.index() as u8 + 1;
        if known {
            Label::Known(n)
        } else {
            Label::Unknown(n.into())
        }
    }
}

impl fmt::Display for AttackType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AttackType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AttackType::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown attack type {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_human: usize,
    pub n_per_attack: usize,
    pub attack_types: Vec<AttackType>,
    /// Attack types labelled `U<n>` instead of `S<n>`.
    pub unknown: BTreeSet<AttackType>,
    pub inject_lf_discontinuity: bool,
    pub seed: u64,
    pub clip_seconds: f64,
    pub sample_rate: u32,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_human: 200,
            n_per_attack: 100,
            attack_types: AttackType::ALL.to_vec(),
            unknown: BTreeSet::new(),
            inject_lf_discontinuity: false,
            seed: 7,
            clip_seconds: 1.0,
            sample_rate: 16000,
        }
    }
}

impl SynthSpec {
    pub fn n_samples(&self) -> usize {
        (self.clip_seconds * f64::from(self.sample_rate)).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate < 4000 {
            return Err(Error::validation(format!("sample rate {} too low", self.sample_rate)));
        }
        let min_frames = 2 * CONTEXT_FRAMES + 1;
        let frames = self.n_samples() / frame_len_for(self.sample_rate, FRAME_MS);
        if !(self.clip_seconds > 0.2) || frames < min_frames {
            return Err(Error::validation(format!(
                "clip_seconds {} gives {frames} frames, need at least {min_frames}",
                self.clip_seconds
            )));
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = self.attack_types.iter().find(|a| !seen.insert(**a)) {
            return Err(Error::validation(format!("attack type {dup} listed twice")));
        }
        Ok(())
    }

    fn label(&self, attack: AttackType) -> Label {
        attack.label(!self.unknown.contains(&attack))
    }
}

/// What a generated clip is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipKind {
    Human,
    Attack(AttackType),
}

/// Independent stream per clip, so any clip can be regenerated on its own.
fn clip_rng(seed: u64, kind: ClipKind, index: usize) -> ChaCha8Rng {
    let tag = match kind {
        ClipKind::Human => 0,
        ClipKind::Attack(a) => a.index() as u64 + 1,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((tag << 32) | index as u64);
    rng
}

/// One clip of the corpus described by `spec`.
pub fn synth_clip(spec: &SynthSpec, kind: ClipKind, index: usize) -> Result<AudioClip> {
    spec.validate()?;
    let mut rng = clip_rng(spec.seed, kind, index);
    let (sr, n) = (f64::from(spec.sample_rate), spec.n_samples());
    let mut samples = match kind {
        ClipKind::Human => human_voice(&mut rng, sr, n),
        ClipKind::Attack(attack) => apply_attack(attack, &mut rng, sr, n),
    };
    let gain = rng.gen_range(0.6..1.0) * PEAK / peak(&samples).max(1e-12);
    samples.iter_mut().for_each(|s| *s *= gain);
    if spec.inject_lf_discontinuity && kind != ClipKind::Human {
        inject_lf_discontinuity(&mut samples, spec.sample_rate);
    }
    samples.iter_mut().for_each(|s| *s = s.clamp(-1.0, 1.0));
    let id = match kind {
        ClipKind::Human => format!("human_{index:04}"),
        ClipKind::Attack(a) => format!("{a}_{index:04}"),
    };
    Ok(AudioClip::new(samples, spec.sample_rate, id)?)
}

/// Writes every clip plus `manifest.txt` (paths relative to `out_dir`).
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<Manifest> {
    spec.validate()?;
    std::fs::create_dir_all(out_dir).at(out_dir)?;
    let mut jobs: Vec<(ClipKind, usize, Label)> = (0..spec.n_human).map(|i| (ClipKind::Human, i, Label::Human)).collect();
    for &a in &spec.attack_types {
        jobs.extend((0..spec.n_per_attack).map(|i| (ClipKind::Attack(a), i, spec.label(a))));
    }
    let mut entries = Vec::with_capacity(jobs.len());
    for (kind, index, label) in jobs {
        let clip = synth_clip(spec, kind, index)?;
        let name = format!("{}.wav", clip.source_id());
        write_wav(&out_dir.join(&name), &clip)?;
        entries.push(ManifestEntry::new(name, label));
    }
    let manifest = Manifest::new(entries)?;
    write_manifest(&out_dir.join("manifest.txt"), &manifest)?;
    Ok(manifest)
}

fn peak(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Samples of the stretches whose low band is removed: every other
/// `LF_STRETCH_MS` stretch, starting with the first.
pub fn lf_stretches(n_samples: usize, sample_rate: u32) -> Vec<Range<usize>> {
    let len = frame_len_for(sample_rate, LF_STRETCH_MS);
    (0..n_samples)
        .step_by(2 * len)
        .map(|start| start..(start + len).min(n_samples))
        .collect()
}

/// Zeroes the 0-100 Hz band inside each scheduled stretch, leaving hard
/// edges between processed and untouched audio. Uses no randomness.
pub fn inject_lf_discontinuity(samples: &mut [f64], sample_rate: u32) {
    let mut planner = FftPlanner::new();
    for range in lf_stretches(samples.len(), sample_rate) {
        let seg = &mut samples[range];
        let n = seg.len();
        let cutoff = (LF_CUTOFF_HZ * n as f64 / f64::from(sample_rate)).floor() as usize;
        let mut spec = to_complex(seg);
        planner.plan_fft_forward(n).process(&mut spec);
        for k in 0..=cutoff.min(n / 2) {
            spec[k] = Complex::default();
            if k > 0 {
                spec[n - k] = Complex::default();
            }
        }
        planner.plan_fft_inverse(n).process(&mut spec);
        for (s, c) in seg.iter_mut().zip(&spec) {
            *s = c.re / n as f64;
        }
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex<f64>> {
    x.iter().map(|&re| Complex { re, im: 0.0 }).collect()
}

/// Relative harmonic amplitudes: a weak fundamental keeps the voice out of
/// the lowest DCT coefficients, which the rumble occupies.
const HARMONIC_GAINS: [f64; 4] = [0.1, 1.0, 0.7, 0.5];
const F0_CENTRE: f64 = 160.0;
const F0_SWING: f64 = 60.0;
const F0_SWEEP_HZ: f64 = 0.5;

fn human_voice(rng: &mut ChaCha8Rng, sr: f64, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let dur = n as f64 / sr;
    let mut t = rng.gen_range(0.08..0.16);
    while t < dur - 0.1 {
        let len = rng.gen_range(0.15..0.35f64).min(dur - t);
        let start = (t * sr) as usize;
        let end = ((t + len) * sr) as usize;
        voiced_segment(rng, &mut x[start..end.min(n)], sr);
        t += len + rng.gen_range(0.05..0.12);
    }
    add_background(rng, &mut x, sr);
    x
}

/// A few harmonics. The fundamental sweeps slowly over
/// the whole 100-220 Hz range, so segments carry little per-speaker identity.
fn voiced_segment(rng: &mut ChaCha8Rng, out: &mut [f64], sr: f64) {
    let phi = rng.gen_range(0.0..2.0 * PI);
    let level = rng.gen_range(0.5..1.0);
    let ramp = (0.025 * sr) as usize;
    let n = out.len();
    let mut phase = rng.gen_range(0.0..2.0 * PI);
    let norm: f64 = HARMONIC_GAINS.iter().sum();
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let f0 = F0_CENTRE + F0_SWING * (2.0 * PI * F0_SWEEP_HZ * t + phi).sin();
        phase += 2.0 * PI * f0 / sr;
        let v: f64 = HARMONIC_GAINS.iter().enumerate().map(|(h, g)| g * ((h + 1) as f64 * phase).sin()).sum();
        let edge = (i.min(n - 1 - i) as f64 / ramp as f64).min(1.0);
        let shape = (0.5 - 0.5 * (PI * edge).cos()) * level;
        *o += shape * v / norm;
    }
}

/// Pink-ish broadband noise plus a few steady tones below 100 Hz.
fn add_background(rng: &mut ChaCha8Rng, x: &mut [f64], sr: f64) {
    let mut state = [0.0f64; 3];
    let poles = [0.99, 0.9, 0.5];
    let tones: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(25.0..90.0), rng.gen_range(0.4..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let tone_norm: f64 = tones.iter().map(|t| t.1).sum();
    for (i, s) in x.iter_mut().enumerate() {
        let w: f64 = rng.gen_range(-1.0..1.0);
        let mut pink = 0.0;
        for (st, p) in state.iter_mut().zip(poles) {
            *st = p * *st + (1.0 - p) * w;
            pink += *st;
        }
        let t = i as f64 / sr;
        let rumble: f64 = tones.iter().map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).sin()).sum();
        *s += NOISE_LEVEL * (pink * 4.0 + 0.25 * w) + RUMBLE_LEVEL * rumble / tone_norm;
    }
}

struct BlockFft {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl BlockFft {
    fn new() -> Self {
        let mut planner = FftPlanner::new();
        BlockFft { forward: planner.plan_fft_forward(BLOCK), inverse: planner.plan_fft_inverse(BLOCK) }
    }

    /// Runs `edit` on the half spectrum of every non-overlapping block
    /// (the last one zero-padded) and writes back the real part.
    fn process(&self, x: &[f64], mut edit: impl FnMut(&mut [f64], &mut [f64])) -> Vec<f64> {
        let half = BLOCK / 2 + 1;
        let mut out = vec![0.0; x.len()];
        for (src, dst) in x.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
            let mut buf = vec![Complex::default(); BLOCK];
            for (b, &s) in buf.iter_mut().zip(src) {
                b.re = s;
            }
            self.forward.process(&mut buf);
            let mut mag: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
            let mut arg: Vec<f64> = buf[..half].iter().map(|c| c.arg()).collect();
            edit(&mut mag, &mut arg);
            for k in 0..half {
                buf[k] = Complex::from_polar(mag[k], arg[k]);
                if k > 0 && k < BLOCK - k {
                    buf[BLOCK - k] = buf[k].conj();
                }
            }
            buf[0].im = 0.0;
            buf[BLOCK / 2].im = 0.0;
            self.inverse.process(&mut buf);
            for (d, b) in dst.iter_mut().zip(&buf) {
                *d = b.re / BLOCK as f64;
            }
        }
        out
    }
}

fn moving_average(v: &[f64], half_width: usize) -> Vec<f64> {
    (0..v.len())
        .map(|k| {
            let lo = k.saturating_sub(half_width);
            let hi = (k + half_width + 1).min(v.len());
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Resamples the smoothed spectral envelope by `alpha` (zero-padded at the
/// top) and re-imposes it on the fine structure, with half-overlapping
/// square-root Hann frames so the edit leaves no block edges behind.
fn shift_envelope(x: &[f64], alpha: f64) -> Vec<f64> {
    let hop = BLOCK / 2;
    let half = BLOCK / 2 + 1;
    let window: Vec<f64> = (0..BLOCK).map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / BLOCK as f64).cos()).sqrt()).collect();
    let mut padded = vec![0.0; hop];
    padded.extend_from_slice(x);
    padded.resize(x.len() + hop + BLOCK, 0.0);
    let mut out = vec![0.0; padded.len()];
    let mut planner = FftPlanner::new();
    let (forward, inverse) = (planner.plan_fft_forward(BLOCK), planner.plan_fft_inverse(BLOCK));
    for start in (0..=padded.len() - BLOCK).step_by(hop) {
        let mut buf: Vec<Complex<f64>> =
            padded[start..start + BLOCK].iter().zip(&window).map(|(&s, &w)| Complex { re: s * w, im: 0.0 }).collect();
        forward.process(&mut buf);
        let mag: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
        let env = moving_average(&mag, ENVELOPE_HALF_WIDTH);
        for k in 0..half {
            let pos = k as f64 * alpha;
            let i = pos.floor() as usize;
            let shifted = if i + 1 < half {
                let frac = pos - i as f64;
                env[i] * (1.0 - frac) + env[i + 1] * frac
            } else {
                0.0
            };
            buf[k] *= shifted / (env[k] + 1e-12);
            if k > 0 && k < BLOCK - k {
                buf[BLOCK - k] = buf[k].conj();
            }
        }
        buf[0].im = 0.0;
        buf[BLOCK / 2].im = 0.0;
        inverse.process(&mut buf);
        for ((o, b), w) in out[start..start + BLOCK].iter_mut().zip(&buf).zip(&window) {
            *o += b.re / BLOCK as f64 * w;
        }
    }
    out[hop..hop + x.len()].to_vec()
}

fn apply_attack(attack: AttackType, rng: &mut ChaCha8Rng, sr: f64, n: usize) -> Vec<f64> {
    let source = human_voice(rng, sr, n);
    let fft = BlockFft::new();
    match attack {
        AttackType::Concat => {
            let other = human_voice(rng, sr, n);
            let mut out = Vec::with_capacity(n);
            let mut use_other = false;
            while out.len() < n {
                let seg = ((rng.gen_range(0.05..0.2) * sr) as usize).min(n - out.len());
                let src = if use_other { &other } else { &source };
                let off = out.len();
                out.extend_from_slice(&src[off..off + seg]);
                use_other = !use_other;
            }
            out
        }
        AttackType::PhaseDistort => fft.process(&source, |_, arg| {
            let last = arg.len() - 1;
            for a in &mut arg[1..last] {
                *a = rng.gen_range(-PI..PI);
            }
        }),
        AttackType::SpectralSmooth => fft.process(&source, |mag, _| {
            let smooth = moving_average(mag, SMOOTH_HALF_WIDTH);
            mag.copy_from_slice(&smooth);
        }),
        AttackType::FormantShift => shift_envelope(&source, rng.gen_range(1.12..1.25)),
        AttackType::NoiseResynth => fft.process(&source, |mag, arg| {
            let energy: f64 = mag.iter().map(|m| m * m).sum();
            let mut shaped = moving_average(mag, RESYNTH_HALF_WIDTH);
            for (m, a) in shaped.iter_mut().zip(arg.iter_mut()) {
                *m *= rng.gen_range(0.5..1.5);
                *a = rng.gen_range(-PI..PI);
            }
            let now: f64 = shaped.iter().map(|m| m * m).sum();
            let g = (energy / now.max(1e-30)).sqrt();
            for (m, s) in mag.iter_mut().zip(&shaped) {
                *m = s * g;
            }
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthSpec {
        SynthSpec { n_human: 1, n_per_attack: 1, clip_seconds: 0.5, ..SynthSpec::default() }
    }

    #[test]
    fn every_kind_is_bounded_and_finite() {
        let spec = small();
        for kind in std::iter::once(ClipKind::Human).chain(AttackType::ALL.map(ClipKind::Attack)) {
            let clip = synth_clip(&spec, kind, 0).unwrap();
            assert_eq!(clip.samples().len(), 8000);
            assert!(clip.samples().iter().all(|s| s.is_finite() && s.abs() <= 1.0), "{kind:?}");
            assert!(peak(clip.samples()) > 0.3, "{kind:?}");
        }
    }

    #[test]
    fn clips_are_reproducible_and_distinct() {
        let spec = small();
        let a = synth_clip(&spec, ClipKind::Human, 3).unwrap();
        assert_eq!(a, synth_clip(&spec, ClipKind::Human, 3).unwrap());
        assert_ne!(a.samples(), synth_clip(&spec, ClipKind::Human, 4).unwrap().samples());
    }

    #[test]
    fn artifact_leaves_humans_untouched() {
        let spec = small();
        let lf = SynthSpec { inject_lf_discontinuity: true, ..small() };
        assert_eq!(synth_clip(&spec, ClipKind::Human, 0).unwrap(), synth_clip(&lf, ClipKind::Human, 0).unwrap());
        let clean = synth_clip(&spec, ClipKind::Attack(AttackType::Concat), 0).unwrap();
        let dirty = synth_clip(&lf, ClipKind::Attack(AttackType::Concat), 0).unwrap();
        assert_ne!(clean.samples(), dirty.samples());
        // the odd stretches are not touched at all
        let second = lf_stretches(8000, 16000)[0].end..lf_stretches(8000, 16000)[1].start;
        assert_eq!(clean.samples()[second.clone()], dirty.samples()[second]);
    }

    #[test]
    fn schedule_alternates() {
        assert_eq!(lf_stretches(16000, 16000), vec![0..3200, 6400..9600, 12800..16000]);
        assert_eq!(lf_stretches(7000, 16000), vec![0..3200, 6400..7000]);
    }

    #[test]
    fn short_clips_are_rejected() {
        let spec = SynthSpec { clip_seconds: 0.3, ..small() };
        assert!(spec.validate().is_err());
        let dup = SynthSpec { attack_types: vec![AttackType::Concat, AttackType::Concat], ..small() };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn labels_follow_canonical_order() {
        assert_eq!(AttackType::Concat.label(true), Label::Known(1));
        assert_eq!(AttackType::NoiseResynth.label(false), Label::Unknown(5));
        assert_eq!("spectral_smooth".parse::<AttackType>().unwrap(), AttackType::SpectralSmooth);
        assert!("wobble".parse::<AttackType>().is_err());
    }
}
