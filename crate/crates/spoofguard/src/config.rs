//! `key = value` pipeline configuration.
//!
//! Every front-end and model constant is a key here, so ablations need no
//! code changes. Unknown keys are rejected.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};
use spoofguard_core::dsp::VadConfig;
use spoofguard_core::gmm::{CovarianceType, DEFAULT_COMPONENTS};
use spoofguard_core::mlp::TrainConfig;
use spoofguard_core::svm::{DEFAULT_FOLDS, GRID_VALUES};
use spoofguard_core::{CONTEXT_FRAMES, DCT_COEFFS, DEFAULT_SAMPLE_RATE, FRAME_MS, HIDDEN_LAYERS, NUM_CLASSES};

use crate::error::{Error, IoContext, Result};
use crate::synth::{AttackType, SynthSpec};

pub const SEED_ENV: &str = "SPOOFGUARD_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Classifier {
    Svm,
    Gmm,
    Mlp,
}

impl Classifier {
    pub const ALL: [Classifier; 3] = [Classifier::Svm, Classifier::Gmm, Classifier::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Svm => "svm",
            Classifier::Gmm => "gmm",
            Classifier::Mlp => "mlp",
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Classifier::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown classifier {s:?} (expected svm, gmm or mlp)")))
    }
}

/// Where the low-frequency artifact is injected in a synthetic experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfArtifact {
    None,
    /// Spoofed training and development clips only; evaluation stays clean.
    Train,
    All,
}

impl FromStr for LfArtifact {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(LfArtifact::None),
            "train" => Ok(LfArtifact::Train),
            "all" => Ok(LfArtifact::All),
            _ => Err(Error::Usage(format!("lf_artifact must be none, train or all, got {s:?}"))),
        }
    }
}

impl fmt::Display for LfArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LfArtifact::None => "none",
            LfArtifact::Train => "train",
            LfArtifact::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sample_rate: u32,
    pub frame_ms: u32,
    pub dct_coeffs: usize,
    pub context: usize,
    pub hidden: Vec<usize>,
    pub vad: VadConfig,
    pub classifiers: Vec<Classifier>,

    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    /// Speech frames per training file fed to the network; 0 keeps all.
    pub max_frames_per_file: usize,

    pub gmm_components: usize,
    pub gmm_max_iter: usize,
    pub gmm_covariance: CovarianceType,

    pub svm_grid: bool,
    pub svm_c: f64,
    pub svm_gamma: f64,
    pub svm_folds: usize,
    pub svm_grid_values: Vec<f64>,

    /// Attack labels counted as known; empty means every `S<n>` label.
    pub known: BTreeSet<String>,

    /// Explicit manifests. When all three are absent a synthetic corpus is
    /// generated instead.
    pub train_manifest: Option<PathBuf>,
    pub dev_manifest: Option<PathBuf>,
    pub eval_manifest: Option<PathBuf>,

    pub n_human: usize,
    pub n_per_attack: usize,
    pub attacks: Vec<AttackType>,
    pub unknown_attacks: BTreeSet<AttackType>,
    pub clip_seconds: f64,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub lf_artifact: LfArtifact,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        PipelineConfig {
            seed: 7,
            sample_rate: DEFAULT_SAMPLE_RATE,
            frame_ms: FRAME_MS,
            dct_coeffs: DCT_COEFFS,
            context: CONTEXT_FRAMES,
            hidden: HIDDEN_LAYERS.to_vec(),
            vad: VadConfig::default(),
            classifiers: Classifier::ALL.to_vec(),
            learning_rate: train.learning_rate,
            batch_size: train.batch_size,
            epochs: train.epochs,
            patience: train.patience,
            max_frames_per_file: 0,
            gmm_components: DEFAULT_COMPONENTS,
            gmm_max_iter: 200,
            gmm_covariance: CovarianceType::Diagonal,
            svm_grid: true,
            svm_c: 1.0,
            svm_gamma: 1.0,
            svm_folds: DEFAULT_FOLDS,
            svm_grid_values: GRID_VALUES.to_vec(),
            known: BTreeSet::new(),
            train_manifest: None,
            dev_manifest: None,
            eval_manifest: None,
            n_human: 200,
            n_per_attack: 100,
            attacks: AttackType::ALL.to_vec(),
            unknown_attacks: [AttackType::FormantShift, AttackType::NoiseResynth].into(),
            clip_seconds: 1.0,
            train_fraction: 0.4,
            dev_fraction: 0.2,
            lf_artifact: LfArtifact::None,
        }
    }
}

fn list<T: FromStr>(v: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: fmt::Display,
{
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| s.parse::<T>().map_err(|e| e.to_string())).collect()
}

fn join<T: fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn scalar<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("{v:?}: {e}"))
}

impl PipelineConfig {
    /// The experiment defaults: the published architecture with training
    /// settings sized for the synthetic corpus on one CPU core.
    pub fn experiment() -> Self {
        PipelineConfig {
            learning_rate: 0.2,
            batch_size: 32,
            epochs: 20,
            patience: 4,
            clip_seconds: 2.0,
            ..PipelineConfig::default()
        }
    }

    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * self.dct_coeffs
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(&self.hidden);
        d.push(NUM_CLASSES);
        d
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
            shuffle: true,
            patience: self.patience,
        }
    }

    pub fn synthetic(&self) -> bool {
        self.train_manifest.is_none() && self.dev_manifest.is_none() && self.eval_manifest.is_none()
    }

    pub fn synth_spec(&self, inject_lf_discontinuity: bool) -> SynthSpec {
        SynthSpec {
            n_human: self.n_human,
            n_per_attack: self.n_per_attack,
            attack_types: self.attacks.clone(),
            unknown: self.unknown_attacks.clone(),
            inject_lf_discontinuity,
            seed: self.seed,
            clip_seconds: self.clip_seconds,
            sample_rate: self.sample_rate,
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let v = value.trim();
        match key {
            "seed" => self.seed = scalar(v)?,
            "sample_rate" => self.sample_rate = scalar(v)?,
            "frame_ms" => self.frame_ms = scalar(v)?,
            "dct_coeffs" => self.dct_coeffs = scalar(v)?,
            "context" => self.context = scalar(v)?,
            "hidden" => self.hidden = list(v)?,
            "vad_margin_db" => self.vad.margin_db = scalar(v)?,
            "vad_noise_percentile" => self.vad.noise_percentile = scalar(v)?,
            "vad_hangover" => self.vad.hangover = scalar(v)?,
            "classifiers" => self.classifiers = list(v)?,
            "learning_rate" => self.learning_rate = scalar(v)?,
            "batch_size" => self.batch_size = scalar(v)?,
            "epochs" => self.epochs = scalar(v)?,
            "patience" => self.patience = scalar(v)?,
            "max_frames_per_file" => self.max_frames_per_file = scalar(v)?,
            "gmm_components" => self.gmm_components = scalar(v)?,
            "gmm_max_iter" => self.gmm_max_iter = scalar(v)?,
            "gmm_covariance" => {
                self.gmm_covariance = match v {
                    "diagonal" => CovarianceType::Diagonal,
                    "full" => CovarianceType::Full,
                    _ => return Err(format!("gmm_covariance must be diagonal or full, got {v:?}")),
                }
            }
            "svm_grid" => self.svm_grid = scalar(v)?,
            "svm_c" => self.svm_c = scalar(v)?,
            "svm_gamma" => self.svm_gamma = scalar(v)?,
            "svm_folds" => self.svm_folds = scalar(v)?,
            "svm_grid_values" => self.svm_grid_values = list(v)?,
            "known" => self.known = list::<String>(v)?.into_iter().collect(),
            "train_manifest" => self.train_manifest = (!v.is_empty()).then(|| v.into()),
            "dev_manifest" => self.dev_manifest = (!v.is_empty()).then(|| v.into()),
            "eval_manifest" => self.eval_manifest = (!v.is_empty()).then(|| v.into()),
            "n_human" => self.n_human = scalar(v)?,
            "n_per_attack" => self.n_per_attack = scalar(v)?,
            "attacks" => self.attacks = list(v)?,
            "unknown_attacks" => self.unknown_attacks = list(v)?.into_iter().collect(),
            "clip_seconds" => self.clip_seconds = scalar(v)?,
            "train_fraction" => self.train_fraction = scalar(v)?,
            "dev_fraction" => self.dev_fraction = scalar(v)?,
            "lf_artifact" => self.lf_artifact = v.parse().map_err(|e: Error| e.to_string())?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses `key = value` lines over `base`; `#` starts a comment line.
    pub fn parse(text: &str, base: Self, origin: &Path) -> Result<Self> {
        let mut cfg = base;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Parse { path: origin.to_path_buf(), line: i + 1, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value).map_err(err)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a file over the experiment defaults. Relative manifest paths
    /// are taken relative to the config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).at(path)?;
        let mut cfg = Self::parse(&text, Self::experiment(), path)?;
        let dir = crate::manifest::manifest_dir(path);
        for m in [&mut cfg.train_manifest, &mut cfg.dev_manifest, &mut cfg.eval_manifest].into_iter().flatten() {
            if m.is_relative() {
                *m = dir.join(&*m);
            }
        }
        Ok(cfg)
    }

    /// Applies `SPOOFGUARD_SEED` when set.
    pub fn with_env_seed(mut self) -> Result<Self> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v.trim().parse().map_err(|_| Error::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Core(spoofguard_core::Error::Config(m)));
        if self.sample_rate == 0 || self.frame_ms == 0 || self.dct_coeffs == 0 {
            return bad("sample_rate, frame_ms and dct_coeffs must be positive".into());
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden must be a non-empty list of positive widths".into());
        }
        if self.classifiers.is_empty() {
            return bad("classifiers must not be empty".into());
        }
        if self.batch_size == 0 || self.epochs == 0 || !(self.learning_rate >= 0.0) {
            return bad("batch_size and epochs must be positive, learning_rate non-negative".into());
        }
        if self.gmm_components == 0 || !(self.svm_c > 0.0 && self.svm_gamma > 0.0) || self.svm_folds < 2 {
            return bad("gmm_components, svm_c, svm_gamma must be positive and svm_folds at least 2".into());
        }
        let (t, d) = (self.train_fraction, self.dev_fraction);
        if !(t > 0.0 && d > 0.0 && t + d < 1.0) {
            return bad(format!("train_fraction {t} and dev_fraction {d} must be positive and sum below 1"));
        }
        let given = [&self.train_manifest, &self.dev_manifest, &self.eval_manifest].iter().filter(|m| m.is_some()).count();
        if given != 0 && given != 3 {
            return bad("give all of train_manifest, dev_manifest and eval_manifest, or none".into());
        }
        Ok(())
    }

    /// Canonical text; parsing it back yields the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let covariance = match self.gmm_covariance {
            CovarianceType::Diagonal => "diagonal",
            CovarianceType::Full => "full",
        };
        let pairs = [
            ("seed", self.seed.to_string()),
            ("sample_rate", self.sample_rate.to_string()),
            ("frame_ms", self.frame_ms.to_string()),
            ("dct_coeffs", self.dct_coeffs.to_string()),
            ("context", self.context.to_string()),
            ("hidden", join(&self.hidden)),
            ("vad_margin_db", self.vad.margin_db.to_string()),
            ("vad_noise_percentile", self.vad.noise_percentile.to_string()),
            ("vad_hangover", self.vad.hangover.to_string()),
            ("classifiers", join(&self.classifiers)),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("epochs", self.epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("max_frames_per_file", self.max_frames_per_file.to_string()),
            ("gmm_components", self.gmm_components.to_string()),
            ("gmm_max_iter", self.gmm_max_iter.to_string()),
            ("gmm_covariance", covariance.into()),
            ("svm_grid", self.svm_grid.to_string()),
            ("svm_c", self.svm_c.to_string()),
            ("svm_gamma", self.svm_gamma.to_string()),
            ("svm_folds", self.svm_folds.to_string()),
            ("svm_grid_values", join(&self.svm_grid_values)),
            ("known", join(&self.known)),
            ("train_manifest", path(&self.train_manifest)),
            ("dev_manifest", path(&self.dev_manifest)),
            ("eval_manifest", path(&self.eval_manifest)),
            ("n_human", self.n_human.to_string()),
            ("n_per_attack", self.n_per_attack.to_string()),
            ("attacks", join(&self.attacks)),
            ("unknown_attacks", join(&self.unknown_attacks)),
            ("clip_seconds", self.clip_seconds.to_string()),
            ("train_fraction", self.train_fraction.to_string()),
            ("dev_fraction", self.dev_fraction.to_string()),
            ("lf_artifact", self.lf_artifact.to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Short hex digest naming cached artifacts.
pub fn digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(&h.finalize()[..8])
}
