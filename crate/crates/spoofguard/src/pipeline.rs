//! Pipeline stages shared by the subcommands and the experiment runner.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use log::{info, warn};
use spoofguard_core::eval::{trimmed_mean_score, ScoreEntry};
use spoofguard_core::features::{pool_rows, NormStats};
use spoofguard_core::gmm::{fit_gmm, GmmConfig, GmmPair};
use spoofguard_core::mlp::{train, Dataset, Mlp, TrainOutcome};
use spoofguard_core::svm::{grid_search, train_svm, GridSearchConfig, SvmConfig, SvmModel, SvmParams};
use spoofguard_core::{Label, Matrix, TargetClass};

use crate::config::{Classifier, PipelineConfig};
use crate::error::{Error, Result};
use crate::frontend::{Analysis, FrontEnd};
use crate::manifest::{manifest_dir, parse_manifest, Manifest, ManifestEntry};
use crate::wav::read_wav;

/// Rows fed through the network at once during inference.
const CHUNK: usize = 512;

/// A manifest together with the directory its paths are relative to.
#[derive(Debug, Clone)]
pub struct DataList {
    pub manifest: Manifest,
    pub base: PathBuf,
}

impl DataList {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(DataList { manifest: parse_manifest(path)?, base: manifest_dir(path) })
    }

    pub fn clip_path(&self, entry: &ManifestEntry) -> PathBuf {
        Manifest::resolve(&self.base, entry)
    }
}

#[derive(Debug, Clone)]
pub struct AnalyzedFile {
    pub entry: ManifestEntry,
    pub analysis: Analysis,
}

#[derive(Debug, Clone, Default)]
pub struct Analyzed {
    pub files: Vec<AnalyzedFile>,
    /// Source ids of clips without a single speech frame.
    pub skipped: Vec<String>,
}

/// Runs the front-end over every clip. Clips that cannot be read fail the
/// whole call, naming each offending path; clips without speech are skipped.
pub fn analyze_all(fe: &FrontEnd, list: &DataList) -> Result<Analyzed> {
    let mut out = Analyzed::default();
    let mut failures = Vec::new();
    for entry in list.manifest.entries() {
        let path = list.clip_path(entry);
        match read_wav(&path).and_then(|clip| fe.analyze(&clip)) {
            Ok(mut analysis) if analysis.speech_count() > 0 => {
                analysis.source_id = entry.source_id();
                out.files.push(AnalyzedFile { entry: entry.clone(), analysis });
            }
            Ok(_) => {
                warn!("{}: no speech frames, skipped", path.display());
                out.skipped.push(entry.source_id());
            }
            Err(e) => failures.push(e.to_string()),
        }
    }
    if !failures.is_empty() {
        return Err(Error::validation(format!("{} unreadable clip(s):\n  {}", failures.len(), failures.join("\n  "))));
    }
    Ok(out)
}

/// Evenly spaced subset of `n` indices with at most `max` elements
/// (`max == 0` keeps everything).
pub fn spread_indices(n: usize, max: usize) -> Vec<usize> {
    if max == 0 || n <= max {
        (0..n).collect()
    } else {
        (0..max).map(|j| j * n / max).collect()
    }
}

/// Gathers up to `max_frames` rows per file with the file's target class.
pub fn build_dataset<I>(files: I, max_frames: usize) -> Result<(Matrix, Vec<TargetClass>)>
where
    I: IntoIterator<Item = Result<(Label, Matrix)>>,
{
    let mut data = Vec::new();
    let mut targets = Vec::new();
    let mut cols = None;
    for item in files {
        let (label, stacked) = item?;
        let target = TargetClass::try_from(label)?;
        if *cols.get_or_insert(stacked.cols()) != stacked.cols() {
            return Err(Error::validation("feature files disagree on dimension"));
        }
        for r in spread_indices(stacked.rows(), max_frames) {
            data.extend_from_slice(stacked.row(r));
            targets.push(target);
        }
    }
    let cols = cols.ok_or_else(|| Error::validation("no training files"))?;
    Ok((Matrix::from_vec(targets.len(), cols, data)?, targets))
}

/// Fits input statistics on `train`, trains from a fresh network and
/// returns the selected snapshot with the statistics attached.
pub fn train_network(
    cfg: &PipelineConfig,
    train_set: (Matrix, Vec<TargetClass>),
    dev_set: Option<(Matrix, Vec<TargetClass>)>,
) -> Result<TrainOutcome> {
    let (mut x, t) = train_set;
    let stats = NormStats::fit(&x)?;
    stats.apply_rows(&mut x)?;
    let data = Dataset::new(x, t)?;
    let dev = dev_set
        .map(|(mut x, t)| {
            stats.apply_rows(&mut x)?;
            Dataset::new(x, t)
        })
        .transpose()?;
    let model = Mlp::new(&cfg.dims(), cfg.seed)?;
    info!("training {:?} on {} frames ({} dev)", cfg.dims(), data.len(), dev.as_ref().map_or(0, Dataset::len));
    let mut outcome = train(model, &data, dev.as_ref(), &cfg.train_config())?;
    for r in &outcome.history {
        info!("epoch {:>3}: train {:.5}  monitor {:.5}", r.epoch, r.train_loss, r.monitor_loss);
    }
    info!("selected epoch {}", outcome.best_epoch);
    outcome.model.set_norm_stats(Some(stats))?;
    Ok(outcome)
}

/// Network outputs for one file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileOutput {
    /// Mean bottleneck activation over the file's frames.
    pub pooled: Vec<f64>,
    /// Per-frame probability of the human class.
    pub frame_scores: Vec<f64>,
}

/// Runs raw stacked rows through `model` (normalizing with its statistics).
pub fn network_outputs(model: &Mlp, stacked: &Matrix) -> Result<FileOutput> {
    if stacked.rows() == 0 {
        return Err(spoofguard_core::Error::Empty("file has no frames").into());
    }
    let idx: Vec<usize> = (0..stacked.rows()).collect();
    let mut bottleneck = Vec::with_capacity(stacked.rows() * model.bottleneck_dim());
    let mut frame_scores = Vec::with_capacity(stacked.rows());
    for chunk in idx.chunks(CHUNK) {
        let mut x = stacked.select_rows(chunk);
        if let Some(stats) = model.norm_stats() {
            stats.apply_rows(&mut x)?;
        }
        let (probs, bn) = model.forward_batch(&x)?;
        frame_scores.extend(probs.iter_rows().map(|p| p[0]));
        bottleneck.extend_from_slice(bn.as_slice());
    }
    let bn = Matrix::from_vec(stacked.rows(), model.bottleneck_dim(), bottleneck)?;
    Ok(FileOutput { pooled: pool_rows(bn.iter_rows())?, frame_scores })
}

fn split_by_class(pooled: &Matrix, labels: &[Label]) -> Result<(Matrix, Matrix)> {
    if pooled.rows() != labels.len() {
        return Err(Error::validation(format!("{} vectors but {} labels", pooled.rows(), labels.len())));
    }
    let human: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_spoof()).collect();
    let spoof: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_spoof()).collect();
    if human.is_empty() || spoof.is_empty() {
        return Err(Error::validation("back-end training needs both human and spoof vectors"));
    }
    Ok((pooled.select_rows(&human), pooled.select_rows(&spoof)))
}

pub fn train_gmm_pair(cfg: &PipelineConfig, pooled: &Matrix, labels: &[Label]) -> Result<GmmPair> {
    let (human, spoof) = split_by_class(pooled, labels)?;
    let gmm_cfg = |seed| GmmConfig {
        components: cfg.gmm_components,
        max_iter: cfg.gmm_max_iter,
        covariance: cfg.gmm_covariance,
        seed,
        ..GmmConfig::default()
    };
    let fit = |data: &Matrix, seed: u64, name: &str| -> Result<_> {
        let f = fit_gmm(data, &gmm_cfg(seed))?;
        for w in &f.warnings {
            warn!("{name} GMM: {w}");
        }
        info!("{name} GMM: {} EM iterations, converged={}", f.log_likelihoods.len(), f.converged);
        Ok(f.model)
    };
    let h = fit(&human, cfg.seed, "human")?;
    let s = fit(&spoof, cfg.seed.wrapping_add(1), "spoof")?;
    Ok(GmmPair::new(h, s)?)
}

/// Human is the positive class.
pub fn svm_labels(labels: &[Label]) -> Vec<f64> {
    labels.iter().map(|l| if l.is_spoof() { -1.0 } else { 1.0 }).collect()
}

pub fn train_svm_backend(cfg: &PipelineConfig, pooled: &Matrix, labels: &[Label], grid: bool) -> Result<SvmModel> {
    split_by_class(pooled, labels)?;
    let y = svm_labels(labels);
    let svm = SvmConfig { seed: cfg.seed, ..SvmConfig::default() };
    if grid {
        let gs = GridSearchConfig {
            c_values: cfg.svm_grid_values.clone(),
            gamma_values: cfg.svm_grid_values.clone(),
            folds: cfg.svm_folds,
            seed: cfg.seed,
            svm,
        };
        let result = grid_search(pooled, &y, &gs)?;
        let failed = result.cells.iter().filter(|c| c.mean_eer.is_none()).count();
        if failed > 0 {
            warn!("{failed} grid cell(s) failed to train and were skipped");
        }
        let best_eer = result.cells.iter().filter_map(|c| c.mean_eer).fold(f64::INFINITY, f64::min);
        info!("grid search: C={} gamma={} (mean fold EER {:.3}%)", result.best.c, result.best.gamma, 100.0 * best_eer);
        Ok(result.model)
    } else {
        Ok(train_svm(pooled, &y, SvmParams::new(cfg.svm_c, cfg.svm_gamma)?, &svm)?)
    }
}

/// A trained back-end ready to score files.
#[derive(Debug, Clone)]
pub enum Backend {
    Mlp,
    Gmm(GmmPair),
    Svm(SvmModel),
}

impl Backend {
    pub fn classifier(&self) -> Classifier {
        match self {
            Backend::Mlp => Classifier::Mlp,
            Backend::Gmm(_) => Classifier::Gmm,
            Backend::Svm(_) => Classifier::Svm,
        }
    }

    /// Checks that pooled vectors of width `dim` can be scored.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let expected = match self {
            Backend::Mlp => return Ok(()),
            Backend::Gmm(pair) => pair.dim(),
            Backend::Svm(m) => m.dim(),
        };
        if expected != dim {
            return Err(Error::validation(format!("{} model expects {expected}-dim vectors, features are {dim}-dim", self.classifier())));
        }
        Ok(())
    }

    /// Trimmed mean of frame scores (MLP), LLR (GMM) or squashed margin (SVM).
    pub fn score(&self, out: &FileOutput) -> Result<f64> {
        Ok(match self {
            Backend::Mlp => trimmed_mean_score(&out.frame_scores)?,
            Backend::Gmm(pair) => pair.llr_score(&out.pooled)?,
            Backend::Svm(m) => m.score(&out.pooled)?,
        })
    }
}

pub fn score_entry(entry: &ManifestEntry, score: f64) -> ScoreEntry {
    if entry.label.is_spoof() {
        ScoreEntry::spoof(entry.source_id(), score, entry.label.to_string())
    } else {
        ScoreEntry::human(entry.source_id(), score)
    }
}

/// The configured known-attack labels, or every `S<n>` label seen.
pub fn known_attacks<'a>(cfg: &PipelineConfig, labels: impl IntoIterator<Item = &'a Label>) -> BTreeSet<String> {
    if !cfg.known.is_empty() {
        return cfg.known.clone();
    }
    labels.into_iter().filter(|l| matches!(l, Label::Known(_))).map(ToString::to_string).collect()
}
