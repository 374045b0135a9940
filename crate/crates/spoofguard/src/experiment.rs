//! End-to-end experiment: data, front-end, network, back-ends, scores and
//! a per-classifier EER table (development, known, unknown, all).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use spoofguard_core::eval::{breakdown, compute_eer_set, EerReport, ScoreSet};
use spoofguard_core::mlp::Mlp;
use spoofguard_core::{Label, Matrix};

use crate::config::{digest, Classifier, LfArtifact, PipelineConfig};
use crate::error::{Error, IoContext, Result};
use crate::formats;
use crate::frontend::FrontEnd;
use crate::manifest::{write_manifest, Manifest, ManifestEntry};
use crate::pipeline::{
    analyze_all, build_dataset, known_attacks, network_outputs, score_entry, train_gmm_pair, train_network,
    train_svm_backend, AnalyzedFile, Backend, DataList, FileOutput,
};
use crate::scores::{format_report, write_scores};
use crate::synth::generate_corpus;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierResult {
    pub classifier: Classifier,
    /// Development-set EER in percent.
    pub dev_eer: f64,
    pub eval: EerReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub results: Vec<ClassifierResult>,
    pub known: Vec<String>,
    /// Clips dropped for lack of speech, by split.
    pub skipped: BTreeMap<&'static str, Vec<String>>,
}

impl ExperimentReport {
    pub fn get(&self, c: Classifier) -> Option<&ClassifierResult> {
        self.results.iter().find(|r| r.classifier == c)
    }

    /// Fixed-width EER table in percent followed by `key=value` lines.
    pub fn to_text(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| format!("{:>9}", "NA"), |x| format!("{x:>9.3}"));
        let mut s = String::from("# EER (%)\nsystem       dev    known  unknown      all\n");
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<4}{}{}{}{}",
                r.classifier.name(),
                cell(Some(r.dev_eer)),
                cell(r.eval.known_eer),
                cell(r.eval.unknown_eer),
                cell(Some(r.eval.overall_eer))
            );
        }
        let _ = writeln!(s, "\nknown_attacks={}", self.known.join(","));
        let na = |v: Option<f64>| v.map_or("NA".into(), |x| format!("{x:.6}"));
        for r in &self.results {
            let c = r.classifier.name();
            let _ = writeln!(s, "{c}.dev_eer={:.6}", r.dev_eer);
            let _ = writeln!(s, "{c}.known_eer={}", na(r.eval.known_eer));
            let _ = writeln!(s, "{c}.unknown_eer={}", na(r.eval.unknown_eer));
            let _ = writeln!(s, "{c}.overall_eer={:.6}", r.eval.overall_eer);
            for (a, e) in &r.eval.per_attack_eer {
                let _ = writeln!(s, "{c}.eer[{a}]={e:.6}");
            }
        }
        for (split, ids) in &self.skipped {
            let _ = writeln!(s, "skipped.{split}={}", ids.join(","));
        }
        s
    }
}

fn stage<T>(name: &'static str, out: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, artifacts: out.to_path_buf(), source: Box::new(e) })
}

/// Writes through a temporary name so a cache entry is never half-written.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes).at(&tmp)?;
    std::fs::rename(&tmp, path).at(path)
}

struct Splits {
    train: DataList,
    dev: DataList,
    eval: DataList,
    key: String,
}

/// Per class, in corpus order: the first `train_fraction` to training, the
/// next `dev_fraction` to development, the rest to evaluation. Unknown
/// attack families go entirely to evaluation.
pub fn split_manifest(m: &Manifest, train_fraction: f64, dev_fraction: f64) -> [Vec<ManifestEntry>; 3] {
    let mut groups: BTreeMap<Label, Vec<&ManifestEntry>> = BTreeMap::new();
    for e in m.entries() {
        groups.entry(e.label).or_default().push(e);
    }
    let mut out: [Vec<ManifestEntry>; 3] = Default::default();
    for (label, entries) in groups {
        if matches!(label, Label::Unknown(_)) {
            out[2].extend(entries.into_iter().cloned());
            continue;
        }
        let n = entries.len();
        let n_train = (train_fraction * n as f64).floor() as usize;
        let n_dev = (dev_fraction * n as f64).floor() as usize;
        for (i, e) in entries.into_iter().enumerate() {
            let slot = if i < n_train {
                0
            } else if i < n_train + n_dev {
                1
            } else {
                2
            };
            out[slot].push(e.clone());
        }
    }
    out
}

fn prefixed(entries: &[ManifestEntry], dir: &Path) -> Result<Manifest> {
    Manifest::new(entries.iter().map(|e| ManifestEntry::new(dir.join(&e.path), e.label)).collect())
}

fn corpus(cfg: &PipelineConfig, out: &Path, lf: bool, force: bool) -> Result<(PathBuf, Manifest)> {
    let spec = cfg.synth_spec(lf);
    let rel = PathBuf::from("cache").join(format!("corpus-{}", digest(&["corpus", &format!("{spec:?}")])));
    let dir = out.join(&rel);
    let manifest_path = dir.join("manifest.txt");
    if !force && manifest_path.exists() {
        info!("reusing corpus {}", dir.display());
        return Ok((rel, crate::manifest::parse_manifest(&manifest_path)?));
    }
    let tmp = out.join("cache").join("corpus.partial");
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).at(&tmp)?;
    }
    info!("generating corpus ({} human, {} per attack, lf={lf})", spec.n_human, spec.n_per_attack);
    let manifest = generate_corpus(&spec, &tmp)?;
    if dir.exists() {
        std::fs::remove_dir_all(&dir).at(&dir)?;
    }
    std::fs::rename(&tmp, &dir).at(&dir)?;
    Ok((rel, manifest))
}

fn prepare_data(cfg: &PipelineConfig, out: &Path, force: bool) -> Result<Splits> {
    if !cfg.synthetic() {
        let load = |p: &Option<PathBuf>| DataList::load(p.as_deref().expect("validated"));
        let (train, dev, eval) = (load(&cfg.train_manifest)?, load(&cfg.dev_manifest)?, load(&cfg.eval_manifest)?);
        let key = digest(&[&train.manifest.to_text(), &dev.manifest.to_text(), &eval.manifest.to_text()]);
        return Ok(Splits { train, dev, eval, key });
    }
    let (clean_dir, clean) = corpus(cfg, out, cfg.lf_artifact == LfArtifact::All, force)?;
    let [tr, dv, ev] = split_manifest(&clean, cfg.train_fraction, cfg.dev_fraction);
    let (train_dir, dev_dir) = if cfg.lf_artifact == LfArtifact::Train {
        let (lf_dir, _) = corpus(cfg, out, true, force)?;
        (lf_dir.clone(), lf_dir)
    } else {
        (clean_dir.clone(), clean_dir.clone())
    };
    let lists = [("train", tr, train_dir), ("dev", dv, dev_dir), ("eval", ev, clean_dir)];
    let mut built = Vec::new();
    let mut key_parts = Vec::new();
    for (name, entries, dir) in lists {
        let manifest = prefixed(&entries, &dir)?;
        write_manifest(&out.join(format!("{name}.txt")), &manifest)?;
        key_parts.push(manifest.to_text());
        built.push(DataList { manifest, base: out.to_path_buf() });
    }
    let key = digest(&key_parts.iter().map(String::as_str).collect::<Vec<_>>());
    let eval = built.pop().unwrap();
    let dev = built.pop().unwrap();
    let train = built.pop().unwrap();
    Ok(Splits { train, dev, eval, key })
}

fn labelled_rows<'a>(fe: &'a FrontEnd, files: &'a [AnalyzedFile]) -> impl Iterator<Item = Result<(Label, Matrix)>> + 'a {
    files.iter().map(move |f| Ok((f.entry.label, fe.stacked(&f.analysis)?)))
}

fn outputs(fe: &FrontEnd, model: &Mlp, files: &[AnalyzedFile]) -> Result<Vec<FileOutput>> {
    files.iter().map(|f| network_outputs(model, &fe.stacked(&f.analysis)?)).collect()
}

fn pooled_matrix(outs: &[FileOutput]) -> Result<Matrix> {
    Ok(Matrix::from_rows(&outs.iter().map(|o| o.pooled.as_slice()).collect::<Vec<_>>())?)
}

fn score_set(backend: &Backend, files: &[AnalyzedFile], outs: &[FileOutput]) -> Result<ScoreSet> {
    let entries = files
        .iter()
        .zip(outs)
        .map(|(f, o)| Ok(score_entry(&f.entry, backend.score(o)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreSet::new(entries)?)
}

/// Loads the cached artifact at `path`, or builds and stores it.
fn cached<T>(
    path: &Path,
    force: bool,
    read: impl FnOnce(&Path) -> Result<T>,
    build: impl FnOnce() -> Result<T>,
    encode: impl FnOnce(&T) -> Vec<u8>,
) -> Result<T> {
    if !force && path.exists() {
        info!("reusing {}", path.display());
        return read(path);
    }
    let value = build()?;
    write_atomic(path, &encode(&value))?;
    Ok(value)
}

/// Runs the full experiment into `out`. Generated corpora and trained models
/// are cached under `out/cache`, keyed by a digest of everything they depend
/// on; `force` rebuilds them.
pub fn run_experiment(cfg: &PipelineConfig, out: &Path, force: bool) -> Result<ExperimentReport> {
    cfg.validate()?;
    let started = Instant::now();
    for dir in [out.to_path_buf(), out.join("cache"), out.join("scores"), out.join("reports")] {
        std::fs::create_dir_all(&dir).at(&dir)?;
    }
    std::fs::write(out.join("config.txt"), cfg.to_text()).at(&out.join("config.txt"))?;

    let data = stage("data", out, prepare_data(cfg, out, force))?;
    let fe = stage("extract-features", out, FrontEnd::new(cfg))?;
    let analyze = |list: &DataList| stage("extract-features", out, analyze_all(&fe, list));
    let (train, dev, eval) = (analyze(&data.train)?, analyze(&data.dev)?, analyze(&data.eval)?);
    info!(
        "front-end: {}/{}/{} files, {:.1}s",
        train.files.len(),
        dev.files.len(),
        eval.files.len(),
        started.elapsed().as_secs_f64()
    );

    let dnn_key = digest(&[
        "dnn",
        &data.key,
        &format!(
            "{} {} {} {} {:?} {:?} {} {} {} {} {} {}",
            cfg.sample_rate,
            cfg.frame_ms,
            cfg.dct_coeffs,
            cfg.context,
            cfg.hidden,
            cfg.vad,
            cfg.learning_rate,
            cfg.batch_size,
            cfg.epochs,
            cfg.patience,
            cfg.max_frames_per_file,
            cfg.seed
        ),
    ]);
    let model_path = out.join("cache").join(format!("dnn-{dnn_key}.spgm"));
    let model = stage(
        "train-dnn",
        out,
        cached(
            &model_path,
            force,
            formats::read_mlp,
            || {
                let tr = build_dataset(labelled_rows(&fe, &train.files), cfg.max_frames_per_file)?;
                let dv = build_dataset(labelled_rows(&fe, &dev.files), cfg.max_frames_per_file)?;
                Ok(train_network(cfg, tr, Some(dv))?.model)
            },
            formats::encode_mlp,
        ),
    )?;
    info!("network ready after {:.1}s", started.elapsed().as_secs_f64());

    let (train_out, dev_out, eval_out) = stage("extract-bottleneck", out, (|| {
        Ok((outputs(&fe, &model, &train.files)?, outputs(&fe, &model, &dev.files)?, outputs(&fe, &model, &eval.files)?))
    })())?;
    let train_labels: Vec<Label> = train.files.iter().map(|f| f.entry.label).collect();
    let train_pooled = stage("pool", out, pooled_matrix(&train_out))?;

    let known = known_attacks(cfg, data.train.manifest.entries().iter().map(|e| &e.label));
    let mut results = Vec::new();
    for &classifier in &cfg.classifiers {
        let backend = match classifier {
            Classifier::Mlp => Backend::Mlp,
            Classifier::Gmm => {
                let key = digest(&["gmm", &dnn_key, &format!("{} {} {:?}", cfg.gmm_components, cfg.gmm_max_iter, cfg.gmm_covariance)]);
                let path = out.join("cache").join(format!("gmm-{key}.spgg"));
                Backend::Gmm(stage(
                    "train-gmm",
                    out,
                    cached(&path, force, formats::read_gmm_pair, || train_gmm_pair(cfg, &train_pooled, &train_labels), formats::encode_gmm_pair),
                )?)
            }
            Classifier::Svm => {
                let key = digest(&[
                    "svm",
                    &dnn_key,
                    &format!("{} {} {} {} {:?}", cfg.svm_grid, cfg.svm_c, cfg.svm_gamma, cfg.svm_folds, cfg.svm_grid_values),
                ]);
                let path = out.join("cache").join(format!("svm-{key}.spgs"));
                Backend::Svm(stage(
                    "train-svm",
                    out,
                    cached(
                        &path,
                        force,
                        formats::read_svm,
                        || train_svm_backend(cfg, &train_pooled, &train_labels, cfg.svm_grid),
                        formats::encode_svm,
                    ),
                )?)
            }
        };
        let result = stage("score", out, (|| {
            let dev_scores = score_set(&backend, &dev.files, &dev_out)?;
            let eval_scores = score_set(&backend, &eval.files, &eval_out)?;
            let name = classifier.name();
            write_scores(&out.join("scores").join(format!("{name}_dev.txt")), &dev_scores)?;
            write_scores(&out.join("scores").join(format!("{name}_eval.txt")), &eval_scores)?;
            let dev_report = breakdown(&dev_scores, &known)?;
            let eval_report = breakdown(&eval_scores, &known)?;
            let report_path = out.join("reports").join(format!("{name}_eval.txt"));
            std::fs::write(&report_path, format_report(&eval_report)).at(&report_path)?;
            let dev_path = out.join("reports").join(format!("{name}_dev.txt"));
            std::fs::write(&dev_path, format_report(&dev_report)).at(&dev_path)?;
            Ok(ClassifierResult { classifier, dev_eer: compute_eer_set(&dev_scores)?.percent(), eval: eval_report })
        })())?;
        info!(
            "{classifier}: dev {:.3}% known {:?} unknown {:?} all {:.3}%",
            result.dev_eer, result.eval.known_eer, result.eval.unknown_eer, result.eval.overall_eer
        );
        results.push(result);
    }

    let skipped = [("train", train.skipped), ("dev", dev.skipped), ("eval", eval.skipped)]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .collect();
    let report = ExperimentReport { results, known: known.into_iter().collect(), skipped };
    let summary = out.join("summary.txt");
    std::fs::write(&summary, report.to_text()).at(&summary)?;
    info!("experiment finished in {:.1}s", started.elapsed().as_secs_f64());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_respects_fractions_and_unknowns() {
        let mut entries = Vec::new();
        for i in 0..10 {
            entries.push(ManifestEntry::new(format!("h{i}"), Label::Human));
            entries.push(ManifestEntry::new(format!("s{i}"), Label::Known(1)));
            entries.push(ManifestEntry::new(format!("u{i}"), Label::Unknown(4)));
        }
        let [tr, dv, ev] = split_manifest(&Manifest::new(entries).unwrap(), 0.4, 0.2);
        assert_eq!((tr.len(), dv.len(), ev.len()), (8, 4, 18));
        assert!(tr.iter().chain(&dv).all(|e| !matches!(e.label, Label::Unknown(_))));
        assert_eq!(tr[0].path, PathBuf::from("h0"));
        assert_eq!(dv[0].path, PathBuf::from("h4"));
    }
}
