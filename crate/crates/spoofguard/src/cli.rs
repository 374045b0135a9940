//! The `spoofguard` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 training failure, 4 completed but some clips were skipped.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use spoofguard_core::eval::{breakdown, ScoreSet};
use spoofguard_core::features::pool_rows;
use spoofguard_core::Matrix;

use crate::config::PipelineConfig;
use crate::error::{Error, IoContext, Result};
use crate::experiment::run_experiment;
use crate::formats;
use crate::frontend::FrontEnd;
use crate::manifest::{write_manifest, Manifest, ManifestEntry};
use crate::pipeline::{
    analyze_all, build_dataset, FileOutput, network_outputs, score_entry, train_gmm_pair, train_network, train_svm_backend, Backend,
    DataList,
};
use crate::scores::{format_report, read_scores, write_scores};
use crate::synth::{generate_corpus, AttackType, SynthSpec};

pub const EXIT_SKIPPED: i32 = 4;

/// Name of the per-directory feature index.
pub const INDEX: &str = "index.txt";

#[derive(Debug, Parser)]
#[command(name = "spoofguard", version, about = "Bottleneck-feature spoofing detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides both the configuration and SPOOFGUARD_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ClassifierArg {
    Mlp,
    Gmm,
    Svm,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and its manifest.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_human: usize,
        #[arg(long, default_value_t = 100)]
        n_per_attack: usize,
        /// Comma-separated attack types (default: all five).
        #[arg(long, value_delimiter = ',')]
        attacks: Vec<String>,
        /// Attack types labelled U<n> rather than S<n>.
        #[arg(long, value_delimiter = ',')]
        unknown: Vec<String>,
        /// Zero the 0-100 Hz band on alternating stretches of spoofed clips.
        #[arg(long)]
        lf: bool,
        #[arg(long, default_value_t = 1.0)]
        clip_seconds: f64,
        #[arg(long, default_value_t = 16000)]
        sample_rate: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Stacked network inputs per clip, plus an index.
    ExtractFeatures {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-clip CSVs of frame energy, zero-crossing rate and VAD flag.
        #[arg(long)]
        vad_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Train the bottleneck network.
    TrainDnn {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Per-frame bottleneck activations.
    ExtractBottleneck {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average bottleneck frames into one vector per file.
    Pool {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        bottlenecks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Manifest of the pooled rows, in row order (default: `<out>.manifest`).
        #[arg(long)]
        out_manifest: Option<PathBuf>,
    },
    /// Human and spoof GMMs over pooled vectors.
    TrainGmm {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// RBF SVM over pooled vectors.
    TrainSvm {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Select C and gamma by cross-validated grid search.
        #[arg(long, conflicts_with_all = ["c", "gamma"])]
        grid: bool,
        #[arg(long, requires = "gamma")]
        c: Option<f64>,
        #[arg(long, requires = "c")]
        gamma: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Score files with a trained classifier.
    Score {
        #[arg(long, value_enum)]
        classifier: ClassifierArg,
        /// Network (mlp), GMM pair (gmm) or SVM (svm) file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Feature directory (mlp) or pooled matrix aligned with the manifest (gmm, svm).
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// EER report from a score file.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        /// Comma-separated known attack labels.
        #[arg(long, value_delimiter = ',')]
        known: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline for every configured classifier.
    RunExperiment {
        #[arg(long)]
        out: PathBuf,
        /// Rebuild cached corpora and models.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    /// Experiment defaults, then the config file, then the environment,
    /// then `--seed`.
    fn config(&self) -> Result<PipelineConfig> {
        let cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::experiment(),
        };
        let mut cfg = cfg.with_env_seed()?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = format!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let _ = write!(msg, "\n  caused by: {s}");
                src = s.source();
            }
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}

/// File name for a source id inside a feature directory.
pub fn feature_file_name(source_id: &str) -> String {
    let stem = source_id.strip_suffix(".wav").unwrap_or(source_id);
    let safe: String = stem.chars().map(|c| if c == '/' || c == '\\' || c == ':' { '_' } else { c }).collect();
    format!("{safe}.spgf")
}

/// `<source_id> <file> <rows>` lines of a feature directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureIndex {
    pub files: Vec<(String, String, usize)>,
    pub skipped: Vec<String>,
}

impl FeatureIndex {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (id, file, rows) in &self.files {
            let _ = writeln!(s, "{id} {file} {rows}");
        }
        for id in &self.skipped {
            let _ = writeln!(s, "# skipped {id}");
        }
        s
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(INDEX);
        let text = std::fs::read_to_string(&path).at(&path)?;
        let mut index = FeatureIndex::default();
        for (i, line) in text.lines().enumerate() {
            if let Some(id) = line.strip_prefix("# skipped ") {
                index.skipped.push(id.to_string());
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let rows = match f.as_slice() {
                [_, _, rows] => rows.parse().ok(),
                _ => None,
            };
            let rows = rows.ok_or_else(|| Error::Parse { path: path.clone(), line: i + 1, reason: format!("bad index line {line:?}") })?;
            index.files.push((f[0].to_string(), f[1].to_string(), rows));
        }
        Ok(index)
    }

    fn lookup(&self, id: &str) -> Option<&str> {
        self.files.iter().find(|(s, _, _)| s == id).map(|(_, f, _)| f.as_str())
    }
}

/// Manifest entries that have a feature file in `dir`, with their matrices.
fn load_features<'a>(list: &'a DataList, dir: &'a Path) -> Result<impl Iterator<Item = (ManifestEntry, Result<Matrix>)> + 'a> {
    let index = FeatureIndex::read(dir)?;
    let mut missing = Vec::new();
    let mut found = Vec::new();
    for e in list.manifest.entries() {
        match index.lookup(&e.source_id()) {
            Some(f) => found.push((e.clone(), dir.join(f))),
            None if index.skipped.contains(&e.source_id()) => warn!("{}: skipped at extraction", e.source_id()),
            None => missing.push(e.source_id()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::validation(format!("no features in {} for: {}", dir.display(), missing.join(", "))));
    }
    Ok(found.into_iter().map(|(e, p)| (e, formats::read_matrix(&p))))
}

/// Writes each `(id, matrix)` plus the index; on failure removes what was
/// written.
fn write_feature_dir(out: &Path, items: Vec<(String, Matrix)>, skipped: Vec<String>) -> Result<FeatureIndex> {
    std::fs::create_dir_all(out).at(out)?;
    let mut index = FeatureIndex { skipped, ..FeatureIndex::default() };
    let mut written = Vec::new();
    let result = (|| {
        for (id, m) in &items {
            let name = feature_file_name(id);
            let path = out.join(&name);
            if written.contains(&path) {
                return Err(Error::validation(format!("two source ids map to {name}")));
            }
            formats::write_matrix(&path, m)?;
            written.push(path);
            index.files.push((id.clone(), name, m.rows()));
        }
        let idx = out.join(INDEX);
        std::fs::write(&idx, index.to_text()).at(&idx)?;
        written.push(idx);
        Ok(())
    })();
    if let Err(e) = result {
        for p in written {
            let _ = std::fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(index)
}

fn parse_attacks(names: &[String]) -> Result<Vec<AttackType>> {
    names.iter().map(|n| n.parse()).collect()
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::SynthData { out, n_human, n_per_attack, attacks, unknown, lf, clip_seconds, sample_rate, common } => {
            let cfg = common.config()?;
            let spec = SynthSpec {
                n_human,
                n_per_attack,
                attack_types: if attacks.is_empty() { AttackType::ALL.to_vec() } else { parse_attacks(&attacks)? },
                unknown: parse_attacks(&unknown)?.into_iter().collect(),
                inject_lf_discontinuity: lf,
                seed: cfg.seed,
                clip_seconds,
                sample_rate,
            };
            let m = generate_corpus(&spec, &out)?;
            println!("wrote {} clips and {}", m.len(), out.join("manifest.txt").display());
            Ok(0)
        }
        Command::ExtractFeatures { manifest, out, vad_csv, common } => {
            let cfg = common.config()?;
            let fe = FrontEnd::new(&cfg)?;
            let list = DataList::load(&manifest)?;
            let analyzed = analyze_all(&fe, &list)?;
            if let Some(dir) = &vad_csv {
                std::fs::create_dir_all(dir).at(dir)?;
                for f in &analyzed.files {
                    let p = dir.join(feature_file_name(&f.analysis.source_id).replace(".spgf", ".vad.csv"));
                    std::fs::write(&p, f.analysis.vad_csv()).at(&p)?;
                }
            }
            let items = analyzed
                .files
                .iter()
                .map(|f| Ok((f.entry.source_id(), fe.stacked(&f.analysis)?)))
                .collect::<Result<Vec<_>>>()?;
            let skipped = analyzed.skipped;
            let index = write_feature_dir(&out, items, skipped.clone())?;
            for (id, _, rows) in &index.files {
                println!("{id}\t{rows} speech frames");
            }
            if skipped.is_empty() {
                Ok(0)
            } else {
                println!("skipped files (no speech):");
                for id in &skipped {
                    println!("  {id}");
                }
                Ok(EXIT_SKIPPED)
            }
        }
        Command::TrainDnn { train, dev, features, out, lr, batch, epochs, common } => {
            let mut cfg = common.config()?;
            if let Some(v) = lr {
                cfg.learning_rate = v;
            }
            if let Some(v) = batch {
                cfg.batch_size = v;
            }
            if let Some(v) = epochs {
                cfg.epochs = v;
            }
            cfg.validate()?;
            let rows = |path: &Path| -> Result<_> {
                let list = DataList::load(path)?;
                let files: Vec<_> = load_features(&list, &features)?.map(|(e, m)| m.map(|m| (e.label, m))).collect();
                build_dataset(files, cfg.max_frames_per_file)
            };
            let train_list = DataList::load(&train)?;
            train_list.manifest.check_trainable()?;
            let tr = rows(&train)?;
            if tr.0.cols() != cfg.input_dim() {
                return Err(Error::validation(format!("features are {}-dim, configuration expects {}", tr.0.cols(), cfg.input_dim())));
            }
            let dv = dev.as_deref().map(rows).transpose()?;
            let outcome = train_network(&cfg, tr, dv)?;
            formats::write_mlp(&out, &outcome.model)?;
            println!("selected epoch {} of {}; wrote {}", outcome.best_epoch, outcome.history.len(), out.display());
            Ok(0)
        }
        Command::ExtractBottleneck { model, manifest, features, out } => {
            let model = formats::read_mlp(&model)?;
            let list = DataList::load(&manifest)?;
            let mut items = Vec::new();
            for (entry, m) in load_features(&list, &features)? {
                let m = m?;
                if m.cols() != model.input_dim() {
                    return Err(Error::validation(format!("network expects {}-dim inputs, features are {}-dim", model.input_dim(), m.cols())));
                }
                items.push((entry.source_id(), model.extract_bottleneck(&m)?));
            }
            write_feature_dir(&out, items, Vec::new())?;
            Ok(0)
        }
        Command::Pool { manifest, bottlenecks, out, out_manifest } => {
            let list = DataList::load(&manifest)?;
            let mut rows = Vec::new();
            let mut entries = Vec::new();
            for (entry, m) in load_features(&list, &bottlenecks)? {
                rows.push(pool_rows(m?.iter_rows())?);
                entries.push(entry);
            }
            formats::write_matrix(&out, &Matrix::from_rows(&rows)?)?;
            let mpath = out_manifest.unwrap_or_else(|| PathBuf::from(format!("{}.manifest", out.display())));
            write_manifest(&mpath, &Manifest::new(entries)?)?;
            println!("pooled {} files into {}", rows.len(), out.display());
            Ok(0)
        }
        Command::TrainGmm { features, manifest, k, out, common } => {
            let mut cfg = common.config()?;
            if let Some(k) = k {
                cfg.gmm_components = k;
            }
            let (pooled, list) = pooled_with_manifest(&features, &manifest)?;
            let labels: Vec<_> = list.entries().iter().map(|e| e.label).collect();
            let pair = train_gmm_pair(&cfg, &pooled, &labels)?;
            formats::write_gmm_pair(&out, &pair)?;
            Ok(0)
        }
        Command::TrainSvm { features, manifest, grid, c, gamma, out, common } => {
            let mut cfg = common.config()?;
            if let (Some(c), Some(g)) = (c, gamma) {
                cfg.svm_c = c;
                cfg.svm_gamma = g;
            }
            let (pooled, list) = pooled_with_manifest(&features, &manifest)?;
            let labels: Vec<_> = list.entries().iter().map(|e| e.label).collect();
            let model = train_svm_backend(&cfg, &pooled, &labels, grid)?;
            let p = model.params();
            println!("C={} gamma={} support vectors={}", p.c, p.gamma, model.coef().len());
            formats::write_svm(&out, &model)?;
            Ok(0)
        }
        Command::Score { classifier, model, manifest, features, out } => {
            let list = DataList::load(&manifest)?;
            let mut entries = Vec::new();
            match classifier {
                ClassifierArg::Mlp => {
                    let net = formats::read_mlp(&model)?;
                    for (entry, m) in load_features(&list, &features)? {
                        let m = m?;
                        if m.cols() != net.input_dim() {
                            return Err(Error::validation(format!("network expects {}-dim inputs, features are {}-dim", net.input_dim(), m.cols())));
                        }
                        let outp = network_outputs(&net, &m)?;
                        entries.push(score_entry(&entry, Backend::Mlp.score(&outp)?));
                    }
                }
                ClassifierArg::Gmm | ClassifierArg::Svm => {
                    let backend = match classifier {
                        ClassifierArg::Gmm => Backend::Gmm(formats::read_gmm_pair(&model)?),
                        _ => Backend::Svm(formats::read_svm(&model)?),
                    };
                    let pooled = formats::read_matrix(&features)?;
                    if pooled.rows() != list.manifest.len() {
                        return Err(Error::validation(format!("{} pooled rows but {} manifest entries", pooled.rows(), list.manifest.len())));
                    }
                    backend.check_dim(pooled.cols())?;
                    for (entry, row) in list.manifest.entries().iter().zip(pooled.iter_rows()) {
                        let outp = FileOutput { pooled: row.to_vec(), frame_scores: Vec::new() };
                        entries.push(score_entry(entry, backend.score(&outp)?));
                    }
                }
            }
            let set = ScoreSet::new(entries)?;
            write_scores(&out, &set)?;
            info!("scored {} files", set.entries().len());
            Ok(0)
        }
        Command::Evaluate { scores, known, out } => {
            let set = read_scores(&scores)?;
            let known: BTreeSet<String> = known.into_iter().filter(|k| !k.is_empty()).collect();
            let report = breakdown(&set, &known)?;
            std::fs::write(&out, format_report(&report)).at(&out)?;
            let na = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.3}%"));
            println!("EER overall {:.3}%  known {}  unknown {}", report.overall_eer, na(report.known_eer), na(report.unknown_eer));
            for (a, e) in &report.per_attack_eer {
                println!("  {a}: {e:.3}%");
            }
            Ok(0)
        }
        Command::RunExperiment { out, force, common } => {
            let cfg = common.config()?;
            let report = run_experiment(&cfg, &out, force)?;
            print!("{}", report.to_text());
            Ok(if report.skipped.is_empty() { 0 } else { EXIT_SKIPPED })
        }
    }
}

fn pooled_with_manifest(features: &Path, manifest: &Path) -> Result<(Matrix, Manifest)> {
    let pooled = formats::read_matrix(features)?;
    let list = crate::manifest::parse_manifest(manifest)?;
    if pooled.rows() != list.len() {
        return Err(Error::validation(format!("{} pooled rows but {} manifest entries", pooled.rows(), list.len())));
    }
    list.check_trainable()?;
    Ok((pooled, list))
}
