//! `<path> <label>` dataset lists.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use spoofguard_core::Label;

use crate::error::{Error, IoContext, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Label,
}

impl ManifestEntry {
    pub fn new(path: impl Into<PathBuf>, label: Label) -> Self {
        ManifestEntry { path: path.into(), label }
    }

    /// Identifier used in score files and indices: the path as written.
    pub fn source_id(&self) -> String {
        self.path.to_string_lossy().into_owned()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.path) {
                return Err(Error::validation(format!("duplicate path {}", e.path.display())));
            }
            let text = e.path.to_string_lossy();
            if text.is_empty() || text.chars().any(char::is_whitespace) {
                return Err(Error::validation(format!("path {text:?} is empty or contains whitespace")));
            }
        }
        Ok(Manifest { entries })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A training list needs both bona fide and spoofed material.
    pub fn check_trainable(&self) -> Result<()> {
        let human = self.entries.iter().any(|e| e.label == Label::Human);
        let spoof = self.entries.iter().any(|e| e.label.is_spoof());
        if human && spoof {
            Ok(())
        } else {
            Err(Error::validation("training manifest needs at least one human and one spoof entry"))
        }
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |reason: String| Error::Parse { path: origin.to_path_buf(), line: i + 1, reason };
            let mut fields = line.split_whitespace();
            let (Some(path), Some(label), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(format!("expected `<path> <label>`, got {line:?}")));
            };
            let label: Label = label.parse().map_err(|e: spoofguard_core::Error| parse_err(e.to_string()))?;
            if !seen.insert(path.to_owned()) {
                return Err(Error::validation(format!("{}:{}: duplicate path {path}", origin.display(), i + 1)));
            }
            entries.push(ManifestEntry::new(path, label));
        }
        Ok(Manifest { entries })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(out, "{} {}", e.path.display(), e.label);
        }
        out
    }

    /// Resolves an entry path against the directory holding the manifest.
    pub fn resolve(base: &Path, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            base.join(&entry.path)
        }
    }
}

pub fn parse_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).at(path)?;
    Manifest::parse(&text, path)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    std::fs::write(path, manifest.to_text()).at(path)
}

/// Directory that relative manifest paths are resolved against.
pub fn manifest_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}
