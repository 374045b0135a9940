//! Score aggregation and equal-error-rate metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Fraction of lowest frame scores discarded before averaging.
pub const TRIM_LOW: f64 = 0.15;
/// Fraction of highest frame scores discarded before averaging.
pub const TRIM_HIGH: f64 = 0.25;

/// Mean of the frame scores left after dropping the lowest 15% and the
/// highest 25% (both counts rounded down). Falls back to the plain mean
/// when nothing would remain.
pub fn trimmed_mean_score(scores: &[f64]) -> Result<f64> {
    trimmed_mean(scores, TRIM_LOW, TRIM_HIGH)
}

pub fn trimmed_mean(scores: &[f64], low: f64, high: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("no frame scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite frame score"));
    }
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = crate::math::floor(low * n as f64) as usize;
    let hi = crate::math::floor(high * n as f64) as usize;
    let kept = if lo + hi < n { &sorted[lo..n - hi] } else { &sorted[..] };
    // mean about the smallest kept value: exact for constant inputs
    let base = kept[0];
    let mean = base + kept.iter().map(|x| x - base).sum::<f64>() / kept.len() as f64;
    Ok(mean.clamp(base, kept[kept.len() - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Class {
    Human,
    Spoof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub source_id: String,
    pub score: f64,
    pub class: Class,
    /// Attack family; present exactly when `class` is [`Class::Spoof`].
    pub attack: Option<String>,
}

impl ScoreEntry {
    pub fn human(source_id: impl Into<String>, score: f64) -> Self {
        ScoreEntry { source_id: source_id.into(), score, class: Class::Human, attack: None }
    }

    pub fn spoof(source_id: impl Into<String>, score: f64, attack: impl Into<String>) -> Self {
        ScoreEntry { source_id: source_id.into(), score, class: Class::Spoof, attack: Some(attack.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    entries: Vec<ScoreEntry>,
}

impl ScoreSet {
    pub fn new(entries: Vec<ScoreEntry>) -> Result<Self> {
        for e in &entries {
            if !e.score.is_finite() {
                return Err(Error::invalid(format!("non-finite score for {}", e.source_id)));
            }
            if (e.class == Class::Spoof) != e.attack.is_some() {
                return Err(Error::invalid(format!("{}: attack type must be given for spoof entries only", e.source_id)));
            }
        }
        Ok(ScoreSet { entries })
    }

    pub fn entries(&self) -> &[ScoreEntry] {
        &self.entries
    }

    pub fn human_scores(&self) -> Vec<f64> {
        self.scores_where(|e| e.class == Class::Human)
    }

    pub fn spoof_scores(&self) -> Vec<f64> {
        self.scores_where(|e| e.class == Class::Spoof)
    }

    fn scores_where(&self, pred: impl Fn(&ScoreEntry) -> bool) -> Vec<f64> {
        self.entries.iter().filter(|e| pred(e)).map(|e| e.score).collect()
    }

    pub fn attack_types(&self) -> BTreeSet<String> {
        self.entries.iter().filter_map(|e| e.attack.clone()).collect()
    }
}

/// One operating point: false acceptance and false rejection rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eer {
    /// Equal error rate as a fraction in `[0, 1]`.
    pub rate: f64,
    /// Threshold at the crossing (midpoint of the bracketing thresholds).
    pub threshold: f64,
    /// Operating points at every distinct score plus `+inf`, in increasing
    /// threshold order.
    pub det: Vec<DetPoint>,
}

impl Eer {
    pub fn percent(&self) -> f64 {
        100.0 * self.rate
    }
}

/// Equal error rate of a detector where higher scores mean "human".
///
/// A trial is accepted when `score >= threshold`. FAR is the accepted
/// fraction of spoof scores, FRR the rejected fraction of human scores.
/// Thresholds sweep the sorted distinct scores and then `+inf`; the EER is
/// read off the first point with `FAR <= FRR`, interpolating linearly from
/// the previous point when the two rates are not exactly equal there.
pub fn compute_eer(human: &[f64], spoof: &[f64]) -> Result<Eer> {
    if human.is_empty() || spoof.is_empty() {
        return Err(Error::invalid("EER needs at least one human and one spoof score"));
    }
    if human.iter().chain(spoof).any(|s| !s.is_finite()) {
        return Err(Error::invalid("non-finite score"));
    }
    let mut h = human.to_vec();
    let mut s = spoof.to_vec();
    h.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = h.iter().chain(&s).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (nh, ns) = (h.len(), s.len());
    let mut det = Vec::with_capacity(thresholds.len() + 1);
    let (mut hi, mut si) = (0usize, 0usize);
    for &t in &thresholds {
        while hi < nh && h[hi] < t {
            hi += 1;
        }
        while si < ns && s[si] < t {
            si += 1;
        }
        det.push(DetPoint { threshold: t, far: (ns - si) as f64 / ns as f64, frr: hi as f64 / nh as f64 });
    }
    det.push(DetPoint { threshold: f64::INFINITY, far: 0.0, frr: 1.0 });

    let (rate, threshold) = crossing(&det);
    Ok(Eer { rate, threshold, det })
}

/// Locates the FAR = FRR crossing on a sequence of operating points whose
/// first point has FAR > FRR and last has FAR < FRR.
pub fn crossing(points: &[DetPoint]) -> (f64, f64) {
    let i = points
        .iter()
        .position(|p| p.far - p.frr <= 0.0)
        .expect("last operating point always has FAR < FRR");
    let b = points[i];
    if b.far == b.frr || i == 0 {
        return (b.far, b.threshold);
    }
    let a = points[i - 1];
    let (da, db) = (a.far - a.frr, b.far - b.frr);
    let lambda = da / (da - db);
    let rate = a.far + lambda * (b.far - a.far);
    let threshold = if b.threshold.is_finite() { 0.5 * (a.threshold + b.threshold) } else { a.threshold };
    (rate, threshold)
}

pub fn compute_eer_set(scores: &ScoreSet) -> Result<Eer> {
    compute_eer(&scores.human_scores(), &scores.spoof_scores())
}

/// EERs in percent, pooled and per attack family.
#[derive(Debug, Clone, PartialEq)]
pub struct EerReport {
    pub overall_eer: f64,
    pub threshold_at_eer: f64,
    pub known_eer: Option<f64>,
    pub unknown_eer: Option<f64>,
    pub per_attack_eer: BTreeMap<String, f64>,
    pub det: Vec<DetPoint>,
}

/// Overall, known-attack, unknown-attack and per-attack EERs. Every cell is
/// computed against all human entries; an attack subset with no entries
/// leaves its cell empty.
pub fn breakdown(scores: &ScoreSet, known: &BTreeSet<String>) -> Result<EerReport> {
    let human = scores.human_scores();
    let overall = compute_eer(&human, &scores.spoof_scores())?;
    let subset = |pred: &dyn Fn(&str) -> bool| -> Result<Option<f64>> {
        let spoof: Vec<f64> = scores
            .entries()
            .iter()
            .filter(|e| e.attack.as_deref().is_some_and(pred))
            .map(|e| e.score)
            .collect();
        if spoof.is_empty() {
            return Ok(None);
        }
        Ok(Some(compute_eer(&human, &spoof)?.percent()))
    };
    let mut per_attack_eer = BTreeMap::new();
    for attack in scores.attack_types() {
        if let Some(e) = subset(&|a| a == attack)? {
            per_attack_eer.insert(attack, e);
        }
    }
    Ok(EerReport {
        overall_eer: overall.percent(),
        threshold_at_eer: overall.threshold,
        known_eer: subset(&|a| known.contains(a))?,
        unknown_eer: subset(&|a| !known.contains(a))?,
        per_attack_eer,
        det: overall.det,
    })
}
