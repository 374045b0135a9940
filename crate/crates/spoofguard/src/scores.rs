//! Score files (`<id> <score> <human|spoof> [attack]`) and EER reports.

use std::fmt::Write as _;
use std::path::Path;

use spoofguard_core::eval::{Class, EerReport, ScoreEntry, ScoreSet};

use crate::error::{Error, IoContext, Result};

pub fn format_scores(scores: &ScoreSet) -> String {
    let mut s = String::new();
    for e in scores.entries() {
        let class = match e.class {
            Class::Human => "human",
            Class::Spoof => "spoof",
        };
        let _ = write!(s, "{} {} {class}", e.source_id, e.score);
        if let Some(a) = &e.attack {
            let _ = write!(s, " {a}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_scores(text: &str, origin: &Path) -> Result<ScoreSet> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: String| Error::Parse { path: origin.to_path_buf(), line: i + 1, reason };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let score: f64 = fields
            .get(1)
            .ok_or_else(|| err("missing score".into()))?
            .parse()
            .map_err(|_| err(format!("bad score {:?}", fields[1])))?;
        let entry = match (fields.get(2).copied(), fields.get(3), fields.len()) {
            (Some("human"), None, 3) => ScoreEntry::human(fields[0], score),
            (Some("spoof"), Some(attack), 4) => ScoreEntry::spoof(fields[0], score, *attack),
            (Some("spoof"), None, _) => return Err(err("spoof entry without attack type".into())),
            _ => return Err(err(format!("expected `<id> <score> <human|spoof> [attack]`, got {line:?}"))),
        };
        entries.push(entry);
    }
    Ok(ScoreSet::new(entries)?)
}

pub fn write_scores(path: &Path, scores: &ScoreSet) -> Result<()> {
    std::fs::write(path, format_scores(scores)).at(path)
}

pub fn read_scores(path: &Path) -> Result<ScoreSet> {
    parse_scores(&std::fs::read_to_string(path).at(path)?, path)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// `metric=value` lines followed by a `det:` block of `far,frr` rows.
pub fn format_report(report: &EerReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "overall_eer={:.6}", report.overall_eer);
    let _ = writeln!(s, "threshold_at_eer={}", report.threshold_at_eer);
    let _ = writeln!(s, "known_eer={}", cell(report.known_eer));
    let _ = writeln!(s, "unknown_eer={}", cell(report.unknown_eer));
    for (attack, eer) in &report.per_attack_eer {
        let _ = writeln!(s, "eer[{attack}]={eer:.6}");
    }
    s.push_str("det:\nfar,frr\n");
    for p in &report.det {
        let _ = writeln!(s, "{},{}", p.far, p.frr);
    }
    s
}

/// Reads back the `metric=value` part of a report.
pub fn report_metrics(text: &str) -> Vec<(String, String)> {
    text.lines()
        .take_while(|l| *l != "det:")
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use spoofguard_core::eval::breakdown;

    use super::*;

    fn set() -> ScoreSet {
        ScoreSet::new(vec![
            ScoreEntry::human("a", 0.9),
            ScoreEntry::human("b", 0.4),
            ScoreEntry::spoof("c", 0.6, "S1"),
            ScoreEntry::spoof("d", 0.1, "U4"),
        ])
        .unwrap()
    }

    #[test]
    fn score_text_round_trips() {
        let s = set();
        let text = format_scores(&s);
        assert_eq!(text.lines().next().unwrap(), "a 0.9 human");
        assert_eq!(parse_scores(&text, Path::new("s")).unwrap(), s);
    }

    #[test]
    fn malformed_lines_are_located() {
        for bad in ["a 0.5", "a x human", "a 0.5 spoof", "a 0.5 human S1", "a 0.5 alien"] {
            assert!(matches!(parse_scores(bad, Path::new("s")), Err(Error::Parse { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn report_lists_every_cell() {
        let r = breakdown(&set(), &BTreeSet::from(["S1".to_string()])).unwrap();
        let text = format_report(&r);
        let metrics = report_metrics(&text);
        let keys: Vec<&str> = metrics.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["overall_eer", "threshold_at_eer", "known_eer", "unknown_eer", "eer[S1]", "eer[U4]"]);
        assert!(text.contains("\ndet:\nfar,frr\n"));
    }
}
