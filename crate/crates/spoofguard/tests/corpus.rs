use std::f64::consts::PI;

use spoofguard::synth::{generate_corpus, lf_stretches, synth_clip, AttackType, ClipKind, SynthSpec, LF_CUTOFF_HZ};
use spoofguard::wav::read_wav;
use spoofguard_core::Label;

fn tiny(attacks: Vec<AttackType>) -> SynthSpec {
    SynthSpec { n_human: 2, n_per_attack: 1, attack_types: attacks, seed: 7, clip_seconds: 0.5, ..SynthSpec::default() }
}

#[test]
fn counts_follow_the_spec() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&tiny(vec![AttackType::Concat]), dir.path()).unwrap();
    let labels: Vec<Label> = m.entries().iter().map(|e| e.label).collect();
    assert_eq!(labels, [Label::Human, Label::Human, Label::Known(1)]);
    assert!(dir.path().join("manifest.txt").is_file());
    for e in m.entries() {
        assert!(dir.path().join(&e.path).is_file());
    }
}

#[test]
fn same_seed_gives_identical_files() {
    let spec = tiny(AttackType::ALL.to_vec());
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ma = generate_corpus(&spec, a.path()).unwrap();
    let mb = generate_corpus(&spec, b.path()).unwrap();
    assert_eq!(ma, mb);
    assert_eq!(ma.len(), 7);
    for e in ma.entries() {
        let x = std::fs::read(a.path().join(&e.path)).unwrap();
        let y = std::fs::read(b.path().join(&e.path)).unwrap();
        assert_eq!(x, y, "{}", e.path.display());
    }
    let other = tempfile::tempdir().unwrap();
    generate_corpus(&SynthSpec { seed: 8, ..spec }, other.path()).unwrap();
    let e = &ma.entries()[0].path;
    assert_ne!(std::fs::read(a.path().join(e)).unwrap(), std::fs::read(other.path().join(e)).unwrap());
}

/// Energy in DFT bins 0..=floor(cutoff * n / sr), by direct summation.
fn low_band_energy(seg: &[f64], sample_rate: u32) -> f64 {
    let n = seg.len();
    let top = (LF_CUTOFF_HZ * n as f64 / f64::from(sample_rate)).floor() as usize;
    (0..=top)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &x) in seg.iter().enumerate() {
                let a = 2.0 * PI * (k * i) as f64 / n as f64;
                re += x * a.cos();
                im -= x * a.sin();
            }
            re * re + im * im
        })
        .sum()
}

#[test]
fn injected_stretches_lose_their_low_band() {
    let spec = SynthSpec { clip_seconds: 2.0, inject_lf_discontinuity: true, ..tiny(AttackType::ALL.to_vec()) };
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&spec, dir.path()).unwrap();
    let n = spec.n_samples();
    let zeroed = lf_stretches(n, spec.sample_rate);
    let kept: Vec<_> = zeroed.iter().map(|r| r.end..(r.end + r.len()).min(n)).filter(|r| !r.is_empty()).collect();
    for e in m.entries().iter().filter(|e| e.label.is_spoof()) {
        let clip = read_wav(&dir.path().join(&e.path)).unwrap();
        let x = clip.samples();
        let mean = |rs: &[std::ops::Range<usize>]| {
            rs.iter().map(|r| low_band_energy(&x[r.clone()], spec.sample_rate)).sum::<f64>() / rs.len() as f64
        };
        let (z, k) = (mean(&zeroed), mean(&kept));
        assert!(z < 0.01 * k, "{}: zeroed {z:e} vs kept {k:e}", e.path.display());
    }
}

#[test]
fn clean_and_injected_humans_match() {
    let clean = tiny(vec![AttackType::PhaseDistort]);
    let lf = SynthSpec { inject_lf_discontinuity: true, ..clean.clone() };
    for i in 0..2 {
        assert_eq!(synth_clip(&clean, ClipKind::Human, i).unwrap(), synth_clip(&lf, ClipKind::Human, i).unwrap());
    }
}

#[test]
fn unknown_attacks_get_u_labels() {
    let mut spec = tiny(vec![AttackType::Concat, AttackType::FormantShift]);
    spec.unknown.insert(AttackType::FormantShift);
    let dir = tempfile::tempdir().unwrap();
    let m = generate_corpus(&spec, dir.path()).unwrap();
    let labels: Vec<String> = m.entries().iter().map(|e| e.label.to_string()).collect();
    assert_eq!(labels, ["human", "human", "S1", "U4"]);
}
