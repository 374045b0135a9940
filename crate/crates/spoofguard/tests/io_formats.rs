use std::io::Cursor;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use spoofguard::formats::{decode_matrix, encode_matrix};
use spoofguard::manifest::{parse_manifest, write_manifest, Manifest, ManifestEntry};
use spoofguard::scores::{format_scores, parse_scores};
use spoofguard::synth::{generate_corpus, AttackType, SynthSpec};
use spoofguard::wav::{read_wav, read_wav_from, write_wav_to};
use spoofguard_core::dsp::AudioClip;
use spoofguard_core::eval::{ScoreEntry, ScoreSet};
use spoofguard_core::{Label, Matrix};

fn rewrite(clip: &AudioClip) -> Vec<u8> {
    let mut buf = Cursor::new(Vec::new());
    write_wav_to(&mut buf, clip).unwrap();
    buf.into_inner()
}

#[test]
fn generated_wavs_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec { n_human: 1, n_per_attack: 1, clip_seconds: 0.5, ..SynthSpec::default() };
    let m = generate_corpus(&spec, dir.path()).unwrap();
    for e in m.entries() {
        let path = dir.path().join(&e.path);
        let original = std::fs::read(&path).unwrap();
        assert_eq!(rewrite(&read_wav(&path).unwrap()), original, "{}", e.path.display());
    }
}

#[test]
fn full_scale_sample_reads_back_scaled() {
    let mut bytes = Vec::new();
    let spec = hound::WavSpec { channels: 1, sample_rate: 16000, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    {
        let mut w = hound::WavWriter::new(Cursor::new(&mut bytes), spec).unwrap();
        w.write_sample(32767i16).unwrap();
        w.finalize().unwrap();
    }
    let clip = read_wav_from(Cursor::new(&bytes), "one").unwrap();
    assert_eq!(clip.samples(), [32767.0 / 32768.0]);
    assert_eq!(rewrite(&clip), bytes);
}

#[test]
fn feature_matrix_layout() {
    let m = Matrix::from_vec(2, 3, vec![1.0, -2.0, 0.5, 0.0, 3.25, -1.0]).unwrap();
    let bytes = encode_matrix(&m);
    assert_eq!(&bytes[..4], b"SPGF");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    assert_eq!(bytes.len(), 16 + 6 * 4);
    assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), -2.0);
    assert_eq!(decode_matrix(&bytes, Path::new("m")).unwrap(), m);
}

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![Just(Label::Human), (1u8..=5).prop_map(Label::Known), (1u16..=500).prop_map(Label::Unknown)]
}

fn manifest() -> impl Strategy<Value = Manifest> {
    prop::collection::btree_map("[a-z0-9_]{1,8}(/[a-z0-9_]{1,8})?\\.wav", label(), 0..20).prop_map(|m| {
        Manifest::new(m.into_iter().map(|(p, l)| ManifestEntry::new(PathBuf::from(p), l)).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn manifests_round_trip_through_files(m in manifest()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        write_manifest(&path, &m).unwrap();
        prop_assert_eq!(parse_manifest(&path).unwrap(), m);
    }

    #[test]
    fn score_files_round_trip(rows in prop::collection::vec((any::<bool>(), -1e6f64..1e6, 1u8..6), 0..30)) {
        let entries: Vec<ScoreEntry> = rows
            .iter()
            .enumerate()
            .map(|(i, &(human, s, a))| {
                if human { ScoreEntry::human(format!("f{i}"), s) } else { ScoreEntry::spoof(format!("f{i}"), s, format!("S{a}")) }
            })
            .collect();
        let set = ScoreSet::new(entries).unwrap();
        let back = parse_scores(&format_scores(&set), Path::new("s")).unwrap();
        prop_assert_eq!(back, set);
    }
}

#[test]
fn attack_names_parse_back() {
    for a in AttackType::ALL {
        assert_eq!(a.name().parse::<AttackType>().unwrap(), a);
    }
}
