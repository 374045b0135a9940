use std::path::Path;
use std::process::{Command, Output};

use spoofguard::wav::write_wav;
use spoofguard_core::dsp::AudioClip;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spoofguard"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("SPOOFGUARD_SEED")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, out: &str, n_human: &str) {
    ok(dir, &["synth-data", "--out", out, "--n-human", n_human, "--n-per-attack", "2", "--attacks", "concat,phase_distort", "--clip-seconds", "0.5"]);
}

fn files_with_ext(dir: &Path, ext: &str) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(ext))
        .collect();
    v.sort();
    v
}

#[test]
fn usage_and_data_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(d, &["score", "--classifier", "knn"]).status.code(), Some(1));
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
    let missing = run(d, &["extract-features", "--manifest", "absent.txt", "--out", "f"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.txt"));
    std::fs::write(d.join("bad.txt"), "a.wav S9x\n").unwrap();
    assert_eq!(run(d, &["extract-features", "--manifest", "bad.txt", "--out", "f"]).status.code(), Some(2));
}

#[test]
fn three_clips_give_three_feature_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth-data", "--out", "c", "--n-human", "2", "--n-per-attack", "1", "--attacks", "concat", "--clip-seconds", "0.5"]);
    ok(d, &["extract-features", "--manifest", "c/manifest.txt", "--out", "f", "--vad-csv", "vad"]);
    assert_eq!(files_with_ext(&d.join("f"), ".spgf").len(), 3);
    let index = std::fs::read_to_string(d.join("f/index.txt")).unwrap();
    assert_eq!(index.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let vad = files_with_ext(&d.join("vad"), ".vad.csv");
    assert_eq!(vad.len(), 3);
    assert!(std::fs::read_to_string(d.join("vad").join(&vad[0])).unwrap().lines().count() > 21);
    for name in files_with_ext(&d.join("f"), ".spgf") {
        let bytes = std::fs::read(d.join("f").join(&name)).unwrap();
        assert_eq!(&bytes[..4], b"SPGF");
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2688);
    }
}

#[test]
fn silent_clips_are_skipped_with_a_warning_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "c", "2");
    let silent = AudioClip::new(vec![0.0; 8000], 16000, "silent".to_string()).unwrap();
    write_wav(&d.join("c/silent.wav"), &silent).unwrap();
    let mut manifest = std::fs::read_to_string(d.join("c/manifest.txt")).unwrap();
    manifest.push_str("silent.wav human\n");
    std::fs::write(d.join("c/manifest.txt"), manifest).unwrap();
    let out = run(d, &["extract-features", "--manifest", "c/manifest.txt", "--out", "f"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(files_with_ext(&d.join("f"), ".spgf").len(), 6);
    assert!(std::fs::read_to_string(d.join("f/index.txt")).unwrap().contains("# skipped"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for tag in ["a", "b"] {
        synth(d, &format!("c{tag}"), "2");
        ok(d, &["extract-features", "--manifest", &format!("c{tag}/manifest.txt"), "--out", &format!("f{tag}")]);
    }
    let names = files_with_ext(&d.join("ca"), ".wav");
    assert_eq!(names.len(), 6);
    for n in &names {
        assert_eq!(std::fs::read(d.join("ca").join(n)).unwrap(), std::fs::read(d.join("cb").join(n)).unwrap());
    }
    for n in files_with_ext(&d.join("fa"), ".spgf") {
        assert_eq!(std::fs::read(d.join("fa").join(&n)).unwrap(), std::fs::read(d.join("fb").join(&n)).unwrap());
    }
}

#[test]
fn staged_pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth(d, "c", "4");
    let m = "c/manifest.txt";
    ok(d, &["extract-features", "--manifest", m, "--out", "f"]);
    ok(d, &["train-dnn", "--train", m, "--dev", m, "--features", "f", "--out", "net.spgm", "--epochs", "1", "--batch", "16"]);
    ok(d, &["extract-bottleneck", "--model", "net.spgm", "--manifest", m, "--features", "f", "--out", "bn"]);
    ok(d, &["pool", "--manifest", m, "--bottlenecks", "bn", "--out", "pooled.spgf"]);
    let pm = "pooled.spgf.manifest";
    assert_eq!(std::fs::read_to_string(d.join(pm)).unwrap().lines().count(), 8);
    ok(d, &["train-gmm", "--features", "pooled.spgf", "--manifest", pm, "--k", "2", "--out", "g.spgg"]);
    ok(d, &["train-svm", "--features", "pooled.spgf", "--manifest", pm, "--c", "1", "--gamma", "0.5", "--out", "s.spgs"]);
    ok(d, &["score", "--classifier", "mlp", "--model", "net.spgm", "--manifest", m, "--features", "f", "--out", "mlp.scores"]);
    ok(d, &["score", "--classifier", "gmm", "--model", "g.spgg", "--manifest", pm, "--features", "pooled.spgf", "--out", "gmm.scores"]);
    ok(d, &["score", "--classifier", "svm", "--model", "s.spgs", "--manifest", pm, "--features", "pooled.spgf", "--out", "svm.scores"]);
    for c in ["mlp", "gmm", "svm"] {
        let scores = std::fs::read_to_string(d.join(format!("{c}.scores"))).unwrap();
        assert_eq!(scores.lines().count(), 8, "{c}");
        ok(d, &["evaluate", "--scores", &format!("{c}.scores"), "--known", "S1,S2", "--out", &format!("{c}.report")]);
        let report = std::fs::read_to_string(d.join(format!("{c}.report"))).unwrap();
        for key in ["overall_eer=", "known_eer=", "eer[S1]=", "eer[S2]=", "det:"] {
            assert!(report.contains(key), "{c} report lacks {key}");
        }
    }
    // a model trained on one input width refuses features of another
    std::fs::write(d.join("narrow.cfg"), "context = 2\n").unwrap();
    ok(d, &["extract-features", "--manifest", m, "--out", "f5", "--config", "narrow.cfg"]);
    let out = run(d, &["extract-bottleneck", "--model", "net.spgm", "--manifest", m, "--features", "f5", "--out", "bn5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mlp_only_experiment_fills_four_cells() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = "classifiers = mlp\nn_human = 10\nn_per_attack = 5\nclip_seconds = 0.5\nepochs = 2\n";
    std::fs::write(d.join("x.cfg"), cfg).unwrap();
    ok(d, &["run-experiment", "--config", "x.cfg", "--out", "e"]);
    let summary = std::fs::read_to_string(d.join("e/summary.txt")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| l.starts_with("mlp ") || l.starts_with("svm ") || l.starts_with("gmm ")).collect();
    assert_eq!(rows.len(), 1);
    let cells: Vec<&str> = rows[0].split_whitespace().skip(1).collect();
    assert_eq!(cells.len(), 4);
    assert!(cells.iter().all(|c| c.parse::<f64>().is_ok()), "{summary}");
    // unchanged config reuses cached artifacts and reproduces the summary
    ok(d, &["run-experiment", "--config", "x.cfg", "--out", "e"]);
    assert_eq!(std::fs::read_to_string(d.join("e/summary.txt")).unwrap(), summary);
}
