use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spoofguard_core::dsp::{detect_speech, frame_signal, AudioClip, Dct, VadConfig};

/// Textbook O(N^2) orthonormal DCT-II, evaluated term by term.
fn naive_dct(x: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    (0..x.len())
        .map(|k| {
            let s: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v * (PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n)).cos())
                .sum();
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            scale * s
        })
        .collect()
}

fn random_frame(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn full_transform_matches_naive_and_preserves_energy() {
    let dct = Dct::new(320, 320).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let x = random_frame(&mut rng, 320);
        let fast = dct.transform(&x).unwrap();
        let slow = naive_dct(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-6);
        }
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = fast.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() <= 1e-6 * ex);
    }
}

#[test]
fn truncated_transform_is_prefix_of_full() {
    let full = Dct::new(320, 320).unwrap();
    let head = Dct::new(320, 128).unwrap();
    let x = random_frame(&mut ChaCha8Rng::seed_from_u64(2), 320);
    assert_eq!(&full.transform(&x).unwrap()[..128], &head.transform(&x).unwrap()[..]);
}

proptest! {
    #[test]
    fn dct_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let dct = Dct::new(320, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_frame(&mut rng, 320);
        let y = random_frame(&mut rng, 320);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (dx, dy, dm) = (dct.transform(&x).unwrap(), dct.transform(&y).unwrap(), dct.transform(&mix).unwrap());
        for k in 0..128 {
            prop_assert!((dm[k] - (a * dx[k] + b * dy[k])).abs() < 1e-6);
        }
    }

    #[test]
    fn frames_reconstruct_prefix(len in 320usize..5000, seed in any::<u64>()) {
        let x = random_frame(&mut ChaCha8Rng::seed_from_u64(seed), len);
        let seq = frame_signal(&AudioClip::new(x.clone(), 16_000, "p").unwrap()).unwrap();
        let joined: Vec<f64> = seq.frames().flatten().copied().collect();
        prop_assert_eq!(seq.n_frames(), len / 320);
        prop_assert_eq!(&joined[..], &x[..seq.n_frames() * 320]);
    }
}

fn silence_then_tone(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x: Vec<f64> = (0..8000).map(|_| rng.gen_range(-1e-4..1e-4)).collect();
    x.extend((0..8000).map(|i| (2.0 * PI * 440.0 * i as f64 / 16_000.0).sin()));
    x
}

#[test]
fn tone_after_silence_is_speech() {
    let x = silence_then_tone(&mut ChaCha8Rng::seed_from_u64(3));
    let seq = detect_speech(frame_signal(&AudioClip::new(x, 16_000, "t").unwrap()).unwrap(), &VadConfig::default());
    let flags = seq.speech_flags();
    // oracle: the tone frames sit ~70 dB above the 1e-4 noise
    assert!(flags[25..].iter().all(|&f| f));
    assert!(flags[..25].iter().all(|&f| !f));
}

#[test]
fn vad_is_gain_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let mut x = silence_then_tone(&mut rng);
        // some mid-level bursts to exercise the threshold
        for _ in 0..5 {
            let start = rng.gen_range(0..15_000);
            let amp = rng.gen_range(1e-4..0.2);
            for v in &mut x[start..start + 600] {
                *v = (*v + amp * rng.gen_range(-1.0..1.0)).clamp(-1.0, 1.0);
            }
        }
        let half: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        let run = |s: Vec<f64>| {
            let seq = frame_signal(&AudioClip::new(s, 16_000, "g").unwrap()).unwrap();
            detect_speech(seq, &VadConfig::default()).speech_flags().to_vec()
        };
        assert_eq!(run(x), run(half));
    }
}
