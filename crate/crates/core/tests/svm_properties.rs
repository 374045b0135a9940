use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spoofguard_core::eval::compute_eer;
use spoofguard_core::svm::{
    grid_search, max_kkt_violation, rbf_kernel, solve, train_svm, GridSearchConfig, SvmConfig, SvmParams,
};
use spoofguard_core::Matrix;

fn toy(seed: u64, n: usize, separable: bool) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let spread = if separable { 0.6 } else { 1.8 };
        rows.push([label * 1.0 + rng.gen_range(-spread..spread), rng.gen_range(-1.0..1.0)]);
        y.push(label);
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn solutions_satisfy_kkt_and_equality() {
    for seed in 0..10 {
        for separable in [true, false] {
            let (x, y) = toy(seed, 40, separable);
            let params = SvmParams::new([0.1, 1.0, 10.0][seed as usize % 3], [0.5, 1.0, 4.0][seed as usize % 3]).unwrap();
            let sol = solve(&x, &y, params, &SvmConfig::default()).unwrap();
            assert!(max_kkt_violation(&x, &y, &sol, params) <= 1e-3);
            let eq: f64 = sol.alphas.iter().zip(&y).map(|(a, l)| a * l).sum();
            assert!(eq.abs() < 1e-6);
            assert!(sol.alphas.iter().all(|&a| (0.0..=params.c).contains(&a)));
        }
    }
}

#[test]
fn separable_set_fits_perfectly() {
    let (x, y) = toy(3, 60, true);
    let model = train_svm(&x, &y, SvmParams::new(10.0, 1.0).unwrap(), &SvmConfig::default()).unwrap();
    for (row, label) in x.iter_rows().zip(&y) {
        assert!(model.decision_value(row).unwrap() * label > 0.0);
    }
}

#[test]
fn decision_matches_naive_expansion() {
    let (x, y) = toy(8, 30, false);
    let params = SvmParams::new(1.0, 2.0).unwrap();
    let model = train_svm(&x, &y, params, &SvmConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let naive: f64 = model
            .support_vectors()
            .iter_rows()
            .zip(model.coef())
            .map(|(s, c)| c * rbf_kernel(s, &p, params.gamma).unwrap())
            .sum::<f64>()
            + model.bias();
        assert!((model.decision_value(&p).unwrap() - naive).abs() < 1e-6);
    }
}

#[test]
fn duplicating_training_points_keeps_decision_function() {
    // separable with C large enough that no multiplier reaches the bound
    let (x, y) = toy(4, 30, true);
    let params = SvmParams::new(1000.0, 1.0).unwrap();
    let cfg = SvmConfig { tol: 1e-10, max_iter: 2_000_000, seed: 0 };
    let once = train_svm(&x, &y, params, &cfg).unwrap();
    let rows: Vec<Vec<f64>> = x.iter_rows().chain(x.iter_rows()).map(<[f64]>::to_vec).collect();
    let x2 = Matrix::from_rows(&rows).unwrap();
    let y2: Vec<f64> = y.iter().chain(&y).copied().collect();
    let twice = train_svm(&x2, &y2, params, &cfg).unwrap();
    for gx in -10..=10 {
        for gy in -5..=5 {
            let p = [gx as f64 * 0.3, gy as f64 * 0.3];
            let (a, b) = (once.decision_value(&p).unwrap(), twice.decision_value(&p).unwrap());
            assert!((a - b).abs() < 1e-6, "{p:?}: {a} vs {b}");
        }
    }
}

#[test]
fn score_and_margin_give_same_eer() {
    let (x, y) = toy(11, 50, false);
    let model = train_svm(&x, &y, SvmParams::new(1.0, 1.0).unwrap(), &SvmConfig::default()).unwrap();
    let (probe, py) = toy(12, 80, false);
    let (mut hm, mut sm, mut hs, mut ss) = (vec![], vec![], vec![], vec![]);
    for (row, l) in probe.iter_rows().zip(&py) {
        let (f, s) = (model.decision_value(row).unwrap(), model.score(row).unwrap());
        if *l > 0.0 {
            hm.push(f);
            hs.push(s);
        } else {
            sm.push(f);
            ss.push(s);
        }
    }
    assert_eq!(compute_eer(&hm, &sm).unwrap().rate, compute_eer(&hs, &ss).unwrap().rate);
    let mut fs: Vec<(f64, f64)> = probe.iter_rows().map(|r| (model.decision_value(r).unwrap(), model.score(r).unwrap())).collect();
    fs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in fs.windows(2) {
        assert!(w[0].1 <= w[1].1);
    }
}

/// Alternating concentric rings 0.15 apart: only a narrow kernel resolves them.
fn rings(seed: u64) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for ring in 0..4 {
        let radius = 0.15 + 0.15 * ring as f64;
        let label = if ring % 2 == 0 { 1.0 } else { -1.0 };
        for _ in 0..25 {
            let a = rng.gen_range(0.0..2.0 * PI);
            let r = radius + rng.gen_range(-0.02..0.02);
            rows.push([r * a.cos(), r * a.sin()]);
            y.push(label);
        }
    }
    (Matrix::from_rows(&rows).unwrap(), y)
}

#[test]
fn interleaved_rings_select_narrow_kernel() {
    let (x, y) = rings(2);
    let result = grid_search(&x, &y, &GridSearchConfig { seed: 4, ..GridSearchConfig::default() }).unwrap();
    assert!(result.best.gamma >= 10.0, "{:?}", result.best);
    // oracle: exhaustive table, every wide-kernel cell is strictly worse
    let best_eer = result.cells.iter().filter_map(|c| c.mean_eer).fold(f64::INFINITY, f64::min);
    for cell in &result.cells {
        if cell.params.gamma < 10.0 {
            if let Some(e) = cell.mean_eer {
                assert!(e > best_eer, "{cell:?}");
            }
        }
    }
    assert_eq!(result.cells.len(), 64);
    let again = grid_search(&x, &y, &GridSearchConfig { seed: 4, ..GridSearchConfig::default() }).unwrap();
    assert_eq!(again.best, result.best);
}

#[test]
fn ties_prefer_smaller_c_then_gamma() {
    // trivially separable: many cells reach zero EER
    let (x, y) = toy(5, 40, true);
    let cfg = GridSearchConfig { c_values: vec![10.0, 1.0, 1.0], gamma_values: vec![1.0, 0.1], ..GridSearchConfig::default() };
    let r = grid_search(&x, &y, &cfg).unwrap();
    assert_eq!(r.cells.len(), 4);
    let zero: Vec<_> = r.cells.iter().filter(|c| c.mean_eer == Some(0.0)).collect();
    assert!(!zero.is_empty());
    assert_eq!(r.best, zero[0].params);
}
