//! Binary soft-margin SVM with an RBF kernel, trained by SMO, plus
//! stratified k-fold grid search over `(C, gamma)` minimizing mean EER.
//!
//! Labels are `+1` for human and `-1` for spoof.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::eval::compute_eer;
use crate::linalg::{squared_distance, Matrix};
use crate::math;

/// Values searched for both `C` and `gamma`.
pub const GRID_VALUES: [f64; 8] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: f64,
}

impl SvmParams {
    pub fn new(c: f64, gamma: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite() && gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config(format!("C and gamma must be positive, got C={c}, gamma={gamma}")));
        }
        Ok(SvmParams { c, gamma })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmConfig {
    /// Stop when the maximal KKT violation `m(a) - M(a)` drops below this.
    pub tol: f64,
    /// Pair updates before giving up.
    pub max_iter: usize,
    /// Seeds the scan order used to break ties in working-set selection.
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig { tol: 1e-3, max_iter: 100_000, seed: 0 }
    }
}

pub fn rbf_kernel(x: &[f64], z: &[f64], gamma: f64) -> Result<f64> {
    check_dim(x.len(), z.len())?;
    if !(gamma > 0.0) {
        return Err(Error::config("gamma must be positive"));
    }
    Ok(math::exp(-gamma * squared_distance(x, z)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_vectors: Matrix,
    /// `alpha_i * y_i` for each stored support vector.
    coef: Vec<f64>,
    bias: f64,
    params: SvmParams,
}

impl SvmModel {
    pub fn new(support_vectors: Matrix, coef: Vec<f64>, bias: f64, params: SvmParams) -> Result<Self> {
        check_dim(support_vectors.rows(), coef.len())?;
        if !bias.is_finite() || coef.iter().chain(support_vectors.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite SVM parameters"));
        }
        SvmParams::new(params.c, params.gamma)?;
        Ok(SvmModel { support_vectors, coef, bias, params })
    }

    pub fn support_vectors(&self) -> &Matrix {
        &self.support_vectors
    }

    pub fn coef(&self) -> &[f64] {
        &self.coef
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn params(&self) -> SvmParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    /// `f(x) = Σ α_i y_i k(s_i, x) + b`
    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let sum: f64 = self
            .support_vectors
            .iter_rows()
            .zip(&self.coef)
            .map(|(s, c)| c * math::exp(-self.params.gamma * squared_distance(s, x)))
            .sum();
        Ok(sum + self.bias)
    }

    /// Margin squashed into `(0, 1)` with the logistic function; higher
    /// means more likely human.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(math::logistic(self.decision_value(x)?))
    }
}

/// Dual solution over the full training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    /// One multiplier per training vector, in `[0, C]`.
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

fn validate_labels(labels: &[f64]) -> Result<()> {
    if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
        return Err(Error::invalid("SVM labels must be +1 or -1"));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::invalid("SVM training needs both classes"));
    }
    Ok(())
}

/// Trains on `vectors` (one per row) with labels `±1`.
pub fn train_svm(vectors: &Matrix, labels: &[f64], params: SvmParams, cfg: &SvmConfig) -> Result<SvmModel> {
    let sol = solve(vectors, labels, params, cfg)?;
    Ok(model_from_solution(vectors, labels, &sol, params))
}

/// Runs SMO and returns every multiplier, for inspection of the optimum.
pub fn solve(vectors: &Matrix, labels: &[f64], params: SvmParams, cfg: &SvmConfig) -> Result<SvmSolution> {
    check_dim(vectors.rows(), labels.len())?;
    validate_labels(labels)?;
    SvmParams::new(params.c, params.gamma)?;
    if !vectors.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite training vector"));
    }
    let kernel = kernel_matrix(&pairwise_sq_dist(vectors), params.gamma);
    smo(&kernel, labels, params.c, cfg)
}

fn model_from_solution(vectors: &Matrix, labels: &[f64], sol: &SvmSolution, params: SvmParams) -> SvmModel {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| sol.alphas[i] > 0.0).collect();
    SvmModel {
        support_vectors: vectors.select_rows(&idx),
        coef: idx.iter().map(|&i| sol.alphas[i] * labels[i]).collect(),
        bias: sol.bias,
        params,
    }
}

fn pairwise_sq_dist(vectors: &Matrix) -> Matrix {
    let n = vectors.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let v = squared_distance(vectors.row(i), vectors.row(j));
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    d
}

fn kernel_matrix(sq_dist: &Matrix, gamma: f64) -> Matrix {
    let mut k = sq_dist.clone();
    k.as_mut_slice().iter_mut().for_each(|v| *v = math::exp(-gamma * *v));
    k
}

// libsvm's guard for non-positive curvature along the update direction
const TAU: f64 = 1e-12;

/// SMO with maximal-violating-pair working-set selection on a
/// precomputed kernel matrix.
fn smo(kernel: &Matrix, y: &[f64], c: f64, cfg: &SvmConfig) -> Result<SvmSolution> {
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα - eᵀα with Q_ij = y_i y_j K_ij
    let mut grad = vec![-1.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    loop {
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for &t in &order {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < cfg.tol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::TrainingFailure {
                epoch: iterations,
                reason: format!("SMO did not reach tolerance {} (violation {})", cfg.tol, gmax - gmin),
            });
        }
        iterations += 1;

        let (kii, kjj, kij) = (kernel.get(i, i), kernel.get(j, j), kernel.get(i, j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = kii + kjj + 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = kii + kjj - 2.0 * kij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ki, kj) = (kernel.row(i), kernel.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * ki[t] * di + y[j] * kj[t] * dj);
        }
    }

    Ok(SvmSolution { bias: -rho(&alpha, &grad, y, c), alphas: alpha, iterations })
}

/// Offset `rho` (decision is `Σ - rho`): mean of `y_i G_i` over free
/// multipliers, or the middle of the feasible interval when none are free.
fn rho(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum, mut nfree) = (0.0, 0usize);
    for t in 0..y.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nfree += 1;
            sum += yg;
        }
    }
    if nfree > 0 {
        sum / nfree as f64
    } else {
        0.5 * (ub + lb)
    }
}

/// Largest KKT violation of a solution on its training set, measured on
/// the functional margin `y_i f(x_i)`: zero multipliers need `y f >= 1`,
/// free ones `y f = 1`, bounded ones `y f <= 1`.
pub fn max_kkt_violation(vectors: &Matrix, labels: &[f64], sol: &SvmSolution, params: SvmParams) -> f64 {
    let model = model_from_solution(vectors, labels, sol, params);
    let mut worst: f64 = 0.0;
    for (t, x) in vectors.iter_rows().enumerate() {
        let m = labels[t] * model.decision_value(x).expect("dims match training data");
        let a = sol.alphas[t];
        let v = if a <= 0.0 {
            1.0 - m
        } else if a >= params.c {
            m - 1.0
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Stratified fold index for every sample: each class is shuffled with the
/// seeded generator and dealt round-robin across folds.
pub fn stratified_folds(labels: &[f64], folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::config("need at least 2 folds"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    for class in [1.0, -1.0] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < folds {
            return Err(Error::insufficient(format!(
                "class {class:+} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchConfig {
    pub c_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
    pub svm: SvmConfig,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        GridSearchConfig {
            c_values: GRID_VALUES.to_vec(),
            gamma_values: GRID_VALUES.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            svm: SvmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub params: SvmParams,
    /// Mean held-out EER (fraction) over folds; `None` when a fold failed
    /// to train.
    pub mean_eer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best: SvmParams,
    pub cells: Vec<GridCell>,
    /// Retrained on all data with `best`.
    pub model: SvmModel,
}

fn sorted_unique(values: &[f64]) -> Result<Vec<f64>> {
    let mut v = values.to_vec();
    if v.is_empty() || v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::config("grid values must be a non-empty list of positive numbers"));
    }
    v.sort_by(f64::total_cmp);
    v.dedup();
    Ok(v)
}

/// Exhaustive search over the `C x gamma` grid. Cells are visited in
/// ascending `C`, then ascending `gamma`; the first cell with the lowest mean
/// fold EER wins, so ties go to the smaller `C` and then the smaller `gamma`.
pub fn grid_search(vectors: &Matrix, labels: &[f64], cfg: &GridSearchConfig) -> Result<GridSearchResult> {
    check_dim(vectors.rows(), labels.len())?;
    validate_labels(labels)?;
    let cs = sorted_unique(&cfg.c_values)?;
    let gammas = sorted_unique(&cfg.gamma_values)?;
    let fold_of = stratified_folds(labels, cfg.folds, cfg.seed)?;
    let sq = pairwise_sq_dist(vectors);

    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..cfg.folds)
        .map(|f| {
            let train = (0..labels.len()).filter(|&i| fold_of[i] != f).collect();
            let test = (0..labels.len()).filter(|&i| fold_of[i] == f).collect();
            (train, test)
        })
        .collect();

    let mut table = vec![None; cs.len() * gammas.len()];
    for (gi, &gamma) in gammas.iter().enumerate() {
        let kernel = kernel_matrix(&sq, gamma);
        for (ci, &c) in cs.iter().enumerate() {
            table[ci * gammas.len() + gi] = cross_validate(&kernel, labels, &splits, c, &cfg.svm);
        }
    }

    let mut cells = Vec::with_capacity(table.len());
    let mut best: Option<(f64, SvmParams)> = None;
    for (ci, &c) in cs.iter().enumerate() {
        for (gi, &gamma) in gammas.iter().enumerate() {
            let params = SvmParams { c, gamma };
            let mean_eer = table[ci * gammas.len() + gi];
            if let Some(e) = mean_eer {
                if best.is_none_or(|(b, _)| e < b) {
                    best = Some((e, params));
                }
            }
            cells.push(GridCell { params, mean_eer });
        }
    }
    let (_, best) = best.ok_or_else(|| Error::TrainingFailure {
        epoch: 0,
        reason: "no grid cell trained successfully".into(),
    })?;
    let model = train_svm(vectors, labels, best, &cfg.svm)?;
    Ok(GridSearchResult { best, cells, model })
}

fn cross_validate(
    kernel: &Matrix,
    labels: &[f64],
    splits: &[(Vec<usize>, Vec<usize>)],
    c: f64,
    svm: &SvmConfig,
) -> Option<f64> {
    let mut total = 0.0;
    for (train, test) in splits {
        let sub = submatrix(kernel, train, train);
        let y: Vec<f64> = train.iter().map(|&i| labels[i]).collect();
        let sol = smo(&sub, &y, c, svm).ok()?;
        let (mut human, mut spoof) = (Vec::new(), Vec::new());
        for &t in test {
            let f: f64 = train
                .iter()
                .enumerate()
                .filter(|(p, _)| sol.alphas[*p] > 0.0)
                .map(|(p, &i)| sol.alphas[p] * y[p] * kernel.get(t, i))
                .sum::<f64>()
                + sol.bias;
            if labels[t] > 0.0 {
                human.push(f);
            } else {
                spoof.push(f);
            }
        }
        total += compute_eer(&human, &spoof).ok()?.rate;
    }
    Some(total / splits.len() as f64)
}

fn submatrix(m: &Matrix, rows: &[usize], cols: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(rows.len(), cols.len());
    for (r, &i) in rows.iter().enumerate() {
        let src = m.row(i);
        for (c, &j) in cols.iter().enumerate() {
            out.set(r, c, src[j]);
        }
    }
    out
}
