//! Gaussian mixture models fitted by EM, and the human-vs-spoof
//! log-likelihood-ratio scorer built from a pair of them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, solve_lower_in_place, squared_distance, Matrix};
use crate::math::{self, LN_2PI};

/// Component counts of the model-size sweep; 8 is the default.
pub const SWEEP_COMPONENTS: [usize; 7] = [4, 8, 32, 64, 128, 256, 512];
pub const DEFAULT_COMPONENTS: usize = 8;
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Components whose weight falls below this are re-seeded.
pub const COLLAPSE_WEIGHT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceType {
    #[default]
    Diagonal,
    /// Full covariance, regularized by adding the variance floor to the
    /// diagonal.
    Full,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Full(FullCovariance),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullCovariance {
    cov: Matrix,
    chol: Matrix,
    log_det: f64,
}

impl FullCovariance {
    pub fn new(cov: Matrix) -> Result<Self> {
        let chol = cholesky(&cov)?;
        let log_det = 2.0 * (0..chol.rows()).map(|i| math::ln(chol.get(i, i))).sum::<f64>();
        Ok(FullCovariance { cov, chol, log_det })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.cov
    }
}

impl Covariance {
    fn log_density(&self, mean: &[f64], x: &[f64]) -> f64 {
        let d = mean.len() as f64;
        match self {
            Covariance::Diagonal(var) => {
                let mut acc = d * LN_2PI;
                for ((xi, mi), vi) in x.iter().zip(mean).zip(var) {
                    let diff = xi - mi;
                    acc += math::ln(*vi) + diff * diff / vi;
                }
                -0.5 * acc
            }
            Covariance::Full(full) => {
                let mut diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
                solve_lower_in_place(&full.chol, &mut diff);
                let maha: f64 = diff.iter().map(|v| v * v).sum();
                -0.5 * (d * LN_2PI + full.log_det + maha)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub covariance: Covariance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    components: Vec<Component>,
    dim: usize,
}

impl GmmModel {
    /// Checks weights are non-negative and sum to one, shapes agree, and
    /// diagonal variances respect the floor.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let first = components.first().ok_or(Error::Empty("mixture with no components"))?;
        let dim = first.mean.len();
        let mut total = 0.0;
        for c in &components {
            check_dim(dim, c.mean.len())?;
            if !(c.weight >= 0.0) {
                return Err(Error::invalid("mixture weights must be non-negative"));
            }
            total += c.weight;
            match &c.covariance {
                Covariance::Diagonal(v) => {
                    check_dim(dim, v.len())?;
                    if v.iter().any(|&x| !(x >= VARIANCE_FLOOR)) {
                        return Err(Error::invalid("variance below floor"));
                    }
                }
                Covariance::Full(f) => check_dim(dim, f.cov.rows())?,
            }
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        Ok(GmmModel { components, dim })
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn covariance_type(&self) -> CovarianceType {
        match self.components[0].covariance {
            Covariance::Diagonal(_) => CovarianceType::Diagonal,
            Covariance::Full(_) => CovarianceType::Full,
        }
    }

    /// `ln Σ_k w_k N(x; μ_k, Σ_k)`, via log-sum-exp.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let mut terms = Vec::with_capacity(self.components.len());
        self.weighted_log_densities(x, &mut terms);
        Ok(math::log_sum_exp(&terms))
    }

    fn weighted_log_densities(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.components
                .iter()
                .map(|c| math::ln(c.weight) + c.covariance.log_density(&c.mean, x)),
        );
    }

    /// Sum of per-row log-likelihoods.
    pub fn total_log_likelihood(&self, data: &Matrix) -> Result<f64> {
        data.iter_rows().map(|r| self.log_likelihood(r)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmConfig {
    pub components: usize,
    pub max_iter: usize,
    /// Stop once the per-point log-likelihood gain drops below this.
    pub tol: f64,
    pub variance_floor: f64,
    pub covariance: CovarianceType,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            components: DEFAULT_COMPONENTS,
            max_iter: 200,
            tol: 1e-6,
            variance_floor: VARIANCE_FLOOR,
            covariance: CovarianceType::Diagonal,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Total data log-likelihood of each parameter set visited, starting
    /// with the initialization.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
    /// One entry per re-seeded component.
    pub warnings: Vec<String>,
}

/// EM from k-means++ seeded means, global data variance and uniform weights.
pub fn fit_gmm(data: &Matrix, cfg: &GmmConfig) -> Result<GmmFit> {
    let k = cfg.components;
    let n = data.rows();
    let dim = data.cols();
    if k == 0 {
        return Err(Error::config("mixture needs at least one component"));
    }
    if n < k {
        return Err(Error::insufficient(format!("{n} vectors for {k} components")));
    }
    if dim == 0 {
        return Err(Error::config("zero-dimensional data"));
    }
    if !data.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("non-finite training vector"));
    }
    if !(cfg.variance_floor > 0.0) {
        return Err(Error::config("variance floor must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let global_var = column_variance(data, cfg.variance_floor);
    let initial_cov = initial_covariance(&global_var, cfg.covariance)?;
    let components = kmeans_pp(data, k, &mut rng)
        .into_iter()
        .map(|mean| Component { weight: 1.0 / k as f64, mean, covariance: initial_cov.clone() })
        .collect();
    let mut model = GmmModel { components, dim };

    let mut resp = Matrix::zeros(n, k);
    let mut terms = Vec::with_capacity(k);
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut converged = false;

    for iter in 0..cfg.max_iter {
        // E-step
        let mut total = 0.0;
        for (i, x) in data.iter_rows().enumerate() {
            model.weighted_log_densities(x, &mut terms);
            let lse = math::log_sum_exp(&terms);
            total += lse;
            for (r, t) in resp.row_mut(i).iter_mut().zip(&terms) {
                *r = math::exp(t - lse);
            }
        }
        if !total.is_finite() {
            return Err(Error::TrainingFailure { epoch: iter, reason: "non-finite GMM log-likelihood".into() });
        }
        if let Some(&prev) = trace.last() {
            if (total - prev) / (n as f64) < cfg.tol {
                trace.push(total);
                converged = true;
                break;
            }
        }
        trace.push(total);

        // M-step
        for (j, comp) in model.components.iter_mut().enumerate() {
            let nk: f64 = (0..n).map(|i| resp.get(i, j)).sum();
            if nk / (n as f64) < COLLAPSE_WEIGHT {
                let pick = rng.gen_range(0..n);
                comp.mean = data.row(pick).to_vec();
                comp.covariance = initial_cov.clone();
                comp.weight = 1.0 / k as f64;
                warnings.push(format!("iteration {iter}: component {j} collapsed, re-seeded at vector {pick}"));
                continue;
            }
            comp.weight = nk / n as f64;
            let mut mean = vec![0.0; dim];
            for (i, x) in data.iter_rows().enumerate() {
                let r = resp.get(i, j);
                for (m, xv) in mean.iter_mut().zip(x) {
                    *m += r * xv;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            comp.covariance = match cfg.covariance {
                CovarianceType::Diagonal => {
                    let mut var = vec![0.0; dim];
                    for (i, x) in data.iter_rows().enumerate() {
                        let r = resp.get(i, j);
                        for ((v, xv), m) in var.iter_mut().zip(x).zip(&mean) {
                            *v += r * (xv - m) * (xv - m);
                        }
                    }
                    Covariance::Diagonal(var.into_iter().map(|v| (v / nk).max(cfg.variance_floor)).collect())
                }
                CovarianceType::Full => {
                    let mut cov = Matrix::zeros(dim, dim);
                    let mut diff = vec![0.0; dim];
                    for (i, x) in data.iter_rows().enumerate() {
                        let r = resp.get(i, j);
                        for ((d, xv), m) in diff.iter_mut().zip(x).zip(&mean) {
                            *d = xv - m;
                        }
                        for a in 0..dim {
                            for b in 0..=a {
                                let v = cov.get(a, b) + r * diff[a] * diff[b];
                                cov.set(a, b, v);
                            }
                        }
                    }
                    for a in 0..dim {
                        for b in 0..=a {
                            let v = cov.get(a, b) / nk + if a == b { cfg.variance_floor } else { 0.0 };
                            cov.set(a, b, v);
                            cov.set(b, a, v);
                        }
                    }
                    Covariance::Full(FullCovariance::new(cov)?)
                }
            };
            comp.mean = mean;
        }
        let wsum: f64 = model.components.iter().map(|c| c.weight).sum();
        model.components.iter_mut().for_each(|c| c.weight /= wsum);
    }

    Ok(GmmFit { model, log_likelihoods: trace, converged, warnings })
}

fn column_variance(data: &Matrix, floor: f64) -> Vec<f64> {
    let n = data.rows() as f64;
    let dim = data.cols();
    let mut mean = vec![0.0; dim];
    for row in data.iter_rows() {
        mean.iter_mut().zip(row).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for row in data.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    var.into_iter().map(|v| (v / n).max(floor)).collect()
}

fn initial_covariance(var: &[f64], kind: CovarianceType) -> Result<Covariance> {
    Ok(match kind {
        CovarianceType::Diagonal => Covariance::Diagonal(var.to_vec()),
        CovarianceType::Full => {
            let mut m = Matrix::zeros(var.len(), var.len());
            for (i, v) in var.iter().enumerate() {
                m.set(i, i, *v);
            }
            Covariance::Full(FullCovariance::new(m)?)
        }
    })
}

/// k-means++ seeding: first centre uniform, each next one drawn with
/// probability proportional to squared distance from the nearest centre.
fn kmeans_pp(data: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = data.rows();
    let mut centers = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = data.iter_rows().map(|x| squared_distance(x, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (d, x) in d2.iter_mut().zip(data.iter_rows()) {
            *d = d.min(squared_distance(x, &c));
        }
        centers.push(c);
    }
    centers
}

/// Human and spoof mixtures over the same feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPair {
    pub human: GmmModel,
    pub spoof: GmmModel,
}

impl GmmPair {
    pub fn new(human: GmmModel, spoof: GmmModel) -> Result<Self> {
        check_dim(human.dim(), spoof.dim())?;
        Ok(GmmPair { human, spoof })
    }

    pub fn dim(&self) -> usize {
        self.human.dim()
    }

    /// Log-likelihood ratio; positive values favour authentic speech.
    pub fn llr_score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.human.log_likelihood(x)? - self.spoof.log_likelihood(x)?)
    }
}

pub fn llr_score(pair: &GmmPair, x: &[f64]) -> Result<f64> {
    pair.llr_score(x)
}
