//! Multilayer perceptron with logistic hidden layers and a softmax output,
//! trained by minibatch SGD on categorical cross-entropy.
//!
//! Weights of layer `l` are stored `fan_in x fan_out`, so a batch of row
//! inputs propagates as `Y = act(X W + b)`. The last hidden layer is the
//! bottleneck whose activations serve as learned features.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::features::NormStats;
use crate::label::TargetClass;
use crate::linalg::{gemm, Matrix, Op};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Logistic,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    norm: Option<NormStats>,
    seed: u64,
}

/// Probabilities and bottleneck activations for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub probs: Vec<f64>,
    pub bottleneck: Vec<f64>,
}

/// Gradients of the mean loss, shaped like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 3 {
        return Err(Error::config("network needs an input, at least one hidden layer and an output"));
    }
    if dims.contains(&0) {
        return Err(Error::config("layer widths must be positive"));
    }
    Ok(())
}

impl Mlp {
    /// Glorot-uniform weights, zero biases. `dims` lists every layer width
    /// from input to output.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
                let data = (0..fan_in * fan_out).map(|_| rng.gen_range(-limit..limit)).collect();
                Layer {
                    weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized above"),
                    biases: vec![0.0; fan_out],
                    activation: if i + 1 == n { Activation::Softmax } else { Activation::Logistic },
                }
            })
            .collect();
        Ok(Mlp { layers, norm: None, seed })
    }

    /// The reference architecture: 2688 inputs, hidden widths 1024, 512 and
    /// a 32-unit bottleneck, 3 softmax outputs.
    pub fn reference(seed: u64) -> Self {
        Mlp::new(&reference_dims(), seed).expect("reference dims are valid")
    }

    /// All parameters zero.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let mut m = Mlp::new(dims, 0)?;
        for l in &mut m.layers {
            l.weights.as_mut_slice().fill(0.0);
        }
        Ok(m)
    }

    /// Assembles a model from explicit layers, checking that widths chain,
    /// parameters are finite, hidden layers are logistic and the output is
    /// softmax.
    pub fn from_layers(layers: Vec<Layer>, norm: Option<NormStats>, seed: u64) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::config("network needs at least one hidden layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            check_dim(l.fan_out(), l.biases.len())?;
            if i > 0 {
                check_dim(layers[i - 1].fan_out(), l.fan_in())?;
            }
            let want = if i + 1 == layers.len() { Activation::Softmax } else { Activation::Logistic };
            if l.activation != want {
                return Err(Error::config(format!("layer {i} has activation {:?}, expected {want:?}", l.activation)));
            }
            if !l.weights.as_slice().iter().chain(&l.biases).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("layer {i} has non-finite parameters")));
            }
        }
        if let Some(n) = &norm {
            check_dim(layers[0].fan_in(), n.dim())?;
        }
        Ok(Mlp { layers, norm, seed })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim()];
        d.extend(self.layers.iter().map(Layer::fan_out));
        d
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.layers[self.layers.len() - 2].fan_out()
    }

    pub fn norm_stats(&self) -> Option<&NormStats> {
        self.norm.as_ref()
    }

    pub fn set_norm_stats(&mut self, norm: Option<NormStats>) -> Result<()> {
        if let Some(n) = &norm {
            check_dim(self.input_dim(), n.dim())?;
        }
        self.norm = norm;
        Ok(())
    }

    /// Forward pass on an already-normalized input.
    pub fn forward(&self, input: &[f64]) -> Result<Forward> {
        check_dim(self.input_dim(), input.len())?;
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let (probs, bottleneck) = self.forward_batch(&x)?;
        Ok(Forward { probs: probs.into_vec(), bottleneck: bottleneck.into_vec() })
    }

    /// Forward pass on a batch of already-normalized row inputs; returns
    /// `(probabilities, bottleneck activations)`.
    pub fn forward_batch(&self, inputs: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut acts = self.activations(inputs)?;
        let probs = acts.pop().expect("at least two layers");
        let bottleneck = acts.pop().expect("at least two layers");
        Ok((probs, bottleneck))
    }

    /// Per-layer outputs for a batch, excluding the input itself.
    fn activations(&self, inputs: &Matrix) -> Result<Vec<Matrix>> {
        check_dim(self.input_dim(), inputs.cols())?;
        if !inputs.as_slice().iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("non-finite network input"));
        }
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let prev = acts.last().unwrap_or(inputs);
            let mut z = Matrix::zeros(prev.rows(), layer.fan_out());
            for r in 0..z.rows() {
                z.row_mut(r).copy_from_slice(&layer.biases);
            }
            gemm(1.0, prev, Op::N, &layer.weights, Op::N, 1.0, &mut z);
            for r in 0..z.rows() {
                let row = z.row_mut(r);
                match layer.activation {
                    Activation::Logistic => row.iter_mut().for_each(|v| *v = math::logistic(*v)),
                    Activation::Softmax => math::softmax(row),
                }
            }
            acts.push(z);
        }
        Ok(acts)
    }

    /// Error signal at every layer's pre-activation for the mean
    /// cross-entropy over the batch.
    fn deltas(&self, acts: &[Matrix], targets: &Matrix) -> Vec<Matrix> {
        let batch = targets.rows() as f64;
        let n = self.layers.len();
        let mut deltas: Vec<Matrix> = Vec::with_capacity(n);
        let mut out = acts[n - 1].clone();
        for (d, t) in out.as_mut_slice().iter_mut().zip(targets.as_slice()) {
            *d = (*d - t) / batch;
        }
        deltas.push(out);
        for l in (1..n).rev() {
            let next = deltas.last().expect("pushed above");
            let act = &acts[l - 1];
            let mut d = Matrix::zeros(next.rows(), self.layers[l].fan_in());
            gemm(1.0, next, Op::N, &self.layers[l].weights, Op::T, 0.0, &mut d);
            for (dv, &y) in d.as_mut_slice().iter_mut().zip(act.as_slice()) {
                *dv *= y * (1.0 - y);
            }
            deltas.push(d);
        }
        deltas.reverse();
        deltas
    }

    /// Gradients of the mean loss over a batch of normalized inputs.
    pub fn batch_gradients(&self, inputs: &Matrix, targets: &Matrix) -> Result<(Gradients, f64)> {
        check_dim(inputs.rows(), targets.rows())?;
        check_dim(self.output_dim(), targets.cols())?;
        let acts = self.activations(inputs)?;
        let loss_sum = batch_loss(&acts[acts.len() - 1], targets);
        let deltas = self.deltas(&acts, targets);
        let mut weights = Vec::with_capacity(self.layers.len());
        let mut biases = Vec::with_capacity(self.layers.len());
        for (l, delta) in deltas.iter().enumerate() {
            let prev = if l == 0 { inputs } else { &acts[l - 1] };
            let mut gw = Matrix::zeros(prev.cols(), delta.cols());
            gemm(1.0, prev, Op::T, delta, Op::N, 0.0, &mut gw);
            weights.push(gw);
            biases.push(column_sums(delta));
        }
        Ok((Gradients { weights, biases }, loss_sum / inputs.rows() as f64))
    }

    /// Gradients of the cross-entropy for one normalized input.
    pub fn backward(&self, input: &[f64], target: &[f64]) -> Result<Gradients> {
        check_dim(self.input_dim(), input.len())?;
        let x = Matrix::from_vec(1, input.len(), input.to_vec())?;
        let t = Matrix::from_vec(1, target.len(), target.to_vec())?;
        Ok(self.batch_gradients(&x, &t)?.0)
    }

    /// One SGD step on a batch; returns the summed batch loss before the step.
    fn sgd_step(&mut self, inputs: &Matrix, targets: &Matrix, lr: f64) -> Result<f64> {
        let acts = self.activations(inputs)?;
        let loss_sum = batch_loss(&acts[acts.len() - 1], targets);
        let deltas = self.deltas(&acts, targets);
        for (l, delta) in deltas.iter().enumerate() {
            let prev = if l == 0 { inputs } else { &acts[l - 1] };
            let layer = &mut self.layers[l];
            gemm(-lr, prev, Op::T, delta, Op::N, 1.0, &mut layer.weights);
            for (b, g) in layer.biases.iter_mut().zip(column_sums(delta)) {
                *b -= lr * g;
            }
        }
        Ok(loss_sum)
    }

    fn normalized(&self, stacked: &Matrix) -> Result<Matrix> {
        let mut x = stacked.clone();
        if let Some(n) = &self.norm {
            n.apply_rows(&mut x)?;
        }
        Ok(x)
    }

    /// Bottleneck activations for every row of one file's stacked features.
    /// Inputs are raw; the model's own normalization is applied.
    pub fn extract_bottleneck(&self, stacked: &Matrix) -> Result<Matrix> {
        if stacked.rows() == 0 {
            return Err(Error::Empty("no frames in file"));
        }
        Ok(self.forward_batch(&self.normalized(stacked)?)?.1)
    }

    /// Human-class probability of every row of one file's stacked features.
    pub fn score_frames(&self, stacked: &Matrix) -> Result<Vec<f64>> {
        if stacked.rows() == 0 {
            return Err(Error::Empty("no frames in file"));
        }
        let (probs, _) = self.forward_batch(&self.normalized(stacked)?)?;
        Ok(probs.iter_rows().map(|r| r[TargetClass::Human.index()]).collect())
    }
}

pub fn reference_dims() -> Vec<usize> {
    let mut d = vec![crate::STACKED_DIM];
    d.extend_from_slice(&crate::HIDDEN_LAYERS);
    d.push(crate::NUM_CLASSES);
    d
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut s = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (a, b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    s
}

/// Floor applied to probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy `-Σ t_j ln p_j`.
pub fn loss(probs: &[f64], target: &[f64]) -> Result<f64> {
    check_dim(probs.len(), target.len())?;
    // NaN must survive the floor so divergence is detectable
    let floored = |p: f64| if p.is_nan() { p } else { p.max(PROB_FLOOR) };
    Ok(probs.iter().zip(target).map(|(&p, &t)| if t == 0.0 { 0.0 } else { -t * math::ln(floored(p)) }).sum())
}

fn batch_loss(probs: &Matrix, targets: &Matrix) -> f64 {
    probs
        .iter_rows()
        .zip(targets.iter_rows())
        .map(|(p, t)| loss(p, t).expect("shapes checked by caller"))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop after this many epochs without improvement of the monitored
    /// loss; 0 disables early stopping.
    pub patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, batch_size: 64, epochs: 100, seed: 0, shuffle: true, patience: 10 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be finite and non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Inputs (already normalized) with their target classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Matrix,
    pub targets: Vec<TargetClass>,
}

impl Dataset {
    pub fn new(inputs: Matrix, targets: Vec<TargetClass>) -> Result<Self> {
        check_dim(inputs.rows(), targets.len())?;
        Ok(Dataset { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    fn target_matrix(&self, rows: &[usize]) -> Matrix {
        let mut t = Matrix::zeros(rows.len(), crate::NUM_CLASSES);
        for (r, &i) in rows.iter().enumerate() {
            t.set(r, self.targets[i].index(), 1.0);
        }
        t
    }
}

/// Mean cross-entropy of `model` over a dataset, evaluated in chunks.
pub fn mean_loss(model: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(256) {
        let x = data.inputs.select_rows(chunk);
        let (p, _) = model.forward_batch(&x)?;
        total += batch_loss(&p, &data.target_matrix(chunk));
    }
    Ok(total / data.len() as f64)
}

/// Fraction of rows whose arg-max output is the target class.
pub fn accuracy(model: &Mlp, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let (p, _) = model.forward_batch(&data.inputs)?;
    let hits = p
        .iter_rows()
        .zip(&data.targets)
        .filter(|(row, t)| {
            let best = row.iter().enumerate().fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
            best == t.index()
        })
        .count();
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch loss seen during the epoch.
    pub train_loss: f64,
    /// Loss used for model selection: dev loss when a dev set is given,
    /// otherwise the full training loss after the epoch.
    pub monitor_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub best_epoch: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub history: Vec<EpochRecord>,
}

/// Minibatch SGD from `model`'s current parameters. Returns the snapshot
/// with the lowest monitored loss (epoch 0 is the starting point).
pub fn train(model: Mlp, data: &Dataset, dev: Option<&Dataset>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    check_dim(model.input_dim(), data.inputs.cols())?;
    check_dim(crate::NUM_CLASSES, model.output_dim())?;
    for class in TargetClass::ALL {
        if !data.targets.contains(&class) {
            return Err(Error::invalid(format!("training set has no examples of class {class:?}")));
        }
    }
    if let Some(d) = dev {
        check_dim(model.input_dim(), d.inputs.cols())?;
    }

    let monitor = |m: &Mlp| match dev {
        Some(d) if !d.is_empty() => mean_loss(m, d),
        _ => mean_loss(m, data),
    };

    let initial_train_loss = mean_loss(&model, data)?;
    let mut best_loss = monitor(&model)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut current = model;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::new();

    for epoch in 1..=cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = data.inputs.select_rows(batch);
            let t = data.target_matrix(batch);
            let l = current.sgd_step(&x, &t, cfg.learning_rate)?;
            if !l.is_finite() {
                return Err(Error::TrainingFailure { epoch, reason: "non-finite minibatch loss".into() });
            }
            epoch_loss += l;
        }
        let monitor_loss = monitor(&current)?;
        if !monitor_loss.is_finite() {
            return Err(Error::TrainingFailure { epoch, reason: "non-finite monitored loss".into() });
        }
        history.push(EpochRecord { epoch, train_loss: epoch_loss / data.len() as f64, monitor_loss });
        if monitor_loss < best_loss {
            best_loss = monitor_loss;
            best = current.clone();
            best_epoch = epoch;
            since_best = 0;
        } else {
            since_best += 1;
            if cfg.patience > 0 && since_best >= cfg.patience {
                break;
            }
        }
    }

    let final_train_loss = mean_loss(&best, data)?;
    Ok(TrainOutcome { model: best, best_epoch, initial_train_loss, final_train_loss, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Mlp {
        // 2 -> 2 -> 2
        let l1 = Layer {
            weights: Matrix::from_vec(2, 2, vec![0.5, -1.0, 2.0, 0.25]).unwrap(),
            biases: vec![0.1, -0.2],
            activation: Activation::Logistic,
        };
        let l2 = Layer {
            weights: Matrix::from_vec(2, 2, vec![1.0, -1.0, -0.5, 0.5]).unwrap(),
            biases: vec![0.0, 0.3],
            activation: Activation::Softmax,
        };
        Mlp::from_layers(vec![l1, l2], None, 0).unwrap()
    }

    #[test]
    fn hand_evaluated_toy_network() {
        let x = [1.0, -0.5];
        // hidden pre-activations: b + x W
        let h0 = 1.0 / (1.0 + (-(0.1 + 1.0 * 0.5 + -0.5 * 2.0f64)).exp());
        let h1 = 1.0 / (1.0 + (-(-0.2 + 1.0 * -1.0 + -0.5 * 0.25f64)).exp());
        let o0 = 0.0 + h0 * 1.0 + h1 * -0.5;
        let o1 = 0.3 + h0 * -1.0 + h1 * 0.5;
        let p0 = o0.exp() / (o0.exp() + o1.exp());
        let f = toy().forward(&x).unwrap();
        assert!((f.probs[0] - p0).abs() < 1e-12);
        assert!((f.probs[1] - (1.0 - p0)).abs() < 1e-12);
        assert!((f.bottleneck[0] - h0).abs() < 1e-12);
        assert!((f.bottleneck[1] - h1).abs() < 1e-12);
    }

    #[test]
    fn zero_network_is_uniform() {
        let m = Mlp::zeros(&[6, 5, 4, 3]).unwrap();
        let f = m.forward(&[0.3, -1.0, 2.0, 0.0, 1.0, 4.0]).unwrap();
        assert!(f.bottleneck.iter().all(|&v| v == 0.5));
        for p in f.probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let m = Mlp::zeros(&[4, 3, 3]).unwrap();
        assert_eq!(m.forward(&[0.0; 5]).unwrap_err(), Error::Shape { expected: 4, actual: 5 });
        assert!(matches!(m.forward(&[0.0, f64::NAN, 0.0, 0.0]), Err(Error::Invalid(_))));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(loss(&[0.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.0);
        let u = 1.0 / 3.0;
        for t in TargetClass::ALL {
            assert!((loss(&[u, u, u], &t.one_hot()).unwrap() - 3f64.ln()).abs() < 1e-12);
        }
        let p = [0.2, 0.7, 0.1];
        assert_eq!(loss(&p, &[0.0, 0.0, 1.0]).unwrap(), -(0.1f64.ln()));
        // floor keeps log(0) finite
        assert_eq!(loss(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), -(PROB_FLOOR.ln()));
    }

    #[test]
    fn zero_input_gives_zero_first_layer_weight_gradients() {
        let m = Mlp::new(&[6, 5, 4, 3], 3).unwrap();
        let g = m.backward(&[0.0; 6], &[0.0, 1.0, 0.0]).unwrap();
        assert!(g.weights[0].as_slice().iter().all(|&v| v == 0.0));
        assert!(g.biases[0].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn perfect_prediction_has_zero_gradient() {
        // output weights zero and biases pinning p to the target (up to
        // rounding) is not exactly reachable, so use the definitional delta:
        // when the target equals p itself the output error vanishes.
        let m = Mlp::new(&[4, 3, 3], 9).unwrap();
        let x = [0.5, -0.2, 0.1, 0.9];
        let p = m.forward(&x).unwrap().probs;
        let g = m.backward(&x, &p).unwrap();
        for w in g.weights.iter().flat_map(|w| w.as_slice()).chain(g.biases.iter().flatten()) {
            assert!(w.abs() < 1e-16, "{w}");
        }
    }

    #[test]
    fn reference_architecture() {
        let m = Mlp::reference(1);
        assert_eq!(m.dims(), vec![2688, 1024, 512, 32, 3]);
        assert_eq!(m.bottleneck_dim(), 32);
        assert_eq!(m.layers().last().unwrap().activation, Activation::Softmax);
    }

    #[test]
    fn from_layers_checks_chain() {
        let mut layers = toy().layers().to_vec();
        layers[1].weights = Matrix::zeros(3, 2);
        assert!(from_layers_err(layers));
        let mut layers = toy().layers().to_vec();
        layers[0].activation = Activation::Softmax;
        assert!(from_layers_err(layers));
        let mut layers = toy().layers().to_vec();
        layers[0].biases[0] = f64::INFINITY;
        assert!(from_layers_err(layers));
    }

    fn from_layers_err(layers: Vec<Layer>) -> bool {
        Mlp::from_layers(layers, None, 0).is_err()
    }

    #[test]
    fn empty_file_errors() {
        let m = Mlp::zeros(&[4, 3, 3]).unwrap();
        assert!(matches!(m.extract_bottleneck(&Matrix::zeros(0, 4)), Err(Error::Empty(_))));
        assert!(matches!(m.score_frames(&Matrix::zeros(0, 4)), Err(Error::Empty(_))));
    }

    #[test]
    fn train_requires_every_class() {
        let x = Matrix::zeros(4, 4);
        let d = Dataset::new(x, vec![TargetClass::Human, TargetClass::S1, TargetClass::S1, TargetClass::Human]).unwrap();
        let err = train(Mlp::new(&[4, 3, 3], 0).unwrap(), &d, None, &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
    }

    #[test]
    fn divergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 30;
        let x = Matrix::from_vec(n, 4, (0..n * 4).map(|_| rng.gen_range(-1e3..1e3)).collect()).unwrap();
        let targets = (0..n).map(|i| TargetClass::ALL[i % 3]).collect();
        let d = Dataset::new(x, targets).unwrap();
        let cfg = TrainConfig { learning_rate: f64::MAX, epochs: 5, ..TrainConfig::default() };
        let err = train(Mlp::new(&[4, 8, 3], 1).unwrap(), &d, None, &cfg).unwrap_err();
        assert!(matches!(err, Error::TrainingFailure { epoch: 1..=5, .. }), "{err:?}");
    }
}
