//! Mini-batch SGD training.
//!
//! Every step updates `α`, `b`, the raw mixing weights and, unless frozen,
//! the virtual support vectors. The loss term of a mini-batch is scaled by
//! `n / |batch|` so the step objective estimates the full-data objective;
//! the regulariser is always evaluated in full.
//!
//! The learning rate adapts once per epoch from the epoch-mean objective:
//! when the objective changed faster than in the previous epoch the rate is
//! multiplied by `lr_decay`, otherwise divided by it, then clamped.

use std::io::Write;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::{squared_distance, Matrix};
use crate::net::{ActivationMode, DeepKernelNet, NetError, DEFAULT_LEAK_SLOPE};
use crate::svm::{
    Classifier, Head, KernelMachine, ModelError, MulticlassModel, ObjectiveBreakdown, TvSvmModel,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid training data: {0}")]
    Data(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// How the virtual support vectors are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitMethod {
    /// Training rows plus small Gaussian jitter.
    #[default]
    SubsampleJitter,
    /// Lloyd's k-means centroids.
    KMeans,
    /// Uniform within the per-dimension data range.
    UniformRandom,
}

impl std::str::FromStr for InitMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "SubsampleJitter" | "subsample" => Ok(InitMethod::SubsampleJitter),
            "KMeans" | "kmeans" => Ok(InitMethod::KMeans),
            "UniformRandom" | "uniform" => Ok(InitMethod::UniformRandom),
            other => Err(format!("unknown init `{other}` (expected subsample, kmeans or uniform)")),
        }
    }
}

const KMEANS_ITERATIONS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Loss weight `C`.
    pub c: f64,
    /// Number of virtual support vectors `N`.
    pub n_svs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub lr_min: f64,
    pub lr_max: f64,
    pub seed: u64,
    pub init: InitMethod,
    /// Jitter standard deviation as a fraction of each dimension's std.
    pub jitter: f64,
    pub freeze_svs: bool,
    pub activation: ActivationMode,
    pub leak_slope: f64,
    pub kernels: Vec<KernelSpec>,
    /// Widths of the combining layers, ending with the single output unit.
    /// Empty means no combining layer (one kernel only).
    pub mkl_layers: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            n_svs: 10,
            epochs: 1000,
            batch_size: 50,
            lr0: 0.01,
            lr_decay: 0.99,
            lr_min: 1e-6,
            lr_max: 1.0,
            seed: 0,
            init: InitMethod::SubsampleJitter,
            jitter: 0.01,
            freeze_svs: false,
            activation: ActivationMode::ExactLeakyRelu,
            leak_slope: DEFAULT_LEAK_SLOPE,
            kernels: vec![KernelSpec::Gaussian { beta: 1.0 }, KernelSpec::Linear],
            mkl_layers: vec![8, 1],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.c > 0.0 && self.c.is_finite()) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if self.n_svs == 0 {
            return bad("need at least one virtual support vector".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        if !(self.lr_decay > 0.0 && self.lr_decay < 1.0) {
            return bad(format!("lr_decay must lie in (0, 1), got {}", self.lr_decay));
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr0 && self.lr0 <= self.lr_max && self.lr_max.is_finite()) {
            return bad(format!(
                "need 0 < lr_min <= lr0 <= lr_max, got {} / {} / {}",
                self.lr_min, self.lr0, self.lr_max
            ));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return bad(format!("jitter must be non-negative, got {}", self.jitter));
        }
        if self.kernels.is_empty() {
            return bad("no kernels".into());
        }
        for k in &self.kernels {
            k.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        }
        self.build_net()?;
        Ok(())
    }

    /// Fresh network for this configuration, with zero raw weights.
    pub fn build_net(&self) -> Result<DeepKernelNet> {
        if self.mkl_layers.is_empty() {
            if self.kernels.len() != 1 {
                return Err(TrainError::Config(format!(
                    "no combining layer requires exactly one kernel, got {}",
                    self.kernels.len()
                )));
            }
            let mut net = DeepKernelNet::passthrough();
            net.set_mode(self.activation);
            return Ok(net);
        }
        let mut sizes = vec![self.kernels.len()];
        sizes.extend_from_slice(&self.mkl_layers);
        Ok(DeepKernelNet::new(sizes, self.leak_slope, self.activation)?)
    }

    fn uses_histogram(&self) -> bool {
        self.kernels.iter().any(|k| k.family() == KernelFamily::HistogramIntersection)
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the mini-batch objectives over the epoch.
    pub objective: ObjectiveBreakdown,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub wall_clock_secs: f64,
    /// Set when the objective became non-finite; `model` is then the last
    /// model seen at the end of a finite epoch.
    pub diverged: bool,
    pub model: Classifier,
}

impl TrainReport {
    pub fn final_train_accuracy(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_accuracy)
    }

    /// `epoch,J_total,J_reg,J_loss,lr,train_acc,val_acc`, one line per epoch.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "epoch,J_total,J_reg,J_loss,lr,train_acc,val_acc")?;
        for e in &self.epochs {
            let val = e.val_accuracy.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.epoch,
                e.objective.total,
                e.objective.regularizer,
                e.objective.loss,
                e.lr,
                e.train_accuracy,
                val
            )?;
        }
        Ok(())
    }
}

/// Adaptive learning-rate rule over the last three epoch objectives.
///
/// With fewer than three entries the rate is returned unchanged.
pub fn lr_update(lr: f64, history: &[f64], decay: f64, lr_min: f64, lr_max: f64) -> f64 {
    let [.., a, b, c] = history else {
        return lr;
    };
    let previous = (b - a).abs();
    let current = (c - b).abs();
    let next = if current > previous { lr * decay } else { lr / decay };
    next.clamp(lr_min, lr_max)
}

fn init_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn shuffle_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn column_stats(x: &Matrix) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = x.cols();
    let n = x.rows() as f64;
    let mut mean = vec![0.0; d];
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in x.iter_rows() {
        for (k, &v) in row.iter().enumerate() {
            mean[k] += v / n;
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    let mut std = vec![0.0; d];
    for row in x.iter_rows() {
        for (k, &v) in row.iter().enumerate() {
            std[k] += (v - mean[k]).powi(2) / n;
        }
    }
    (std.into_iter().map(f64::sqrt).collect(), lo, hi)
}

fn sample_rows(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if k <= n {
        index::sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    }
}

fn kmeans(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let seeds = sample_rows(x.rows(), k, rng);
    let mut centres = Matrix::from_fn(k, x.cols(), |i, d| x[(seeds[i], d)]);
    let mut assignment = vec![0usize; x.rows()];
    for _ in 0..KMEANS_ITERATIONS {
        for (i, row) in x.iter_rows().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centre) in centres.iter_rows().enumerate() {
                let d = squared_distance(row, centre);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignment[i] = best;
        }
        let mut sums = Matrix::zeros(k, x.cols());
        let mut counts = vec![0usize; k];
        for (row, &c) in x.iter_rows().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums.row_mut(c).iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut moved = false;
        for c in 0..k {
            // Empty clusters keep their previous centre.
            if counts[c] == 0 {
                continue;
            }
            for (dst, s) in centres.row_mut(c).iter_mut().zip(sums.row(c)) {
                let v = s / counts[c] as f64;
                moved |= v != *dst;
                *dst = v;
            }
        }
        if !moved {
            break;
        }
    }
    centres
}

fn init_support(x: &Matrix, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Matrix {
    let (n, d, k) = (x.rows(), x.cols(), config.n_svs);
    let mut z = match config.init {
        InitMethod::SubsampleJitter => {
            let rows = sample_rows(n, k, rng);
            let mut z = Matrix::from_fn(k, d, |i, c| x[(rows[i], c)]);
            if config.jitter > 0.0 {
                let (std, _, _) = column_stats(x);
                for i in 0..k {
                    for (c, v) in z.row_mut(i).iter_mut().enumerate() {
                        let scale = config.jitter * std[c];
                        if scale > 0.0 {
                            *v += Normal::new(0.0, scale).expect("valid std").sample(rng);
                        }
                    }
                }
            }
            z
        }
        InitMethod::KMeans => kmeans(x, k, rng),
        InitMethod::UniformRandom => {
            let (_, lo, hi) = column_stats(x);
            Matrix::from_fn(k, d, |_, c| {
                if hi[c] > lo[c] {
                    rng.random_range(lo[c]..hi[c])
                } else {
                    lo[c]
                }
            })
        }
    };
    if config.uses_histogram() {
        for v in z.as_mut_slice() {
            *v = v.clamp(0.0, 1.0);
        }
    }
    z
}

fn init_head(n: usize, rng: &mut ChaCha8Rng) -> Head {
    Head {
        alpha: (0..n).map(|_| rng.random_range(-0.01..0.01)).collect(),
        bias: 0.0,
    }
}

fn check_dataset(dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return Err(TrainError::Data("empty training set".into()));
    }
    if !dataset.is_binary() && dataset.classes().len() < 2 {
        return Err(TrainError::Data("need at least two classes".into()));
    }
    Ok(())
}

/// Initial model for `dataset`. Labels in {−1, +1} give a binary model,
/// anything else a one-vs-rest model over the sorted distinct labels.
pub fn init_model(dataset: &Dataset, config: &TrainConfig) -> Result<Classifier> {
    config.validate()?;
    check_dataset(dataset)?;
    let mut rng = init_rng(config.seed);
    let support = init_support(&dataset.x, config, &mut rng);
    let machine = KernelMachine::new(support, config.kernels.clone(), config.build_net()?, config.freeze_svs)?;
    if dataset.is_binary() {
        let head = init_head(config.n_svs, &mut rng);
        Ok(Classifier::Binary(TvSvmModel::new(machine, head.alpha, head.bias)?))
    } else {
        let classes = dataset.classes();
        let heads = classes.iter().map(|_| init_head(config.n_svs, &mut rng)).collect();
        Ok(Classifier::Multiclass(MulticlassModel::new(machine, classes, heads)?))
    }
}

fn params_finite(model: &Classifier) -> bool {
    let m = model.machine();
    let heads_ok = match model {
        Classifier::Binary(b) => b.bias.is_finite() && b.alpha.iter().all(|a| a.is_finite()),
        Classifier::Multiclass(mc) => mc
            .heads
            .iter()
            .all(|h| h.bias.is_finite() && h.alpha.iter().all(|a| a.is_finite())),
    };
    heads_ok && m.support.all_finite() && m.net.raw_weights().iter().all(Matrix::all_finite)
}

fn is_divergence(err: &ModelError) -> bool {
    use crate::kernel::KernelError;
    matches!(
        err,
        ModelError::NonFinite | ModelError::Kernel(KernelError::NonFinite { .. })
    )
}

/// Trains from [`init_model`] with mini-batch SGD.
pub fn train(dataset: &Dataset, validation: Option<&Dataset>, config: &TrainConfig) -> Result<TrainReport> {
    let start = Instant::now();
    let mut model = init_model(dataset, config)?;
    let mut rng = shuffle_rng(config.seed);
    let n = dataset.len();
    let batch = config.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut lr = config.lr0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut last_good = model.clone();
    let mut diverged = false;

    'epochs: for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = ObjectiveBreakdown::default();
        let mut steps = 0usize;
        for chunk in order.chunks(batch) {
            let part = dataset.subset(chunk);
            let scaled_c = config.c * n as f64 / chunk.len() as f64;
            let (obj, grads) = match model.gradients(&part.x, &part.y, scaled_c) {
                Ok(r) => r,
                Err(e) if is_divergence(&e) => {
                    diverged = true;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            model.apply_gradients(&grads, lr)?;
            sum.regularizer += obj.regularizer;
            sum.loss += obj.loss;
            sum.total += obj.total;
            steps += 1;
        }
        let k = steps as f64;
        let mean = ObjectiveBreakdown {
            regularizer: sum.regularizer / k,
            loss: sum.loss / k,
            total: sum.total / k,
        };
        if !mean.total.is_finite() || !params_finite(&model) {
            diverged = true;
            break;
        }
        let train_accuracy = match model.accuracy(&dataset.x, &dataset.y) {
            Ok(a) => a,
            Err(e) if is_divergence(&e) => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let val_accuracy = match validation {
            Some(v) => Some(model.accuracy(&v.x, &v.y)?),
            None => None,
        };
        epochs.push(EpochRecord {
            epoch,
            objective: mean,
            lr,
            train_accuracy,
            val_accuracy,
        });
        history.push(mean.total);
        lr = lr_update(lr, &history, config.lr_decay, config.lr_min, config.lr_max);
        last_good = model.clone();
    }

    Ok(TrainReport {
        epochs,
        wall_clock_secs: start.elapsed().as_secs_f64(),
        diverged,
        model: if diverged { last_good } else { model },
    })
}
