//! The total variation SVM.
//!
//! A model holds `N` virtual support vectors `Z`, signed coefficients `α`, a
//! bias `b`, the elementary kernels and the combining network. The decision
//! function is `f(x) = Σ_j α_j κ(x, z_j) + b` and the training objective is
//!
//! ```text
//! J = ½ Σ_{i,j} α_i α_j κ(z_i, z_j) + C Σ_i log(1 + exp(1 − y_i f(x_i)))
//! ```
//!
//! where `κ` is the network output over the elementary kernels. The
//! regulariser involves only the support vectors, so evaluating `f` costs
//! `O(N)` kernel evaluations regardless of the training-set size.
//!
//! Multiclass problems are handled one-vs-rest: every class gets its own
//! `(α, b)` head, while `Z`, the kernels and the network are shared.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Normalizer;
use crate::kernel::{
    encode_support, encode_support_derivative, logistic, neural_backward, neural_forward,
    KernelError, KernelFamily, KernelSpec, SupportWeightVector,
};
use crate::linalg::Matrix;
use crate::net::{DeepKernelNet, NetError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("dimension mismatch: model expects {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{samples} samples but {labels} labels")]
    LabelCount { samples: usize, labels: usize },
    #[error("label {0} is not -1 or +1")]
    InvalidLabel(i64),
    #[error("C must be positive and finite, got {0}")]
    InvalidC(f64),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("objective is not finite")]
    NonFinite,
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file: {0}")]
    Format(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Support vectors, kernels and combining network, shared by every head.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMachine {
    /// `N × D` virtual support vectors.
    pub support: Matrix,
    pub kernels: Vec<KernelSpec>,
    pub net: DeepKernelNet,
    /// When set, training never touches `support`.
    pub frozen_support: bool,
}

/// One `(α, b)` decision head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Head {
    pub alpha: Vec<f64>,
    pub bias: f64,
}

/// Value of the objective, split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ObjectiveBreakdown {
    pub regularizer: f64,
    pub loss: f64,
    pub total: f64,
}

/// Gradient of the objective with respect to every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub heads: Vec<Head>,
    /// Zero when the support vectors are frozen.
    pub support: Matrix,
    /// With respect to the raw (pre-softmax) mixing weights.
    pub net: Vec<Matrix>,
}

/// Surrogate hinge loss `log(1 + exp(m))` for margin deficit `m = 1 − y f`.
pub fn surrogate_loss(deficit: f64) -> f64 {
    if deficit > 0.0 {
        deficit + (-deficit).exp().ln_1p()
    } else {
        deficit.exp().ln_1p()
    }
}

/// `sign(f)` with `sign(0) = +1`.
pub fn sign_label(f: f64) -> i64 {
    if f >= 0.0 {
        1
    } else {
        -1
    }
}

struct Encoded {
    /// `[kernel][support vector]`
    weights: Vec<Vec<SupportWeightVector>>,
    /// `dω/dz`, same layout.
    derivs: Vec<Vec<Vec<f64>>>,
}

impl KernelMachine {
    pub fn new(
        support: Matrix,
        kernels: Vec<KernelSpec>,
        net: DeepKernelNet,
        frozen_support: bool,
    ) -> Result<Self> {
        let machine = Self {
            support,
            kernels,
            net,
            frozen_support,
        };
        machine.validate()?;
        Ok(machine)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.rows() == 0 || self.support.cols() == 0 {
            return Err(ModelError::Invalid("need at least one non-empty support vector".into()));
        }
        if !self.support.all_finite() {
            return Err(ModelError::Invalid("non-finite support vector".into()));
        }
        if self.kernels.is_empty() {
            return Err(ModelError::Invalid("no elementary kernels".into()));
        }
        if self.kernels.len() != self.net.n_inputs() {
            return Err(ModelError::Invalid(format!(
                "{} kernels but the network takes {} inputs",
                self.kernels.len(),
                self.net.n_inputs()
            )));
        }
        for k in &self.kernels {
            k.validate()?;
        }
        Ok(())
    }

    pub fn n_support(&self) -> usize {
        self.support.rows()
    }

    pub fn dim(&self) -> usize {
        self.support.cols()
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    fn encode(&self, with_derivs: bool) -> Result<Encoded> {
        let mut weights = Vec::with_capacity(self.kernels.len());
        let mut derivs = Vec::with_capacity(self.kernels.len());
        for spec in &self.kernels {
            let mut w = Vec::with_capacity(self.n_support());
            let mut d = Vec::new();
            for z in self.support.iter_rows() {
                w.push(encode_support(spec, z)?);
                if with_derivs {
                    d.push(encode_support_derivative(spec, z));
                }
            }
            weights.push(w);
            derivs.push(d);
        }
        Ok(Encoded { weights, derivs })
    }

    fn kernel_vector(&self, x: &[f64], enc: &Encoded, j: usize) -> Result<Vec<f64>> {
        self.kernels
            .iter()
            .zip(&enc.weights)
            .map(|(spec, w)| Ok(neural_forward(spec, x, &w[j])?))
            .collect()
    }

    /// Deep kernel values `κ(x, z_j)` for every support vector.
    pub fn kernel_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x.len())?;
        let enc = self.encode(false)?;
        (0..self.n_support())
            .map(|j| Ok(self.net.forward_value(&self.kernel_vector(x, &enc, j)?)?))
            .collect()
    }

    /// Deep kernel between two arbitrary points, through the same factorised
    /// path used for training.
    pub fn deep_kernel(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(z.len())?;
        let kv = self
            .kernels
            .iter()
            .map(|spec| Ok(neural_forward(spec, x, &encode_support(spec, z)?)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.net.forward_value(&kv)?)
    }

    fn backprop_pair(
        &self,
        x: &[f64],
        enc: &Encoded,
        j: usize,
        grad_kv: &[f64],
        grad_x: Option<&mut [f64]>,
        grad_support: &mut Matrix,
        skip_shift_invariant: bool,
    ) -> Result<()> {
        let mut grad_x = grad_x;
        for (q, spec) in self.kernels.iter().enumerate() {
            if skip_shift_invariant && spec.family().is_shift_invariant() {
                continue;
            }
            // At coincident points the cone-shaped kernels (Laplacian, Power
            // with p = 1) have no gradient; 0 is a valid subgradient.
            let (gx, gw) = match neural_backward(spec, x, &enc.weights[q][j], grad_kv[q]) {
                Ok(g) => g,
                Err(KernelError::NonDifferentiable { .. }) => continue,
                Err(e) => return Err(e.into()),
            };
            if let Some(out) = grad_x.as_deref_mut() {
                for (o, g) in out.iter_mut().zip(&gx) {
                    *o += g;
                }
            }
            let dz = &enc.derivs[q][j];
            for ((o, g), d) in grad_support.row_mut(j).iter_mut().zip(&gw).zip(dz) {
                *o += g * d;
            }
        }
        Ok(())
    }

    /// Objective and (optionally) gradients for a set of heads.
    ///
    /// `signs[k][i]` is the ±1 target of head `k` for sample `i`.
    fn evaluate(
        &self,
        heads: &[Head],
        x: &Matrix,
        signs: &[Vec<f64>],
        c: f64,
        want_grads: bool,
    ) -> Result<(ObjectiveBreakdown, Option<Gradients>)> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(ModelError::InvalidC(c));
        }
        self.check_dim(x.cols())?;
        let n_sv = self.n_support();
        for h in heads {
            if h.alpha.len() != n_sv {
                return Err(ModelError::Invalid(format!(
                    "head has {} coefficients for {} support vectors",
                    h.alpha.len(),
                    n_sv
                )));
            }
        }
        let learn_support = want_grads && !self.frozen_support;
        let enc = self.encode(learn_support)?;

        let mut grads = want_grads.then(|| Gradients {
            heads: heads
                .iter()
                .map(|_| Head {
                    alpha: vec![0.0; n_sv],
                    bias: 0.0,
                })
                .collect(),
            support: Matrix::zeros(n_sv, self.dim()),
            net: self.net.zero_grads(),
        });

        // Regulariser over all ordered support-vector pairs.
        let mut regularizer = 0.0;
        for i in 0..n_sv {
            let zi = self.support.row(i);
            for j in 0..n_sv {
                let kv = self.kernel_vector(zi, &enc, j)?;
                let (kij, tape) = self.net.forward(&kv)?;
                let weight: f64 = heads.iter().map(|h| 0.5 * h.alpha[i] * h.alpha[j]).sum();
                regularizer += weight * kij;
                if let Some(g) = grads.as_mut() {
                    for (gh, h) in g.heads.iter_mut().zip(heads) {
                        gh.alpha[i] += 0.5 * h.alpha[j] * kij;
                        gh.alpha[j] += 0.5 * h.alpha[i] * kij;
                    }
                    let grad_kv = self.net.backward_accumulate(&tape, weight, &mut g.net)?;
                    if learn_support {
                        // κ(z_i, z_i) is constant in z_i for shift-invariant kernels.
                        let mut gx = vec![0.0; self.dim()];
                        self.backprop_pair(zi, &enc, j, &grad_kv, Some(&mut gx), &mut g.support, i == j)?;
                        for (o, v) in g.support.row_mut(i).iter_mut().zip(&gx) {
                            *o += v;
                        }
                    }
                }
            }
        }

        let mut loss = 0.0;
        let mut row = vec![0.0; n_sv];
        let mut tapes = Vec::with_capacity(n_sv);
        for (s, xi) in x.iter_rows().enumerate() {
            tapes.clear();
            for (j, slot) in row.iter_mut().enumerate() {
                let kv = self.kernel_vector(xi, &enc, j)?;
                let (kij, tape) = self.net.forward(&kv)?;
                *slot = kij;
                tapes.push(tape);
            }
            let mut upstream = vec![0.0; n_sv];
            for (k, h) in heads.iter().enumerate() {
                let y = signs[k][s];
                let f: f64 = h.alpha.iter().zip(&row).map(|(a, kv)| a * kv).sum::<f64>() + h.bias;
                let deficit = 1.0 - y * f;
                loss += c * surrogate_loss(deficit);
                if let Some(g) = grads.as_mut() {
                    let dldf = -c * y * logistic(deficit);
                    g.heads[k].bias += dldf;
                    for (j, kij) in row.iter().enumerate() {
                        g.heads[k].alpha[j] += dldf * kij;
                        upstream[j] += dldf * h.alpha[j];
                    }
                }
            }
            if let Some(g) = grads.as_mut() {
                for (j, tape) in tapes.iter().enumerate() {
                    let grad_kv = self.net.backward_accumulate(tape, upstream[j], &mut g.net)?;
                    if learn_support {
                        self.backprop_pair(xi, &enc, j, &grad_kv, None, &mut g.support, false)?;
                    }
                }
            }
        }

        let total = regularizer + loss;
        if !total.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok((
            ObjectiveBreakdown {
                regularizer,
                loss,
                total,
            },
            grads,
        ))
    }

    fn apply_shared(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        if !self.frozen_support {
            for (z, g) in self.support.as_mut_slice().iter_mut().zip(grads.support.as_slice()) {
                *z -= lr * g;
            }
            // Histogram intersection is only defined on [0, 1].
            if self.kernels.iter().any(|k| k.family() == KernelFamily::HistogramIntersection) {
                for z in self.support.as_mut_slice() {
                    *z = z.clamp(0.0, 1.0);
                }
            }
        }
        self.net.apply_step(&grads.net, lr)?;
        Ok(())
    }
}

fn binary_signs(y: &[i64], n: usize) -> Result<Vec<Vec<f64>>> {
    if y.len() != n {
        return Err(ModelError::LabelCount {
            samples: n,
            labels: y.len(),
        });
    }
    let signs = y
        .iter()
        .map(|&l| match l {
            1 => Ok(1.0),
            -1 => Ok(-1.0),
            other => Err(ModelError::InvalidLabel(other)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(vec![signs])
}

fn apply_heads(heads: &mut [Head], grads: &[Head], lr: f64) {
    for (h, g) in heads.iter_mut().zip(grads) {
        for (a, ga) in h.alpha.iter_mut().zip(&g.alpha) {
            *a -= lr * ga;
        }
        h.bias -= lr * g.bias;
    }
}

/// Binary TV-SVM with labels in {−1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct TvSvmModel {
    pub machine: KernelMachine,
    pub alpha: Vec<f64>,
    pub bias: f64,
}

impl TvSvmModel {
    pub fn new(machine: KernelMachine, alpha: Vec<f64>, bias: f64) -> Result<Self> {
        machine.validate()?;
        if alpha.len() != machine.n_support() || !alpha.iter().all(|a| a.is_finite()) {
            return Err(ModelError::Invalid("alpha must be finite with one entry per support vector".into()));
        }
        Ok(Self { machine, alpha, bias })
    }

    fn head(&self) -> Head {
        Head {
            alpha: self.alpha.clone(),
            bias: self.bias,
        }
    }

    /// `f(x) = Σ_j α_j κ(x, z_j) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let row = self.machine.kernel_row(x)?;
        Ok(self.alpha.iter().zip(&row).map(|(a, k)| a * k).sum::<f64>() + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        Ok(sign_label(self.decision(x)?))
    }

    pub fn objective(&self, x: &Matrix, y: &[i64], c: f64) -> Result<ObjectiveBreakdown> {
        let signs = binary_signs(y, x.rows())?;
        Ok(self.machine.evaluate(&[self.head()], x, &signs, c, false)?.0)
    }

    /// Objective together with its gradient.
    pub fn gradients(&self, x: &Matrix, y: &[i64], c: f64) -> Result<(ObjectiveBreakdown, Gradients)> {
        let signs = binary_signs(y, x.rows())?;
        let (obj, grads) = self.machine.evaluate(&[self.head()], x, &signs, c, true)?;
        Ok((obj, grads.expect("gradients requested")))
    }

    /// One plain gradient-descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        let mut heads = [self.head()];
        apply_heads(&mut heads, &grads.heads, lr);
        let [h] = heads;
        self.machine.apply_shared(grads, lr)?;
        self.alpha = h.alpha;
        self.bias = h.bias;
        Ok(())
    }
}

/// One-vs-rest multiclass TV-SVM with shared support vectors and network.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassModel {
    pub machine: KernelMachine,
    /// Class labels in head order.
    pub classes: Vec<i64>,
    pub heads: Vec<Head>,
}

impl MulticlassModel {
    pub fn new(machine: KernelMachine, classes: Vec<i64>, heads: Vec<Head>) -> Result<Self> {
        machine.validate()?;
        if classes.len() < 2 || classes.len() != heads.len() {
            return Err(ModelError::Invalid("need one head per class and at least two classes".into()));
        }
        if heads.iter().any(|h| h.alpha.len() != machine.n_support()) {
            return Err(ModelError::Invalid("head size does not match support vectors".into()));
        }
        Ok(Self {
            machine,
            classes,
            heads,
        })
    }

    /// Per-class decision scores in head order.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let row = self.machine.kernel_row(x)?;
        Ok(self
            .heads
            .iter()
            .map(|h| h.alpha.iter().zip(&row).map(|(a, k)| a * k).sum::<f64>() + h.bias)
            .collect())
    }

    /// Highest-scoring class; ties go to the lowest head index.
    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        let scores = self.scores(x)?;
        Ok(self.classes[argmax_first(&scores)])
    }

    fn signs(&self, y: &[i64], n: usize) -> Result<Vec<Vec<f64>>> {
        if y.len() != n {
            return Err(ModelError::LabelCount {
                samples: n,
                labels: y.len(),
            });
        }
        Ok(self
            .classes
            .iter()
            .map(|c| y.iter().map(|l| if l == c { 1.0 } else { -1.0 }).collect())
            .collect())
    }

    /// Sum of the per-head one-vs-rest objectives.
    pub fn objective(&self, x: &Matrix, y: &[i64], c: f64) -> Result<ObjectiveBreakdown> {
        let signs = self.signs(y, x.rows())?;
        Ok(self.machine.evaluate(&self.heads, x, &signs, c, false)?.0)
    }

    pub fn gradients(&self, x: &Matrix, y: &[i64], c: f64) -> Result<(ObjectiveBreakdown, Gradients)> {
        let signs = self.signs(y, x.rows())?;
        let (obj, grads) = self.machine.evaluate(&self.heads, x, &signs, c, true)?;
        Ok((obj, grads.expect("gradients requested")))
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        apply_heads(&mut self.heads, &grads.heads, lr);
        self.machine.apply_shared(grads, lr)
    }
}

pub(crate) fn argmax_first(scores: &[f64]) -> usize {
    let mut best = 0;
    for (k, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = k;
        }
    }
    best
}

/// Either kind of trained model.
#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Binary(TvSvmModel),
    Multiclass(MulticlassModel),
}

impl Classifier {
    pub fn machine(&self) -> &KernelMachine {
        match self {
            Classifier::Binary(m) => &m.machine,
            Classifier::Multiclass(m) => &m.machine,
        }
    }

    pub fn machine_mut(&mut self) -> &mut KernelMachine {
        match self {
            Classifier::Binary(m) => &mut m.machine,
            Classifier::Multiclass(m) => &mut m.machine,
        }
    }

    pub fn classes(&self) -> Vec<i64> {
        match self {
            Classifier::Binary(_) => vec![-1, 1],
            Classifier::Multiclass(m) => m.classes.clone(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<i64> {
        match self {
            Classifier::Binary(m) => m.predict(x),
            Classifier::Multiclass(m) => m.predict(x),
        }
    }

    pub fn objective(&self, x: &Matrix, y: &[i64], c: f64) -> Result<ObjectiveBreakdown> {
        match self {
            Classifier::Binary(m) => m.objective(x, y, c),
            Classifier::Multiclass(m) => m.objective(x, y, c),
        }
    }

    pub fn gradients(&self, x: &Matrix, y: &[i64], c: f64) -> Result<(ObjectiveBreakdown, Gradients)> {
        match self {
            Classifier::Binary(m) => m.gradients(x, y, c),
            Classifier::Multiclass(m) => m.gradients(x, y, c),
        }
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, lr: f64) -> Result<()> {
        match self {
            Classifier::Binary(m) => m.apply_gradients(grads, lr),
            Classifier::Multiclass(m) => m.apply_gradients(grads, lr),
        }
    }

    /// Fraction of rows predicted correctly.
    pub fn accuracy(&self, x: &Matrix, y: &[i64]) -> Result<f64> {
        if x.rows() == 0 {
            return Ok(f64::NAN);
        }
        let mut correct = 0usize;
        for (row, label) in x.iter_rows().zip(y) {
            if self.predict(row)? == *label {
                correct += 1;
            }
        }
        Ok(correct as f64 / x.rows() as f64)
    }
}

pub const MODEL_FORMAT: &str = "tvsvm-model";
pub const MODEL_VERSION: u32 = 1;

/// On-disk model document.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelRecord {
    format: String,
    version: u32,
    kernels: Vec<KernelSpec>,
    net: DeepKernelNet,
    frozen_support: bool,
    /// Row-major, one inner list per virtual support vector.
    support_vectors: Vec<Vec<f64>>,
    classes: Vec<i64>,
    heads: Vec<Head>,
    normalizer: Option<Normalizer>,
}

/// A classifier together with the feature transform it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub classifier: Classifier,
    pub normalizer: Option<Normalizer>,
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        let machine = self.classifier.machine();
        let heads = match &self.classifier {
            Classifier::Binary(m) => vec![Head {
                alpha: m.alpha.clone(),
                bias: m.bias,
            }],
            Classifier::Multiclass(m) => m.heads.clone(),
        };
        let record = ModelRecord {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            kernels: machine.kernels.clone(),
            net: machine.net.clone(),
            frozen_support: machine.frozen_support,
            support_vectors: machine.support.iter_rows().map(<[f64]>::to_vec).collect(),
            classes: self.classifier.classes(),
            heads,
            normalizer: self.normalizer.clone(),
        };
        let mut text = serde_json::to_string_pretty(&record)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: ModelRecord = serde_json::from_str(text)?;
        if rec.format != MODEL_FORMAT {
            return Err(ModelError::Invalid(format!("unknown format `{}`", rec.format)));
        }
        if rec.version != MODEL_VERSION {
            return Err(ModelError::Invalid(format!("unsupported version {}", rec.version)));
        }
        let support = Matrix::from_rows(&rec.support_vectors)
            .ok_or_else(|| ModelError::Invalid("ragged support vectors".into()))?;
        let machine = KernelMachine::new(support, rec.kernels, rec.net, rec.frozen_support)?;
        let classifier = if rec.classes == [-1, 1] && rec.heads.len() == 1 {
            let h = rec.heads.into_iter().next().expect("one head");
            Classifier::Binary(TvSvmModel::new(machine, h.alpha, h.bias)?)
        } else {
            Classifier::Multiclass(MulticlassModel::new(machine, rec.classes, rec.heads)?)
        };
        Ok(Self {
            classifier,
            normalizer: rec.normalizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
