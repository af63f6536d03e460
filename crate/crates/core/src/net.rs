//! Deep multiple-kernel combiner.
//!
//! Layer `l` maps the `n_{l−1}` kernel values of the previous layer to `n_l`
//! new kernels, `κ_p^l = g(Σ_q β_{q,p} κ_q^{l−1})`, with `g` a leaky ReLU.
//! The mixing weights of every unit live on the simplex: they are the
//! column-wise softmax of unconstrained parameters `β̂`, so any gradient step
//! on `β̂` keeps `β ≥ 0` and `Σ_q β_{q,p} = 1`.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid layer sizes {0:?}: need n_1 >= 1, every width >= 1 and a single output unit")]
    InvalidLayers(Vec<usize>),
    #[error("leak slope {0} outside (0, 0.5)")]
    InvalidLeakSlope(f64),
    #[error("expected {expected} input kernel values, got {found}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("raw weight shapes do not match the layer sizes")]
    ShapeMismatch,
    #[error("non-finite raw weight")]
    NonFiniteWeight,
    #[error("tape was recorded against a different version of the network")]
    StaleTape,
}

pub type Result<T> = std::result::Result<T, NetError>;

/// Activation used by every combining unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ActivationMode {
    /// `g(t) = max(a t, t)`, subgradient `a` at 0.
    #[default]
    ExactLeakyRelu,
    /// `g(t) = log(exp(a t) + exp(t)) = a t + log(1 + exp((1 − a) t))`.
    SmoothedLeakyRelu,
}

pub const DEFAULT_LEAK_SLOPE: f64 = 0.01;

impl ActivationMode {
    pub fn apply(self, slope: f64, t: f64) -> f64 {
        match self {
            ActivationMode::ExactLeakyRelu => {
                if t > 0.0 {
                    t
                } else {
                    slope * t
                }
            }
            ActivationMode::SmoothedLeakyRelu => {
                let (u, v) = (slope * t, t);
                let m = u.max(v);
                m + ((u - m).exp() + (v - m).exp()).ln()
            }
        }
    }

    pub fn derivative(self, slope: f64, t: f64) -> f64 {
        match self {
            ActivationMode::ExactLeakyRelu => {
                if t > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            ActivationMode::SmoothedLeakyRelu => {
                slope + (1.0 - slope) * crate::kernel::logistic((1.0 - slope) * t)
            }
        }
    }
}

/// Column-wise softmax with max subtraction.
pub fn simplex_weights(raw: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(raw.rows(), raw.cols());
    for p in 0..raw.cols() {
        let max = (0..raw.rows()).map(|q| raw[(q, p)]).fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for q in 0..raw.rows() {
            let e = (raw[(q, p)] - max).exp();
            out[(q, p)] = e;
            total += e;
        }
        for q in 0..raw.rows() {
            out[(q, p)] /= total;
        }
    }
    out
}

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn fresh_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// Layered kernel combiner.
///
/// `layer_sizes = [n_1, …, n_L]` with `n_L = 1`. A single entry `[1]` is the
/// passthrough network: no combining layer, output equals the one input
/// kernel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "NetRecord", into = "NetRecord")]
pub struct DeepKernelNet {
    layer_sizes: Vec<usize>,
    raw_weights: Vec<Matrix>,
    weights: Vec<Matrix>,
    leak_slope: f64,
    mode: ActivationMode,
    version: u64,
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    version: u64,
    /// `inputs[l]` is the kernel vector entering combining layer `l`.
    inputs: Vec<Vec<f64>>,
    /// `pre[l]` holds the pre-activations of combining layer `l`.
    pre: Vec<Vec<f64>>,
    output: f64,
}

impl Tape {
    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

impl DeepKernelNet {
    pub fn new(layer_sizes: Vec<usize>, leak_slope: f64, mode: ActivationMode) -> Result<Self> {
        let valid = match layer_sizes.as_slice() {
            [] => false,
            [only] => *only == 1,
            sizes => sizes.iter().all(|&n| n >= 1) && sizes.last() == Some(&1),
        };
        if !valid {
            return Err(NetError::InvalidLayers(layer_sizes));
        }
        if !(leak_slope > 0.0 && leak_slope < 0.5) {
            return Err(NetError::InvalidLeakSlope(leak_slope));
        }
        let raw_weights: Vec<Matrix> = layer_sizes
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let weights = raw_weights.iter().map(simplex_weights).collect();
        Ok(Self {
            layer_sizes,
            raw_weights,
            weights,
            leak_slope,
            mode,
            version: fresh_version(),
        })
    }

    /// Network with no combining layer over a single kernel.
    pub fn passthrough() -> Self {
        Self::new(vec![1], DEFAULT_LEAK_SLOPE, ActivationMode::ExactLeakyRelu)
            .expect("passthrough layout is valid")
    }

    /// `n_kernels` inputs, the given hidden widths, and one output unit.
    pub fn with_hidden(
        n_kernels: usize,
        hidden: &[usize],
        leak_slope: f64,
        mode: ActivationMode,
    ) -> Result<Self> {
        let mut sizes = vec![n_kernels];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self::new(sizes, leak_slope, mode)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_inputs(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of combining layers (`L − 1`).
    pub fn depth(&self) -> usize {
        self.raw_weights.len()
    }

    pub fn leak_slope(&self) -> f64 {
        self.leak_slope
    }

    pub fn mode(&self) -> ActivationMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: ActivationMode) {
        self.mode = mode;
        self.version = fresh_version();
    }

    pub fn raw_weights(&self) -> &[Matrix] {
        &self.raw_weights
    }

    /// Derived simplex weights, one `n_{l−1} × n_l` matrix per layer.
    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn set_raw_weights(&mut self, raw: Vec<Matrix>) -> Result<()> {
        if raw.len() != self.raw_weights.len()
            || raw
                .iter()
                .zip(&self.raw_weights)
                .any(|(a, b)| a.rows() != b.rows() || a.cols() != b.cols())
        {
            return Err(NetError::ShapeMismatch);
        }
        if !raw.iter().all(Matrix::all_finite) {
            return Err(NetError::NonFiniteWeight);
        }
        self.raw_weights = raw;
        self.refresh();
        Ok(())
    }

    /// `β̂ ← β̂ − lr · grad`.
    pub fn apply_step(&mut self, grads: &[Matrix], lr: f64) -> Result<()> {
        if grads.len() != self.raw_weights.len()
            || grads
                .iter()
                .zip(&self.raw_weights)
                .any(|(g, w)| w.rows() != g.rows() || w.cols() != g.cols())
        {
            return Err(NetError::ShapeMismatch);
        }
        for (w, g) in self.raw_weights.iter_mut().zip(grads) {
            for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wv -= lr * gv;
            }
        }
        self.refresh();
        Ok(())
    }

    /// Mutable access to a single raw weight, for finite-difference probes.
    pub(crate) fn nudge_raw(&mut self, layer: usize, flat: usize, delta: f64) {
        self.raw_weights[layer].as_mut_slice()[flat] += delta;
        self.refresh();
    }

    fn refresh(&mut self) {
        self.weights = self.raw_weights.iter().map(simplex_weights).collect();
        self.version = fresh_version();
    }

    /// Zero-filled gradient buffers shaped like the raw weights.
    pub fn zero_grads(&self) -> Vec<Matrix> {
        self.raw_weights
            .iter()
            .map(|w| Matrix::zeros(w.rows(), w.cols()))
            .collect()
    }

    fn check_input(&self, kv: &[f64]) -> Result<()> {
        if kv.len() != self.n_inputs() {
            return Err(NetError::SizeMismatch {
                expected: self.n_inputs(),
                found: kv.len(),
            });
        }
        Ok(())
    }

    /// Output kernel value only.
    pub fn forward_value(&self, kv: &[f64]) -> Result<f64> {
        self.check_input(kv)?;
        let mut current = kv.to_vec();
        for w in &self.weights {
            current = (0..w.cols())
                .map(|p| {
                    let pre: f64 = (0..w.rows()).map(|q| w[(q, p)] * current[q]).sum();
                    self.mode.apply(self.leak_slope, pre)
                })
                .collect();
        }
        Ok(current[0])
    }

    /// Forward pass recording what the backward pass needs.
    pub fn forward(&self, kv: &[f64]) -> Result<(f64, Tape)> {
        self.check_input(kv)?;
        let mut inputs = Vec::with_capacity(self.depth());
        let mut pre = Vec::with_capacity(self.depth());
        let mut current = kv.to_vec();
        for w in &self.weights {
            let z: Vec<f64> = (0..w.cols())
                .map(|p| (0..w.rows()).map(|q| w[(q, p)] * current[q]).sum())
                .collect();
            let next = z.iter().map(|&t| self.mode.apply(self.leak_slope, t)).collect();
            inputs.push(std::mem::replace(&mut current, next));
            pre.push(z);
        }
        let output = current[0];
        Ok((
            output,
            Tape {
                version: self.version,
                inputs,
                pre,
                output,
            },
        ))
    }

    /// Gradients with respect to the raw weights `β̂` and to the input kernel
    /// vector.
    pub fn backward(&self, tape: &Tape, upstream: f64) -> Result<(Vec<Matrix>, Vec<f64>)> {
        let mut grads = self.zero_grads();
        let grad_kv = self.backward_accumulate(tape, upstream, &mut grads)?;
        Ok((grads, grad_kv))
    }

    /// Like [`backward`](Self::backward) but adds the weight gradients into
    /// `grads`.
    pub fn backward_accumulate(
        &self,
        tape: &Tape,
        upstream: f64,
        grads: &mut [Matrix],
    ) -> Result<Vec<f64>> {
        if tape.version != self.version {
            return Err(NetError::StaleTape);
        }
        if grads.len() != self.depth() {
            return Err(NetError::ShapeMismatch);
        }
        let mut delta_out = vec![upstream];
        for l in (0..self.depth()).rev() {
            let w = &self.weights[l];
            let input = &tape.inputs[l];
            let dpre: Vec<f64> = tape.pre[l]
                .iter()
                .zip(&delta_out)
                .map(|(&t, &d)| d * self.mode.derivative(self.leak_slope, t))
                .collect();
            let grad = &mut grads[l];
            for (p, &dp) in dpre.iter().enumerate() {
                // dJ/dβ_{q,p} = dp · input_q, then through the column softmax.
                let mean: f64 = (0..w.rows()).map(|r| w[(r, p)] * dp * input[r]).sum();
                for q in 0..w.rows() {
                    grad[(q, p)] += w[(q, p)] * (dp * input[q] - mean);
                }
            }
            delta_out = (0..w.rows())
                .map(|q| (0..w.cols()).map(|p| w[(q, p)] * dpre[p]).sum())
                .collect();
        }
        Ok(delta_out)
    }
}

impl PartialEq for DeepKernelNet {
    fn eq(&self, other: &Self) -> bool {
        self.layer_sizes == other.layer_sizes
            && self.raw_weights == other.raw_weights
            && self.leak_slope == other.leak_slope
            && self.mode == other.mode
    }
}

#[derive(Serialize, Deserialize)]
struct NetRecord {
    layer_sizes: Vec<usize>,
    leak_slope: f64,
    activation: ActivationMode,
    /// One row-major `n_{l−1} × n_l` block per combining layer.
    raw_weights: Vec<Vec<f64>>,
}

impl From<DeepKernelNet> for NetRecord {
    fn from(net: DeepKernelNet) -> Self {
        NetRecord {
            layer_sizes: net.layer_sizes,
            leak_slope: net.leak_slope,
            activation: net.mode,
            raw_weights: net.raw_weights.into_iter().map(Matrix::into_vec).collect(),
        }
    }
}

impl TryFrom<NetRecord> for DeepKernelNet {
    type Error = NetError;

    fn try_from(rec: NetRecord) -> Result<Self> {
        let mut net = DeepKernelNet::new(rec.layer_sizes, rec.leak_slope, rec.activation)?;
        if rec.raw_weights.len() != net.depth() {
            return Err(NetError::ShapeMismatch);
        }
        let raw = rec
            .raw_weights
            .into_iter()
            .zip(net.layer_sizes.windows(2))
            .map(|(data, w)| Matrix::from_vec(w[0], w[1], data).ok_or(NetError::ShapeMismatch))
            .collect::<Result<Vec<_>>>()?;
        net.set_raw_weights(raw)?;
        Ok(net)
    }
}
