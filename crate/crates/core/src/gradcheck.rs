//! Finite-difference verification of the analytic gradients.
//!
//! Random small models are generated for every requested kernel family and
//! combining depth, with learned or frozen support vectors. Every trainable
//! parameter is perturbed by `±h` and the central difference of the objective
//! is compared with the analytic gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::Matrix;
use crate::net::{ActivationMode, DeepKernelNet, DEFAULT_LEAK_SLOPE};
use crate::svm::{Gradients, KernelMachine, ModelError, TvSvmModel};

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-6;
/// Maximum accepted relative error.
pub const DEFAULT_TOLERANCE: f64 = 1e-5;
/// Denominator floor of the relative error, as a fraction of `max(1, |J|)`.
///
/// Rounding in the objective contributes roughly `ε·|J| / h ≈ 1e-10·|J|` to
/// every central difference, so gradients far below that scale cannot be
/// resolved and are compared in absolute terms instead.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub kernels: Vec<KernelSpec>,
    /// Numbers of combining layers to test.
    pub depths: Vec<usize>,
    /// Which support-vector modes to test (`true` = frozen).
    pub frozen: Vec<bool>,
    pub trials: usize,
    pub max_support: usize,
    pub max_dim: usize,
    pub max_samples: usize,
    pub seed: u64,
    pub mode: ActivationMode,
    pub step: f64,
    pub tolerance: f64,
    /// Negative control: perturb the analytic gradient before comparing.
    pub corrupt_gradient: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            kernels: KernelFamily::ALL.map(KernelSpec::default_for).to_vec(),
            depths: vec![1, 2, 3],
            frozen: vec![false, true],
            trials: 2,
            max_support: 5,
            max_dim: 4,
            max_samples: 10,
            seed: 0,
            mode: ActivationMode::SmoothedLeakyRelu,
            step: DEFAULT_STEP,
            tolerance: DEFAULT_TOLERANCE,
            corrupt_gradient: false,
        }
    }
}

/// Outcome for one random model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceResult {
    pub kernel: KernelSpec,
    pub depth: usize,
    pub frozen: bool,
    pub n_support: usize,
    pub dim: usize,
    pub n_samples: usize,
    pub n_params: usize,
    pub max_rel_error: f64,
    /// Parameter with the largest error, e.g. `alpha[2]` or `z[1][0]`.
    pub worst: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub instances: Vec<InstanceResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        !self.instances.is_empty() && self.instances.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InstanceResult> {
        self.instances.iter().filter(|r| !r.passed)
    }
}

/// A random model with its data.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: TvSvmModel,
    pub x: Matrix,
    pub y: Vec<i64>,
    pub c: f64,
}

fn companion(family: KernelFamily) -> KernelSpec {
    match family {
        KernelFamily::Linear => KernelSpec::Gaussian { beta: 1.0 },
        KernelFamily::HistogramIntersection => KernelSpec::Gaussian { beta: 1.0 },
        _ => KernelSpec::Linear,
    }
}

/// Random instance for `spec` behind `depth` combining layers. Depth 0
/// uses the kernel alone without any combining layer.
pub fn random_instance(
    spec: KernelSpec,
    depth: usize,
    frozen: bool,
    config: &GradcheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, ModelError> {
    let family = spec.family();
    let n_sv = rng.random_range(1..=config.max_support);
    let dim = rng.random_range(1..=config.max_dim);
    let n = rng.random_range(1..=config.max_samples);
    // Histogram intersection lives on [0, 1]; keep a margin so ±h stays inside.
    let (lo, hi) = if family == KernelFamily::HistogramIntersection {
        (0.05, 0.95)
    } else {
        (-1.0, 1.0)
    };
    let point = |rng: &mut ChaCha8Rng| rng.random_range(lo..hi);
    let support = Matrix::from_fn(n_sv, dim, |_, _| point(rng));
    let x = Matrix::from_fn(n, dim, |_, _| point(rng));
    let y = (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();

    let (kernels, mut net) = if depth == 0 {
        let mut net = DeepKernelNet::passthrough();
        net.set_mode(config.mode);
        (vec![spec], net)
    } else {
        let mut sizes = vec![2];
        for _ in 1..depth {
            sizes.push(rng.random_range(2..=3));
        }
        sizes.push(1);
        let net = DeepKernelNet::new(sizes, DEFAULT_LEAK_SLOPE, config.mode)?;
        (vec![spec, companion(family)], net)
    };
    let raw = net
        .raw_weights()
        .iter()
        .map(|w| Matrix::from_fn(w.rows(), w.cols(), |_, _| rng.sample(StandardNormal)))
        .collect();
    net.set_raw_weights(raw)?;

    let machine = KernelMachine::new(support, kernels, net, frozen)?;
    let alpha = (0..n_sv).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bias = rng.random_range(-0.5..0.5);
    let c = rng.random_range(0.5..2.0);
    Ok(Instance {
        model: TvSvmModel::new(machine, alpha, bias)?,
        x,
        y,
        c,
    })
}

fn corrupt(grads: &mut Gradients) {
    let g = &mut grads.heads[0].bias;
    *g += 1e-3 * (1.0 + g.abs());
}

/// Compares every analytic partial derivative with a central difference.
pub fn check_instance(
    inst: &Instance,
    kernel: KernelSpec,
    depth: usize,
    config: &GradcheckConfig,
) -> Result<InstanceResult, ModelError> {
    let h = config.step;
    let (obj, mut grads) = inst.model.gradients(&inst.x, &inst.y, inst.c)?;
    if config.corrupt_gradient {
        corrupt(&mut grads);
    }
    let floor = RELATIVE_FLOOR * obj.total.abs().max(1.0);
    let objective = |m: &TvSvmModel| m.objective(&inst.x, &inst.y, inst.c).map(|o| o.total);

    let mut worst = (0.0f64, String::new());
    let mut n_params = 0usize;
    let mut record = |name: String, analytic: f64, numeric: f64| {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if err > worst.0 || worst.1.is_empty() {
            worst = (err, name);
        }
    };

    let central = |perturb: &dyn Fn(&mut TvSvmModel, f64)| -> Result<f64, ModelError> {
        let mut plus = inst.model.clone();
        perturb(&mut plus, h);
        let mut minus = inst.model.clone();
        perturb(&mut minus, -h);
        Ok((objective(&plus)? - objective(&minus)?) / (2.0 * h))
    };

    for j in 0..inst.model.alpha.len() {
        let fd = central(&|m, d| m.alpha[j] += d)?;
        record(format!("alpha[{j}]"), grads.heads[0].alpha[j], fd);
        n_params += 1;
    }
    let fd = central(&|m, d| m.bias += d)?;
    record("bias".into(), grads.heads[0].bias, fd);
    n_params += 1;

    let support = &inst.model.machine.support;
    if inst.model.machine.frozen_support {
        // Frozen support vectors must get an exactly zero gradient.
        let nonzero = grads.support.as_slice().iter().any(|g| *g != 0.0);
        if nonzero {
            record("z (frozen)".into(), f64::INFINITY, 0.0);
        }
    } else {
        for i in 0..support.rows() {
            for d in 0..support.cols() {
                let fd = central(&|m, delta| m.machine.support.row_mut(i)[d] += delta)?;
                record(format!("z[{i}][{d}]"), grads.support[(i, d)], fd);
                n_params += 1;
            }
        }
    }

    for (layer, w) in inst.model.machine.net.raw_weights().iter().enumerate() {
        for flat in 0..w.rows() * w.cols() {
            let fd = central(&|m, d| m.machine.net.nudge_raw(layer, flat, d))?;
            record(
                format!("beta_raw[{layer}][{}][{}]", flat / w.cols(), flat % w.cols()),
                grads.net[layer].as_slice()[flat],
                fd,
            );
            n_params += 1;
        }
    }

    let (max_rel_error, worst_name) = worst;
    Ok(InstanceResult {
        kernel,
        depth,
        frozen: inst.model.machine.frozen_support,
        n_support: inst.model.machine.n_support(),
        dim: inst.model.machine.dim(),
        n_samples: inst.x.rows(),
        n_params,
        max_rel_error,
        worst: worst_name,
        passed: max_rel_error <= config.tolerance,
    })
}

/// Runs `trials` instances for every (family, depth, frozen) combination.
pub fn run_gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::new();
    for &spec in &config.kernels {
        for &depth in &config.depths {
            for &frozen in &config.frozen {
                for _ in 0..config.trials {
                    let inst = random_instance(spec, depth, frozen, config, &mut rng)?;
                    instances.push(check_instance(&inst, spec, depth, config)?);
                }
            }
        }
    }
    Ok(GradcheckReport {
        tolerance: config.tolerance,
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_single_instance_passes() {
        let config = GradcheckConfig {
            kernels: vec![KernelSpec::Gaussian { beta: 1.0 }],
            depths: vec![2],
            trials: 3,
            ..GradcheckConfig::default()
        };
        let report = run_gradcheck(&config).unwrap();
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let config = GradcheckConfig {
            kernels: vec![KernelSpec::Linear],
            depths: vec![1],
            frozen: vec![true],
            trials: 1,
            corrupt_gradient: true,
            ..GradcheckConfig::default()
        };
        let report = run_gradcheck(&config).unwrap();
        assert!(!report.passed());
        assert_eq!(report.instances[0].worst, "bias");
    }
}
