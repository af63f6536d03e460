//! Conditional positive definiteness checks.
//!
//! A kernel is c.p.d. when `Σ c_i c_j κ(x_i, x_j) ≥ 0` for every coefficient
//! vector with `Σ c_i = 0`. Sampling random zero-sum vectors can only gather
//! evidence for this property, but a single negative quadratic form is a
//! certificate against it.
//!
//! The Berg transform centres a Gram matrix at an anchor point,
//! `κ̂_ij = κ_ij − κ_in − κ_nj + κ_nn`; the result is positive semi-definite
//! exactly when the original Gram matrix is c.p.d.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::kernel::{kernel_forward, KernelError, KernelFamily, KernelSpec};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::net::{DeepKernelNet, NetError};

/// Largest accepted `|G_ij − G_ji|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CpdError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("need at least one trial")]
    NoTrials,
    #[error("Gram matrix is not square")]
    NotSquare,
    #[error("Gram matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("Gram matrix has non-finite entries")]
    NonFinite,
    #[error("input kernel {spec} is not c.p.d. on these points; composition not checked")]
    Precondition { spec: KernelSpec, report: Box<CpdReport> },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, CpdError>;

/// Symmetric matrix of pairwise kernel values.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    values: Matrix,
    /// Free-form description of where the points came from.
    pub tag: String,
}

impl GramMatrix {
    pub fn new(values: Matrix, tag: impl Into<String>) -> Result<Self> {
        if values.rows() != values.cols() {
            return Err(CpdError::NotSquare);
        }
        if !values.all_finite() {
            return Err(CpdError::NonFinite);
        }
        let asym = values.asymmetry();
        if asym > SYMMETRY_TOLERANCE {
            return Err(CpdError::Asymmetric(asym));
        }
        Ok(Self {
            values,
            tag: tag.into(),
        })
    }

    /// Gram matrix of `kernel` over the rows of `points`. Only the upper
    /// triangle is evaluated, so the result is exactly symmetric.
    pub fn from_kernel<E>(
        points: &Matrix,
        tag: impl Into<String>,
        mut kernel: impl FnMut(&[f64], &[f64]) -> std::result::Result<f64, E>,
    ) -> Result<Self>
    where
        CpdError: From<E>,
    {
        let n = points.rows();
        let mut values = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = kernel(points.row(i), points.row(j))?;
                values.row_mut(i)[j] = v;
                values.row_mut(j)[i] = v;
            }
        }
        Self::new(values, tag)
    }

    /// Gram matrix of one elementary kernel in closed form.
    pub fn for_spec(spec: &KernelSpec, points: &Matrix) -> Result<Self> {
        Self::from_kernel(points, spec.to_string(), |a, b| kernel_forward(spec, a, b))
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Copy with rows and columns reordered so that `perm[k]` becomes `k`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let values = Matrix::from_fn(self.len(), self.len(), |i, j| self.values[(perm[i], perm[j])]);
        Self {
            values,
            tag: self.tag.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    PassedSampled,
    FailedWithWitness,
}

/// A zero-sum coefficient vector with a negative quadratic form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub c: Vec<f64>,
    pub quadratic_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpdReport {
    pub verdict: Verdict,
    pub trials: usize,
    pub tolerance: f64,
    /// Smallest quadratic form seen over all trials.
    pub min_quadratic_form: f64,
    pub witness: Option<Witness>,
    /// Smallest eigenvalue of the Berg-transformed Gram matrix.
    pub min_eig_after_berg: f64,
}

impl CpdReport {
    /// Sampled check passed and the Berg transform is p.s.d. within tolerance.
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::PassedSampled && self.min_eig_after_berg >= -self.tolerance
    }
}

/// `1e-8 · n`.
pub fn default_tolerance(n: usize) -> f64 {
    1e-8 * n as f64
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Zero-sum coefficients: standard normal draws minus their mean.
pub fn centered_coefficients(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let mean = c.iter().sum::<f64>() / n as f64;
    for v in &mut c {
        *v -= mean;
    }
    c
}

/// Draws `trials` zero-sum vectors and checks every quadratic form against
/// `−tol`. The first failing vector becomes the witness.
pub fn cpd_sampled_check(gram: &GramMatrix, trials: usize, tol: f64, seed: u64) -> Result<CpdReport> {
    let n = gram.len();
    if n < 2 {
        return Err(CpdError::TooFewPoints(n));
    }
    if trials == 0 {
        return Err(CpdError::NoTrials);
    }
    let mut min_q = f64::INFINITY;
    let mut witness = None;
    for t in 0..trials {
        let c = centered_coefficients(n, &mut trial_rng(seed, t));
        let q = gram.values.quadratic_form(&c);
        min_q = min_q.min(q);
        if witness.is_none() && q < -tol {
            witness = Some(Witness { c, quadratic_form: q });
        }
    }
    let (_, min_eig) = pd_check(&berg_transform(gram)?, tol)?;
    Ok(CpdReport {
        verdict: if witness.is_some() {
            Verdict::FailedWithWitness
        } else {
            Verdict::PassedSampled
        },
        trials,
        tolerance: tol,
        min_quadratic_form: min_q,
        witness,
        min_eig_after_berg: min_eig,
    })
}

/// Convenience wrapper: Gram matrix of `spec` on `points`, then the sampled
/// check at the default tolerance.
pub fn check_kernel(spec: &KernelSpec, points: &Matrix, trials: usize, seed: u64) -> Result<CpdReport> {
    let gram = GramMatrix::for_spec(spec, points)?;
    cpd_sampled_check(&gram, trials, default_tolerance(points.rows()), seed)
}

/// Berg transform anchored at the last point; the result is
/// `(n−1) × (n−1)`.
pub fn berg_transform(gram: &GramMatrix) -> Result<GramMatrix> {
    let n = gram.len();
    if n < 2 {
        return Err(CpdError::TooFewPoints(n));
    }
    let g = &gram.values;
    let a = n - 1;
    let values = Matrix::from_fn(a, a, |i, j| g[(i, j)] - g[(i, a)] - g[(a, j)] + g[(a, a)]);
    Ok(GramMatrix {
        values,
        tag: format!("berg({})", gram.tag),
    })
}

/// `(λ_min ≥ −tol, λ_min)` by symmetric eigendecomposition.
pub fn pd_check(gram: &GramMatrix, tol: f64) -> Result<(bool, f64)> {
    let asym = gram.values.asymmetry();
    if asym > SYMMETRY_TOLERANCE {
        return Err(CpdError::Asymmetric(asym));
    }
    if gram.is_empty() {
        return Ok((true, f64::INFINITY));
    }
    let min = symmetric_eigen(&gram.values).min_value();
    Ok((min >= -tol, min))
}

/// Witness built from the most negative eigenvector of the Berg transform:
/// `c_i = v_i` for the first `n−1` points and `c_n = −Σ v_i`.
pub fn berg_witness(gram: &GramMatrix) -> Result<Witness> {
    let berg = berg_transform(gram)?;
    let eig = symmetric_eigen(berg.values());
    let v = eig.vector(0);
    let mut c = v.clone();
    c.push(-v.iter().sum::<f64>());
    let quadratic_form = gram.values.quadratic_form(&c);
    Ok(Witness { c, quadratic_form })
}

/// Gram matrix of the network output over the given elementary kernels,
/// each evaluated in closed form.
pub fn composed_gram(net: &DeepKernelNet, specs: &[KernelSpec], points: &Matrix) -> Result<GramMatrix> {
    let tag = specs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
    GramMatrix::from_kernel(points, format!("net[{tag}]"), |a, b| -> Result<f64> {
        let kv = specs
            .iter()
            .map(|s| kernel_forward(s, a, b))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(net.forward_value(&kv)?)
    })
}

/// Checks that composing c.p.d. kernels through `net` stays c.p.d.
///
/// Every input kernel must first pass the sampled check on the same points;
/// otherwise [`CpdError::Precondition`] is returned and the composition is
/// not examined.
pub fn composition_closure_check(
    net: &DeepKernelNet,
    specs: &[KernelSpec],
    points: &Matrix,
    trials: usize,
    seed: u64,
) -> Result<CpdReport> {
    let tol = default_tolerance(points.rows());
    for spec in specs {
        let report = check_kernel(spec, points, trials, seed)?;
        if !report.passed() {
            return Err(CpdError::Precondition {
                spec: *spec,
                report: Box::new(report),
            });
        }
    }
    let gram = composed_gram(net, specs, points)?;
    cpd_sampled_check(&gram, trials, tol, seed)
}

/// Kernel families for which the closed form is c.p.d. on every point set.
/// Sigmoid and Tanh are not c.p.d. in general, and the multi-quadratic
/// `√(‖x−z‖² + b²)` is conditionally *negative* definite.
pub fn is_known_cpd(family: KernelFamily) -> bool {
    !matches!(
        family,
        KernelFamily::Sigmoid | KernelFamily::Tanh | KernelFamily::MultiQuadratic
    )
}
