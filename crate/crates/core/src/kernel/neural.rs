//! The factorised kernel path used during training.
//!
//! Histogram intersection is special: `σ4(z) = exp(exp(β(1−z)))` overflows
//! for any useful `β`, so its weights are stored in the reduced coordinate
//! `ω̃ = ln(ln σ4(z)) / β = 1 − z`, and the composition is evaluated as the
//! equivalent log-sum-exp. Every other family stores `ω = σ4(z)` directly.

use std::cell::Cell;

use super::{check_unit_interval, ActivationQuad, KernelError, KernelFamily, KernelSpec, Result};

/// Products fed to `log(·)²` are clamped into this range.
const LOG_DOMAIN_MIN: f64 = 1e-300;
const LOG_DOMAIN_MAX: f64 = 1e300;

thread_local! {
    static NEURAL_EVALS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`neural_forward`] calls made on the current thread.
pub fn neural_eval_count() -> u64 {
    NEURAL_EVALS.with(Cell::get)
}

/// A support vector encoded as per-dimension weights, `ω_d = σ4(z_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportWeightVector {
    pub family: KernelFamily,
    pub omega: Vec<f64>,
}

impl SupportWeightVector {
    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

pub fn encode_support(spec: &KernelSpec, z: &[f64]) -> Result<SupportWeightVector> {
    if !z.iter().all(|v| v.is_finite()) {
        return Err(KernelError::NonFiniteInput);
    }
    let family = spec.family();
    let omega = match family {
        KernelFamily::HistogramIntersection => {
            check_unit_interval(z)?;
            z.iter().map(|v| 1.0 - v).collect()
        }
        _ => {
            let s4 = ActivationQuad::for_spec(spec).sigma4;
            z.iter().map(|&v| s4.eval(v)).collect()
        }
    };
    Ok(SupportWeightVector { family, omega })
}

/// `dω_d / dz_d` in the stored coordinate, per dimension.
pub fn encode_support_derivative(spec: &KernelSpec, z: &[f64]) -> Vec<f64> {
    match spec.family() {
        KernelFamily::HistogramIntersection => vec![-1.0; z.len()],
        _ => {
            let s4 = ActivationQuad::for_spec(spec).sigma4;
            z.iter().map(|&v| s4.derivative(v)).collect()
        }
    }
}

/// Inverse of [`encode_support`].
pub fn decode_support(w: &SupportWeightVector) -> Vec<f64> {
    match w.family {
        KernelFamily::HistogramIntersection => w.omega.iter().map(|v| 1.0 - v).collect(),
        f if f.is_inner_product() => w.omega.clone(),
        _ => w.omega.iter().map(|v| -v.ln()).collect(),
    }
}

fn check_pair(spec: &KernelSpec, x: &[f64], w: &SupportWeightVector) -> Result<()> {
    if spec.family() != w.family {
        return Err(KernelError::FamilyMismatch {
            expected: spec.family(),
            found: w.family,
        });
    }
    if x.len() != w.len() {
        return Err(KernelError::DimensionMismatch(x.len(), w.len()));
    }
    if x.is_empty() {
        return Err(KernelError::Empty);
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(KernelError::NonFiniteInput);
    }
    if spec.family() == KernelFamily::HistogramIntersection {
        check_unit_interval(x)?;
    }
    Ok(())
}

#[inline]
fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[inline]
fn clamp_log_domain(u: f64) -> f64 {
    u.clamp(LOG_DOMAIN_MIN, LOG_DOMAIN_MAX)
}

/// Kernel value through the factorised path.
pub fn neural_forward(spec: &KernelSpec, x: &[f64], w: &SupportWeightVector) -> Result<f64> {
    check_pair(spec, x, w)?;
    NEURAL_EVALS.with(|c| c.set(c.get() + 1));
    let family = spec.family();

    let value = if let KernelSpec::HistogramIntersection { hi_beta } = *spec {
        x.iter()
            .zip(&w.omega)
            .map(|(&xd, &od)| 1.0 - log_add_exp(hi_beta * (1.0 - xd), hi_beta * od) / hi_beta)
            .sum()
    } else {
        let q = ActivationQuad::for_spec(spec);
        let distance = !family.is_inner_product();
        let mut s = 0.0;
        for (&xd, &od) in x.iter().zip(&w.omega) {
            let mut u = q.sigma1.eval(xd) * od;
            if distance {
                u = clamp_log_domain(u);
            }
            s += q.sigma2.eval(u);
        }
        q.sigma3.eval(s)
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(KernelError::NonFinite { family })
    }
}

/// Upstream-scaled gradients of [`neural_forward`] with respect to `x` and
/// to the stored weights `ω`.
pub fn neural_backward(
    spec: &KernelSpec,
    x: &[f64],
    w: &SupportWeightVector,
    upstream: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(spec, x, w)?;
    let family = spec.family();
    let dim = x.len();
    let mut grad_x = Vec::with_capacity(dim);
    let mut grad_w = Vec::with_capacity(dim);

    if let KernelSpec::HistogramIntersection { hi_beta } = *spec {
        for (&xd, &od) in x.iter().zip(&w.omega) {
            let a = hi_beta * (1.0 - xd);
            let c = hi_beta * od;
            let m = a.max(c);
            let ea = (a - m).exp();
            let ec = (c - m).exp();
            let total = ea + ec;
            grad_x.push(upstream * ea / total);
            grad_w.push(-upstream * ec / total);
        }
        return Ok((grad_x, grad_w));
    }

    let q = ActivationQuad::for_spec(spec);
    let distance = !family.is_inner_product();
    let mut s = 0.0;
    let mut us = Vec::with_capacity(dim);
    for (&xd, &od) in x.iter().zip(&w.omega) {
        let raw = q.sigma1.eval(xd) * od;
        let u = if distance { clamp_log_domain(raw) } else { raw };
        s += q.sigma2.eval(u);
        us.push((u, u == raw));
    }
    let g3 = q.sigma3.derivative(s);
    if !g3.is_finite() {
        return Err(KernelError::NonDifferentiable { family });
    }
    let scale = upstream * g3;
    for ((&xd, &od), &(u, unclamped)) in x.iter().zip(&w.omega).zip(&us) {
        if !unclamped {
            grad_x.push(0.0);
            grad_w.push(0.0);
            continue;
        }
        let g2 = q.sigma2.derivative(u);
        if !g2.is_finite() {
            return Err(KernelError::NonDifferentiable { family });
        }
        grad_x.push(scale * g2 * q.sigma1.derivative(xd) * od);
        grad_w.push(scale * g2 * q.sigma1.eval(xd));
    }
    Ok((grad_x, grad_w))
}
