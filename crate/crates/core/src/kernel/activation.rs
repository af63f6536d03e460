//! Scalar activations σ1..σ4 of the neural factorisation, one quadruple per
//! kernel family.

use super::{logistic, KernelSpec};

/// A scalar activation with a known derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// `t`
    Identity,
    /// `exp(t)`
    Exp,
    /// `exp(−t)`
    ExpNeg,
    /// `log(t)²`
    LogSquared,
    /// `t^p`
    Pow { p: f64 },
    /// `1 / (1 + exp(−β t))`
    Logistic { beta: f64 },
    /// `tanh(a t + b)`
    TanhAffine { a: f64, b: f64 },
    /// `exp(−β t)`
    ExpScaled { beta: f64 },
    /// `exp(−β √t)`
    ExpSqrtScaled { beta: f64 },
    /// `−t^(p/2)`
    NegHalfPow { p: f64 },
    /// `√(t + b²)`
    SqrtShift { b: f64 },
    /// `1 / √(t + b²)`
    InvSqrtShift { b: f64 },
    /// `−log(t^(p/2) + 1)`
    NegLogHalfPow { p: f64 },
    /// `1 / (1 + t / σ²)`
    CauchyRational { sigma: f64 },
    /// `exp(exp(β (1 − t)))`, histogram-intersection input map
    DoubleExp { beta: f64 },
    /// `1 − log(log t) / β`, histogram-intersection soft-min unit
    SoftMinUnit { beta: f64 },
}

impl Activation {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Activation::Identity => t,
            Activation::Exp => t.exp(),
            Activation::ExpNeg => (-t).exp(),
            Activation::LogSquared => {
                let l = t.ln();
                l * l
            }
            Activation::Pow { p } => t.powf(p),
            Activation::Logistic { beta } => logistic(beta * t),
            Activation::TanhAffine { a, b } => (a * t + b).tanh(),
            Activation::ExpScaled { beta } => (-beta * t).exp(),
            Activation::ExpSqrtScaled { beta } => (-beta * t.sqrt()).exp(),
            Activation::NegHalfPow { p } => -t.powf(p / 2.0),
            Activation::SqrtShift { b } => (t + b * b).sqrt(),
            Activation::InvSqrtShift { b } => 1.0 / (t + b * b).sqrt(),
            Activation::NegLogHalfPow { p } => -(t.powf(p / 2.0) + 1.0).ln(),
            Activation::CauchyRational { sigma } => 1.0 / (1.0 + t / (sigma * sigma)),
            Activation::DoubleExp { beta } => (beta * (1.0 - t)).exp().exp(),
            Activation::SoftMinUnit { beta } => 1.0 - t.ln().ln() / beta,
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Activation::Identity => 1.0,
            Activation::Exp => t.exp(),
            Activation::ExpNeg => -(-t).exp(),
            Activation::LogSquared => 2.0 * t.ln() / t,
            Activation::Pow { p } => p * t.powf(p - 1.0),
            Activation::Logistic { beta } => {
                let l = logistic(beta * t);
                beta * l * (1.0 - l)
            }
            Activation::TanhAffine { a, b } => {
                let th = (a * t + b).tanh();
                a * (1.0 - th * th)
            }
            Activation::ExpScaled { beta } => -beta * (-beta * t).exp(),
            Activation::ExpSqrtScaled { beta } => {
                let r = t.sqrt();
                -beta * (-beta * r).exp() / (2.0 * r)
            }
            Activation::NegHalfPow { p } => -(p / 2.0) * t.powf(p / 2.0 - 1.0),
            Activation::SqrtShift { b } => 0.5 / (t + b * b).sqrt(),
            Activation::InvSqrtShift { b } => -0.5 * (t + b * b).powf(-1.5),
            Activation::NegLogHalfPow { p } => {
                -(p / 2.0) * t.powf(p / 2.0 - 1.0) / (t.powf(p / 2.0) + 1.0)
            }
            Activation::CauchyRational { sigma } => {
                let s2 = sigma * sigma;
                let d = 1.0 + t / s2;
                -1.0 / (s2 * d * d)
            }
            Activation::DoubleExp { beta } => {
                let inner = (beta * (1.0 - t)).exp();
                -beta * inner * inner.exp()
            }
            Activation::SoftMinUnit { beta } => -1.0 / (beta * t * t.ln()),
        }
    }
}

/// The four activations that factor a kernel as
/// `σ3(Σ_d σ2(σ1(x_d) · σ4(z_d)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationQuad {
    pub sigma1: Activation,
    pub sigma2: Activation,
    pub sigma3: Activation,
    pub sigma4: Activation,
}

impl ActivationQuad {
    pub fn for_spec(spec: &KernelSpec) -> Self {
        use Activation::*;
        let inner = |sigma3| ActivationQuad {
            sigma1: Identity,
            sigma2: Identity,
            sigma3,
            sigma4: Identity,
        };
        let distance = |sigma3| ActivationQuad {
            sigma1: Exp,
            sigma2: LogSquared,
            sigma3,
            sigma4: ExpNeg,
        };
        match *spec {
            KernelSpec::Linear => inner(Identity),
            KernelSpec::Polynomial { p } => inner(Pow { p }),
            KernelSpec::Sigmoid { beta } => inner(Logistic { beta }),
            KernelSpec::Tanh { a, b } => inner(TanhAffine { a, b }),
            KernelSpec::Gaussian { beta } => distance(ExpScaled { beta }),
            KernelSpec::Laplacian { beta } => distance(ExpSqrtScaled { beta }),
            KernelSpec::Power { p } => distance(NegHalfPow { p }),
            KernelSpec::MultiQuadratic { b } => distance(SqrtShift { b }),
            KernelSpec::InverseMultiQuadratic { b } => distance(InvSqrtShift { b }),
            KernelSpec::Log { p } => distance(NegLogHalfPow { p }),
            KernelSpec::Cauchy { sigma } => distance(CauchyRational { sigma }),
            // Signs chosen so the composition is a soft minimum:
            // σ2(σ1(x)σ1(z)) = 1 − logsumexp(β(1−x), β(1−z))/β ≤ min(x, z).
            KernelSpec::HistogramIntersection { hi_beta } => ActivationQuad {
                sigma1: DoubleExp { beta: hi_beta },
                sigma2: SoftMinUnit { beta: hi_beta },
                sigma3: Identity,
                sigma4: DoubleExp { beta: hi_beta },
            },
        }
    }

    /// Literal composition `σ3(Σ_d σ2(σ1(x_d) · σ4(z_d)))` with no
    /// stabilisation. Overflows for histogram intersection beyond small
    /// `hi_beta`; use [`super::neural_forward`] for real work.
    pub fn compose(&self, x: &[f64], z: &[f64]) -> f64 {
        let s: f64 = x
            .iter()
            .zip(z)
            .map(|(&xd, &zd)| self.sigma2.eval(self.sigma1.eval(xd) * self.sigma4.eval(zd)))
            .sum();
        self.sigma3.eval(s)
    }
}
