//! Elementary kernels.
//!
//! Each of the twelve families can be evaluated two ways: in closed form, and
//! through a factorisation `σ3(Σ_d σ2(σ1(x_d) · ω_d))` with `ω_d = σ4(z_d)`
//! that maps onto ordinary neural units. The factorised ("neural") path is the
//! one used for training because it exposes the support vector `z` as a
//! per-dimension weight.
//!
//! | family | closed form | parameters |
//! |---|---|---|
//! | `Linear` | ⟨x,z⟩ | |
//! | `Polynomial` | ⟨x,z⟩^p | `p` |
//! | `Sigmoid` | 1 / (1 + exp(−β⟨x,z⟩)) | `beta` |
//! | `Tanh` | tanh(a⟨x,z⟩ + b) | `a`, `b` |
//! | `Gaussian` | exp(−β‖x−z‖²) | `beta` |
//! | `Laplacian` | exp(−β‖x−z‖) | `beta` |
//! | `Power` | −‖x−z‖^p | `p` |
//! | `MultiQuadratic` | √(‖x−z‖² + b²) | `b` |
//! | `InverseMultiQuadratic` | 1 / √(‖x−z‖² + b²) | `b` |
//! | `Log` | −log(‖x−z‖^p + 1) | `p` |
//! | `Cauchy` | 1 / (1 + ‖x−z‖²/σ²) | `sigma` |
//! | `HistogramIntersection` | Σ_d min(x_d, z_d) | `hi_beta` |
//!
//! `Sigmoid` and `Tanh` are not positive definite in general, and
//! `MultiQuadratic` is conditionally *negative* definite. They are provided
//! anyway; see [`crate::cpd`] for their empirical status.

mod activation;
mod neural;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::{dot, squared_distance};

pub use activation::{Activation, ActivationQuad};
pub use neural::{
    decode_support, encode_support, encode_support_derivative, neural_backward, neural_eval_count,
    neural_forward, SupportWeightVector,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("empty input vector")]
    Empty,
    #[error("histogram intersection input {value} outside [0, 1]")]
    HistogramRange { value: f64 },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("{family} kernel produced a non-finite value")]
    NonFinite { family: KernelFamily },
    #[error("{family} kernel is not differentiable at this point")]
    NonDifferentiable { family: KernelFamily },
    #[error("support weights were encoded for {found}, not {expected}")]
    FamilyMismatch {
        expected: KernelFamily,
        found: KernelFamily,
    },
    #[error("unknown kernel family `{0}`")]
    UnknownFamily(String),
    #[error("{family} kernel has no parameter `{name}`")]
    UnknownParameter { family: KernelFamily, name: String },
    #[error("invalid value for parameter `{name}`: {value}")]
    InvalidParameter { name: String, value: String },
    #[error("parameter `{name}` given twice")]
    DuplicateParameter { name: String },
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// Kernel family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelFamily {
    Linear,
    Polynomial,
    Sigmoid,
    Tanh,
    Gaussian,
    Laplacian,
    Power,
    MultiQuadratic,
    InverseMultiQuadratic,
    Log,
    Cauchy,
    HistogramIntersection,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 12] = [
        KernelFamily::Linear,
        KernelFamily::Polynomial,
        KernelFamily::Sigmoid,
        KernelFamily::Tanh,
        KernelFamily::Gaussian,
        KernelFamily::Laplacian,
        KernelFamily::Power,
        KernelFamily::MultiQuadratic,
        KernelFamily::InverseMultiQuadratic,
        KernelFamily::Log,
        KernelFamily::Cauchy,
        KernelFamily::HistogramIntersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Linear => "Linear",
            KernelFamily::Polynomial => "Polynomial",
            KernelFamily::Sigmoid => "Sigmoid",
            KernelFamily::Tanh => "Tanh",
            KernelFamily::Gaussian => "Gaussian",
            KernelFamily::Laplacian => "Laplacian",
            KernelFamily::Power => "Power",
            KernelFamily::MultiQuadratic => "MultiQuadratic",
            KernelFamily::InverseMultiQuadratic => "InverseMultiQuadratic",
            KernelFamily::Log => "Log",
            KernelFamily::Cauchy => "Cauchy",
            KernelFamily::HistogramIntersection => "HistogramIntersection",
        }
    }

    /// Parameter names accepted by this family, in canonical order.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            KernelFamily::Linear => &[],
            KernelFamily::Polynomial | KernelFamily::Power | KernelFamily::Log => &["p"],
            KernelFamily::Sigmoid | KernelFamily::Gaussian | KernelFamily::Laplacian => &["beta"],
            KernelFamily::Tanh => &["a", "b"],
            KernelFamily::MultiQuadratic | KernelFamily::InverseMultiQuadratic => &["b"],
            KernelFamily::Cauchy => &["sigma"],
            KernelFamily::HistogramIntersection => &["hi_beta"],
        }
    }

    /// Inner-product families use identity σ1, σ2 and σ4.
    pub fn is_inner_product(self) -> bool {
        matches!(
            self,
            KernelFamily::Linear | KernelFamily::Polynomial | KernelFamily::Sigmoid | KernelFamily::Tanh
        )
    }

    /// Distance-based families depend on `x − z` only, so `κ(z, z)` is
    /// constant in `z`.
    pub fn is_shift_invariant(self) -> bool {
        !self.is_inner_product() && self != KernelFamily::HistogramIntersection
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| KernelError::UnknownFamily(s.to_string()))
    }
}

pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_BETA: f64 = 1.0;
pub const DEFAULT_A: f64 = 1.0;
pub const DEFAULT_B: f64 = 1.0;
pub const DEFAULT_SIGMA: f64 = 1.0;
pub const DEFAULT_HI_BETA: f64 = 100.0;

/// An elementary kernel with its hyperparameters.
///
/// The text form is the family name followed by `key=value` pairs separated
/// by whitespace, e.g. `Gaussian beta=0.5`. Omitted parameters take their
/// defaults; `Display` always writes every parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    Linear,
    Polynomial { p: f64 },
    Sigmoid { beta: f64 },
    Tanh { a: f64, b: f64 },
    Gaussian { beta: f64 },
    Laplacian { beta: f64 },
    Power { p: f64 },
    MultiQuadratic { b: f64 },
    InverseMultiQuadratic { b: f64 },
    Log { p: f64 },
    Cauchy { sigma: f64 },
    HistogramIntersection { hi_beta: f64 },
}

impl KernelSpec {
    /// The family with all hyperparameters at their defaults.
    pub fn default_for(family: KernelFamily) -> Self {
        match family {
            KernelFamily::Linear => KernelSpec::Linear,
            KernelFamily::Polynomial => KernelSpec::Polynomial { p: DEFAULT_P },
            KernelFamily::Sigmoid => KernelSpec::Sigmoid { beta: DEFAULT_BETA },
            KernelFamily::Tanh => KernelSpec::Tanh {
                a: DEFAULT_A,
                b: DEFAULT_B,
            },
            KernelFamily::Gaussian => KernelSpec::Gaussian { beta: DEFAULT_BETA },
            KernelFamily::Laplacian => KernelSpec::Laplacian { beta: DEFAULT_BETA },
            KernelFamily::Power => KernelSpec::Power { p: DEFAULT_P },
            KernelFamily::MultiQuadratic => KernelSpec::MultiQuadratic { b: DEFAULT_B },
            KernelFamily::InverseMultiQuadratic => KernelSpec::InverseMultiQuadratic { b: DEFAULT_B },
            KernelFamily::Log => KernelSpec::Log { p: DEFAULT_P },
            KernelFamily::Cauchy => KernelSpec::Cauchy {
                sigma: DEFAULT_SIGMA,
            },
            KernelFamily::HistogramIntersection => KernelSpec::HistogramIntersection {
                hi_beta: DEFAULT_HI_BETA,
            },
        }
    }

    /// Builds a spec from named parameters, rejecting unknown names and
    /// invalid values.
    pub fn from_params<'a>(
        family: KernelFamily,
        params: impl IntoIterator<Item = (&'a str, f64)>,
    ) -> Result<Self> {
        let mut spec = Self::default_for(family);
        let mut seen: Vec<&str> = Vec::new();
        for (name, value) in params {
            if seen.contains(&name) {
                return Err(KernelError::DuplicateParameter {
                    name: name.to_string(),
                });
            }
            seen.push(name);
            let slot = spec
                .param_slot(name)
                .ok_or_else(|| KernelError::UnknownParameter {
                    family,
                    name: name.to_string(),
                })?;
            *slot = value;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn param_slot(&mut self, name: &str) -> Option<&mut f64> {
        match (self, name) {
            (KernelSpec::Polynomial { p }, "p")
            | (KernelSpec::Power { p }, "p")
            | (KernelSpec::Log { p }, "p") => Some(p),
            (KernelSpec::Sigmoid { beta }, "beta")
            | (KernelSpec::Gaussian { beta }, "beta")
            | (KernelSpec::Laplacian { beta }, "beta") => Some(beta),
            (KernelSpec::Tanh { a, .. }, "a") => Some(a),
            (KernelSpec::Tanh { b, .. }, "b")
            | (KernelSpec::MultiQuadratic { b }, "b")
            | (KernelSpec::InverseMultiQuadratic { b }, "b") => Some(b),
            (KernelSpec::Cauchy { sigma }, "sigma") => Some(sigma),
            (KernelSpec::HistogramIntersection { hi_beta }, "hi_beta") => Some(hi_beta),
            _ => None,
        }
    }

    /// Named parameters in canonical order.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            KernelSpec::Linear => vec![],
            KernelSpec::Polynomial { p } | KernelSpec::Power { p } | KernelSpec::Log { p } => {
                vec![("p", p)]
            }
            KernelSpec::Sigmoid { beta }
            | KernelSpec::Gaussian { beta }
            | KernelSpec::Laplacian { beta } => vec![("beta", beta)],
            KernelSpec::Tanh { a, b } => vec![("a", a), ("b", b)],
            KernelSpec::MultiQuadratic { b } | KernelSpec::InverseMultiQuadratic { b } => {
                vec![("b", b)]
            }
            KernelSpec::Cauchy { sigma } => vec![("sigma", sigma)],
            KernelSpec::HistogramIntersection { hi_beta } => vec![("hi_beta", hi_beta)],
        }
    }

    pub fn family(&self) -> KernelFamily {
        match self {
            KernelSpec::Linear => KernelFamily::Linear,
            KernelSpec::Polynomial { .. } => KernelFamily::Polynomial,
            KernelSpec::Sigmoid { .. } => KernelFamily::Sigmoid,
            KernelSpec::Tanh { .. } => KernelFamily::Tanh,
            KernelSpec::Gaussian { .. } => KernelFamily::Gaussian,
            KernelSpec::Laplacian { .. } => KernelFamily::Laplacian,
            KernelSpec::Power { .. } => KernelFamily::Power,
            KernelSpec::MultiQuadratic { .. } => KernelFamily::MultiQuadratic,
            KernelSpec::InverseMultiQuadratic { .. } => KernelFamily::InverseMultiQuadratic,
            KernelSpec::Log { .. } => KernelFamily::Log,
            KernelSpec::Cauchy { .. } => KernelFamily::Cauchy,
            KernelSpec::HistogramIntersection { .. } => KernelFamily::HistogramIntersection,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |name: &str, value: f64| KernelError::InvalidParameter {
            name: name.to_string(),
            value: value.to_string(),
        };
        for (name, value) in self.params() {
            if !value.is_finite() {
                return Err(invalid(name, value));
            }
            let must_be_positive = matches!(name, "p" | "beta" | "sigma" | "hi_beta");
            if must_be_positive && value <= 0.0 {
                return Err(invalid(name, value));
            }
        }
        Ok(())
    }

    /// Checks the shared preconditions of the closed-form and neural paths.
    fn check_inputs(&self, x: &[f64], z: &[f64]) -> Result<()> {
        if x.len() != z.len() {
            return Err(KernelError::DimensionMismatch(x.len(), z.len()));
        }
        if x.is_empty() {
            return Err(KernelError::Empty);
        }
        if !x.iter().chain(z).all(|v| v.is_finite()) {
            return Err(KernelError::NonFiniteInput);
        }
        if let KernelSpec::HistogramIntersection { .. } = self {
            check_unit_interval(x)?;
            check_unit_interval(z)?;
        }
        Ok(())
    }
}

pub(crate) fn check_unit_interval(v: &[f64]) -> Result<()> {
    match v.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        Some(&value) => Err(KernelError::HistogramRange { value }),
        None => Ok(()),
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.family().name())?;
        for (name, value) in self.params() {
            write!(f, " {name}={value}")?;
        }
        Ok(())
    }
}

impl FromStr for KernelSpec {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let family: KernelFamily = tokens
            .next()
            .ok_or_else(|| KernelError::UnknownFamily(String::new()))?
            .parse()?;
        let mut params = Vec::new();
        for tok in tokens {
            let (name, raw) = tok.split_once('=').ok_or_else(|| KernelError::InvalidParameter {
                name: tok.to_string(),
                value: String::new(),
            })?;
            let value: f64 = raw.parse().map_err(|_| KernelError::InvalidParameter {
                name: name.to_string(),
                value: raw.to_string(),
            })?;
            params.push((name, value));
        }
        KernelSpec::from_params(family, params)
    }
}

impl Serialize for KernelSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parses a comma-separated list of kernel records, e.g.
/// `"Gaussian beta=1,Linear"`.
pub fn parse_kernel_list(s: &str) -> Result<Vec<KernelSpec>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect()
}

fn finite(family: KernelFamily, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(KernelError::NonFinite { family })
    }
}

/// Closed-form kernel value `k(x, z)`.
pub fn kernel_forward(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64> {
    spec.check_inputs(x, z)?;
    let value = match *spec {
        KernelSpec::Linear => dot(x, z),
        KernelSpec::Polynomial { p } => dot(x, z).powf(p),
        KernelSpec::Sigmoid { beta } => logistic(beta * dot(x, z)),
        KernelSpec::Tanh { a, b } => (a * dot(x, z) + b).tanh(),
        KernelSpec::Gaussian { beta } => (-beta * squared_distance(x, z)).exp(),
        KernelSpec::Laplacian { beta } => (-beta * squared_distance(x, z).sqrt()).exp(),
        KernelSpec::Power { p } => -squared_distance(x, z).sqrt().powf(p),
        KernelSpec::MultiQuadratic { b } => (squared_distance(x, z) + b * b).sqrt(),
        KernelSpec::InverseMultiQuadratic { b } => 1.0 / (squared_distance(x, z) + b * b).sqrt(),
        KernelSpec::Log { p } => -(squared_distance(x, z).sqrt().powf(p) + 1.0).ln(),
        KernelSpec::Cauchy { sigma } => 1.0 / (1.0 + squared_distance(x, z) / (sigma * sigma)),
        KernelSpec::HistogramIntersection { .. } => x.iter().zip(z).map(|(a, b)| a.min(*b)).sum(),
    };
    finite(spec.family(), value)
}

/// Gradient of the closed form with respect to both arguments.
///
/// Histogram intersection is not differentiable where `x_d == z_d`; that
/// case is reported rather than resolved with a subgradient.
pub fn kernel_gradient(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    spec.check_inputs(x, z)?;
    let family = spec.family();

    if let KernelSpec::HistogramIntersection { .. } = spec {
        let mut gx = vec![0.0; x.len()];
        let mut gz = vec![0.0; z.len()];
        for d in 0..x.len() {
            if x[d] < z[d] {
                gx[d] = 1.0;
            } else if z[d] < x[d] {
                gz[d] = 1.0;
            } else {
                return Err(KernelError::NonDifferentiable { family });
            }
        }
        return Ok((gx, gz));
    }

    if family.is_inner_product() {
        let s = dot(x, z);
        let ds = match *spec {
            KernelSpec::Linear => 1.0,
            KernelSpec::Polynomial { p } => p * s.powf(p - 1.0),
            KernelSpec::Sigmoid { beta } => {
                let l = logistic(beta * s);
                beta * l * (1.0 - l)
            }
            KernelSpec::Tanh { a, b } => {
                let t = (a * s + b).tanh();
                a * (1.0 - t * t)
            }
            _ => unreachable!(),
        };
        let ds = finite(family, ds)?;
        let gx = z.iter().map(|v| ds * v).collect();
        let gz = x.iter().map(|v| ds * v).collect();
        return Ok((gx, gz));
    }

    // Distance-based: k = φ(t) with t = ‖x − z‖², so ∇x = 2φ'(t)(x − z).
    let t = squared_distance(x, z);
    let dphi = match *spec {
        KernelSpec::Gaussian { beta } => -beta * (-beta * t).exp(),
        KernelSpec::Laplacian { beta } => {
            let r = t.sqrt();
            -beta * (-beta * r).exp() / (2.0 * r)
        }
        KernelSpec::Power { p } => -(p / 2.0) * t.powf(p / 2.0 - 1.0),
        KernelSpec::MultiQuadratic { b } => 0.5 / (t + b * b).sqrt(),
        KernelSpec::InverseMultiQuadratic { b } => -0.5 * (t + b * b).powf(-1.5),
        KernelSpec::Log { p } => {
            let h = t.powf(p / 2.0);
            -(p / 2.0) * t.powf(p / 2.0 - 1.0) / (h + 1.0)
        }
        KernelSpec::Cauchy { sigma } => {
            let s2 = sigma * sigma;
            let denom = 1.0 + t / s2;
            -1.0 / (s2 * denom * denom)
        }
        _ => unreachable!(),
    };
    if !dphi.is_finite() {
        return Err(KernelError::NonDifferentiable { family });
    }
    let gx: Vec<f64> = x.iter().zip(z).map(|(a, b)| 2.0 * dphi * (a - b)).collect();
    let gz = gx.iter().map(|g| -g).collect();
    Ok((gx, gz))
}

pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_inner_product() {
        assert_eq!(kernel_forward(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
    }

    #[test]
    fn gaussian_zero_distance_is_one() {
        let k = KernelSpec::Gaussian { beta: 0.5 };
        assert_eq!(kernel_forward(&k, &[7.0, -3.0], &[7.0, -3.0]).unwrap(), 1.0);
    }

    #[test]
    fn gaussian_unit_square_diagonal() {
        // exp(-2) to 16 significant digits.
        let k = KernelSpec::Gaussian { beta: 1.0 };
        let v = kernel_forward(&k, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 0.1353352832366127).abs() < 1e-15);
    }

    #[test]
    fn histogram_intersection_min_sum() {
        let k = KernelSpec::HistogramIntersection { hi_beta: 100.0 };
        let v = kernel_forward(&k, &[0.2, 0.8], &[0.5, 0.5]).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
    }

    #[test]
    fn histogram_intersection_rejects_out_of_range() {
        let k = KernelSpec::default_for(KernelFamily::HistogramIntersection);
        assert!(matches!(
            kernel_forward(&k, &[1.5], &[0.5]),
            Err(KernelError::HistogramRange { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        assert_eq!(
            kernel_forward(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]),
            Err(KernelError::DimensionMismatch(1, 2))
        );
    }

    #[test]
    fn overflow_is_reported() {
        let k = KernelSpec::Polynomial { p: 400.0 };
        assert!(matches!(
            kernel_forward(&k, &[10.0], &[10.0]),
            Err(KernelError::NonFinite { .. })
        ));
    }

    #[test]
    fn text_round_trip_and_defaults() {
        let k: KernelSpec = "Gaussian".parse().unwrap();
        assert_eq!(k, KernelSpec::Gaussian { beta: 1.0 });
        let k: KernelSpec = "Tanh a=0.5 b=-0.25".parse().unwrap();
        assert_eq!(k.to_string(), "Tanh a=0.5 b=-0.25");
        assert_eq!(k.to_string().parse::<KernelSpec>().unwrap(), k);
        for family in KernelFamily::ALL {
            let spec = KernelSpec::default_for(family);
            assert_eq!(spec.to_string().parse::<KernelSpec>().unwrap(), spec);
        }
    }

    #[test]
    fn unknown_and_invalid_parameters_rejected() {
        assert!(matches!(
            "Gaussian sigma=1".parse::<KernelSpec>(),
            Err(KernelError::UnknownParameter { .. })
        ));
        assert!(matches!(
            "Linear p=2".parse::<KernelSpec>(),
            Err(KernelError::UnknownParameter { .. })
        ));
        assert!(matches!(
            "Gaussian beta=-1".parse::<KernelSpec>(),
            Err(KernelError::InvalidParameter { .. })
        ));
        assert!(matches!(
            "Gaussian beta=1 beta=2".parse::<KernelSpec>(),
            Err(KernelError::DuplicateParameter { .. })
        ));
        assert!(matches!(
            "gaussian".parse::<KernelSpec>(),
            Err(KernelError::UnknownFamily(_))
        ));
    }

    #[test]
    fn kernel_list() {
        let ks = parse_kernel_list("Gaussian beta=0.5, Linear").unwrap();
        assert_eq!(ks, vec![KernelSpec::Gaussian { beta: 0.5 }, KernelSpec::Linear]);
    }

    #[test]
    fn histogram_gradient_at_tie_is_signalled() {
        let k = KernelSpec::default_for(KernelFamily::HistogramIntersection);
        assert!(matches!(
            kernel_gradient(&k, &[0.5], &[0.5]),
            Err(KernelError::NonDifferentiable { .. })
        ));
    }
}
