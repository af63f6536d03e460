//! Total variation support vector machines.
//!
//! A TV-SVM replaces the training-set expansion of a kernel SVM with `N`
//! free *virtual support vectors* `z_j`, learned by gradient descent together
//! with their signed coefficients `α_j`, the bias and a layered combination of
//! elementary kernels:
//!
//! ```text
//! f(x) = Σ_j α_j κ(x, z_j) + b
//! J    = ½ Σ_{i,j} α_i α_j κ(z_i, z_j) + C Σ_i log(1 + exp(1 − y_i f(x_i)))
//! ```
//!
//! Modules, bottom-up:
//!
//! - [`kernel`]: the twelve elementary kernel families, closed form and
//!   factorised ("neural") evaluation, with gradients.
//! - [`net`]: the deep multiple-kernel combiner with softmax-constrained
//!   mixing weights and leaky-ReLU units.
//! - [`svm`]: the model, objective, gradients, multiclass wrapper and model
//!   file.
//! - [`train`]: mini-batch SGD with the adaptive learning-rate rule.
//! - [`cpd`]: sampled conditional-positive-definiteness checks, the Berg
//!   transform and closure-under-composition checks.
//! - [`skeleton`]: temporal-chunking descriptors for skeleton sequences.
//! - [`data`]: CSV and skeleton JSON formats, synthetic generators, splits
//!   and normalisation.
//! - [`gradcheck`]: finite-difference verification of the model gradients.

pub mod cpd;
pub mod data;
pub mod gradcheck;
pub mod kernel;
pub mod linalg;
pub mod net;
pub mod skeleton;
pub mod svm;
pub mod train;

pub use kernel::{KernelFamily, KernelSpec};
pub use linalg::Matrix;
pub use net::{ActivationMode, DeepKernelNet};
pub use svm::{Classifier, MulticlassModel, TvSvmModel};
pub use train::{train, TrainConfig, TrainReport};
