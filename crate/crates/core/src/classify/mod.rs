//! Fingerprint classification: Gaussian-kernel soft-margin SVM trained by
//! sequential minimal optimization with one-vs-one voting, a decision-tree
//! baseline, and the evaluation sweeps (kernel bandwidth, message
//! averaging, training-set size) used to study both.
//!
//! Classifiers work on dense feature vectors; masked features (receivers
//! that never heard a node) are imputed with a floor value by
//! [`ImputationPolicy`] at the classification boundary, never inside the
//! data model.

mod eval;
mod kernel;
mod svm;
mod tree;

pub use eval::{
    evaluate_accuracy, sigma_sweep, training_size_curve, Algorithm, ConfusionMatrix, Evaluation,
    LabeledSample, NodeSeries, SweepCurve, SweepPoint, TrainingCurve,
};
pub use kernel::gaussian_kernel;
pub use svm::{
    dual_objective, predict_svm, solve_two_class, train_svm, train_svm_from_vectors, SvmModel,
    TwoClassFit,
};
pub use tree::{
    predict_dtree, train_dtree, train_dtree_from_vectors, TreeModel, DEFAULT_MAX_DEPTH,
    DEFAULT_MIN_LEAF,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{MaskedVector, ModelError};

// ---------------------------------------------------------------------------
// Shared types
// ---------------------------------------------------------------------------

/// Gaussian kernel bandwidth σ² (> 0). Features are raw dBm, so σ² lives
/// on the same scale as squared dB differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma2: f64,
}

impl KernelParams {
    pub fn new(sigma2: f64) -> Self {
        KernelParams { sigma2 }
    }
}

/// What to substitute for a masked (never heard) feature.
///
/// The floor must sit below every observed RSSI so "not heard" stays
/// ordinal: further than anything actually received.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImputationPolicy {
    pub floor_dbm: f64,
}

impl Default for ImputationPolicy {
    fn default() -> Self {
        // Below any plausible LPWAN link budget.
        ImputationPolicy { floor_dbm: -140.0 }
    }
}

impl ImputationPolicy {
    /// Densifies a masked feature vector.
    pub fn impute(&self, feature: &[Option<f64>]) -> Vec<f64> {
        feature
            .iter()
            .map(|v| v.unwrap_or(self.floor_dbm))
            .collect()
    }

    /// Densifies a whole series.
    pub fn impute_rows(&self, rows: &[MaskedVector]) -> Vec<Vec<f64>> {
        rows.iter().map(|row| self.impute(row)).collect()
    }
}

/// Anything that maps a masked feature vector to a class id. Implemented by
/// [`SvmModel`] and [`TreeModel`] so evaluation code is classifier-agnostic.
pub trait Classifier {
    fn class_ids(&self) -> &[String];
    fn predict(
        &self,
        feature: &[Option<f64>],
        policy: &ImputationPolicy,
    ) -> Result<String, ClassifyError>;
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum ClassifyError {
    /// Feature vector length differs from the training dimensionality.
    LengthMismatch { expected: usize, got: usize },
    /// Kernel bandwidth must be positive.
    InvalidSigma(f64),
    /// Box constraint must be positive.
    InvalidBoxConstraint(f64),
    /// Training needs at least two classes.
    TooFewClasses(usize),
    /// A class ended up with no training vectors.
    EmptyClass(String),
    /// Training set is empty.
    EmptyTrainingSet,
    /// Evaluation needs at least one test sample.
    EmptyTestSet,
    /// A test label names no known class.
    UnknownTruthLabel(String),
    /// Requested more training messages than the database holds.
    TrainingBudgetExceeded { requested: usize, available: usize },
    /// Sweep grids must be non-empty and ascending.
    InvalidGrid,
    /// Propagated data-model failure.
    Model(ModelError),
}

impl fmt::Display for ClassifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifyError::LengthMismatch { expected, got } => {
                write!(f, "feature length mismatch: expected {expected}, got {got}")
            }
            ClassifyError::InvalidSigma(s) => write!(f, "kernel sigma2 must be > 0, got {s}"),
            ClassifyError::InvalidBoxConstraint(c) => {
                write!(f, "box constraint must be > 0, got {c}")
            }
            ClassifyError::TooFewClasses(n) => {
                write!(f, "classification needs >= 2 classes, got {n}")
            }
            ClassifyError::EmptyClass(id) => write!(f, "empty class: '{id}' has no training vectors"),
            ClassifyError::EmptyTrainingSet => write!(f, "training set is empty"),
            ClassifyError::EmptyTestSet => write!(f, "test set is empty"),
            ClassifyError::UnknownTruthLabel(id) => write!(f, "unknown truth label '{id}'"),
            ClassifyError::TrainingBudgetExceeded {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} training messages but only {available} are available"
            ),
            ClassifyError::InvalidGrid => write!(f, "sweep grid must be non-empty and ascending"),
            ClassifyError::Model(e) => write!(f, "data model error: {e}"),
        }
    }
}

impl std::error::Error for ClassifyError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            ClassifyError::Model(e) => Some(e),
            _ => None,
        }
    }
}

impl From<ModelError> for ClassifyError {
    fn from(e: ModelError) -> Self {
        ClassifyError::Model(e)
    }
}
