//! Soft-margin SVM trained by sequential minimal optimization (SMO), with
//! one-vs-one voting for more than two classes.
//!
//! The two-class solver maximizes the usual dual
//!
//! ```text
//!   W(α) = Σ αᵢ − ½ Σᵢⱼ αᵢ αⱼ yᵢ yⱼ K(xᵢ, xⱼ)
//!   s.t. 0 ≤ αᵢ ≤ C,  Σ αᵢ yᵢ = 0
//! ```
//!
//! by repeatedly optimizing one (αᵢ, αⱼ) pair analytically. Pair selection
//! follows the classic two-heuristic scheme, with a deterministic rotation
//! in place of the textbook's random scan start so training is reproducible
//! bit-for-bit. Stopping: no example violates the KKT conditions by more
//! than 10⁻³, or 10⁵ optimization passes.

use serde::{Deserialize, Serialize};

use super::kernel::gaussian_kernel;
use super::{Classifier, ClassifyError, ImputationPolicy, KernelParams};
use crate::model::FingerprintDatabase;

/// KKT violation tolerance at which an example is considered satisfied.
const KKT_TOL: f64 = 1e-3;
/// Hard cap on optimization passes over the training set.
const MAX_PASSES: usize = 100_000;
/// Minimum meaningful change in an alpha during a pair step.
const ALPHA_EPS: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Two-class dual solver
// ---------------------------------------------------------------------------

/// Solution of one two-class dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoClassFit {
    /// One multiplier per training vector, in input order, 0 ≤ αᵢ ≤ C.
    pub alphas: Vec<f64>,
    /// Decision-function offset b in f(x) = Σ αᵢ yᵢ K(xᵢ, x) + b.
    pub bias: f64,
    /// Optimization passes consumed (diagnostic).
    pub passes: usize,
}

impl TwoClassFit {
    /// Decision value for a query point given the training set the fit came
    /// from.
    pub fn decision(
        &self,
        vectors: &[Vec<f64>],
        labels: &[f64],
        kernel: &KernelParams,
        x: &[f64],
    ) -> Result<f64, ClassifyError> {
        let mut f = self.bias;
        for ((alpha, y), v) in self.alphas.iter().zip(labels).zip(vectors) {
            if *alpha > 0.0 {
                f += alpha * y * gaussian_kernel(v, x, kernel)?;
            }
        }
        Ok(f)
    }
}

/// Dual objective W(α) for a candidate multiplier vector; the quantity SMO
/// maximizes, exposed so solutions can be checked against independent
/// solvers.
pub fn dual_objective(
    vectors: &[Vec<f64>],
    labels: &[f64],
    alphas: &[f64],
    kernel: &KernelParams,
) -> Result<f64, ClassifyError> {
    let n = vectors.len();
    let mut w: f64 = alphas.iter().sum();
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alphas[j] == 0.0 {
                continue;
            }
            let k = gaussian_kernel(&vectors[i], &vectors[j], kernel)?;
            w -= 0.5 * alphas[i] * labels[i] * alphas[j] * labels[j] * k;
        }
    }
    Ok(w)
}

/// Trains one two-class soft-margin SVM by SMO. `labels` must be ±1.
pub fn solve_two_class(
    vectors: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelParams,
    box_c: f64,
) -> Result<TwoClassFit, ClassifyError> {
    if vectors.is_empty() {
        return Err(ClassifyError::EmptyTrainingSet);
    }
    if !(box_c > 0.0) {
        return Err(ClassifyError::InvalidBoxConstraint(box_c));
    }
    let width = vectors[0].len();
    for v in vectors {
        if v.len() != width {
            return Err(ClassifyError::LengthMismatch {
                expected: width,
                got: v.len(),
            });
        }
    }
    debug_assert!(labels.iter().all(|&y| y == 1.0 || y == -1.0));

    // Cache the Gram matrix; training sets here are at most a few hundred
    // vectors.
    let n = vectors.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = gaussian_kernel(&vectors[i], &vectors[j], kernel)?;
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut smo = Smo {
        gram: &gram,
        y: labels,
        c: box_c,
        n,
        alphas: vec![0.0; n],
        bias: 0.0,
    };
    let passes = smo.run();
    Ok(TwoClassFit {
        alphas: smo.alphas,
        bias: smo.bias,
        passes,
    })
}

struct Smo<'a> {
    gram: &'a [f64],
    y: &'a [f64],
    c: f64,
    n: usize,
    alphas: Vec<f64>,
    bias: f64,
}

impl Smo<'_> {
    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n + j]
    }

    /// f(xᵢ) − yᵢ under the current multipliers.
    fn error(&self, i: usize) -> f64 {
        let mut f = self.bias;
        for j in 0..self.n {
            if self.alphas[j] > 0.0 {
                f += self.alphas[j] * self.y[j] * self.k(j, i);
            }
        }
        f - self.y[i]
    }

    fn is_free(&self, i: usize) -> bool {
        self.alphas[i] > 0.0 && self.alphas[i] < self.c
    }

    /// Alternates full passes with free-multiplier passes until a full pass
    /// changes nothing; returns the number of passes used.
    fn run(&mut self) -> usize {
        let mut examine_all = true;
        let mut passes = 0;
        loop {
            let mut changed = 0usize;
            for i in 0..self.n {
                if examine_all || self.is_free(i) {
                    changed += usize::from(self.examine(i));
                }
            }
            passes += 1;
            if passes >= MAX_PASSES {
                break;
            }
            if examine_all {
                if changed == 0 {
                    break;
                }
                examine_all = false;
            } else if changed == 0 {
                examine_all = true;
            }
        }
        passes
    }

    /// Tries to improve the dual using i2 as one end of a pair. Returns
    /// true when a step was taken.
    fn examine(&mut self, i2: usize) -> bool {
        let e2 = self.error(i2);
        let r2 = e2 * self.y[i2];
        let violates = (r2 < -KKT_TOL && self.alphas[i2] < self.c)
            || (r2 > KKT_TOL && self.alphas[i2] > 0.0);
        if !violates {
            return false;
        }

        // Heuristic 1: free multiplier maximizing |E1 − E2|.
        let mut best: Option<(usize, f64)> = None;
        for i1 in 0..self.n {
            if i1 != i2 && self.is_free(i1) {
                let gap = (self.error(i1) - e2).abs();
                if best.map_or(true, |(_, g)| gap > g) {
                    best = Some((i1, gap));
                }
            }
        }
        if let Some((i1, _)) = best {
            if self.step(i1, i2) {
                return true;
            }
        }
        // Heuristic 2: remaining free multipliers; heuristic 3: everything.
        // Deterministic rotation from i2+1 replaces the textbook random
        // start.
        for free_only in [true, false] {
            for offset in 1..self.n {
                let i1 = (i2 + offset) % self.n;
                if free_only && !self.is_free(i1) {
                    continue;
                }
                if i1 != i2 && self.step(i1, i2) {
                    return true;
                }
            }
        }
        false
    }

    /// Jointly optimizes (α₁, α₂) analytically. Returns true on a
    /// meaningful change.
    fn step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;

        // Feasible segment for α₂ keeping Σ αy fixed and both in [0, C].
        let (low, high) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if high - low < ALPHA_EPS {
            return false;
        }

        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2_new = if eta > 1e-15 {
            (a2 + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // Flat direction (duplicate points): move to whichever segment
            // end improves the objective.
            let obj_low = self.line_objective(i1, i2, low);
            let obj_high = self.line_objective(i1, i2, high);
            if obj_low > obj_high + 1e-12 {
                low
            } else if obj_high > obj_low + 1e-12 {
                high
            } else {
                return false;
            }
        };
        // Snap roundoff to the box.
        if a2_new < ALPHA_EPS {
            a2_new = 0.0;
        } else if a2_new > self.c - ALPHA_EPS {
            a2_new = self.c;
        }
        if (a2_new - a2).abs() < ALPHA_EPS * (a2_new + a2 + ALPHA_EPS) {
            return false;
        }
        let a1_new = (a1 + s * (a2 - a2_new)).clamp(0.0, self.c);

        // Keep b consistent so free vectors keep zero error.
        let b1 = self.bias - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
        let b2 = self.bias - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
        self.alphas[i1] = a1_new;
        self.alphas[i2] = a2_new;
        self.bias = if a1_new > 0.0 && a1_new < self.c {
            b1
        } else if a2_new > 0.0 && a2_new < self.c {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        true
    }

    /// Dual objective (up to a constant) restricted to the (i1, i2) line,
    /// as a function of the candidate α₂.
    fn line_objective(&self, i1: usize, i2: usize, a2_cand: f64) -> f64 {
        let (a1, a2) = (self.alphas[i1], self.alphas[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let s = y1 * y2;
        let a1_cand = a1 + s * (a2 - a2_cand);
        let (k11, k12, k22) = (self.k(i1, i1), self.k(i1, i2), self.k(i2, i2));
        // Interaction of the pair with the rest of the expansion.
        let f1 = self.error(i1) + self.y[i1];
        let f2 = self.error(i2) + self.y[i2];
        let v1 = f1 - self.bias - a1 * y1 * k11 - a2 * y2 * k12;
        let v2 = f2 - self.bias - a1 * y1 * k12 - a2 * y2 * k22;
        a1_cand + a2_cand
            - 0.5 * k11 * a1_cand * a1_cand
            - 0.5 * k22 * a2_cand * a2_cand
            - s * k12 * a1_cand * a2_cand
            - y1 * a1_cand * v1
            - y2 * a2_cand * v2
    }
}

// ---------------------------------------------------------------------------
// One-vs-one multiclass model
// ---------------------------------------------------------------------------

/// One trained class pair: support vectors with their signed weights
/// αᵢ yᵢ (positive class = `positive`, negative = `negative`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSvm {
    pub positive: usize,
    pub negative: usize,
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
}

impl PairwiseSvm {
    pub fn decision(&self, x: &[f64], kernel: &KernelParams) -> Result<f64, ClassifyError> {
        let mut f = self.bias;
        for (coeff, sv) in self.coefficients.iter().zip(&self.support_vectors) {
            f += coeff * gaussian_kernel(sv, x, kernel)?;
        }
        Ok(f)
    }
}

/// Gaussian-kernel SVM over L classes as L(L−1)/2 pairwise machines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub class_ids: Vec<String>,
    pub kernel: KernelParams,
    pub box_c: f64,
    pub pairs: Vec<PairwiseSvm>,
    feature_len: usize,
}

impl SvmModel {
    pub fn feature_len(&self) -> usize {
        self.feature_len
    }

    /// Majority vote over pairwise decisions. Ties go to the class with the
    /// largest sum of |decision value| over the pairs it won, then to the
    /// lexicographically smallest class id.
    pub fn predict_dense(&self, x: &[f64]) -> Result<&str, ClassifyError> {
        if x.len() != self.feature_len {
            return Err(ClassifyError::LengthMismatch {
                expected: self.feature_len,
                got: x.len(),
            });
        }
        let mut votes = vec![0usize; self.class_ids.len()];
        let mut weight = vec![0.0f64; self.class_ids.len()];
        for pair in &self.pairs {
            let f = pair.decision(x, &self.kernel)?;
            let winner = if f >= 0.0 { pair.positive } else { pair.negative };
            votes[winner] += 1;
            weight[winner] += f.abs();
        }
        let best = (0..self.class_ids.len())
            .max_by(|&a, &b| {
                (votes[a], weight[a])
                    .partial_cmp(&(votes[b], weight[b]))
                    .unwrap_or(std::cmp::Ordering::Equal)
                    // Reverse the id ordering so max_by prefers the
                    // lexicographically smallest id on full ties.
                    .then_with(|| self.class_ids[b].cmp(&self.class_ids[a]))
            })
            .expect("at least two classes");
        Ok(&self.class_ids[best])
    }
}

impl Classifier for SvmModel {
    fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    fn predict(
        &self,
        feature: &[Option<f64>],
        policy: &ImputationPolicy,
    ) -> Result<String, ClassifyError> {
        let dense = policy.impute(feature);
        self.predict_dense(&dense).map(str::to_string)
    }
}

/// Trains a one-vs-one SVM from pre-densified per-class training vectors
/// (class `i` = `per_class[i]`, labeled `class_ids[i]`).
pub fn train_svm_from_vectors(
    class_ids: &[String],
    per_class: &[Vec<Vec<f64>>],
    kernel: &KernelParams,
    box_c: f64,
) -> Result<SvmModel, ClassifyError> {
    if class_ids.len() < 2 {
        return Err(ClassifyError::TooFewClasses(class_ids.len()));
    }
    debug_assert_eq!(class_ids.len(), per_class.len());
    let mut feature_len = None;
    for (id, vectors) in class_ids.iter().zip(per_class) {
        if vectors.is_empty() {
            return Err(ClassifyError::EmptyClass(id.clone()));
        }
        for v in vectors {
            match feature_len {
                None => feature_len = Some(v.len()),
                Some(expected) if expected != v.len() => {
                    return Err(ClassifyError::LengthMismatch {
                        expected,
                        got: v.len(),
                    })
                }
                _ => {}
            }
        }
    }
    let feature_len = feature_len.expect("non-empty classes");

    let mut pairs = Vec::new();
    for i in 0..class_ids.len() {
        for j in (i + 1)..class_ids.len() {
            let mut vectors: Vec<Vec<f64>> = Vec::new();
            let mut labels: Vec<f64> = Vec::new();
            for v in &per_class[i] {
                vectors.push(v.clone());
                labels.push(1.0);
            }
            for v in &per_class[j] {
                vectors.push(v.clone());
                labels.push(-1.0);
            }
            let fit = solve_two_class(&vectors, &labels, kernel, box_c)?;
            let mut support_vectors = Vec::new();
            let mut coefficients = Vec::new();
            for ((alpha, y), v) in fit.alphas.iter().zip(&labels).zip(&vectors) {
                if *alpha > 0.0 {
                    support_vectors.push(v.clone());
                    coefficients.push(alpha * y);
                }
            }
            pairs.push(PairwiseSvm {
                positive: i,
                negative: j,
                support_vectors,
                coefficients,
                bias: fit.bias,
            });
        }
    }
    Ok(SvmModel {
        class_ids: class_ids.to_vec(),
        kernel: *kernel,
        box_c,
        pairs,
        feature_len,
    })
}

/// Trains on the rows of a fingerprint database (one training vector per
/// time row per class, masked features imputed by `policy`).
pub fn train_svm(
    db: &FingerprintDatabase,
    kernel: &KernelParams,
    box_c: f64,
    policy: &ImputationPolicy,
) -> Result<SvmModel, ClassifyError> {
    let class_ids = db.class_ids().to_vec();
    if class_ids.len() < 2 {
        return Err(ClassifyError::TooFewClasses(class_ids.len()));
    }
    let mut per_class = Vec::with_capacity(class_ids.len());
    for id in &class_ids {
        let rows = db.class_fingerprints(id)?;
        if rows.is_empty() {
            return Err(ClassifyError::EmptyClass(id.clone()));
        }
        per_class.push(policy.impute_rows(&rows));
    }
    train_svm_from_vectors(&class_ids, &per_class, kernel, box_c)
}

/// Classifies one masked feature vector with the documented one-vs-one
/// vote.
pub fn predict_svm(
    model: &SvmModel,
    feature: &[Option<f64>],
    policy: &ImputationPolicy,
) -> Result<String, ClassifyError> {
    model.predict(feature, policy)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_class(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    fn ids(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn separates_two_rssi_groups() {
        // Two classes one deep fade apart, as long-range fingerprints are.
        let model = train_svm_from_vectors(
            &ids(&["near", "far"]),
            &[scalar_class(&[-76.0]), scalar_class(&[-98.0])],
            &KernelParams::new(4.0),
            10.0,
        )
        .unwrap();
        assert_eq!(model.predict_dense(&[-76.0]).unwrap(), "near");
        assert_eq!(model.predict_dense(&[-98.0]).unwrap(), "far");
        // The boundary crosses between the groups.
        assert_eq!(model.predict_dense(&[-80.0]).unwrap(), "near");
        assert_eq!(model.predict_dense(&[-94.0]).unwrap(), "far");
    }

    #[test]
    fn midpoint_queries_go_to_the_nearer_class() {
        let model = train_svm_from_vectors(
            &ids(&["hot", "cold"]),
            &[
                scalar_class(&[-75.0, -76.0, -77.0]),
                scalar_class(&[-97.0, -98.0, -99.0]),
            ],
            &KernelParams::new(4.0),
            10.0,
        )
        .unwrap();
        assert_eq!(model.predict_dense(&[-87.0]).unwrap(), "hot");
        assert_eq!(model.predict_dense(&[-89.0]).unwrap(), "cold");
    }

    #[test]
    fn zero_training_error_on_separable_2d() {
        let class_a = vec![vec![0.0, 0.0], vec![1.0, 0.5]];
        let class_b = vec![vec![6.0, 6.0], vec![5.0, 6.5]];
        let model = train_svm_from_vectors(
            &ids(&["a", "b"]),
            &[class_a.clone(), class_b.clone()],
            &KernelParams::new(2.0),
            10.0,
        )
        .unwrap();
        for v in &class_a {
            assert_eq!(model.predict_dense(v).unwrap(), "a");
        }
        for v in &class_b {
            assert_eq!(model.predict_dense(v).unwrap(), "b");
        }
    }

    #[test]
    fn tolerates_overlapping_points() {
        // 20 points, two of which sit inside the other class.
        let mut a: Vec<f64> = (0..10).map(|i| -80.0 + i as f64 * 0.2).collect();
        let mut b: Vec<f64> = (0..10).map(|i| -90.0 + i as f64 * 0.2).collect();
        a[9] = -89.0; // stragglers
        b[9] = -79.0;
        let model = train_svm_from_vectors(
            &ids(&["a", "b"]),
            &[scalar_class(&a), scalar_class(&b)],
            &KernelParams::new(4.0),
            10.0,
        )
        .unwrap();
        let mut correct = 0;
        for &v in &a {
            correct += usize::from(model.predict_dense(&[v]).unwrap() == "a");
        }
        for &v in &b {
            correct += usize::from(model.predict_dense(&[v]).unwrap() == "b");
        }
        assert!(correct >= 18, "training accuracy {correct}/20");
    }

    #[test]
    fn dual_feasibility_holds() {
        // Σ αᵢ yᵢ = 0 and 0 ≤ α ≤ C after training.
        let vectors = vec![
            vec![-70.0],
            vec![-71.5],
            vec![-72.0],
            vec![-90.0],
            vec![-91.0],
            vec![-95.0],
        ];
        let labels = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let fit = solve_two_class(&vectors, &labels, &KernelParams::new(4.0), 10.0).unwrap();
        let balance: f64 = fit.alphas.iter().zip(&labels).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-9, "Σ αy = {balance}");
        assert!(fit.alphas.iter().all(|&a| (0.0..=10.0).contains(&a)));
    }

    #[test]
    fn kkt_conditions_hold_at_solution() {
        let vectors: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![if i < 6 { -75.0 } else { -92.0 } + i as f64 * 0.3])
            .collect();
        let labels: Vec<f64> = (0..12).map(|i| if i < 6 { 1.0 } else { -1.0 }).collect();
        let kernel = KernelParams::new(6.0);
        let fit = solve_two_class(&vectors, &labels, &kernel, 10.0).unwrap();
        for (i, &alpha) in fit.alphas.iter().enumerate() {
            let margin = labels[i]
                * fit
                    .decision(&vectors, &labels, &kernel, &vectors[i])
                    .unwrap();
            if alpha < 1e-9 {
                assert!(margin >= 1.0 - 2e-3, "α=0 point with margin {margin}");
            } else if alpha > 10.0 - 1e-9 {
                assert!(margin <= 1.0 + 2e-3, "α=C point with margin {margin}");
            } else {
                assert!((margin - 1.0).abs() <= 2e-3, "free point margin {margin}");
            }
        }
    }

    #[test]
    fn three_class_votes_resolve() {
        let model = train_svm_from_vectors(
            &ids(&["low", "mid", "high"]),
            &[
                scalar_class(&[-100.0, -101.0]),
                scalar_class(&[-85.0, -86.0]),
                scalar_class(&[-70.0, -71.0]),
            ],
            &KernelParams::new(4.0),
            10.0,
        )
        .unwrap();
        assert_eq!(model.predict_dense(&[-100.5]).unwrap(), "low");
        assert_eq!(model.predict_dense(&[-85.5]).unwrap(), "mid");
        assert_eq!(model.predict_dense(&[-70.5]).unwrap(), "high");
    }

    #[test]
    fn rejects_degenerate_training_input() {
        let err = train_svm_from_vectors(
            &ids(&["only"]),
            &[scalar_class(&[-80.0])],
            &KernelParams::new(1.0),
            10.0,
        )
        .unwrap_err();
        assert!(matches!(err, ClassifyError::TooFewClasses(1)));

        let err = train_svm_from_vectors(
            &ids(&["a", "b"]),
            &[scalar_class(&[-80.0]), vec![]],
            &KernelParams::new(1.0),
            10.0,
        )
        .unwrap_err();
        assert!(matches!(err, ClassifyError::EmptyClass(_)));

        let err = train_svm_from_vectors(
            &ids(&["a", "b"]),
            &[scalar_class(&[-80.0]), scalar_class(&[-90.0])],
            &KernelParams::new(1.0),
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, ClassifyError::InvalidBoxConstraint(_)));
    }

    #[test]
    fn imputed_floor_features_classify_deterministically() {
        let policy = ImputationPolicy::default();
        let model = train_svm_from_vectors(
            &ids(&["a", "b"]),
            &[
                vec![vec![-76.0, -140.0]],
                vec![vec![-140.0, -76.0]],
            ],
            &KernelParams::new(16.0),
            10.0,
        )
        .unwrap();
        // An all-masked query imputes to the floor on both features,
        // equidistant from both classes: the tie-break must make the answer
        // stable, not an error.
        let label = model.predict(&[None, None], &policy).unwrap();
        assert_eq!(label, "a");
    }
}
