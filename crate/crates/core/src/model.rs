//! Domain model for fingerprint localization: RSSI messages, the T x N x L
//! fingerprint database (time x receiver x anchor class), anchor classes,
//! and the geometric error floor that class separation imposes on any
//! classifier.
//!
//! Missing values are first-class here: a receiver that never heard a
//! message contributes an explicit mask, not a sentinel dBm value. What to
//! substitute for a masked feature is classifier policy (see
//! `classify::ImputationPolicy`), not physics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Feature vector with per-entry missing-value mask (`None` = not heard).
pub type MaskedVector = Vec<Option<f64>>;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Validation failures when assembling or querying the data model.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// Database construction got an empty message list.
    NoTrainingData,
    /// Two messages share the same (node, receiver, time index) key.
    DuplicateSample {
        node_id: String,
        receiver_id: String,
        time_index: u32,
    },
    /// A message's node id matches no anchor class.
    UnknownNode(String),
    /// A message names a receiver that is not part of the deployment.
    UnknownReceiver(String),
    /// Database construction requires at least one receiver.
    NoReceivers,
    /// RSSI values must be finite dBm.
    NonFiniteRssi { node_id: String, time_index: u32 },
    /// Feature vectors in one series must all have the same length.
    RaggedSeries { expected: usize, got: usize },
    /// Averaging factor k must be at least 1.
    ZeroAveragingFactor,
    /// Class separation needs at least two anchors.
    SeparationUndefined,
    /// A class id was not found among the anchors.
    UnknownClass(String),
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::NoTrainingData => write!(f, "no training data: message list is empty"),
            ModelError::DuplicateSample {
                node_id,
                receiver_id,
                time_index,
            } => write!(
                f,
                "duplicate sample for node '{node_id}', receiver '{receiver_id}', t={time_index}"
            ),
            ModelError::UnknownNode(id) => write!(f, "message from node '{id}' matches no anchor"),
            ModelError::UnknownReceiver(id) => write!(f, "unknown receiver '{id}'"),
            ModelError::NoReceivers => write!(f, "receiver list is empty"),
            ModelError::NonFiniteRssi { node_id, time_index } => {
                write!(f, "non-finite RSSI from node '{node_id}' at t={time_index}")
            }
            ModelError::RaggedSeries { expected, got } => {
                write!(f, "feature vectors disagree in length: expected {expected}, got {got}")
            }
            ModelError::ZeroAveragingFactor => write!(f, "averaging factor k must be >= 1"),
            ModelError::SeparationUndefined => {
                write!(f, "class separation undefined: need at least two anchors")
            }
            ModelError::UnknownClass(id) => write!(f, "unknown class id '{id}'"),
        }
    }
}

impl std::error::Error for ModelError {}

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Planar position in a local metric frame.
///
/// Latitude/longitude conversion is an ingestion concern (harness side);
/// everything in the core model works in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub y_m: f64,
}

impl Position {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        Position { x_m, y_m }
    }

    /// Euclidean distance in meters.
    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }
}

/// One received uplink: a node's message as seen by one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssiMessage {
    pub node_id: String,
    pub receiver_id: String,
    /// Non-negative message index; unique per (node, receiver) in a dataset.
    pub time_index: u32,
    pub rssi_dbm: f64,
}

/// A GPS-equipped anchor node: its class identity, surveyed position, and
/// (once a database is built) its labeled training fingerprints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorClass {
    pub class_id: String,
    pub anchor_position: Position,
    /// One masked feature vector per training time index, length N.
    #[serde(default)]
    pub training_fingerprints: Vec<MaskedVector>,
}

impl AnchorClass {
    pub fn new(class_id: impl Into<String>, anchor_position: Position) -> Self {
        AnchorClass {
            class_id: class_id.into(),
            anchor_position,
            training_fingerprints: Vec::new(),
        }
    }
}

/// One classification decision scored both in feature space and
/// geographically.
///
/// Feature-space residual is the squared distance between the training
/// centroids of the predicted and true classes (0 when they coincide);
/// headline metrics use the geographic error, the distance between the two
/// anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub predicted_class: String,
    pub true_class: String,
    /// Squared feature-space distance between class centroids, dB^2.
    pub feature_residual: f64,
    /// Distance between the predicted and true anchor positions, meters.
    pub geographic_error_m: f64,
}

impl ClassificationOutcome {
    pub fn is_correct(&self) -> bool {
        self.predicted_class == self.true_class
    }
}

/// The T x N x L fingerprint tensor: RSSI per time index, per receiver, per
/// anchor class, with an explicit missing-value mask.
///
/// Time indices are ranked per anchor: each anchor's distinct time indices
/// map, in ascending order, to rows 0..T_l. T is the largest per-anchor row
/// count; shorter anchors are mask-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDatabase {
    /// Flattened tensor, index `(t * N + n) * L + l`.
    values: Vec<Option<f64>>,
    receiver_ids: Vec<String>,
    class_ids: Vec<String>,
    times: usize,
}

impl FingerprintDatabase {
    /// Number of time rows T.
    pub fn times(&self) -> usize {
        self.times
    }

    /// Receiver ids in feature order (the order given at build time).
    pub fn receiver_ids(&self) -> &[String] {
        &self.receiver_ids
    }

    /// Class ids in anchor order.
    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    /// Tensor entry at (time row, receiver index, class index).
    pub fn get(&self, t: usize, n: usize, l: usize) -> Option<f64> {
        self.values[(t * self.receiver_ids.len() + n) * self.class_ids.len() + l]
    }

    /// All T feature rows for one class, masked where unheard.
    pub fn class_rows(&self, class_id: &str) -> Result<Vec<MaskedVector>, ModelError> {
        let l = self
            .class_ids
            .iter()
            .position(|id| id == class_id)
            .ok_or_else(|| ModelError::UnknownClass(class_id.to_string()))?;
        let n_count = self.receiver_ids.len();
        let mut rows = Vec::with_capacity(self.times);
        for t in 0..self.times {
            let mut row = Vec::with_capacity(n_count);
            for n in 0..n_count {
                row.push(self.get(t, n, l));
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// Rows for one class with fully-masked trailing padding removed, i.e.
    /// only the time rows the anchor actually transmitted.
    pub fn class_fingerprints(&self, class_id: &str) -> Result<Vec<MaskedVector>, ModelError> {
        let mut rows = self.class_rows(class_id)?;
        while rows
            .last()
            .is_some_and(|row| row.iter().all(Option::is_none))
        {
            rows.pop();
        }
        Ok(rows)
    }

    /// Flattens the tensor back into messages (node id = class id, time
    /// index = row rank). Together with [`build_fingerprint_db`] this
    /// round-trips every unmasked entry.
    pub fn to_messages(&self) -> Vec<RssiMessage> {
        let mut out = Vec::new();
        for (l, class_id) in self.class_ids.iter().enumerate() {
            for t in 0..self.times {
                for (n, receiver_id) in self.receiver_ids.iter().enumerate() {
                    if let Some(rssi_dbm) = self.get(t, n, l) {
                        out.push(RssiMessage {
                            node_id: class_id.clone(),
                            receiver_id: receiver_id.clone(),
                            time_index: t as u32,
                            rssi_dbm,
                        });
                    }
                }
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Builds the T x N x L fingerprint database from anchor training messages.
///
/// Every message must come from a listed anchor and a listed receiver;
/// entries with no corresponding message are masked. T is the largest
/// per-anchor count of distinct time indices.
pub fn build_fingerprint_db(
    messages: &[RssiMessage],
    anchors: &[AnchorClass],
    receivers: &[String],
) -> Result<FingerprintDatabase, ModelError> {
    if messages.is_empty() {
        return Err(ModelError::NoTrainingData);
    }
    if receivers.is_empty() {
        return Err(ModelError::NoReceivers);
    }
    let class_ids: Vec<String> = anchors.iter().map(|a| a.class_id.clone()).collect();
    let class_index: BTreeMap<&str, usize> = class_ids
        .iter()
        .enumerate()
        .map(|(l, id)| (id.as_str(), l))
        .collect();
    for message in messages {
        if !class_index.contains_key(message.node_id.as_str()) {
            return Err(ModelError::UnknownNode(message.node_id.clone()));
        }
    }

    let per_anchor = tabulate_series(messages, receivers)?;
    let times = per_anchor.values().map(Vec::len).max().unwrap_or(0);
    let n_count = receivers.len();
    let l_count = class_ids.len();
    let mut values = vec![None; times * n_count * l_count];
    for (node_id, rows) in &per_anchor {
        let l = class_index[node_id.as_str()];
        for (t, row) in rows.iter().enumerate() {
            for (n, value) in row.iter().enumerate() {
                values[(t * n_count + n) * l_count + l] = *value;
            }
        }
    }

    Ok(FingerprintDatabase {
        values,
        receiver_ids: receivers.to_vec(),
        class_ids,
        times,
    })
}

/// Groups messages by node into time-ordered masked feature rows (one row
/// per distinct time index, features in `receivers` order).
///
/// This is the featurization shared by database construction and test-node
/// evaluation, so training and test vectors always agree on feature order.
pub fn tabulate_series(
    messages: &[RssiMessage],
    receivers: &[String],
) -> Result<BTreeMap<String, Vec<MaskedVector>>, ModelError> {
    if receivers.is_empty() {
        return Err(ModelError::NoReceivers);
    }
    let receiver_index: BTreeMap<&str, usize> = receivers
        .iter()
        .enumerate()
        .map(|(n, id)| (id.as_str(), n))
        .collect();

    // Distinct time indices per node, ranked ascending into dense rows.
    let mut time_sets: BTreeMap<&str, BTreeSet<u32>> = BTreeMap::new();
    for message in messages {
        if !message.rssi_dbm.is_finite() {
            return Err(ModelError::NonFiniteRssi {
                node_id: message.node_id.clone(),
                time_index: message.time_index,
            });
        }
        if !receiver_index.contains_key(message.receiver_id.as_str()) {
            return Err(ModelError::UnknownReceiver(message.receiver_id.clone()));
        }
        time_sets
            .entry(message.node_id.as_str())
            .or_default()
            .insert(message.time_index);
    }

    let mut out: BTreeMap<String, Vec<MaskedVector>> = BTreeMap::new();
    for (node_id, times) in &time_sets {
        let rank: BTreeMap<u32, usize> = times.iter().enumerate().map(|(r, &t)| (t, r)).collect();
        out.insert(
            node_id.to_string(),
            vec![vec![None; receivers.len()]; rank.len()],
        );
    }
    for message in messages {
        let times = &time_sets[message.node_id.as_str()];
        let row = times.iter().position(|&t| t == message.time_index).unwrap();
        let n = receiver_index[message.receiver_id.as_str()];
        let slot = &mut out.get_mut(&message.node_id).unwrap()[row][n];
        if slot.is_some() {
            return Err(ModelError::DuplicateSample {
                node_id: message.node_id.clone(),
                receiver_id: message.receiver_id.clone(),
                time_index: message.time_index,
            });
        }
        *slot = Some(message.rssi_dbm);
    }
    Ok(out)
}

/// Replaces consecutive non-overlapping groups of k vectors by their
/// per-feature mean; a trailing partial group is dropped.
///
/// Masked entries are excluded from each mean; an output feature is masked
/// only when it is masked in all k inputs.
pub fn average_k_by_k(series: &[MaskedVector], k: usize) -> Result<Vec<MaskedVector>, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroAveragingFactor);
    }
    let Some(first) = series.first() else {
        return Ok(Vec::new());
    };
    let width = first.len();
    for row in series {
        if row.len() != width {
            return Err(ModelError::RaggedSeries {
                expected: width,
                got: row.len(),
            });
        }
    }

    let mut out = Vec::with_capacity(series.len() / k);
    for group in series.chunks_exact(k) {
        let mut averaged = Vec::with_capacity(width);
        for feature in 0..width {
            let mut sum = 0.0;
            let mut count = 0usize;
            for row in group {
                if let Some(v) = row[feature] {
                    sum += v;
                    count += 1;
                }
            }
            averaged.push((count > 0).then(|| sum / count as f64));
        }
        out.push(averaged);
    }
    Ok(out)
}

/// Minimum pairwise distance D between anchor positions: the floor on the
/// geographic error of any misclassification.
pub fn class_separation(anchors: &[AnchorClass]) -> Result<f64, ModelError> {
    if anchors.len() < 2 {
        return Err(ModelError::SeparationUndefined);
    }
    let mut min = f64::INFINITY;
    for (i, a) in anchors.iter().enumerate() {
        for b in &anchors[i + 1..] {
            min = min.min(a.anchor_position.distance_to(&b.anchor_position));
        }
    }
    Ok(min)
}

/// Geographic cost of a classification decision: distance between the
/// predicted and true anchor positions (0 when the ids match).
pub fn geographic_error(
    predicted: &str,
    truth: &str,
    anchors: &[AnchorClass],
) -> Result<f64, ModelError> {
    let find = |id: &str| {
        anchors
            .iter()
            .find(|a| a.class_id == id)
            .map(|a| a.anchor_position)
            .ok_or_else(|| ModelError::UnknownClass(id.to_string()))
    };
    let p = find(predicted)?;
    let t = find(truth)?;
    Ok(p.distance_to(&t))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
