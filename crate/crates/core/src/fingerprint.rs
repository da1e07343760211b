//! Room-level recognition from WiFi RSS fingerprints.
//!
//! A fingerprint is the vector of RSS readings from every known AP in
//! a fixed order (missing APs hold the -100 dBm sentinel). Two
//! classifiers are trained over a labeled survey database: k-nearest
//! neighbors over raw vectors and a linear one-vs-rest SVM on
//! standardized features. Online recognition requires both to agree;
//! on a mismatch a fresh scan is pulled and the vote repeats, up to a
//! retry budget.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::floorplan::{ApId, FloorPlan, RoomId};

/// Sentinel RSS for an AP that was not heard in a scan, dBm.
pub const MISSING_AP_DBM: f64 = -100.0;

/// Current model-file format version.
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FingerprintError {
    #[error("fingerprint database is empty")]
    EmptyDb,
    #[error("training needs at least 2 distinct room labels, got {0}")]
    SingleLabel(usize),
    #[error("vector length {got} does not match {expected} known APs")]
    LengthMismatch { expected: usize, got: usize },
    #[error("database labels room {0} which the floor plan does not define")]
    UnknownRoom(RoomId),
    #[error("unsupported model file version {0}")]
    BadModelVersion(u32),
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// RSS vector over the fixed AP ordering, clamped to [-100, 0] dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FingerprintVector {
    pub values: Vec<f64>,
}

impl FingerprintVector {
    /// Clamps every entry into the representable [-100, 0] dBm band.
    pub fn new(values: Vec<f64>) -> Self {
        FingerprintVector {
            values: values
                .into_iter()
                .map(|v| v.clamp(MISSING_AP_DBM, 0.0))
                .collect(),
        }
    }

    /// Builds a vector from (ap_id, rss) readings; APs not present in
    /// the scan take the missing sentinel.
    pub fn from_scan(ap_order: &[ApId], readings: &[(ApId, f64)]) -> Self {
        let values = ap_order
            .iter()
            .map(|ap| {
                readings
                    .iter()
                    .find(|(id, _)| id == ap)
                    .map(|(_, rss)| *rss)
                    .unwrap_or(MISSING_AP_DBM)
            })
            .collect();
        Self::new(values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn distance(&self, other: &FingerprintVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DbEntry {
    pub room: RoomId,
    pub rss: FingerprintVector,
}

/// Labeled survey vectors, one slot per known AP in `ap_order`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerprintDb {
    pub ap_order: Vec<ApId>,
    pub entries: Vec<DbEntry>,
}

impl FingerprintDb {
    pub fn new(ap_order: Vec<ApId>) -> Self {
        FingerprintDb {
            ap_order,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, room: impl Into<RoomId>, rss: FingerprintVector) {
        self.entries.push(DbEntry {
            room: room.into(),
            rss,
        });
    }

    pub fn labels(&self) -> BTreeSet<&RoomId> {
        self.entries.iter().map(|e| &e.room).collect()
    }

    pub fn check_vector(&self, v: &FingerprintVector) -> Result<(), FingerprintError> {
        if v.len() != self.ap_order.len() {
            return Err(FingerprintError::LengthMismatch {
                expected: self.ap_order.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// Every room label must exist in the floor plan.
    pub fn validate_against(&self, plan: &FloorPlan) -> Result<(), FingerprintError> {
        for e in &self.entries {
            if plan.room(&e.room).is_none() {
                return Err(FingerprintError::UnknownRoom(e.room.clone()));
            }
        }
        Ok(())
    }

    pub fn read(mut reader: impl Read) -> Result<Self, FingerprintError> {
        let mut buf = String::new();
        reader.read_to_string(&mut buf)?;
        let db: FingerprintDb = serde_json::from_str(&buf)?;
        for e in &db.entries {
            db.check_vector(&e.rss)?;
        }
        Ok(db)
    }

    pub fn write(&self, mut writer: impl Write) -> Result<(), FingerprintError> {
        serde_json::to_writer(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}

/// K-nearest-neighbor classifier holding the database verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub db: FingerprintDb,
}

/// Linear one-vs-rest SVM on standardized features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    /// Room labels in ascending order, one scorer per label.
    pub labels: Vec<RoomId>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    /// Per-dimension standardization parameters from training.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

const SVM_ITERATIONS: usize = 500;
const SVM_LEARNING_RATE: f64 = 0.1;
const SVM_LAMBDA: f64 = 1e-3;

/// Trains both classifiers over the survey database.
///
/// KNN stores the database verbatim with k = 3 (capped to the database
/// size, kept odd). The SVM runs full-batch sub-gradient descent on
/// L2-regularized hinge loss for a fixed iteration count, so training
/// is deterministic.
pub fn train(db: &FingerprintDb) -> Result<(KnnModel, SvmModel), FingerprintError> {
    if db.entries.is_empty() {
        return Err(FingerprintError::EmptyDb);
    }
    let labels: Vec<RoomId> = db.labels().into_iter().cloned().collect();
    if labels.len() < 2 {
        return Err(FingerprintError::SingleLabel(labels.len()));
    }
    for e in &db.entries {
        db.check_vector(&e.rss)?;
    }

    let k = if db.entries.len() >= 3 { 3 } else { 1 };
    let knn = KnnModel { k, db: db.clone() };

    let dim = db.ap_order.len();
    let n = db.entries.len();
    let mut mean = vec![0.0; dim];
    for e in &db.entries {
        for (m, v) in mean.iter_mut().zip(&e.rss.values) {
            *m += v / n as f64;
        }
    }
    let mut std = vec![0.0; dim];
    for e in &db.entries {
        for (s, (v, m)) in std.iter_mut().zip(e.rss.values.iter().zip(&mean)) {
            *s += (v - m) * (v - m) / n as f64;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 1.0; // constant feature: leave it centered
        }
    }
    let standardized: Vec<Vec<f64>> = db
        .entries
        .iter()
        .map(|e| {
            e.rss
                .values
                .iter()
                .zip(mean.iter().zip(&std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect()
        })
        .collect();

    let mut weights = Vec::with_capacity(labels.len());
    let mut biases = Vec::with_capacity(labels.len());
    for label in &labels {
        let y: Vec<f64> = db
            .entries
            .iter()
            .map(|e| if &e.room == label { 1.0 } else { -1.0 })
            .collect();
        let mut w = vec![0.0; dim];
        let mut b = 0.0;
        for t in 1..=SVM_ITERATIONS {
            let lr = SVM_LEARNING_RATE / (t as f64).sqrt();
            let mut grad_w: Vec<f64> = w.iter().map(|wi| SVM_LAMBDA * wi).collect();
            let mut grad_b = 0.0;
            for (x, &yi) in standardized.iter().zip(&y) {
                let margin = yi * (dot(&w, x) + b);
                if margin < 1.0 {
                    for (g, xi) in grad_w.iter_mut().zip(x) {
                        *g -= yi * xi / n as f64;
                    }
                    grad_b -= yi / n as f64;
                }
            }
            for (wi, g) in w.iter_mut().zip(&grad_w) {
                *wi -= lr * g;
            }
            b -= lr * grad_b;
        }
        weights.push(w);
        biases.push(b);
    }

    Ok((
        knn,
        SvmModel {
            labels,
            weights,
            biases,
            mean,
            std,
        },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Majority label among the k nearest entries (Euclidean distance,
/// ties by database order); vote ties resolve by smallest mean
/// distance, then lowest room id.
pub fn classify_knn(v: &FingerprintVector, m: &KnnModel) -> Result<RoomId, FingerprintError> {
    m.db.check_vector(v)?;
    let mut ranked: Vec<(f64, usize)> = m
        .db
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.rss.distance(v), i))
        .collect();
    ranked.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let k = m.k.min(ranked.len());
    let nearest = &ranked[..k];

    let mut votes: Vec<(&RoomId, usize, f64)> = Vec::new(); // (label, count, dist sum)
    for &(d, i) in nearest {
        let label = &m.db.entries[i].room;
        match votes.iter_mut().find(|(l, _, _)| *l == label) {
            Some(entry) => {
                entry.1 += 1;
                entry.2 += d;
            }
            None => votes.push((label, 1, d)),
        }
    }
    let winner = votes
        .into_iter()
        .min_by(|a, b| {
            // Most votes, then smallest mean distance, then lowest id.
            b.1.cmp(&a.1)
                .then_with(|| {
                    (a.2 / a.1 as f64)
                        .partial_cmp(&(b.2 / b.1 as f64))
                        .expect("finite distances")
                })
                .then_with(|| a.0.cmp(b.0))
        })
        .expect("k >= 1");
    Ok(winner.0.clone())
}

/// Label of the one-vs-rest scorer with the highest decision value on
/// the standardized vector; exact ties resolve to the lowest room id.
pub fn classify_svm(v: &FingerprintVector, m: &SvmModel) -> Result<RoomId, FingerprintError> {
    if v.len() != m.mean.len() {
        return Err(FingerprintError::LengthMismatch {
            expected: m.mean.len(),
            got: v.len(),
        });
    }
    let x: Vec<f64> = v
        .values
        .iter()
        .zip(m.mean.iter().zip(&m.std))
        .map(|(v, (mu, s))| (v - mu) / s)
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, (w, b)) in m.weights.iter().zip(&m.biases).enumerate() {
        let score = dot(w, &x) + b;
        // Labels are in ascending order, so strict improvement keeps
        // the lowest id on ties.
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((i, score));
        }
    }
    let (idx, _) = best.expect("model has scorers");
    Ok(m.labels[idx].clone())
}

/// Result of the dual-classifier recognition protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct Recognition {
    /// Agreed room, or None when the classifiers never agreed
    /// (or the scan source ran dry).
    pub room: Option<RoomId>,
    pub scans_used: usize,
    /// Labels from the last attempt, for diagnostics.
    pub last_knn: Option<RoomId>,
    pub last_svm: Option<RoomId>,
}

/// Pulls scan vectors and classifies with both models until they
/// agree, retrying on mismatch with a fresh vector, up to
/// `max_retries` total attempts.
pub fn recognize(
    mut scan: impl FnMut() -> Option<FingerprintVector>,
    knn: &KnnModel,
    svm: &SvmModel,
    max_retries: usize,
) -> Result<Recognition, FingerprintError> {
    let mut out = Recognition {
        room: None,
        scans_used: 0,
        last_knn: None,
        last_svm: None,
    };
    for _ in 0..max_retries {
        let Some(v) = scan() else {
            return Ok(out); // source exhausted
        };
        out.scans_used += 1;
        let a = classify_knn(&v, knn)?;
        let b = classify_svm(&v, svm)?;
        out.last_knn = Some(a.clone());
        out.last_svm = Some(b.clone());
        if a == b {
            out.room = Some(a);
            return Ok(out);
        }
    }
    Ok(out)
}

/// Versioned on-disk bundle of both trained models.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub knn: KnnModel,
    pub svm: SvmModel,
}

impl ModelFile {
    pub fn new(knn: KnnModel, svm: SvmModel) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            knn,
            svm,
        }
    }

    pub fn read(mut reader: impl Read) -> Result<Self, FingerprintError> {
        let mut buf = String::new();
        reader.read_to_string(&mut buf)?;
        let model: ModelFile = serde_json::from_str(&buf)?;
        if model.version != MODEL_VERSION {
            return Err(FingerprintError::BadModelVersion(model.version));
        }
        Ok(model)
    }

    pub fn write(&self, mut writer: impl Write) -> Result<(), FingerprintError> {
        serde_json::to_writer(&mut writer, self)?;
        writeln!(writer)?;
        Ok(())
    }
}
