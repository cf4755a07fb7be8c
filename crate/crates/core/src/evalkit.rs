//! Nearest-neighbour retrieval evaluation over a descriptor database.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_distance, GeometryError, Quaternion};
use crate::losses::FeatureVec;
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("descriptor database is empty")]
    EmptyDatabase,
    #[error("no queries")]
    NoQueries,
    #[error("descriptor dimension mismatch: database has {expected}, entry {index} has {found}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("query {index}: {source}")]
    Pose {
        index: usize,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptorEntry<T> {
    pub feature: FeatureVec<T>,
    pub class_id: u32,
    pub pose: Quaternion<T>,
}

/// Retrieval metrics. Angular statistics cover correctly classified queries only and are
/// absent when there are none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_median_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_mean_deg: Option<f64>,
    pub n_queries: usize,
    pub n_correct: usize,
}

fn squared_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Index of the entry closest to `f` in Euclidean distance; the lowest index wins ties.
pub fn nn_index<T: Real>(db: &[DescriptorEntry<T>], f: &FeatureVec<T>) -> Result<usize, EvalError> {
    let first = db.first().ok_or(EvalError::EmptyDatabase)?;
    let dim = first.feature.len();
    if f.len() != dim {
        return Err(EvalError::DimensionMismatch {
            index: 0,
            expected: dim,
            found: f.len(),
        });
    }
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, e) in db.iter().enumerate() {
        if e.feature.len() != dim {
            return Err(EvalError::DimensionMismatch {
                index: i,
                expected: dim,
                found: e.feature.len(),
            });
        }
        let d = squared_distance(&e.feature.0, &f.0);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

pub fn nn_query<'a, T: Real>(db: &'a [DescriptorEntry<T>], f: &FeatureVec<T>) -> Result<&'a DescriptorEntry<T>, EvalError> {
    nn_index(db, f).map(|i| &db[i])
}

/// Lower middle element for even counts. `values` must be non-empty.
pub fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

/// Classifies every query by its nearest database entry and measures the pose error of the
/// correctly classified ones.
pub fn evaluate<T: Real>(db: &[DescriptorEntry<T>], queries: &[DescriptorEntry<T>]) -> Result<EvalReport, EvalError> {
    if db.is_empty() {
        return Err(EvalError::EmptyDatabase);
    }
    if queries.is_empty() {
        return Err(EvalError::NoQueries);
    }
    let outcomes = queries
        .par_iter()
        .enumerate()
        .map(|(i, q)| {
            let hit = &db[nn_index(db, &q.feature)?];
            if hit.class_id != q.class_id {
                return Ok(None);
            }
            let angle = angular_distance(hit.pose, q.pose).map_err(|source| EvalError::Pose { index: i, source })?;
            Ok(Some(angle.as_f64().to_degrees()))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let mut errors: Vec<f64> = outcomes.into_iter().flatten().collect();
    let n_correct = errors.len();
    let (median, mean) = if errors.is_empty() {
        (None, None)
    } else {
        let mean = errors.iter().sum::<f64>() / n_correct as f64;
        (Some(lower_median(&mut errors)), Some(mean))
    };
    Ok(EvalReport {
        accuracy: n_correct as f64 / queries.len() as f64,
        angular_median_deg: median,
        angular_mean_deg: mean,
        n_queries: queries.len(),
        n_correct,
    })
}
