//! Forward values of the image-translation and descriptor losses.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{angular_distance, GeometryError, Quaternion};
use crate::patch::{DepthPatch, ForegroundMask};
use crate::scalar::Real;

pub const PROBABILITY_CLAMP: f64 = 1e-7;
pub const TRIPLET_EPS: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(String, String),
    #[error("probability {0} outside [0, 1]")]
    NotAProbability(f64),
    #[error("dissimilar-class margin must exceed pi, got {0}")]
    MarginTooSmall(f64),
    #[error("margin must be non-negative, got {0}")]
    NegativeMargin(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Descriptor vector.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVec<T>(pub Vec<T>);

impl<T: Real> FeatureVec<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn squared_distance(&self, other: &Self) -> Result<T, LossError> {
        check_len(self.len(), other.len())?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum())
    }
}

impl<T> From<Vec<T>> for FeatureVec<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

fn check_len(a: usize, b: usize) -> Result<(), LossError> {
    if a != b {
        return Err(LossError::DimensionMismatch(a.to_string(), b.to_string()));
    }
    Ok(())
}

fn check_patches<T: Real>(a: &DepthPatch<T>, b: &DepthPatch<T>) -> Result<(), LossError> {
    if !a.same_shape(b) {
        return Err(LossError::DimensionMismatch(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", b.width, b.height),
        ));
    }
    Ok(())
}

/// Mean absolute difference over all pixels.
pub fn l1_loss<T: Real>(a: &DepthPatch<T>, b: &DepthPatch<T>) -> Result<T, LossError> {
    check_patches(a, b)?;
    if a.values.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = a.values.iter().zip(&b.values).map(|(&x, &y)| (x - y).abs()).sum();
    Ok(sum / T::from_usize_lossy(a.values.len()))
}

/// Mean absolute difference over the pixels where `mask` is set; 0 for an empty mask.
pub fn foreground_l1<T: Real>(a: &DepthPatch<T>, b: &DepthPatch<T>, mask: &ForegroundMask) -> Result<T, LossError> {
    check_patches(a, b)?;
    if mask.width != a.width || mask.height != a.height {
        return Err(LossError::DimensionMismatch(
            format!("{}x{}", a.width, a.height),
            format!("{}x{}", mask.width, mask.height),
        ));
    }
    let mut sum = T::zero();
    let mut count = 0usize;
    for ((&x, &y), &m) in a.values.iter().zip(&b.values).zip(&mask.values) {
        if m != 0 {
            sum = sum + (x - y).abs();
            count += 1;
        }
    }
    Ok(sum / T::from_usize_lossy(count.max(1)))
}

/// Adversarial terms for one discriminator output pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialLoss<T> {
    /// `-(ln d_real + ln(1 - d_fake))`
    pub discriminator: T,
    /// Non-saturating generator term `-ln d_fake`.
    pub generator: T,
    /// Min-max generator term `ln(1 - d_fake)`; minimizing it is the original saddle-point form.
    pub generator_minmax: T,
}

pub fn discriminator_bce<T: Real>(d_real: T, d_fake: T) -> Result<AdversarialLoss<T>, LossError> {
    for p in [d_real, d_fake] {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(LossError::NotAProbability(p.as_f64()));
        }
    }
    let lo = T::lit(PROBABILITY_CLAMP);
    let hi = T::one() - lo;
    let r = d_real.max(lo).min(hi);
    let f = d_fake.max(lo).min(hi);
    Ok(AdversarialLoss {
        discriminator: -(r.ln() + (T::one() - f).ln()),
        generator: -f.ln(),
        generator_minmax: (T::one() - f).ln(),
    })
}

/// Euclidean distance between task features.
pub fn task_feature_loss<T: Real>(f1: &FeatureVec<T>, f2: &FeatureVec<T>) -> Result<T, LossError> {
    Ok(f1.squared_distance(f2)?.sqrt())
}

/// Weights of the combined generator objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub adversarial: f64,
    pub l1: f64,
    pub foreground: f64,
    pub task: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            adversarial: 1.0,
            l1: 100.0,
            foreground: 200.0,
            task: 10.0,
        }
    }
}

impl LossWeights {
    pub fn is_valid(&self) -> bool {
        [self.adversarial, self.l1, self.foreground, self.task]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

pub fn generator_objective<T: Real>(adversarial: T, l1: T, foreground: T, task: T, w: &LossWeights) -> T {
    T::lit(w.adversarial) * adversarial + T::lit(w.l1) * l1 + T::lit(w.foreground) * foreground + T::lit(w.task) * task
}

pub const DEFAULT_CLASS_MARGIN: f64 = std::f64::consts::TAU;

/// Triplet margin: the rotation angle between the poses for the same class, `n` otherwise.
pub fn pose_margin<T: Real>(
    q_b: &Quaternion<T>,
    q_p: &Quaternion<T>,
    class_b: u32,
    class_p: u32,
    n: T,
) -> Result<T, LossError> {
    if !(n > T::PI()) {
        return Err(LossError::MarginTooSmall(n.as_f64()));
    }
    if class_b == class_p {
        Ok(angular_distance(*q_b, *q_p)?)
    } else {
        Ok(n)
    }
}

/// `max(0, 1 - |f_b - f_n|^2 / max(|f_b - f_p|^2 + m, eps))`
pub fn triplet_loss<T: Real>(
    f_b: &FeatureVec<T>,
    f_p: &FeatureVec<T>,
    f_n: &FeatureVec<T>,
    m: T,
) -> Result<T, LossError> {
    if !(m >= T::zero()) {
        return Err(LossError::NegativeMargin(m.as_f64()));
    }
    let neg = f_b.squared_distance(f_n)?;
    let pos = f_b.squared_distance(f_p)?;
    Ok(triplet_from_distances(pos, neg, m))
}

/// Triplet loss from precomputed squared distances.
pub fn triplet_from_distances<T: Real>(pos_sq: T, neg_sq: T, m: T) -> T {
    (T::one() - neg_sq / (pos_sq + m).max(T::lit(TRIPLET_EPS))).max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVec<f64> {
        FeatureVec(v.to_vec())
    }

    #[test]
    fn l1_examples() {
        let ones = DepthPatch::<f64>::filled(64, 64, 1.0);
        let zeros = DepthPatch::<f64>::zeros(64, 64);
        assert_eq!(l1_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(l1_loss(&ones, &zeros).unwrap(), 1.0);
        let mut half = zeros.clone();
        for v in half.values.iter_mut().step_by(2) {
            *v = 0.5;
        }
        assert_eq!(l1_loss(&half, &zeros).unwrap(), 0.25);
        assert!(l1_loss(&ones, &DepthPatch::zeros(8, 8)).is_err());
    }

    #[test]
    fn foreground_examples() {
        let a = DepthPatch::<f64>::filled(4, 4, 0.8);
        let b = DepthPatch::<f64>::filled(4, 4, 0.2);
        assert_eq!(foreground_l1(&a, &b, &ForegroundMask::filled(4, 4, false)).unwrap(), 0.0);
        assert_eq!(
            foreground_l1(&a, &b, &ForegroundMask::filled(4, 4, true)).unwrap(),
            l1_loss(&a, &b).unwrap()
        );
        let mut mask = ForegroundMask::filled(4, 4, false);
        mask.values[0] = 1;
        let mut c = a.clone();
        c.values[5] = 0.0;
        assert_eq!(foreground_l1(&a, &c, &mask).unwrap(), 0.0);
        assert!(foreground_l1(&a, &b, &ForegroundMask::filled(3, 4, true)).is_err());
    }

    #[test]
    fn bce_examples() {
        let ln2 = std::f64::consts::LN_2;
        assert!(discriminator_bce(1.0f64 - 1e-7, 1e-7).unwrap().discriminator.abs() < 1e-5);
        let l = discriminator_bce(0.5f64, 0.5).unwrap();
        assert!((l.discriminator - 2.0 * ln2).abs() < 1e-12);
        assert!((l.generator - ln2).abs() < 1e-12);
        assert!((l.generator_minmax + ln2).abs() < 1e-12);
        assert!(discriminator_bce(1.0f64, 0.0).unwrap().discriminator.is_finite());
        assert!(discriminator_bce(1.5f64, 0.5).is_err());
        assert!(discriminator_bce(0.5f64, f64::NAN).is_err());
    }

    #[test]
    fn task_examples() {
        assert_eq!(task_feature_loss(&fv(&[1.0, 2.0]), &fv(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(task_feature_loss(&fv(&[1.0, 0.0]), &fv(&[0.0, 0.0])).unwrap(), 1.0);
        assert_eq!(task_feature_loss(&fv(&[3.0, 4.0]), &fv(&[0.0, 0.0])).unwrap(), 5.0);
        assert!(task_feature_loss(&fv(&[3.0]), &fv(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn objective_examples() {
        let w = LossWeights::default();
        assert_eq!(generator_objective(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(generator_objective(0.0, 1.0, 0.0, 0.0, &w), 100.0);
        assert_eq!(generator_objective(0.0, 0.0, 1.0, 0.0, &w), 200.0);
        assert_eq!(generator_objective(0.0, 0.0, 0.0, 1.0, &w), 10.0);
    }

    #[test]
    fn margin_examples() {
        let id = Quaternion::<f64>::identity();
        let quarter = Quaternion::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), std::f64::consts::FRAC_PI_2);
        let tau = std::f64::consts::TAU;
        assert_eq!(pose_margin(&id, &id, 1, 1, tau).unwrap(), 0.0);
        assert!((pose_margin(&id, &quarter, 1, 1, tau).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(pose_margin(&id, &quarter, 1, 2, tau).unwrap(), tau);
        assert!(pose_margin(&id, &id, 1, 2, 3.0).is_err());
    }

    #[test]
    fn triplet_examples() {
        let b = fv(&[0.0, 0.0]);
        let p = fv(&[1.0, 0.0]);
        let n = fv(&[1.0, 1.0]);
        assert_eq!(triplet_loss(&b, &p, &n, 1.0).unwrap(), 0.0);
        assert_eq!(triplet_loss(&b, &p, &b, 1.0).unwrap(), 1.0);
        let n = fv(&[0.0, 1.0]);
        assert_eq!(triplet_loss(&b, &p, &n, 1.0).unwrap(), 0.5);
        assert_eq!(triplet_loss(&b, &b, &b, 0.0).unwrap(), 1.0);
        assert!(triplet_loss(&b, &p, &n, -1.0).is_err());
        assert!(triplet_loss(&b, &p, &fv(&[0.0]), 1.0).is_err());
    }

    fn unit_quat() -> impl Strategy<Value = Quaternion<f64>> {
        prop::array::uniform4(-1.0..1.0f64)
            .prop_filter("non-degenerate", |a| a.iter().map(|v| v * v).sum::<f64>() > 1e-3)
            .prop_map(|a| {
                let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                Quaternion::from_array([a[0] / n, a[1] / n, a[2] / n, a[3] / n])
            })
    }

    proptest! {
        #[test]
        fn triplet_is_bounded_and_monotone(pos in 0.0..10.0f64, neg in 0.0..10.0f64, extra in 0.0..5.0f64, m in 0.0..7.0f64) {
            let a = triplet_from_distances(pos, neg, m);
            let b = triplet_from_distances(pos, neg + extra, m);
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b <= a);
        }

        #[test]
        fn margin_is_symmetric_and_sign_invariant(a in unit_quat(), b in unit_quat()) {
            let tau = std::f64::consts::TAU;
            let m = pose_margin(&a, &b, 0, 0, tau).unwrap();
            prop_assert!((m - pose_margin(&b, &a, 0, 0, tau).unwrap()).abs() < 1e-12);
            prop_assert!((m - pose_margin(&a.negated(), &b, 0, 0, tau).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=std::f64::consts::PI + 1e-12).contains(&m));
        }

        #[test]
        fn objective_is_linear(c in prop::array::uniform4(0.0..10.0f64), w in prop::array::uniform4(0.0..300.0f64)) {
            let w1 = LossWeights { adversarial: w[0], l1: w[1], foreground: w[2], task: w[3] };
            let w2 = LossWeights { adversarial: 2.0 * w[0], l1: 2.0 * w[1], foreground: 2.0 * w[2], task: 2.0 * w[3] };
            let v1 = generator_objective(c[0], c[1], c[2], c[3], &w1);
            let v2 = generator_objective(c[0], c[1], c[2], c[3], &w2);
            prop_assert!((v2 - 2.0 * v1).abs() <= 1e-12 * v2.abs().max(1.0));
            prop_assert!(v1 >= 0.0);
        }

        #[test]
        fn full_mask_matches_l1(vals in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64), 64)) {
            let a = DepthPatch::from_values(8, 8, vals.iter().map(|v| v.0).collect());
            let b = DepthPatch::from_values(8, 8, vals.iter().map(|v| v.1).collect());
            let full = ForegroundMask::filled(8, 8, true);
            prop_assert!((foreground_l1(&a, &b, &full).unwrap() - l1_loss(&a, &b).unwrap()).abs() < 1e-12);
        }
    }
}
