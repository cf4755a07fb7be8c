//! Vectors, quaternions, poses, triangle meshes and the pinhole camera.
//!
//! Camera frames follow the usual computer-vision convention: `+x` points right in the image,
//! `+y` points down and `+z` is the viewing direction. A [`Pose`] maps camera coordinates to
//! world coordinates, `p_world = R * p_cam + t`, so `t` is the camera centre.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Real;

/// Quaternions whose norm deviates from one by more than this are rejected.
pub const UNIT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("quaternion is not unit length (norm {0})")]
    NonUnitQuaternion(f64),
    #[error("degenerate look-at: {0}")]
    DegenerateLookAt(&'static str),
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Returns `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion, Hamilton convention, scalar first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    /// Rotation of `angle` radians about `axis` (normalized internally; a zero axis yields identity).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let Some(a) = axis.normalized() else {
            return Self::identity();
        };
        let half = angle / T::lit(2.0);
        let s = half.sin();
        Self::new(half.cos(), a.x * s, a.y * s, a.z * s)
    }

    /// Quaternion of an orthonormal rotation matrix given by its columns.
    pub fn from_rotation_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        // m[row][col]
        let (m00, m01, m02) = (c0.x, c1.x, c2.x);
        let (m10, m11, m12) = (c0.y, c1.y, c2.y);
        let (m20, m21, m22) = (c0.z, c1.z, c2.z);
        let one = T::one();
        let two = T::lit(2.0);
        let quarter = T::lit(0.25);
        let trace = m00 + m11 + m22;
        let q = if trace > T::zero() {
            let s = (trace + one).sqrt() * two;
            Self::new(quarter * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s)
        } else if m00 > m11 && m00 > m22 {
            let s = (one + m00 - m11 - m22).sqrt() * two;
            Self::new((m21 - m12) / s, quarter * s, (m01 + m10) / s, (m02 + m20) / s)
        } else if m11 > m22 {
            let s = (one + m11 - m00 - m22).sqrt() * two;
            Self::new((m02 - m20) / s, (m01 + m10) / s, quarter * s, (m12 + m21) / s)
        } else {
            let s = (one + m22 - m00 - m11).sqrt() * two;
            Self::new((m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, quarter * s)
        };
        q.normalized()
    }

    pub fn dot(self, o: Self) -> T {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        Self::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn negated(self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - T::one()).abs().as_f64() <= UNIT_TOLERANCE
    }

    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = T::lit(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    pub fn to_array(self) -> [T; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn cast<U: Real>(self) -> Quaternion<U> {
        Quaternion::new(
            U::lit(self.w.as_f64()),
            U::lit(self.x.as_f64()),
            U::lit(self.y.as_f64()),
            U::lit(self.z.as_f64()),
        )
    }
}

impl<T: Real> Mul for Quaternion<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Rotation angle between two orientations, `2 arccos |q1 · q2|`, in radians.
///
/// Evaluated as `4 atan2(|q1 - s q2|, |q1 + s q2|)` with `s = sign(q1 · q2)`, which is the
/// same quantity but stays accurate for nearly identical or nearly opposite rotations.
pub fn angular_distance<T: Real>(q1: Quaternion<T>, q2: Quaternion<T>) -> Result<T, GeometryError> {
    for q in [q1, q2] {
        if !q.is_unit() {
            return Err(GeometryError::NonUnitQuaternion(q.norm().as_f64()));
        }
    }
    let a = q1.normalized();
    let mut b = q2.normalized();
    if a.dot(b) < T::zero() {
        b = b.negated();
    }
    let diff = Quaternion::new(a.w - b.w, a.x - b.x, a.y - b.y, a.z - b.z).norm();
    let sum = Quaternion::new(a.w + b.w, a.x + b.x, a.y + b.y, a.z + b.z).norm();
    let angle = T::lit(4.0) * diff.atan2(sum);
    Ok(angle.min(T::PI()))
}

/// Rigid camera-to-world transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub rotation: Quaternion<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(rotation: Quaternion<T>, translation: Vec3<T>) -> Self {
        Self {
            rotation: rotation.normalized(),
            translation,
        }
    }

    pub fn right(&self) -> Vec3<T> {
        self.rotation.rotate(Vec3::unit_x())
    }

    pub fn down(&self) -> Vec3<T> {
        self.rotation.rotate(Vec3::unit_y())
    }

    pub fn forward(&self) -> Vec3<T> {
        self.rotation.rotate(Vec3::unit_z())
    }

    pub fn to_world(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    pub fn to_camera(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.conjugate().rotate(p - self.translation)
    }

    /// Rolls the camera by `angle` radians about its own viewing axis.
    pub fn rolled(&self, angle: T) -> Self {
        Self::new(
            self.rotation * Quaternion::from_axis_angle(Vec3::unit_z(), angle),
            self.translation,
        )
    }
}

/// Camera pose at `eye` looking at `target`, with `up` projecting to the top of the image.
pub fn look_at<T: Real>(eye: Vec3<T>, target: Vec3<T>, up: Vec3<T>) -> Result<Pose<T>, GeometryError> {
    let forward = (target - eye)
        .normalized()
        .ok_or(GeometryError::DegenerateLookAt("eye coincides with target"))?;
    let up = up
        .normalized()
        .ok_or(GeometryError::DegenerateLookAt("zero up vector"))?;
    let side = forward.cross(up);
    if side.norm().as_f64() < 1e-9 {
        return Err(GeometryError::DegenerateLookAt("up is parallel to the view direction"));
    }
    let right = side.normalized().expect("non-zero side");
    let down = forward.cross(right);
    Ok(Pose::new(
        Quaternion::from_rotation_columns(right, down, forward),
        eye,
    ))
}

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[usize; 3]>,
}

impl<T: Real> TriangleMesh<T> {
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= n) {
                return Err(GeometryError::IndexOutOfRange {
                    triangle: t,
                    index,
                    vertex_count: n,
                });
            }
        }
        Ok(Self { vertices, triangles })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Mean of the vertex positions (origin for an empty mesh).
    pub fn centroid(&self) -> Vec3<T> {
        if self.vertices.is_empty() {
            return Vec3::zero();
        }
        let sum = self
            .vertices
            .iter()
            .fold(Vec3::zero(), |acc, &v| acc + v);
        sum * (T::one() / T::from_usize_lossy(self.vertices.len()))
    }

    /// Sphere around the centroid enclosing every vertex.
    pub fn bounding_sphere(&self) -> (Vec3<T>, T) {
        let c = self.centroid();
        let r = self
            .vertices
            .iter()
            .map(|&v| (v - c).norm())
            .fold(T::zero(), T::max);
        (c, r)
    }

    pub fn translated(&self, offset: Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| v + offset).collect(),
            triangles: self.triangles.clone(),
        }
    }

    pub fn cast<U: Real>(&self) -> TriangleMesh<U> {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| v.cast()).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

/// Pinhole camera with square pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<T> {
    pub pose: Pose<T>,
    pub focal: T,
    pub principal: (T, T),
    pub width: usize,
    pub height: usize,
}

impl<T: Real> Camera<T> {
    /// Camera with the principal point at the image centre.
    pub fn new(pose: Pose<T>, focal: T, width: usize, height: usize) -> Result<Self, GeometryError> {
        if !(focal > T::zero()) || !focal.is_finite() {
            return Err(GeometryError::InvalidCamera("focal length must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera("image size must be positive"));
        }
        let half = T::lit(0.5);
        Ok(Self {
            pose,
            focal,
            principal: (T::from_usize_lossy(width) * half, T::from_usize_lossy(height) * half),
            width,
            height,
        })
    }

    /// Projects a camera-frame point to continuous pixel coordinates (`z` must be positive).
    pub fn project_camera(&self, p: Vec3<T>) -> (T, T) {
        (
            self.focal * p.x / p.z + self.principal.0,
            self.focal * p.y / p.z + self.principal.1,
        )
    }

    /// Camera-frame direction of the ray through pixel coordinates `(u, v)`, with unit `z`.
    pub fn ray_direction(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new(
            (u - self.principal.0) / self.focal,
            (v - self.principal.1) / self.focal,
            T::one(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn rot_z(angle: f64) -> Quaternion<f64> {
        Quaternion::from_axis_angle(Vec3::unit_z(), angle)
    }

    #[test]
    fn angular_distance_identity_and_quarter_turn() {
        let q = Quaternion::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7);
        assert_eq!(angular_distance(q, q).unwrap(), 0.0);
        assert_abs_diff_eq!(
            angular_distance(Quaternion::identity(), rot_z(FRAC_PI_2)).unwrap(),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        assert_eq!(angular_distance(q, q.negated()).unwrap(), 0.0);
    }

    #[test]
    fn angular_distance_rejects_non_unit() {
        let q = Quaternion::new(1.0, 0.1, 0.0, 0.0);
        assert!(matches!(
            angular_distance(q, Quaternion::identity()),
            Err(GeometryError::NonUnitQuaternion(_))
        ));
    }

    #[test]
    fn angular_distance_in_f32() {
        let d = angular_distance(Quaternion::<f32>::identity(), rot_z(PI).cast()).unwrap();
        assert!((d - std::f32::consts::PI).abs() < 1e-5);
    }

    #[test]
    fn look_at_examples() {
        let p = look_at(Vec3::new(0.0, 0.0, 600.0), Vec3::zero(), Vec3::unit_y()).unwrap();
        let f = p.forward();
        assert_abs_diff_eq!(f.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.z, -1.0, epsilon = 1e-12);
        // up maps to the top of the image
        assert_abs_diff_eq!(p.down().y, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.right().cross(p.down()).z, -1.0, epsilon = 1e-12);

        let p = look_at(Vec3::new(600.0, 0.0, 0.0), Vec3::zero(), Vec3::unit_z()).unwrap();
        let f = p.forward();
        assert_abs_diff_eq!(f.x, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn look_at_degenerate() {
        let e = Vec3::new(1.0, 2.0, 3.0);
        assert!(look_at(e, e, Vec3::unit_y()).is_err());
        assert!(look_at(Vec3::new(0.0, 0.0, 5.0), Vec3::zero(), Vec3::unit_z()).is_err());
    }

    #[test]
    fn mesh_rejects_bad_index() {
        let v = vec![Vec3::<f64>::zero(); 3];
        assert!(TriangleMesh::new(v.clone(), vec![[0, 1, 2]]).is_ok());
        assert_eq!(
            TriangleMesh::new(v, vec![[0, 1, 9]]),
            Err(GeometryError::IndexOutOfRange {
                triangle: 0,
                index: 9,
                vertex_count: 3
            })
        );
    }

    fn unit_quat() -> impl Strategy<Value = Quaternion<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Quaternion::new(w, x, y, z).normalized())
    }

    fn unit_axis() -> impl Strategy<Value = Vec3<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-degenerate", |(x, y, z)| x * x + y * y + z * z > 1e-3)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalized().unwrap())
    }

    proptest! {
        #[test]
        fn angular_distance_is_symmetric(a in unit_quat(), b in unit_quat()) {
            let ab = angular_distance(a, b).unwrap();
            let ba = angular_distance(b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=PI).contains(&ab));
            prop_assert!((angular_distance(a.negated(), b).unwrap() - ab).abs() < 1e-12);
        }

        #[test]
        fn angular_distance_recovers_rotation_angle(q in unit_quat(), axis in unit_axis(), theta in 0.0..=PI) {
            let r = Quaternion::from_axis_angle(axis, theta) * q;
            let d = angular_distance(q, r).unwrap();
            prop_assert!((d - theta).abs() < 1e-9, "d={d} theta={theta}");
        }

        #[test]
        fn pose_roundtrip(q in unit_quat(), x in -500.0..500.0f64, y in -500.0..500.0f64) {
            let pose = Pose::new(q, Vec3::new(x, y, 10.0));
            let p = Vec3::new(1.0, -2.0, 3.0);
            let back = pose.to_camera(pose.to_world(p));
            prop_assert!((back - p).norm() < 1e-9);
        }
    }
}
