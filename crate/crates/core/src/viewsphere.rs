//! Camera viewpoints on a subdivided icosahedron.
//!
//! Vertices of an icosphere of the configured radius become camera positions looking at the
//! origin; every position is combined with a list of in-plane (roll) angles. Objects with
//! rotational or mirror symmetry can have redundant positions trimmed.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{look_at, GeometryError, Pose, TriangleMesh, Vec3};
use crate::scalar::Real;

pub const MAX_SUBDIVISIONS: u32 = 6;

/// Vertices with `z >= -HEMISPHERE_EPS` belong to the upper hemisphere (equator included).
pub const HEMISPHERE_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViewSphereError {
    #[error("subdivision level {0} exceeds the maximum of {MAX_SUBDIVISIONS}")]
    TooManySubdivisions(u32),
    #[error("invalid view sphere config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hemisphere {
    Full,
    #[default]
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Symmetry {
    #[default]
    Regular,
    PlaneSymmetric,
    AxisSymmetric,
}

/// Orientation of the base icosahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IcosahedronOrientation {
    /// Vertices at the cyclic permutations of `(0, ±1, ±φ)`; `+z` passes through an edge midpoint.
    #[default]
    Canonical,
    /// Two vertices on the `±z` poles, two staggered rings of five.
    PoleAligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ViewSphereConfig {
    /// Sphere radius in millimetres.
    pub radius: f64,
    pub subdivisions: u32,
    pub hemisphere: Hemisphere,
    pub in_plane_degrees: Vec<f64>,
    pub symmetry: Symmetry,
    pub orientation: IcosahedronOrientation,
}

impl Default for ViewSphereConfig {
    fn default() -> Self {
        Self {
            radius: 600.0,
            subdivisions: 3,
            hemisphere: Hemisphere::Upper,
            in_plane_degrees: default_in_plane_degrees(),
            symmetry: Symmetry::Regular,
            orientation: IcosahedronOrientation::Canonical,
        }
    }
}

/// -45° to 45° in 15° steps.
pub fn default_in_plane_degrees() -> Vec<f64> {
    (-3..=3).map(|k| 15.0 * k as f64).collect()
}

impl ViewSphereConfig {
    pub fn validate(&self) -> Result<(), ViewSphereError> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(ViewSphereError::InvalidConfig(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.subdivisions > MAX_SUBDIVISIONS {
            return Err(ViewSphereError::TooManySubdivisions(self.subdivisions));
        }
        if self.in_plane_degrees.is_empty() {
            return Err(ViewSphereError::InvalidConfig(
                "in-plane angle list is empty".into(),
            ));
        }
        let mut seen = HashSet::new();
        for a in &self.in_plane_degrees {
            if !a.is_finite() {
                return Err(ViewSphereError::InvalidConfig(format!("non-finite angle {a}")));
            }
            if !seen.insert(a.to_bits()) {
                return Err(ViewSphereError::InvalidConfig(format!("duplicate in-plane angle {a}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Viewpoint<T> {
    /// Index of the camera position in the icosphere vertex list.
    pub vertex_index: usize,
    pub in_plane_deg: T,
    pub camera_pose: Pose<T>,
    /// Unit vector from the camera towards the sphere centre.
    pub view_direction: Vec3<T>,
}

impl<T: Real> Viewpoint<T> {
    pub fn position(&self) -> Vec3<T> {
        self.camera_pose.translation
    }
}

fn base_icosahedron(orientation: IcosahedronOrientation) -> (Vec<Vec3<f64>>, Vec<[usize; 3]>) {
    match orientation {
        IcosahedronOrientation::Canonical => {
            let p = (1.0 + 5f64.sqrt()) / 2.0;
            let v = [
                (-1.0, p, 0.0),
                (1.0, p, 0.0),
                (-1.0, -p, 0.0),
                (1.0, -p, 0.0),
                (0.0, -1.0, p),
                (0.0, 1.0, p),
                (0.0, -1.0, -p),
                (0.0, 1.0, -p),
                (p, 0.0, -1.0),
                (p, 0.0, 1.0),
                (-p, 0.0, -1.0),
                (-p, 0.0, 1.0),
            ];
            let faces = vec![
                [0, 11, 5],
                [0, 5, 1],
                [0, 1, 7],
                [0, 7, 10],
                [0, 10, 11],
                [1, 5, 9],
                [5, 11, 4],
                [11, 10, 2],
                [10, 7, 6],
                [7, 1, 8],
                [3, 9, 4],
                [3, 4, 2],
                [3, 2, 6],
                [3, 6, 8],
                [3, 8, 9],
                [4, 9, 5],
                [2, 4, 11],
                [6, 2, 10],
                [8, 6, 7],
                [9, 8, 1],
            ];
            let verts = v
                .iter()
                .map(|&(x, y, z)| Vec3::new(x, y, z).normalized().unwrap())
                .collect();
            (verts, faces)
        }
        IcosahedronOrientation::PoleAligned => {
            let h = 1.0 / 5f64.sqrt();
            let r = 2.0 * h;
            let step = std::f64::consts::TAU / 5.0;
            let mut verts = vec![Vec3::new(0.0, 0.0, 1.0)];
            for k in 0..5 {
                let a = step * k as f64;
                verts.push(Vec3::new(r * a.cos(), r * a.sin(), h));
            }
            for k in 0..5 {
                let a = step * (k as f64 + 0.5);
                verts.push(Vec3::new(r * a.cos(), r * a.sin(), -h));
            }
            verts.push(Vec3::new(0.0, 0.0, -1.0));
            let mut faces = Vec::with_capacity(20);
            for k in 0..5 {
                let u0 = 1 + k;
                let u1 = 1 + (k + 1) % 5;
                let l0 = 6 + k;
                let l1 = 6 + (k + 1) % 5;
                faces.push([0, u0, u1]);
                faces.push([u0, l0, u1]);
                faces.push([u1, l0, l1]);
                faces.push([11, l1, l0]);
            }
            (verts, faces)
        }
    }
}

/// Unit icosphere: the icosahedron with every face split into four, `subdivisions` times,
/// new vertices pushed back onto the sphere.
pub fn icosphere<T: Real>(
    subdivisions: u32,
    orientation: IcosahedronOrientation,
) -> Result<TriangleMesh<T>, ViewSphereError> {
    if subdivisions > MAX_SUBDIVISIONS {
        return Err(ViewSphereError::TooManySubdivisions(subdivisions));
    }
    let (mut verts, mut faces) = base_icosahedron(orientation);
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3<f64>>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                let m = (verts[a] + verts[b]).normalized().expect("antipodal edge");
                verts.push(m);
                verts.len() - 1
            })
        };
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(TriangleMesh {
        vertices: verts.into_iter().map(|v| v.cast()).collect(),
        triangles: faces,
    })
}

/// Number of icosphere vertices kept by the upper-hemisphere filter.
pub fn upper_hemisphere_vertex_count(
    subdivisions: u32,
    orientation: IcosahedronOrientation,
) -> Result<usize, ViewSphereError> {
    let sphere = icosphere::<f64>(subdivisions, orientation)?;
    Ok(sphere
        .vertices
        .iter()
        .filter(|v| v.z >= -HEMISPHERE_EPS)
        .count())
}

/// All (vertex, in-plane angle) combinations of the configured sphere, vertex-major.
/// Symmetry trimming is not applied here; see [`generate_viewpoints`].
pub fn sample_viewpoints<T: Real>(cfg: &ViewSphereConfig) -> Result<Vec<Viewpoint<T>>, ViewSphereError> {
    cfg.validate()?;
    let sphere = icosphere::<f64>(cfg.subdivisions, cfg.orientation)?;
    let mut out = Vec::new();
    for (index, dir) in sphere.vertices.iter().enumerate() {
        if cfg.hemisphere == Hemisphere::Upper && dir.z < -HEMISPHERE_EPS {
            continue;
        }
        let eye = *dir * cfg.radius;
        let up = if dir.cross(Vec3::unit_z()).norm() > 1e-6 {
            Vec3::unit_z()
        } else {
            Vec3::unit_y()
        };
        let base = look_at(eye, Vec3::zero(), up)?;
        for &deg in &cfg.in_plane_degrees {
            let pose = base.rolled(deg.to_radians());
            out.push(Viewpoint {
                vertex_index: index,
                in_plane_deg: T::lit(deg),
                camera_pose: Pose::new(pose.rotation.cast(), pose.translation.cast()),
                view_direction: (-*dir).cast(),
            });
        }
    }
    Ok(out)
}

/// Sampling followed by trimming for the configured symmetry.
pub fn generate_viewpoints<T: Real>(cfg: &ViewSphereConfig) -> Result<Vec<Viewpoint<T>>, ViewSphereError> {
    Ok(trim_symmetric(sample_viewpoints(cfg)?, cfg.symmetry))
}

/// Drops camera positions that would render duplicate images of a symmetric object.
///
/// The symmetry axis is `+z` and the mirror plane is `y = 0`:
/// - plane-symmetric objects keep positions with azimuth in `[0°, 180°]`;
/// - axis-symmetric objects keep the meridian arc in the `xz` plane, one position per elevation
///   along the arc (smallest azimuth wins should two positions share a band).
///
/// The result is an order-preserving subset of the input, so trimming is idempotent.
pub fn trim_symmetric<T: Real>(viewpoints: Vec<Viewpoint<T>>, symmetry: Symmetry) -> Vec<Viewpoint<T>> {
    let tol = HEMISPHERE_EPS.max(16.0 * T::epsilon().as_f64());
    let direction = |vp: &Viewpoint<T>| -> Vec3<f64> { (-vp.view_direction).cast() };
    match symmetry {
        Symmetry::Regular => viewpoints,
        Symmetry::PlaneSymmetric => viewpoints
            .into_iter()
            .filter(|vp| direction(vp).y >= -tol)
            .collect(),
        Symmetry::AxisSymmetric => {
            // band key -> (azimuth, vertex index)
            let mut bands: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
            for vp in &viewpoints {
                let d = direction(vp);
                if d.y.abs() > tol {
                    continue;
                }
                let elevation = d.z.atan2(d.x);
                let key = (elevation / 1e-6).round() as i64;
                let azimuth = azimuth(d, tol);
                let entry = bands.entry(key).or_insert((azimuth, vp.vertex_index));
                if azimuth < entry.0 {
                    *entry = (azimuth, vp.vertex_index);
                }
            }
            let keep: HashSet<usize> = bands.values().map(|&(_, v)| v).collect();
            viewpoints
                .into_iter()
                .filter(|vp| keep.contains(&vp.vertex_index))
                .collect()
        }
    }
}

fn azimuth(d: Vec3<f64>, tol: f64) -> f64 {
    if d.x.hypot(d.y) <= tol {
        return 0.0;
    }
    let a = d.y.atan2(d.x);
    if a < 0.0 {
        a + std::f64::consts::TAU
    } else {
        a
    }
}
