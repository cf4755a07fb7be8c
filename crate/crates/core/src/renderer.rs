//! Software z-buffer rasterization of triangle meshes into depth patches.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Camera, GeometryError, TriangleMesh, Vec3};
pub use crate::patch::{foreground_mask, DepthPatch, DepthWindow, ForegroundMask};
use crate::scalar::Real;
use crate::viewsphere::Viewpoint;

/// Fragments closer than this (in millimetres, along the optical axis) are clipped.
pub const NEAR_CLIP_MM: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("invalid render config: {0}")]
    InvalidConfig(String),
    #[error("viewpoint {index}: {source}")]
    View {
        index: usize,
        #[source]
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Patch width and height in pixels.
    pub size: usize,
    /// Focal length in pixels; `None` frames the object automatically.
    pub focal: Option<f64>,
    /// Fraction of the patch covered by the bounding sphere under automatic framing.
    pub fill_fraction: f64,
    /// Half width of the depth window around the camera distance, in millimetres.
    pub window_half_extent: f64,
    /// Fixed window bounds; override `window_half_extent` when both are set.
    pub znear: Option<f64>,
    pub zfar: Option<f64>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            size: 64,
            focal: None,
            fill_fraction: 0.9,
            window_half_extent: 250.0,
            znear: None,
            zfar: None,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidConfig(m));
        if self.size == 0 {
            return bad("size must be positive".into());
        }
        if let Some(f) = self.focal {
            if !(f > 0.0) || !f.is_finite() {
                return bad(format!("focal must be positive, got {f}"));
            }
        }
        if !(self.fill_fraction > 0.0 && self.fill_fraction <= 1.0) {
            return bad(format!("fill_fraction must be in (0, 1], got {}", self.fill_fraction));
        }
        match (self.znear, self.zfar) {
            (Some(n), Some(f)) if !(n < f) || n < 0.0 => {
                return bad(format!("znear {n} must be below zfar {f}"));
            }
            (Some(_), None) | (None, Some(_)) => {
                return bad("znear and zfar must be given together".into());
            }
            _ => {}
        }
        if !(self.window_half_extent > 0.0) {
            return bad("window_half_extent must be positive".into());
        }
        Ok(())
    }

    /// Depth window for a camera at `distance` from the object centre.
    pub fn window<T: Real>(&self, distance: T) -> DepthWindow<T> {
        match (self.znear, self.zfar) {
            (Some(n), Some(f)) => DepthWindow {
                znear: T::lit(n),
                zfar: T::lit(f),
            },
            _ => {
                let h = T::lit(self.window_half_extent);
                DepthWindow {
                    znear: (distance - h).max(T::lit(NEAR_CLIP_MM)),
                    zfar: distance + h,
                }
            }
        }
    }

    /// Focal length making a sphere of `radius` at `distance` span `fill_fraction` of the patch.
    pub fn focal_for<T: Real>(&self, radius: T, distance: T) -> T {
        if let Some(f) = self.focal {
            return T::lit(f);
        }
        let size = T::from_usize_lossy(self.size);
        let half_fill = T::lit(self.fill_fraction * 0.5);
        if radius <= T::zero() {
            return size;
        }
        if distance <= radius {
            return half_fill * size;
        }
        // tangent of the half angle subtended by the sphere
        let tan = radius / (distance * distance - radius * radius).sqrt();
        half_fill * size / tan
    }
}

/// Renders the mesh (world coordinates) into a depth patch of the camera's image size.
///
/// Each pixel holds the normalized depth of the nearest surface hit by the ray through the
/// pixel centre; depth is interpolated perspective-correctly and coverage follows the
/// top-left fill rule.
pub fn render_depth<T: Real>(
    mesh: &TriangleMesh<T>,
    camera: &Camera<T>,
    window: DepthWindow<T>,
) -> DepthPatch<T> {
    let (w, h) = (camera.width, camera.height);
    let mut zbuf = vec![T::infinity(); w * h];
    let near = T::lit(NEAR_CLIP_MM);
    let cam_vertices: Vec<Vec3<T>> = mesh
        .vertices
        .iter()
        .map(|&v| camera.pose.to_camera(v))
        .collect();

    let mut clipped: Vec<Vec3<T>> = Vec::with_capacity(4);
    for tri in &mesh.triangles {
        let corners = [cam_vertices[tri[0]], cam_vertices[tri[1]], cam_vertices[tri[2]]];
        if corners.iter().all(|p| p.z < near) || corners.iter().all(|p| p.z >= window.zfar) {
            continue;
        }
        clip_near(&corners, near, &mut clipped);
        if clipped.len() < 3 {
            continue;
        }
        let projected: Vec<ScreenVertex<T>> = clipped
            .iter()
            .map(|&p| {
                let (u, v) = camera.project_camera(p);
                ScreenVertex {
                    u,
                    v,
                    inv_z: T::one() / p.z,
                }
            })
            .collect();
        for k in 1..projected.len() - 1 {
            raster_triangle(
                [projected[0], projected[k], projected[k + 1]],
                w,
                h,
                &mut zbuf,
            );
        }
    }

    let values = zbuf
        .into_iter()
        .map(|z| {
            if z.is_finite() && z >= near {
                window.normalize(z)
            } else {
                T::zero()
            }
        })
        .collect();
    DepthPatch {
        width: w,
        height: h,
        values,
        window: Some(window),
    }
}

#[derive(Debug, Clone, Copy)]
struct ScreenVertex<T> {
    u: T,
    v: T,
    inv_z: T,
}

// Sutherland-Hodgman against the plane z = near; keeps the part with z >= near.
fn clip_near<T: Real>(tri: &[Vec3<T>; 3], near: T, out: &mut Vec<Vec3<T>>) {
    out.clear();
    if tri.iter().all(|p| p.z >= near) {
        out.extend_from_slice(tri);
        return;
    }
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= near;
        let b_in = b.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = near;
            out.push(p);
        }
    }
}

// Evaluated with the endpoints in a fixed order so that the two triangles sharing an edge
// see exactly opposite values; otherwise rounding can open cracks along shared edges.
#[inline]
fn edge<T: Real>(a: &ScreenVertex<T>, b: &ScreenVertex<T>, u: T, v: T) -> T {
    let raw = |a: &ScreenVertex<T>, b: &ScreenVertex<T>| (b.u - a.u) * (v - a.v) - (b.v - a.v) * (u - a.u);
    if (a.v, a.u) <= (b.v, b.u) {
        raw(a, b)
    } else {
        -raw(b, a)
    }
}

// Edge a->b of a triangle with positive signed area (clockwise on a y-down screen).
#[inline]
fn is_top_left<T: Real>(a: &ScreenVertex<T>, b: &ScreenVertex<T>) -> bool {
    let dx = b.u - a.u;
    let dy = b.v - a.v;
    (dy.is_zero() && dx > T::zero()) || dy < T::zero()
}

fn raster_triangle<T: Real>(tri: [ScreenVertex<T>; 3], w: usize, h: usize, zbuf: &mut [T]) {
    let [a, mut b, mut c] = tri;
    let mut area = edge(&a, &b, c.u, c.v);
    if !area.is_finite() || area.is_zero() {
        return;
    }
    if area < T::zero() {
        std::mem::swap(&mut b, &mut c);
        area = -area;
    }
    let half = T::lit(0.5);
    let min_u = a.u.min(b.u).min(c.u);
    let max_u = a.u.max(b.u).max(c.u);
    let min_v = a.v.min(b.v).min(c.v);
    let max_v = a.v.max(b.v).max(c.v);
    let Some((x0, x1)) = pixel_span(min_u, max_u, w) else {
        return;
    };
    let Some((y0, y1)) = pixel_span(min_v, max_v, h) else {
        return;
    };
    let tl_bc = is_top_left(&b, &c);
    let tl_ca = is_top_left(&c, &a);
    let tl_ab = is_top_left(&a, &b);
    let covers = |e: T, top_left: bool| e > T::zero() || (e.is_zero() && top_left);
    let inv_area = T::one() / area;

    for y in y0..=y1 {
        let pv = T::from_usize_lossy(y) + half;
        for x in x0..=x1 {
            let pu = T::from_usize_lossy(x) + half;
            let e_bc = edge(&b, &c, pu, pv);
            let e_ca = edge(&c, &a, pu, pv);
            let e_ab = edge(&a, &b, pu, pv);
            if !(covers(e_bc, tl_bc) && covers(e_ca, tl_ca) && covers(e_ab, tl_ab)) {
                continue;
            }
            let inv_z = (e_bc * a.inv_z + e_ca * b.inv_z + e_ab * c.inv_z) * inv_area;
            let z = T::one() / inv_z;
            let slot = &mut zbuf[y * w + x];
            if z < *slot {
                *slot = z;
            }
        }
    }
}

// Pixels whose centres may fall inside [lo, hi].
fn pixel_span<T: Real>(lo: T, hi: T, n: usize) -> Option<(usize, usize)> {
    let half = T::lit(0.5);
    let first = (lo - half).ceil().max(T::zero());
    let last = (hi - half).floor().min(T::from_usize_lossy(n) - T::one());
    if !(first <= last) {
        return None;
    }
    Some((first.to_usize()?, last.to_usize()?))
}

/// A rendered patch together with the viewpoint it was rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView<T> {
    pub patch: DepthPatch<T>,
    pub viewpoint: Viewpoint<T>,
    /// No pixel was hit (object outside the frustum or depth window).
    pub empty: bool,
}

/// Renders one patch per viewpoint, in input order. The mesh is first translated so its
/// centroid sits at the origin the viewpoints look at.
pub fn render_views<T: Real>(
    mesh: &TriangleMesh<T>,
    viewpoints: &[Viewpoint<T>],
    cfg: &RenderConfig,
) -> Result<Vec<RenderedView<T>>, RenderError> {
    cfg.validate()?;
    let centered = mesh.translated(-mesh.centroid());
    let (_, radius) = centered.bounding_sphere();
    if viewpoints
        .iter()
        .any(|vp| vp.position().norm() <= radius)
    {
        warn!("camera inside the mesh bounding sphere (radius {radius})");
    }
    viewpoints
        .par_iter()
        .enumerate()
        .map(|(index, vp)| {
            let distance = vp.position().norm();
            let camera = Camera::new(
                vp.camera_pose,
                cfg.focal_for(radius, distance),
                cfg.size,
                cfg.size,
            )
            .map_err(|source| RenderError::View { index, source })?;
            let patch = render_depth(&centered, &camera, cfg.window(distance));
            let empty = patch.is_background();
            Ok(RenderedView {
                patch,
                viewpoint: vp.clone(),
                empty,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{look_at, Pose, Quaternion};

    fn square(z: f64, half: f64) -> TriangleMesh<f64> {
        TriangleMesh::new(
            vec![
                Vec3::new(-half, -half, z),
                Vec3::new(half, -half, z),
                Vec3::new(half, half, z),
                Vec3::new(-half, half, z),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap()
    }

    // Camera at the origin looking down +z.
    fn camera(focal: f64) -> Camera<f64> {
        Camera::new(Pose::new(Quaternion::identity(), Vec3::zero()), focal, 64, 64).unwrap()
    }

    #[test]
    fn empty_mesh_renders_background() {
        let mesh = TriangleMesh::<f64>::default();
        let p = render_depth(&mesh, &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        assert!(p.is_background());
        assert_eq!(p.values.len(), 64 * 64);
    }

    #[test]
    fn facing_plane_has_analytic_depth() {
        // Square of half size 100 at 600 mm covers |u - 32| < 60 * 100 / 600 = 10 px.
        let p = render_depth(&square(600.0, 100.0), &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        for y in 0..64 {
            for x in 0..64 {
                let inside = (x as f64 + 0.5 - 32.0).abs() < 10.0 && (y as f64 + 0.5 - 32.0).abs() < 10.0;
                let v = p.get(x, y);
                if inside {
                    assert!((v - 0.5).abs() < 1e-12, "({x},{y}) = {v}");
                } else {
                    assert_eq!(v, 0.0, "({x},{y})");
                }
            }
        }
    }

    #[test]
    fn nearer_plane_wins() {
        let mut mesh = square(700.0, 400.0);
        let front = square(500.0, 50.0);
        let offset = mesh.vertices.len();
        mesh.vertices.extend(front.vertices);
        mesh.triangles
            .extend(front.triangles.iter().map(|t| t.map(|i| i + offset)));
        let p = render_depth(&mesh, &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        assert!((p.get(32, 32) - 0.7).abs() < 1e-12);
        assert!((p.get(5, 5) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn geometry_behind_camera_is_clipped() {
        // Large quad straddling the camera plane: only the part in front is visible.
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(-1000.0, 0.0, -100.0),
                Vec3::new(1000.0, 0.0, -100.0),
                Vec3::new(1000.0, 0.0, 800.0),
                Vec3::new(-1000.0, 0.0, 800.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let p = render_depth(&mesh, &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        // plane y = 0 is edge-on
        assert!(p.is_background());
        let tilted = TriangleMesh::new(
            vec![
                Vec3::new(-1000.0, 50.0, -100.0),
                Vec3::new(1000.0, 50.0, -100.0),
                Vec3::new(1000.0, 50.0, 800.0),
                Vec3::new(-1000.0, 50.0, 800.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let p = render_depth(&tilted, &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        // Row v: y/z = (v + 0.5 - 32)/60 -> z = 3000 / (v + 0.5 - 32)
        for v in 33..64usize {
            let z = 3000.0 / (v as f64 + 0.5 - 32.0);
            let expected = if z < 850.0 { ((850.0 - z) / 500.0).min(1.0) } else { 0.0 };
            assert!((p.get(10, v) - expected).abs() < 1e-9, "row {v}");
        }
        for v in 0..32usize {
            assert_eq!(p.get(10, v), 0.0);
        }
    }

    #[test]
    fn shared_edges_cover_each_pixel_once() {
        // A fan of thin triangles tiling a square: no cracks and no gaps.
        let n = 17;
        let mut verts = vec![Vec3::new(0.0, 0.0, 600.0)];
        for k in 0..=n {
            let t = k as f64 / n as f64;
            verts.push(Vec3::new(-150.0 + 300.0 * t, -150.0, 600.0));
        }
        let tris = (0..n).map(|k| [0, k + 1, k + 2]).collect();
        let mesh = TriangleMesh::new(verts, tris).unwrap();
        let p = render_depth(&mesh, &camera(60.0), DepthWindow::new(350.0, 850.0).unwrap());
        for y in 0..64 {
            for x in 0..64 {
                let (u, v) = (x as f64 + 0.5 - 32.0, y as f64 + 0.5 - 32.0);
                let inside = v < 0.0 && v > -15.0 && u.abs() < -v;
                if inside {
                    assert!((p.get(x, y) - 0.5).abs() < 1e-12, "hole at ({x},{y}) = {}", p.get(x, y));
                }
            }
        }
    }

    #[test]
    fn render_views_orders_and_flags() {
        let mesh = square(0.0, 80.0);
        let eye = Vec3::new(0.0, 0.0, 600.0);
        let toward = look_at(eye, Vec3::zero(), Vec3::unit_y()).unwrap();
        let away = look_at(eye, Vec3::new(0.0, 0.0, 1200.0), Vec3::unit_y()).unwrap();
        let vp = |pose: Pose<f64>, i| Viewpoint {
            vertex_index: i,
            in_plane_deg: 0.0,
            camera_pose: pose,
            view_direction: pose.forward(),
        };
        let views = render_views(&mesh, &[vp(toward, 0), vp(away, 1)], &RenderConfig::default()).unwrap();
        assert_eq!(views.len(), 2);
        assert!(!views[0].empty);
        assert!(views[1].empty);
        assert_eq!(views[1].viewpoint.vertex_index, 1);
        assert!(render_views(&mesh, &[], &RenderConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn auto_focal_frames_the_sphere() {
        let cfg = RenderConfig::default();
        let f: f64 = cfg.focal_for(100.0, 600.0);
        let tan = 100.0 / (600.0f64 * 600.0 - 100.0 * 100.0).sqrt();
        assert!((2.0 * f * tan - 0.9 * 64.0).abs() < 1e-9);
        let w: DepthWindow<f64> = cfg.window(600.0);
        assert_eq!((w.znear, w.zfar), (350.0, 850.0));
    }

    #[test]
    fn render_is_deterministic() {
        let mesh = square(600.0, 120.0);
        let a = render_depth(&mesh, &camera(61.3), DepthWindow::new(350.0, 850.0).unwrap());
        let b = render_depth(&mesh, &camera(61.3), DepthWindow::new(350.0, 850.0).unwrap());
        let bits = |p: &DepthPatch<f64>| p.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}
