//! Randomized corruption of clean depth patches.
//!
//! A sampled [`AugmentationVector`] fully determines the corruption of one image. The pipeline
//! warps the foreground with a Perlin vector field, paints random polygonal occluders in front
//! of the object and finally fills the remaining empty pixels with procedural noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Quaternion, TriangleMesh};
use crate::patch::{foreground_mask, DepthPatch, ForegroundMask};
use crate::procnoise::{fill_field, mix64, NoiseKind, NoiseSpec, ScalarField};
use crate::scalar::Real;
use crate::viewsphere::Viewpoint;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid polygon parameters: {0}")]
    InvalidPolygon(String),
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(String),
    #[error("sensor simulation failed: {0}")]
    Sensor(String),
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.min <= v && v <= self.max
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            self.min
        } else {
            rng.random_range(self.min..=self.max)
        }
    }

    fn check(&self, name: &str) -> Result<(), AugmentError> {
        if self.min.is_finite() && self.max.is_finite() && self.min <= self.max {
            Ok(())
        } else {
            Err(AugmentError::InvalidConfig(format!(
                "{name}: bad interval [{}, {}]",
                self.min, self.max
            )))
        }
    }
}

/// Closed integer interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountInterval {
    pub min: u32,
    pub max: u32,
}

impl CountInterval {
    pub const fn new(min: u32, max: u32) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, v: u32) -> bool {
        self.min <= v && v <= self.max
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageFlags {
    pub background: bool,
    pub foreground: bool,
    pub occlusion: bool,
    /// Route a fraction of the images through a [`SensorSimulator`] first.
    pub sensor: bool,
}

impl Default for StageFlags {
    fn default() -> Self {
        Self {
            background: true,
            foreground: true,
            occlusion: true,
            sensor: false,
        }
    }
}

impl StageFlags {
    pub fn none() -> Self {
        Self {
            background: false,
            foreground: false,
            occlusion: false,
            sensor: false,
        }
    }
}

/// Sampling bounds for every augmentation parameter. Defaults assume 64x64 patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationConfig {
    pub stages: StageFlags,
    pub background_kinds: Vec<NoiseKind>,
    pub bg_frequency: Interval,
    pub fg_frequency_xy: Interval,
    pub fg_frequency_z: Interval,
    /// Pixel displacement scale of the warp field.
    pub warp_xy: Interval,
    /// Normalized-depth offset scale of the warp field.
    pub warp_z: Interval,
    pub occlusion_count: CountInterval,
    /// Average occluder radius in pixels; `None` means `[10, floor(min(w, h) / 4)]`.
    pub occluder_radius: Option<Interval>,
    pub occluder_vertices: CountInterval,
    /// Standard deviation of the occluder radii, in pixels.
    pub spikiness: Interval,
    /// Angular step jitter as a fraction of `pi / vertex_count`.
    pub irregularity: Interval,
    /// Probability of drawing an occluder centre coordinate from the first quarter of the patch.
    pub center_near_probability: f64,
    /// Probability that an image goes through the sensor simulator (when that stage is on).
    pub sensor_probability: f64,
    pub patch_width: usize,
    pub patch_height: usize,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            stages: StageFlags::default(),
            background_kinds: vec![NoiseKind::FractalPerlin, NoiseKind::Cellular, NoiseKind::White],
            bg_frequency: Interval::new(0.0001, 0.1),
            fg_frequency_xy: Interval::new(0.0001, 0.1),
            fg_frequency_z: Interval::new(0.01, 0.1),
            warp_xy: Interval::new(0.0, 10.0),
            warp_z: Interval::new(0.0, 0.005),
            occlusion_count: CountInterval::new(0, 3),
            occluder_radius: None,
            occluder_vertices: CountInterval::new(3, 10),
            spikiness: Interval::new(0.0, 0.5),
            irregularity: Interval::new(0.0, 1.0),
            center_near_probability: 0.5,
            sensor_probability: 0.5,
            patch_width: 64,
            patch_height: 64,
        }
    }
}

impl AugmentationConfig {
    pub fn with_stages(stages: StageFlags) -> Self {
        Self {
            stages,
            ..Self::default()
        }
    }

    pub fn radius_interval(&self) -> Interval {
        self.occluder_radius.unwrap_or_else(|| {
            let quarter = (self.patch_width.min(self.patch_height) / 4) as f64;
            Interval::new(10.0f64.min(quarter), quarter.max(10.0f64.min(quarter)))
        })
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        let bad = |m: String| Err(AugmentError::InvalidConfig(m));
        if self.patch_width == 0 || self.patch_height == 0 {
            return bad("patch size must be positive".into());
        }
        if self.stages.background && self.background_kinds.is_empty() {
            return bad("background stage enabled without noise kinds".into());
        }
        self.bg_frequency.check("bg_frequency")?;
        self.fg_frequency_xy.check("fg_frequency_xy")?;
        self.fg_frequency_z.check("fg_frequency_z")?;
        self.warp_xy.check("warp_xy")?;
        self.warp_z.check("warp_z")?;
        self.spikiness.check("spikiness")?;
        self.irregularity.check("irregularity")?;
        let radius = self.radius_interval();
        radius.check("occluder_radius")?;
        if radius.min <= 0.0 {
            return bad("occluder radius must be positive".into());
        }
        if self.spikiness.min < 0.0 || self.irregularity.min < 0.0 || self.irregularity.max > 1.0 {
            return bad("spikiness must be >= 0 and irregularity within [0, 1]".into());
        }
        if self.occlusion_count.min > self.occlusion_count.max {
            return bad("occlusion_count: min above max".into());
        }
        if self.occluder_vertices.min < 3 || self.occluder_vertices.min > self.occluder_vertices.max {
            return bad("occluder_vertices must be an interval within [3, ..]".into());
        }
        for (name, p) in [
            ("center_near_probability", self.center_near_probability),
            ("sensor_probability", self.sensor_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be a probability, got {p}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackgroundParams {
    pub kind: NoiseKind,
    pub frequency: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    pub frequency_x: f64,
    pub frequency_y: f64,
    pub frequency_z: f64,
    pub warp_xy: f64,
    pub warp_z: f64,
    /// Seeds of the x, y and depth Perlin fields.
    pub seeds: [u64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolygonParams {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub vertex_count: u32,
    /// Maximum deviation of each angular step from `2 pi / vertex_count`, in radians.
    pub irregularity: f64,
    /// Standard deviation of the vertex radii.
    pub spikiness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionParams {
    pub polygon: PolygonParams,
    /// Position of the occluder depth between the patch's nearest surface (0) and the
    /// front of the depth window (1).
    pub depth_offset: f64,
    pub shape_seed: u64,
}

/// Per-image augmentation parameters. Disabled stages are `None` / empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationVector {
    pub background: Option<BackgroundParams>,
    pub distortion: Option<DistortionParams>,
    pub occlusions: Vec<OcclusionParams>,
    pub sensor: bool,
}

impl AugmentationVector {
    pub fn identity() -> Self {
        Self {
            background: None,
            distortion: None,
            occlusions: Vec::new(),
            sensor: false,
        }
    }
}

/// Seed of image `index` under `master_seed`, independent of generation order.
pub fn image_seed(master_seed: u64, index: u64) -> u64 {
    mix64(master_seed ^ index)
}

pub fn image_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(image_seed(master_seed, index))
}

/// Draws the parameters of every enabled stage from `cfg`.
pub fn sample_augmentation_vector<R: Rng + ?Sized>(cfg: &AugmentationConfig, rng: &mut R) -> AugmentationVector {
    let mut z = AugmentationVector::identity();
    if cfg.stages.background {
        let kind = cfg.background_kinds[rng.random_range(0..cfg.background_kinds.len())];
        z.background = Some(BackgroundParams {
            kind,
            frequency: cfg.bg_frequency.sample(rng),
            seed: rng.random(),
        });
    }
    if cfg.stages.foreground {
        z.distortion = Some(DistortionParams {
            frequency_x: cfg.fg_frequency_xy.sample(rng),
            frequency_y: cfg.fg_frequency_xy.sample(rng),
            frequency_z: cfg.fg_frequency_z.sample(rng),
            warp_xy: cfg.warp_xy.sample(rng),
            warp_z: cfg.warp_z.sample(rng),
            seeds: [rng.random(), rng.random(), rng.random()],
        });
    }
    if cfg.stages.occlusion {
        let count = cfg.occlusion_count.sample(rng);
        let radius = cfg.radius_interval();
        let l = cfg.patch_width.min(cfg.patch_height) as f64;
        let center = |extent: usize, rng: &mut R| {
            let quarter = extent as f64 / 4.0;
            let span = if rng.random_bool(cfg.center_near_probability) {
                Interval::new(0.0, quarter)
            } else {
                Interval::new(quarter, l.max(quarter))
            };
            span.sample(rng)
        };
        for _ in 0..count {
            let center_x = center(cfg.patch_width, rng);
            let center_y = center(cfg.patch_height, rng);
            let vertex_count = cfg.occluder_vertices.sample(rng);
            let irregularity =
                cfg.irregularity.sample(rng) * std::f64::consts::PI / f64::from(vertex_count);
            z.occlusions.push(OcclusionParams {
                polygon: PolygonParams {
                    center_x,
                    center_y,
                    radius: radius.sample(rng),
                    vertex_count,
                    irregularity,
                    spikiness: cfg.spikiness.sample(rng),
                },
                depth_offset: rng.random(),
                shape_seed: rng.random(),
            });
        }
    }
    if cfg.stages.sensor {
        z.sensor = rng.random_bool(cfg.sensor_probability);
    }
    z
}

fn check_shape<T: Real>(patch: &DepthPatch<T>, width: usize, height: usize) -> Result<(), AugmentError> {
    if patch.width != width || patch.height != height {
        return Err(AugmentError::DimensionMismatch(
            patch.width,
            patch.height,
            width,
            height,
        ));
    }
    Ok(())
}

/// Replaces every pixel outside `mask` by background noise remapped to `[0, 1]`.
pub fn fill_background<T: Real>(
    patch: &DepthPatch<T>,
    mask: &ForegroundMask,
    bg: &BackgroundParams,
) -> Result<DepthPatch<T>, AugmentError> {
    check_shape(patch, mask.width, mask.height)?;
    let field = fill_field(
        &NoiseSpec::new(bg.kind, bg.frequency, bg.seed),
        patch.width,
        patch.height,
    );
    let mut out = patch.clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        if mask.values[i] == 0 {
            *v = T::lit(((field.values[i] + 1.0) * 0.5).clamp(0.0, 1.0));
        }
    }
    Ok(out)
}

/// The three Perlin fields (x offset, y offset, depth offset) of a distortion.
pub fn distortion_fields(p: &DistortionParams, width: usize, height: usize) -> [ScalarField; 3] {
    [
        (p.frequency_x, p.seeds[0]),
        (p.frequency_y, p.seeds[1]),
        (p.frequency_z, p.seeds[2]),
    ]
    .map(|(f, seed)| fill_field(&NoiseSpec::new(NoiseKind::Perlin, f, seed), width, height))
}

/// Warps the patch with a Perlin vector field.
pub fn distort_foreground<T: Real>(patch: &DepthPatch<T>, p: &DistortionParams) -> DepthPatch<T> {
    let fields = distortion_fields(p, patch.width, patch.height);
    distort_with_fields(patch, &fields, p.warp_xy, p.warp_z)
        .expect("fields are built with the patch dimensions")
}

/// `out(x, y) = in(x + warp_xy * fx(x, y), y + warp_xy * fy(x, y)) + warp_z * fz(x, y)`.
///
/// Source coordinates are rounded to the nearest pixel and read as 0 outside the patch. The
/// depth offset is only added where the source pixel is foreground, so the background stays
/// exactly 0. Results are clamped to `[0, 1]`.
pub fn distort_with_fields<T: Real>(
    patch: &DepthPatch<T>,
    fields: &[ScalarField; 3],
    warp_xy: f64,
    warp_z: f64,
) -> Result<DepthPatch<T>, AugmentError> {
    for f in fields {
        if f.width != patch.width || f.height != patch.height {
            return Err(AugmentError::DimensionMismatch(
                f.width,
                f.height,
                patch.width,
                patch.height,
            ));
        }
    }
    let (w, h) = (patch.width, patch.height);
    let mut out = patch.clone();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let sx = (x as f64 + warp_xy * fields[0].values[i]).round();
            let sy = (y as f64 + warp_xy * fields[1].values[i]).round();
            let src = if sx >= 0.0 && sy >= 0.0 && sx < w as f64 && sy < h as f64 {
                patch.get(sx as usize, sy as usize)
            } else {
                T::zero()
            };
            out.values[i] = if src.is_zero() {
                T::zero()
            } else {
                (src + T::lit(warp_z * fields[2].values[i])).max(T::zero()).min(T::one())
            };
        }
    }
    Ok(out)
}

/// Polygon vertices together with the normalized angular steps between them.
#[derive(Debug, Clone, PartialEq)]
pub struct OcclusionPolygon {
    pub points: Vec<[f64; 2]>,
    pub angle_steps: Vec<f64>,
}

/// Random star-shaped polygon: walk around the centre with jittered angular steps
/// (rescaled to sum to a full turn) and Gaussian radii clamped to `(0, 2 * radius]`.
pub fn generate_occlusion_polygon<R: Rng + ?Sized>(
    p: &PolygonParams,
    rng: &mut R,
) -> Result<OcclusionPolygon, AugmentError> {
    let bad = |m: &str| Err(AugmentError::InvalidPolygon(m.to_string()));
    if p.vertex_count < 3 {
        return bad("vertex_count must be at least 3");
    }
    if !(p.radius > 0.0) || !p.radius.is_finite() {
        return bad("radius must be positive");
    }
    if !(p.irregularity >= 0.0) || !(p.spikiness >= 0.0) {
        return bad("irregularity and spikiness must be non-negative");
    }
    if !p.center_x.is_finite() || !p.center_y.is_finite() {
        return bad("centre must be finite");
    }
    let n = p.vertex_count as usize;
    let tau = std::f64::consts::TAU;
    let nominal = tau / n as f64;
    let step = Interval::new(nominal - p.irregularity, nominal + p.irregularity);
    let mut steps: Vec<f64> = (0..n).map(|_| step.sample(rng)).collect();
    let sum: f64 = steps.iter().sum();
    let k = sum / tau;
    for s in &mut steps {
        *s /= k;
    }

    let radius_dist = (p.spikiness > 0.0).then(|| Normal::new(p.radius, p.spikiness).expect("valid normal"));
    let min_radius = p.radius * 1e-3;
    let mut theta = rng.random_range(0.0..tau);
    let mut points = Vec::with_capacity(n);
    for s in &steps {
        let r = match &radius_dist {
            Some(d) => d.sample(rng).clamp(min_radius, 2.0 * p.radius),
            None => p.radius,
        };
        points.push([p.center_x + r * theta.cos(), p.center_y + r * theta.sin()]);
        theta += s;
    }
    Ok(OcclusionPolygon {
        points,
        angle_steps: steps,
    })
}

/// Even-odd coverage of pixel centres by the polygon, row-major.
pub fn polygon_coverage(points: &[[f64; 2]], width: usize, height: usize) -> Vec<bool> {
    let mut out = vec![false; width * height];
    let n = points.len();
    if n < 3 {
        return out;
    }
    let mut crossings: Vec<f64> = Vec::with_capacity(n);
    for y in 0..height {
        let py = y as f64 + 0.5;
        crossings.clear();
        let mut j = n - 1;
        for i in 0..n {
            let [xi, yi] = points[i];
            let [xj, yj] = points[j];
            if (yi > py) != (yj > py) {
                crossings.push((xj - xi) * (py - yi) / (yj - yi) + xi);
            }
            j = i;
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(f64::total_cmp);
        for x in 0..width {
            let px = x as f64 + 0.5;
            // crossings strictly to the right of the pixel centre
            let right = crossings.len() - crossings.partition_point(|&c| c <= px);
            out[y * width + x] = right % 2 == 1;
        }
    }
    out
}

/// Sets every pixel covered by the polygon to `value`.
pub fn paint_polygon<T: Real>(patch: &mut DepthPatch<T>, points: &[[f64; 2]], value: T) {
    let cover = polygon_coverage(points, patch.width, patch.height);
    for (v, inside) in patch.values.iter_mut().zip(cover) {
        if inside {
            *v = value;
        }
    }
}

/// Occluder depth value: between the patch's largest (nearest) value and 1.
pub fn occluder_value(max_foreground: f64, depth_offset: f64) -> f64 {
    1.0 - (1.0 - max_foreground) * depth_offset.clamp(0.0, 1.0)
}

/// Paints every occluder of `occlusions` in front of the patch content. Nearer occluders are
/// painted last so overlapping occluders keep the nearest surface.
pub fn apply_occlusions<T: Real>(patch: &DepthPatch<T>, occlusions: &[OcclusionParams]) -> Result<DepthPatch<T>, AugmentError> {
    let max_fg = patch.max_value().as_f64();
    let mut shapes = Vec::with_capacity(occlusions.len());
    for occ in occlusions {
        let mut rng = ChaCha8Rng::seed_from_u64(occ.shape_seed);
        let poly = generate_occlusion_polygon(&occ.polygon, &mut rng)?;
        shapes.push((occluder_value(max_fg, occ.depth_offset), poly));
    }
    shapes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = patch.clone();
    for (value, poly) in &shapes {
        paint_polygon(&mut out, &poly.points, T::lit(*value));
    }
    Ok(out)
}

/// Label and viewpoint of the clean patch a pair was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub class_id: u32,
    pub pose: Quaternion<f64>,
    pub vertex_index: usize,
    pub in_plane_deg: f64,
}

/// Training triple: clean target, augmented input, and the clean foreground mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSample<T> {
    pub clean: DepthPatch<T>,
    pub augmented: DepthPatch<T>,
    pub mask: ForegroundMask,
    pub z: AugmentationVector,
    pub meta: Option<SampleMeta>,
}

/// Runs the pipeline on `clean`: distortion, occlusions, then background on pixels that are
/// still exactly 0. Stages absent from `z` are skipped.
pub fn augment<T: Real>(clean: &DepthPatch<T>, z: &AugmentationVector) -> PairSample<T> {
    augment_from(clean, clean, z).expect("identical shapes")
}

/// Like [`augment`], but the 2D stages start from `start` (e.g. a sensor-simulated version of
/// `clean`). The mask is always computed from `clean`.
pub fn augment_from<T: Real>(
    clean: &DepthPatch<T>,
    start: &DepthPatch<T>,
    z: &AugmentationVector,
) -> Result<PairSample<T>, AugmentError> {
    check_shape(start, clean.width, clean.height)?;
    let mask = foreground_mask(clean);
    let mut x = start.clone();
    if let Some(d) = &z.distortion {
        x = distort_foreground(&x, d);
    }
    if !z.occlusions.is_empty() {
        x = apply_occlusions(&x, &z.occlusions)?;
    }
    if let Some(bg) = &z.background {
        let current = foreground_mask(&x);
        x = fill_background(&x, &current, bg)?;
    }
    Ok(PairSample {
        clean: clean.clone(),
        augmented: x,
        mask,
        z: z.clone(),
        meta: None,
    })
}

/// Hook for a sensor/clutter simulation stage run before the 2D augmentations. Receives the
/// mesh as rendered (centred on its centroid) and returns a replacement for the clean patch.
pub trait SensorSimulator: Send + Sync {
    fn simulate(
        &self,
        mesh: &TriangleMesh<f64>,
        viewpoint: &Viewpoint<f64>,
        clean: &DepthPatch<f32>,
    ) -> Result<DepthPatch<f32>, AugmentError>;
}
