//! Deterministic 2D procedural noise: Perlin gradient noise (single octave or fractal),
//! cellular (Worley F1) noise and white noise.
//!
//! All randomness comes from integer hashing of `(seed, lattice cell)`, so values are
//! reproducible bit-for-bit on every platform. Every kind returns values in `[-1, 1]`.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Perlin,
    FractalPerlin,
    Cellular,
    White,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [
        NoiseKind::Perlin,
        NoiseKind::FractalPerlin,
        NoiseKind::Cellular,
        NoiseKind::White,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Lattice cycles per pixel.
    pub frequency: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, frequency: f64, seed: u64) -> Self {
        Self {
            kind,
            frequency,
            seed,
        }
    }
}

pub const FRACTAL_OCTAVES: u32 = 4;
pub const FRACTAL_LACUNARITY: f64 = 2.0;
pub const FRACTAL_GAIN: f64 = 0.5;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn hash_cell(seed: u64, ix: i64, iy: i64) -> u64 {
    let hx = mix64((ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let hy = mix64((iy as u64).wrapping_add(0x632b_e59b_d9b4_e019));
    mix64(seed ^ hx ^ hy.rotate_left(29))
}

/// Uniform in `[0, 1)` from the top 53 bits.
#[inline]
fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

const DIAG: f64 = std::f64::consts::FRAC_1_SQRT_2;
const GRADIENTS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (-1.0, 0.0),
    (0.0, 1.0),
    (0.0, -1.0),
    (DIAG, DIAG),
    (-DIAG, DIAG),
    (DIAG, -DIAG),
    (-DIAG, -DIAG),
];

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Single-octave Perlin noise at lattice coordinates; zero on every integer point.
pub fn perlin(seed: u64, x: f64, y: f64) -> f64 {
    let x0 = x.floor();
    let y0 = y.floor();
    let (fx, fy) = (x - x0, y - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let dot = |cx: i64, cy: i64, dx: f64, dy: f64| {
        let (gx, gy) = GRADIENTS[(hash_cell(seed, cx, cy) & 7) as usize];
        gx * dx + gy * dy
    };
    let n00 = dot(ix, iy, fx, fy);
    let n10 = dot(ix.wrapping_add(1), iy, fx - 1.0, fy);
    let n01 = dot(ix, iy.wrapping_add(1), fx, fy - 1.0);
    let n11 = dot(ix.wrapping_add(1), iy.wrapping_add(1), fx - 1.0, fy - 1.0);
    let (u, v) = (fade(fx), fade(fy));
    // unit gradients bound the raw value by sqrt(1/2)
    let raw = lerp(lerp(n00, n10, u), lerp(n01, n11, u), v);
    (raw * std::f64::consts::SQRT_2).clamp(-1.0, 1.0)
}

/// Sum of [`FRACTAL_OCTAVES`] Perlin octaves, renormalized by the total amplitude.
pub fn fractal_perlin(seed: u64, x: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    let mut total = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0;
    for octave in 0..FRACTAL_OCTAVES {
        let octave_seed = mix64(seed.wrapping_add(u64::from(octave)));
        sum += amp * perlin(octave_seed, x * freq, y * freq);
        total += amp;
        amp *= FRACTAL_GAIN;
        freq *= FRACTAL_LACUNARITY;
    }
    (sum / total).clamp(-1.0, 1.0)
}

/// Feature point of lattice cell `(cx, cy)`, uniformly placed inside the cell.
pub fn feature_point(seed: u64, cx: i64, cy: i64) -> (f64, f64) {
    let h = hash_cell(seed, cx, cy);
    (cx as f64 + unit(h), cy as f64 + unit(mix64(h)))
}

/// Distance to the nearest feature point, in lattice units. One feature per cell puts it
/// within `sqrt(2)`, so the 5x5 neighbourhood is always sufficient.
pub fn cellular_f1(seed: u64, x: f64, y: f64) -> f64 {
    let (ix, iy) = (x.floor() as i64, y.floor() as i64);
    let mut best = f64::INFINITY;
    for dy in -2..=2i64 {
        for dx in -2..=2i64 {
            let (px, py) = feature_point(seed, ix.wrapping_add(dx), iy.wrapping_add(dy));
            let d = (px - x).hypot(py - y);
            if d < best {
                best = d;
            }
        }
    }
    best
}

/// Cellular noise: F1 mapped from `[0, sqrt(2)]` to `[-1, 1]`.
pub fn cellular(seed: u64, x: f64, y: f64) -> f64 {
    (cellular_f1(seed, x, y) * std::f64::consts::SQRT_2 - 1.0).clamp(-1.0, 1.0)
}

/// White noise: an independent hash of every distinct sample position.
pub fn white(seed: u64, x: f64, y: f64) -> f64 {
    // + 0.0 folds -0.0 into 0.0
    let hx = mix64((x + 0.0).to_bits());
    let hy = mix64((y + 0.0).to_bits().rotate_left(17) ^ 0x5851_f42d_4c95_7f2d);
    let h = mix64(seed ^ hx ^ hy);
    (2.0 * unit(h) - 1.0).clamp(-1.0, 1.0)
}

/// Noise value at pixel coordinates `(x, y)`; the lattice is scaled by `spec.frequency`.
pub fn noise_at(spec: &NoiseSpec, x: f64, y: f64) -> f64 {
    let (sx, sy) = (x * spec.frequency, y * spec.frequency);
    match spec.kind {
        NoiseKind::Perlin => perlin(spec.seed, sx, sy),
        NoiseKind::FractalPerlin => fractal_perlin(spec.seed, sx, sy),
        NoiseKind::Cellular => cellular(spec.seed, sx, sy),
        NoiseKind::White => white(spec.seed, sx, sy),
    }
}

/// Row-major grid of noise values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Evaluates `noise_at(spec, x, y)` at every pixel `(x, y)` of a `width x height` grid.
pub fn fill_field(spec: &NoiseSpec, width: usize, height: usize) -> ScalarField {
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            values.push(noise_at(spec, x as f64, y as f64));
        }
    }
    ScalarField {
        width,
        height,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perlin_vanishes_on_lattice() {
        let spec = NoiseSpec::new(NoiseKind::Perlin, 1.0, 42);
        for x in -20..20 {
            for y in -20..20 {
                assert_eq!(noise_at(&spec, x as f64, y as f64), 0.0);
            }
        }
    }

    #[test]
    fn deterministic() {
        for kind in NoiseKind::ALL {
            let spec = NoiseSpec::new(kind, 0.037, 7);
            assert_eq!(
                noise_at(&spec, 12.25, -3.5).to_bits(),
                noise_at(&spec, 12.25, -3.5).to_bits()
            );
        }
    }

    #[test]
    fn cellular_is_minus_one_at_features() {
        for (cx, cy) in [(0, 0), (3, -7), (-11, 5)] {
            let (px, py) = feature_point(99, cx, cy);
            assert_eq!(cellular(99, px, py), -1.0);
        }
    }

    #[test]
    fn white_seeds_differ() {
        let a = fill_field(&NoiseSpec::new(NoiseKind::White, 0.05, 1), 64, 64);
        let b = fill_field(&NoiseSpec::new(NoiseKind::White, 0.05, 2), 64, 64);
        assert_ne!(a, b);
        let (lo, hi) = a.min_max();
        assert!(lo >= -1.0 && hi <= 1.0 && hi - lo > 1.0);
    }

    #[test]
    fn tiny_frequency_perlin_is_flat() {
        let f = fill_field(&NoiseSpec::new(NoiseKind::Perlin, 0.0001, 5), 64, 64);
        let (lo, hi) = f.min_max();
        assert!(hi - lo < 0.05, "{lo} {hi}");
    }

    #[test]
    fn single_pixel_field() {
        for kind in NoiseKind::ALL {
            let f = fill_field(&NoiseSpec::new(kind, 0.02, 3), 1, 1);
            assert_eq!(f.values.len(), 1);
            assert!((-1.0..=1.0).contains(&f.values[0]));
        }
    }

    #[test]
    fn field_matches_pointwise() {
        let spec = NoiseSpec::new(NoiseKind::FractalPerlin, 0.08, 11);
        let f = fill_field(&spec, 9, 5);
        assert_eq!(f.get(7, 3), noise_at(&spec, 7.0, 3.0));
    }

    proptest! {
        #[test]
        fn perlin_is_lipschitz(x in -1000.0..1000.0f64, y in -1000.0..1000.0f64, seed: u64) {
            let step = 1e-3;
            let v = perlin(seed, x, y);
            prop_assert!((perlin(seed, x + step, y) - v).abs() <= 4.0 * step);
            prop_assert!((perlin(seed, x, y + step) - v).abs() <= 4.0 * step);
        }

        #[test]
        fn all_kinds_bounded(x in -1e4..1e4f64, y in -1e4..1e4f64, seed: u64, freq in 0.0001..0.1f64) {
            for kind in NoiseKind::ALL {
                let v = noise_at(&NoiseSpec::new(kind, freq, seed), x, y);
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }
}
