//! Depth patches and foreground masks.

use crate::scalar::Real;

/// Metric depth range mapped onto the `[0, 1]` patch values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthWindow<T> {
    pub znear: T,
    pub zfar: T,
}

impl<T: Real> DepthWindow<T> {
    pub fn new(znear: T, zfar: T) -> Option<Self> {
        (znear < zfar && znear.is_finite() && zfar.is_finite()).then_some(Self { znear, zfar })
    }

    /// Normalized value of a surface at depth `z`: `(zfar - z) / (zfar - znear)`.
    /// Surfaces at or beyond `zfar` are background (0); surfaces in front of `znear` saturate at 1.
    pub fn normalize(&self, z: T) -> T {
        if !(z < self.zfar) {
            return T::zero();
        }
        ((self.zfar - z) / (self.zfar - self.znear)).min(T::one())
    }

    pub fn cast<U: Real>(&self) -> DepthWindow<U> {
        DepthWindow {
            znear: U::lit(self.znear.as_f64()),
            zfar: U::lit(self.zfar.as_f64()),
        }
    }
}

/// Single-channel depth image, row-major, values in `[0, 1]`, background exactly 0.
/// Closer surfaces have larger values.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthPatch<T> {
    pub width: usize,
    pub height: usize,
    pub values: Vec<T>,
    /// Normalization window the patch was rendered with, when known.
    pub window: Option<DepthWindow<T>>,
}

impl<T: Real> DepthPatch<T> {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
            window: None,
        }
    }

    /// Panics if `values.len() != width * height`.
    pub fn from_values(width: usize, height: usize, values: Vec<T>) -> Self {
        assert_eq!(values.len(), width * height, "patch buffer size");
        Self {
            width,
            height,
            values,
            window: None,
        }
    }

    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self::from_values(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        let i = self.index(x, y);
        self.values[i] = v;
    }

    pub fn same_shape<U>(&self, other: &DepthPatch<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_background(&self) -> bool {
        self.values.iter().all(|v| v.is_zero())
    }

    pub fn max_value(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> DepthPatch<U> {
        DepthPatch {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            window: self.window.map(|w| w.cast()),
        }
    }
}

/// Binary image marking nonzero pixels of a clean patch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl ForegroundMask {
    pub fn filled(width: usize, height: usize, on: bool) -> Self {
        Self {
            width,
            height,
            values: vec![u8::from(on); width * height],
        }
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] != 0
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&m| m != 0).count()
    }

    pub fn to_patch<T: Real>(&self) -> DepthPatch<T> {
        DepthPatch::from_values(
            self.width,
            self.height,
            self.values
                .iter()
                .map(|&m| if m != 0 { T::one() } else { T::zero() })
                .collect(),
        )
    }
}

/// `1` wherever the patch is nonzero, `0` elsewhere. No threshold.
pub fn foreground_mask<T: Real>(patch: &DepthPatch<T>) -> ForegroundMask {
    ForegroundMask {
        width: patch.width,
        height: patch.height,
        values: patch.values.iter().map(|v| u8::from(!v.is_zero())).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_examples() {
        let p = DepthPatch::<f32>::zeros(8, 8);
        assert_eq!(foreground_mask(&p).count(), 0);

        let mut p = DepthPatch::<f64>::zeros(8, 8);
        p.set(3, 5, 0.3);
        let m = foreground_mask(&p);
        assert_eq!(m.count(), 1);
        assert!(m.is_set(3, 5));

        assert_eq!(foreground_mask(&m.to_patch::<f64>()), m);
    }

    #[test]
    fn window_normalization() {
        let w = DepthWindow::new(350.0, 850.0).unwrap();
        assert_eq!(w.normalize(600.0), 0.5);
        assert_eq!(w.normalize(500.0), 0.7);
        assert_eq!(w.normalize(850.0), 0.0);
        assert_eq!(w.normalize(900.0), 0.0);
        assert_eq!(w.normalize(100.0), 1.0);
        assert!(DepthWindow::new(2.0, 1.0).is_none());
    }
}
