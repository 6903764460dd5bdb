//! Feature grids and grid topology.
//!
//! Pixels are addressed by a linear index in row-major order with `x`
//! varying fastest, then `y`, then the frame axis `t`. 2D images are grids
//! of depth 1; volumes and frame stacks use 6-connectivity instead of 4.

use image::RgbImage;

use crate::error::{AdaptelError, Result};

/// Linear offset into a grid (`x + width * (y + height * t)`).
pub type PixelIndex = usize;

/// Number of CIELAB channels.
pub const LAB_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub width: usize,
    pub height: usize,
    pub depth: usize,
}

impl GridShape {
    pub fn new(width: usize, height: usize, depth: usize) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(AdaptelError::Empty(format!(
                "grid dimensions must be positive, got {width}x{height}x{depth}"
            )));
        }
        width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(depth))
            .filter(|&n| n < u32::MAX as usize)
            .ok_or_else(|| {
                AdaptelError::InvalidConfig(format!("grid {width}x{height}x{depth} is too large"))
            })?;
        Ok(GridShape {
            width,
            height,
            depth,
        })
    }

    pub fn planar(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height * self.depth
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn is_volume(&self) -> bool {
        self.depth > 1
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, t: usize) -> PixelIndex {
        debug_assert!(x < self.width && y < self.height && t < self.depth);
        x + self.width * (y + self.height * t)
    }

    #[inline]
    pub fn coords(&self, idx: PixelIndex) -> (usize, usize, usize) {
        let x = idx % self.width;
        let rest = idx / self.width;
        (x, rest % self.height, rest / self.height)
    }

    /// Center pixel, `(width/2, height/2, depth/2)` rounded down.
    pub fn center(&self) -> PixelIndex {
        self.index(self.width / 2, self.height / 2, self.depth / 2)
    }

    /// Neighbors of `idx` in the fixed order +x, -x, +y, -y, +t, -t, with
    /// out-of-bounds positions omitted. The t axis only contributes when
    /// `depth > 1`.
    #[inline]
    pub fn neighbors(&self, idx: PixelIndex) -> Neighbors {
        let (x, y, t) = self.coords(idx);
        let plane = self.width * self.height;
        let mut out = Neighbors {
            buf: [0; 6],
            len: 0,
            pos: 0,
        };
        if x + 1 < self.width {
            out.push(idx + 1);
        }
        if x > 0 {
            out.push(idx - 1);
        }
        if y + 1 < self.height {
            out.push(idx + self.width);
        }
        if y > 0 {
            out.push(idx - self.width);
        }
        if t + 1 < self.depth {
            out.push(idx + plane);
        }
        if t > 0 {
            out.push(idx - plane);
        }
        out
    }
}

/// Allocation-free neighbor list, at most six entries.
#[derive(Debug, Clone)]
pub struct Neighbors {
    buf: [PixelIndex; 6],
    len: u8,
    pos: u8,
}

impl Neighbors {
    #[inline]
    fn push(&mut self, idx: PixelIndex) {
        self.buf[self.len as usize] = idx;
        self.len += 1;
    }
}

impl Iterator for Neighbors {
    type Item = PixelIndex;

    #[inline]
    fn next(&mut self) -> Option<PixelIndex> {
        if self.pos < self.len {
            let v = self.buf[self.pos as usize];
            self.pos += 1;
            Some(v)
        } else {
            None
        }
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = (self.len - self.pos) as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Neighbors {}

/// Connected neighbors of `idx`: 4-connectivity in 2D, 6 in 3D.
pub fn neighbors(idx: PixelIndex, shape: GridShape) -> Vec<PixelIndex> {
    shape.neighbors(idx).collect()
}

/// Dense per-pixel feature vectors, stored pixel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    shape: GridShape,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn from_vec(shape: GridShape, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(AdaptelError::InvalidConfig(
                "feature grid needs at least one channel".into(),
            ));
        }
        if data.len() != shape.len() * channels {
            return Err(AdaptelError::ShapeMismatch(format!(
                "expected {} values for {} pixels x {} channels, got {}",
                shape.len() * channels,
                shape.len(),
                channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(AdaptelError::InvalidConfig(
                "feature values must be finite".into(),
            ));
        }
        Ok(FeatureGrid {
            shape,
            channels,
            data,
        })
    }

    #[inline]
    pub fn shape(&self) -> GridShape {
        self.shape
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.shape.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn pixel(&self, idx: PixelIndex) -> &[f64] {
        &self.data[idx * self.channels..(idx + 1) * self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Appends position channels `weight * x`, `weight * y` (and `weight * t`
    /// for volumes). A weight of zero returns the grid unchanged.
    pub fn with_spatial(self, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(AdaptelError::InvalidConfig(format!(
                "spatial weight must be finite and >= 0, got {weight}"
            )));
        }
        if weight == 0.0 {
            return Ok(self);
        }
        let extra = if self.shape.is_volume() { 3 } else { 2 };
        let channels = self.channels + extra;
        let mut data = Vec::with_capacity(self.shape.len() * channels);
        for idx in 0..self.shape.len() {
            data.extend_from_slice(self.pixel(idx));
            let (x, y, t) = self.shape.coords(idx);
            data.push(weight * x as f64);
            data.push(weight * y as f64);
            if extra == 3 {
                data.push(weight * t as f64);
            }
        }
        Ok(FeatureGrid {
            shape: self.shape,
            channels,
            data,
        })
    }
}

// D65 reference white, 2 degree observer.
const WHITE_X: f64 = 0.950_47;
const WHITE_Y: f64 = 1.0;
const WHITE_Z: f64 = 1.088_83;

#[inline]
fn srgb_to_linear(c: u8) -> f64 {
    let c = c as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB (8 bit per channel, D65) to CIE 1976 L*a*b*.
pub fn srgb_to_lab(rgb: [u8; 3]) -> [f64; 3] {
    let r = srgb_to_linear(rgb[0]);
    let g = srgb_to_linear(rgb[1]);
    let b = srgb_to_linear(rgb[2]);

    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;

    let fx = lab_f(x / WHITE_X);
    let fy = lab_f(y / WHITE_Y);
    let fz = lab_f(z / WHITE_Z);

    let l = (116.0 * fy - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

fn lab_cached(cache: &mut std::collections::HashMap<[u8; 3], [f64; 3]>, rgb: [u8; 3]) -> [f64; 3] {
    *cache.entry(rgb).or_insert_with(|| srgb_to_lab(rgb))
}

/// Converts one or more equally sized frames into a CIELAB feature grid.
/// A single frame yields a 2D grid; several frames stack along `t`.
pub fn build_feature_grid(frames: &[RgbImage]) -> Result<FeatureGrid> {
    let first = frames
        .first()
        .ok_or_else(|| AdaptelError::Empty("no frames to segment".into()))?;
    let (w, h) = first.dimensions();
    for (index, frame) in frames.iter().enumerate() {
        let (fw, fh) = frame.dimensions();
        if (fw, fh) != (w, h) {
            return Err(AdaptelError::FrameMismatch {
                index,
                expected_w: w,
                expected_h: h,
                found_w: fw,
                found_h: fh,
            });
        }
    }
    let shape = GridShape::new(w as usize, h as usize, frames.len())?;
    let mut data = Vec::with_capacity(shape.len() * LAB_CHANNELS);
    let mut cache = std::collections::HashMap::new();
    for frame in frames {
        for px in frame.pixels() {
            data.extend_from_slice(&lab_cached(&mut cache, px.0));
        }
    }
    FeatureGrid::from_vec(shape, LAB_CHANNELS, data)
}
