use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Row-major 8-bit raster holding either binary occupancy (`classes == 2`)
/// or small-integer class labels in `0..classes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    width: u32,
    height: u32,
    classes: u8,
    data: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Self::zeros_with_classes(width, height, 2)
    }

    pub fn zeros_with_classes(width: u32, height: u32, classes: u8) -> Self {
        Self { width, height, classes: classes.max(2), data: vec![0; width as usize * height as usize] }
    }

    pub fn binary(width: u32, height: u32, data: Vec<u8>) -> Result<Self, GeometryError> {
        Self::labels(width, height, 2, data)
    }

    pub fn labels(width: u32, height: u32, classes: u8, data: Vec<u8>) -> Result<Self, GeometryError> {
        if data.len() != width as usize * height as usize {
            return Err(GeometryError::Argument(format!(
                "mask data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if classes < 2 {
            return Err(GeometryError::Argument("a mask needs at least 2 classes".into()));
        }
        if let Some(v) = data.iter().find(|&&v| v >= classes) {
            return Err(GeometryError::Argument(format!("label {v} outside declared class count {classes}")));
        }
        Ok(Self { width, height, classes, data })
    }

    /// Binary mask where `f(x, y)` is true.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut m = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    m.set(x, y, 1);
                }
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn classes(&self) -> u8 {
        self.classes
    }

    pub fn is_binary(&self) -> bool {
        self.classes == 2
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.data[self.index(x, y)]
    }

    /// Signed lookup returning 0 outside the canvas.
    #[inline]
    pub fn get_or_zero(&self, x: i64, y: i64) -> u8 {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            0
        } else {
            self.get(x as u32, y as u32)
        }
    }

    /// Panics if `value` is outside the class range.
    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: u8) {
        assert!(value < self.classes, "label {value} outside class count {}", self.classes);
        let i = self.index(x, y);
        self.data[i] = value;
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Collapses labels to occupancy: every non-background pixel becomes 1.
    pub fn to_binary(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            classes: 2,
            data: self.data.iter().map(|&v| u8::from(v != 0)).collect(),
        }
    }

    /// Intersection-over-union of the non-zero sets of two equally sized masks.
    pub fn iou(&self, other: &Mask) -> Result<f64, GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::Argument("mask dimension mismatch".into()));
        }
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            let (a, b) = (a != 0, b != 0);
            inter += usize::from(a && b);
            union += usize::from(a || b);
        }
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    /// Copy of the `w x h` window starting at `(x0, y0)`; pixels past the canvas read as 0.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Mask {
        let mut out = Mask::zeros_with_classes(w, h, self.classes);
        for y in 0..h {
            for x in 0..w {
                let v = self.get_or_zero(i64::from(x0 + x), i64::from(y0 + y));
                if v != 0 {
                    out.set(x, y, v);
                }
            }
        }
        out
    }

    /// Binary mask as an 8-bit grayscale image (0 / 255) for lossless storage.
    pub fn to_gray_image(&self) -> image::GrayImage {
        let scale = if self.is_binary() { 255 } else { 1 };
        image::GrayImage::from_fn(self.width, self.height, |x, y| image::Luma([self.get(x, y).saturating_mul(scale)]))
    }
}
