//! Dense 2D scalar fields and rectangular index regions.
//!
//! Images store photon values in row-major order; the row-major layout doubles
//! as the lexicographic vector view used by the solvers, so no copies are
//! needed to move between the 2D and vector pictures. Regions are inclusive at
//! the top-left corner and sized by height/width.

use crate::error::{CoreError, Result};

/// Dense 2D image, row-major, values in photons/pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize) -> Self {
        Image {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Self {
        Image {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    /// Builds an image from a row-major vector; length must be `height*width`.
    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(CoreError::ShapeMismatch {
                what: "from_vec",
                ah: height,
                aw: width,
                bh: data.len(),
                bw: 1,
            });
        }
        Ok(Image {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Image {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.height && col < self.width);
        self.data[row * self.width + col] = value;
    }

    /// Lexicographic (row-major) vector view.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn shape_region(&self) -> Region {
        Region::new(0, 0, self.height, self.width)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &Image) -> f64 {
        debug_assert!(self.same_shape(other));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    /// `self += s * other`, shapes must match.
    pub fn axpy(&mut self, s: f64, other: &Image) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Image) -> Image {
        debug_assert!(self.same_shape(other));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Image {
            height: self.height,
            width: self.width,
            data,
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Extracts the rectangular sub-image `r`; `r` must lie inside the image.
    pub fn chop(&self, r: &Region) -> Result<Image> {
        if r.top < 0 || r.left < 0 {
            return Err(CoreError::OutOfBounds {
                what: "chop region origin",
                row: r.top,
                col: r.left,
                height: self.height,
                width: self.width,
            });
        }
        let (top, left) = (r.top as usize, r.left as usize);
        if top + r.height > self.height || left + r.width > self.width {
            return Err(CoreError::OutOfBounds {
                what: "chop region extent",
                row: r.top + r.height as i64 - 1,
                col: r.left + r.width as i64 - 1,
                height: self.height,
                width: self.width,
            });
        }
        let mut out = Image::zeros(r.height, r.width);
        for row in 0..r.height {
            let src = (top + row) * self.width + left;
            let dst = row * r.width;
            out.data[dst..dst + r.width].copy_from_slice(&self.data[src..src + r.width]);
        }
        Ok(out)
    }

    /// Like [`Image::chop`] but regions may extend past the image; pixels
    /// outside are filled with zeros.
    pub fn chop_zero_extended(&self, r: &Region) -> Image {
        let mut out = Image::zeros(r.height, r.width);
        for row in 0..r.height {
            let src_row = r.top + row as i64;
            if src_row < 0 || src_row >= self.height as i64 {
                continue;
            }
            for col in 0..r.width {
                let src_col = r.left + col as i64;
                if src_col < 0 || src_col >= self.width as i64 {
                    continue;
                }
                out.data[row * r.width + col] =
                    self.data[src_row as usize * self.width + src_col as usize];
            }
        }
        out
    }

    /// Extends the image by `margin` pixels on every side, replicating edge values.
    pub fn extend_replicate(&self, margin: usize) -> Image {
        let h = self.height + 2 * margin;
        let w = self.width + 2 * margin;
        Image::from_fn(h, w, |r, c| {
            let src_r = (r as i64 - margin as i64).clamp(0, self.height as i64 - 1) as usize;
            let src_c = (c as i64 - margin as i64).clamp(0, self.width as i64 - 1) as usize;
            self.get(src_r, src_c)
        })
    }
}

/// Rectangular region: inclusive top-left corner plus height/width.
///
/// Coordinates are signed so regions can be expressed in the extended estimate
/// domain, but most operations require them to resolve inside a concrete image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Region {
    pub top: i64,
    pub left: i64,
    pub height: usize,
    pub width: usize,
}

impl Region {
    pub fn new(top: i64, left: i64, height: usize, width: usize) -> Self {
        Region {
            top,
            left,
            height,
            width,
        }
    }

    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn bottom(&self) -> i64 {
        self.top + self.height as i64
    }

    pub fn right(&self) -> i64 {
        self.left + self.width as i64
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= self.top && row < self.bottom() && col >= self.left && col < self.right()
    }

    /// Intersection, or `None` when the regions are disjoint.
    pub fn intersect(&self, other: &Region) -> Option<Region> {
        let top = self.top.max(other.top);
        let left = self.left.max(other.left);
        let bottom = self.bottom().min(other.bottom());
        let right = self.right().min(other.right());
        if bottom <= top || right <= left {
            return None;
        }
        Some(Region::new(
            top,
            left,
            (bottom - top) as usize,
            (right - left) as usize,
        ))
    }

    /// Grows the region by `margin` on every side.
    pub fn dilate(&self, margin: usize) -> Region {
        Region::new(
            self.top - margin as i64,
            self.left - margin as i64,
            self.height + 2 * margin,
            self.width + 2 * margin,
        )
    }

    /// Re-expresses this region relative to `frame`'s origin.
    pub fn relative_to(&self, frame: &Region) -> Region {
        Region::new(
            self.top - frame.top,
            self.left - frame.left,
            self.height,
            self.width,
        )
    }
}

/// Which global pixel domain a region is indexed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainTag {
    /// Sensor pixels, the support of the observed image.
    Observed,
    /// Unknown-image pixels; extends the observed domain by the convolution margin.
    Estimate,
}

/// A region together with the global domain it indexes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSet {
    pub region: Region,
    pub domain: DomainTag,
}

/// Zero-pads `img` into a `canvas_h` x `canvas_w` canvas at region `r`.
///
/// Adjoint of [`Image::chop`]: `<chop(a, r), b> == <a, embed_zero_pad(b, r, ..)>`.
pub fn embed_zero_pad(img: &Image, r: &Region, canvas_h: usize, canvas_w: usize) -> Result<Image> {
    if img.height() != r.height || img.width() != r.width {
        return Err(CoreError::ShapeMismatch {
            what: "embed_zero_pad",
            ah: img.height(),
            aw: img.width(),
            bh: r.height,
            bw: r.width,
        });
    }
    if r.top < 0 || r.left < 0 || r.bottom() > canvas_h as i64 || r.right() > canvas_w as i64 {
        return Err(CoreError::OutOfBounds {
            what: "embed region",
            row: r.top,
            col: r.left,
            height: canvas_h,
            width: canvas_w,
        });
    }
    let mut out = Image::zeros(canvas_h, canvas_w);
    accumulate_embed(&mut out, img, r);
    Ok(out)
}

/// Adds `img` into `canvas` at region `r`, skipping out-of-canvas pixels.
pub fn accumulate_embed(canvas: &mut Image, img: &Image, r: &Region) {
    debug_assert_eq!(img.height(), r.height);
    debug_assert_eq!(img.width(), r.width);
    for row in 0..r.height {
        let dst_row = r.top + row as i64;
        if dst_row < 0 || dst_row >= canvas.height() as i64 {
            continue;
        }
        for col in 0..r.width {
            let dst_col = r.left + col as i64;
            if dst_col < 0 || dst_col >= canvas.width() as i64 {
                continue;
            }
            let v = canvas.get(dst_row as usize, dst_col as usize) + img.get(row, col);
            canvas.set(dst_row as usize, dst_col as usize, v);
        }
    }
}

/// Weighted squared norm `sum_l w(l) a(l)^2`; shapes must match, `w >= 0`.
pub fn weighted_norm_sq(a: &Image, w: &Image) -> Result<f64> {
    if !a.same_shape(w) {
        return Err(CoreError::ShapeMismatch {
            what: "weighted_norm_sq",
            ah: a.height(),
            aw: a.width(),
            bh: w.height(),
            bw: w.width(),
        });
    }
    Ok(a.as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(v, wt)| wt * v * v)
        .sum())
}
