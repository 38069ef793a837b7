//! Point-spread-function models: Airy disks from a circular aperture and
//! anisotropic Gaussians parameterized by FWHM, sampled on odd supports.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::fft::{to_complex, Fft2};
use crate::image::Image;
use crate::io;

/// Nonnegative, unit-sum convolution kernel on an odd square support.
#[derive(Debug, Clone, PartialEq)]
pub struct Psf {
    size: usize,
    kernel: Image,
}

impl Psf {
    /// Validates oddness, nonnegativity and unit sum (1e-12).
    pub fn new(kernel: Image) -> Result<Self> {
        let size = kernel.height();
        if size % 2 == 0 || kernel.width() != size {
            return Err(CoreError::param(format!(
                "psf support must be odd and square, got {}x{}",
                kernel.height(),
                kernel.width()
            )));
        }
        if kernel.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(CoreError::param("psf entries must be finite and >= 0"));
        }
        let sum: f64 = kernel.as_slice().iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CoreError::param(format!(
                "psf must have unit sum, got {sum}"
            )));
        }
        Ok(Psf { size, kernel })
    }

    fn from_unnormalized(mut kernel: Image) -> Result<Self> {
        let sum: f64 = kernel.as_slice().iter().sum();
        if sum <= 0.0 {
            return Err(CoreError::param("psf mass is zero"));
        }
        kernel.scale_in_place(1.0 / sum);
        // kill tiny negative round-off before validating
        for v in kernel.as_mut_slice() {
            if *v < 0.0 && *v > -1e-16 {
                *v = 0.0;
            }
        }
        Psf::new(kernel)
    }

    /// Discrete delta: identity kernel.
    pub fn delta(size: usize) -> Result<Self> {
        if size % 2 == 0 {
            return Err(CoreError::param("psf support must be odd"));
        }
        let mut kernel = Image::zeros(size, size);
        kernel.set(size / 2, size / 2, 1.0);
        Psf::new(kernel)
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Index of the central pixel, `(size - 1) / 2`.
    pub fn center(&self) -> usize {
        (self.size - 1) / 2
    }

    /// Half-width of the support, the margin a valid convolution trims per side.
    pub fn margin(&self) -> usize {
        (self.size - 1) / 2
    }

    pub fn kernel(&self) -> &Image {
        &self.kernel
    }
}

/// Airy-disk intensity PSF: squared magnitude of the inverse DFT of a binary
/// circular pupil of `aperture_radius` DFT samples on the support grid.
pub fn airy_psf(support: usize, aperture_radius: f64) -> Result<Psf> {
    if support % 2 == 0 {
        return Err(CoreError::param("airy psf support must be odd"));
    }
    if aperture_radius <= 0.0 {
        return Err(CoreError::param("aperture radius must be positive"));
    }
    if aperture_radius >= support as f64 / 2.0 {
        return Err(CoreError::param(format!(
            "aperture radius {aperture_radius} must be < support/2 = {}",
            support as f64 / 2.0
        )));
    }
    let n = support;
    // Binary pupil in DFT sample coordinates, distances wrapped around the grid.
    let mut pupil = vec![0.0; n * n];
    for u in 0..n {
        for v in 0..n {
            let du = u.min(n - u) as f64;
            let dv = v.min(n - v) as f64;
            if du * du + dv * dv <= aperture_radius * aperture_radius {
                pupil[u * n + v] = 1.0;
            }
        }
    }
    let fft = Fft2::new(n, n);
    let mut buf = to_complex(&pupil);
    fft.inverse(&mut buf);
    // Intensity peaks at the frequency origin; cyclic-shift it to the support center.
    let c = (n - 1) / 2;
    let kernel = Image::from_fn(n, n, |r, c_out| {
        let src_r = (r + n - c) % n;
        let src_c = (c_out + n - c) % n;
        buf[src_r * n + src_c].norm_sqr()
    });
    Psf::from_unnormalized(kernel)
}

fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Axis-aligned Gaussian PSF with the given per-axis FWHM, sampled at pixel
/// centers and normalized to unit sum.
pub fn gaussian_psf(support: usize, fwhm_y: f64, fwhm_x: f64) -> Result<Psf> {
    if support % 2 == 0 {
        return Err(CoreError::param("gaussian psf support must be odd"));
    }
    if fwhm_y <= 0.0 || fwhm_x <= 0.0 {
        return Err(CoreError::param("FWHM must be positive"));
    }
    let sy = fwhm_to_sigma(fwhm_y);
    let sx = fwhm_to_sigma(fwhm_x);
    let c = (support - 1) as f64 / 2.0;
    let kernel = Image::from_fn(support, support, |r, col| {
        let dy = (r as f64 - c) / sy;
        let dx = (col as f64 - c) / sx;
        (-0.5 * (dy * dy + dx * dx)).exp()
    });
    Psf::from_unnormalized(kernel)
}

/// A grid of locally sampled PSFs at equidistant points of the field-of-view.
#[derive(Debug, Clone)]
pub struct PsfGrid {
    rows: usize,
    cols: usize,
    support: usize,
    /// Grid point pixel coordinates in the observed image, row-major order.
    points: Vec<(usize, usize)>,
    psfs: Vec<Psf>,
}

impl PsfGrid {
    pub fn new(
        rows: usize,
        cols: usize,
        points: Vec<(usize, usize)>,
        psfs: Vec<Psf>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || points.len() != rows * cols || psfs.len() != rows * cols {
            return Err(CoreError::param("psf grid dimensions inconsistent"));
        }
        let support = psfs[0].size();
        if psfs.iter().any(|p| p.size() != support) {
            return Err(CoreError::param("all grid psfs must share one support"));
        }
        Ok(PsfGrid {
            rows,
            cols,
            support,
            points,
            psfs,
        })
    }

    /// Grid with the same PSF at every point (shift-invariant degeneracy).
    pub fn uniform(rows: usize, cols: usize, image_h: usize, image_w: usize, psf: Psf) -> Result<Self> {
        let points = grid_points(rows, cols, image_h, image_w)?;
        let psfs = vec![psf; rows * cols];
        PsfGrid::new(rows, cols, points, psfs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn point(&self, row: usize, col: usize) -> (usize, usize) {
        self.points[row * self.cols + col]
    }

    pub fn psf(&self, row: usize, col: usize) -> &Psf {
        &self.psfs[row * self.cols + col]
    }

    pub fn psf_by_id(&self, id: usize) -> &Psf {
        &self.psfs[id]
    }

    /// Writes the grid as a key=value header plus a raw f64 blob of the
    /// kernels stacked vertically in grid order.
    pub fn save(&self, header_path: &Path, blob_path: &Path) -> Result<()> {
        let mut header = String::new();
        writeln!(header, "rows={}", self.rows).unwrap();
        writeln!(header, "cols={}", self.cols).unwrap();
        writeln!(header, "support={}", self.support).unwrap();
        for (i, (r, c)) in self.points.iter().enumerate() {
            writeln!(header, "point.{i}={r},{c}").unwrap();
        }
        writeln!(header, "blob={}", blob_path.file_name().unwrap().to_string_lossy()).unwrap();
        std::fs::write(header_path, header)?;

        let mut stacked = Image::zeros(self.rows * self.cols * self.support, self.support);
        for (i, psf) in self.psfs.iter().enumerate() {
            for r in 0..self.support {
                for c in 0..self.support {
                    stacked.set(i * self.support + r, c, psf.kernel().get(r, c));
                }
            }
        }
        io::write_raw(&stacked, blob_path)
    }

    pub fn load(header_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(header_path)?;
        let mut rows = 0usize;
        let mut cols = 0usize;
        let mut support = 0usize;
        let mut blob_name = String::new();
        let mut points_kv: Vec<(usize, (usize, usize))> = Vec::new();
        for line in text.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            match key {
                "rows" => rows = parse_usize(value, "rows")?,
                "cols" => cols = parse_usize(value, "cols")?,
                "support" => support = parse_usize(value, "support")?,
                "blob" => blob_name = value.to_string(),
                _ => {
                    if let Some(idx) = key.strip_prefix("point.") {
                        let idx = parse_usize(idx, "point index")?;
                        let (r, c) = value.split_once(',').ok_or_else(|| {
                            CoreError::Format(format!("bad grid point entry: {line}"))
                        })?;
                        points_kv.push((idx, (parse_usize(r, "point row")?, parse_usize(c, "point col")?)));
                    }
                }
            }
        }
        points_kv.sort_by_key(|(i, _)| *i);
        let points: Vec<_> = points_kv.into_iter().map(|(_, p)| p).collect();
        let blob_path = header_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&blob_name);
        let stacked = io::read_raw(&blob_path)?;
        if stacked.height() != rows * cols * support || stacked.width() != support {
            return Err(CoreError::Format("psf blob size does not match header".into()));
        }
        let mut psfs = Vec::with_capacity(rows * cols);
        for i in 0..rows * cols {
            let kernel = Image::from_fn(support, support, |r, c| stacked.get(i * support + r, c));
            psfs.push(Psf::new(kernel)?);
        }
        PsfGrid::new(rows, cols, points, psfs)
    }
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| CoreError::Format(format!("bad {what}: {s}")))
}

/// Equidistant grid points spanning the image: `round(k * (dim - 1) / (G - 1))`.
pub fn grid_points(rows: usize, cols: usize, image_h: usize, image_w: usize) -> Result<Vec<(usize, usize)>> {
    if rows == 0 || cols == 0 {
        return Err(CoreError::param("grid must be at least 1x1"));
    }
    if rows > image_h || cols > image_w {
        return Err(CoreError::param(format!(
            "grid {rows}x{cols} larger than image {image_h}x{image_w}"
        )));
    }
    let axis = |count: usize, dim: usize| -> Vec<usize> {
        if count == 1 {
            vec![(dim - 1) / 2]
        } else {
            (0..count)
                .map(|k| ((k as f64) * (dim as f64 - 1.0) / (count as f64 - 1.0)).round() as usize)
                .collect()
        }
    };
    let rs = axis(rows, image_h);
    let cs = axis(cols, image_w);
    let mut points = Vec::with_capacity(rows * cols);
    for &r in &rs {
        for &c in &cs {
            points.push((r, c));
        }
    }
    Ok(points)
}

/// Builds a grid of Gaussian PSFs whose FWHM grows linearly with the
/// normalized radial distance from the image center, from `fwhm_center` at the
/// middle to `fwhm_corner` at the farthest corner grid point.
pub fn shift_variant_psf_grid(
    rows: usize,
    cols: usize,
    image_h: usize,
    image_w: usize,
    support: usize,
    fwhm_center: (f64, f64),
    fwhm_corner: (f64, f64),
) -> Result<PsfGrid> {
    if rows < 2 || cols < 2 {
        return Err(CoreError::param("shift-variant grid needs at least 2x2 points"));
    }
    let points = grid_points(rows, cols, image_h, image_w)?;
    let cy = (image_h as f64 - 1.0) / 2.0;
    let cx = (image_w as f64 - 1.0) / 2.0;
    let mut dmax: f64 = 0.0;
    for &(r, c) in &points {
        let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
        dmax = dmax.max(d);
    }
    let mut psfs = Vec::with_capacity(points.len());
    for &(r, c) in &points {
        let d = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
        let t = if dmax > 0.0 { d / dmax } else { 0.0 };
        let fy = fwhm_center.0 + t * (fwhm_corner.0 - fwhm_center.0);
        let fx = fwhm_center.1 + t * (fwhm_corner.1 - fwhm_center.1);
        psfs.push(gaussian_psf(support, fy, fx)?);
    }
    PsfGrid::new(rows, cols, points, psfs)
}
