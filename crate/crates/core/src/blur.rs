//! FFT-based blur operators.
//!
//! `LocalBlurOperator` is the per-block operator `H_i`: circular convolution
//! on the block's estimate grid followed by a chop to the central valid
//! region, so every output pixel is a fully supported convolution sum with no
//! wrap-around contamination. `ShiftVariantOperator` composes weighted local
//! operators into the smooth shift-variant blur used by the observation
//! simulator and the centralized solver.

use rustfft::num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::fft::{to_complex, Fft2};
use crate::image::{accumulate_embed, Image, Region};
use crate::layout::{build_weights, BlockLayout, WeightField};
use crate::psf::Psf;
use crate::rng::CounterRng;

/// Common interface of the shift-invariant and shift-variant blur maps.
pub trait BlurOp: Send + Sync {
    /// (height, width) of the input estimate domain.
    fn estimate_size(&self) -> (usize, usize);
    /// (height, width) of the output observed domain.
    fn observed_size(&self) -> (usize, usize);
    fn apply(&self, x: &Image) -> Result<Image>;
    fn apply_adjoint(&self, r: &Image) -> Result<Image>;
}

/// Embeds the centered kernel into an h x w canvas with the center at (0, 0),
/// wrapping cyclically.
fn embed_kernel(psf: &Psf, h: usize, w: usize) -> Vec<f64> {
    let c = psf.center() as i64;
    let mut out = vec![0.0; h * w];
    for a in 0..psf.size() {
        for b in 0..psf.size() {
            let r = (a as i64 - c).rem_euclid(h as i64) as usize;
            let col = (b as i64 - c).rem_euclid(w as i64) as usize;
            out[r * w + col] += psf.kernel().get(a, b);
        }
    }
    out
}

/// Cyclic convolution of `img` with the centered `psf`, same output size.
pub fn circular_convolve(img: &Image, psf: &Psf) -> Result<Image> {
    if psf.size() > img.height() || psf.size() > img.width() {
        return Err(CoreError::param(format!(
            "psf support {} exceeds image {}x{}",
            psf.size(),
            img.height(),
            img.width()
        )));
    }
    let (h, w) = (img.height(), img.width());
    let fft = Fft2::new(h, w);
    let mut transfer = to_complex(&embed_kernel(psf, h, w));
    fft.forward(&mut transfer);
    let mut buf = to_complex(img.as_slice());
    fft.forward(&mut buf);
    for (v, t) in buf.iter_mut().zip(&transfer) {
        *v *= t;
    }
    fft.inverse(&mut buf);
    Image::from_vec(h, w, buf.iter().map(|v| v.re).collect())
}

/// Valid-region blur on one block: circular convolution on the estimate grid
/// chopped to the central region where the kernel support never leaves the
/// block. Maps `estimate` (n) to `observed = estimate - (psf - 1)` (m).
pub struct LocalBlurOperator {
    psf_size: usize,
    estimate_h: usize,
    estimate_w: usize,
    observed_h: usize,
    observed_w: usize,
    fft: Fft2,
    transfer: Vec<Complex<f64>>,
}

impl LocalBlurOperator {
    pub fn new(psf: &Psf, estimate_h: usize, estimate_w: usize) -> Result<Self> {
        if psf.size() >= estimate_h + 1 || psf.size() >= estimate_w + 1 {
            return Err(CoreError::param(format!(
                "psf support {} too large for estimate block {estimate_h}x{estimate_w}",
                psf.size()
            )));
        }
        let fft = Fft2::new(estimate_h, estimate_w);
        let mut transfer = to_complex(&embed_kernel(psf, estimate_h, estimate_w));
        fft.forward(&mut transfer);
        Ok(LocalBlurOperator {
            psf_size: psf.size(),
            estimate_h,
            estimate_w,
            observed_h: estimate_h - (psf.size() - 1),
            observed_w: estimate_w - (psf.size() - 1),
            fft,
            transfer,
        })
    }

    /// Margin trimmed per side, `(psf - 1) / 2`.
    pub fn margin(&self) -> usize {
        (self.psf_size - 1) / 2
    }

    fn check_estimate(&self, x: &Image) -> Result<()> {
        if x.height() != self.estimate_h || x.width() != self.estimate_w {
            return Err(CoreError::ShapeMismatch {
                what: "local blur input",
                ah: x.height(),
                aw: x.width(),
                bh: self.estimate_h,
                bw: self.estimate_w,
            });
        }
        Ok(())
    }
}

impl BlurOp for LocalBlurOperator {
    fn estimate_size(&self) -> (usize, usize) {
        (self.estimate_h, self.estimate_w)
    }

    fn observed_size(&self) -> (usize, usize) {
        (self.observed_h, self.observed_w)
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        self.check_estimate(x)?;
        let mut buf = to_complex(x.as_slice());
        self.fft.forward(&mut buf);
        for (v, t) in buf.iter_mut().zip(&self.transfer) {
            *v *= t;
        }
        self.fft.inverse(&mut buf);
        let m = self.margin();
        let mut out = Image::zeros(self.observed_h, self.observed_w);
        for r in 0..self.observed_h {
            for c in 0..self.observed_w {
                out.set(r, c, buf[(r + m) * self.estimate_w + (c + m)].re);
            }
        }
        Ok(out)
    }

    fn apply_adjoint(&self, r: &Image) -> Result<Image> {
        if r.height() != self.observed_h || r.width() != self.observed_w {
            return Err(CoreError::ShapeMismatch {
                what: "local blur adjoint input",
                ah: r.height(),
                aw: r.width(),
                bh: self.observed_h,
                bw: self.observed_w,
            });
        }
        let m = self.margin();
        let mut buf = vec![Complex::new(0.0, 0.0); self.estimate_h * self.estimate_w];
        for row in 0..self.observed_h {
            for col in 0..self.observed_w {
                buf[(row + m) * self.estimate_w + (col + m)] = Complex::new(r.get(row, col), 0.0);
            }
        }
        self.fft.forward(&mut buf);
        for (v, t) in buf.iter_mut().zip(&self.transfer) {
            *v *= t.conj();
        }
        self.fft.inverse(&mut buf);
        Image::from_vec(
            self.estimate_h,
            self.estimate_w,
            buf.iter().map(|v| v.re).collect(),
        )
    }
}

struct CompositeBlock {
    /// Input window in estimate coordinates: the block estimate region dilated
    /// by the margin, so the valid output covers the full footprint of the
    /// windowed convolution.
    input_est: Region,
    /// Block weight embedded in the dilated input frame (zero on the ring).
    window: Image,
    /// Paste region in observed coordinates (clipped while accumulating).
    paste_obs: Region,
    op: LocalBlurOperator,
}

/// Smooth shift-variant blur: per-block windowing by the interpolation
/// weights, local valid-region blur, and overlap-added pasting restricted to
/// the sensor. With identical PSFs it reproduces the global valid convolution
/// on every observed pixel.
pub struct ShiftVariantOperator {
    observed_h: usize,
    observed_w: usize,
    estimate_h: usize,
    estimate_w: usize,
    blocks: Vec<CompositeBlock>,
}

impl ShiftVariantOperator {
    /// `psfs[id]` is the PSF of block `id`; all must share the layout's support.
    pub fn new(layout: &BlockLayout, weights: &WeightField, psfs: &[Psf]) -> Result<Self> {
        if psfs.len() != layout.n_blocks() {
            return Err(CoreError::param(format!(
                "expected {} psfs, got {}",
                layout.n_blocks(),
                psfs.len()
            )));
        }
        if psfs.iter().any(|p| p.size() != layout.psf_size()) {
            return Err(CoreError::param("psf support differs from layout psf size"));
        }
        let m = layout.margin();
        let mut blocks = Vec::with_capacity(layout.n_blocks());
        for info in layout.blocks() {
            let input_est = info.estimate.dilate(m);
            let w = weights.block(info.id);
            let mut window = Image::zeros(input_est.height, input_est.width);
            for r in 0..info.estimate.height {
                for c in 0..info.estimate.width {
                    window.set(r + m, c + m, w.get(r, c));
                }
            }
            let op = LocalBlurOperator::new(&psfs[info.id], input_est.height, input_est.width)?;
            let paste_obs = info.observed.dilate(m);
            debug_assert_eq!(op.observed_size(), (paste_obs.height, paste_obs.width));
            blocks.push(CompositeBlock {
                input_est,
                window,
                paste_obs,
                op,
            });
        }
        Ok(ShiftVariantOperator {
            observed_h: layout.observed_h(),
            observed_w: layout.observed_w(),
            estimate_h: layout.estimate_h(),
            estimate_w: layout.estimate_w(),
            blocks,
        })
    }

    /// Composite for a uniform PSF (shift-invariant degeneracy).
    pub fn uniform(layout: &BlockLayout, psf: &Psf) -> Result<Self> {
        let weights = build_weights(layout);
        let psfs = vec![psf.clone(); layout.n_blocks()];
        ShiftVariantOperator::new(layout, &weights, &psfs)
    }
}

impl BlurOp for ShiftVariantOperator {
    fn estimate_size(&self) -> (usize, usize) {
        (self.estimate_h, self.estimate_w)
    }

    fn observed_size(&self) -> (usize, usize) {
        (self.observed_h, self.observed_w)
    }

    fn apply(&self, x: &Image) -> Result<Image> {
        if x.height() != self.estimate_h || x.width() != self.estimate_w {
            return Err(CoreError::ShapeMismatch {
                what: "shift-variant input",
                ah: x.height(),
                aw: x.width(),
                bh: self.estimate_h,
                bw: self.estimate_w,
            });
        }
        let mut out = Image::zeros(self.observed_h, self.observed_w);
        // fixed ascending block order keeps the accumulation deterministic
        for block in &self.blocks {
            let mut xi = x.chop_zero_extended(&block.input_est);
            for (v, w) in xi.as_mut_slice().iter_mut().zip(block.window.as_slice()) {
                *v *= w;
            }
            let yi = block.op.apply(&xi)?;
            accumulate_embed(&mut out, &yi, &block.paste_obs);
        }
        Ok(out)
    }

    fn apply_adjoint(&self, r: &Image) -> Result<Image> {
        if r.height() != self.observed_h || r.width() != self.observed_w {
            return Err(CoreError::ShapeMismatch {
                what: "shift-variant adjoint input",
                ah: r.height(),
                aw: r.width(),
                bh: self.observed_h,
                bw: self.observed_w,
            });
        }
        let mut out = Image::zeros(self.estimate_h, self.estimate_w);
        for block in &self.blocks {
            let ri = r.chop_zero_extended(&block.paste_obs);
            let mut xi = block.op.apply_adjoint(&ri)?;
            for (v, w) in xi.as_mut_slice().iter_mut().zip(block.window.as_slice()) {
                *v *= w;
            }
            accumulate_embed(&mut out, &xi, &block.input_est);
        }
        Ok(out)
    }
}

/// Spectral norm estimate of a linear operator by power iteration on `HᵀH`.
pub fn operator_norm_estimate(op: &dyn BlurOp, iterations: usize, seed: u64) -> Result<f64> {
    let (h, w) = op.estimate_size();
    let mut rng = CounterRng::new(seed);
    let mut v = Image::from_fn(h, w, |_, _| rng.next_f64() - 0.5);
    let mut norm = 0.0;
    for _ in 0..iterations {
        let scale = v.norm_sq().sqrt();
        if scale == 0.0 {
            return Ok(0.0);
        }
        v.scale_in_place(1.0 / scale);
        let hv = op.apply(&v)?;
        norm = hv.norm_sq().sqrt();
        v = op.apply_adjoint(&hv)?;
    }
    Ok(norm)
}
