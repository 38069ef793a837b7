//! Deblurring objectives with analytic gradients.
//!
//! The local cost on a block is
//! `f(x) = 1/2 ||y - H x||^2_w + lambda * sum_l huber_delta(|Dx(l)|) + 1/2 ||x - u||^2_alpha`,
//! where `D` is the circular forward finite-difference operator, the Huber
//! penalty acts on the per-pixel 2-norm of the two difference channels
//! (isotropic edge-preserving smoothing), and the last term is the proximal
//! anchor of the Douglas-Rachford iteration. Nonnegativity is not part of the
//! smooth objective; the solver enforces it as a bound constraint.

use crate::blur::BlurOp;
use crate::error::{CoreError, Result};
use crate::image::Image;

/// Circular forward differences: channel 0 is horizontal `x(r, c+1) - x(r, c)`,
/// channel 1 is vertical `x(r+1, c) - x(r, c)`, both wrapping at the border.
pub fn finite_diff(x: &Image) -> (Image, Image) {
    let (h, w) = (x.height(), x.width());
    let mut dh = Image::zeros(h, w);
    let mut dv = Image::zeros(h, w);
    for r in 0..h {
        for c in 0..w {
            let right = x.get(r, (c + 1) % w);
            let down = x.get((r + 1) % h, c);
            let v = x.get(r, c);
            dh.set(r, c, right - v);
            dv.set(r, c, down - v);
        }
    }
    (dh, dv)
}

/// Adjoint of [`finite_diff`]: negative circular divergence.
pub fn finite_diff_adjoint(dh: &Image, dv: &Image) -> Image {
    let (h, w) = (dh.height(), dh.width());
    debug_assert!(dh.same_shape(dv));
    Image::from_fn(h, w, |r, c| {
        let left = dh.get(r, (c + w - 1) % w);
        let up = dv.get((r + h - 1) % h, c);
        left - dh.get(r, c) + up - dv.get(r, c)
    })
}

/// Huber penalty of a gradient field: `sum_l rho_delta(|g(l)|)` with
/// `rho_delta(t) = t^2/2` for `t <= delta` and `delta (t - delta/2)` beyond.
pub fn huber_value(dh: &Image, dv: &Image, delta: f64) -> f64 {
    debug_assert!(delta > 0.0);
    let mut total = 0.0;
    for (a, b) in dh.as_slice().iter().zip(dv.as_slice()) {
        let t = (a * a + b * b).sqrt();
        total += if t <= delta {
            0.5 * t * t
        } else {
            delta * (t - 0.5 * delta)
        };
    }
    total
}

/// Huber influence field `psi(g) = g * min(1, delta / |g|)`, the gradient of
/// the per-pixel penalty; 1-Lipschitz in each pixel.
pub fn huber_influence(dh: &Image, dv: &Image, delta: f64) -> (Image, Image) {
    let mut ih = dh.clone();
    let mut iv = dv.clone();
    for (a, b) in ih.as_mut_slice().iter_mut().zip(iv.as_mut_slice()) {
        let t = (*a * *a + *b * *b).sqrt();
        if t > delta {
            let s = delta / t;
            *a *= s;
            *b *= s;
        }
    }
    (ih, iv)
}

fn check_shapes(what: &'static str, a: &Image, bh: usize, bw: usize) -> Result<()> {
    if a.height() != bh || a.width() != bw {
        return Err(CoreError::ShapeMismatch {
            what,
            ah: a.height(),
            aw: a.width(),
            bh,
            bw,
        });
    }
    Ok(())
}

fn check_finite(what: &'static str, img: &Image) -> Result<()> {
    if let Some(idx) = img.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(CoreError::NonFinite {
            what,
            row: idx / img.width(),
            col: idx % img.width(),
        });
    }
    Ok(())
}

/// The proximal-shifted local cost owned by one worker.
pub struct LocalObjective {
    /// Observed block.
    y: Image,
    op: super::blur::LocalBlurOperator,
    /// Per-pixel data weights, `1/sigma^2` on measured pixels, 0 elsewhere.
    data_weight: Image,
    lambda: f64,
    delta: f64,
    /// Per-pixel proximal weights `alpha = gamma * omega`; zero entries make
    /// the anchor term vanish at those pixels.
    alpha: Image,
    /// Proximal anchor `u`.
    anchor: Image,
}

impl LocalObjective {
    pub fn new(
        y: Image,
        op: super::blur::LocalBlurOperator,
        data_weight: Image,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        let (mh, mw) = op.observed_size();
        let (nh, nw) = op.estimate_size();
        check_shapes("local objective observation", &y, mh, mw)?;
        check_shapes("local objective data weights", &data_weight, mh, mw)?;
        if data_weight.as_slice().iter().any(|&v| v < 0.0) {
            return Err(CoreError::param("data weights must be nonnegative"));
        }
        if lambda < 0.0 {
            return Err(CoreError::param("lambda must be nonnegative"));
        }
        if delta <= 0.0 {
            return Err(CoreError::param("huber delta must be positive"));
        }
        Ok(LocalObjective {
            y,
            op,
            data_weight,
            lambda,
            delta,
            alpha: Image::zeros(nh, nw),
            anchor: Image::zeros(nh, nw),
        })
    }

    pub fn estimate_size(&self) -> (usize, usize) {
        self.op.estimate_size()
    }

    /// Installs the proximal term `1/2 ||x - u||^2_alpha`.
    pub fn set_proximal(&mut self, alpha: Image, anchor: Image) -> Result<()> {
        let (nh, nw) = self.op.estimate_size();
        check_shapes("proximal weights", &alpha, nh, nw)?;
        check_shapes("proximal anchor", &anchor, nh, nw)?;
        if alpha.as_slice().iter().any(|&v| v < 0.0) {
            return Err(CoreError::param("proximal weights must be nonnegative"));
        }
        self.alpha = alpha;
        self.anchor = anchor;
        Ok(())
    }

    pub fn set_anchor(&mut self, anchor: Image) -> Result<()> {
        let (nh, nw) = self.op.estimate_size();
        check_shapes("proximal anchor", &anchor, nh, nw)?;
        self.anchor = anchor;
        Ok(())
    }

    /// Data + regularizer value only (no proximal term); the quantity traced
    /// per iteration by the consensus driver.
    pub fn data_reg_value(&self, x: &Image) -> Result<f64> {
        let residual = self.op.apply(x)?.sub(&self.y);
        let mut value = 0.5 * crate::image::weighted_norm_sq(&residual, &self.data_weight)?;
        if self.lambda > 0.0 {
            let (dh, dv) = finite_diff(x);
            value += self.lambda * huber_value(&dh, &dv, self.delta);
        }
        Ok(value)
    }

    /// Full objective value and gradient at `x`.
    pub fn eval(&self, x: &Image) -> Result<(f64, Image)> {
        let (nh, nw) = self.op.estimate_size();
        check_shapes("objective point", x, nh, nw)?;
        // data term
        let mut residual = self.op.apply(x)?.sub(&self.y);
        let mut value = 0.5 * crate::image::weighted_norm_sq(&residual, &self.data_weight)?;
        for (r, w) in residual.as_mut_slice().iter_mut().zip(self.data_weight.as_slice()) {
            *r *= w;
        }
        let mut grad = self.op.apply_adjoint(&residual)?;
        // regularizer
        if self.lambda > 0.0 {
            let (dh, dv) = finite_diff(x);
            value += self.lambda * huber_value(&dh, &dv, self.delta);
            let (ih, iv) = huber_influence(&dh, &dv, self.delta);
            grad.axpy(self.lambda, &finite_diff_adjoint(&ih, &iv));
        }
        // proximal anchor
        for idx in 0..x.len() {
            let a = self.alpha.as_slice()[idx];
            if a != 0.0 {
                let d = x.as_slice()[idx] - self.anchor.as_slice()[idx];
                value += 0.5 * a * d * d;
                grad.as_mut_slice()[idx] += a * d;
            }
        }
        if !value.is_finite() {
            return Err(CoreError::NonFinite {
                what: "objective value",
                row: 0,
                col: 0,
            });
        }
        check_finite("objective gradient", &grad)?;
        Ok((value, grad))
    }
}

/// The centralized whole-image objective over the global estimate domain.
pub struct GlobalObjective<'a> {
    y: Image,
    op: &'a dyn BlurOp,
    data_weight: Image,
    lambda: f64,
    delta: f64,
}

impl<'a> GlobalObjective<'a> {
    pub fn new(
        y: Image,
        op: &'a dyn BlurOp,
        data_weight: Image,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        let (mh, mw) = op.observed_size();
        check_shapes("global objective observation", &y, mh, mw)?;
        check_shapes("global objective data weights", &data_weight, mh, mw)?;
        if lambda < 0.0 || delta <= 0.0 {
            return Err(CoreError::param("lambda >= 0 and delta > 0 required"));
        }
        Ok(GlobalObjective {
            y,
            op,
            data_weight,
            lambda,
            delta,
        })
    }

    /// Convenience for the common constant-variance case.
    pub fn with_constant_weight(
        y: Image,
        op: &'a dyn BlurOp,
        inv_variance: f64,
        lambda: f64,
        delta: f64,
    ) -> Result<Self> {
        let w = Image::constant(y.height(), y.width(), inv_variance);
        GlobalObjective::new(y, op, w, lambda, delta)
    }

    pub fn eval(&self, x: &Image) -> Result<(f64, Image)> {
        let (nh, nw) = self.op.estimate_size();
        check_shapes("global objective point", x, nh, nw)?;
        let mut residual = self.op.apply(x)?.sub(&self.y);
        let mut value = 0.5 * crate::image::weighted_norm_sq(&residual, &self.data_weight)?;
        for (r, w) in residual.as_mut_slice().iter_mut().zip(self.data_weight.as_slice()) {
            *r *= w;
        }
        let mut grad = self.op.apply_adjoint(&residual)?;
        if self.lambda > 0.0 {
            let (dh, dv) = finite_diff(x);
            value += self.lambda * huber_value(&dh, &dv, self.delta);
            let (ih, iv) = huber_influence(&dh, &dv, self.delta);
            grad.axpy(self.lambda, &finite_diff_adjoint(&ih, &iv));
        }
        if !value.is_finite() {
            return Err(CoreError::NonFinite {
                what: "global objective value",
                row: 0,
                col: 0,
            });
        }
        check_finite("global objective gradient", &grad)?;
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blur::LocalBlurOperator;
    use crate::psf::gaussian_psf;
    use crate::rng::CounterRng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = CounterRng::new(seed);
        Image::from_fn(h, w, |_, _| rng.next_f64() * 2.0 - 1.0)
    }

    #[test]
    fn finite_diff_constant_is_zero() {
        let x = Image::constant(5, 7, 3.0);
        let (dh, dv) = finite_diff(&x);
        assert_eq!(dh.norm_sq(), 0.0);
        assert_eq!(dv.norm_sq(), 0.0);
    }

    #[test]
    fn finite_diff_wraps_circularly() {
        let x = Image::from_vec(1, 3, vec![1.0, 2.0, 4.0]).unwrap();
        let (dh, _) = finite_diff(&x);
        assert_eq!(dh.as_slice(), &[1.0, 2.0, -3.0]);
    }

    #[test]
    fn finite_diff_adjoint_identity() {
        for seed in 0..10 {
            let x = random_image(6, 5, seed);
            let gh = random_image(6, 5, 100 + seed);
            let gv = random_image(6, 5, 200 + seed);
            let (dh, dv) = finite_diff(&x);
            let lhs = dh.dot(&gh) + dv.dot(&gv);
            let rhs = x.dot(&finite_diff_adjoint(&gh, &gv));
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn huber_branch_values() {
        let zero = Image::zeros(1, 1);
        assert_eq!(huber_value(&zero, &zero, 100.0), 0.0);
        // |g| = delta: both branches agree at delta^2/2
        let dh = Image::constant(1, 1, 3.0);
        let dv = Image::constant(1, 1, 4.0);
        assert!((huber_value(&dh, &dv, 5.0) - 12.5).abs() < 1e-12);
        // |g| = 2*delta with delta = 100: 100 * (200 - 50) = 15000
        let dh = Image::constant(1, 1, 200.0);
        let dv = Image::zeros(1, 1);
        assert!((huber_value(&dh, &dv, 100.0) - 15000.0).abs() < 1e-9);
    }

    #[test]
    fn huber_quadratic_for_large_delta() {
        let dh = random_image(4, 4, 3);
        let dv = random_image(4, 4, 4);
        let quadratic = 0.5 * (dh.norm_sq() + dv.norm_sq());
        // every |g| < delta: exact equality of the quadratic branch
        assert_eq!(huber_value(&dh, &dv, 1e9), quadratic);
    }

    #[test]
    fn huber_influence_is_lipschitz() {
        let mut rng = CounterRng::new(17);
        for _ in 0..200 {
            let g1 = (rng.next_f64() * 400.0 - 200.0, rng.next_f64() * 400.0 - 200.0);
            let g2 = (rng.next_f64() * 400.0 - 200.0, rng.next_f64() * 400.0 - 200.0);
            let delta = 50.0;
            let f = |g: (f64, f64)| {
                let t = (g.0 * g.0 + g.1 * g.1).sqrt();
                if t > delta {
                    (g.0 * delta / t, g.1 * delta / t)
                } else {
                    g
                }
            };
            let p1 = f(g1);
            let p2 = f(g2);
            let dp = ((p1.0 - p2.0).powi(2) + (p1.1 - p2.1).powi(2)).sqrt();
            let dg = ((g1.0 - g2.0).powi(2) + (g1.1 - g2.1).powi(2)).sqrt();
            assert!(dp <= dg + 1e-12);
        }
    }

    fn toy_objective(n: usize, lambda: f64, seed: u64) -> (LocalObjective, Image) {
        let psf = gaussian_psf(5, 2.0, 2.5).unwrap();
        let op = LocalBlurOperator::new(&psf, n, n).unwrap();
        let (mh, mw) = op.observed_size();
        let truth = random_image(n, n, seed);
        let y = op.apply(&truth).unwrap();
        let w = Image::constant(mh, mw, 1.0 / 400.0);
        let obj = LocalObjective::new(y, op, w, lambda, 100.0).unwrap();
        (obj, truth)
    }

    #[test]
    fn exact_preimage_has_zero_value_and_gradient() {
        let (obj, truth) = toy_objective(12, 0.0, 5);
        let (value, grad) = obj.eval(&truth).unwrap();
        assert!(value.abs() < 1e-18);
        assert!(grad.norm_sq().sqrt() < 1e-12);
    }

    #[test]
    fn anchor_term_only() {
        let psf = crate::psf::Psf::delta(3).unwrap();
        let op = LocalBlurOperator::new(&psf, 8, 8).unwrap();
        let y = Image::zeros(6, 6);
        let w = Image::zeros(6, 6); // no data term
        let mut obj = LocalObjective::new(y, op, w, 0.0, 100.0).unwrap();
        let u = random_image(8, 8, 31);
        let mut alpha = Image::constant(8, 8, 0.0);
        alpha.set(3, 4, 0.7);
        obj.set_proximal(alpha, u.clone()).unwrap();
        let (v0, _) = obj.eval(&u).unwrap();
        assert_eq!(v0, 0.0);
        let mut x = u.clone();
        x.set(3, 4, u.get(3, 4) + 1.0);
        let (v1, g1) = obj.eval(&x).unwrap();
        assert!((v1 - 0.35).abs() < 1e-12);
        assert!((g1.get(3, 4) - 0.7).abs() < 1e-12);
        // a unit bump at a zero-alpha pixel costs nothing
        let mut x = u.clone();
        x.set(0, 0, u.get(0, 0) + 1.0);
        let (v2, _) = obj.eval(&x).unwrap();
        assert_eq!(v2, 0.0);
    }

    /// Central finite-difference check of the analytic gradient.
    fn finite_diff_check(eval: impl Fn(&Image) -> (f64, Image), x0: &Image) -> f64 {
        let (_, grad) = eval(x0);
        let scale = x0.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let h = 1e-5 * scale;
        let mut fd = Image::zeros(x0.height(), x0.width());
        let mut xp = x0.clone();
        for idx in 0..x0.len() {
            let orig = xp.as_slice()[idx];
            xp.as_mut_slice()[idx] = orig + h;
            let (fp, _) = eval(&xp);
            xp.as_mut_slice()[idx] = orig - h;
            let (fm, _) = eval(&xp);
            xp.as_mut_slice()[idx] = orig;
            fd.as_mut_slice()[idx] = (fp - fm) / (2.0 * h);
        }
        let diff = grad.sub(&fd);
        (diff.norm_sq() / grad.norm_sq().max(1e-30)).sqrt()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (mut obj, _) = toy_objective(12, 0.003, 7);
        let u = random_image(12, 12, 8);
        let alpha = Image::from_fn(12, 12, |r, c| if (r + c) % 3 == 0 { 0.0 } else { 0.001 });
        obj.set_proximal(alpha, u).unwrap();
        let x0 = random_image(12, 12, 9);
        let err = finite_diff_check(|x| obj.eval(x).unwrap(), &x0);
        assert!(err <= 1e-5, "gradient error {err}");
    }

    #[test]
    fn convexity_along_random_segments() {
        let (mut obj, _) = toy_objective(10, 0.01, 21);
        let alpha = Image::constant(10, 10, 0.002);
        obj.set_proximal(alpha, random_image(10, 10, 22)).unwrap();
        for seed in 0..20 {
            let a = random_image(10, 10, 300 + seed);
            let b = random_image(10, 10, 400 + seed);
            let mut mid = a.clone();
            mid.axpy(1.0, &b);
            mid.scale_in_place(0.5);
            let (fa, _) = obj.eval(&a).unwrap();
            let (fb, _) = obj.eval(&b).unwrap();
            let (fm, _) = obj.eval(&mid).unwrap();
            let scale = fa.abs().max(fb.abs()).max(1.0);
            assert!(fm <= 0.5 * (fa + fb) + 1e-9 * scale);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (obj, _) = toy_objective(12, 0.0, 5);
        assert!(obj.eval(&Image::zeros(5, 5)).is_err());
    }
}
