//! Image quality metrics: SNR in dB and the structural similarity index.

use crate::error::{CoreError, Result};
use crate::image::Image;

/// Cap reported when the estimate equals the reference exactly.
pub const SNR_CAP_DB: f64 = 300.0;

/// One scored restoration, a row of the metrics table.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub method: String,
    pub lambda: f64,
    pub snr_db: f64,
    pub ssim: f64,
}

impl QualityReport {
    pub fn csv_header() -> &'static str {
        "method,lambda,snr_db,ssim"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.method, self.lambda, self.snr_db, self.ssim)
    }
}

/// Signal-to-noise ratio `10 log10(||ref||^2 / ||ref - est||^2)` in dB,
/// capped at [`SNR_CAP_DB`] for an exact match.
pub fn snr_db(reference: &Image, estimate: &Image) -> Result<f64> {
    if !reference.same_shape(estimate) {
        return Err(CoreError::ShapeMismatch {
            what: "snr",
            ah: reference.height(),
            aw: reference.width(),
            bh: estimate.height(),
            bw: estimate.width(),
        });
    }
    let signal = reference.norm_sq();
    if signal == 0.0 {
        return Err(CoreError::param("snr reference is identically zero"));
    }
    let err = reference.sub(estimate).norm_sq();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

/// Gaussian window, truncated and renormalized; side `min(11, h, w)` so small
/// images fall back to a single whole-image window.
fn gaussian_window(side: usize, sigma: f64) -> Vec<f64> {
    let c = (side as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..side * side)
        .map(|i| {
            let r = (i / side) as f64 - c;
            let col = (i % side) as f64 - c;
            (-(r * r + col * col) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean structural similarity with the standard 11x11 sigma=1.5 Gaussian
/// window and constants K1=0.01, K2=0.03 scaled by the dynamic range.
pub fn ssim(reference: &Image, estimate: &Image, dynamic_range: f64) -> Result<f64> {
    if !reference.same_shape(estimate) {
        return Err(CoreError::ShapeMismatch {
            what: "ssim",
            ah: reference.height(),
            aw: reference.width(),
            bh: estimate.height(),
            bw: estimate.width(),
        });
    }
    if dynamic_range <= 0.0 {
        return Err(CoreError::param("ssim dynamic range must be positive"));
    }
    let (h, w) = (reference.height(), reference.width());
    let side_r = h.min(11);
    let side_c = w.min(11);
    let side = side_r.min(side_c);
    let window = gaussian_window(side, 1.5);
    let c1 = (0.01 * dynamic_range).powi(2);
    let c2 = (0.03 * dynamic_range).powi(2);

    let mut total = 0.0;
    let mut count = 0usize;
    for top in 0..=(h - side) {
        for left in 0..=(w - side) {
            let mut mu_x = 0.0;
            let mut mu_y = 0.0;
            let mut xx = 0.0;
            let mut yy = 0.0;
            let mut xy = 0.0;
            for r in 0..side {
                for c in 0..side {
                    let wv = window[r * side + c];
                    let a = reference.get(top + r, left + c);
                    let b = estimate.get(top + r, left + c);
                    mu_x += wv * a;
                    mu_y += wv * b;
                    xx += wv * a * a;
                    yy += wv * b * b;
                    xy += wv * a * b;
                }
            }
            let var_x = xx - mu_x * mu_x;
            let var_y = yy - mu_y * mu_y;
            let cov = xy - mu_x * mu_y;
            let s = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2))
                / ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
            total += s;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = CounterRng::new(seed);
        Image::from_fn(h, w, |_, _| rng.next_f64() * 6000.0)
    }

    #[test]
    fn snr_of_exact_match_is_capped() {
        let img = random_image(16, 16, 1);
        assert_eq!(snr_db(&img, &img).unwrap(), SNR_CAP_DB);
    }

    #[test]
    fn snr_of_zero_estimate_is_zero_db() {
        let img = random_image(16, 16, 2);
        let zero = Image::zeros(16, 16);
        assert!(snr_db(&img, &zero).unwrap().abs() < 1e-12);
    }

    #[test]
    fn snr_constructed_ratio_is_ten_db() {
        let reference = random_image(32, 32, 3);
        let noise = random_image(32, 32, 4);
        // scale noise so its energy is exactly a tenth of the signal energy
        let scale = (reference.norm_sq() / (10.0 * noise.norm_sq())).sqrt();
        let mut est = reference.clone();
        est.axpy(scale, &noise);
        let got = snr_db(&reference, &est).unwrap();
        assert!((got - 10.0).abs() < 1e-9, "snr {got}");
    }

    #[test]
    fn snr_scale_covariance() {
        let reference = random_image(16, 16, 5);
        let est = random_image(16, 16, 6);
        let a = snr_db(&reference, &est).unwrap();
        let mut ref2 = reference.clone();
        ref2.scale_in_place(7.5);
        let mut est2 = est.clone();
        est2.scale_in_place(7.5);
        let b = snr_db(&ref2, &est2).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn snr_rejects_zero_reference() {
        assert!(snr_db(&Image::zeros(4, 4), &Image::zeros(4, 4)).is_err());
    }

    #[test]
    fn ssim_identity_is_one() {
        let img = random_image(24, 24, 7);
        assert!((ssim(&img, &img, 6000.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric_in_arguments() {
        let a = random_image(24, 24, 8);
        let b = random_image(24, 24, 9);
        let ab = ssim(&a, &b, 6000.0).unwrap();
        let ba = ssim(&b, &a, 6000.0).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn affine_distortion_scores_below_one() {
        let a = random_image(24, 24, 10);
        let mut b = a.clone();
        b.scale_in_place(1.3);
        for v in b.as_mut_slice() {
            *v += 200.0;
        }
        let s = ssim(&a, &b, 6000.0).unwrap();
        assert!(s < 1.0);
    }

    #[test]
    fn constant_images_match_luminance_closed_form() {
        // 8x8 constants: single whole-image window, zero variances, so SSIM is
        // the luminance factor (2 c (c+d) + C1) / (c^2 + (c+d)^2 + C1) exactly.
        let c = 1000.0;
        let d = 300.0;
        let range = 6000.0;
        let a = Image::constant(8, 8, c);
        let b = Image::constant(8, 8, c + d);
        let c1 = (0.01 * range) * (0.01 * range);
        let want = (2.0 * c * (c + d) + c1) / (c * c + (c + d) * (c + d) + c1);
        let got = ssim(&a, &b, range).unwrap();
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }
}
