//! Reconstruction objectives with analytic gradients w.r.t. the rendered
//! image: mean SSIM, uncertainty-weighted mean squared error, and their
//! weighted combination.
//!
//! SSIM uses the standard 11x11 Gaussian window (sigma 1.5). Windows are
//! clipped at image borders and the Gaussian weights renormalized, so border
//! pixels see no padding artifacts. Local statistics are computed with
//! separable passes; the gradient applies the transpose of the same passes.

use crate::error::{Error, Result};
use crate::types::ImageBuffer;
use crate::uncertainty::UncertaintyMap;

#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    /// Weight of the SSIM term.
    pub alpha: f64,
    /// Side length of the SSIM window (odd).
    pub ssim_window: usize,
    /// Gaussian sigma of the SSIM window.
    pub ssim_sigma: f64,
    /// Dynamic range L of the pixel values.
    pub dynamic_range: f64,
    /// Add alpha * SSIM instead of alpha * (1 - SSIM) / 2. Reproduces the
    /// objective with the SSIM term entering with a positive sign, for
    /// investigation only: it rewards dissimilarity when minimized.
    pub literal_ssim: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 0.2,
            ssim_window: 11,
            ssim_sigma: 1.5,
            dynamic_range: 1.0,
            literal_ssim: false,
        }
    }
}

/// Scalar objective plus its gradient w.r.t. the rendered image.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad_rendered: ImageBuffer,
}

fn check_same_shape(a: &ImageBuffer, b: &ImageBuffer, context: &'static str) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::DimensionMismatch {
            context,
            expected_w: a.width,
            expected_h: a.height,
            expected_c: a.channels,
            got_w: b.width,
            got_h: b.height,
            got_c: b.channels,
        });
    }
    Ok(())
}

/// Separable Gaussian window with border renormalization. The same weights
/// serve the forward statistics and (after pointwise division by the
/// normalizers) their transpose.
struct Window {
    radius: usize,
    taps: Vec<f64>,
    norm_x: Vec<f64>,
    norm_y: Vec<f64>,
}

impl Window {
    fn new(window: usize, sigma: f64, width: usize, height: usize) -> Self {
        let radius = window / 2;
        let mut taps: Vec<f64> = (0..window)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        for t in &mut taps {
            *t /= sum;
        }
        let norm_axis = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|x| {
                    let mut s = 0.0;
                    for (i, t) in taps.iter().enumerate() {
                        let p = x as i64 + i as i64 - radius as i64;
                        if p >= 0 && (p as usize) < n {
                            s += t;
                        }
                    }
                    s
                })
                .collect()
        };
        let norm_x = norm_axis(width);
        let norm_y = norm_axis(height);
        Self {
            radius,
            taps,
            norm_x,
            norm_y,
        }
    }

    /// Raw separable correlation without renormalization.
    fn blur_raw(&self, src: &[f64], width: usize, height: usize, channels: usize) -> Vec<f64> {
        let r = self.radius as i64;
        let row = width * channels;
        let mut mid = vec![0.0; src.len()];
        for y in 0..height {
            let src_row = &src[y * row..(y + 1) * row];
            let dst_row = &mut mid[y * row..(y + 1) * row];
            for x in 0..width {
                for (i, t) in self.taps.iter().enumerate() {
                    let p = x as i64 + i as i64 - r;
                    if p >= 0 && (p as usize) < width {
                        let s = p as usize * channels;
                        let d = x * channels;
                        for c in 0..channels {
                            dst_row[d + c] += t * src_row[s + c];
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; src.len()];
        for y in 0..height {
            let dst_row = &mut out[y * row..(y + 1) * row];
            for (i, t) in self.taps.iter().enumerate() {
                let p = y as i64 + i as i64 - r;
                if p >= 0 && (p as usize) < height {
                    let src_row = &mid[p as usize * row..(p as usize + 1) * row];
                    for (d, s) in dst_row.iter_mut().zip(src_row) {
                        *d += t * s;
                    }
                }
            }
        }
        out
    }

    /// Local weighted mean with border renormalization.
    fn blur(&self, src: &[f64], width: usize, height: usize, channels: usize) -> Vec<f64> {
        let mut out = self.blur_raw(src, width, height, channels);
        self.divide_normalizers(&mut out, width, height, channels);
        out
    }

    /// Transpose of [`Window::blur`]: divide by the source pixel's
    /// normalizer, then apply the raw symmetric correlation.
    fn blur_transpose(
        &self,
        src: &[f64],
        width: usize,
        height: usize,
        channels: usize,
    ) -> Vec<f64> {
        let mut scaled = src.to_vec();
        self.divide_normalizers(&mut scaled, width, height, channels);
        self.blur_raw(&scaled, width, height, channels)
    }

    fn divide_normalizers(&self, data: &mut [f64], width: usize, height: usize, channels: usize) {
        for y in 0..height {
            let ny = self.norm_y[y];
            for x in 0..width {
                let n = self.norm_x[x] * ny;
                let base = (y * width + x) * channels;
                for c in 0..channels {
                    data[base + c] /= n;
                }
            }
        }
    }
}

/// Mean SSIM between `a` and `b` plus the gradient of the mean w.r.t. `a`.
/// Per-channel SSIM maps are averaged over pixels and channels.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, cfg: &LossConfig) -> Result<(f64, ImageBuffer)> {
    check_same_shape(a, b, "ssim")?;
    let (w, h, c) = (a.width, a.height, a.channels);
    let n = (w * h * c) as f64;
    let c1 = (0.01 * cfg.dynamic_range).powi(2);
    let c2 = (0.03 * cfg.dynamic_range).powi(2);
    let win = Window::new(cfg.ssim_window, cfg.ssim_sigma, w, h);

    let aa: Vec<f64> = a.data.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.data.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();

    let mu_a = win.blur(&a.data, w, h, c);
    let mu_b = win.blur(&b.data, w, h, c);
    let p_aa = win.blur(&aa, w, h, c);
    let p_bb = win.blur(&bb, w, h, c);
    let p_ab = win.blur(&ab, w, h, c);

    // Per-element SSIM and the adjoints of the five local statistics.
    let mut total = 0.0;
    let mut g_mu = vec![0.0; a.data.len()];
    let mut g_paa = vec![0.0; a.data.len()];
    let mut g_pab = vec![0.0; a.data.len()];
    let u = 1.0 / n;
    for i in 0..a.data.len() {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let saa = p_aa[i] - ma * ma;
        let sbb = p_bb[i] - mb * mb;
        let sab = p_ab[i] - ma * mb;
        let a1 = 2.0 * ma * mb + c1;
        let a2 = 2.0 * sab + c2;
        let b1 = ma * ma + mb * mb + c1;
        let b2 = saa + sbb + c2;
        let denom = b1 * b2;
        let s = a1 * a2 / denom;
        total += s;

        let da1 = u * a2 / denom;
        let da2 = u * a1 / denom;
        let db1 = -u * s / b1;
        let db2 = -u * s / b2;
        // mu_a enters A1, B1 directly and A2, B2 through the centered moments.
        g_mu[i] = 2.0 * mb * da1 + 2.0 * ma * db1 - 2.0 * mb * da2 - 2.0 * ma * db2;
        g_paa[i] = db2;
        g_pab[i] = 2.0 * da2;
    }

    let t_mu = win.blur_transpose(&g_mu, w, h, c);
    let t_paa = win.blur_transpose(&g_paa, w, h, c);
    let t_pab = win.blur_transpose(&g_pab, w, h, c);
    let grad: Vec<f64> = (0..a.data.len())
        .map(|i| t_mu[i] + 2.0 * a.data[i] * t_paa[i] + b.data[i] * t_pab[i])
        .collect();

    Ok((total / n, ImageBuffer::from_vec(w, h, c, grad)?))
}

/// Uncertainty-weighted mean squared error: mean over pixels and channels of
/// ((1 - U) * (rendered - target))^2, with U broadcast across channels.
/// Pixels with U = 1 contribute nothing and receive zero gradient.
pub fn uw_l2(
    rendered: &ImageBuffer,
    target: &ImageBuffer,
    u: &UncertaintyMap,
) -> Result<(f64, ImageBuffer)> {
    check_same_shape(rendered, target, "uw_l2")?;
    if u.map.width != rendered.width || u.map.height != rendered.height || u.map.channels != 1 {
        return Err(Error::DimensionMismatch {
            context: "uw_l2 uncertainty map",
            expected_w: rendered.width,
            expected_h: rendered.height,
            expected_c: 1,
            got_w: u.map.width,
            got_h: u.map.height,
            got_c: u.map.channels,
        });
    }
    let (w, h, c) = (rendered.width, rendered.height, rendered.channels);
    let n = (w * h * c) as f64;
    let mut value = 0.0;
    let mut grad = vec![0.0; rendered.data.len()];
    for y in 0..h {
        for x in 0..w {
            let weight = 1.0 - u.map.data[y * w + x];
            let w2 = weight * weight;
            let base = (y * w + x) * c;
            for ch in 0..c {
                let r = rendered.data[base + ch] - target.data[base + ch];
                value += w2 * r * r;
                grad[base + ch] = 2.0 * w2 * r / n;
                debug_assert!(w2 != 0.0 || grad[base + ch] == 0.0);
            }
        }
    }
    Ok((value / n, ImageBuffer::from_vec(w, h, c, grad)?))
}

/// Full refinement objective: uw_l2 plus alpha times the SSIM dissimilarity
/// (1 - SSIM) / 2, or alpha times raw SSIM in literal mode.
pub fn refine_loss(
    rendered: &ImageBuffer,
    pseudo_fst: &ImageBuffer,
    u: &UncertaintyMap,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    let (l2, l2_grad) = uw_l2(rendered, pseudo_fst, u)?;
    let (ssim_value, ssim_grad) = ssim(rendered, pseudo_fst, cfg)?;
    let (value, ssim_grad_scale) = if cfg.literal_ssim {
        (l2 + cfg.alpha * ssim_value, cfg.alpha)
    } else {
        (
            l2 + cfg.alpha * (1.0 - ssim_value) / 2.0,
            -0.5 * cfg.alpha,
        )
    };
    let grad: Vec<f64> = l2_grad
        .data
        .iter()
        .zip(&ssim_grad.data)
        .map(|(g2, gs)| g2 + ssim_grad_scale * gs)
        .collect();
    Ok(LossOutput {
        value,
        grad_rendered: ImageBuffer::from_vec(rendered.width, rendered.height, rendered.channels, grad)?,
    })
}
