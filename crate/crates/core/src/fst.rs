//! Fourier style transfer: swap the low-frequency amplitude spectrum of a
//! content image with that of a style image while keeping the content's
//! phase everywhere.
//!
//! The swap window is a square on the centered spectrum, symmetric under
//! frequency negation so the mixed spectrum stays Hermitian and the inverse
//! transform is real. The window never shrinks below the DC bin.

use rustfft::num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};
use crate::types::{DenseMap, ImageBuffer};

/// Low-frequency window ratio. `beta` is the fraction of the spectrum
/// side-length that gets its amplitude replaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FstConfig {
    beta: f64,
}

impl FstConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 0.5) {
            return Err(Error::InvalidBeta { beta });
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Default for FstConfig {
    fn default() -> Self {
        Self { beta: 0.01 }
    }
}

/// Signed frequency of DFT bin `index` for a transform of length `n`.
#[inline]
pub fn signed_frequency(index: usize, n: usize) -> i64 {
    let k = index as i64;
    let n = n as i64;
    if k <= n / 2 {
        k
    } else {
        k - n
    }
}

/// Half-width (in bins) of the swap window for the given image size. The
/// window covers signed frequencies with |f| < half_width on both axes and
/// is never empty: the smallest window is the DC bin alone.
pub fn window_half_width(cfg: &FstConfig, width: usize, height: usize) -> usize {
    let b = (cfg.beta * width.min(height) as f64).floor() as usize;
    b.max(1)
}

/// Whether spectrum bin (kx, ky) falls inside the swap window.
#[inline]
pub fn in_window(kx: usize, ky: usize, width: usize, height: usize, half_width: usize) -> bool {
    signed_frequency(kx, width).unsigned_abs() < half_width as u64
        && signed_frequency(ky, height).unsigned_abs() < half_width as u64
}

fn transpose(src: &[Complex<f64>], width: usize, height: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::default(); src.len()];
    for y in 0..height {
        for x in 0..width {
            out[x * height + y] = src[y * width + x];
        }
    }
    out
}

/// In-place 2D FFT over a row-major width x height grid. Unnormalized; a
/// forward/inverse pair scales by width * height.
fn fft_2d(data: &mut Vec<Complex<f64>>, width: usize, height: usize, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(width, direction);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let mut t = transpose(data, width, height);
    let col_fft = planner.plan_fft(height, direction);
    for col in t.chunks_exact_mut(height) {
        col_fft.process(col);
    }
    *data = transpose(&t, height, width);
}

fn require_single_channel(grid: &DenseMap, context: &'static str) -> Result<()> {
    if grid.channels != 1 {
        return Err(Error::DimensionMismatch {
            context,
            expected_w: grid.width,
            expected_h: grid.height,
            expected_c: 1,
            got_w: grid.width,
            got_h: grid.height,
            got_c: grid.channels,
        });
    }
    Ok(())
}

fn forward_spectrum(grid: &DenseMap) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = grid.data.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_2d(&mut data, grid.width, grid.height, FftDirection::Forward);
    data
}

/// Splits a single-channel grid into its (unnormalized) amplitude and phase
/// spectra. `reconstruct_channel` inverts the split.
pub fn amplitude_phase_split(channel: &DenseMap) -> Result<(DenseMap, DenseMap)> {
    require_single_channel(channel, "amplitude_phase_split")?;
    let spectrum = forward_spectrum(channel);
    let amplitude: Vec<f64> = spectrum.iter().map(|c| c.norm()).collect();
    let phase: Vec<f64> = spectrum.iter().map(|c| c.arg()).collect();
    Ok((
        DenseMap::from_vec(channel.width, channel.height, 1, amplitude)?,
        DenseMap::from_vec(channel.width, channel.height, 1, phase)?,
    ))
}

/// Inverse of [`amplitude_phase_split`]: rebuilds the complex spectrum from
/// amplitude and phase, applies the inverse transform, and returns the real
/// part.
pub fn reconstruct_channel(amplitude: &DenseMap, phase: &DenseMap) -> Result<DenseMap> {
    require_single_channel(amplitude, "reconstruct_channel")?;
    if amplitude.width != phase.width
        || amplitude.height != phase.height
        || phase.channels != 1
    {
        return Err(Error::DimensionMismatch {
            context: "reconstruct_channel",
            expected_w: amplitude.width,
            expected_h: amplitude.height,
            expected_c: 1,
            got_w: phase.width,
            got_h: phase.height,
            got_c: phase.channels,
        });
    }
    let mut spectrum: Vec<Complex<f64>> = amplitude
        .data
        .iter()
        .zip(&phase.data)
        .map(|(&a, &p)| Complex::from_polar(a, p))
        .collect();
    fft_2d(
        &mut spectrum,
        amplitude.width,
        amplitude.height,
        FftDirection::Inverse,
    );
    let n = (amplitude.width * amplitude.height) as f64;
    let data: Vec<f64> = spectrum.iter().map(|c| c.re / n).collect();
    DenseMap::from_vec(amplitude.width, amplitude.height, 1, data)
}

/// Amplitude and phase of the swapped spectrum for one channel: style
/// amplitude inside the window, content amplitude outside, content phase
/// everywhere (bit-exact, by construction).
pub fn fst_mixed_spectrum(
    content_channel: &DenseMap,
    style_channel: &DenseMap,
    cfg: &FstConfig,
) -> Result<(DenseMap, DenseMap)> {
    require_single_channel(content_channel, "fst_mixed_spectrum")?;
    if content_channel.width != style_channel.width
        || content_channel.height != style_channel.height
        || style_channel.channels != 1
    {
        return Err(Error::DimensionMismatch {
            context: "fst_mixed_spectrum",
            expected_w: content_channel.width,
            expected_h: content_channel.height,
            expected_c: 1,
            got_w: style_channel.width,
            got_h: style_channel.height,
            got_c: style_channel.channels,
        });
    }
    let (mut amplitude, phase) = amplitude_phase_split(content_channel)?;
    let (style_amplitude, _) = amplitude_phase_split(style_channel)?;
    let (w, h) = (content_channel.width, content_channel.height);
    let half = window_half_width(cfg, w, h);
    for ky in 0..h {
        for kx in 0..w {
            if in_window(kx, ky, w, h, half) {
                amplitude.data[ky * w + kx] = style_amplitude.data[ky * w + kx];
            }
        }
    }
    Ok((amplitude, phase))
}

fn channel_grid(image: &ImageBuffer, channel: usize) -> DenseMap {
    let mut data = Vec::with_capacity(image.width * image.height);
    for y in 0..image.height {
        for x in 0..image.width {
            data.push(image.at(x, y, channel));
        }
    }
    DenseMap {
        width: image.width,
        height: image.height,
        channels: 1,
        data,
    }
}

/// Replaces the low-frequency amplitudes of `content` with those of `style`
/// per channel, keeps content phase, inverts, and clamps to [0, 1].
pub fn fst_transfer(
    content: &ImageBuffer,
    style: &ImageBuffer,
    cfg: &FstConfig,
) -> Result<ImageBuffer> {
    if !content.same_shape(style) || content.channels != 3 {
        return Err(Error::DimensionMismatch {
            context: "fst_transfer",
            expected_w: content.width,
            expected_h: content.height,
            expected_c: 3,
            got_w: style.width,
            got_h: style.height,
            got_c: style.channels,
        });
    }
    let mut out = ImageBuffer::zeros(content.width, content.height, 3);
    for c in 0..3 {
        let content_ch = channel_grid(content, c);
        let style_ch = channel_grid(style, c);
        let (amplitude, phase) = fst_mixed_spectrum(&content_ch, &style_ch, cfg)?;
        let mixed = reconstruct_channel(&amplitude, &phase)?;
        for y in 0..content.height {
            for x in 0..content.width {
                out.set(x, y, c, mixed.data[y * content.width + x].clamp(0.0, 1.0));
            }
        }
    }
    Ok(out)
}
