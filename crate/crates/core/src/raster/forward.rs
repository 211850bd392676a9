//! Forward compositing: tiled renderer and brute-force reference.

use rayon::prelude::*;

use super::project::{bin_tiles, prepare, splat_weight, RenderSplat};
use super::project::tile_grid;
use super::{EARLY_STOP_TRANSMITTANCE, TILE_SIZE};
use crate::types::{CameraView, DenseMap, GaussianScene, ImageBuffer};

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Color composited behind the splats.
    pub background: [f64; 3],
    /// Also produce the expected-depth map.
    pub compute_depth: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            compute_depth: false,
        }
    }
}

/// Rendered color, accumulated opacity, and optionally expected depth.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub color: ImageBuffer,
    pub alpha: DenseMap,
    pub depth: Option<DenseMap>,
}

struct PixelState {
    color: [f64; 3],
    alpha: f64,
    depth: f64,
}

/// Front-to-back compositing of one pixel over an ordered splat list.
#[inline]
fn composite_pixel<'a>(
    splats: impl Iterator<Item = &'a RenderSplat>,
    px: f64,
    py: f64,
    background: &[f64; 3],
) -> PixelState {
    let mut color = [0.0; 3];
    let mut alpha = 0.0;
    let mut depth = 0.0;
    let mut transmittance = 1.0;
    for s in splats {
        let Some((w, _)) = splat_weight(s, px, py) else {
            continue;
        };
        let contribution = w * transmittance;
        color[0] += s.color[0] * contribution;
        color[1] += s.color[1] * contribution;
        color[2] += s.color[2] * contribution;
        alpha += contribution;
        depth += s.depth * contribution;
        transmittance *= 1.0 - w;
        if transmittance < EARLY_STOP_TRANSMITTANCE {
            break;
        }
    }
    color[0] += background[0] * transmittance;
    color[1] += background[1] * transmittance;
    color[2] += background[2] * transmittance;
    PixelState {
        color,
        alpha,
        depth,
    }
}

/// Tile-based forward render. Deterministic for any worker count: tiles own
/// disjoint pixel blocks and are written back in tile order.
pub fn render(scene: &GaussianScene, cam: &CameraView, opts: &RenderOptions) -> RenderOutput {
    let (w, h) = (cam.width, cam.height);
    let splats = prepare(scene, cam);
    let bins = bin_tiles(&splats, w, h);
    let (tiles_x, _) = tile_grid(w, h);

    struct TileBlock {
        color: Vec<f64>,
        alpha: Vec<f64>,
        depth: Vec<f64>,
    }

    let blocks: Vec<TileBlock> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let tx = t % tiles_x;
            let ty = t / tiles_x;
            let x0 = tx * TILE_SIZE;
            let y0 = ty * TILE_SIZE;
            let bw = TILE_SIZE.min(w - x0);
            let bh = TILE_SIZE.min(h - y0);
            let mut block = TileBlock {
                color: vec![0.0; bw * bh * 3],
                alpha: vec![0.0; bw * bh],
                depth: vec![0.0; bw * bh],
            };
            for by in 0..bh {
                for bx in 0..bw {
                    let px = (x0 + bx) as f64 + 0.5;
                    let py = (y0 + by) as f64 + 0.5;
                    let state = composite_pixel(
                        bin.iter().map(|&i| &splats[i as usize]),
                        px,
                        py,
                        &opts.background,
                    );
                    let i = by * bw + bx;
                    block.color[i * 3..i * 3 + 3].copy_from_slice(&state.color);
                    block.alpha[i] = state.alpha;
                    block.depth[i] = state.depth;
                }
            }
            block
        })
        .collect();

    let mut color = ImageBuffer::zeros(w, h, 3);
    let mut alpha = DenseMap::zeros(w, h, 1);
    let mut depth = if opts.compute_depth {
        Some(DenseMap::zeros(w, h, 1))
    } else {
        None
    };
    for (t, block) in blocks.iter().enumerate() {
        let tx = t % tiles_x;
        let ty = t / tiles_x;
        let x0 = tx * TILE_SIZE;
        let y0 = ty * TILE_SIZE;
        let bw = TILE_SIZE.min(w - x0);
        let bh = TILE_SIZE.min(h - y0);
        for by in 0..bh {
            for bx in 0..bw {
                let i = by * bw + bx;
                let (x, y) = (x0 + bx, y0 + by);
                for c in 0..3 {
                    color.set(x, y, c, block.color[i * 3 + c]);
                }
                alpha.set(x, y, 0, block.alpha[i]);
                if let Some(d) = depth.as_mut() {
                    d.set(x, y, 0, block.depth[i]);
                }
            }
        }
    }
    RenderOutput {
        color,
        alpha,
        depth,
    }
}

/// Reference compositor: every pixel walks the full depth-sorted splat list
/// with the same contribution rule as the tiled path. Used as the
/// equivalence oracle; output must match [`render`] bit for bit.
pub fn render_brute_force(
    scene: &GaussianScene,
    cam: &CameraView,
    opts: &RenderOptions,
) -> RenderOutput {
    let (w, h) = (cam.width, cam.height);
    let splats = prepare(scene, cam);
    let mut color = ImageBuffer::zeros(w, h, 3);
    let mut alpha = DenseMap::zeros(w, h, 1);
    let mut depth = if opts.compute_depth {
        Some(DenseMap::zeros(w, h, 1))
    } else {
        None
    };
    for y in 0..h {
        for x in 0..w {
            let state = composite_pixel(
                splats.iter(),
                x as f64 + 0.5,
                y as f64 + 0.5,
                &opts.background,
            );
            for c in 0..3 {
                color.set(x, y, c, state.color[c]);
            }
            alpha.set(x, y, 0, state.alpha);
            if let Some(d) = depth.as_mut() {
                d.set(x, y, 0, state.depth);
            }
        }
    }
    RenderOutput {
        color,
        alpha,
        depth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{logit, Gaussian3D};
    use nalgebra::Vector3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn camera(width: usize, height: usize, focal: f64) -> CameraView {
        let mut m = [0.0; 16];
        for i in 0..4 {
            m[i * 4 + i] = 1.0;
        }
        CameraView::new(
            focal,
            focal,
            width as f64 / 2.0,
            height as f64 / 2.0,
            width,
            height,
            m,
        )
        .unwrap()
    }

    pub(crate) fn random_scene(n: usize, seed: u64) -> GaussianScene {
        let mut rng = StdRng::seed_from_u64(seed);
        let gaussians = (0..n)
            .map(|_| Gaussian3D {
                position: Vector3::new(
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(-0.4..0.4),
                    rng.gen_range(1.2..2.5),
                ),
                rotation: {
                    let q: [f64; 4] = [
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    ];
                    crate::types::normalize_quaternion(q).unwrap()
                },
                log_scale: Vector3::new(
                    rng.gen_range(-4.0..-2.0),
                    rng.gen_range(-4.0..-2.0),
                    rng.gen_range(-4.0..-2.0),
                ),
                opacity_logit: rng.gen_range(-1.0..2.0),
                color: Vector3::new(rng.gen(), rng.gen(), rng.gen()),
            })
            .collect();
        GaussianScene::new(gaussians)
    }

    #[test]
    fn empty_scene_renders_background() {
        let cam = camera(32, 24, 50.0);
        let opts = RenderOptions {
            background: [0.1, 0.2, 0.3],
            compute_depth: false,
        };
        let out = render(&GaussianScene::new(vec![]), &cam, &opts);
        for y in 0..24 {
            for x in 0..32 {
                assert_eq!(out.color.at(x, y, 0), 0.1);
                assert_eq!(out.color.at(x, y, 1), 0.2);
                assert_eq!(out.color.at(x, y, 2), 0.3);
                assert_eq!(out.alpha.at(x, y, 0), 0.0);
            }
        }
    }

    #[test]
    fn single_opaque_splat_at_pixel_center() {
        let cam = camera(17, 17, 50.0);
        // Pixel (8, 8) has center (8.5, 8.5) = principal point, so a splat on
        // the optical axis evaluates exp(0) there.
        let alpha = 1.0 - 1e-9;
        let g = Gaussian3D {
            position: Vector3::new(0.0, 0.0, 1.0),
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: Vector3::new(-1.0, -1.0, -1.0),
            opacity_logit: logit(alpha),
            color: Vector3::new(0.9, 0.4, 0.1),
        };
        let out = render(&GaussianScene::new(vec![g]), &cam, &RenderOptions::default());
        assert!((out.color.at(8, 8, 0) - 0.9).abs() < 1e-6);
        assert!((out.color.at(8, 8, 1) - 0.4).abs() < 1e-6);
        assert!((out.color.at(8, 8, 2) - 0.1).abs() < 1e-6);
        assert!((out.alpha.at(8, 8, 0) - alpha).abs() < 1e-6);
    }

    #[test]
    fn two_splat_transmittance_chain() {
        // Front red at alpha 0.5 and back blue at alpha ~1, both centered on
        // the pixel: 0.5 red + 0.5 blue.
        let cam = camera(17, 17, 50.0);
        let mut front = Gaussian3D {
            position: Vector3::new(0.0, 0.0, 1.0),
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: Vector3::new(-1.0, -1.0, -1.0),
            opacity_logit: logit(0.5),
            color: Vector3::new(1.0, 0.0, 0.0),
        };
        let mut back = front.clone();
        back.position.z = 2.0;
        back.opacity_logit = logit(1.0 - 1e-12);
        back.color = Vector3::new(0.0, 0.0, 1.0);
        front.log_scale = Vector3::new(-0.5, -0.5, -0.5);
        back.log_scale = Vector3::new(0.2, 0.2, 0.2);

        let out = render(
            &GaussianScene::new(vec![back, front]),
            &cam,
            &RenderOptions::default(),
        );
        assert!((out.color.at(8, 8, 0) - 0.5).abs() < 1e-6, "red half");
        assert!((out.color.at(8, 8, 2) - 0.5).abs() < 1e-6, "blue half");
        assert!(out.color.at(8, 8, 1).abs() < 1e-9);
    }

    #[test]
    fn tiled_matches_brute_force_bit_for_bit() {
        for seed in 0..3u64 {
            let scene = random_scene(40, seed);
            let cam = camera(48, 48, 60.0);
            let opts = RenderOptions {
                background: [0.2, 0.1, 0.05],
                compute_depth: true,
            };
            let tiled = render(&scene, &cam, &opts);
            let brute = render_brute_force(&scene, &cam, &opts);
            assert_eq!(tiled.color.data, brute.color.data);
            assert_eq!(tiled.alpha.data, brute.alpha.data);
            assert_eq!(tiled.depth.unwrap().data, brute.depth.unwrap().data);
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = random_scene(25, 9);
        let cam = camera(40, 32, 55.0);
        let a = render(&scene, &cam, &RenderOptions::default());
        let b = render(&scene, &cam, &RenderOptions::default());
        assert_eq!(a.color.data, b.color.data);
        assert_eq!(a.alpha.data, b.alpha.data);
    }

    #[test]
    fn alpha_monotone_in_opacity() {
        let cam = camera(24, 24, 40.0);
        let mut scene = random_scene(8, 4);
        let mut last: Option<Vec<f64>> = None;
        for opacity in [0.05, 0.25, 0.5, 0.75, 0.95] {
            scene.gaussians[3].opacity_logit = logit(opacity);
            let out = render(&scene, &cam, &RenderOptions::default());
            if let Some(prev) = last {
                for (p, n) in prev.iter().zip(&out.alpha.data) {
                    assert!(n + 1e-12 >= *p, "alpha must not decrease: {p} -> {n}");
                }
            }
            last = Some(out.alpha.data);
        }
    }

    #[test]
    fn color_stays_in_range_with_unit_inputs() {
        let scene = random_scene(60, 13);
        let cam = camera(48, 40, 60.0);
        let out = render(&scene, &cam, &RenderOptions::default());
        for v in &out.color.data {
            assert!((0.0..=1.0 + 1e-4).contains(v));
        }
        for a in &out.alpha.data {
            assert!((0.0..=1.0).contains(a));
        }
    }
}
