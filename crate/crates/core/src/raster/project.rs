//! EWA projection of 3D Gaussians to screen-space 2D Gaussians.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector2, Vector3};

use super::{CUTOFF_QF, LOW_PASS, NEAR_PLANE, TILE_SIZE};
use crate::types::{covariance_3d, CameraView, GaussianScene};

/// One splat surviving projection: screen-space footprint plus its source
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatProjection {
    /// Projected mean in pixel coordinates.
    pub mean_2d: Vector2<f64>,
    /// Symmetric 2x2 screen-space covariance (a, b, c) for [[a, b], [b, c]],
    /// low-pass regularized.
    pub cov_2d: [f64; 3],
    /// Camera-space z.
    pub depth: f64,
    /// Half side of the bounding box: three sigmas of the major axis.
    pub radius: f64,
    pub gaussian_index: usize,
}

/// Perspective Jacobian of pixel coordinates w.r.t. camera-space position.
pub(super) fn perspective_jacobian(cam: &CameraView, p_cam: &Vector3<f64>) -> Matrix3x2<f64> {
    let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
    let zi = 1.0 / z;
    let zi2 = zi * zi;
    // Stored transposed (3x2) so J^T is the natural nalgebra product shape;
    // rows of J are the columns here.
    Matrix3x2::new(
        cam.fx * zi,
        0.0,
        0.0,
        cam.fy * zi,
        -cam.fx * x * zi2,
        -cam.fy * y * zi2,
    )
}

/// Projects every Gaussian, culling splats behind the near plane or whose
/// 3-sigma box misses the viewport. Output preserves scene order.
pub fn project(scene: &GaussianScene, cam: &CameraView) -> Vec<SplatProjection> {
    let mut out = Vec::with_capacity(scene.len());
    let (w, h) = (cam.width as f64, cam.height as f64);
    for (i, g) in scene.gaussians.iter().enumerate() {
        let p_cam = cam.to_camera(&g.position);
        if p_cam.z < NEAR_PLANE {
            continue;
        }
        let mean_2d = Vector2::new(
            cam.fx * p_cam.x / p_cam.z + cam.cx,
            cam.fy * p_cam.y / p_cam.z + cam.cy,
        );

        let sigma = covariance_3d(g).expect("scene invariant: non-zero rotation");
        let jt = perspective_jacobian(cam, &p_cam);
        // cov2d = J W Sigma W^T J^T with W the camera rotation.
        let mt: Matrix3x2<f64> = cam.rotation().transpose() * jt;
        let cov: Matrix2<f64> = mt.transpose() * sigma * mt;
        let a = cov[(0, 0)] + LOW_PASS;
        let b = cov[(0, 1)];
        let c = cov[(1, 1)] + LOW_PASS;

        let lambda_max = 0.5 * (a + c) + (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let radius = 3.0 * lambda_max.sqrt();
        if mean_2d.x + radius <= 0.0
            || mean_2d.x - radius >= w
            || mean_2d.y + radius <= 0.0
            || mean_2d.y - radius >= h
        {
            continue;
        }
        out.push(SplatProjection {
            mean_2d,
            cov_2d: [a, b, c],
            depth: p_cam.z,
            radius,
            gaussian_index: i,
        });
    }
    out
}

/// Splat prepared for compositing: projection plus inverse covariance,
/// activated opacity, and color.
#[derive(Debug, Clone)]
pub(super) struct RenderSplat {
    pub mean: Vector2<f64>,
    pub inv_cov: [f64; 3],
    pub radius: f64,
    pub alpha: f64,
    pub color: [f64; 3],
    pub depth: f64,
    pub gaussian_index: usize,
}

/// Per-splat contribution at a pixel center, shared verbatim by the tiled
/// renderer, the brute-force reference, and the backward replay. Returns the
/// opacity-weighted Gaussian value and the raw Gaussian value.
#[inline]
pub(super) fn splat_weight(s: &RenderSplat, px: f64, py: f64) -> Option<(f64, f64)> {
    let dx = px - s.mean.x;
    let dy = py - s.mean.y;
    if dx.abs() > s.radius || dy.abs() > s.radius {
        return None;
    }
    let q = s.inv_cov[0] * dx * dx + 2.0 * s.inv_cov[1] * dx * dy + s.inv_cov[2] * dy * dy;
    if q >= CUTOFF_QF {
        return None;
    }
    let g = (-0.5 * q).exp();
    Some((s.alpha * g, g))
}

/// Projects, activates, and depth-sorts the scene for compositing. The sort
/// is stable by (depth, gaussian_index).
pub(super) fn prepare(scene: &GaussianScene, cam: &CameraView) -> Vec<RenderSplat> {
    let mut splats: Vec<RenderSplat> = project(scene, cam)
        .into_iter()
        .map(|p| {
            let g = &scene.gaussians[p.gaussian_index];
            let [a, b, c] = p.cov_2d;
            let det = a * c - b * b;
            RenderSplat {
                mean: p.mean_2d,
                inv_cov: [c / det, -b / det, a / det],
                radius: p.radius,
                alpha: g.opacity(),
                color: [g.color.x, g.color.y, g.color.z],
                depth: p.depth,
                gaussian_index: p.gaussian_index,
            }
        })
        .collect();
    splats.sort_by(|l, r| {
        l.depth
            .partial_cmp(&r.depth)
            .unwrap()
            .then(l.gaussian_index.cmp(&r.gaussian_index))
    });
    splats
}

/// Tile grid dimensions for an image.
pub(super) fn tile_grid(width: usize, height: usize) -> (usize, usize) {
    (width.div_ceil(TILE_SIZE), height.div_ceil(TILE_SIZE))
}

/// Bins sorted splats into tiles; per-tile lists inherit the depth order.
pub(super) fn bin_tiles(
    splats: &[RenderSplat],
    width: usize,
    height: usize,
) -> Vec<Vec<u32>> {
    let (tiles_x, tiles_y) = tile_grid(width, height);
    let mut bins = vec![Vec::new(); tiles_x * tiles_y];
    for (i, s) in splats.iter().enumerate() {
        let x0 = ((s.mean.x - s.radius).floor().max(0.0) as usize).min(width - 1) / TILE_SIZE;
        let x1 = ((s.mean.x + s.radius).ceil().max(0.0) as usize).min(width - 1) / TILE_SIZE;
        let y0 = ((s.mean.y - s.radius).floor().max(0.0) as usize).min(height - 1) / TILE_SIZE;
        let y1 = ((s.mean.y + s.radius).ceil().max(0.0) as usize).min(height - 1) / TILE_SIZE;
        for ty in y0..=y1 {
            for tx in x0..=x1 {
                bins[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    bins
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Gaussian3D;
    use approx::assert_relative_eq;
    use nalgebra::Matrix2x3;

    fn test_camera() -> CameraView {
        let mut m = [0.0; 16];
        for i in 0..4 {
            m[i * 4 + i] = 1.0;
        }
        CameraView::new(100.0, 100.0, 192.0, 128.0, 384, 256, m).unwrap()
    }

    fn gaussian_at(position: Vector3<f64>, log_scale: f64) -> Gaussian3D {
        Gaussian3D {
            position,
            rotation: [1.0, 0.0, 0.0, 0.0],
            log_scale: Vector3::new(log_scale, log_scale, log_scale),
            opacity_logit: 0.0,
            color: Vector3::new(0.5, 0.5, 0.5),
        }
    }

    #[test]
    fn on_axis_projection_hits_principal_point() {
        let scene = GaussianScene::new(vec![gaussian_at(Vector3::new(0.0, 0.0, 1.0), -3.0)]);
        let splats = project(&scene, &test_camera());
        assert_eq!(splats.len(), 1);
        assert_relative_eq!(splats[0].mean_2d.x, 192.0, epsilon = 1e-12);
        assert_relative_eq!(splats[0].mean_2d.y, 128.0, epsilon = 1e-12);
        assert_relative_eq!(splats[0].depth, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn behind_camera_is_culled() {
        let scene = GaussianScene::new(vec![gaussian_at(Vector3::new(0.0, 0.0, -1.0), -3.0)]);
        assert!(project(&scene, &test_camera()).is_empty());
    }

    #[test]
    fn off_screen_is_culled() {
        let scene = GaussianScene::new(vec![gaussian_at(Vector3::new(100.0, 0.0, 1.0), -3.0)]);
        assert!(project(&scene, &test_camera()).is_empty());
    }

    #[test]
    fn isotropic_covariance_matches_jacobian_oracle() {
        // Oracle: explicit J Sigma J^T with J written out by hand.
        let cam = test_camera();
        for (s, d) in [(0.05f64, 2.0f64), (0.01, 0.5), (0.2, 4.0)] {
            let scene = GaussianScene::new(vec![gaussian_at(Vector3::new(0.0, 0.0, d), s.ln())]);
            let splats = project(&scene, &cam);
            assert_eq!(splats.len(), 1);

            let j = Matrix2x3::new(cam.fx / d, 0.0, 0.0, 0.0, cam.fy / d, 0.0);
            let sigma = Matrix3::from_diagonal_element(s * s);
            let expected = j * sigma * j.transpose();
            let [a, b, c] = splats[0].cov_2d;
            assert_relative_eq!(a, expected[(0, 0)] + LOW_PASS, max_relative = 1e-12);
            assert_relative_eq!(b, expected[(0, 1)], epsilon = 1e-12);
            assert_relative_eq!(c, expected[(1, 1)] + LOW_PASS, max_relative = 1e-12);
            // Which is diag((fx s / d)^2 + 0.3, (fy s / d)^2 + 0.3).
            assert_relative_eq!(
                a,
                (cam.fx * s / d).powi(2) + LOW_PASS,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn retained_radius_at_least_one_pixel() {
        let scene = GaussianScene::new(vec![gaussian_at(Vector3::new(0.0, 0.0, 5.0), -9.0)]);
        let splats = project(&scene, &test_camera());
        assert_eq!(splats.len(), 1);
        assert!(splats[0].radius >= 1.0);
    }

    #[test]
    fn prepare_sorts_by_depth_then_index() {
        let mut g1 = gaussian_at(Vector3::new(0.0, 0.0, 2.0), -3.0);
        let g2 = gaussian_at(Vector3::new(0.0, 0.0, 1.0), -3.0);
        let g3 = gaussian_at(Vector3::new(0.01, 0.0, 2.0), -3.0);
        g1.color = Vector3::new(1.0, 0.0, 0.0);
        let scene = GaussianScene::new(vec![g1, g2, g3]);
        let splats = prepare(&scene, &test_camera());
        assert_eq!(
            splats.iter().map(|s| s.gaussian_index).collect::<Vec<_>>(),
            vec![1, 0, 2]
        );
    }
}
