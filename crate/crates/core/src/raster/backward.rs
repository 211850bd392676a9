//! Analytic backward pass of the tiled renderer.
//!
//! Per pixel the forward contribution chain is replayed, then walked back to
//! front to form gradients w.r.t. each splat's 2D footprint (mean, covariance,
//! opacity, color). The 2D gradients are merged across tiles in tile order
//! and chained through the EWA projection to the 3D parameters. The gradient
//! of the depth-sort order is ignored, as is the dependence of culling and
//! the early-stop point on the parameters.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use super::project::{bin_tiles, perspective_jacobian, prepare, splat_weight};
use super::project::tile_grid;
use super::{RenderOptions, EARLY_STOP_TRANSMITTANCE, TILE_SIZE};
use crate::error::{Error, Result};
use crate::types::{
    normalize_quaternion, quat_to_rotation, CameraView, DenseMap, GaussianScene, ImageBuffer,
};

/// Per-Gaussian parameter gradients produced by [`render_backward`]. Culled
/// Gaussians keep zero entries. `mean2d_norm` is the norm of the accumulated
/// screen-space position gradient, the densification statistic.
#[derive(Debug, Clone)]
pub struct RenderGradients {
    pub position: Vec<Vector3<f64>>,
    pub rotation: Vec<[f64; 4]>,
    pub log_scale: Vec<Vector3<f64>>,
    pub opacity_logit: Vec<f64>,
    pub color: Vec<Vector3<f64>>,
    pub mean2d_norm: Vec<f64>,
}

impl RenderGradients {
    fn zeros(n: usize) -> Self {
        Self {
            position: vec![Vector3::zeros(); n],
            rotation: vec![[0.0; 4]; n],
            log_scale: vec![Vector3::zeros(); n],
            opacity_logit: vec![0.0; n],
            color: vec![Vector3::zeros(); n],
            mean2d_norm: vec![0.0; n],
        }
    }

    /// Element-wise accumulate, used to average gradients over a batch.
    pub fn add_scaled(&mut self, other: &RenderGradients, scale: f64) {
        for i in 0..self.position.len() {
            self.position[i] += other.position[i] * scale;
            for k in 0..4 {
                self.rotation[i][k] += other.rotation[i][k] * scale;
            }
            self.log_scale[i] += other.log_scale[i] * scale;
            self.opacity_logit[i] += other.opacity_logit[i] * scale;
            self.color[i] += other.color[i] * scale;
            self.mean2d_norm[i] += other.mean2d_norm[i] * scale;
        }
    }
}

/// Accumulator slots per splat: d_mean (2), d_cov2d (m00, m01, m11),
/// d_activated_alpha, d_color (3).
const ACC: usize = 9;

/// Partial derivatives of the rotation matrix w.r.t. the unit quaternion
/// components (wxyz).
fn rotation_partials(q: [f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = q;
    [
        Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0,
        Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0,
        Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0,
        Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0,
    ]
}

struct Contribution {
    local: u32,
    weight: f64,
    gaussian_value: f64,
    transmittance: f64,
}

pub fn render_backward(
    scene: &GaussianScene,
    cam: &CameraView,
    grad_color: &ImageBuffer,
    grad_alpha: Option<&DenseMap>,
    opts: &RenderOptions,
) -> Result<RenderGradients> {
    let (w, h) = (cam.width, cam.height);
    if grad_color.width != w || grad_color.height != h || grad_color.channels != 3 {
        return Err(Error::DimensionMismatch {
            context: "render_backward grad_color",
            expected_w: w,
            expected_h: h,
            expected_c: 3,
            got_w: grad_color.width,
            got_h: grad_color.height,
            got_c: grad_color.channels,
        });
    }
    if let Some(ga) = grad_alpha {
        if ga.width != w || ga.height != h || ga.channels != 1 {
            return Err(Error::DimensionMismatch {
                context: "render_backward grad_alpha",
                expected_w: w,
                expected_h: h,
                expected_c: 1,
                got_w: ga.width,
                got_h: ga.height,
                got_c: ga.channels,
            });
        }
    }

    let splats = prepare(scene, cam);
    let bins = bin_tiles(&splats, w, h);
    let (tiles_x, _) = tile_grid(w, h);
    let bg = opts.background;

    // Per-tile local accumulation, merged below in tile order.
    let tile_grads: Vec<Vec<f64>> = bins
        .par_iter()
        .enumerate()
        .map(|(t, bin)| {
            let mut local = vec![0.0; bin.len() * ACC];
            if bin.is_empty() {
                return local;
            }
            let tx = t % tiles_x;
            let ty = t / tiles_x;
            let x0 = tx * TILE_SIZE;
            let y0 = ty * TILE_SIZE;
            let bw = TILE_SIZE.min(w - x0);
            let bh = TILE_SIZE.min(h - y0);
            let mut contribs: Vec<Contribution> = Vec::with_capacity(bin.len());
            for by in 0..bh {
                for bx in 0..bw {
                    let (x, y) = (x0 + bx, y0 + by);
                    let dc = [
                        grad_color.at(x, y, 0),
                        grad_color.at(x, y, 1),
                        grad_color.at(x, y, 2),
                    ];
                    let da = grad_alpha.map_or(0.0, |g| g.at(x, y, 0));
                    if dc == [0.0; 3] && da == 0.0 {
                        continue;
                    }
                    let px = x as f64 + 0.5;
                    let py = y as f64 + 0.5;

                    // Forward replay.
                    contribs.clear();
                    let mut transmittance = 1.0;
                    for (local_idx, &si) in bin.iter().enumerate() {
                        let s = &splats[si as usize];
                        let Some((weight, gaussian_value)) = splat_weight(s, px, py) else {
                            continue;
                        };
                        contribs.push(Contribution {
                            local: local_idx as u32,
                            weight,
                            gaussian_value,
                            transmittance,
                        });
                        transmittance *= 1.0 - weight;
                        if transmittance < EARLY_STOP_TRANSMITTANCE {
                            break;
                        }
                    }
                    let t_final = transmittance;
                    let bg_dot = bg[0] * dc[0] + bg[1] * dc[1] + bg[2] * dc[2];

                    // Back-to-front adjoint walk.
                    let mut behind_dot = 0.0;
                    for contrib in contribs.iter().rev() {
                        let s = &splats[bin[contrib.local as usize] as usize];
                        let one_minus_w = 1.0 - contrib.weight;
                        let color_dot =
                            s.color[0] * dc[0] + s.color[1] * dc[1] + s.color[2] * dc[2];
                        let dw = color_dot * contrib.transmittance
                            - (behind_dot + bg_dot * t_final) / one_minus_w
                            + da * t_final / one_minus_w;

                        let acc = &mut local
                            [contrib.local as usize * ACC..contrib.local as usize * ACC + ACC];
                        acc[5] += contrib.gaussian_value * dw;
                        let ct = contrib.weight * contrib.transmittance;
                        acc[6] += dc[0] * ct;
                        acc[7] += dc[1] * ct;
                        acc[8] += dc[2] * ct;

                        let dq = -0.5 * contrib.weight * dw;
                        let dx = px - s.mean.x;
                        let dy = py - s.mean.y;
                        let adx = s.inv_cov[0] * dx + s.inv_cov[1] * dy;
                        let ady = s.inv_cov[1] * dx + s.inv_cov[2] * dy;
                        acc[0] -= 2.0 * dq * adx;
                        acc[1] -= 2.0 * dq * ady;
                        acc[2] -= dq * adx * adx;
                        acc[3] -= dq * adx * ady;
                        acc[4] -= dq * ady * ady;

                        behind_dot += color_dot * ct;
                    }
                }
            }
            local
        })
        .collect();

    // Deterministic merge: tiles in index order.
    let mut merged = vec![0.0; splats.len() * ACC];
    for (bin, local) in bins.iter().zip(&tile_grads) {
        for (j, &si) in bin.iter().enumerate() {
            let src = &local[j * ACC..j * ACC + ACC];
            let dst = &mut merged[si as usize * ACC..si as usize * ACC + ACC];
            for k in 0..ACC {
                dst[k] += src[k];
            }
        }
    }

    // Chain 2D footprint gradients to the 3D parameters.
    let mut grads = RenderGradients::zeros(scene.len());
    for (list_idx, s) in splats.iter().enumerate() {
        let acc = &merged[list_idx * ACC..list_idx * ACC + ACC];
        if acc.iter().all(|&v| v == 0.0) {
            continue;
        }
        let gi = s.gaussian_index;
        let g = &scene.gaussians[gi];

        let p_cam = cam.to_camera(&g.position);
        let (x, y, z) = (p_cam.x, p_cam.y, p_cam.z);
        let jt = perspective_jacobian(cam, &p_cam);
        let mt = cam.rotation().transpose() * jt;

        let q_hat = normalize_quaternion(g.rotation).expect("scene invariant: non-zero rotation");
        let rot = quat_to_rotation(q_hat);
        let scale2 = g.log_scale.map(|v| (2.0 * v).exp());
        let sigma = rot * Matrix3::from_diagonal(&scale2) * rot.transpose();

        let g2 = Matrix2::new(acc[2], acc[3], acc[3], acc[4]);
        let d_sigma = mt * g2 * mt.transpose();
        let d_m = 2.0 * g2 * mt.transpose() * sigma;
        let d_j = d_m * cam.rotation().transpose();

        // Mean path: direct projection Jacobian.
        let d_mean = Vector2::new(acc[0], acc[1]);
        let mut dp_cam = jt * d_mean;
        // Covariance path: the Jacobian itself depends on the camera-space
        // position.
        let zi2 = 1.0 / (z * z);
        let zi3 = zi2 / z;
        dp_cam.x += d_j[(0, 2)] * (-cam.fx * zi2);
        dp_cam.y += d_j[(1, 2)] * (-cam.fy * zi2);
        dp_cam.z += d_j[(0, 0)] * (-cam.fx * zi2)
            + d_j[(0, 2)] * (2.0 * cam.fx * x * zi3)
            + d_j[(1, 1)] * (-cam.fy * zi2)
            + d_j[(1, 2)] * (2.0 * cam.fy * y * zi3);
        grads.position[gi] = cam.rotation().transpose() * dp_cam;

        // Scale: Sigma = R D R^T with D = diag(exp(2 ls)).
        let rt_ds_r = rot.transpose() * d_sigma * rot;
        grads.log_scale[gi] = Vector3::new(
            rt_ds_r[(0, 0)] * 2.0 * scale2.x,
            rt_ds_r[(1, 1)] * 2.0 * scale2.y,
            rt_ds_r[(2, 2)] * 2.0 * scale2.z,
        );

        // Rotation: through R, then through the normalization.
        let d_rot = 2.0 * d_sigma * rot * Matrix3::from_diagonal(&scale2);
        let partials = rotation_partials(q_hat);
        let mut d_q_hat = [0.0; 4];
        for (k, p) in partials.iter().enumerate() {
            d_q_hat[k] = p.component_mul(&d_rot).sum();
        }
        let raw = g.rotation;
        let raw_norm =
            (raw[0] * raw[0] + raw[1] * raw[1] + raw[2] * raw[2] + raw[3] * raw[3]).sqrt();
        let dot =
            q_hat[0] * d_q_hat[0] + q_hat[1] * d_q_hat[1] + q_hat[2] * d_q_hat[2]
                + q_hat[3] * d_q_hat[3];
        for k in 0..4 {
            grads.rotation[gi][k] = (d_q_hat[k] - q_hat[k] * dot) / raw_norm;
        }

        let alpha = s.alpha;
        grads.opacity_logit[gi] = acc[5] * alpha * (1.0 - alpha);
        grads.color[gi] = Vector3::new(acc[6], acc[7], acc[8]);
        grads.mean2d_norm[gi] = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
    }
    Ok(grads)
}
