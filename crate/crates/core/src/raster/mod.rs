//! Differentiable tile-based forward rasterizer of 3D Gaussians and its
//! analytic backward pass.
//!
//! Splats are projected to screen-space 2D Gaussians (EWA), globally sorted
//! by camera-space depth (ties broken by index), binned into 16x16 pixel
//! tiles, and alpha-composited front to back per pixel. A brute-force
//! per-pixel compositor that ignores tiling shares the same per-splat
//! contribution rule and serves as the bit-exact reference in tests.
//!
//! The backward pass walks each pixel's contribution chain back to front and
//! accumulates per-splat gradients into per-tile buffers that are merged in
//! tile order, so results are identical for any worker count.

mod backward;
mod forward;
mod project;

pub use backward::{render_backward, RenderGradients};
pub use forward::{render, render_brute_force, RenderOptions, RenderOutput};
pub use project::{project, SplatProjection};

/// Side length of a rasterization tile in pixels.
pub const TILE_SIZE: usize = 16;

/// Near-plane depth in world units; splats with camera-space z below this
/// are culled.
pub const NEAR_PLANE: f64 = 0.01;

/// Low-pass regularizer added to the projected covariance diagonal (pixel^2).
pub const LOW_PASS: f64 = 0.3;

/// Compositing stops once transmittance falls below this.
pub const EARLY_STOP_TRANSMITTANCE: f64 = 1e-4;

/// Squared Mahalanobis cutoff: contributions beyond the 3-sigma ellipse are
/// dropped.
pub const CUTOFF_QF: f64 = 9.0;
