//! Refinement engine for 3D Gaussian-splat scenes.
//!
//! The crate takes a coarse scene of anisotropic 3D Gaussians (typically the
//! output of a feed-forward reconstruction network, ingested as a PLY file)
//! and optimizes its parameters against externally generated posed
//! supervision images. Supervision can carry per-pixel segmentation logits;
//! their normalized Shannon entropy down-weights unreliable pixels in the
//! reconstruction loss. A Fourier-domain amplitude swap aligns the color and
//! texture statistics of supervision images with a conditioning image before
//! optimization starts.
//!
//! Modules:
//! - [`types`]: Gaussian primitives, scenes, cameras, pixel grids.
//! - [`raster`]: differentiable tile-based CPU rasterizer (forward + analytic
//!   backward) and a brute-force reference compositor.
//! - [`uncertainty`]: softmax + entropy, logits to uncertainty maps.
//! - [`fst`]: Fourier style transfer (low-frequency amplitude swapping).
//! - [`loss`]: SSIM, uncertainty-weighted L2, and the combined objective,
//!   each with analytic gradients w.r.t. the rendered image.
//! - [`refine`]: the Adam-based optimization loop with scale clamping and
//!   adaptive densification/pruning.
//! - [`io`]: PLY, tensor, manifest, and PNG serialization.
//! - [`harness`]: synthetic scene generation and paired recovery experiments.

pub mod error;
pub mod fst;
pub mod harness;
pub mod io;
pub mod loss;
pub mod raster;
pub mod refine;
pub mod types;
pub mod uncertainty;

pub use error::{Error, Result};
pub use types::{CameraView, DenseMap, Gaussian3D, GaussianScene, ImageBuffer, PseudoView};
