//! Bit-exact serialization: Gaussian PLY (3DGS layout), tensor files for
//! logits and maps, view manifests, and 8-bit PNG images.
//!
//! Every format is documented field by field in FORMATS.md at the repository
//! root.

mod manifest;
mod ply;
mod png;
mod tensor;

pub use manifest::{
    load_manifest, load_views, write_manifest, CameraRecord, LoadedViews, ManifestFile,
    ManifestView, ViewManifest, ViewRecord,
};
pub use ply::{load_ply, save_ply, SH_C0};
pub use png::{image_to_rgb8, load_png, save_png};
pub use tensor::{load_tensor, save_tensor, TENSOR_MAGIC, TENSOR_VERSION};
