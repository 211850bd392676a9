//! View manifests: JSON records binding the conditioning image, supervision
//! views with cameras and optional logits, and evaluation views.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_png, load_tensor};
use crate::types::{CameraView, ImageBuffer, PseudoView};

/// Camera fields as they appear on disk. `world_to_camera` is 16 numbers,
/// row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    pub world_to_camera: Vec<f64>,
}

impl CameraRecord {
    pub fn from_camera(cam: &CameraView) -> Self {
        Self {
            fx: cam.fx,
            fy: cam.fy,
            cx: cam.cx,
            cy: cam.cy,
            width: cam.width,
            height: cam.height,
            world_to_camera: cam.world_to_camera().to_vec(),
        }
    }

    fn validate(&self, field_path: &str) -> Result<CameraView> {
        if self.world_to_camera.len() != 16 {
            return Err(Error::ManifestField {
                path: format!("{field_path}.world_to_camera"),
                what: format!("expected 16 numbers, got {}", self.world_to_camera.len()),
            });
        }
        let mut m = [0.0; 16];
        m.copy_from_slice(&self.world_to_camera);
        CameraView::new(self.fx, self.fy, self.cx, self.cy, self.width, self.height, m).map_err(
            |e| Error::ManifestField {
                path: field_path.to_string(),
                what: e.to_string(),
            },
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewRecord {
    pub image: String,
    pub camera: CameraRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<String>,
}

/// On-disk manifest shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub input_image: String,
    pub views: Vec<ViewRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_views: Option<Vec<ViewRecord>>,
}

/// One validated view entry: resolved paths plus a checked camera.
#[derive(Debug, Clone)]
pub struct ManifestView {
    pub image: PathBuf,
    pub camera: CameraView,
    pub logits: Option<PathBuf>,
}

/// Validated manifest. Paths are resolved against the manifest's directory
/// and known to exist; all cameras share one resolution.
#[derive(Debug, Clone)]
pub struct ViewManifest {
    pub input_image: PathBuf,
    pub views: Vec<ManifestView>,
    pub eval_views: Vec<ManifestView>,
}

fn resolve(base: &Path, rel: &str, field_path: &str) -> Result<PathBuf> {
    if rel.is_empty() {
        return Err(Error::ManifestField {
            path: field_path.to_string(),
            what: "empty path".to_string(),
        });
    }
    let p = base.join(rel);
    if !p.is_file() {
        return Err(Error::MissingFile {
            path: p.display().to_string(),
        });
    }
    Ok(p)
}

fn validate_views(
    records: &[ViewRecord],
    base: &Path,
    field: &str,
    resolution: &mut Option<(usize, usize)>,
) -> Result<Vec<ManifestView>> {
    let mut out = Vec::with_capacity(records.len());
    for (i, record) in records.iter().enumerate() {
        let path = format!("{field}[{i}]");
        let camera = record.camera.validate(&format!("{path}.camera"))?;
        match resolution {
            Some((w, h)) => {
                if camera.width != *w || camera.height != *h {
                    return Err(Error::ManifestField {
                        path: format!("{path}.camera"),
                        what: format!(
                            "all views must share one resolution; expected {w}x{h}, got {}x{}",
                            camera.width, camera.height
                        ),
                    });
                }
            }
            None => *resolution = Some((camera.width, camera.height)),
        }
        let image = resolve(base, &record.image, &format!("{path}.image"))?;
        let logits = match &record.logits {
            Some(l) => Some(resolve(base, l, &format!("{path}.logits"))?),
            None => None,
        };
        out.push(ManifestView {
            image,
            camera,
            logits,
        });
    }
    Ok(out)
}

pub fn load_manifest(path: &Path) -> Result<ViewManifest> {
    let text = std::fs::read_to_string(path)?;
    let file: ManifestFile = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));

    let input_image = resolve(base, &file.input_image, "input_image")?;
    let mut resolution = None;
    let views = validate_views(&file.views, base, "views", &mut resolution)?;
    if views.is_empty() {
        return Err(Error::ManifestField {
            path: "views".to_string(),
            what: "at least one view is required".to_string(),
        });
    }
    let eval_views = match &file.eval_views {
        Some(records) => validate_views(records, base, "eval_views", &mut resolution)?,
        None => Vec::new(),
    };
    Ok(ViewManifest {
        input_image,
        views,
        eval_views,
    })
}

pub fn write_manifest(file: &ManifestFile, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Fully loaded manifest data, ready for refinement.
#[derive(Debug, Clone)]
pub struct LoadedViews {
    pub input_image: ImageBuffer,
    pub views: Vec<PseudoView>,
    pub eval_views: Vec<PseudoView>,
}

fn load_view(view: &ManifestView, index: usize, field: &str) -> Result<PseudoView> {
    let image = load_png(&view.image)?;
    if image.width != view.camera.width || image.height != view.camera.height {
        return Err(Error::ManifestField {
            path: format!("{field}[{index}].image"),
            what: format!(
                "image is {}x{} but camera declares {}x{}",
                image.width, image.height, view.camera.width, view.camera.height
            ),
        });
    }
    let logits = match &view.logits {
        Some(path) => {
            let map = load_tensor(path)?;
            if map.width != image.width || map.height != image.height {
                return Err(Error::LogitsResolutionMismatch {
                    view: index,
                    expected_w: image.width,
                    expected_h: image.height,
                    got_w: map.width,
                    got_h: map.height,
                });
            }
            Some(map)
        }
        None => None,
    };
    Ok(PseudoView {
        image,
        camera: view.camera.clone(),
        logits,
    })
}

/// Loads every image and logits tensor referenced by a validated manifest.
pub fn load_views(manifest: &ViewManifest) -> Result<LoadedViews> {
    let input_image = load_png(&manifest.input_image)?;
    let views = manifest
        .views
        .iter()
        .enumerate()
        .map(|(i, v)| load_view(v, i, "views"))
        .collect::<Result<Vec<_>>>()?;
    let eval_views = manifest
        .eval_views
        .iter()
        .enumerate()
        .map(|(i, v)| load_view(v, i, "eval_views"))
        .collect::<Result<Vec<_>>>()?;
    Ok(LoadedViews {
        input_image,
        views,
        eval_views,
    })
}
