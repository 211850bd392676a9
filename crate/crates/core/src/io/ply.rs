//! Binary little-endian PLY in the 3DGS interchange layout.
//!
//! Load accepts any scalar-float vertex layout containing the required
//! properties; extras like normals and higher-order SH coefficients are
//! tolerated and ignored. Save always writes the minimal 14-property layout,
//! so files written here round-trip byte-identically.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::{normalize_quaternion, Gaussian3D, GaussianScene};

/// Degree-0 spherical harmonic basis constant 1 / (2 sqrt(pi)); maps the
/// stored f_dc coefficient to an RGB offset around mid-gray.
pub const SH_C0: f64 = 0.28209479177387814;

const REQUIRED: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0", "scale_1", "scale_2",
    "rot_0", "rot_1", "rot_2", "rot_3",
];

pub fn load_ply(path: &Path) -> Result<GaussianScene> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_ply(&bytes)
}

fn parse_ply(bytes: &[u8]) -> Result<GaussianScene> {
    let header_end = find_header_end(bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| Error::PlyMalformed {
        what: "header is not valid ascii".to_string(),
    })?;
    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::PlyMalformed {
            what: "missing 'ply' magic line".to_string(),
        });
    }

    let mut vertex_count: Option<usize> = None;
    let mut properties: Vec<String> = Vec::new();
    let mut format_seen = false;
    let mut in_vertex_element = false;
    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with("comment") {
            continue;
        }
        if line == "end_header" {
            break;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("format") => {
                let found = parts.next().unwrap_or("").to_string();
                if found != "binary_little_endian" {
                    return Err(Error::PlyNotBinaryLittleEndian { found });
                }
                format_seen = true;
            }
            Some("element") => {
                let name = parts.next().unwrap_or("");
                if name == "vertex" {
                    if vertex_count.is_some() {
                        return Err(Error::PlyMalformed {
                            what: "duplicate vertex element".to_string(),
                        });
                    }
                    let count = parts.next().and_then(|c| c.parse::<usize>().ok()).ok_or(
                        Error::PlyMalformed {
                            what: "vertex element is missing a count".to_string(),
                        },
                    )?;
                    vertex_count = Some(count);
                    in_vertex_element = true;
                } else {
                    return Err(Error::PlyMalformed {
                        what: format!("unsupported element '{name}'; only vertex is accepted"),
                    });
                }
            }
            Some("property") => {
                if !in_vertex_element {
                    return Err(Error::PlyMalformed {
                        what: "property before any element".to_string(),
                    });
                }
                let ty = parts.next().unwrap_or("");
                if ty != "float" {
                    return Err(Error::PlyMalformed {
                        what: format!("unsupported property type '{ty}'; need float"),
                    });
                }
                let name = parts.next().ok_or(Error::PlyMalformed {
                    what: "property without a name".to_string(),
                })?;
                properties.push(name.to_string());
            }
            Some(other) => {
                return Err(Error::PlyMalformed {
                    what: format!("unrecognized header line '{other}'"),
                });
            }
            None => {}
        }
    }
    if !format_seen {
        return Err(Error::PlyMalformed {
            what: "missing format line".to_string(),
        });
    }
    let vertex_count = vertex_count.ok_or(Error::PlyMalformed {
        what: "missing vertex element".to_string(),
    })?;

    let mut offsets = [0usize; 14];
    for (slot, name) in REQUIRED.iter().enumerate() {
        match properties.iter().position(|p| p == name) {
            Some(i) => offsets[slot] = i,
            None => {
                return Err(Error::PlyMissingProperty {
                    name: name.to_string(),
                })
            }
        }
    }

    let stride = properties.len() * 4;
    let payload = &bytes[header_end..];
    let expected = vertex_count * stride;
    if payload.len() < expected {
        return Err(Error::PlyMalformed {
            what: format!(
                "truncated payload: expected {expected} bytes for {vertex_count} vertices, found {}",
                payload.len()
            ),
        });
    }

    let read_f32 = |vertex: usize, prop: usize| -> f64 {
        let at = vertex * stride + prop * 4;
        f32::from_le_bytes(payload[at..at + 4].try_into().unwrap()) as f64
    };

    let mut gaussians = Vec::with_capacity(vertex_count);
    for v in 0..vertex_count {
        let fields: Vec<f64> = offsets.iter().map(|&p| read_f32(v, p)).collect();
        if let Some(bad) = fields.iter().position(|f| !f.is_finite()) {
            return Err(Error::PlyMalformed {
                what: format!(
                    "non-finite value in property '{}' of vertex {v}",
                    REQUIRED[bad]
                ),
            });
        }
        // Normalize, but keep f32-exact values that are already unit within
        // the 1e-7 contract: renormalizing them would drift the low bit and
        // break byte-identical round trips.
        let raw_rot = [fields[10], fields[11], fields[12], fields[13]];
        let norm = raw_rot.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rotation = if (norm - 1.0).abs() <= 1e-7 {
            raw_rot
        } else {
            normalize_quaternion(raw_rot).map_err(|_| Error::PlyMalformed {
                what: format!("zero-norm rotation at vertex {v}"),
            })?
        };
        gaussians.push(Gaussian3D {
            position: Vector3::new(fields[0], fields[1], fields[2]),
            color: Vector3::new(
                (fields[3] * SH_C0 + 0.5).clamp(0.0, 1.0),
                (fields[4] * SH_C0 + 0.5).clamp(0.0, 1.0),
                (fields[5] * SH_C0 + 0.5).clamp(0.0, 1.0),
            ),
            opacity_logit: fields[6],
            log_scale: Vector3::new(fields[7], fields[8], fields[9]),
            rotation,
        });
    }
    Ok(GaussianScene::new(gaussians))
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    let needle = b"end_header\n";
    bytes
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + needle.len())
        .ok_or(Error::PlyMalformed {
            what: "missing end_header".to_string(),
        })
}

/// Serializes the scene in the minimal 14-property layout; byte output is a
/// pure function of the scene.
pub fn save_ply(scene: &GaussianScene, path: &Path) -> Result<()> {
    let bytes = encode_ply(scene);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub(crate) fn encode_ply(scene: &GaussianScene) -> Vec<u8> {
    let mut out = Vec::with_capacity(256 + scene.len() * 14 * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", scene.len()).as_bytes());
    for name in REQUIRED {
        out.extend_from_slice(format!("property float {name}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");
    for g in &scene.gaussians {
        let mut push = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        push(g.position.x);
        push(g.position.y);
        push(g.position.z);
        push((g.color.x - 0.5) / SH_C0);
        push((g.color.y - 0.5) / SH_C0);
        push((g.color.z - 0.5) / SH_C0);
        push(g.opacity_logit);
        push(g.log_scale.x);
        push(g.log_scale.y);
        push(g.log_scale.z);
        push(g.rotation[0]);
        push(g.rotation[1]);
        push(g.rotation[2]);
        push(g.rotation[3]);
    }
    out
}
