//! 8-bit PNG to unit-range float buffers and back.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::ImageBuffer;

/// Loads an 8-bit PNG as a 3-channel buffer with values divided by 255.
pub fn load_png(path: &Path) -> Result<ImageBuffer> {
    let img = image::open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.as_raw().iter().map(|&v| v as f64 / 255.0).collect();
    ImageBuffer::from_vec(w, h, 3, data)
}

pub(crate) fn image_to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Quantizes a 3-channel buffer to 8-bit RGB.
pub fn image_to_rgb8(img: &ImageBuffer) -> Result<image::RgbImage> {
    if img.channels != 3 {
        return Err(Error::DimensionMismatch {
            context: "image_to_rgb8",
            expected_w: img.width,
            expected_h: img.height,
            expected_c: 3,
            got_w: img.width,
            got_h: img.height,
            got_c: img.channels,
        });
    }
    let raw: Vec<u8> = img.data.iter().map(|&v| image_to_u8(v)).collect();
    Ok(image::RgbImage::from_raw(img.width as u32, img.height as u32, raw).unwrap())
}

/// Saves a 3-channel buffer as RGB8 or a 1-channel buffer as grayscale.
pub fn save_png(img: &ImageBuffer, path: &Path) -> Result<()> {
    match img.channels {
        3 => image_to_rgb8(img)?.save(path)?,
        1 => {
            let raw: Vec<u8> = img.data.iter().map(|&v| image_to_u8(v)).collect();
            image::GrayImage::from_raw(img.width as u32, img.height as u32, raw)
                .unwrap()
                .save(path)?;
        }
        c => {
            return Err(Error::DimensionMismatch {
                context: "save_png",
                expected_w: img.width,
                expected_h: img.height,
                expected_c: 3,
                got_w: img.width,
                got_h: img.height,
                got_c: c,
            })
        }
    }
    Ok(())
}
