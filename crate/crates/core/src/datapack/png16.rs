//! 16-bit grayscale PNG export for visual inspection.

use std::io::Cursor;

use crate::patch::DepthPatch;
use crate::scalar::Real;

use super::FormatError;

pub fn quantize(v: f64) -> u16 {
    (v * 65535.0).round() as u16
}

/// Encodes a `[0, 1]` patch; value `v` becomes `round(v * 65535)`.
pub fn export_png16<T: Real>(patch: &DepthPatch<T>) -> Result<Vec<u8>, FormatError> {
    let mut samples = Vec::with_capacity(patch.values.len() * 2);
    for (i, v) in patch.values.iter().enumerate() {
        let v = v.as_f64();
        if !(0.0..=1.0).contains(&v) {
            return Err(FormatError::OutOfRange { index: i, value: v });
        }
        samples.extend_from_slice(&quantize(v).to_be_bytes());
    }
    let width = u32::try_from(patch.width).map_err(|_| FormatError::TooLarge)?;
    let height = u32::try_from(patch.height).map_err(|_| FormatError::TooLarge)?;
    let mut out = Vec::new();
    let mut encoder = png::Encoder::new(&mut out, width, height);
    encoder.set_color(png::ColorType::Grayscale);
    encoder.set_depth(png::BitDepth::Sixteen);
    let mut writer = encoder.write_header().map_err(|e| FormatError::Png(e.to_string()))?;
    writer
        .write_image_data(&samples)
        .map_err(|e| FormatError::Png(e.to_string()))?;
    writer.finish().map_err(|e| FormatError::Png(e.to_string()))?;
    Ok(out)
}

/// Decodes a 16-bit grayscale PNG back to `[0, 1]` values.
pub fn import_png16(bytes: &[u8]) -> Result<DepthPatch<f32>, FormatError> {
    let png_err = |e: png::DecodingError| FormatError::Png(e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| FormatError::Png("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(png_err)?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(FormatError::Png(format!(
            "expected 16-bit grayscale, found {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let values = buf[..info.buffer_size()]
        .chunks_exact(2)
        .map(|c| f32::from(u16::from_be_bytes([c[0], c[1]])) / 65535.0)
        .collect();
    Ok(DepthPatch::from_values(w, h, values))
}
