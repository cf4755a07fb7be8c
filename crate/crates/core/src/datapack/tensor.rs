//! `DPZ1` raw tensor files: 4-byte magic, height, width and channel count as little-endian
//! `u32`, then `h * w * c` little-endian `f32` values, row-major and channel-last.

use crate::patch::{DepthPatch, ForegroundMask};

use super::FormatError;

pub const MAGIC: [u8; 4] = *b"DPZ1";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub height: u32,
    pub width: u32,
    pub channels: u32,
    pub data: Vec<f32>,
}

fn payload_len(height: u32, width: u32, channels: u32) -> Option<usize> {
    (height as usize)
        .checked_mul(width as usize)?
        .checked_mul(channels as usize)?
        .checked_mul(4)
}

impl Tensor {
    pub fn new(height: u32, width: u32, channels: u32, data: Vec<f32>) -> Result<Self, FormatError> {
        let expected = payload_len(height, width, channels).ok_or(FormatError::TooLarge)? / 4;
        if data.len() != expected {
            return Err(FormatError::ShapeMismatch {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.data.len() * 4
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        for v in [self.height, self.width, self.channels] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FormatError> {
        if bytes.len() < MAGIC.len() {
            return Err(FormatError::Truncated {
                offset: bytes.len(),
                expected: HEADER_LEN,
            });
        }
        if bytes[..4] != MAGIC {
            let mut found = [0u8; 4];
            found.copy_from_slice(&bytes[..4]);
            return Err(FormatError::UnsupportedMagic(found));
        }
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::Truncated {
                offset: bytes.len(),
                expected: HEADER_LEN,
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let (height, width, channels) = (word(4), word(8), word(12));
        let total = payload_len(height, width, channels)
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or(FormatError::TooLarge)?;
        if bytes.len() < total {
            return Err(FormatError::Truncated {
                offset: bytes.len(),
                expected: total,
            });
        }
        if bytes.len() > total {
            return Err(FormatError::TrailingBytes { offset: total });
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }
}

fn dims(width: usize, height: usize) -> Result<(u32, u32), FormatError> {
    Ok((
        u32::try_from(height).map_err(|_| FormatError::TooLarge)?,
        u32::try_from(width).map_err(|_| FormatError::TooLarge)?,
    ))
}

/// Encodes a patch as an `h x w x 1` tensor.
pub fn write_tensor(patch: &DepthPatch<f32>) -> Result<Vec<u8>, FormatError> {
    let (h, w) = dims(patch.width, patch.height)?;
    let data = patch.values.clone();
    Ok(Tensor::new(h, w, 1, data)?.encode())
}

pub fn read_tensor(bytes: &[u8]) -> Result<DepthPatch<f32>, FormatError> {
    let t = Tensor::decode(bytes)?;
    if t.channels != 1 {
        return Err(FormatError::Channels(t.channels));
    }
    Ok(DepthPatch::from_values(t.width as usize, t.height as usize, t.data))
}

/// Encodes a mask as an `h x w x 1` tensor of 0.0 / 1.0.
pub fn write_mask(mask: &ForegroundMask) -> Result<Vec<u8>, FormatError> {
    write_tensor(&mask.to_patch())
}

pub fn read_mask(bytes: &[u8]) -> Result<ForegroundMask, FormatError> {
    let patch = read_tensor(bytes)?;
    let mut values = Vec::with_capacity(patch.values.len());
    for (i, &v) in patch.values.iter().enumerate() {
        if v == 0.0 {
            values.push(0);
        } else if v == 1.0 {
            values.push(1);
        } else {
            return Err(FormatError::NotAMask {
                offset: HEADER_LEN + 4 * i,
                value: v,
            });
        }
    }
    Ok(ForegroundMask {
        width: patch.width,
        height: patch.height,
        values,
    })
}
