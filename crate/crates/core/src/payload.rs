//! Synthetic PNG and JPEG files of an exact byte size.
//!
//! A fixed 8x8 noise image is encoded normally, then padded with ancillary
//! data the decoders skip: a private `prVt` chunk for PNG, `COM` segments
//! for JPEG. The result decodes fully and its size is exact.

use image::{Rgba, RgbaImage};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{self, ImageBlob, ImageError, ImageFormat};

const BASE_SIDE: u32 = 8;
const PNG_CHUNK_OVERHEAD: usize = 12;
const PNG_PAD_TYPE: &[u8; 4] = b"prVt";
const JPEG_SEGMENT_OVERHEAD: usize = 4;
const JPEG_SEGMENT_MAX: usize = 0xFFFF - 2 + JPEG_SEGMENT_OVERHEAD;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("requested {requested} bytes but a {format:?} payload needs at least {minimum}")]
    TooSmall {
        format: ImageFormat,
        requested: usize,
        minimum: usize,
    },
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// The same noise image for every seed, so the minimum size is fixed.
fn base_image(format: ImageFormat) -> Result<Vec<u8>, ImageError> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let img = RgbaImage::from_fn(BASE_SIDE, BASE_SIDE, |_, _| {
        let [r, g, b]: [u8; 3] = rng.random();
        Rgba([r, g, b, 255])
    });
    Ok(imaging::encode(&img, format)?.into_bytes())
}

/// Smallest payload `synthetic_image` can produce for `format`.
pub fn minimum_size(format: ImageFormat) -> usize {
    let base = base_image(format).map(|b| b.len()).unwrap_or(0);
    base + match format {
        ImageFormat::Png => PNG_CHUNK_OVERHEAD,
        ImageFormat::Jpeg => JPEG_SEGMENT_OVERHEAD,
    }
}

/// A decodable image of exactly `size_bytes`, determined by `seed`.
pub fn synthetic_image(
    format: ImageFormat,
    size_bytes: usize,
    seed: u64,
) -> Result<ImageBlob, PayloadError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = base_image(format)?;
    let overhead = match format {
        ImageFormat::Png => PNG_CHUNK_OVERHEAD,
        ImageFormat::Jpeg => JPEG_SEGMENT_OVERHEAD,
    };
    if size_bytes < base.len() + overhead {
        return Err(PayloadError::TooSmall {
            format,
            requested: size_bytes,
            minimum: base.len() + overhead,
        });
    }
    let pad = size_bytes - base.len();
    let bytes = match format {
        ImageFormat::Png => pad_png(&base, pad, &mut rng),
        ImageFormat::Jpeg => pad_jpeg(&base, pad, &mut rng),
    };
    debug_assert_eq!(bytes.len(), size_bytes);
    Ok(ImageBlob::probe(bytes)?)
}

/// Inserts one private chunk of `pad` total bytes before `IEND`.
fn pad_png(base: &[u8], pad: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let iend = base.len() - PNG_CHUNK_OVERHEAD;
    let data_len = pad - PNG_CHUNK_OVERHEAD;
    let mut out = Vec::with_capacity(base.len() + pad);
    out.extend_from_slice(&base[..iend]);
    out.extend_from_slice(&(data_len as u32).to_be_bytes());
    let type_at = out.len();
    out.extend_from_slice(PNG_PAD_TYPE);
    let data_at = out.len();
    out.resize(data_at + data_len, 0);
    rng.fill_bytes(&mut out[data_at..]);
    let crc = crc32fast::hash(&out[type_at..]);
    out.extend_from_slice(&crc.to_be_bytes());
    out.extend_from_slice(&base[iend..]);
    out
}

/// Inserts `COM` segments totalling `pad` bytes right after `SOI`.
fn pad_jpeg(base: &[u8], mut pad: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(base.len() + pad);
    out.extend_from_slice(&base[..2]);
    while pad > 0 {
        let mut seg = pad.min(JPEG_SEGMENT_MAX);
        let rest = pad - seg;
        if rest > 0 && rest < JPEG_SEGMENT_OVERHEAD {
            seg -= JPEG_SEGMENT_OVERHEAD - rest;
        }
        let data_len = seg - JPEG_SEGMENT_OVERHEAD;
        out.extend_from_slice(&[0xFF, 0xFE]);
        out.extend_from_slice(&((data_len + 2) as u16).to_be_bytes());
        let at = out.len();
        out.resize(at + data_len, 0);
        rng.fill_bytes(&mut out[at..]);
        pad -= seg;
    }
    out.extend_from_slice(&base[2..]);
    out
}
