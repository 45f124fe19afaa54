//! Image validation, auto-crop and resize.
//!
//! Only PNG and JPEG are accepted. Pixel work happens on RGBA rasters; the
//! output of [`crop`] and [`resize`] is re-encoded in the input's format.

use std::fmt;
use std::io::Cursor;
use std::str::FromStr;

use image::codecs::jpeg::JpegEncoder;
use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageReader, RgbaImage};
use serde::{Deserialize, Serialize};

use crate::par::{self, Mode};

pub const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";
pub const JPEG_MAGIC: &[u8] = &[0xFF, 0xD8, 0xFF];
pub const MAX_RESIZE_DIM: u32 = 4096;
pub const JPEG_QUALITY: u8 = 90;

/// Badge photo aspect (width:height).
pub const BADGE_ASPECT: Aspect = Aspect { w: 3, h: 4 };
pub const BADGE_WIDTH: u32 = 300;
pub const BADGE_HEIGHT: u32 = 400;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImageError {
    #[error("invalid image: empty payload")]
    Empty,
    #[error("unsupported format")]
    UnsupportedFormat,
    #[error("corrupt stream: {0}")]
    Corrupt(String),
    #[error("zero-dimension image")]
    ZeroDimension,
    #[error("crop box {bx} exceeds image bounds {width}x{height}")]
    OutOfBounds { bx: CropBox, width: u32, height: u32 },
    #[error("bad target dimensions {width}x{height} (each must be in 1..={MAX_RESIZE_DIM})")]
    BadDimensions { width: u32, height: u32 },
    #[error("encode failed: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageFormat {
    Png,
    Jpeg,
}

impl ImageFormat {
    pub fn sniff(bytes: &[u8]) -> Option<Self> {
        if bytes.starts_with(PNG_MAGIC) {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(JPEG_MAGIC) {
            Some(ImageFormat::Jpeg)
        } else {
            None
        }
    }

    pub fn mime(self) -> &'static str {
        match self {
            ImageFormat::Png => "image/png",
            ImageFormat::Jpeg => "image/jpeg",
        }
    }

    fn codec(self) -> image::ImageFormat {
        match self {
            ImageFormat::Png => image::ImageFormat::Png,
            ImageFormat::Jpeg => image::ImageFormat::Jpeg,
        }
    }
}

/// Encoded image bytes whose format and header dimensions have been checked.
///
/// Construct with [`ImageBlob::probe`] (header only) or [`decode`] (full
/// decode).
#[derive(Clone, PartialEq, Eq)]
pub struct ImageBlob {
    bytes: Vec<u8>,
    format: ImageFormat,
    width: u32,
    height: u32,
}

impl fmt::Debug for ImageBlob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ImageBlob")
            .field("len", &self.bytes.len())
            .field("format", &self.format)
            .field("width", &self.width)
            .field("height", &self.height)
            .finish()
    }
}

impl ImageBlob {
    /// Checks magic bytes and reads the header dimensions without decoding
    /// pixel data.
    pub fn probe(bytes: Vec<u8>) -> Result<Self, ImageError> {
        if bytes.is_empty() {
            return Err(ImageError::Empty);
        }
        let format = ImageFormat::sniff(&bytes).ok_or(ImageError::UnsupportedFormat)?;
        let (width, height) = ImageReader::with_format(Cursor::new(&bytes), format.codec())
            .into_dimensions()
            .map_err(|e| ImageError::Corrupt(e.to_string()))?;
        if width == 0 || height == 0 {
            return Err(ImageError::ZeroDimension);
        }
        Ok(Self {
            bytes,
            format,
            width,
            height,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn format(&self) -> ImageFormat {
        self.format
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }
}

/// Fully decodes `bytes`, rejecting truncated or corrupt streams.
pub fn decode(bytes: Vec<u8>) -> Result<ImageBlob, ImageError> {
    let blob = ImageBlob::probe(bytes)?;
    to_rgba(&blob)?;
    Ok(blob)
}

pub fn to_rgba(blob: &ImageBlob) -> Result<RgbaImage, ImageError> {
    let img = ImageReader::with_format(Cursor::new(blob.bytes()), blob.format().codec())
        .decode()
        .map_err(|e| ImageError::Corrupt(e.to_string()))?;
    Ok(img.into_rgba8())
}

pub fn encode(raster: &RgbaImage, format: ImageFormat) -> Result<ImageBlob, ImageError> {
    let (width, height) = raster.dimensions();
    if width == 0 || height == 0 {
        return Err(ImageError::ZeroDimension);
    }
    let mut out = Vec::new();
    let res = match format {
        ImageFormat::Png => PngEncoder::new(&mut out).write_image(
            raster.as_raw(),
            width,
            height,
            ExtendedColorType::Rgba8,
        ),
        ImageFormat::Jpeg => {
            let rgb: Vec<u8> = raster
                .as_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect();
            JpegEncoder::new_with_quality(&mut out, JPEG_QUALITY).write_image(
                &rgb,
                width,
                height,
                ExtendedColorType::Rgb8,
            )
        }
    };
    res.map_err(|e| ImageError::Encode(e.to_string()))?;
    Ok(ImageBlob {
        bytes: out,
        format,
        width,
        height,
    })
}

/// Width:height ratio with both terms positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Aspect {
    pub w: u32,
    pub h: u32,
}

impl Aspect {
    pub fn new(w: u32, h: u32) -> Option<Self> {
        (w > 0 && h > 0).then_some(Self { w, h })
    }

    pub fn inverted(self) -> Self {
        Self { w: self.h, h: self.w }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.w, self.h)
    }
}

impl FromStr for Aspect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s.split_once(':').ok_or_else(|| format!("aspect {s:?} is not w:h"))?;
        let w = w.trim().parse().map_err(|_| format!("bad aspect width in {s:?}"))?;
        let h = h.trim().parse().map_err(|_| format!("bad aspect height in {s:?}"))?;
        Aspect::new(w, h).ok_or_else(|| format!("aspect terms must be positive in {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl CropBox {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Self {
            x,
            y,
            width,
            height,
        }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.width as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.height as u64
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.width > 0
            && self.height > 0
            && self.right() <= width as u64
            && self.bottom() <= height as u64
    }

    pub fn overlaps(&self, other: &CropBox) -> bool {
        (self.x as u64) < other.right()
            && (other.x as u64) < self.right()
            && (self.y as u64) < other.bottom()
            && (other.y as u64) < self.bottom()
    }

    pub fn transposed(&self) -> Self {
        Self::new(self.y, self.x, self.height, self.width)
    }
}

impl fmt::Display for CropBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.width, self.height, self.x, self.y)
    }
}

/// Largest centered box of `aspect` that fits in `width` x `height`.
///
/// One side of the box is derived from the other by rounding the exact
/// aspect-matching length down to a whole pixel; the candidate with the
/// larger area wins, with ties going to the more square box. Offsets round
/// down. Boxes never collapse below 1x1.
pub fn auto_crop_box(width: u32, height: u32, aspect: Aspect) -> CropBox {
    let (w, h) = (width as u64, height as u64);
    let (aw, ah) = (aspect.w as u64, aspect.h as u64);

    // Width derived from height: floor(bh*aw/ah) <= w  <=>  bh*aw < (w+1)*ah
    let bh1 = h.min(((w + 1) * ah - 1) / aw);
    let cand1 = (bh1 * aw / ah, bh1);
    // Height derived from width.
    let bw2 = w.min(((h + 1) * aw - 1) / ah);
    let cand2 = (bw2, bw2 * ah / aw);

    let err = |(bw, bh): (u64, u64)| (bw * ah).abs_diff(bh * aw);
    let key = |c: (u64, u64)| (std::cmp::Reverse(c.0 * c.1), err(c), c.0 + c.1);
    let (bw, bh) = if key(cand2) < key(cand1) { cand2 } else { cand1 };
    let (bw, bh) = (bw.clamp(1, w.max(1)), bh.clamp(1, h.max(1)));

    CropBox::new(
        ((w - bw.min(w)) / 2) as u32,
        ((h - bh.min(h)) / 2) as u32,
        bw as u32,
        bh as u32,
    )
}

pub(crate) fn crop_raster(src: &RgbaImage, bx: CropBox) -> Result<RgbaImage, ImageError> {
    let (sw, sh) = src.dimensions();
    if !bx.fits_within(sw, sh) {
        return Err(ImageError::OutOfBounds {
            bx,
            width: sw,
            height: sh,
        });
    }
    let src_row = sw as usize * 4;
    let out_row = bx.width as usize * 4;
    let mut out = vec![0u8; out_row * bx.height as usize];
    let raw = src.as_raw();
    for (y, row) in out.chunks_exact_mut(out_row).enumerate() {
        let start = (bx.y as usize + y) * src_row + bx.x as usize * 4;
        row.copy_from_slice(&raw[start..start + out_row]);
    }
    Ok(RgbaImage::from_raw(bx.width, bx.height, out).expect("buffer sized to box"))
}

/// Bilinear resample; pixel centers are aligned, edges clamp.
pub fn resize_raster(
    src: &RgbaImage,
    width: u32,
    height: u32,
    mode: Mode,
) -> Result<RgbaImage, ImageError> {
    if width == 0 || height == 0 || width > MAX_RESIZE_DIM || height > MAX_RESIZE_DIM {
        return Err(ImageError::BadDimensions { width, height });
    }
    let (sw, sh) = src.dimensions();
    if (sw, sh) == (width, height) {
        return Ok(src.clone());
    }
    let taps = |dst: u32, srcn: u32| -> Vec<(usize, usize, f32)> {
        let scale = srcn as f32 / dst as f32;
        (0..dst)
            .map(|i| {
                let pos = ((i as f32 + 0.5) * scale - 0.5).clamp(0.0, (srcn - 1) as f32);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(srcn as usize - 1);
                (lo, hi, pos - lo as f32)
            })
            .collect()
    };
    let xs = taps(width, sw);
    let ys = taps(height, sh);
    let raw = src.as_raw();
    let stride = sw as usize * 4;
    let mut out = vec![0u8; width as usize * height as usize * 4];
    par::for_each_row(mode, &mut out, width as usize * 4, |y, row| {
        let (y0, y1, fy) = ys[y];
        for (x, px) in row.chunks_exact_mut(4).enumerate() {
            let (x0, x1, fx) = xs[x];
            for c in 0..4 {
                let at = |yy: usize, xx: usize| raw[yy * stride + xx * 4 + c] as f32;
                let top = at(y0, x0) + (at(y0, x1) - at(y0, x0)) * fx;
                let bot = at(y1, x0) + (at(y1, x1) - at(y1, x0)) * fx;
                px[c] = (top + (bot - top) * fy).round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    Ok(RgbaImage::from_raw(width, height, out).expect("buffer sized to target"))
}

/// Exact sub-rectangle copy; format preserved.
pub fn crop(blob: &ImageBlob, bx: CropBox) -> Result<ImageBlob, ImageError> {
    if !bx.fits_within(blob.width(), blob.height()) {
        return Err(ImageError::OutOfBounds {
            bx,
            width: blob.width(),
            height: blob.height(),
        });
    }
    encode(&crop_raster(&to_rgba(blob)?, bx)?, blob.format())
}

pub fn resize(blob: &ImageBlob, width: u32, height: u32) -> Result<ImageBlob, ImageError> {
    if width == 0 || height == 0 || width > MAX_RESIZE_DIM || height > MAX_RESIZE_DIM {
        return Err(ImageError::BadDimensions { width, height });
    }
    let raster = resize_raster(&to_rgba(blob)?, width, height, Mode::default())?;
    encode(&raster, blob.format())
}

/// decode -> crop (explicit box or centered 3:4) -> resize to 300x400 -> PNG.
pub fn normalize_badge_photo(
    bytes: Vec<u8>,
    bx: Option<CropBox>,
) -> Result<ImageBlob, ImageError> {
    let blob = ImageBlob::probe(bytes)?;
    let raster = to_rgba(&blob)?;
    let bx = bx.unwrap_or_else(|| auto_crop_box(blob.width(), blob.height(), BADGE_ASPECT));
    let cropped = crop_raster(&raster, bx)?;
    let resized = resize_raster(&cropped, BADGE_WIDTH, BADGE_HEIGHT, Mode::default())?;
    encode(&resized, ImageFormat::Png)
}
