//! Small encoded images for tests.

use std::io::Cursor;

use image::{DynamicImage, ImageFormat, Rgb, RgbImage};
use rand::Rng;

/// A smooth gradient, distinct per `(w, h, tint)`.
pub fn gradient(w: u32, h: u32, tint: u8) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| {
        Rgb([
            (x * 255 / w.max(1)) as u8,
            (y * 255 / h.max(1)) as u8,
            tint,
        ])
    })
}

fn encode(img: RgbImage, format: ImageFormat) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    DynamicImage::ImageRgb8(img)
        .write_to(&mut out, format)
        .expect("encode fixture");
    out.into_inner()
}

pub fn png(w: u32, h: u32) -> Vec<u8> {
    encode(gradient(w, h, 90), ImageFormat::Png)
}

pub fn jpeg(w: u32, h: u32) -> Vec<u8> {
    encode(gradient(w, h, 160), ImageFormat::Jpeg)
}

/// Decodes PNG or JPEG bytes to RGB.
pub fn decode_rgb(bytes: &[u8]) -> RgbImage {
    image::load_from_memory(bytes).expect("decode image").to_rgb8()
}

/// Log-uniform integer in `[min, max]`.
pub fn log_uniform(rng: &mut impl Rng, min: usize, max: usize) -> usize {
    let (lo, hi) = ((min as f64).ln(), (max as f64).ln());
    (rng.random_range(lo..=hi).exp().round() as usize).clamp(min, max)
}
