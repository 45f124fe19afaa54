//! ID-card rasterization.

use image::{imageops, Rgba, RgbaImage};

use super::code39::{encode_code39, scanline, BarcodeError, MIN_MODULE_WIDTH_PX};
use super::layout::{CardLayout, LayoutError};
use super::text::{draw_text, scale_for, text_width, GLYPH_PX};
use crate::imaging::{self, auto_crop_box, Aspect, CropBox, ImageBlob, ImageError, ImageFormat};
use crate::par::{self, Mode};
use crate::records::Record;

const BACKGROUND: Rgba<u8> = Rgba([255, 255, 255, 255]);
const INK: Rgba<u8> = Rgba([0, 0, 0, 255]);
const BORDER: Rgba<u8> = Rgba([40, 40, 40, 255]);
const PLACEHOLDER_BG: Rgba<u8> = Rgba([220, 220, 220, 255]);
const PLACEHOLDER_FG: Rgba<u8> = Rgba([150, 150, 150, 255]);
const CAPTION_SCALE: u32 = 2;
const CAPTION_GAP: u32 = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CardError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("record has no field {0:?}")]
    MissingField(String),
    #[error("barcode for {text:?} does not fit a {slot_width}px slot")]
    BarcodeTooWide { text: String, slot_width: u32 },
    #[error(transparent)]
    Barcode(#[from] BarcodeError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Renders the card for `record` as a PNG. Output is deterministic for a
/// given record, photo and layout.
pub fn render_card<R: Record>(
    record: &R,
    photo: Option<&ImageBlob>,
    layout: &CardLayout,
) -> Result<ImageBlob, CardError> {
    layout.validate()?;
    let mut card = RgbaImage::from_pixel(layout.card_width, layout.card_height, BACKGROUND);
    draw_border(&mut card);

    let slot = layout.photo_slot;
    let face = match photo {
        Some(blob) => fit_photo(blob, slot)?,
        None => placeholder(slot.width, slot.height),
    };
    imageops::replace(&mut card, &face, slot.x as i64, slot.y as i64);

    for s in &layout.text_slots {
        let value = record
            .card_field(&s.field)
            .ok_or_else(|| CardError::MissingField(s.field.clone()))?;
        let line = match &s.label {
            Some(label) => format!("{label}: {value}"),
            None => value,
        };
        let scale = scale_for(s.font_size_pt, layout.dpi);
        draw_text(&mut card, &line, s.x, s.y, scale, layout.card_width, INK);
    }

    draw_barcode(&mut card, &record.id().to_string(), layout.barcode_slot)?;
    Ok(imaging::encode(&card, ImageFormat::Png)?)
}

/// Renders many cards; `Mode` selects sequential or data-parallel work.
pub fn render_cards<R: Record>(
    items: &[(R, Option<ImageBlob>)],
    layout: &CardLayout,
    mode: Mode,
) -> Vec<Result<ImageBlob, CardError>> {
    par::map(mode, items, |(rec, photo)| render_card(rec, photo.as_ref(), layout))
}

/// Largest module width (at least the minimum) whose symbol fits `slot_width`.
pub fn barcode_module_width(text: &str, slot_width: u32) -> Result<u32, CardError> {
    let symbol = encode_code39(text)?;
    let mw = slot_width / symbol.pixel_width(1);
    if mw < MIN_MODULE_WIDTH_PX {
        return Err(CardError::BarcodeTooWide {
            text: text.to_owned(),
            slot_width,
        });
    }
    Ok(mw)
}

fn draw_border(card: &mut RgbaImage) {
    let (w, h) = card.dimensions();
    for x in 0..w {
        card.put_pixel(x, 0, BORDER);
        card.put_pixel(x, h - 1, BORDER);
    }
    for y in 0..h {
        card.put_pixel(0, y, BORDER);
        card.put_pixel(w - 1, y, BORDER);
    }
}

fn fit_photo(blob: &ImageBlob, slot: CropBox) -> Result<RgbaImage, ImageError> {
    let raster = imaging::to_rgba(blob)?;
    let aspect = Aspect::new(slot.width, slot.height).ok_or(ImageError::BadDimensions {
        width: slot.width,
        height: slot.height,
    })?;
    let bx = auto_crop_box(raster.width(), raster.height(), aspect);
    let cropped = imageops::crop_imm(&raster, bx.x, bx.y, bx.width, bx.height).to_image();
    imaging::resize_raster(&cropped, slot.width, slot.height, Mode::Sequential)
}

/// Grey head-and-shoulders silhouette.
fn placeholder(w: u32, h: u32) -> RgbaImage {
    let (cx, head_cy, head_r) = (w as f64 / 2.0, h as f64 * 0.38, w as f64 * 0.22);
    let (body_cy, body_rx, body_ry) = (h as f64 * 1.0, w as f64 * 0.42, h as f64 * 0.36);
    RgbaImage::from_fn(w, h, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let in_head = (px - cx).powi(2) + (py - head_cy).powi(2) <= head_r * head_r;
        let in_body = ((px - cx) / body_rx).powi(2) + ((py - body_cy) / body_ry).powi(2) <= 1.0;
        if in_head || in_body {
            PLACEHOLDER_FG
        } else {
            PLACEHOLDER_BG
        }
    })
}

fn draw_barcode(card: &mut RgbaImage, text: &str, slot: CropBox) -> Result<(), CardError> {
    let mw = barcode_module_width(text, slot.width)?;
    let symbol = encode_code39(text)?;
    let row = scanline(&symbol, mw);
    let caption_h = GLYPH_PX * CAPTION_SCALE;
    let bar_h = slot.height.saturating_sub(caption_h + CAPTION_GAP).max(1);
    let x0 = slot.x + (slot.width - row.len() as u32) / 2;
    for (i, &dark) in row.iter().enumerate() {
        if dark {
            for y in slot.y..slot.y + bar_h {
                card.put_pixel(x0 + i as u32, y, INK);
            }
        }
    }
    let tw = text_width(text, CAPTION_SCALE);
    if bar_h + CAPTION_GAP + caption_h <= slot.height && tw <= slot.width {
        let tx = slot.x + (slot.width - tw) / 2;
        let ty = slot.y + bar_h + CAPTION_GAP;
        draw_text(card, text, tx, ty, CAPTION_SCALE, slot.x + slot.width, INK);
    }
    Ok(())
}
