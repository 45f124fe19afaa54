//! Fixed 8x8 bitmap text, scaled by whole pixels.

use font8x8::legacy::BASIC_LEGACY;
use image::{Rgba, RgbaImage};

pub const GLYPH_PX: u32 = 8;

/// Integer glyph scale for `font_size_pt` at `dpi`.
pub fn scale_for(font_size_pt: u32, dpi: u32) -> u32 {
    let px = font_size_pt as f64 * dpi as f64 / 72.0;
    ((px / GLYPH_PX as f64).round() as u32).max(1)
}

fn glyph(c: char) -> [u8; 8] {
    let code = if c.is_ascii() && !c.is_ascii_control() { c as usize } else { '?' as usize };
    BASIC_LEGACY[code]
}

/// Width in pixels of `text` at `scale`.
pub fn text_width(text: &str, scale: u32) -> u32 {
    text.chars().count() as u32 * GLYPH_PX * scale
}

/// Draws `text` with its top-left corner at `(x, y)`, clipped to
/// `max_x` (exclusive) and the canvas. Whole glyphs only.
pub fn draw_text(
    canvas: &mut RgbaImage,
    text: &str,
    x: u32,
    y: u32,
    scale: u32,
    max_x: u32,
    color: Rgba<u8>,
) {
    let cell = GLYPH_PX * scale;
    let max_x = max_x.min(canvas.width());
    for (i, c) in text.chars().enumerate() {
        let gx = x + i as u32 * cell;
        if gx + cell > max_x {
            break;
        }
        for (row, bits) in glyph(c).iter().enumerate() {
            for col in 0..GLYPH_PX {
                if bits & (1 << col) == 0 {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let px = gx + col * scale + dx;
                        let py = y + row as u32 * scale + dy;
                        if px < canvas.width() && py < canvas.height() {
                            canvas.put_pixel(px, py, color);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_rounds_to_whole_pixels() {
        assert_eq!(scale_for(6, 300), 3);
        assert_eq!(scale_for(4, 300), 2);
        assert_eq!(scale_for(1, 72), 1);
    }

    #[test]
    fn draws_inside_clip_only() {
        let mut img = RgbaImage::from_pixel(40, 10, Rgba([255; 4]));
        draw_text(&mut img, "HHHHHH", 0, 0, 1, 20, Rgba([0, 0, 0, 255]));
        // only two glyphs fit before x=20
        assert!((20..40).all(|x| (0..8).all(|y| img.get_pixel(x, y).0 == [255; 4])));
        assert!((0..16).any(|x| img.get_pixel(x, 3).0 == [0, 0, 0, 255]));
    }
}
