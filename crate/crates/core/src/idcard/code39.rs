//! Code 39 encoding and rasterization.
//!
//! Each character is nine elements (five bars, four spaces), three of them
//! wide. Wide elements are two units, narrow ones one unit, and characters
//! are separated by a one-unit space. The symbol is framed by `*`.
//!
//! The table is built from the symbology's structure rather than listed:
//! the bar pattern is one of ten 2-of-5 codes, and the position of the
//! single wide space selects one of four groups of ten characters. The
//! four characters `$ / + %` have narrow bars and three wide spaces.

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, GrayImage, ImageEncoder, Luma};

use crate::imaging::{ImageBlob, ImageError};

pub const MAX_TEXT_LEN: usize = 32;
pub const QUIET_ZONE_MODULES: u32 = 10;
pub const MIN_MODULE_WIDTH_PX: u32 = 2;
pub const START_STOP: char = '*';

const BAR_CODES: [[u8; 5]; 10] = [
    [1, 0, 0, 0, 1],
    [0, 1, 0, 0, 1],
    [1, 1, 0, 0, 0],
    [0, 0, 1, 0, 1],
    [1, 0, 1, 0, 0],
    [0, 1, 1, 0, 0],
    [0, 0, 0, 1, 1],
    [1, 0, 0, 1, 0],
    [0, 1, 0, 1, 0],
    [0, 0, 1, 1, 0],
];

/// Characters in 2-of-5 order, grouped by the index of the wide space.
const GROUPS: [(usize, &str); 4] = [
    (1, "1234567890"),
    (2, "ABCDEFGHIJ"),
    (3, "KLMNOPQRST"),
    (0, "UVWXYZ-. *"),
];

/// Narrow-bar characters and their narrow space index.
const WIDE_SPACE_CHARS: [(char, usize); 4] = [('$', 3), ('/', 2), ('+', 1), ('%', 0)];

/// Check-character values in mod-43 order.
const CHECK_ORDER: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ-. $/+%";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BarcodeError {
    #[error("empty text")]
    Empty,
    #[error("character outside alphabet: {0:?}")]
    OutsideAlphabet(char),
    #[error("text of {0} characters exceeds {MAX_TEXT_LEN}")]
    TooLong(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModuleKind {
    Bar,
    Space,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Module {
    pub kind: ModuleKind,
    /// 1 (narrow) or 2 (wide) units.
    pub width: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarcodeSymbol {
    text: String,
    modules: Vec<Module>,
}

impl BarcodeSymbol {
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn modules(&self) -> &[Module] {
        &self.modules
    }

    pub fn total_units(&self) -> u32 {
        self.modules.iter().map(|m| m.width as u32).sum()
    }

    /// Image width in pixels at `module_width_px`, quiet zones included.
    pub fn pixel_width(&self, module_width_px: u32) -> u32 {
        (self.total_units() + 2 * QUIET_ZONE_MODULES) * module_width_px
    }
}

/// The nine wide(1)/narrow(0) flags of `c`, bars and spaces alternating.
fn pattern(c: char) -> Option<[u8; 9]> {
    let (bars, spaces) = if let Some(&(_, narrow)) = WIDE_SPACE_CHARS.iter().find(|(ch, _)| *ch == c) {
        let mut spaces = [1u8; 4];
        spaces[narrow] = 0;
        ([0u8; 5], spaces)
    } else {
        let (wide_space, index) = GROUPS
            .iter()
            .find_map(|(ws, chars)| chars.find(c).map(|i| (*ws, i)))?;
        let mut spaces = [0u8; 4];
        spaces[wide_space] = 1;
        (BAR_CODES[index], spaces)
    };
    let mut out = [0u8; 9];
    for i in 0..9 {
        out[i] = if i % 2 == 0 { bars[i / 2] } else { spaces[i / 2] };
    }
    Some(out)
}

pub fn is_encodable(c: char) -> bool {
    c != START_STOP && pattern(c).is_some()
}

fn push_char(modules: &mut Vec<Module>, c: char) {
    let p = pattern(c).expect("validated character");
    for (i, &wide) in p.iter().enumerate() {
        modules.push(Module {
            kind: if i % 2 == 0 { ModuleKind::Bar } else { ModuleKind::Space },
            width: 1 + wide,
        });
    }
}

fn check_text(text: &str) -> Result<(), BarcodeError> {
    if text.is_empty() {
        return Err(BarcodeError::Empty);
    }
    let len = text.chars().count();
    if len > MAX_TEXT_LEN {
        return Err(BarcodeError::TooLong(len));
    }
    match text.chars().find(|&c| !is_encodable(c)) {
        Some(c) => Err(BarcodeError::OutsideAlphabet(c)),
        None => Ok(()),
    }
}

fn build(text: &str, payload: &str) -> BarcodeSymbol {
    let mut modules = Vec::with_capacity((payload.len() + 2) * 10);
    let chars = std::iter::once(START_STOP)
        .chain(payload.chars())
        .chain(std::iter::once(START_STOP));
    for (i, c) in chars.enumerate() {
        if i > 0 {
            modules.push(Module {
                kind: ModuleKind::Space,
                width: 1,
            });
        }
        push_char(&mut modules, c);
    }
    BarcodeSymbol {
        text: text.to_owned(),
        modules,
    }
}

pub fn encode_code39(text: &str) -> Result<BarcodeSymbol, BarcodeError> {
    check_text(text)?;
    Ok(build(text, text))
}

/// Mod-43 check character for `text`.
pub fn check_character(text: &str) -> Result<char, BarcodeError> {
    check_text(text)?;
    let sum: usize = text
        .chars()
        .map(|c| CHECK_ORDER.find(c).expect("validated character"))
        .sum();
    Ok(CHECK_ORDER.as_bytes()[sum % 43] as char)
}

/// Like [`encode_code39`] with a trailing mod-43 check character.
pub fn encode_code39_with_check(text: &str) -> Result<BarcodeSymbol, BarcodeError> {
    let check = check_character(text)?;
    let payload = format!("{text}{check}");
    Ok(build(text, &payload))
}

/// One scanline: `true` for dark pixels, quiet zones included.
pub fn scanline(symbol: &BarcodeSymbol, module_width_px: u32) -> Vec<bool> {
    let quiet = (QUIET_ZONE_MODULES * module_width_px) as usize;
    let mut row = vec![false; quiet];
    for m in symbol.modules() {
        let n = (m.width as u32 * module_width_px) as usize;
        row.extend(std::iter::repeat_n(m.kind == ModuleKind::Bar, n));
    }
    row.extend(std::iter::repeat_n(false, quiet));
    row
}

/// Monochrome PNG of the symbol.
pub fn render_barcode(
    symbol: &BarcodeSymbol,
    module_width_px: u32,
    height_px: u32,
) -> Result<ImageBlob, ImageError> {
    if module_width_px < MIN_MODULE_WIDTH_PX || height_px == 0 {
        return Err(ImageError::BadDimensions {
            width: module_width_px,
            height: height_px,
        });
    }
    let row = scanline(symbol, module_width_px);
    let img = GrayImage::from_fn(row.len() as u32, height_px, |x, _| {
        Luma([if row[x as usize] { 0 } else { 255 }])
    });
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::L8)
        .map_err(|e| ImageError::Encode(e.to_string()))?;
    ImageBlob::probe(out)
}
