//! Code 39 barcodes and ID-card rendering.

pub mod card;
pub mod code39;
pub mod layout;
pub mod text;

pub use card::{barcode_module_width, render_card, render_cards, CardError};
pub use code39::{
    check_character, encode_code39, encode_code39_with_check, render_barcode, scanline,
    BarcodeError, BarcodeSymbol, Module, ModuleKind,
};
pub use layout::{CardLayout, LayoutError, TextSlot};
