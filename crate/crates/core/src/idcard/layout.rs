//! Card geometry and its key-value config format.
//!
//! ```text
//! # lines starting with '#' are comments
//! card_width = 648
//! card_height = 408
//! dpi = 300
//! photo_slot = 24,72,198,264          # x,y,width,height
//! barcode_slot = 246,300,378,84
//! text = name,246,72,6                # field,x,y,font_size_pt[,label]
//! text = blood_group,246,196,4,Blood Group
//! ```

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::text::{scale_for, GLYPH_PX};
use crate::imaging::CropBox;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LayoutError {
    #[error("layout line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("layout invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSlot {
    pub field: String,
    pub x: u32,
    pub y: u32,
    pub font_size_pt: u32,
    /// Drawn as `label: value` when present.
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CardLayout {
    pub card_width: u32,
    pub card_height: u32,
    pub dpi: u32,
    pub photo_slot: CropBox,
    pub text_slots: Vec<TextSlot>,
    pub barcode_slot: CropBox,
}

fn slot(field: &str, x: u32, y: u32, pt: u32, label: Option<&str>) -> TextSlot {
    TextSlot {
        field: field.to_owned(),
        x,
        y,
        font_size_pt: pt,
        label: label.map(str::to_owned),
    }
}

impl CardLayout {
    fn base(text_slots: Vec<TextSlot>) -> Self {
        Self {
            card_width: 648,
            card_height: 408,
            dpi: 300,
            photo_slot: CropBox::new(24, 72, 198, 264),
            text_slots,
            barcode_slot: CropBox::new(246, 300, 378, 84),
        }
    }

    pub fn default_employee() -> Self {
        Self::base(vec![
            slot("name", 246, 72, 6, None),
            slot("designation", 246, 112, 4, None),
            slot("dept", 246, 140, 4, None),
            slot("id", 246, 168, 4, Some("ID")),
            slot("blood_group", 246, 196, 4, Some("Blood Group")),
        ])
    }

    pub fn default_student() -> Self {
        Self::base(vec![
            slot("name", 246, 72, 6, None),
            slot("branch", 246, 112, 4, Some("Branch")),
            slot("session", 246, 140, 4, Some("Session")),
            slot("id", 246, 168, 4, Some("ID")),
            slot("blood_group", 246, 196, 4, Some("Blood Group")),
        ])
    }

    /// Bounding box of a text slot: one glyph row high, running to the
    /// card's right edge.
    pub fn text_box(&self, slot: &TextSlot) -> CropBox {
        let h = GLYPH_PX * scale_for(slot.font_size_pt, self.dpi);
        CropBox::new(slot.x, slot.y, self.card_width.saturating_sub(slot.x), h)
    }

    pub fn validate(&self) -> Result<(), LayoutError> {
        let bad = |m: String| Err(LayoutError::Invalid(m));
        if self.card_width == 0 || self.card_height == 0 {
            return bad("card dimensions must be positive".into());
        }
        if self.dpi == 0 {
            return bad("dpi must be positive".into());
        }
        let mut boxes = vec![
            ("photo_slot".to_owned(), self.photo_slot),
            ("barcode_slot".to_owned(), self.barcode_slot),
        ];
        for s in &self.text_slots {
            if s.font_size_pt == 0 {
                return bad(format!("text slot {} has zero font size", s.field));
            }
            if s.field.is_empty() {
                return bad("text slot with empty field name".into());
            }
            boxes.push((format!("text slot {}", s.field), self.text_box(s)));
        }
        for (name, b) in &boxes {
            if !b.fits_within(self.card_width, self.card_height) {
                return bad(format!("{name} {b} exceeds card {}x{}", self.card_width, self.card_height));
            }
        }
        for i in 0..boxes.len() {
            for j in i + 1..boxes.len() {
                if boxes[i].1.overlaps(&boxes[j].1) {
                    return bad(format!("{} overlaps {}", boxes[i].0, boxes[j].0));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, LayoutError> {
        let mut width = None;
        let mut height = None;
        let mut dpi = None;
        let mut photo = None;
        let mut barcode = None;
        let mut slots = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| LayoutError::Parse {
                line: line_no,
                message,
            };
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |s: &str| {
                s.trim()
                    .parse::<u32>()
                    .map_err(|_| err(format!("{key}: {s:?} is not a non-negative integer")))
            };
            let rect = |v: &str| -> Result<CropBox, LayoutError> {
                let parts: Vec<&str> = v.split(',').collect();
                if parts.len() != 4 {
                    return Err(err(format!("{key} needs x,y,width,height")));
                }
                Ok(CropBox::new(num(parts[0])?, num(parts[1])?, num(parts[2])?, num(parts[3])?))
            };
            match key {
                "card_width" => width = Some(num(value)?),
                "card_height" => height = Some(num(value)?),
                "dpi" => dpi = Some(num(value)?),
                "photo_slot" => photo = Some(rect(value)?),
                "barcode_slot" => barcode = Some(rect(value)?),
                "text" => {
                    let parts: Vec<&str> = value.splitn(5, ',').collect();
                    if parts.len() < 4 {
                        return Err(err("text needs field,x,y,font_size_pt[,label]".into()));
                    }
                    slots.push(TextSlot {
                        field: parts[0].trim().to_owned(),
                        x: num(parts[1])?,
                        y: num(parts[2])?,
                        font_size_pt: num(parts[3])?,
                        label: parts.get(4).map(|l| l.trim().to_owned()).filter(|l| !l.is_empty()),
                    });
                }
                other => return Err(err(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| LayoutError::Invalid(format!("missing {k}"));
        let layout = CardLayout {
            card_width: width.ok_or_else(|| missing("card_width"))?,
            card_height: height.ok_or_else(|| missing("card_height"))?,
            dpi: dpi.ok_or_else(|| missing("dpi"))?,
            photo_slot: photo.ok_or_else(|| missing("photo_slot"))?,
            text_slots: slots,
            barcode_slot: barcode.ok_or_else(|| missing("barcode_slot"))?,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn to_config_string(&self) -> String {
        let r = |b: &CropBox| format!("{},{},{},{}", b.x, b.y, b.width, b.height);
        let mut out = format!(
            "card_width = {}\ncard_height = {}\ndpi = {}\nphoto_slot = {}\nbarcode_slot = {}\n",
            self.card_width,
            self.card_height,
            self.dpi,
            r(&self.photo_slot),
            r(&self.barcode_slot)
        );
        for s in &self.text_slots {
            let _ = write!(out, "text = {},{},{},{}", s.field, s.x, s.y, s.font_size_pt);
            if let Some(l) = &s.label {
                let _ = write!(out, ",{l}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        CardLayout::default_employee().validate().unwrap();
        CardLayout::default_student().validate().unwrap();
    }

    #[test]
    fn config_round_trip() {
        let l = CardLayout::default_employee();
        assert_eq!(CardLayout::parse(&l.to_config_string()).unwrap(), l);
    }

    #[test]
    fn overlap_rejected() {
        let mut l = CardLayout::default_employee();
        l.barcode_slot = CropBox::new(100, 100, 300, 80);
        assert!(matches!(l.validate(), Err(LayoutError::Invalid(m)) if m.contains("overlaps")));
    }

    #[test]
    fn out_of_bounds_rejected() {
        let mut l = CardLayout::default_employee();
        l.photo_slot = CropBox::new(600, 0, 100, 100);
        assert!(l.validate().is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = CardLayout::parse("card_width = 648\nbogus = 1\n").unwrap_err();
        assert_eq!(
            err,
            LayoutError::Parse {
                line: 2,
                message: "unknown key \"bogus\"".into()
            }
        );
        let err = CardLayout::parse("card_width = wide").unwrap_err();
        assert!(matches!(err, LayoutError::Parse { line: 1, .. }));
    }

    #[test]
    fn comments_and_labels() {
        let text = "# card\ncard_width = 648 # px\ncard_height = 408\ndpi = 300\n\
                    photo_slot = 24,72,198,264\nbarcode_slot = 246,300,378,84\n\
                    text = id,246,168,4,Staff No\n";
        let l = CardLayout::parse(text).unwrap();
        assert_eq!(l.text_slots[0].label.as_deref(), Some("Staff No"));
    }
}
