//! Reference Code 39 decoder working from a literal pattern table.

use image::GrayImage;

/// Nine elements per character, bar first; `1` marks a wide element.
pub const TABLE: [(char, &str); 44] = [
    ('0', "000110100"),
    ('1', "100100001"),
    ('2', "001100001"),
    ('3', "101100000"),
    ('4', "000110001"),
    ('5', "100110000"),
    ('6', "001110000"),
    ('7', "000100101"),
    ('8', "100100100"),
    ('9', "001100100"),
    ('A', "100001001"),
    ('B', "001001001"),
    ('C', "101001000"),
    ('D', "000011001"),
    ('E', "100011000"),
    ('F', "001011000"),
    ('G', "000001101"),
    ('H', "100001100"),
    ('I', "001001100"),
    ('J', "000011100"),
    ('K', "100000011"),
    ('L', "001000011"),
    ('M', "101000010"),
    ('N', "000010011"),
    ('O', "100010010"),
    ('P', "001010010"),
    ('Q', "000000111"),
    ('R', "100000110"),
    ('S', "001000110"),
    ('T', "000010110"),
    ('U', "110000001"),
    ('V', "011000001"),
    ('W', "111000000"),
    ('X', "010010001"),
    ('Y', "110010000"),
    ('Z', "011010000"),
    ('-', "010000101"),
    ('.', "110000100"),
    (' ', "011000100"),
    ('*', "010010100"),
    ('$', "010101000"),
    ('/', "010100010"),
    ('+', "010001010"),
    ('%', "000101010"),
];

/// The encodable alphabet, start/stop excluded.
pub const ALPHABET: &str = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ-. $/+%";

fn lookup(bits: &str) -> Option<char> {
    TABLE.iter().find(|(_, p)| *p == bits).map(|(c, _)| *c)
}

/// Runs of equal pixels: `(dark, length)`.
pub fn run_lengths(row: &[bool]) -> Vec<(bool, usize)> {
    let mut runs: Vec<(bool, usize)> = Vec::new();
    for &px in row {
        match runs.last_mut() {
            Some((d, n)) if *d == px => *n += 1,
            _ => runs.push((px, 1)),
        }
    }
    runs
}

/// Narrow/wide flags for nine runs, or `None` if they do not split into
/// exactly two widths with three wide.
fn classify(runs: &[(bool, usize)]) -> Option<String> {
    let narrow = runs.iter().map(|r| r.1).min()?;
    let wide = runs.iter().map(|r| r.1).max()?;
    if wide < narrow * 3 / 2 {
        return None;
    }
    let threshold = (narrow + wide) as f64 / 2.0;
    let bits: String = runs
        .iter()
        .map(|r| if r.1 as f64 > threshold { '1' } else { '0' })
        .collect();
    (bits.matches('1').count() == 3).then_some(bits)
}

/// Decodes the first `*...*` symbol found in a scanline (`true` = dark).
pub fn decode_row(row: &[bool]) -> Result<String, String> {
    let runs = run_lengths(row);
    for start in 0..runs.len() {
        if !runs[start].0 || start + 9 > runs.len() {
            continue;
        }
        if classify(&runs[start..start + 9]).as_deref().and_then(lookup) != Some('*') {
            continue;
        }
        let mut text = String::new();
        let mut at = start + 10;
        loop {
            if at + 9 > runs.len() {
                break;
            }
            let Some(c) = classify(&runs[at..at + 9]).as_deref().and_then(lookup) else {
                break;
            };
            if c == '*' {
                return if text.is_empty() {
                    Err("empty symbol".into())
                } else {
                    Ok(text)
                };
            }
            text.push(c);
            at += 10;
        }
    }
    Err("no complete symbol in scanline".into())
}

/// Decodes row `y` of a grayscale image, thresholding at mid-grey.
pub fn decode_image_row(img: &GrayImage, y: u32) -> Result<String, String> {
    let row: Vec<bool> = (0..img.width()).map(|x| img.get_pixel(x, y).0[0] < 128).collect();
    decode_row(&row)
}

/// Decodes the first row of `bytes` (PNG or JPEG) that yields a symbol.
pub fn decode_image(bytes: &[u8]) -> Result<String, String> {
    let img = image::load_from_memory(bytes)
        .map_err(|e| e.to_string())?
        .to_luma8();
    (0..img.height())
        .find_map(|y| decode_image_row(&img, y).ok())
        .ok_or_else(|| "no row decodes".into())
}

/// Mod-43 check character computed from the alphabet order.
pub fn check_character(text: &str) -> Option<char> {
    let sum: usize = text
        .chars()
        .map(|c| ALPHABET.find(c))
        .sum::<Option<usize>>()?;
    ALPHABET.chars().nth(sum % 43)
}
