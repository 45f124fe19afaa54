//! Brute-force reference for centered aspect crops.

/// Whether `w x h` matches `aw:ah` to within one pixel of rounding down on
/// either side.
pub fn in_band(w: u64, h: u64, aw: u64, ah: u64) -> bool {
    w == h * aw / ah || h == w * ah / aw
}

/// Largest in-band box inside `width x height` by exhaustive search over
/// both sides. Ties go to the smaller aspect error, then the smaller
/// perimeter. `None` when no box of positive area is in band.
pub fn best_box(width: u32, height: u32, aw: u32, ah: u32) -> Option<(u32, u32)> {
    let (big_w, big_h, aw, ah) = (width as u64, height as u64, aw as u64, ah as u64);
    let mut best: Option<(u64, u64)> = None;
    let key = |(w, h): (u64, u64)| {
        (
            std::cmp::Reverse(w * h),
            (w * ah).abs_diff(h * aw),
            w + h,
        )
    };
    let mut consider = |w: u64, h: u64| {
        let fits = w >= 1 && h >= 1 && w <= big_w && h <= big_h && in_band(w, h, aw, ah);
        if fits && best.is_none_or(|b| key((w, h)) < key(b)) {
            best = Some((w, h));
        }
    };
    for h in 1..=big_h {
        consider(h * aw / ah, h);
    }
    for w in 1..=big_w {
        consider(w, w * ah / aw);
    }
    best.map(|(w, h)| (w as u32, h as u32))
}

/// Distance of a box's offset from the exact center along one axis.
pub fn center_error(outer: u32, offset: u32, inner: u32) -> f64 {
    ((outer as f64 - inner as f64) / 2.0 - offset as f64).abs()
}

/// Growing the box by `grow` pixels along either axis leaves the image or
/// the aspect band.
pub fn is_maximal(width: u32, height: u32, w: u32, h: u32, aw: u32, ah: u32, grow: u32) -> bool {
    let violates = |w: u32, h: u32| {
        w > width || h > height || !in_band(w as u64, h as u64, aw as u64, ah as u64)
    };
    violates(w + grow, h) && violates(w, h + grow)
}
