//! Shared fixtures for unit tests.

/// Midpoint-circle offsets: a 1-pixel-thick circle where every pixel
/// touches exactly two others, unlike the rounded-distance rings used for
/// scanning (those grow thick corners).
pub(crate) fn midpoint_circle(r: i32) -> Vec<(i32, i32)> {
    let mut pts = std::collections::BTreeSet::new();
    let (mut x, mut y, mut d) = (r, 0i32, 1 - r);
    while y <= x {
        for &(px, py) in &[
            (x, y),
            (y, x),
            (-x, y),
            (-y, x),
            (x, -y),
            (y, -x),
            (-x, -y),
            (-y, -x),
        ] {
            pts.insert((px, py));
        }
        y += 1;
        if d <= 0 {
            d += 2 * y + 1;
        } else {
            x -= 1;
            d += 2 * (y - x) + 1;
        }
    }
    pts.into_iter().collect()
}
