//! Overlay rendering: void pixels tinted, ball circles drawn, and the
//! void percentage printed above each ball with a tiny built-in digit
//! font. Produces plain RGB buffers; callers decide between PNG (CLI) and
//! RGBA canvases (browser demo).

use crate::ball_segment::Provenance;
use crate::raster::{ring_offsets, GrayImage};
use crate::void_assemble::InspectionReport;

pub const VOID_TINT: [u8; 3] = [230, 60, 50];
pub const DETECTED_RING: [u8; 3] = [70, 200, 90];
pub const INTERPOLATED_RING: [u8; 3] = [80, 140, 240];
pub const LABEL_COLOR: [u8; 3] = [250, 220, 60];

/// Row-major RGB8 buffer.
#[derive(Debug, Clone)]
pub struct RgbImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn from_gray(img: &GrayImage) -> Self {
        let mut data = Vec::with_capacity(img.pixels().len() * 3);
        for &p in img.pixels() {
            data.extend_from_slice(&[p, p, p]);
        }
        Self {
            width: img.width(),
            height: img.height(),
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn blend(&mut self, x: i64, y: i64, color: [u8; 3], alpha: f64) {
        if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
            return;
        }
        let i = ((y as usize) * (self.width as usize) + x as usize) * 3;
        for c in 0..3 {
            let old = f64::from(self.data[i + c]);
            self.data[i + c] = (old + (f64::from(color[c]) - old) * alpha).round() as u8;
        }
    }

    /// Interleaved RGBA bytes (alpha 255), e.g. for a canvas `ImageData`.
    pub fn to_rgba(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() / 3 * 4);
        for px in self.data.chunks_exact(3) {
            out.extend_from_slice(px);
            out.push(255);
        }
        out
    }
}

/// 3x5 glyphs for the characters a percentage label needs.
fn glyph(c: char) -> Option<[&'static str; 5]> {
    Some(match c {
        '0' => ["111", "101", "101", "101", "111"],
        '1' => ["010", "110", "010", "010", "111"],
        '2' => ["111", "001", "111", "100", "111"],
        '3' => ["111", "001", "111", "001", "111"],
        '4' => ["101", "101", "111", "001", "001"],
        '5' => ["111", "100", "111", "001", "111"],
        '6' => ["111", "100", "111", "101", "111"],
        '7' => ["111", "001", "010", "010", "010"],
        '8' => ["111", "101", "111", "101", "111"],
        '9' => ["111", "101", "111", "001", "111"],
        '.' => ["000", "000", "000", "000", "010"],
        '%' => ["101", "001", "010", "100", "101"],
        _ => return None,
    })
}

/// Draw `text` with the 3x5 font at `origin`, scaled up by `scale`.
pub fn draw_text(img: &mut RgbImage, origin: (i64, i64), text: &str, color: [u8; 3], scale: u32) {
    let mut pen_x = origin.0;
    for c in text.chars() {
        let Some(rows) = glyph(c) else {
            pen_x += i64::from(scale * 2);
            continue;
        };
        for (gy, row) in rows.iter().enumerate() {
            for (gx, bit) in row.bytes().enumerate() {
                if bit != b'1' {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        img.blend(
                            pen_x + (gx as u32 * scale + sx) as i64,
                            origin.1 + (gy as u32 * scale + sy) as i64,
                            color,
                            1.0,
                        );
                    }
                }
            }
        }
        pen_x += i64::from(4 * scale); // 3 columns + 1 gap
    }
}

/// Circle outline of the given radius.
pub fn draw_ring(img: &mut RgbImage, center: (f64, f64), radius: u32, color: [u8; 3]) {
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    for (dx, dy) in ring_offsets(radius) {
        img.blend(cx + i64::from(dx), cy + i64::from(dy), color, 1.0);
    }
}

/// Paint one ball's report onto a full-image overlay: the void pixels are
/// tinted, the ball circle is drawn (color keyed to provenance), and the
/// void percentage sits above the ball.
pub fn paint_report(img: &mut RgbImage, report: &InspectionReport) {
    let (cx, cy) = report.ball.center;
    let r = report.ball.radius.round() as i64;
    let origin = (cx.round() as i64 - r, cy.round() as i64 - r);
    for region in &report.regions {
        for &(x, y) in &region.pixels {
            img.blend(origin.0 + i64::from(x), origin.1 + i64::from(y), VOID_TINT, 0.55);
        }
    }
    let ring_color = match report.ball.provenance {
        Provenance::Detected => DETECTED_RING,
        Provenance::Interpolated => INTERPOLATED_RING,
    };
    draw_ring(img, (cx, cy), report.ball.radius.round() as u32, ring_color);
    let text = format!("{:.2}%", report.void_percentage);
    let width = 4 * text.chars().count() as i64 - 1;
    draw_text(
        img,
        (cx.round() as i64 - width / 2, cy.round() as i64 - r - 8),
        &text,
        LABEL_COLOR,
        1,
    );
}

/// Full-image overlay for a set of per-ball reports.
pub fn overlay(base: &GrayImage, reports: &[InspectionReport]) -> RgbImage {
    let mut img = RgbImage::from_gray(base);
    for report in reports {
        paint_report(&mut img, report);
    }
    img
}
