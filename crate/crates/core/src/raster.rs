//! Raster primitives shared by every pipeline stage: 8-bit grayscale
//! images, binary masks, label maps, and integer ring (polar) sampling.
//!
//! A ring of radius `r` is the set of pixels whose rounded Euclidean
//! distance to the center equals `r`. Rings of distinct radii around the
//! same center are therefore disjoint, and the union of rings `0..=r_max`
//! covers every pixel whose rounded distance is at most `r_max` — the
//! assembly stage relies on both properties.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: unsupported bit depth (found {found}, need 8-bit)")]
    UnsupportedBitDepth { path: String, found: String },
    #[error("{path}: unsupported color format (found {found}, need grayscale)")]
    UnsupportedColor { path: String, found: String },
    #[error("{path}: malformed PGM: {reason}")]
    MalformedPgm { path: String, reason: String },
    #[error("pixel buffer has {got} entries, expected {expected} ({width}x{height})")]
    DimensionMismatch {
        width: u32,
        height: u32,
        expected: usize,
        got: usize,
    },
    #[error("ball center ({x:.1}, {y:.1}) lies outside the {width}x{height} image")]
    CenterOutsideImage {
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
}

/// 8-bit grayscale raster, row-major. The universal working representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![fill; (width as usize) * (height as usize)],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, RasterError> {
        let expected = (width as usize) * (height as usize);
        if pixels.len() != expected {
            return Err(RasterError::DimensionMismatch {
                width,
                height,
                expected,
                got: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.pixels[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        self.pixels[(y as usize) * (self.width as usize) + x as usize] = v;
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    /// Load an 8-bit grayscale PNG or binary PGM (P5). Pixel values are
    /// taken as-is; no rescaling. Anything that is not 8-bit grayscale is
    /// rejected with the offending format named.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self, RasterError> {
        let path = path.as_ref();
        let shown = path.display().to_string();
        let bytes = fs::read(path).map_err(|source| RasterError::Io {
            path: shown.clone(),
            source,
        })?;
        if bytes.starts_with(b"P5") {
            return Self::decode_pgm(&bytes, &shown);
        }
        let img = image::load_from_memory(&bytes).map_err(|source| RasterError::Decode {
            path: shown.clone(),
            source,
        })?;
        match img.color() {
            image::ColorType::L8 => {
                let gray = img.into_luma8();
                let (w, h) = gray.dimensions();
                Ok(Self {
                    width: w,
                    height: h,
                    pixels: gray.into_raw(),
                })
            }
            image::ColorType::L16 | image::ColorType::La16 => {
                Err(RasterError::UnsupportedBitDepth {
                    path: shown,
                    found: "16-bit".into(),
                })
            }
            other => Err(RasterError::UnsupportedColor {
                path: shown,
                found: format!("{other:?}"),
            }),
        }
    }

    fn decode_pgm(bytes: &[u8], path: &str) -> Result<Self, RasterError> {
        let malformed = |reason: &str| RasterError::MalformedPgm {
            path: path.to_string(),
            reason: reason.to_string(),
        };
        let mut pos = 2usize; // past "P5"
        let mut fields = [0usize; 3];
        for field in fields.iter_mut() {
            // skip whitespace and '#' comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(malformed("truncated header")),
                }
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if pos == start {
                return Err(malformed("expected integer in header"));
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .unwrap()
                .parse()
                .map_err(|_| malformed("header value out of range"))?;
        }
        let [width, height, maxval] = fields;
        if maxval > 255 {
            return Err(RasterError::UnsupportedBitDepth {
                path: path.to_string(),
                found: format!("maxval {maxval}"),
            });
        }
        // exactly one whitespace byte separates header and raster
        match bytes.get(pos) {
            Some(b) if b.is_ascii_whitespace() => pos += 1,
            _ => return Err(malformed("missing separator before raster data")),
        }
        let expected = width * height;
        let raster = &bytes[pos..];
        if raster.len() < expected {
            return Err(malformed("raster data shorter than width*height"));
        }
        Self::from_pixels(width as u32, height as u32, raster[..expected].to_vec()).map_err(|_| {
            malformed("dimensions overflow")
        })
    }

    pub fn save_png<P: AsRef<Path>>(&self, path: P) -> Result<(), RasterError> {
        let shown = path.as_ref().display().to_string();
        image::save_buffer(
            path.as_ref(),
            &self.pixels,
            self.width,
            self.height,
            image::ColorType::L8,
        )
        .map_err(|source| RasterError::Decode {
            path: shown,
            source,
        })
    }

    /// Write as binary PGM (P5). The header is canonical, so
    /// save → load → save reproduces identical bytes.
    pub fn save_pgm<P: AsRef<Path>>(&self, path: P) -> Result<(), RasterError> {
        let shown = path.as_ref().display().to_string();
        let io_err = |source| RasterError::Io {
            path: shown.clone(),
            source,
        };
        let file = fs::File::create(path.as_ref()).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let write = |w: &mut BufWriter<fs::File>, data: &[u8]| {
            w.write_all(data).map_err(|source| RasterError::Io {
                path: shown.clone(),
                source,
            })
        };
        write(&mut w, format!("P5\n{} {}\n255\n", self.width, self.height).as_bytes())?;
        write(&mut w, &self.pixels)?;
        w.flush().map_err(|source| RasterError::Io {
            path: shown.clone(),
            source,
        })
    }
}

/// Row-major boolean mask with the same dimensions as the image it
/// annotates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; (width as usize) * (height as usize)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[(y as usize) * (self.width as usize) + x as usize] = v;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Set pixels, scanned row-major.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i as u32) % w, (i as u32) / w))
    }

    /// In-place intersection. Panics if dimensions differ.
    pub fn and(&mut self, other: &BinaryMask) {
        assert_eq!(self.dims(), other.dims());
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a &= b;
        }
    }

    /// In-place union. Panics if dimensions differ.
    pub fn or(&mut self, other: &BinaryMask) {
        assert_eq!(self.dims(), other.dims());
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
    }

    /// 0/255 grayscale rendering, e.g. for `--dump-edges`.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            pixels: self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect(),
        }
    }
}

/// Row-major connected-component labels; 0 is background. Nonzero labels
/// form a contiguous set `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: u32,
    height: u32,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            labels: vec![0; (width as usize) * (height as usize)],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u32 {
        self.labels[(y as usize) * (self.width as usize) + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: u32) {
        self.labels[(y as usize) * (self.width as usize) + x as usize] = v;
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// One integer ring around a center: the in-bounds pixels whose rounded
/// distance to the center equals `radius`, ordered by angle starting at
/// angle 0 (the +x direction). Index arithmetic on the position list is
/// cyclic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingSample {
    pub radius: u32,
    pub coords: Vec<(u32, u32)>,
}

impl RingSample {
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Intensities of the ring pixels, in ring order.
    pub fn sample(&self, img: &GrayImage) -> Vec<u8> {
        self.coords.iter().map(|&(x, y)| img.get(x, y)).collect()
    }
}

/// Ring offsets around the origin (no clipping), angle-ordered.
/// `offsets(0)` is the single origin offset.
pub fn ring_offsets(radius: u32) -> Vec<(i32, i32)> {
    if radius == 0 {
        return vec![(0, 0)];
    }
    let r = radius as i32;
    let mut with_angle: Vec<((i32, i32), f64)> = Vec::new();
    for dy in -r - 1..=r + 1 {
        for dx in -r - 1..=r + 1 {
            let dist = f64::from(dx * dx + dy * dy).sqrt();
            if dist.round() as i32 == r {
                let mut a = f64::from(dy).atan2(f64::from(dx));
                if a < 0.0 {
                    a += std::f64::consts::TAU;
                }
                with_angle.push(((dx, dy), a));
            }
        }
    }
    // distinct lattice points on one ring never share an angle
    with_angle.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    with_angle.into_iter().map(|(p, _)| p).collect()
}

/// The ring of `radius` around `center`, clipped to `bounds` (width,
/// height). Out-of-bounds pixels are dropped; an empty ring is allowed.
/// `radius = 0` yields the single center pixel.
pub fn ring_pixels(center: (f64, f64), radius: u32, bounds: (u32, u32)) -> RingSample {
    let (cx, cy) = center;
    let (w, h) = bounds;
    let in_bounds = |x: i64, y: i64| x >= 0 && y >= 0 && x < w as i64 && y < h as i64;

    if radius == 0 {
        let (x, y) = (cx.round() as i64, cy.round() as i64);
        let coords = if in_bounds(x, y) {
            vec![(x as u32, y as u32)]
        } else {
            vec![]
        };
        return RingSample { radius, coords };
    }

    let r = radius as f64;
    let x_lo = (cx - r - 1.0).floor() as i64;
    let x_hi = (cx + r + 1.0).ceil() as i64;
    let y_lo = (cy - r - 1.0).floor() as i64;
    let y_hi = (cy + r + 1.0).ceil() as i64;
    let mut with_angle: Vec<((u32, u32), f64)> = Vec::new();
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if (dx * dx + dy * dy).sqrt().round() as u32 == radius {
                if in_bounds(x, y) {
                    let mut a = dy.atan2(dx);
                    if a < 0.0 {
                        a += std::f64::consts::TAU;
                    }
                    with_angle.push(((x as u32, y as u32), a));
                }
            }
        }
    }
    with_angle.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    RingSample {
        radius,
        coords: with_angle.into_iter().map(|(p, _)| p).collect(),
    }
}

/// Mask of the disk `dist <= radius` around `center` (exact distance, not
/// rounded — matches the ball-area convention in `measure`).
pub fn disk_mask(center: (f64, f64), radius: f64, bounds: (u32, u32)) -> BinaryMask {
    let mut mask = BinaryMask::new(bounds.0, bounds.1);
    for y in 0..bounds.1 {
        for x in 0..bounds.0 {
            let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
            if (dx * dx + dy * dy).sqrt() <= radius {
                mask.set(x, y, true);
            }
        }
    }
    mask
}

/// Square crop of side `2*round(radius)+1` centered on the ball center.
/// Pixels falling outside the source image are filled with the median of
/// the crop's in-bounds border pixels, so the pad never fabricates strong
/// edges the way zero padding would.
pub fn crop_ball(
    img: &GrayImage,
    center: (f64, f64),
    radius: f64,
) -> Result<GrayImage, RasterError> {
    if radius <= 0.0 {
        return Err(RasterError::NonPositiveRadius(radius));
    }
    let (cx, cy) = (center.0.round() as i64, center.1.round() as i64);
    if !img.in_bounds(cx, cy) {
        return Err(RasterError::CenterOutsideImage {
            x: center.0,
            y: center.1,
            width: img.width,
            height: img.height,
        });
    }
    let half = radius.round() as i64;
    let side = (2 * half + 1) as u32;
    let origin = (cx - half, cy - half);

    let mut border: Vec<u8> = Vec::new();
    for oy in 0..side as i64 {
        for ox in 0..side as i64 {
            if oy != 0 && oy != side as i64 - 1 && ox != 0 && ox != side as i64 - 1 {
                continue;
            }
            let (sx, sy) = (origin.0 + ox, origin.1 + oy);
            if img.in_bounds(sx, sy) {
                border.push(img.get(sx as u32, sy as u32));
            }
        }
    }
    let pad = if border.is_empty() {
        // crop border entirely outside a tiny image: fall back to the
        // in-bounds interior
        let mut all: Vec<u8> = Vec::new();
        for oy in 0..side as i64 {
            for ox in 0..side as i64 {
                let (sx, sy) = (origin.0 + ox, origin.1 + oy);
                if img.in_bounds(sx, sy) {
                    all.push(img.get(sx as u32, sy as u32));
                }
            }
        }
        median_u8(&mut all)
    } else {
        median_u8(&mut border)
    };

    let mut out = GrayImage::new(side, side, pad);
    for oy in 0..side as i64 {
        for ox in 0..side as i64 {
            let (sx, sy) = (origin.0 + ox, origin.1 + oy);
            if img.in_bounds(sx, sy) {
                out.set(ox as u32, oy as u32, img.get(sx as u32, sy as u32));
            }
        }
    }
    Ok(out)
}

/// Median by sorting; for even counts the upper middle is taken.
pub fn median_u8(values: &mut [u8]) -> u8 {
    assert!(!values.is_empty());
    values.sort_unstable();
    values[values.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_zero_is_center_pixel() {
        let ring = ring_pixels((5.0, 5.0), 0, (11, 11));
        assert_eq!(ring.coords, vec![(5, 5)]);
    }

    #[test]
    fn ring_one_is_eight_neighbors_in_angle_order() {
        let ring = ring_pixels((5.0, 5.0), 1, (11, 11));
        assert_eq!(
            ring.coords,
            vec![
                (6, 5),
                (6, 6),
                (5, 6),
                (4, 6),
                (4, 5),
                (4, 4),
                (5, 4),
                (6, 4)
            ]
        );
    }

    #[test]
    fn ring_clipping_drops_out_of_bounds() {
        // brute-force oracle: all pixels of the 4x4 image whose rounded
        // distance to (1,1) is 2, sorted by angle
        let mut expected: Vec<((u32, u32), f64)> = Vec::new();
        for y in 0..4i32 {
            for x in 0..4i32 {
                let (dx, dy) = (f64::from(x - 1), f64::from(y - 1));
                if (dx * dx + dy * dy).sqrt().round() as i32 == 2 {
                    let mut a = dy.atan2(dx);
                    if a < 0.0 {
                        a += std::f64::consts::TAU;
                    }
                    expected.push(((x as u32, y as u32), a));
                }
            }
        }
        expected.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
        let expected: Vec<(u32, u32)> = expected.into_iter().map(|(p, _)| p).collect();

        let ring = ring_pixels((1.0, 1.0), 2, (4, 4));
        assert_eq!(ring.coords, expected);
        // the unclipped ring has 12 pixels; clipping must remove some
        assert_eq!(ring_offsets(2).len(), 12);
        assert!(ring.len() < 12);
    }

    #[test]
    fn rings_are_disjoint_and_cover_the_disk() {
        let bounds = (41, 41);
        let center = (20.0, 20.0);
        let r_max = 15u32;
        let mut seen = std::collections::HashSet::new();
        for r in 0..=r_max {
            for &(x, y) in &ring_pixels(center, r, bounds).coords {
                let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
                assert_eq!((dx * dx + dy * dy).sqrt().round() as u32, r);
                assert!(seen.insert((x, y)), "pixel ({x},{y}) on two rings");
            }
        }
        for y in 0..bounds.1 {
            for x in 0..bounds.0 {
                let (dx, dy) = (x as f64 - center.0, y as f64 - center.1);
                if (dx * dx + dy * dy).sqrt().round() as u32 <= r_max {
                    assert!(seen.contains(&(x, y)), "pixel ({x},{y}) uncovered");
                }
            }
        }
    }

    #[test]
    fn crop_is_centered_and_sized() {
        let img = GrayImage::new(40, 40, 77);
        let crop = crop_ball(&img, (20.0, 20.0), 19.0).unwrap();
        assert_eq!(crop.dims(), (39, 39));
        assert!(crop.pixels().iter().all(|&p| p == 77));
    }

    #[test]
    fn corner_crop_pads_with_border_median() {
        let mut img = GrayImage::new(20, 20, 50);
        // brighten a band so the median is unambiguous
        for y in 0..20 {
            for x in 0..20 {
                img.set(x, y, 50 + (x % 3) as u8);
            }
        }
        let crop = crop_ball(&img, (2.0, 2.0), 5.0).unwrap();
        assert_eq!(crop.dims(), (11, 11));
        // oracle: median of in-bounds border pixels of the crop window
        let mut border: Vec<u8> = Vec::new();
        for oy in -3i64..=7 {
            for ox in -3i64..=7 {
                let on_border = oy == -3 || oy == 7 || ox == -3 || ox == 7;
                if on_border && img.in_bounds(ox, oy) {
                    border.push(img.get(ox as u32, oy as u32));
                }
            }
        }
        let expected = median_u8(&mut border);
        assert_eq!(crop.get(0, 0), expected);
        assert_eq!(crop.get(10, 0), expected);
        // in-bounds pixels copied verbatim
        assert_eq!(crop.get(3, 3), img.get(0, 0));
    }

    #[test]
    fn crop_center_outside_errors() {
        let img = GrayImage::new(10, 10, 0);
        assert!(matches!(
            crop_ball(&img, (30.0, 5.0), 4.0),
            Err(RasterError::CenterOutsideImage { .. })
        ));
    }

    #[test]
    fn pgm_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let pixels: Vec<u8> = (0..40 * 40).map(|i| (i * 7 % 256) as u8).collect();
        let img = GrayImage::from_pixels(40, 40, pixels).unwrap();
        img.save_pgm(&path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let loaded = GrayImage::load(&path).unwrap();
        assert_eq!(loaded, img);
        loaded.save_pgm(&path).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn pgm_all_100s() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.pgm");
        std::fs::write(&path, b"P5\n3 3\n255\n\x64\x64\x64\x64\x64\x64\x64\x64\x64").unwrap();
        let img = GrayImage::load(&path).unwrap();
        assert_eq!(img.dims(), (3, 3));
        assert!(img.pixels().iter().all(|&p| p == 100));
    }

    #[test]
    fn sixteen_bit_png_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let buf: Vec<u8> = vec![0u8; 4 * 4 * 2];
        image::save_buffer(&path, &buf, 4, 4, image::ColorType::L16).unwrap();
        match GrayImage::load(&path) {
            Err(RasterError::UnsupportedBitDepth { found, .. }) => {
                assert!(found.contains("16"));
            }
            other => panic!("expected bit-depth error, got {other:?}"),
        }
    }

    #[test]
    fn rgb_png_is_rejected_with_format_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("color.png");
        let buf: Vec<u8> = vec![10u8; 4 * 4 * 3];
        image::save_buffer(&path, &buf, 4, 4, image::ColorType::Rgb8).unwrap();
        match GrayImage::load(&path) {
            Err(RasterError::UnsupportedColor { found, .. }) => {
                assert!(found.contains("Rgb"));
            }
            other => panic!("expected color error, got {other:?}"),
        }
    }

    #[test]
    fn png_round_trip_preserves_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let pixels: Vec<u8> = (0..30 * 20).map(|i| (i * 13 % 251) as u8).collect();
        let img = GrayImage::from_pixels(30, 20, pixels).unwrap();
        img.save_png(&path).unwrap();
        assert_eq!(GrayImage::load(&path).unwrap(), img);
    }
}
