//! Segmentation of individual solder balls from a multi-ball image:
//! per-slice adaptive thresholding, circle detection on the thresholded
//! mask, radius-mode filtering of spurious detections, and interpolation
//! of balls missed because of occlusion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{ring_offsets, BinaryMask, GrayImage};

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("no balls detected in the image")]
    NoBallsDetected,
    #[error("ball list is empty")]
    EmptyInput,
}

/// Where a ball region came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Found by circle detection.
    Detected,
    /// Inserted to fill a gap in the ball grid.
    Interpolated,
}

/// One segmented solder ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallRegion {
    /// Center in image coordinates; sub-pixel positions are allowed.
    pub center: (f64, f64),
    /// Radius in pixels, always positive.
    pub radius: f64,
    pub provenance: Provenance,
}

/// Tuning knobs for the segmentation stage. Defaults follow the slice
/// size (300 rows x 400 columns) and radius bin width (4) of the ball
/// grouping procedure; the rest are artifact choices exposed in config.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationParams {
    /// Slice height in rows.
    pub slice_height: u32,
    /// Slice width in columns.
    pub slice_width: u32,
    /// Side of the local-mean window for adaptive thresholding (odd, >= 3).
    pub threshold_window: u32,
    /// A pixel is foreground iff its intensity < local mean - offset.
    pub threshold_offset: f64,
    /// Radius quantization bin width for mode filtering.
    pub radius_bin_width: f64,
    /// A neighbor gap is a missing ball when it exceeds gap_factor * d_ref.
    pub gap_factor: f64,
    /// Row-grouping tolerance on center y; `None` means half the median
    /// radius of the detected balls.
    pub row_tolerance: Option<f64>,
    /// Circle search range (min radius, max radius) in pixels.
    pub r_min: u32,
    pub r_max: u32,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        Self {
            slice_height: 300,
            slice_width: 400,
            threshold_window: 31,
            threshold_offset: 5.0,
            radius_bin_width: 4.0,
            gap_factor: 1.5,
            row_tolerance: None,
            r_min: 10,
            r_max: 30,
        }
    }
}

/// Histogram of quantized radii; the mode decides which detections are
/// real balls.
#[derive(Debug, Clone)]
pub struct RadiusHistogram {
    pub bin_width: f64,
    /// Count per bin index; the quantized radius is `index * bin_width`.
    pub counts: BTreeMap<i64, usize>,
    /// Quantized radius of the maximal bin (ties go to the larger bin).
    pub mode_radius: f64,
}

/// Per-slice adaptive thresholding. The image is divided into
/// non-overlapping slices of `slice_height` x `slice_width` (ragged at the
/// edges, and a single slice when the image is smaller); each slice is
/// thresholded independently so uneven illumination in one slice cannot
/// bleed into another, then the slices are reassembled in place.
///
/// A pixel is foreground iff its intensity is strictly below the local
/// mean minus `threshold_offset`, where the local mean is taken over the
/// `threshold_window` square clipped to the slice.
pub fn threshold_by_slices(img: &GrayImage, p: &SegmentationParams) -> BinaryMask {
    assert!(p.threshold_window >= 3 && p.threshold_window % 2 == 1);
    assert!(p.slice_height > 0 && p.slice_width > 0);
    let (w, h) = img.dims();
    let mut mask = BinaryMask::new(w, h);
    let mut y0 = 0u32;
    while y0 < h {
        let sh = p.slice_height.min(h - y0);
        let mut x0 = 0u32;
        while x0 < w {
            let sw = p.slice_width.min(w - x0);
            threshold_slice(img, &mut mask, (x0, y0), (sw, sh), p);
            x0 += sw;
        }
        y0 += sh;
    }
    mask
}

fn threshold_slice(
    img: &GrayImage,
    mask: &mut BinaryMask,
    origin: (u32, u32),
    size: (u32, u32),
    p: &SegmentationParams,
) {
    let (x0, y0) = (origin.0 as usize, origin.1 as usize);
    let (sw, sh) = (size.0 as usize, size.1 as usize);
    // integral image over the slice, (sw+1) x (sh+1)
    let mut integral = vec![0u64; (sw + 1) * (sh + 1)];
    for y in 0..sh {
        let mut row_sum = 0u64;
        for x in 0..sw {
            row_sum += u64::from(img.get((x0 + x) as u32, (y0 + y) as u32));
            integral[(y + 1) * (sw + 1) + (x + 1)] = integral[y * (sw + 1) + (x + 1)] + row_sum;
        }
    }
    let half = (p.threshold_window / 2) as isize;
    for y in 0..sh {
        let wy0 = (y as isize - half).max(0) as usize;
        let wy1 = (y as isize + half).min(sh as isize - 1) as usize;
        for x in 0..sw {
            let wx0 = (x as isize - half).max(0) as usize;
            let wx1 = (x as isize + half).min(sw as isize - 1) as usize;
            let sum = integral[(wy1 + 1) * (sw + 1) + (wx1 + 1)]
                + integral[wy0 * (sw + 1) + wx0]
                - integral[wy0 * (sw + 1) + (wx1 + 1)]
                - integral[(wy1 + 1) * (sw + 1) + wx0];
            let count = ((wy1 - wy0 + 1) * (wx1 - wx0 + 1)) as f64;
            let mean = sum as f64 / count;
            let v = f64::from(img.get((x0 + x) as u32, (y0 + y) as u32));
            if v < mean - p.threshold_offset {
                mask.set((x0 + x) as u32, (y0 + y) as u32, true);
            }
        }
    }
}

/// Exterior-facing boundary pixels of the mask: foreground pixels
/// 4-adjacent to background that is 4-connected to the image border.
/// Interior holes (hollowed-out disk centers) contribute nothing.
fn outer_boundary(mask: &BinaryMask) -> Vec<(i64, i64)> {
    let (w, h) = mask.dims();
    let idx = |x: u32, y: u32| (y as usize) * (w as usize) + x as usize;
    let mut exterior = vec![false; (w as usize) * (h as usize)];
    let mut queue = std::collections::VecDeque::new();
    for x in 0..w {
        for y in [0, h - 1] {
            if !mask.get(x, y) && !exterior[idx(x, y)] {
                exterior[idx(x, y)] = true;
                queue.push_back((x, y));
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            if !mask.get(x, y) && !exterior[idx(x, y)] {
                exterior[idx(x, y)] = true;
                queue.push_back((x, y));
            }
        }
    }
    while let Some((cx, cy)) = queue.pop_front() {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                let (nx, ny) = (nx as u32, ny as u32);
                if !mask.get(nx, ny) && !exterior[idx(nx, ny)] {
                    exterior[idx(nx, ny)] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    let mut boundary = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (xi, yi) = (x as i64, y as i64);
            let edge = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|&(dx, dy)| {
                let (nx, ny) = (xi + dx, yi + dy);
                nx < 0
                    || ny < 0
                    || nx >= w as i64
                    || ny >= h as i64
                    || exterior[idx(nx as u32, ny as u32)]
            });
            if edge {
                boundary.push((xi, yi));
            }
        }
    }
    boundary
}

fn vote_plane(boundary: &[(i64, i64)], r: u32, dims: (u32, u32)) -> Vec<u32> {
    let (w, h) = dims;
    let offsets = ring_offsets(r);
    let mut plane = vec![0u32; (w as usize) * (h as usize)];
    for &(bx, by) in boundary {
        for &(dx, dy) in &offsets {
            let (cx, cy) = (bx + i64::from(dx), by + i64::from(dy));
            if cx >= 0 && cy >= 0 && cx < w as i64 && cy < h as i64 {
                plane[(cy as usize) * (w as usize) + cx as usize] += 1;
            }
        }
    }
    plane
}

/// Circle detection by Hough voting from the mask's outer boundary
/// pixels. A real boundary straddles two adjacent integer rings, so votes
/// for radii r-1, r, r+1 are pooled when testing radius r against the
/// 60%-of-ring-pixels acceptance bar, and the reported radius is the
/// vote-weighted mean over that band. Candidates closer than `r_range.0`
/// to a better-scoring one are suppressed.
pub fn detect_circles(mask: &BinaryMask, r_range: (u32, u32)) -> Vec<BallRegion> {
    let (r_min, r_max) = r_range;
    assert!(r_min >= 3, "minimum circle radius must be at least 3");
    assert!(r_min <= r_max);
    let (w, h) = mask.dims();

    let boundary = outer_boundary(mask);
    if boundary.is_empty() {
        return Vec::new();
    }

    struct Candidate {
        x: u32,
        y: u32,
        r: u32,
        radius: f64,
        score: f64,
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut prev = vote_plane(&boundary, r_min - 1, (w, h));
    let mut cur = vote_plane(&boundary, r_min, (w, h));
    for r in r_min..=r_max {
        let next = vote_plane(&boundary, r + 1, (w, h));
        let full = ring_offsets(r).len() as f64;
        let needed = (0.6 * full).ceil() as u32;
        for y in 0..h {
            for x in 0..w {
                let i = (y as usize) * (w as usize) + x as usize;
                let (lo, mid, hi) = (prev[i], cur[i], next[i]);
                let banded = lo + mid + hi;
                if banded < needed {
                    continue;
                }
                let radius = (f64::from(lo) * f64::from(r - 1)
                    + f64::from(mid) * f64::from(r)
                    + f64::from(hi) * f64::from(r + 1))
                    / f64::from(banded);
                candidates.push(Candidate {
                    x,
                    y,
                    r,
                    radius,
                    score: f64::from(banded) / full,
                });
            }
        }
        prev = cur;
        cur = next;
    }

    // non-maximum suppression: best score wins within r_min distance;
    // ties prefer the larger radius so a disk reports its rim, not a chord
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(b.r.cmp(&a.r))
            .then(a.y.cmp(&b.y))
            .then(a.x.cmp(&b.x))
    });
    let mut kept: Vec<Candidate> = Vec::new();
    let min_dist_sq = f64::from(r_min * r_min);
    for c in candidates {
        let suppressed = kept.iter().any(|k| {
            let (dx, dy) = (
                f64::from(c.x) - f64::from(k.x),
                f64::from(c.y) - f64::from(k.y),
            );
            dx * dx + dy * dy < min_dist_sq
        });
        if !suppressed {
            kept.push(c);
        }
    }
    kept.sort_by(|a, b| a.y.cmp(&b.y).then(a.x.cmp(&b.x)));
    kept.into_iter()
        .map(|c| BallRegion {
            center: (f64::from(c.x), f64::from(c.y)),
            radius: c.radius,
            provenance: Provenance::Detected,
        })
        .collect()
}

/// Keep only balls whose quantized radius (`round(r / bin) * bin`) equals
/// the histogram mode; ties on the mode go to the larger radius bin.
pub fn filter_by_radius_mode(
    balls: &[BallRegion],
    bin_width: f64,
) -> Result<(Vec<BallRegion>, RadiusHistogram), SegmentError> {
    if balls.is_empty() {
        return Err(SegmentError::EmptyInput);
    }
    assert!(bin_width >= 1.0);
    let bin_of = |r: f64| (r / bin_width).round() as i64;
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for b in balls {
        *counts.entry(bin_of(b.radius)).or_insert(0) += 1;
    }
    let mut mode_bin = 0i64;
    let mut mode_count = 0usize;
    for (&bin, &count) in &counts {
        // ascending iteration + >= keeps the larger bin on ties
        if count >= mode_count {
            mode_bin = bin;
            mode_count = count;
        }
    }
    let kept = balls
        .iter()
        .filter(|b| bin_of(b.radius) == mode_bin)
        .cloned()
        .collect();
    let hist = RadiusHistogram {
        bin_width,
        counts,
        mode_radius: mode_bin as f64 * bin_width,
    };
    Ok((kept, hist))
}

/// Result of gap interpolation. `too_few` flags inputs with fewer than
/// two balls, which are passed through unchanged.
#[derive(Debug, Clone)]
pub struct InterpolationOutcome {
    pub balls: Vec<BallRegion>,
    pub too_few: bool,
}

/// Detect and fill grid gaps: balls are grouped into rows by center y,
/// rows are sorted by x, and any neighbor gap larger than
/// `gap_factor * d_ref` (d_ref = minimum neighbor distance over all rows)
/// is filled with `round(gap / d_ref) - 1` equally spaced balls whose
/// radius is the neighbor average. Detected balls are never moved or
/// removed; interpolated ones are appended.
pub fn interpolate_missing(balls: &[BallRegion], p: &SegmentationParams) -> InterpolationOutcome {
    if balls.len() < 2 {
        return InterpolationOutcome {
            balls: balls.to_vec(),
            too_few: true,
        };
    }
    let tolerance = p.row_tolerance.unwrap_or_else(|| {
        let mut radii: Vec<f64> = balls.iter().map(|b| b.radius).collect();
        radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
        radii[radii.len() / 2] / 2.0
    });

    // group into rows by center y
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&a, &b| {
        balls[a]
            .center
            .1
            .partial_cmp(&balls[b].center.1)
            .unwrap()
            .then(balls[a].center.0.partial_cmp(&balls[b].center.0).unwrap())
    });
    let mut rows: Vec<Vec<usize>> = Vec::new();
    let mut row_mean_y = f64::NAN;
    for idx in order {
        let y = balls[idx].center.1;
        match rows.last_mut() {
            Some(row) if (y - row_mean_y).abs() <= tolerance => {
                row.push(idx);
                let n = row.len() as f64;
                row_mean_y += (y - row_mean_y) / n;
            }
            _ => {
                rows.push(vec![idx]);
                row_mean_y = y;
            }
        }
    }
    for row in &mut rows {
        row.sort_by(|&a, &b| balls[a].center.0.partial_cmp(&balls[b].center.0).unwrap());
    }

    let dist = |a: &BallRegion, b: &BallRegion| {
        let (dx, dy) = (b.center.0 - a.center.0, b.center.1 - a.center.1);
        (dx * dx + dy * dy).sqrt()
    };
    let mut d_ref = f64::INFINITY;
    for row in &rows {
        for pair in row.windows(2) {
            d_ref = d_ref.min(dist(&balls[pair[0]], &balls[pair[1]]));
        }
    }
    let mut out = balls.to_vec();
    if !d_ref.is_finite() {
        // every row is a singleton; no reference distance to work with
        return InterpolationOutcome {
            balls: out,
            too_few: false,
        };
    }

    for row in &rows {
        for pair in row.windows(2) {
            let (a, b) = (&balls[pair[0]], &balls[pair[1]]);
            let gap = dist(a, b);
            if gap <= p.gap_factor * d_ref {
                continue;
            }
            let missing = ((gap / d_ref).round() as i64 - 1).max(1);
            let radius = (a.radius + b.radius) / 2.0;
            for i in 1..=missing {
                let t = i as f64 / (missing + 1) as f64;
                out.push(BallRegion {
                    center: (
                        a.center.0 + t * (b.center.0 - a.center.0),
                        a.center.1 + t * (b.center.1 - a.center.1),
                    ),
                    radius,
                    provenance: Provenance::Interpolated,
                });
            }
        }
    }
    InterpolationOutcome {
        balls: out,
        too_few: false,
    }
}

/// Full segmentation: threshold, detect circles, keep the radius mode,
/// interpolate gaps, and sort the result row-major (y, then x). The
/// composition is deterministic for identical input bytes.
pub fn segment_balls(img: &GrayImage, p: &SegmentationParams) -> Result<Vec<BallRegion>, SegmentError> {
    let mask = threshold_by_slices(img, p);
    let detected = detect_circles(&mask, (p.r_min, p.r_max));
    if detected.is_empty() {
        return Err(SegmentError::NoBallsDetected);
    }
    let (kept, _hist) = filter_by_radius_mode(&detected, p.radius_bin_width)?;
    let mut balls = interpolate_missing(&kept, p).balls;
    balls.sort_by(|a, b| {
        a.center
            .1
            .partial_cmp(&b.center.1)
            .unwrap()
            .then(a.center.0.partial_cmp(&b.center.0).unwrap())
    });
    Ok(balls)
}
