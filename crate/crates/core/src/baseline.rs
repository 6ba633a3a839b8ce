//! Reference void detector used for comparisons: open contours are closed
//! by joining mutually nearest endpoints with straight pixel bridges,
//! closed contours are filled, and the same labeling/measurement path as
//! the ring scanner runs on the result. No span intensity checks — the
//! weakness the scanning approach addresses.

use serde::{Deserialize, Serialize};

use crate::ball_segment::BallRegion;
use crate::edge_detect::{classify_mask, fill_closed, filter_ball_outline, EdgeMask};
use crate::raster::{disk_mask, BinaryMask, GrayImage};
use crate::void_assemble::{measure, regions_from_mask, InspectError, InspectionReport};

/// Baseline knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// Endpoints farther apart than this are never bridged. Zero disables
    /// bridging entirely, reducing the baseline to closed-contour filling.
    pub max_join_distance: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            max_join_distance: 5.0,
        }
    }
}

/// All pixels of the straight segment between two points (inclusive).
pub fn line_pixels(a: (u32, u32), b: (u32, u32)) -> Vec<(u32, u32)> {
    let (mut x0, mut y0) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::new();
    loop {
        out.push((x0 as u32, y0 as u32));
        if (x0, y0) == (x1, y1) {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    out
}

/// Endpoints of the open chains: open pixels with at most one open
/// 8-neighbor, sorted row-major.
fn chain_endpoints(open: &[(u32, u32)]) -> Vec<(u32, u32)> {
    let set: std::collections::HashSet<(u32, u32)> = open.iter().copied().collect();
    let mut endpoints: Vec<(u32, u32)> = open
        .iter()
        .copied()
        .filter(|&(x, y)| {
            let mut degree = 0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy) == (0, 0) {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && ny >= 0 && set.contains(&(nx as u32, ny as u32)) {
                        degree += 1;
                    }
                }
            }
            degree <= 1
        })
        .collect();
    endpoints.sort_by_key(|&(x, y)| (y, x));
    endpoints
}

fn dist(a: (u32, u32), b: (u32, u32)) -> f64 {
    let (dx, dy) = (
        f64::from(a.0) - f64::from(b.0),
        f64::from(a.1) - f64::from(b.1),
    );
    (dx * dx + dy * dy).sqrt()
}

/// Pair endpoints that are each other's nearest endpoint within
/// `max_join_distance`, closest pairs first.
fn mutual_nearest_pairs(endpoints: &[(u32, u32)], max_dist: f64) -> Vec<((u32, u32), (u32, u32))> {
    let nearest = |i: usize| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (j, &q) in endpoints.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = dist(endpoints[i], q);
            if d > max_dist {
                continue;
            }
            let better = match best {
                None => true,
                Some((bj, bd)) => d < bd || (d == bd && q < endpoints[bj]),
            };
            if better {
                best = Some((j, d));
            }
        }
        best.map(|(j, _)| j)
    };
    let mut used = vec![false; endpoints.len()];
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..endpoints.len() {
        if let Some(j) = nearest(i) {
            if i < j && nearest(j) == Some(i) {
                pairs.push((i, j, dist(endpoints[i], endpoints[j])));
            }
        }
    }
    pairs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap().then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    for (i, j, _) in pairs {
        if !used[i] && !used[j] {
            used[i] = true;
            used[j] = true;
            out.push((endpoints[i], endpoints[j]));
        }
    }
    out
}

/// Reference detection on one crop: bridge the open-chain endpoints, fill
/// whatever closes, and measure. Original edge pixels are never removed.
pub fn baseline_detect(
    crop: &GrayImage,
    edges: &EdgeMask,
    ball: &BallRegion,
    p: &BaselineParams,
    a_min: usize,
) -> Result<InspectionReport, InspectError> {
    let dims = crop.dims();
    let contours = classify_mask(&edges.mask);

    let mut augmented: BinaryMask = edges.mask.clone();
    if p.max_join_distance > 0.0 {
        let endpoints = chain_endpoints(&contours.open);
        for (a, b) in mutual_nearest_pairs(&endpoints, p.max_join_distance) {
            for (x, y) in line_pixels(a, b) {
                augmented.set(x, y, true);
            }
        }
    }

    let center = (f64::from(dims.0 - 1) / 2.0, f64::from(dims.1 - 1) / 2.0);
    // re-classify after bridging; a bridged ball outline is still the
    // ball outline, so the filter runs on the result
    let closed = filter_ball_outline(classify_mask(&augmented), center, ball.radius);
    let disk = disk_mask(center, ball.radius, dims);
    let mut fill = fill_closed(&closed, dims);
    fill.and(&disk);
    let regions = regions_from_mask(&fill, a_min);
    measure(regions, ball, dims)
}
