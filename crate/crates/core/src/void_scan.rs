//! 1D void generation: every ring of the ball is scanned in angular
//! order; a span that starts at a positive edge (background-to-void
//! transition), ends at the pixel before a negative edge, and sits far
//! enough above the ring's background intensity becomes a 1D void.
//!
//! Rings are independent of one another, and within one ring no two
//! accepted spans share a pixel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::edge_detect::EdgeMask;
use crate::raster::{ring_pixels, GrayImage, RingSample};

/// How a collected span is accepted as a void.
///
/// `Relative` (the default) requires both the span mean and the span
/// maximum to clear the ring background by `thr_1d` — on 0-255 imagery an
/// absolute mean test is vacuous. `Literal` keeps the absolute reading
/// (mean > thr and max-min spread > thr) for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceRule {
    #[default]
    Relative,
    Literal,
}

/// Ring-scanning knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanParams {
    /// Intensity margin a span must clear to count as a void.
    pub thr_1d: f64,
    /// A walk that consumes more than this fraction of the ring without
    /// hitting a negative edge is rejected.
    pub max_span_fraction: f64,
    pub acceptance_rule: AcceptanceRule,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            thr_1d: 6.0,
            max_span_fraction: 0.5,
            acceptance_rule: AcceptanceRule::Relative,
        }
    }
}

/// An accepted angular span on one ring. `beta_start..=beta_end` are
/// cyclic positions in the ring's pixel list; the negative-edge pixel is
/// excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct Void1D {
    pub ring: u32,
    pub beta_start: usize,
    pub beta_end: usize,
    pub pixels: Vec<(u32, u32)>,
    pub mean_intensity: f64,
    pub span_max: u8,
    pub span_min: u8,
}

impl Void1D {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

#[inline]
fn cyc(i: usize, delta: i64, len: usize) -> usize {
    (i as i64 + delta).rem_euclid(len as i64) as usize
}

// The rise into the position must be strict; the outer comparison admits
// a plateau so that a hard one-pixel step (…90, 97, 97…) still reads as a
// transition. Requiring strictness on both sides would make step edges
// invisible to the scanner. The edge-mask check accepts either pixel of
// the transition pair (beta-1, beta): the zero crossing lies between
// them, and the mask marks exactly one side.
fn has_edge_at_transition(
    beta: usize,
    ring: &RingSample,
    edges: &EdgeMask,
) -> bool {
    let len = ring.len();
    let (x, y) = ring.coords[beta];
    let (px, py) = ring.coords[cyc(beta, -1, len)];
    edges.is_edge(x, y) || edges.is_edge(px, py)
}

fn is_positive_edge(beta: usize, intensities: &[u8], ring: &RingSample, edges: &EdgeMask) -> bool {
    let len = intensities.len();
    let prev = intensities[cyc(beta, -1, len)];
    let cur = intensities[beta];
    let next = intensities[cyc(beta, 1, len)];
    prev < cur && cur <= next && has_edge_at_transition(beta, ring, edges)
}

fn is_negative_edge(beta: usize, intensities: &[u8], ring: &RingSample, edges: &EdgeMask) -> bool {
    let len = intensities.len();
    let prev = intensities[cyc(beta, -1, len)];
    let cur = intensities[beta];
    let next = intensities[cyc(beta, 1, len)];
    prev > cur && cur >= next && has_edge_at_transition(beta, ring, edges)
}

/// Ring positions that are positive edges: the intensity triple around
/// the position is strictly increasing and the pixel is in the edge mask.
/// Rings shorter than 3 pixels have no edges.
pub fn find_positive_edges(
    ring: &RingSample,
    intensities: &[u8],
    edges: &EdgeMask,
) -> Vec<usize> {
    assert_eq!(ring.len(), intensities.len());
    if ring.len() < 3 {
        return Vec::new();
    }
    (0..ring.len())
        .filter(|&beta| is_positive_edge(beta, intensities, ring, edges))
        .collect()
}

/// Walk cyclically from `start`, collecting positions until the first
/// negative edge. Returns `None` when the span cap is exceeded before a
/// negative edge shows up.
fn walk_span(
    ring: &RingSample,
    intensities: &[u8],
    edges: &EdgeMask,
    start: usize,
    p: &ScanParams,
) -> Option<Vec<usize>> {
    let len = ring.len();
    let cap = (p.max_span_fraction * len as f64).floor() as usize;
    let mut positions = vec![start];
    let mut cur = start;
    loop {
        let next = cyc(cur, 1, len);
        if next == start {
            return None; // wrapped the whole ring without a negative edge
        }
        if is_negative_edge(next, intensities, ring, edges) {
            return Some(positions);
        }
        positions.push(next);
        if positions.len() > cap {
            return None;
        }
        cur = next;
    }
}

fn build_void(ring: &RingSample, intensities: &[u8], positions: &[usize]) -> Void1D {
    let values: Vec<u8> = positions.iter().map(|&i| intensities[i]).collect();
    let mean = values.iter().map(|&v| f64::from(v)).sum::<f64>() / values.len() as f64;
    Void1D {
        ring: ring.radius,
        beta_start: positions[0],
        beta_end: *positions.last().unwrap(),
        pixels: positions.iter().map(|&i| ring.coords[i]).collect(),
        mean_intensity: mean,
        span_max: values.iter().copied().max().unwrap(),
        span_min: values.iter().copied().min().unwrap(),
    }
}

fn accept(v: &Void1D, p: &ScanParams, background: f64) -> bool {
    match p.acceptance_rule {
        AcceptanceRule::Relative => {
            v.mean_intensity - background >= p.thr_1d
                && f64::from(v.span_max) - background >= p.thr_1d
        }
        AcceptanceRule::Literal => {
            v.mean_intensity > p.thr_1d && f64::from(v.span_max - v.span_min) > p.thr_1d
        }
    }
}

/// Scan one span from a positive edge at `start` and test it against the
/// acceptance rule with the given background estimate.
pub fn scan_span(
    ring: &RingSample,
    intensities: &[u8],
    edges: &EdgeMask,
    start: usize,
    p: &ScanParams,
    background: f64,
) -> Option<Void1D> {
    let positions = walk_span(ring, intensities, edges, start, p)?;
    let v = build_void(ring, intensities, &positions);
    accept(&v, p, background).then_some(v)
}

/// Scan all rings from `r_max` down to 1 and collect the accepted spans
/// per ring.
///
/// Rings are clipped to the ball disk (distance to center at most
/// `r_max`): the outermost ring would otherwise straddle the ball
/// outline and mix solder with board background, and that contrast reads
/// as a void. The background for a ring is the median intensity of its
/// pixels outside all candidate spans (whole-ring median when the
/// candidates cover everything) — away from voids the intensity along
/// one ring is uniform, so the ring is its own background reference.
/// Overlapping candidates are resolved longest-first, so a span nested
/// inside a wider walk never splits it.
pub fn detect_1d_voids(
    crop: &GrayImage,
    edges: &EdgeMask,
    center: (f64, f64),
    r_max: u32,
    p: &ScanParams,
) -> BTreeMap<u32, Vec<Void1D>> {
    assert!(r_max >= 1);
    let mut out = BTreeMap::new();
    for r in (1..=r_max).rev() {
        let mut ring = ring_pixels(center, r, crop.dims());
        ring.coords.retain(|&(x, y)| {
            let (dx, dy) = (f64::from(x) - center.0, f64::from(y) - center.1);
            (dx * dx + dy * dy).sqrt() <= f64::from(r_max)
        });
        if ring.len() < 3 {
            continue;
        }
        let intensities = ring.sample(crop);
        let starts = find_positive_edges(&ring, &intensities, edges);
        let mut candidates: Vec<Vec<usize>> = starts
            .iter()
            .filter_map(|&s| walk_span(&ring, &intensities, edges, s, p))
            .collect();
        if candidates.is_empty() {
            continue;
        }

        let mut covered = vec![false; ring.len()];
        for positions in &candidates {
            for &i in positions {
                covered[i] = true;
            }
        }
        let mut outside: Vec<u8> = (0..ring.len())
            .filter(|&i| !covered[i])
            .map(|i| intensities[i])
            .collect();
        let background = if outside.is_empty() {
            let mut all = intensities.clone();
            f64::from(crate::raster::median_u8(&mut all))
        } else {
            f64::from(crate::raster::median_u8(&mut outside))
        };

        // longest first; ties by mean then start position. Length and mean
        // are rotation-invariant, which keeps detection equivariant under
        // crop rotations.
        let mut keyed: Vec<(Void1D, Vec<usize>)> = candidates
            .drain(..)
            .map(|positions| (build_void(&ring, &intensities, &positions), positions))
            .collect();
        keyed.sort_by(|a, b| {
            b.1.len()
                .cmp(&a.1.len())
                .then(b.0.mean_intensity.partial_cmp(&a.0.mean_intensity).unwrap())
                .then(a.0.beta_start.cmp(&b.0.beta_start))
        });
        let mut claimed = vec![false; ring.len()];
        let mut accepted: Vec<Void1D> = Vec::new();
        for (v, positions) in keyed {
            if !accept(&v, p, background) {
                continue;
            }
            if positions.iter().any(|&i| claimed[i]) {
                continue;
            }
            for &i in &positions {
                claimed[i] = true;
            }
            accepted.push(v);
        }
        if !accepted.is_empty() {
            accepted.sort_by_key(|v| v.beta_start);
            out.insert(r, accepted);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BinaryMask;

    /// A synthetic 16-pixel "ring" laid out on a straight line so the
    /// coordinates are easy to reason about; the scanner only cares about
    /// list order, not geometry.
    fn line_ring(intensities: &[u8], edge_positions: &[usize]) -> (RingSample, Vec<u8>, EdgeMask) {
        let len = intensities.len();
        let ring = RingSample {
            radius: 5,
            coords: (0..len as u32).map(|i| (i, 0)).collect(),
        };
        let mut mask = BinaryMask::new(len as u32, 1);
        for &i in edge_positions {
            mask.set(i as u32, 0, true);
        }
        (ring, intensities.to_vec(), EdgeMask::from_mask(mask))
    }

    #[test]
    fn increasing_triple_at_edge_pixel_is_positive() {
        let mut vals = vec![100u8; 16];
        vals[2] = 103;
        vals[3] = 110;
        vals[4] = 110;
        let (ring, intensities, edges) = line_ring(&vals, &[2]);
        // 100 < 103 < 110 and position 2 is an edge pixel; position 3
        // rides the same transition (103 < 110, crossing pair contains 2)
        let found = find_positive_edges(&ring, &intensities, &edges);
        assert!(found.contains(&2));
        assert_eq!(found, vec![2, 3]);
    }

    #[test]
    fn hard_step_reads_as_positive_edge() {
        // a one-pixel step 100 -> 110 with the crossing marked on either
        // side of the transition pair
        let mut vals = vec![100u8; 16];
        for v in &mut vals[3..=6] {
            *v = 110;
        }
        let (ring, intensities, edges) = line_ring(&vals, &[2]);
        assert_eq!(find_positive_edges(&ring, &intensities, &edges), vec![3]);
        let (ring, intensities, edges) = line_ring(&vals, &[3]);
        assert_eq!(find_positive_edges(&ring, &intensities, &edges), vec![3]);
    }

    #[test]
    fn uniform_ring_has_no_positive_edges() {
        let vals = vec![100u8; 16];
        let (ring, intensities, edges) = line_ring(&vals, &[2, 5, 9]);
        assert!(find_positive_edges(&ring, &intensities, &edges).is_empty());
    }

    #[test]
    fn decreasing_triple_is_not_positive() {
        let mut vals = vec![100u8; 16];
        vals[1] = 110;
        vals[2] = 105;
        vals[3] = 100;
        let (ring, intensities, edges) = line_ring(&vals, &[2]);
        assert!(find_positive_edges(&ring, &intensities, &edges).is_empty());
    }

    /// Ring with a bump of the given plateau intensity: positive edge at
    /// 2, plateau 3..=6, negative edge at 7.
    fn bump_ring(plateau: u8) -> (RingSample, Vec<u8>, EdgeMask) {
        let mut vals = vec![100u8; 16];
        vals[2] = 100 + (plateau - 100) / 2;
        for v in &mut vals[3..=6] {
            *v = plateau;
        }
        vals[7] = 100 + (plateau - 100) / 2;
        // triple at 7: (plateau, mid, 100) strictly decreasing
        line_ring(&vals.clone(), &[2, 7])
    }

    #[test]
    fn span_clearing_background_is_accepted() {
        let (ring, intensities, edges) = bump_ring(110);
        let starts = find_positive_edges(&ring, &intensities, &edges);
        assert!(starts.contains(&2));
        let v = scan_span(&ring, &intensities, &edges, 2, &ScanParams::default(), 100.0)
            .expect("span should be accepted");
        // span runs from the positive edge up to the pixel before the
        // negative edge at 7
        assert_eq!(v.beta_start, 2);
        assert_eq!(v.beta_end, 6);
        assert_eq!(v.len(), 5);
        assert!(v.mean_intensity - 100.0 >= 6.0);
        assert_eq!(v.span_max, 110);
    }

    #[test]
    fn span_too_close_to_background_is_rejected() {
        let (ring, intensities, edges) = bump_ring(104);
        assert!(scan_span(&ring, &intensities, &edges, 2, &ScanParams::default(), 100.0).is_none());
    }

    #[test]
    fn missing_negative_edge_hits_the_span_cap() {
        let mut vals = vec![100u8; 16];
        vals[2] = 105;
        for v in &mut vals[3..] {
            *v = 110;
        }
        let (ring, intensities, edges) = line_ring(&vals, &[2]); // no negative edge anywhere
        assert!(scan_span(&ring, &intensities, &edges, 2, &ScanParams::default(), 100.0).is_none());
    }

    #[test]
    fn literal_rule_uses_absolute_mean_and_spread() {
        let (ring, intensities, edges) = bump_ring(110);
        let p = ScanParams {
            acceptance_rule: AcceptanceRule::Literal,
            ..ScanParams::default()
        };
        // mean ~108 > 6 and spread 110-105=5 < 6? span is 105,110,110,110,110
        // spread = 5, fails the literal spread test
        assert!(scan_span(&ring, &intensities, &edges, 2, &p, 100.0).is_none());
        let (ring, intensities, edges) = bump_ring(120);
        // span 110,120,120,120,120: spread 10 > 6, mean 118 > 6
        assert!(scan_span(&ring, &intensities, &edges, 2, &p, 100.0).is_some());
    }

    #[test]
    fn spans_never_include_the_negative_edge_and_may_wrap() {
        // bump wrapping through position 0: plateau at 14,15,0,1
        let mut vals = vec![100u8; 16];
        vals[13] = 105;
        vals[14] = 110;
        vals[15] = 110;
        vals[0] = 110;
        vals[1] = 110;
        vals[2] = 105;
        let (ring, intensities, edges) = line_ring(&vals, &[13, 2]);
        let starts = find_positive_edges(&ring, &intensities, &edges);
        assert!(starts.contains(&13));
        let v = scan_span(&ring, &intensities, &edges, 13, &ScanParams::default(), 100.0).unwrap();
        assert_eq!(v.beta_start, 13);
        assert_eq!(v.beta_end, 1);
        assert_eq!(v.len(), 5);
        assert!(!v.pixels.contains(&(2, 0)), "negative edge pixel included");
    }

    #[test]
    fn r_max_one_uniform_crop_yields_empty_map() {
        let crop = GrayImage::new(9, 9, 90);
        let edges = EdgeMask::from_mask(BinaryMask::new(9, 9));
        let voids = detect_1d_voids(&crop, &edges, (4.0, 4.0), 1, &ScanParams::default());
        assert!(voids.is_empty());
    }
}
