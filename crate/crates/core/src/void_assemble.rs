//! 2D void generation: 1D spans are stacked across rings (outermost
//! first) into 2D voids, merged with the closed-contour fills, labeled by
//! connected components, filtered by minimum area, and measured as a void
//! percentage of the ball.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ball_segment::BallRegion;
use crate::baseline::BaselineParams;
use crate::edge_detect::{
    classify_contours, edge_mask, fill_closed, filter_ball_outline, log_response, EdgeError,
    EdgeParams,
};
use crate::raster::{disk_mask, BinaryMask, GrayImage, LabelMap};
use crate::void_scan::{detect_1d_voids, ScanParams, Void1D};

#[derive(Debug, Error)]
pub enum InspectError {
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error("ball area is zero (radius {0})")]
    BallAreaZero(f64),
    #[error("ball radius {0} rounds below 1, nothing to scan")]
    RadiusTooSmall(f64),
}

/// Assembly and filtering knobs. `a_min` is the smallest area a void
/// region may have: in 8-connectivity the pixels within distances 1 and 2
/// number 1 and 9, so 9 is the smallest plausible void.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssemblyParams {
    /// A span attaches to a 2D void only when their mean intensities agree
    /// within this tolerance.
    pub intensity_tol: f64,
    /// Minimum region area in pixels.
    pub a_min: usize,
}

impl Default for AssemblyParams {
    fn default() -> Self {
        Self {
            intensity_tol: 6.0,
            a_min: 9,
        }
    }
}

/// A stack of 1D voids assembled across consecutive rings.
#[derive(Debug, Clone)]
pub struct Void2D {
    pub spans: Vec<Void1D>,
    /// Union of the member spans' pixels, sorted row-major.
    pub pixels: Vec<(u32, u32)>,
    /// Pixel-count-weighted mean of the member span means.
    pub mean_intensity: f64,
    /// Whether the void was still accepting attachments when assembly
    /// finished (it attached a span on the innermost processed ring).
    pub active: bool,
}

/// One labeled void region after connected-component filtering.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VoidRegion {
    pub label: u32,
    /// Pixels sorted row-major.
    pub pixels: Vec<(u32, u32)>,
    pub area: usize,
    pub centroid: (f64, f64),
}

/// The per-ball output contract: detected void regions plus the area
/// bookkeeping behind the reported percentage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InspectionReport {
    pub ball: BallRegion,
    pub ball_area: usize,
    pub regions: Vec<VoidRegion>,
    pub total_void_area: usize,
    /// `100 * void area / ball area`, rounded to two decimals.
    pub void_percentage: f64,
}

/// All knobs for a full per-ball inspection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectParams {
    pub edge: EdgeParams,
    pub scan: ScanParams,
    pub assembly: AssemblyParams,
}

struct Build {
    spans: Vec<Void1D>,
    pixels: Vec<(u32, u32)>,
    pixel_count: usize,
    mean: f64,
    active: bool,
    /// Pixels attached on the previous ring — the only pixels a new span
    /// may connect to.
    prev_frontier: HashSet<(u32, u32)>,
    /// Pixels attached on the ring being processed.
    curr_attach: HashSet<(u32, u32)>,
    created_this_ring: bool,
}

impl Build {
    fn new(span: &Void1D) -> Self {
        Self {
            spans: vec![span.clone()],
            pixels: span.pixels.clone(),
            pixel_count: span.len(),
            mean: span.mean_intensity,
            active: true,
            prev_frontier: HashSet::new(),
            curr_attach: span.pixels.iter().copied().collect(),
            created_this_ring: true,
        }
    }

    fn attach(&mut self, span: &Void1D) {
        let n = span.len();
        self.mean = (self.mean * self.pixel_count as f64 + span.mean_intensity * n as f64)
            / (self.pixel_count + n) as f64;
        self.pixel_count += n;
        self.spans.push(span.clone());
        self.pixels.extend_from_slice(&span.pixels);
        self.curr_attach.extend(span.pixels.iter().copied());
    }

    fn absorb(&mut self, other: Build) {
        self.mean = (self.mean * self.pixel_count as f64
            + other.mean * other.pixel_count as f64)
            / (self.pixel_count + other.pixel_count) as f64;
        self.pixel_count += other.pixel_count;
        self.spans.extend(other.spans);
        self.pixels.extend(other.pixels);
        self.prev_frontier.extend(other.prev_frontier);
        self.curr_attach.extend(other.curr_attach);
    }

    fn touches(&self, span: &Void1D) -> bool {
        span.pixels.iter().any(|&(x, y)| {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if (dx, dy) == (0, 0) {
                        continue;
                    }
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0
                        && ny >= 0
                        && self.prev_frontier.contains(&(nx as u32, ny as u32))
                    {
                        return true;
                    }
                }
            }
            false
        })
    }
}

/// Assemble 1D spans into 2D voids, processing rings from the outermost
/// down to 1. A span attaches to an active void when (a) one of its
/// pixels is 8-connected to a void pixel on the ring above and (b) the
/// span mean agrees with the void's running mean within `intensity_tol`;
/// a span satisfying both for several voids merges them. A void that
/// attaches nothing on a ring is terminated and never reactivates —
/// reconnection across a skipped ring is left to the final
/// connected-component pass.
pub fn assemble_2d(spans: &BTreeMap<u32, Vec<Void1D>>, p: &AssemblyParams) -> Vec<Void2D> {
    let Some(&r_max) = spans.keys().next_back() else {
        return Vec::new();
    };
    let mut builds: Vec<Build> = Vec::new();
    for r in (1..=r_max).rev() {
        for b in &mut builds {
            b.created_this_ring = false;
        }
        for span in spans.get(&r).map(Vec::as_slice).unwrap_or(&[]) {
            let matches: Vec<usize> = builds
                .iter()
                .enumerate()
                .filter(|(_, b)| {
                    b.active
                        && (span.mean_intensity - b.mean).abs() <= p.intensity_tol
                        && b.touches(span)
                })
                .map(|(i, _)| i)
                .collect();
            match matches.split_first() {
                None => builds.push(Build::new(span)),
                Some((&first, rest)) => {
                    // detach the extra matches back-to-front so indices hold
                    for &i in rest.iter().rev() {
                        let other = builds.remove(i);
                        builds[first].absorb(other);
                    }
                    builds[first].attach(span);
                }
            }
        }
        for b in &mut builds {
            if b.created_this_ring {
                b.prev_frontier = std::mem::take(&mut b.curr_attach);
            } else if b.active {
                if b.curr_attach.is_empty() {
                    b.active = false;
                } else {
                    b.prev_frontier = std::mem::take(&mut b.curr_attach);
                }
            }
        }
    }
    builds
        .into_iter()
        .map(|b| {
            let mut pixels = b.pixels;
            pixels.sort_by_key(|&(x, y)| (y, x));
            pixels.dedup();
            Void2D {
                spans: b.spans,
                pixels,
                mean_intensity: b.mean,
                active: b.active,
            }
        })
        .collect()
}

/// Simple union-find for the two-pass labeling.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // rooting at the smaller index keeps labels stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Two-pass 8-connectivity labeling of a mask.
pub fn label_components(mask: &BinaryMask) -> LabelMap {
    let (w, h) = mask.dims();
    let mut labels = LabelMap::new(w, h);
    let mut uf = UnionFind::new(1);
    let mut next = 1u32;
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            // previously visited neighbors: W, NW, N, NE
            let mut neighbor_labels = [0u32; 4];
            let mut n = 0;
            for (dx, dy) in [(-1i64, 0i64), (-1, -1), (0, -1), (1, -1)] {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny >= 0 && ny < h as i64 {
                    let l = labels.get(nx as u32, ny as u32);
                    if l != 0 {
                        neighbor_labels[n] = l;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                labels.set(x, y, next);
                uf.parent.push(next as usize);
                next += 1;
            } else {
                let min = *neighbor_labels[..n].iter().min().unwrap();
                labels.set(x, y, min);
                for &l in &neighbor_labels[..n] {
                    uf.union(min as usize, l as usize);
                }
            }
        }
    }
    // second pass: resolve equivalences into contiguous labels 1..=K
    let mut remap: BTreeMap<usize, u32> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y);
            if l != 0 {
                let root = uf.find(l as usize);
                let next_id = remap.len() as u32 + 1;
                let id = *remap.entry(root).or_insert(next_id);
                labels.set(x, y, id);
            }
        }
    }
    labels
}

/// Union the 2D voids with the closed-contour fills, label the result,
/// drop components smaller than `a_min`, and renumber the survivors
/// `1..=K` by decreasing area.
pub fn finalize_voids(
    voids: &[Void2D],
    closed_fill: &BinaryMask,
    dims: (u32, u32),
    p: &AssemblyParams,
) -> Vec<VoidRegion> {
    let mut mask = closed_fill.clone();
    assert_eq!(mask.dims(), dims);
    for v in voids {
        for &(x, y) in &v.pixels {
            mask.set(x, y, true);
        }
    }
    regions_from_mask(&mask, p.a_min)
}

/// Label a mask and keep regions of at least `a_min` pixels, numbered by
/// decreasing area.
pub fn regions_from_mask(mask: &BinaryMask, a_min: usize) -> Vec<VoidRegion> {
    let labels = label_components(mask);
    let (w, h) = mask.dims();
    let mut by_label: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y);
            if l != 0 {
                by_label.entry(l).or_default().push((x, y));
            }
        }
    }
    let mut regions: Vec<Vec<(u32, u32)>> = by_label
        .into_values()
        .filter(|pixels| pixels.len() >= a_min)
        .collect();
    regions.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].1.cmp(&b[0].1)).then(a[0].0.cmp(&b[0].0)));
    regions
        .into_iter()
        .enumerate()
        .map(|(i, pixels)| {
            let area = pixels.len();
            let sum = pixels
                .iter()
                .fold((0.0, 0.0), |acc, &(x, y)| (acc.0 + f64::from(x), acc.1 + f64::from(y)));
            VoidRegion {
                label: i as u32 + 1,
                centroid: (sum.0 / area as f64, sum.1 / area as f64),
                area,
                pixels,
            }
        })
        .collect()
}

/// `100 * void_area / ball_area`, rounded to two decimals.
pub fn void_percentage(void_area: usize, ball_area: usize) -> f64 {
    ((void_area as f64 / ball_area as f64) * 100.0 * 100.0).round() / 100.0
}

/// Number of crop pixels inside the ball: distance to the crop center at
/// most `radius`.
pub fn ball_area(radius: f64, dims: (u32, u32)) -> usize {
    let center = (f64::from(dims.0 - 1) / 2.0, f64::from(dims.1 - 1) / 2.0);
    let mut count = 0usize;
    for y in 0..dims.1 {
        for x in 0..dims.0 {
            let (dx, dy) = (f64::from(x) - center.0, f64::from(y) - center.1);
            if (dx * dx + dy * dy).sqrt() <= radius {
                count += 1;
            }
        }
    }
    count
}

/// Wrap measured regions into the report contract.
pub fn measure(
    regions: Vec<VoidRegion>,
    ball: &BallRegion,
    dims: (u32, u32),
) -> Result<InspectionReport, InspectError> {
    let area = ball_area(ball.radius, dims);
    if area == 0 {
        return Err(InspectError::BallAreaZero(ball.radius));
    }
    let total: usize = regions.iter().map(|r| r.area).sum();
    Ok(InspectionReport {
        ball: ball.clone(),
        ball_area: area,
        total_void_area: total,
        void_percentage: void_percentage(total, area),
        regions,
    })
}

/// Full per-ball inspection: LoG edges, contour classification, closed
/// fills, ring scanning, 2D assembly, labeling, and measurement. The
/// final mask is clipped to the ball disk so the reported void area can
/// never exceed the ball area.
pub fn inspect_ball(
    crop: &GrayImage,
    ball: &BallRegion,
    params: &InspectParams,
) -> Result<InspectionReport, InspectError> {
    let r_max = ball.radius.round() as u32;
    if r_max < 1 {
        return Err(InspectError::RadiusTooSmall(ball.radius));
    }
    let dims = crop.dims();
    let center = (f64::from(dims.0 - 1) / 2.0, f64::from(dims.1 - 1) / 2.0);

    let resp = log_response(crop, params.edge.sigma)?;
    let edges = edge_mask(&resp, params.edge.min_slope);
    let contours = filter_ball_outline(classify_contours(&edges), center, ball.radius);
    let disk = disk_mask(center, ball.radius, dims);
    let mut closed_fill = fill_closed(&contours, dims);
    closed_fill.and(&disk);

    // only open edge pixels feed the scanner; closed loops were consumed
    // by the fill
    let open_edges = crate::edge_detect::EdgeMask::from_mask(contours.open_mask(dims));
    let spans = detect_1d_voids(crop, &open_edges, center, r_max, &params.scan);
    let voids = assemble_2d(&spans, &params.assembly);

    let mut mask = closed_fill;
    for v in &voids {
        for &(x, y) in &v.pixels {
            mask.set(x, y, true);
        }
    }
    mask.and(&disk);
    let regions = regions_from_mask(&mask, params.assembly.a_min);
    measure(regions, ball, dims)
}

/// Inspect with the reference (baseline) method; shares the measurement
/// path with [`inspect_ball`].
pub fn inspect_ball_baseline(
    crop: &GrayImage,
    ball: &BallRegion,
    edge: &EdgeParams,
    p: &BaselineParams,
    a_min: usize,
) -> Result<InspectionReport, InspectError> {
    let resp = log_response(crop, edge.sigma)?;
    let edges = edge_mask(&resp, edge.min_slope);
    crate::baseline::baseline_detect(crop, &edges, ball, p, a_min)
}
