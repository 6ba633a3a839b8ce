//! Laplacian-of-Gaussian edge detection on ball crops, and classification
//! of the resulting edge pixels into closed contours (filled directly as
//! void candidates) and open edge pixels (handed to the ring scanner).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage};

#[derive(Debug, Error)]
pub enum EdgeError {
    #[error("crop {crop_w}x{crop_h} is smaller than the {kernel}x{kernel} LoG kernel")]
    CropTooSmall {
        crop_w: u32,
        crop_h: u32,
        kernel: u32,
    },
    #[error("sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
}

/// Edge-detection knobs. `sigma` trades localization against noise
/// rejection; `min_slope` discards zero crossings whose response step is
/// too shallow to be a real edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdgeParams {
    pub sigma: f64,
    pub min_slope: f64,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            min_slope: 1.0,
        }
    }
}

/// Signed LoG convolution output for one crop.
#[derive(Debug, Clone)]
pub struct LogResponse {
    width: u32,
    height: u32,
    values: Vec<f64>,
    pub sigma: f64,
}

impl LogResponse {
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[(y as usize) * (self.width as usize) + x as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Edge pixels sitting on zero crossings of the LoG response, plus the
/// sign of the response at every pixel for downstream edge-polarity
/// queries.
#[derive(Debug, Clone)]
pub struct EdgeMask {
    pub mask: BinaryMask,
    signs: Vec<i8>,
}

impl EdgeMask {
    pub fn dims(&self) -> (u32, u32) {
        self.mask.dims()
    }

    #[inline]
    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.mask.get(x, y)
    }

    /// Sign of the LoG response at a pixel: -1, 0, or +1.
    #[inline]
    pub fn sign(&self, x: u32, y: u32) -> i8 {
        self.signs[(y as usize) * (self.mask.width() as usize) + x as usize]
    }

    /// Build directly from a pixel mask (signs all zero). Used by the
    /// baseline after bridging, where no response underlies the bridges.
    pub fn from_mask(mask: BinaryMask) -> Self {
        let signs = vec![0i8; (mask.width() as usize) * (mask.height() as usize)];
        Self { mask, signs }
    }
}

/// Edge chains split by topology: pixel loops that close on themselves,
/// and everything else.
#[derive(Debug, Clone, Default)]
pub struct ContourSet {
    /// Each loop is an ordered 8-connected cycle of length >= 4.
    pub closed: Vec<Vec<(u32, u32)>>,
    /// Edge pixels on no closed loop, sorted row-major.
    pub open: Vec<(u32, u32)>,
}

impl ContourSet {
    /// The open pixels as a mask (the scanner's input).
    pub fn open_mask(&self, dims: (u32, u32)) -> BinaryMask {
        let mut mask = BinaryMask::new(dims.0, dims.1);
        for &(x, y) in &self.open {
            mask.set(x, y, true);
        }
        mask
    }
}

/// Discrete LoG kernel of side `2*ceil(3*sigma)+1`, normalized to zero
/// sum so constant regions produce exactly zero response.
pub fn log_kernel(sigma: f64) -> (Vec<f64>, u32) {
    let half = (3.0 * sigma).ceil() as i32;
    let side = (2 * half + 1) as u32;
    let s2 = sigma * sigma;
    let mut kernel = Vec::with_capacity((side * side) as usize);
    for y in -half..=half {
        for x in -half..=half {
            let r2 = f64::from(x * x + y * y);
            kernel.push((r2 - 2.0 * s2) / (s2 * s2) * (-r2 / (2.0 * s2)).exp());
        }
    }
    let mean = kernel.iter().sum::<f64>() / kernel.len() as f64;
    for v in &mut kernel {
        *v -= mean;
    }
    (kernel, side)
}

/// Convolve the crop with the LoG kernel. Borders are handled by edge
/// replication.
pub fn log_response(crop: &GrayImage, sigma: f64) -> Result<LogResponse, EdgeError> {
    if sigma <= 0.0 {
        return Err(EdgeError::NonPositiveSigma(sigma));
    }
    let (kernel, side) = log_kernel(sigma);
    let (w, h) = crop.dims();
    if w < side || h < side {
        return Err(EdgeError::CropTooSmall {
            crop_w: w,
            crop_h: h,
            kernel: side,
        });
    }
    let half = (side / 2) as i64;
    let mut values = vec![0.0f64; (w as usize) * (h as usize)];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            let mut k = 0usize;
            for ky in -half..=half {
                let sy = (y + ky).clamp(0, h as i64 - 1) as u32;
                for kx in -half..=half {
                    let sx = (x + kx).clamp(0, w as i64 - 1) as u32;
                    acc += kernel[k] * f64::from(crop.get(sx, sy));
                    k += 1;
                }
            }
            values[(y as usize) * (w as usize) + x as usize] = acc;
        }
    }
    Ok(LogResponse {
        width: w,
        height: h,
        values,
        sigma,
    })
}

/// Responses this close to zero count as zero: the zero-sum kernel on a
/// constant region leaves float residue around 1e-13 whose sign is
/// meaningless.
pub const RESPONSE_EPS: f64 = 1e-9;

/// Zero-crossing extraction. For each 4-neighbor pair with strictly
/// opposite response signs and a step of at least `min_slope`, the pixel
/// on the negative-response side becomes the edge pixel. A bright region
/// on a darker surround — a void on solder — drives the response negative
/// just inside its boundary, so this convention puts the contour on the
/// void's own pixels instead of smearing it across both sides (which
/// would leave no traceable thin chains at all).
pub fn edge_mask(resp: &LogResponse, min_slope: f64) -> EdgeMask {
    let (w, h) = resp.dims();
    let mut mask = BinaryMask::new(w, h);
    let mut signs = vec![0i8; (w as usize) * (h as usize)];
    for y in 0..h {
        for x in 0..w {
            let v = resp.get(x, y);
            signs[(y as usize) * (w as usize) + x as usize] = if v > RESPONSE_EPS {
                1
            } else if v < -RESPONSE_EPS {
                -1
            } else {
                0
            };
        }
    }
    let check = |ax: u32, ay: u32, bx: u32, by: u32, mask: &mut BinaryMask| {
        let a = resp.get(ax, ay);
        let b = resp.get(bx, by);
        let opposite = (a > RESPONSE_EPS && b < -RESPONSE_EPS)
            || (a < -RESPONSE_EPS && b > RESPONSE_EPS);
        if opposite && (a - b).abs() >= min_slope {
            if a < 0.0 {
                mask.set(ax, ay, true);
            } else {
                mask.set(bx, by, true);
            }
        }
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                check(x, y, x + 1, y, &mut mask);
            }
            if y + 1 < h {
                check(x, y, x, y + 1, &mut mask);
            }
        }
    }
    EdgeMask { mask, signs }
}

const NEIGHBORS_8: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Trace 8-connected edge chains. A connected component forms a closed
/// loop when every one of its pixels touches exactly two others in the
/// component and the cycle is at least 4 pixels long; all other edge
/// pixels are open.
pub fn classify_contours(edges: &EdgeMask) -> ContourSet {
    classify_mask(&edges.mask)
}

/// [`classify_contours`] on a bare pixel mask.
pub fn classify_mask(mask: &BinaryMask) -> ContourSet {
    let (w, h) = mask.dims();
    let idx = |x: u32, y: u32| (y as usize) * (w as usize) + x as usize;
    let neighbors = |x: u32, y: u32| {
        NEIGHBORS_8.iter().filter_map(move |&(dx, dy)| {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 && mask.get(nx as u32, ny as u32)
            {
                Some((nx as u32, ny as u32))
            } else {
                None
            }
        })
    };

    let mut visited = vec![false; (w as usize) * (h as usize)];
    let mut set = ContourSet::default();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) || visited[idx(x, y)] {
                continue;
            }
            // collect the component
            let mut component = Vec::new();
            let mut queue = std::collections::VecDeque::from([(x, y)]);
            visited[idx(x, y)] = true;
            while let Some((cx, cy)) = queue.pop_front() {
                component.push((cx, cy));
                for (nx, ny) in neighbors(cx, cy) {
                    if !visited[idx(nx, ny)] {
                        visited[idx(nx, ny)] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            let cyclic = component.len() >= 4
                && component
                    .iter()
                    .all(|&(cx, cy)| neighbors(cx, cy).count() == 2);
            if cyclic {
                // walk the cycle in order, starting from the smallest pixel
                let start = *component.iter().min_by_key(|&&(cx, cy)| (cy, cx)).unwrap();
                let mut loop_pixels = vec![start];
                let mut prev = start;
                let mut cur = neighbors(start.0, start.1).min_by_key(|&(cx, cy)| (cy, cx)).unwrap();
                while cur != start {
                    loop_pixels.push(cur);
                    let next = neighbors(cur.0, cur.1).find(|&n| n != prev).unwrap();
                    prev = cur;
                    cur = next;
                }
                set.closed.push(loop_pixels);
            } else {
                set.open.extend(component);
            }
        }
    }
    set.open.sort_by_key(|&(x, y)| (y, x));
    set
}

/// A closed loop whose median pixel distance to the ball center is at
/// least this fraction of the ball radius is the ball's own outline (the
/// solder/board transition that every crop contains), not a void.
pub const BALL_OUTLINE_RATIO: f64 = 0.95;

/// Drop closed loops that trace the ball outline rather than a void.
/// Genuine voids sit inside the ball, so even one hugging the boundary
/// has most of its contour well below the outline radius.
pub fn filter_ball_outline(set: ContourSet, center: (f64, f64), radius: f64) -> ContourSet {
    let closed = set
        .closed
        .into_iter()
        .filter(|loop_pixels| {
            let mut dists: Vec<f64> = loop_pixels
                .iter()
                .map(|&(x, y)| {
                    let (dx, dy) = (f64::from(x) - center.0, f64::from(y) - center.1);
                    (dx * dx + dy * dy).sqrt()
                })
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            dists[dists.len() / 2] < BALL_OUTLINE_RATIO * radius
        })
        .collect();
    ContourSet {
        closed,
        open: set.open,
    }
}

/// Fill every closed loop: boundary plus interior, with nesting handled
/// by the even-odd rule (a pixel inside an odd number of loops is
/// filled). Interiors are determined by 4-connected flood from the image
/// border, which an 8-connected loop cannot leak through.
pub fn fill_closed(contours: &ContourSet, dims: (u32, u32)) -> BinaryMask {
    let (w, h) = dims;
    let mut inside_acc = vec![false; (w as usize) * (h as usize)];
    let mut out = BinaryMask::new(w, h);
    for loop_pixels in &contours.closed {
        let mut on_loop = vec![false; (w as usize) * (h as usize)];
        for &(x, y) in loop_pixels {
            on_loop[(y as usize) * (w as usize) + x as usize] = true;
            out.set(x, y, true);
        }
        // 4-connected flood from every border pixel not on the loop
        let mut exterior = vec![false; (w as usize) * (h as usize)];
        let mut queue = std::collections::VecDeque::new();
        let seed = |x: u32, y: u32, queue: &mut std::collections::VecDeque<(u32, u32)>,
                    exterior: &mut Vec<bool>| {
            let i = (y as usize) * (w as usize) + x as usize;
            if !on_loop[i] && !exterior[i] {
                exterior[i] = true;
                queue.push_back((x, y));
            }
        };
        for x in 0..w {
            seed(x, 0, &mut queue, &mut exterior);
            seed(x, h - 1, &mut queue, &mut exterior);
        }
        for y in 0..h {
            seed(0, y, &mut queue, &mut exterior);
            seed(w - 1, y, &mut queue, &mut exterior);
        }
        while let Some((cx, cy)) = queue.pop_front() {
            for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                    seed(nx as u32, ny as u32, &mut queue, &mut exterior);
                }
            }
        }
        for i in 0..inside_acc.len() {
            if !exterior[i] && !on_loop[i] {
                inside_acc[i] ^= true;
            }
        }
    }
    for y in 0..h {
        for x in 0..w {
            if inside_acc[(y as usize) * (w as usize) + x as usize] {
                out.set(x, y, true);
            }
        }
    }
    out
}
