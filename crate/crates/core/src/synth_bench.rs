//! Deterministic synthetic BGA X-ray generator with pixel-exact ground
//! truth, plus scoring of detector output against that truth. This is the
//! verification oracle for the whole pipeline: balls are dark disks on a
//! brighter board background, voids are slightly brighter disks inside
//! the balls (overlaps union into irregular shapes), and seeded Gaussian
//! noise is layered on top.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{BinaryMask, GrayImage};
use crate::void_assemble::{ball_area, regions_from_mask, void_percentage, InspectionReport};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("ball radius {radius} does not fit the pitch {pitch} (need radius < pitch/2)")]
    BallTooLarge { radius: u32, pitch: u32 },
    #[error("void contrast must be positive")]
    ZeroContrast,
    #[error("void disk at ({dx},{dy}) radius {radius} pokes outside the ball")]
    VoidOutsideBall { dx: i32, dy: i32, radius: u32 },
    #[error("erased ball index ({row},{col}) outside the {rows}x{cols} grid")]
    ErasedOutOfRange {
        row: u32,
        col: u32,
        rows: u32,
        cols: u32,
    },
    #[error("grid must have at least one ball")]
    EmptyGrid,
    #[error("report {index}: ball geometry does not match the ground truth \
             (center ({cx:.1},{cy:.1}) vs ({tx:.1},{ty:.1}), radius {r:.1} vs {tr:.1})")]
    GeometryMismatch {
        index: usize,
        cx: f64,
        cy: f64,
        tx: f64,
        ty: f64,
        r: f64,
        tr: f64,
    },
    #[error("got {got} reports for {expected} ground-truth balls")]
    ReportCountMismatch { got: usize, expected: usize },
}

/// One circular void inside a ball, offset from the ball center.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VoidDisk {
    pub dx: i32,
    pub dy: i32,
    pub radius: u32,
}

/// Everything the generator needs. Defaults mirror the hard regime the
/// detector targets: balls around 40x40 pixels and a void contrast of
/// about 7 intensity levels out of 255.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub ball_radius: u32,
    pub pitch: u32,
    pub ball_intensity: u8,
    pub background_intensity: u8,
    /// Voids are drawn at `ball_intensity + void_contrast`.
    pub void_contrast: u8,
    /// Void disks stamped into every ball; overlaps union.
    pub voids: Vec<VoidDisk>,
    /// Grid positions (row, col) whose ball is omitted from the image but
    /// kept in the ground truth.
    pub erased_balls: Vec<(u32, u32)>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            grid_rows: 4,
            grid_cols: 4,
            ball_radius: 19,
            pitch: 45,
            ball_intensity: 90,
            background_intensity: 140,
            void_contrast: 7,
            voids: Vec::new(),
            erased_balls: Vec::new(),
            noise_sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(SynthError::EmptyGrid);
        }
        if f64::from(self.ball_radius) >= f64::from(self.pitch) / 2.0 {
            return Err(SynthError::BallTooLarge {
                radius: self.ball_radius,
                pitch: self.pitch,
            });
        }
        if self.void_contrast == 0 {
            return Err(SynthError::ZeroContrast);
        }
        for v in &self.voids {
            let off = f64::from(v.dx * v.dx + v.dy * v.dy).sqrt();
            if off + f64::from(v.radius) > f64::from(self.ball_radius) {
                return Err(SynthError::VoidOutsideBall {
                    dx: v.dx,
                    dy: v.dy,
                    radius: v.radius,
                });
            }
        }
        for &(row, col) in &self.erased_balls {
            if row >= self.grid_rows || col >= self.grid_cols {
                return Err(SynthError::ErasedOutOfRange {
                    row,
                    col,
                    rows: self.grid_rows,
                    cols: self.grid_cols,
                });
            }
        }
        Ok(())
    }

    /// Center of the ball at grid position (row, col).
    pub fn ball_center(&self, row: u32, col: u32) -> (f64, f64) {
        (
            f64::from(col * self.pitch + self.pitch / 2),
            f64::from(row * self.pitch + self.pitch / 2),
        )
    }
}

/// Ground truth for one grid position. Erased balls keep their position
/// with an empty void mask.
#[derive(Debug, Clone)]
pub struct BallTruth {
    pub grid: (u32, u32),
    pub center: (f64, f64),
    pub radius: f64,
    pub erased: bool,
    /// Top-left image coordinate of the truth crop window.
    pub crop_origin: (i64, i64),
    /// Void pixels in truth-crop coordinates (side `2*radius+1`).
    pub void_mask: BinaryMask,
    pub void_area: usize,
    /// Computed with the same formula as `measure`, so truth and report
    /// percentages cannot drift apart.
    pub void_percentage: f64,
    /// Connected void components in the truth mask.
    pub region_count: usize,
}

/// Full-image ground truth, balls in row-major grid order.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub rows: u32,
    pub cols: u32,
    pub pitch: u32,
    pub balls: Vec<BallTruth>,
}

/// Render the spec into an image and its ground truth. Pure in
/// (spec, seed): identical inputs produce identical bytes.
pub fn generate(spec: &SynthSpec) -> Result<(GrayImage, GroundTruth), SynthError> {
    spec.validate()?;
    let width = spec.grid_cols * spec.pitch;
    let height = spec.grid_rows * spec.pitch;
    let mut img = GrayImage::new(width, height, spec.background_intensity);
    let void_level = spec.ball_intensity.saturating_add(spec.void_contrast);
    let erased = |row: u32, col: u32| spec.erased_balls.contains(&(row, col));

    let side = 2 * spec.ball_radius + 1;
    let r = f64::from(spec.ball_radius);
    let mut balls = Vec::new();
    for row in 0..spec.grid_rows {
        for col in 0..spec.grid_cols {
            let center = spec.ball_center(row, col);
            let origin = (
                center.0 as i64 - i64::from(spec.ball_radius),
                center.1 as i64 - i64::from(spec.ball_radius),
            );
            let mut void_mask = BinaryMask::new(side, side);
            let is_erased = erased(row, col);
            for oy in 0..side {
                for ox in 0..side {
                    let (dx, dy) = (
                        f64::from(ox) - r,
                        f64::from(oy) - r,
                    );
                    if (dx * dx + dy * dy).sqrt() > r {
                        continue;
                    }
                    let in_void = spec.voids.iter().any(|v| {
                        let (vx, vy) = (dx - f64::from(v.dx), dy - f64::from(v.dy));
                        (vx * vx + vy * vy).sqrt() <= f64::from(v.radius)
                    });
                    if !is_erased {
                        let (ix, iy) = (origin.0 + i64::from(ox), origin.1 + i64::from(oy));
                        img.set(
                            ix as u32,
                            iy as u32,
                            if in_void { void_level } else { spec.ball_intensity },
                        );
                    }
                    if in_void && !is_erased {
                        void_mask.set(ox, oy, true);
                    }
                }
            }
            let void_area = void_mask.count_ones();
            let region_count = regions_from_mask(&void_mask, 1).len();
            balls.push(BallTruth {
                grid: (row, col),
                center,
                radius: r,
                erased: is_erased,
                crop_origin: origin,
                void_percentage: void_percentage(void_area, ball_area(r, (side, side))),
                void_mask,
                void_area,
                region_count,
            });
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma).expect("sigma is positive");
        let noisy: Vec<u8> = img
            .pixels()
            .iter()
            .map(|&p| (f64::from(p) + normal.sample(&mut rng)).round().clamp(0.0, 255.0) as u8)
            .collect();
        img = GrayImage::from_pixels(width, height, noisy).expect("dims unchanged");
    }

    Ok((
        img,
        GroundTruth {
            rows: spec.grid_rows,
            cols: spec.grid_cols,
            pitch: spec.pitch,
            balls,
        },
    ))
}

/// Pixel-level agreement for one ball.
#[derive(Debug, Clone, Serialize)]
pub struct BallScore {
    /// `TP / (TP + FP + FN)`; defined as 1 when all three are zero.
    pub iou: f64,
    /// `TP / (TP + FP)`; defined as 1 when nothing was predicted.
    pub precision: f64,
    /// `TP / (TP + FN)`; undefined (`None`) when the truth has no voids.
    pub recall: Option<f64>,
    /// Absolute difference of reported and true void percentage.
    pub area_error: f64,
    /// Predicted minus true region count.
    pub region_count_error: i64,
    /// True when the ground truth has no void pixels.
    pub no_voids: bool,
}

/// Aggregate over the balls of a suite. Means skip undefined recalls.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreCard {
    pub per_ball: Vec<BallScore>,
    pub mean_iou: f64,
    pub mean_precision: f64,
    pub mean_recall: Option<f64>,
    pub mean_area_error: f64,
}

/// Score one report against one ball's truth. Prediction and truth are
/// compared pixel-by-pixel over the truth ball disk in absolute image
/// coordinates, so a small detected-center offset costs accuracy instead
/// of invalidating the comparison.
pub fn score(report: &InspectionReport, truth: &BallTruth) -> Result<BallScore, SynthError> {
    score_indexed(report, truth, 0)
}

fn score_indexed(
    report: &InspectionReport,
    truth: &BallTruth,
    index: usize,
) -> Result<BallScore, SynthError> {
    let (cx, cy) = report.ball.center;
    let (tx, ty) = truth.center;
    let near = (cx - tx).hypot(cy - ty) <= truth.radius / 2.0;
    if !near || (report.ball.radius - truth.radius).abs() > truth.radius / 2.0 {
        return Err(SynthError::GeometryMismatch {
            index,
            cx,
            cy,
            tx,
            ty,
            r: report.ball.radius,
            tr: truth.radius,
        });
    }

    let pred_origin = (
        cx.round() as i64 - report.ball.radius.round() as i64,
        cy.round() as i64 - report.ball.radius.round() as i64,
    );
    let mut predicted: std::collections::HashSet<(i64, i64)> = std::collections::HashSet::new();
    for region in &report.regions {
        for &(x, y) in &region.pixels {
            predicted.insert((pred_origin.0 + i64::from(x), pred_origin.1 + i64::from(y)));
        }
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    // walk the truth ball disk in absolute coordinates
    let r = truth.radius;
    let (x0, y0) = (tx.round() as i64, ty.round() as i64);
    let reach = r.ceil() as i64 + 1;
    for ay in (y0 - reach)..=(y0 + reach) {
        for ax in (x0 - reach)..=(x0 + reach) {
            let (dx, dy) = (ax as f64 - tx, ay as f64 - ty);
            if (dx * dx + dy * dy).sqrt() > r {
                continue;
            }
            let in_truth = {
                let (ox, oy) = (ax - truth.crop_origin.0, ay - truth.crop_origin.1);
                ox >= 0
                    && oy >= 0
                    && (ox as u32) < truth.void_mask.width()
                    && (oy as u32) < truth.void_mask.height()
                    && truth.void_mask.get(ox as u32, oy as u32)
            };
            let in_pred = predicted.contains(&(ax, ay));
            match (in_pred, in_truth) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }

    let no_voids = tp + fn_ == 0;
    Ok(BallScore {
        iou: if tp + fp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp + fn_) as f64
        },
        precision: if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        },
        recall: if no_voids {
            None
        } else {
            Some(tp as f64 / (tp + fn_) as f64)
        },
        area_error: (report.void_percentage - truth.void_percentage).abs(),
        region_count_error: report.regions.len() as i64 - truth.region_count as i64,
        no_voids,
    })
}

/// Aggregate per-ball scores into a card.
pub fn aggregate(per_ball: Vec<BallScore>) -> ScoreCard {
    let n = per_ball.len().max(1) as f64;
    let mean_iou = per_ball.iter().map(|s| s.iou).sum::<f64>() / n;
    let mean_precision = per_ball.iter().map(|s| s.precision).sum::<f64>() / n;
    let mean_area_error = per_ball.iter().map(|s| s.area_error).sum::<f64>() / n;
    let defined: Vec<f64> = per_ball.iter().filter_map(|s| s.recall).collect();
    let mean_recall = if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    };
    ScoreCard {
        per_ball,
        mean_iou,
        mean_precision,
        mean_recall,
        mean_area_error,
    }
}

/// Score a full suite of reports, matched to the truth balls by position
/// (both sides row-major).
pub fn score_suite(
    reports: &[InspectionReport],
    truth: &GroundTruth,
) -> Result<ScoreCard, SynthError> {
    if reports.len() != truth.balls.len() {
        return Err(SynthError::ReportCountMismatch {
            got: reports.len(),
            expected: truth.balls.len(),
        });
    }
    let scores = reports
        .iter()
        .zip(&truth.balls)
        .enumerate()
        .map(|(i, (r, t))| score_indexed(r, t, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(scores))
}

/// Paired scoring of the proposed and reference methods on one image.
#[derive(Debug, Clone, Serialize)]
pub struct MethodComparison {
    pub proposed: ScoreCard,
    pub baseline: ScoreCard,
    pub proposed_recall: Option<f64>,
    pub baseline_recall: Option<f64>,
    /// `proposed mean recall >= baseline mean recall`; vacuously true when
    /// neither recall is defined.
    pub ordering_holds: bool,
    /// True when the image has no true void pixels at all.
    pub no_voids: bool,
}

/// Compare both methods' reports against the same ground truth.
pub fn compare(
    truth: &GroundTruth,
    proposed: &[InspectionReport],
    baseline: &[InspectionReport],
) -> Result<MethodComparison, SynthError> {
    let proposed = score_suite(proposed, truth)?;
    let baseline = score_suite(baseline, truth)?;
    let (pr, br) = (proposed.mean_recall, baseline.mean_recall);
    let ordering_holds = match (pr, br) {
        (Some(p), Some(b)) => p >= b,
        _ => true,
    };
    Ok(MethodComparison {
        no_voids: truth.balls.iter().all(|b| b.void_area == 0),
        proposed,
        baseline,
        proposed_recall: pr,
        baseline_recall: br,
        ordering_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball_segment::{BallRegion, Provenance};
    use crate::void_assemble::VoidRegion;

    fn one_ball_spec() -> SynthSpec {
        SynthSpec {
            grid_rows: 1,
            grid_cols: 1,
            noise_sigma: 0.0,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_spec_same_seed_is_byte_identical() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 3, dy: -2, radius: 5 }],
            noise_sigma: 1.5,
            seed: 42,
            ..SynthSpec::default()
        };
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        assert_eq!(a, b);
        let other_seed = SynthSpec { seed: 43, ..spec };
        let (c, _) = generate(&other_seed).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn centered_r5_void_has_area_81() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        // oracle: lattice pixels within distance 5 of the void center
        let mut oracle = 0;
        for dy in -5i64..=5 {
            for dx in -5i64..=5 {
                if ((dx * dx + dy * dy) as f64).sqrt() <= 5.0 {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 81);
        assert_eq!(truth.balls[0].void_area, 81);
        assert_eq!(truth.balls[0].region_count, 1);
    }

    #[test]
    fn erased_ball_stays_in_truth_but_not_in_image() {
        let spec = SynthSpec {
            grid_rows: 2,
            grid_cols: 2,
            erased_balls: vec![(0, 0)],
            noise_sigma: 0.0,
            ..SynthSpec::default()
        };
        let (img, truth) = generate(&spec).unwrap();
        assert_eq!(truth.balls.len(), 4);
        let erased = &truth.balls[0];
        assert!(erased.erased);
        assert_eq!(erased.grid, (0, 0));
        // the erased ball's center pixel shows background
        let (cx, cy) = erased.center;
        assert_eq!(img.get(cx as u32, cy as u32), spec.background_intensity);
        // a kept ball's center shows ball intensity
        let kept = &truth.balls[3];
        assert_eq!(
            img.get(kept.center.0 as u32, kept.center.1 as u32),
            spec.ball_intensity
        );
    }

    #[test]
    fn overlapping_voids_union_into_one_region() {
        let spec = SynthSpec {
            voids: vec![
                VoidDisk { dx: -2, dy: 0, radius: 4 },
                VoidDisk { dx: 2, dy: 0, radius: 4 },
            ],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        assert_eq!(truth.balls[0].region_count, 1);
        // union is smaller than the sum of two disks
        assert!(truth.balls[0].void_area < 2 * 49);
    }

    #[test]
    fn truth_percentage_uses_the_measure_formula() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let side = 2 * spec.ball_radius + 1;
        assert_eq!(
            t.void_percentage,
            void_percentage(t.void_area, ball_area(t.radius, (side, side)))
        );
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let poked = SynthSpec {
            voids: vec![VoidDisk { dx: 16, dy: 0, radius: 5 }],
            ..SynthSpec::default()
        };
        assert!(matches!(
            generate(&poked),
            Err(SynthError::VoidOutsideBall { .. })
        ));
        let fat = SynthSpec {
            ball_radius: 23,
            pitch: 45,
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&fat), Err(SynthError::BallTooLarge { .. })));
    }

    fn report_with_pixels(truth: &BallTruth, pixels: Vec<(u32, u32)>) -> InspectionReport {
        let side = truth.void_mask.width();
        let area = pixels.len();
        let regions = if pixels.is_empty() {
            Vec::new()
        } else {
            vec![VoidRegion {
                label: 1,
                centroid: (0.0, 0.0),
                area,
                pixels,
            }]
        };
        InspectionReport {
            ball: BallRegion {
                center: truth.center,
                radius: truth.radius,
                provenance: Provenance::Detected,
            },
            ball_area: ball_area(truth.radius, (side, side)),
            total_void_area: area,
            void_percentage: void_percentage(area, ball_area(truth.radius, (side, side))),
            regions,
        }
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let report = report_with_pixels(t, t.void_mask.iter_set().collect());
        let s = score(&report, t).unwrap();
        assert_eq!(s.iou, 1.0);
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, Some(1.0));
        assert_eq!(s.area_error, 0.0);
        assert_eq!(s.region_count_error, 0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let report = report_with_pixels(t, Vec::new());
        let s = score(&report, t).unwrap();
        assert_eq!(s.iou, 0.0);
        assert_eq!(s.recall, Some(0.0));
        assert_eq!(s.region_count_error, -1);
    }

    #[test]
    fn half_prediction_scores_half() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let all: Vec<(u32, u32)> = t.void_mask.iter_set().collect();
        let half: Vec<(u32, u32)> = all.iter().copied().take(all.len() / 2).collect();
        let s = score(&report_with_pixels(t, half), t).unwrap();
        assert!((s.precision - 1.0).abs() < 1e-12);
        let expected = (all.len() / 2) as f64 / all.len() as f64;
        assert!((s.recall.unwrap() - expected).abs() < 1e-12);
        assert!((s.iou - expected).abs() < 1e-12);
    }

    #[test]
    fn scoring_ignores_region_labeling() {
        let spec = SynthSpec {
            voids: vec![VoidDisk { dx: 0, dy: 0, radius: 5 }],
            ..one_ball_spec()
        };
        let (_, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let all: Vec<(u32, u32)> = t.void_mask.iter_set().collect();
        // same pixels, split across two regions with swapped labels
        let (first, second) = all.split_at(all.len() / 2);
        let mut report = report_with_pixels(t, Vec::new());
        report.regions = vec![
            VoidRegion {
                label: 2,
                pixels: second.to_vec(),
                area: second.len(),
                centroid: (0.0, 0.0),
            },
            VoidRegion {
                label: 1,
                pixels: first.to_vec(),
                area: first.len(),
                centroid: (0.0, 0.0),
            },
        ];
        report.total_void_area = all.len();
        let s = score(&report, t).unwrap();
        assert_eq!(s.iou, 1.0);
        assert_eq!(s.recall, Some(1.0));
    }

    #[test]
    fn void_free_comparison_is_vacuously_ordered() {
        let (_, truth) = generate(&one_ball_spec()).unwrap();
        let t = &truth.balls[0];
        let empty = report_with_pixels(t, Vec::new());
        let cmp = compare(&truth, &[empty.clone()], &[empty]).unwrap();
        assert!(cmp.ordering_holds);
        assert!(cmp.no_voids);
        assert_eq!(cmp.proposed_recall, None);
    }

    #[test]
    fn geometry_mismatch_is_an_error() {
        let (_, truth) = generate(&one_ball_spec()).unwrap();
        let t = &truth.balls[0];
        let mut report = report_with_pixels(t, Vec::new());
        report.ball.center.0 += 15.0;
        assert!(matches!(
            score(&report, t),
            Err(SynthError::GeometryMismatch { .. })
        ));
    }
}
