// instrumented per-path FP breakdown (uses voidscan-core internals via its public API)

use voidscan_core::edge_detect::{classify_contours, edge_mask, fill_closed, filter_ball_outline, log_response, EdgeMask};
use voidscan_core::raster::{crop_ball, disk_mask};
use voidscan_core::synth_bench::{generate, SynthSpec, VoidDisk};
use voidscan_core::void_assemble::{assemble_2d, AssemblyParams};
use voidscan_core::void_scan::{detect_1d_voids, ScanParams};

#[test]
#[ignore]
fn probe_paths() {
    for seed in [0u64, 1, 2, 4, 5, 6, 9] {
        let r = 4 + (seed % 4) as u32;
        let angle = seed as f64 * 0.7;
        let off = f64::from(r) + 2.0;
        let (dx, dy) = ((off * angle.cos()).round() as i32, (off * angle.sin()).round() as i32);
        let spec = SynthSpec {
            grid_rows: 1, grid_cols: 1, ball_radius: 19, pitch: 45,
            voids: vec![VoidDisk { dx, dy, radius: r }],
            noise_sigma: 1.0, seed, ..SynthSpec::default()
        };
        let (img, truth) = generate(&spec).unwrap();
        let t = &truth.balls[0];
        let crop = crop_ball(&img, t.center, t.radius).unwrap();
        let dims = crop.dims();
        let center = ((dims.0 - 1) as f64 / 2.0, (dims.1 - 1) as f64 / 2.0);
        let resp = log_response(&crop, 1.5).unwrap();
        let edges = edge_mask(&resp, 1.0);
        let contours = filter_ball_outline(classify_contours(&edges), center, t.radius);
        let disk = disk_mask(center, t.radius, dims);
        let mut fill = fill_closed(&contours, dims);
        fill.and(&disk);
        let open_edges = EdgeMask::from_mask(contours.open_mask(dims));
        let spans = detect_1d_voids(&crop, &open_edges, center, 19, &ScanParams::default());
        let voids = assemble_2d(&spans, &AssemblyParams::default());

        let in_truth = |x: u32, y: u32| t.void_mask.get(x, y);
        let fill_fp = fill.iter_set().filter(|&(x, y)| !in_truth(x, y)).count();
        let fill_tp = fill.iter_set().filter(|&(x, y)| in_truth(x, y)).count();
        let mut span_fp = 0; let mut span_tp = 0;
        let mut span_pixels = std::collections::HashSet::new();
        for v in &voids { for &p in &v.pixels { span_pixels.insert(p); } }
        for &(x, y) in &span_pixels {
            if in_truth(x, y) { span_tp += 1 } else { span_fp += 1 }
        }
        println!(
            "seed {seed} void r={r}@({dx},{dy}) truth {}: closed_loops={} fill tp/fp={}/{}  spans tp/fp={}/{}",
            t.void_area, contours.closed.len(), fill_tp, fill_fp, span_tp, span_fp
        );
    }
}
