//! Regenerates the PNG fixtures under `tests/fixtures`.
//!
//! `cargo run -p unimatte-cli --example make_fixtures`

use std::path::Path;

use unimatte_core::datapipe::{write_manifest, ManifestRecord, Split};
use unimatte_core::io::{write_alpha, write_rgb, write_ternary};
use unimatte_core::semantics::trimap_from_alpha;
use unimatte_core::tensor::SplitMix64;
use unimatte_core::{AlphaMatte, ColorImage, Plane};

const EVAL_SIDE: usize = 64;
const FG_SIDE: usize = 256;

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Soft disk of radius `r` centered at `(cy, cx)`, scaled by `peak`.
fn disk(side: usize, cy: f64, cx: f64, r: f64, edge: f64, peak: f64) -> Plane {
    Plane::from_fn(side, side, |y, x| {
        let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
        peak * (1.0 - smoothstep(r - edge, r + edge, d))
    })
    .unwrap()
}

fn quantize(p: &Plane) -> Plane {
    p.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

fn record(id: &str, ty: &str, category: &str, fg: bool, trimap: bool) -> ManifestRecord {
    ManifestRecord {
        id: id.into(),
        image: format!("images/{id}.png"),
        alpha: format!("alphas/{id}.png"),
        fg: fg.then(|| format!("fg/{id}.png")),
        bg: None,
        trimap: trimap.then(|| format!("trimaps/{id}.png")),
        image_type: Some(ty.into()),
        category: category.into(),
        split: Split::Test,
    }
}

/// Six ground-truth mattes with perturbed predictions.
fn evaluation(root: &Path) {
    let n = EVAL_SIDE;
    let c = n as f64 / 2.0;
    // Geometry is laid out on a 24-pixel grid and scaled to the fixture side.
    let k = n as f64 / 24.0;
    let cases = [
        ("e01", "SO", "animal", disk(n, c, c, 7.0 * k, 1.5 * k, 1.0)),
        ("e02", "SO", "human", disk(n, 9.0 * k, 14.0 * k, 6.0 * k, 2.0 * k, 1.0)),
        ("e03", "STM", "transparent", disk(n, c, c, 8.0 * k, 3.0 * k, 0.6)),
        ("e04", "NS", "plant", Plane::from_fn(n, n, |y, x| 0.2 + 0.6 * (y + x) as f64 / (2 * n) as f64).unwrap()),
        ("e05", "SO", "toy", disk(n, 15.0 * k, 8.0 * k, 5.0 * k, 1.0 * k, 1.0)),
        ("e06", "STM", "animal", disk(n, c, 10.0 * k, 6.0 * k, 4.0 * k, 0.7)),
    ];
    let mut rng = SplitMix64::new(2024);
    let mut records = Vec::new();
    for (id, ty, cat, gt) in cases {
        let gt = quantize(&gt);
        let offset = 0.1 * rng.next_f64();
        let mut pred = gt.map(|v| v + offset * (1.0 - 2.0 * v));
        // A spurious blob away from the object.
        let (by, bx) = (1 + rng.below(6) as usize, 1 + rng.below(6) as usize);
        for y in by..by + 6 {
            for x in bx..bx + 6 {
                pred.data_mut()[y * n + x] = 0.8;
            }
        }
        for v in pred.data_mut() {
            *v += 0.05 * (rng.next_f64() - 0.5);
        }
        let pred = quantize(&pred);
        let trimap = trimap_from_alpha(&AlphaMatte::new(gt.clone()).unwrap(), 4, 4);
        write_rgb(&root.join(format!("images/{id}.png")), &ColorImage::filled(n, n, [0.5, 0.5, 0.5]).unwrap()).unwrap();
        write_alpha(&root.join(format!("alphas/{id}.png")), &gt).unwrap();
        write_ternary(&root.join(format!("trimaps/{id}.png")), trimap.plane()).unwrap();
        write_alpha(&root.join(format!("preds/{id}.png")), &pred).unwrap();
        records.push(record(id, ty, cat, false, true));
    }
    write_manifest(&root.join("manifest.jsonl"), &records).unwrap();
}

fn textured(h: usize, w: usize, period: usize, tint: [f64; 3]) -> ColorImage {
    ColorImage::from_fn(h, w, |ch, y, x| {
        let check = ((y / period) + (x / period)) % 2 == 0;
        tint[ch] * if check { 0.9 } else { 0.2 }
    })
    .unwrap()
}

/// Two foregrounds and two backgrounds for the composite → infer chain.
fn pipeline(root: &Path) {
    let n = FG_SIDE;
    let c = n as f64 / 2.0;
    let fgs = [
        ("so_disk", "SO", "animal", quantize(&disk(n, c, c, 70.0, 6.0, 1.0)), [0.9, 0.6, 0.3]),
        (
            "ns_veil",
            "NS",
            "plant",
            quantize(&Plane::from_fn(n, n, |y, x| 0.3 + 0.4 * ((y as f64 / 20.0).sin() * (x as f64 / 30.0).cos()).abs()).unwrap()),
            [0.3, 0.8, 0.4],
        ),
    ];
    let mut records = Vec::new();
    for (id, ty, cat, alpha, tint) in fgs {
        let fg = ColorImage::from_fn(n, n, |ch, y, _| tint[ch] * (0.6 + 0.4 * y as f64 / n as f64)).unwrap();
        write_rgb(&root.join(format!("images/{id}.png")), &fg).unwrap();
        write_rgb(&root.join(format!("fg/{id}.png")), &fg).unwrap();
        write_alpha(&root.join(format!("alphas/{id}.png")), &alpha).unwrap();
        records.push(record(id, ty, cat, true, false));
    }
    write_manifest(&root.join("manifest.jsonl"), &records).unwrap();
    write_rgb(&root.join("backgrounds/bg_a.png"), &textured(288, 320, 8, [1.0, 1.0, 1.0])).unwrap();
    write_rgb(&root.join("backgrounds/bg_b.png"), &textured(200, 240, 5, [0.4, 0.7, 1.0])).unwrap();
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    evaluation(&root.join("evaluate"));
    pipeline(&root.join("pipeline"));
    println!("fixtures written to {}", root.display());
}
