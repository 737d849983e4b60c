//! Compositing, augmentation and manifests.

use std::fs;
use std::path::Path;

use proptest::prelude::*;
use unimatte_core::datapipe::{
    bokeh_augment, composite, crop_resize_augment, dataset_stats, ingest_manifest, render, write_manifest,
    CompositeSpec, CropSize, CropWindow, ManifestRecord, Split, TRAIN_SIZE,
};
use unimatte_core::io::{write_alpha, write_rgb};
use unimatte_core::losses::{composition_loss, CHARBONNIER_EPS};
use unimatte_core::metrics::Category;
use unimatte_core::tensor::SplitMix64;
use unimatte_core::{AlphaMatte, ColorImage, Error, ImageType, Plane};

fn random_color(rng: &mut SplitMix64, h: usize, w: usize) -> ColorImage {
    ColorImage::from_fn(h, w, |_, _, _| rng.next_f64()).unwrap()
}

fn random_alpha(rng: &mut SplitMix64, h: usize, w: usize) -> AlphaMatte {
    AlphaMatte::new(Plane::from_fn(h, w, |_, _| rng.next_f64()).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn composite_identities(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
        let mut rng = SplitMix64::new(seed);
        let (f, b, a) = (random_color(&mut rng, h, w), random_color(&mut rng, h, w), random_alpha(&mut rng, h, w));
        let ones = AlphaMatte::new(Plane::filled(h, w, 1.0).unwrap()).unwrap();
        let zeros = AlphaMatte::new(Plane::filled(h, w, 0.0).unwrap()).unwrap();
        prop_assert_eq!(composite(&f, &ones, &b).unwrap(), f.clone());
        prop_assert_eq!(composite(&f, &zeros, &b).unwrap(), b.clone());
        let img = composite(&f, &a, &b).unwrap();
        for c in 0..3 {
            for (k, &v) in img.channel(c).iter().enumerate() {
                let (lo, hi) = (f.channel(c)[k].min(b.channel(c)[k]), f.channel(c)[k].max(b.channel(c)[k]));
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }
        // A composite reproduces itself under the compositing loss.
        let l = composition_loss(&a, &f, &b, &img, CHARBONNIER_EPS).unwrap();
        prop_assert!((l.value - CHARBONNIER_EPS).abs() < 1e-9, "{}", l.value);
    }

    #[test]
    fn crop_is_deterministic(seed in any::<u64>(), h in 8usize..40, w in 8usize..40) {
        let mut rng = SplitMix64::new(seed);
        let (img, a) = (random_color(&mut rng, h, w), random_alpha(&mut rng, h, w));
        let crop = CropSize::S640;
        let first = crop_resize_augment(&img, &a, crop, seed, 16).unwrap();
        let second = crop_resize_augment(&img, &a, crop, seed, 16).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(first.0.dims(), (16, 16));
        prop_assert!(first.1.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn crop_window_stays_on_canvas(h in 1usize..3000, w in 1usize..3000, seed in any::<u64>()) {
        for size in CropSize::ALL.map(|c| c.px()) {
            let win = CropWindow::sample((h, w), size, seed);
            prop_assert!(win.y0 + size <= h.max(size));
            prop_assert!(win.x0 + size <= w.max(size));
            prop_assert_eq!(win.pad_top, (h.max(size) - h) / 2);
            prop_assert_eq!(win.pad_left, (w.max(size) - w) / 2);
            prop_assert_eq!(win, CropWindow::sample((h, w), size, seed));
        }
    }
}

#[test]
fn small_source_is_padded_around_its_center() {
    // A single bright pixel at the center of a 5x5 source stays centered in a
    // window that fully covers the padded source.
    let p = Plane::from_fn(5, 5, |y, x| if (y, x) == (2, 2) { 1.0 } else { 0.0 }).unwrap();
    let win = CropWindow::sample((5, 5), 9, 7);
    assert_eq!((win.y0, win.x0, win.pad_top, win.pad_left), (0, 0, 2, 2));
    let out = win.apply_plane(&p, 9).unwrap();
    let total: f64 = out.data().iter().sum();
    let (mut cy, mut cx) = (0.0, 0.0);
    for y in 0..9 {
        for x in 0..9 {
            cy += y as f64 * out.get(y, x) / total;
            cx += x as f64 * out.get(y, x) / total;
        }
    }
    assert!((cy - 4.0).abs() < 1e-9 && (cx - 4.0).abs() < 1e-9, "{cy} {cx}");
}

#[test]
fn bokeh_keeps_constants_and_smooths() {
    let flat = ColorImage::filled(20, 24, [0.2, 0.4, 0.6]).unwrap();
    let blurred = bokeh_augment(&flat, 10.0).unwrap();
    for c in 0..3 {
        assert!(blurred.channel(c).iter().all(|v| (v - flat.channel(c)[0]).abs() < 1e-6));
    }
    let mut rng = SplitMix64::new(3);
    let noisy = random_color(&mut rng, 24, 24);
    let smooth = bokeh_augment(&noisy, 2.0).unwrap();
    let var = |d: &[f64]| {
        let m = d.iter().sum::<f64>() / d.len() as f64;
        d.iter().map(|v| (v - m).powi(2)).sum::<f64>() / d.len() as f64
    };
    let (before, after) = (var(noisy.channel(0)), var(smooth.channel(0)));
    assert!(after < before / 4.0, "{before} -> {after}");
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    assert!((mean(noisy.channel(0)) - mean(smooth.channel(0))).abs() < 0.02);
}

#[test]
fn render_applies_flip_and_crop() {
    let mut rng = SplitMix64::new(11);
    let (f, a) = (random_color(&mut rng, 12, 10), random_alpha(&mut rng, 12, 10));
    let b = random_color(&mut rng, 30, 30);
    let mut spec = CompositeSpec {
        fg_id: "fg".into(),
        bg_id: "bg".into(),
        fg_type: ImageType::So,
        bokeh_sigma: None,
        crop: None,
        flip: true,
        seed: 5,
    };
    let s = render(&spec, &f, &a, &b).unwrap();
    assert_eq!(s.image.dims(), (12, 10));
    assert_eq!(s.alpha.get(3, 0), a.get(3, 9));
    assert_eq!(s.image, composite(&s.fg, &s.alpha, &s.bg).unwrap());
    spec.crop = Some(CropSize::S640);
    let s = render(&spec, &f, &a, &b).unwrap();
    assert_eq!(s.image.dims(), (TRAIN_SIZE, TRAIN_SIZE));
    spec.bokeh_sigma = Some(4.0);
    assert!(render(&spec, &f, &a, &b).is_err());
    spec.fg_type = ImageType::Ns;
    assert!(render(&spec, &f, &a, &b).is_ok());
}

fn write_pair(dir: &Path, id: &str, alpha: &Plane) {
    let (h, w) = alpha.dims();
    write_rgb(&dir.join(format!("{id}.png")), &ColorImage::filled(h, w, [0.5; 3]).unwrap()).unwrap();
    write_alpha(&dir.join(format!("{id}_alpha.png")), alpha).unwrap();
}

fn record(id: &str, ty: Option<&str>, category: &str, split: Split) -> ManifestRecord {
    ManifestRecord {
        id: id.into(),
        image: format!("{id}.png"),
        alpha: format!("{id}_alpha.png"),
        fg: None,
        bg: None,
        trimap: None,
        image_type: ty.map(String::from),
        category: category.into(),
        split,
    }
}

#[test]
fn manifest_stats() {
    let dir = tempfile::tempdir().unwrap();
    let so = Plane::from_fn(8, 8, |y, _| if y < 4 { 1.0 } else { 0.0 }).unwrap();
    let ns = Plane::filled(8, 8, 0.4).unwrap();
    for id in ["a", "b", "c", "d"] {
        write_pair(dir.path(), id, &so);
    }
    write_pair(dir.path(), "e", &ns);
    let records = vec![
        record("a", Some("SO"), "animal", Split::Train),
        record("b", None, "human", Split::Train),
        record("c", Some("so"), "toy", Split::Test),
        record("d", Some("STM"), "transparent", Split::Test),
        record("e", None, "plant", Split::Test),
    ];
    let path = dir.path().join("manifest.jsonl");
    write_manifest(&path, &records).unwrap();
    let entries = ingest_manifest(&path).unwrap();
    let stats = dataset_stats(&entries);
    assert_eq!(stats.total, 5);
    assert_eq!(stats.by_type.values().copied().collect::<Vec<_>>(), [3, 1, 1]);
    assert_eq!(stats.by_category[&Category::Transparent], 1);
    assert_eq!(stats.by_category[&Category::Fruit], 0);
    assert_eq!(stats.by_split[&Split::Test], 3);
    assert!(stats.to_string().starts_with("| Total | SO | STM | NS |"));

    fs::write(&path, "").unwrap();
    assert_eq!(dataset_stats(&ingest_manifest(&path).unwrap()).total, 0);

    let good = serde_json::to_string(&records[0]).unwrap();
    fs::write(&path, format!("{good}\n{{\"id\": \"x\"\n")).unwrap();
    match ingest_manifest(&path) {
        Err(Error::Manifest { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a manifest error, got {other:?}"),
    }
    fs::write(&path, format!("{good}\n{good}\n")).unwrap();
    assert!(matches!(ingest_manifest(&path), Err(Error::Manifest { line: 2, .. })));
    let missing = serde_json::to_string(&record("zz", None, "toy", Split::Test)).unwrap();
    fs::write(&path, missing).unwrap();
    assert!(matches!(ingest_manifest(&path), Err(Error::Manifest { line: 1, .. })));
}
