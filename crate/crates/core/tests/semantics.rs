//! Unified representation, trimaps and class maps.

use proptest::prelude::*;
use unimatte_core::io::{read_alpha, read_rep, read_trimap, write_alpha, write_ternary};
use unimatte_core::semantics::{
    classes_to_rep, classify_type, dilate_disk, erode_disk, rep_to_classes, semantic_iou_accuracy,
    trimap_from_alpha, unify, unify_value, ClassMap, BG_THRESHOLD, FG_THRESHOLD,
};
use unimatte_core::{AlphaMatte, ImageType, Plane, Trimap, UnifiedRep};
use unimatte_oracles as oracle;

#[test]
fn unify_table_is_exhaustive() {
    let expected = [
        (ImageType::So, [0.0, 0.5, 1.0]),
        (ImageType::Stm, [0.0, 0.5, 0.5]),
        (ImageType::Ns, [0.5, 0.5, 0.5]),
    ];
    for (ty, row) in expected {
        for (t, want) in [0.0, 0.5, 1.0].into_iter().zip(row) {
            assert_eq!(unify_value(t, ty), want, "{ty} at {t}");
        }
    }
}

#[test]
fn rep_type_constraints() {
    let p = Plane::new(1, 3, vec![0.0, 0.5, 1.0]).unwrap();
    assert!(UnifiedRep::new(p.clone(), ImageType::So).is_ok());
    assert!(UnifiedRep::new(p.clone(), ImageType::Stm).is_err());
    assert!(UnifiedRep::new(p, ImageType::Ns).is_err());
    assert!(UnifiedRep::new(Plane::filled(2, 2, 0.5).unwrap(), ImageType::Ns).is_ok());
    assert!(Trimap::new(Plane::new(1, 2, vec![0.0, 0.3]).unwrap()).is_err());
}

fn ternary(h: usize, w: usize) -> impl Strategy<Value = Plane> {
    prop::collection::vec(prop::sample::select(vec![0.0, 0.5, 1.0]), h * w)
        .prop_map(move |d| Plane::new(h, w, d).unwrap())
}

fn alpha_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>)> {
    (4usize..=20, 4usize..=20).prop_flat_map(|(h, w)| {
        let v = prop_oneof![Just(0.0), Just(1.0), 0.0f64..=1.0];
        (Just(h), Just(w), prop::collection::vec(v, h * w))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unify_is_idempotent(t in ternary(6, 7)) {
        let trimap = Trimap::new(t).unwrap();
        for ty in ImageType::ALL {
            let once = unify(&trimap, ty);
            let again = unify(&Trimap::new(once.plane().clone()).unwrap(), ty);
            prop_assert_eq!(once.plane(), again.plane());
        }
    }

    #[test]
    fn class_round_trip(t in ternary(5, 9)) {
        let c = rep_to_classes(&t).unwrap();
        prop_assert_eq!(&classes_to_rep(&c), &t);
        prop_assert_eq!(rep_to_classes(&classes_to_rep(&c)).unwrap(), c);
    }

    #[test]
    fn morphology_matches_brute_force(mask in prop::collection::vec(any::<bool>(), 13 * 11), r in 0usize..6) {
        prop_assert_eq!(erode_disk(&mask, 13, 11, r), oracle::erode(&mask, 13, 11, r));
        prop_assert_eq!(dilate_disk(&mask, 13, 11, r), oracle::dilate(&mask, 13, 11, r));
    }

    #[test]
    fn trimap_properties((h, w, a) in alpha_strategy(), e in 0usize..5, d in 0usize..5) {
        let alpha = AlphaMatte::new(Plane::new(h, w, a.clone()).unwrap()).unwrap();
        let t = trimap_from_alpha(&alpha, e, d);
        let fg: Vec<bool> = a.iter().map(|&v| v >= FG_THRESHOLD).collect();
        let any: Vec<bool> = a.iter().map(|&v| v > BG_THRESHOLD).collect();
        let eroded = oracle::erode(&fg, h, w, e);
        let dilated = oracle::dilate(&any, h, w, d);
        for i in 0..h * w {
            let v = t.data()[i];
            if v == 1.0 {
                prop_assert!(a[i] >= FG_THRESHOLD);
            }
            if v == 0.0 {
                prop_assert!(!dilated[i]);
                prop_assert!(a[i] <= BG_THRESHOLD);
            }
            let want = if eroded[i] { 1.0 } else if !dilated[i] { 0.0 } else { 0.5 };
            prop_assert_eq!(v, want);
        }
        // The transition band grows with both radii.
        let band = |t: &Trimap| t.transition_mask();
        let wider = trimap_from_alpha(&alpha, e + 1, d + 1);
        for (x, y) in band(&t).iter().zip(band(&wider)) {
            prop_assert!(!x || y);
        }
    }

    #[test]
    fn classify_ignores_pixel_order(a in prop::collection::vec(0.0f64..=1.0, 64), seed in any::<u64>()) {
        let mut shuffled = a.clone();
        let mut rng = unimatte_core::tensor::SplitMix64::new(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let t1 = classify_type(&AlphaMatte::new(Plane::new(8, 8, a).unwrap()).unwrap());
        let t2 = classify_type(&AlphaMatte::new(Plane::new(8, 8, shuffled).unwrap()).unwrap());
        prop_assert_eq!(t1, t2);
    }
}

#[test]
fn classify_reference_mattes() {
    let so = Plane::from_fn(10, 10, |y, _| if y < 5 { 1.0 } else { 0.0 }).unwrap();
    let stm = Plane::from_fn(10, 10, |y, _| if y < 5 { 0.6 } else { 0.0 }).unwrap();
    let ns = Plane::filled(10, 10, 0.3).unwrap();
    assert_eq!(classify_type(&AlphaMatte::new(so).unwrap()), ImageType::So);
    assert_eq!(classify_type(&AlphaMatte::new(stm).unwrap()), ImageType::Stm);
    assert_eq!(classify_type(&AlphaMatte::new(ns).unwrap()), ImageType::Ns);
}

#[test]
fn iou_on_half_overlapping_stripes() {
    // gt: left half fg, right half bg. pred: fg shifted by a quarter.
    let gt = ClassMap::new(4, 8, (0..32).map(|i| if i % 8 < 4 { 2 } else { 0 }).collect()).unwrap();
    let pred = ClassMap::new(4, 8, (0..32).map(|i| if (2..6).contains(&(i % 8)) { 2 } else { 0 }).collect()).unwrap();
    let (iou, acc) = semantic_iou_accuracy(&pred, &gt).unwrap();
    assert!((acc - 0.5).abs() < 1e-12);
    // Each class: intersection 2 columns, union 6.
    assert!((iou - 1.0 / 3.0).abs() < 1e-12);
    let (iou, acc) = semantic_iou_accuracy(&gt, &gt).unwrap();
    assert_eq!((iou, acc), (1.0, 1.0));
}

#[test]
fn png_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let a = Plane::from_fn(7, 5, |y, x| ((y * 5 + x) * 7 % 256) as f64 / 255.0).unwrap();
    let path = dir.path().join("a.png");
    write_alpha(&path, &a).unwrap();
    let back = read_alpha(&path).unwrap();
    for (x, y) in a.data().iter().zip(back.data()) {
        assert!((x - y).abs() < 1e-12);
    }

    let t = Plane::from_fn(6, 6, |y, x| [0.0, 0.5, 1.0][(y + x) % 3]).unwrap();
    let path = dir.path().join("t.png");
    write_ternary(&path, &t).unwrap();
    assert_eq!(read_trimap(&path).unwrap().plane(), &t);
    assert_eq!(read_rep(&path, ImageType::So).unwrap().plane(), &t);
    assert!(read_rep(&path, ImageType::Stm).is_err());

    // Non-ternary bytes are rejected.
    write_alpha(&path, &Plane::filled(2, 2, 0.3).unwrap()).unwrap();
    assert!(read_trimap(&path).is_err());
}
