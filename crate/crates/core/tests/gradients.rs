//! Analytic loss gradients against central finite differences.
//!
//! Charbonnier and L1 terms have kinks; coordinates whose difference stencil
//! straddles one are excluded from the comparison and counted.

use unimatte_core::losses::{
    alpha_loss, composition_loss, laplacian_loss, semantic_ce, CHARBONNIER_EPS, LAPLACIAN_LEVELS,
};
use unimatte_core::semantics::ClassMap;
use unimatte_core::tensor::{Shape, SplitMix64};
use unimatte_core::{ColorImage, Plane};
use unimatte_oracles::{central_diff, laplacian_pyramid, rel_error};

const STEP: f64 = 1e-4;
const TOL: f64 = 1e-4;
const TRIALS: u64 = 20;

fn random_plane(rng: &mut SplitMix64, h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |_, _| rng.next_f64()).unwrap()
}

fn random_image(rng: &mut SplitMix64, h: usize, w: usize) -> ColorImage {
    ColorImage::from_fn(h, w, |_, _, _| rng.next_f64()).unwrap()
}

/// Relative error over the kept coordinates.
fn compare(analytic: &[f64], numeric: &[f64], keep: &[bool]) -> f64 {
    let a: Vec<f64> = analytic.iter().zip(keep).filter(|(_, &k)| k).map(|(v, _)| *v).collect();
    let n: Vec<f64> = numeric.iter().zip(keep).filter(|(_, &k)| k).map(|(v, _)| *v).collect();
    rel_error(&a, &n)
}

#[test]
fn alpha_loss_gradient() {
    let mut rng = SplitMix64::new(1);
    for _ in 0..TRIALS {
        let (p, g) = (random_plane(&mut rng, 16, 16), random_plane(&mut rng, 16, 16));
        let lg = alpha_loss(&p, &g, CHARBONNIER_EPS).unwrap();
        let f = |x: &[f64]| alpha_loss(&Plane::new(16, 16, x.to_vec()).unwrap(), &g, CHARBONNIER_EPS).unwrap().value;
        let num = central_diff(f, p.data(), STEP);
        let keep: Vec<bool> = p.data().iter().zip(g.data()).map(|(a, b)| (a - b).abs() > 1e-3).collect();
        let err = compare(&lg.grad, &num, &keep);
        assert!(err < TOL, "rel error {err}");
    }
}

#[test]
fn composition_loss_gradient() {
    let mut rng = SplitMix64::new(2);
    for _ in 0..TRIALS {
        let a = random_plane(&mut rng, 16, 16);
        let (f, b, i) = (
            random_image(&mut rng, 16, 16),
            random_image(&mut rng, 16, 16),
            random_image(&mut rng, 16, 16),
        );
        let lg = composition_loss(&a, &f, &b, &i, CHARBONNIER_EPS).unwrap();
        let fun = |x: &[f64]| {
            composition_loss(&Plane::new(16, 16, x.to_vec()).unwrap(), &f, &b, &i, CHARBONNIER_EPS)
                .unwrap()
                .value
        };
        let num = central_diff(fun, a.data(), STEP);
        // Exclude pixels where any channel residual is within reach of the kink.
        let keep: Vec<bool> = (0..256)
            .map(|k| {
                (0..3).all(|c| {
                    let (fv, bv) = (f.channel(c)[k], b.channel(c)[k]);
                    let r = a.data()[k] * fv + (1.0 - a.data()[k]) * bv - i.channel(c)[k];
                    r.abs() > 1e-3 + STEP * (fv - bv).abs()
                })
            })
            .collect();
        let err = compare(&lg.grad, &num, &keep);
        assert!(err < TOL, "rel error {err}");
    }
}

#[test]
fn laplacian_loss_gradient() {
    let mut rng = SplitMix64::new(3);
    let (h, w) = (32, 32);
    let mut excluded = 0;
    for _ in 0..TRIALS {
        let (p, g) = (random_plane(&mut rng, h, w), random_plane(&mut rng, h, w));
        let lg = laplacian_loss(&p, &g, LAPLACIAN_LEVELS).unwrap();
        let f = |x: &[f64]| laplacian_loss(&Plane::new(h, w, x.to_vec()).unwrap(), &g, LAPLACIAN_LEVELS).unwrap().value;
        let num = central_diff(f, p.data(), STEP);
        // A coordinate is kept when no pyramid difference changes sign
        // between its two stencil points.
        let sign_pattern = |x: &[f64]| -> Vec<bool> {
            let a = laplacian_pyramid(x, h, w, LAPLACIAN_LEVELS);
            let b = laplacian_pyramid(g.data(), h, w, LAPLACIAN_LEVELS);
            a.iter()
                .zip(&b)
                .flat_map(|((la, _, _), (lb, _, _))| la.iter().zip(lb).map(|(u, v)| u > v).collect::<Vec<_>>())
                .collect()
        };
        let keep: Vec<bool> = (0..h * w)
            .map(|k| {
                let mut up = p.data().to_vec();
                let mut down = p.data().to_vec();
                up[k] += STEP;
                down[k] -= STEP;
                sign_pattern(&up) == sign_pattern(&down)
            })
            .collect();
        excluded += keep.iter().filter(|k| !**k).count();
        let err = compare(&lg.grad, &num, &keep);
        assert!(err < TOL, "rel error {err}");
    }
    assert!(excluded < (TRIALS as usize * h * w) / 10, "excluded {excluded}");
}

#[test]
fn cross_entropy_gradient() {
    let mut rng = SplitMix64::new(4);
    let shape = Shape::new(1, 3, 4, 4);
    for _ in 0..TRIALS {
        let logits: Vec<f64> = (0..48).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let t = ClassMap::new(4, 4, (0..16).map(|_| rng.below(3) as u8).collect()).unwrap();
        let lg = semantic_ce(&logits, shape, std::slice::from_ref(&t)).unwrap();
        let f = |x: &[f64]| semantic_ce(x, shape, std::slice::from_ref(&t)).unwrap().value;
        let num = central_diff(f, &logits, STEP);
        let err = rel_error(&lg.grad, &num);
        assert!(err < TOL, "rel error {err}");
    }
}

#[test]
fn laplacian_matches_pyramid_oracle() {
    let mut rng = SplitMix64::new(5);
    let (p, g) = (random_plane(&mut rng, 32, 48), random_plane(&mut rng, 32, 48));
    let ours = laplacian_loss(&p, &g, 5).unwrap().value;
    let oracle = unimatte_oracles::laplacian_loss(p.data(), g.data(), 32, 48, 5);
    assert!((ours - oracle).abs() < 1e-12);
}
