use proptest::prelude::*;
use unimatte_oracles as oracle;
use unimatte_tensor::*;

fn tensor_strategy(max_c: usize, min_hw: usize) -> impl Strategy<Value = Tensor> {
    (1usize..=max_c, min_hw..=9usize, min_hw..=9usize).prop_flat_map(|(c, h, w)| {
        prop::collection::vec(-1.0f32..1.0, c * h * w)
            .prop_map(move |d| Tensor::new([1, c, h, w], d).unwrap())
    })
}

fn to64(t: &Tensor) -> Vec<f64> {
    t.data().iter().map(|&v| v as f64).collect()
}

fn dims(t: &Tensor) -> [usize; 4] {
    t.shape().dims()
}

fn assert_close(a: &[f32], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((*x as f64 - y).abs() <= tol, "{x} vs {y}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn conv_matches_direct_loops(
        x in tensor_strategy(4, 3),
        oc in 1usize..4,
        k in 1usize..4,
        stride in 1usize..3,
        pad in 0usize..3,
        dil in 1usize..3,
        seed in any::<u64>(),
    ) {
        let ic = x.shape().c;
        let mut rng = SplitMix64::new(seed);
        let w = Tensor::from_fn([oc, ic, k, k], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
        let bias: Vec<f32> = (0..oc).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        let p = ConvParams { stride, padding: pad, dilation: dil };
        match conv2d(&x, &w, Some(&bias), p) {
            Ok(y) => {
                let b64: Vec<f64> = bias.iter().map(|&v| v as f64).collect();
                let (o, od) = oracle::conv2d(&to64(&x), dims(&x), &to64(&w), dims(&w), Some(&b64), stride, pad, dil);
                prop_assert_eq!(dims(&y), od);
                assert_close(y.data(), &o, 1e-5);
            }
            Err(TensorError::EmptyOutput { .. }) => {
                let span = dil * (k - 1) + 1;
                prop_assert!(x.shape().h + 2 * pad < span || x.shape().w + 2 * pad < span);
            }
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn maxpool_matches_window_scan(x in tensor_strategy(4, 3), k in 1usize..4, stride in 1usize..3, pad in 0usize..2) {
        prop_assume!(pad <= k / 2);
        let (v, i) = maxpool2d_indexed(&x, k, stride, pad).unwrap();
        let (ov, oi, od) = oracle::maxpool(&to64(&x), dims(&x), k, stride, pad);
        prop_assert_eq!(dims(&v), od);
        assert_close(v.data(), &ov, 0.0);
        let got: Vec<usize> = i.as_slice().iter().map(|&j| j as usize).collect();
        prop_assert_eq!(got, oi);
    }

    #[test]
    fn pool_unpool_round_trip(x in tensor_strategy(4, 2), k in 1usize..4, stride in 1usize..3) {
        let pad = k / 2;
        let (v, i) = maxpool2d_indexed(&x, k, stride, pad).unwrap();
        let s = x.shape();
        let u = max_unpool2d(&v, &i, k, stride, Some((s.h, s.w))).unwrap();
        let plane = s.plane();
        for n in 0..s.n {
            for c in 0..s.c {
                let ids: std::collections::HashSet<usize> = i.as_slice()
                    [(n * s.c + c) * v.shape().plane()..(n * s.c + c + 1) * v.shape().plane()]
                    .iter().map(|&j| j as usize).collect();
                let src = x.plane(n, c);
                let dst = u.plane(n, c);
                for j in 0..plane {
                    if ids.contains(&j) {
                        prop_assert_eq!(dst[j], src[j]);
                    } else {
                        prop_assert_eq!(dst[j], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn avgpool_matches_window_enumeration(x in tensor_strategy(4, 1), oh in 1usize..10, ow in 1usize..10) {
        let s = x.shape();
        prop_assume!(oh <= s.h && ow <= s.w);
        let y = adaptive_avgpool(&x, oh, ow).unwrap();
        assert_close(y.data(), &oracle::adaptive_avgpool(&to64(&x), dims(&x), oh, ow), 1e-5);
    }

    #[test]
    fn upsample_matches_corner_weights(x in tensor_strategy(4, 1)) {
        let s = x.shape();
        let y = upsample2x(&x, UpsampleMode::Bilinear).unwrap();
        assert_close(y.data(), &oracle::bilinear(&to64(&x), dims(&x), 2 * s.h, 2 * s.w), 1e-5);
        let n = upsample2x(&x, UpsampleMode::Nearest).unwrap();
        for yy in 0..2 * s.h {
            for xx in 0..2 * s.w {
                for c in 0..s.c {
                    prop_assert_eq!(n.at(0, c, yy, xx), x.at(0, c, yy / 2, xx / 2));
                }
            }
        }
    }

    #[test]
    fn resize_matches_corner_weights(x in tensor_strategy(3, 1), oh in 1usize..12, ow in 1usize..12) {
        let y = resize_bilinear(&x, oh, ow).unwrap();
        assert_close(y.data(), &oracle::bilinear(&to64(&x), dims(&x), oh, ow), 1e-5);
    }

    #[test]
    fn softmax_is_a_distribution(x in tensor_strategy(4, 1)) {
        prop_assume!(x.shape().c >= 2);
        let scaled = x.map(|v| v * 30.0);
        let y = activation(&scaled, Activation::SoftmaxChannel).unwrap();
        let s = y.shape();
        for i in 0..s.plane() {
            let mut sum = 0.0f64;
            for c in 0..s.c {
                let v = y.plane(0, c)[i];
                prop_assert!((0.0..=1.0).contains(&v));
                sum += v as f64;
            }
            prop_assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn blur_and_resize_keep_unit_range(x in tensor_strategy(3, 1), sigma in 0.2f64..4.0, oh in 1usize..15, ow in 1usize..15) {
        let unit = x.map(|v| (v + 1.0) / 2.0);
        for t in [gaussian_blur2d(&unit, sigma).unwrap(), resize_bilinear(&unit, oh, ow).unwrap()] {
            prop_assert!(t.data().iter().all(|&v| (-1e-6..=1.0 + 1e-6).contains(&v)));
        }
    }

    #[test]
    fn blur_preserves_mean(x in tensor_strategy(2, 1), sigma in 0.3f64..5.0) {
        let y = gaussian_blur2d(&x, sigma).unwrap();
        let mean = |t: &Tensor| t.data().iter().map(|&v| v as f64).sum::<f64>() / t.len() as f64;
        prop_assert!((mean(&x) - mean(&y)).abs() < 1e-5);
    }

    #[test]
    fn batchnorm_matches_scalar_formula(x in tensor_strategy(4, 1), seed in any::<u64>()) {
        let c = x.shape().c;
        let mut rng = SplitMix64::new(seed);
        let mut v = || -> Vec<f32> { (0..c).map(|_| rng.uniform(0.1, 2.0) as f32).collect() };
        let (mean, var, gamma, beta) = (v(), v(), v(), v());
        let y = batchnorm_infer(&x, BatchNorm { mean: &mean, var: &var, gamma: &gamma, beta: &beta, eps: 1e-5 }).unwrap();
        for ch in 0..c {
            for (a, b) in x.plane(0, ch).iter().zip(y.plane(0, ch)) {
                let expect = (*a as f64 - mean[ch] as f64) / (var[ch] as f64 + 1e-5).sqrt() * gamma[ch] as f64 + beta[ch] as f64;
                prop_assert!((*b as f64 - expect).abs() < 1e-5);
            }
        }
    }
}

#[test]
fn dilated_conv_fixture() {
    let mut rng = SplitMix64::new(7);
    let x = Tensor::from_fn([1, 3, 8, 8], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let w = Tensor::from_fn([4, 3, 3, 3], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let p = ConvParams { stride: 1, padding: 2, dilation: 2 };
    let y = conv2d(&x, &w, None, p).unwrap();
    let (o, od) = oracle::conv2d(&to64(&x), dims(&x), &to64(&w), dims(&w), None, 1, 2, 2);
    assert_eq!(od, [1, 4, 8, 8]);
    assert_close(y.data(), &o, 1e-5);
}

#[test]
fn large_conv_spans_several_tiles() {
    // 70x70 = 4900 output positions, more than one column tile.
    let mut rng = SplitMix64::new(11);
    let x = Tensor::from_fn([2, 2, 70, 70], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let w = Tensor::from_fn([3, 2, 3, 3], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let y = conv2d(&x, &w, None, ConvParams::same(3)).unwrap();
    let (o, _) = oracle::conv2d(&to64(&x), dims(&x), &to64(&w), dims(&w), None, 1, 1, 1);
    assert_close(y.data(), &o, 1e-5);
    let pw = Tensor::from_fn([3, 2, 1, 1], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let y = conv2d(&x, &pw, None, ConvParams::default()).unwrap();
    let (o, _) = oracle::conv2d(&to64(&x), dims(&x), &to64(&pw), dims(&pw), None, 1, 0, 1);
    assert_close(y.data(), &o, 1e-5);
}

#[test]
fn random_unpool_nonzero_count_is_window_count() {
    let mut rng = SplitMix64::new(3);
    // strictly positive values so every scattered max is nonzero
    let x = Tensor::from_fn([1, 1, 8, 8], |_, _, _, _| rng.uniform(0.1, 1.0) as f32).unwrap();
    let (v, i) = maxpool2d_indexed(&x, 2, 2, 0).unwrap();
    let u = max_unpool2d(&v, &i, 2, 2, None).unwrap();
    assert_eq!(u.data().iter().filter(|&&a| a != 0.0).count(), 16);
}

#[test]
fn avgpool_ten_to_three() {
    let x = Tensor::from_fn([1, 1, 10, 10], |_, _, y, x| (y * 10 + x) as f32).unwrap();
    let y = adaptive_avgpool(&x, 3, 3).unwrap();
    assert_close(y.data(), &oracle::adaptive_avgpool(&to64(&x), [1, 1, 10, 10], 3, 3), 1e-5);
}

#[test]
fn resize_four_to_three() {
    let x = Tensor::from_fn([1, 1, 4, 4], |_, _, y, x| (y * 4 + x) as f32 / 15.0).unwrap();
    let y = resize_bilinear(&x, 3, 3).unwrap();
    assert_close(y.data(), &oracle::bilinear(&to64(&x), [1, 1, 4, 4], 3, 3), 1e-6);
}

#[test]
fn linear_matches_dot_products() {
    let mut rng = SplitMix64::new(5);
    let x: Vec<f32> = (0..8).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    let w = Tensor::from_fn([4, 8, 1, 1], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let b: Vec<f32> = (0..4).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
    let y = linear(&x, &w, &b).unwrap();
    for o in 0..4 {
        let expect: f64 = b[o] as f64 + (0..8).map(|i| w.at(o, i, 0, 0) as f64 * x[i] as f64).sum::<f64>();
        assert!((y[o] as f64 - expect).abs() < 1e-5);
    }
}

#[test]
fn blur_impulse_reproduces_sampled_gaussian() {
    let sigma = 1.5;
    let x = Tensor::from_fn([1, 1, 21, 21], |_, _, y, x| if y == 10 && x == 10 { 1.0 } else { 0.0 }).unwrap();
    let y = gaussian_blur2d(&x, sigma).unwrap();
    let (k, r) = oracle::gaussian_kernel2d(sigma);
    let size = 2 * r + 1;
    for yy in 0..21 {
        for xx in 0..21 {
            let dy = yy as isize - 10;
            let dx = xx as isize - 10;
            let expect = if dy.unsigned_abs() <= r && dx.unsigned_abs() <= r {
                k[(dy + r as isize) as usize * size + (dx + r as isize) as usize]
            } else {
                0.0
            };
            assert!((y.at(0, 0, yy, xx) as f64 - expect).abs() < 1e-6);
        }
    }
}

#[test]
fn conv_is_bit_identical_across_pool_sizes() {
    let mut rng = SplitMix64::new(21);
    let x = Tensor::from_fn([1, 8, 80, 80], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let w = Tensor::from_fn([16, 8, 3, 3], |_, _, _, _| rng.uniform(-1.0, 1.0) as f32).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| conv2d(&x, &w, None, ConvParams::same(3)).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.data(), b.data());
    assert_eq!(a.data(), run(1).data());
}
