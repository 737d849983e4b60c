//! Network construction, shape audit, weights and inference contracts.

use std::sync::OnceLock;

use unimatte_core::losses::fuse_value;
use unimatte_core::network::{
    attention_residual, build_network, count_macs, hybrid_inference, spatial_attention, squeeze_excite,
    LayerKind, Network, NetworkOutputs, WeightStore,
};
use unimatte_core::tensor::{Shape, Tensor};
use unimatte_core::Error;

/// Output rows of the published layer table for a 320×320 input:
/// (name, channels, side).
const TABLE: [(&str, usize, usize); 37] = [
    ("E0", 64, 320),
    ("M0", 64, 160),
    ("M1", 64, 80),
    ("E1", 64, 80),
    ("M2", 64, 40),
    ("E2", 128, 40),
    ("M3", 128, 20),
    ("E3", 256, 20),
    ("M4", 256, 10),
    ("E4", 512, 10),
    ("PPM", 512, 10),
    ("SD_4", 256, 20),
    ("SE_4", 256, 20),
    ("SD_3", 128, 40),
    ("SE_3", 128, 40),
    ("SD_2", 64, 80),
    ("SE_2", 64, 80),
    ("SD_1", 64, 160),
    ("SE_1", 64, 160),
    ("SD_0", 64, 320),
    ("SPA", 1, 320),
    ("SE_0", 64, 320),
    ("SD-final", 3, 320),
    ("MD_5", 512, 10),
    ("MD_4", 256, 10),
    ("MU_4", 256, 20),
    ("MD_3", 128, 20),
    ("MU_3", 128, 40),
    ("MD_2", 64, 40),
    ("MU_2", 64, 80),
    ("MD_1", 64, 80),
    ("MU_1", 64, 160),
    ("MU_0", 64, 320),
    ("MD_0", 64, 320),
    ("SPAR", 64, 320),
    ("MD-final", 1, 320),
    ("MF", 1, 320),
];

fn net() -> &'static Network {
    static NET: OnceLock<Network> = OnceLock::new();
    NET.get_or_init(|| Network::seeded(7))
}

fn input320() -> Tensor {
    Tensor::from_fn([1, 3, 320, 320], |_, c, y, x| {
        (((c * 7 + y * 3 + x * 5) % 17) as f32 / 16.0 - 0.5) * 2.0
    })
    .unwrap()
}

fn traced320() -> &'static (NetworkOutputs, Vec<(&'static str, Shape)>) {
    static RUN: OnceLock<(NetworkOutputs, Vec<(&'static str, Shape)>)> = OnceLock::new();
    RUN.get_or_init(|| net().forward_traced(&input320()).unwrap())
}

#[test]
fn spec_rows_match_table() {
    let spec = build_network();
    let names: Vec<&str> = spec.layers.iter().map(|l| l.name).collect();
    let expected: Vec<&str> = TABLE.iter().map(|r| r.0).collect();
    assert_eq!(names, expected);
    for (layer, &(_, c, side)) in spec.layers.iter().zip(&TABLE) {
        assert_eq!(layer.expected_shape(1, 320), [1, c, side, side], "{}", layer.name);
    }
}

#[test]
fn table_hyperparameters() {
    let spec = build_network();
    let md5 = spec.layer("MD_5").unwrap();
    for c in md5.convs() {
        assert_eq!((c.kernel, c.dilation, c.padding), (3, 2, 2));
    }
    let LayerKind::SpatialAttention { conv } = &spec.layer("SPA").unwrap().kind else {
        panic!("SPA is not spatial attention");
    };
    assert_eq!((conv.in_channels, conv.out_channels, conv.kernel, conv.padding), (2, 1, 7, 3));
    let LayerKind::ResidualStage { blocks } = &spec.layer("E3").unwrap().kind else {
        panic!()
    };
    assert_eq!(blocks.len(), 6);
    // SE bottlenecks are c/16 everywhere.
    for name in ["SE_4", "SE_3", "SE_2", "SE_1", "SE_0"] {
        let LayerKind::SqueezeExcite { fc1, .. } = &spec.layer(name).unwrap().kind else {
            panic!()
        };
        assert_eq!(fc1.out_features * 16, fc1.in_features);
    }
}

#[test]
fn forward_shapes_follow_table() {
    let (_, trace) = traced320();
    assert_eq!(trace.len(), TABLE.len());
    for ((name, shape), &(tname, c, side)) in trace.iter().zip(&TABLE) {
        assert_eq!(*name, tname);
        assert_eq!(shape.dims(), [1, c, side, side], "{name}");
    }
}

#[test]
fn forward_outputs_are_in_range_and_fused() {
    let (out, _) = traced320();
    assert_eq!(out.semantic_logits.shape().dims(), [1, 3, 320, 320]);
    assert_eq!(out.matting_raw.shape().dims(), [1, 1, 320, 320]);
    for t in [&out.semantic_logits, &out.semantic_probs, &out.matting_raw, &out.fused_alpha] {
        assert!(t.all_finite());
    }
    let p = 320 * 320;
    let probs = out.semantic_probs.data();
    for i in 0..p {
        let s = probs[i] + probs[p + i] + probs[2 * p + i];
        assert!((s - 1.0).abs() < 1e-5);
    }
    for t in [&out.matting_raw, &out.spatial_attention, &out.fused_alpha] {
        assert!(t.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    for ((&u, &m), &a) in out
        .unified_pred
        .data()
        .iter()
        .zip(out.matting_raw.data())
        .zip(out.fused_alpha.data())
    {
        assert!([0.0, 0.5, 1.0].contains(&u));
        assert!((fuse_value(u as f64, m as f64) - a as f64).abs() < 1e-6);
    }
}

#[test]
fn constant_input_stays_finite() {
    let x = Tensor::full([1, 3, 64, 64], 0.5).unwrap();
    let out = net().forward(&x).unwrap();
    assert!(out.fused_alpha.all_finite());
    assert!(out.fused_alpha.data().iter().all(|v| (0.0..=1.0).contains(v)));
}

#[test]
fn forward_is_deterministic() {
    let x = Tensor::from_fn([2, 3, 64, 96], |n, c, y, x| ((n + c * y + x) % 13) as f32 / 13.0).unwrap();
    let a = net().forward(&x).unwrap();
    let b = net().forward(&x).unwrap();
    assert_eq!(a, b);
    // Batch items are independent of each other.
    let single = net().forward(&x.item(1)).unwrap();
    assert_eq!(single.fused_alpha.data(), a.fused_alpha.item(1).data());
}

#[test]
fn degenerate_hybrid_equals_forward() {
    let (out, _) = traced320();
    let h = hybrid_inference(net(), &input320(), (1.0, 1.0)).unwrap();
    let fused: Vec<f32> = h.alpha.data().iter().map(|&v| v as f32).collect();
    assert_eq!(fused.as_slice(), out.fused_alpha.data());
}

#[test]
fn hybrid_returns_original_size() {
    let x = Tensor::from_fn([1, 3, 200, 150], |_, c, y, x| ((c + y + 2 * x) % 9) as f32 / 9.0).unwrap();
    let h = hybrid_inference(net(), &x, (1.0 / 3.0, 1.0 / 4.0)).unwrap();
    assert_eq!(h.alpha.dims(), (200, 150));
    assert!(h.alpha.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(h.unified.data().iter().all(|v| [0.0, 0.5, 1.0].contains(v)));
    let tiny = Tensor::zeros([1, 3, 60, 60]).unwrap();
    assert!(matches!(
        hybrid_inference(net(), &tiny, (1.0 / 3.0, 1.0 / 4.0)),
        Err(Error::ImageTooSmall(_))
    ));
}

#[test]
fn parameter_and_mac_totals() {
    let spec = build_network();
    let params = spec.count_parameters();
    assert_eq!(params, net().store().count_parameters(&spec));
    // Frozen totals of the wiring recorded in the layer table docs.
    assert_eq!(params, 57_270_283);
    let macs800 = count_macs(&spec, 800);
    let rel = (params as f64 - 55.3e6).abs() / 55.3e6;
    assert!(rel < 0.10, "params {params}");
    let rel = (macs800 as f64 - 191.52e9).abs() / 191.52e9;
    assert!(rel < 0.10, "macs {macs800}");
}

#[test]
fn seeded_init_is_reproducible() {
    let spec = build_network();
    let a = WeightStore::init(&spec, 3);
    let b = WeightStore::init(&spec, 3);
    let c = WeightStore::init(&spec, 4);
    assert_eq!(a.tensors(), b.tensors());
    let w = "e0.conv.weight";
    assert_ne!(a.get(w).unwrap().data()[0], c.get(w).unwrap().data()[0]);
    a.validate(&spec).unwrap();
    assert_eq!(a.get("e1.0.conv1.bn.running_var").unwrap().data(), &[1.0; 64]);
    let bound = (6.0f32 / (3.0 * 49.0)).sqrt();
    assert!(a.get(w).unwrap().data().iter().all(|v| v.abs() <= bound));
}

#[test]
fn se_gate_is_channel_reweighting() {
    let x = Tensor::from_fn([1, 32, 4, 4], |_, c, y, x| (c as f32 - 10.0) * 0.1 + (y * x) as f32 * 0.01).unwrap();
    let fc1 = Tensor::from_fn([2, 32, 1, 1], |o, i, _, _| ((o * 32 + i) % 5) as f32 * 0.1 - 0.2).unwrap();
    let fc2 = Tensor::from_fn([32, 2, 1, 1], |o, i, _, _| ((o + i) % 3) as f32 * 0.3 - 0.3).unwrap();
    let (y, gates) = squeeze_excite(&x, (&fc1, &[0.1, -0.1]), (&fc2, &[0.0; 32])).unwrap();
    assert!(gates.iter().all(|&g| g > 0.0 && g < 1.0));
    for c in 0..32 {
        for (a, b) in y.plane(0, c).iter().zip(x.plane(0, c)) {
            assert_eq!(*a, b * gates[c]);
        }
    }
    // A gate driven to zero removes the channel.
    let mut bias = vec![0.0; 32];
    bias[5] = -1e4;
    let (y, _) = squeeze_excite(&x, (&fc1, &[0.1, -0.1]), (&fc2, &bias)).unwrap();
    assert!(y.plane(0, 5).iter().all(|&v| v == 0.0));
}

#[test]
fn spatial_attention_is_open_interval_and_residual() {
    let x = Tensor::from_fn([1, 4, 9, 9], |_, c, y, x| ((c * 3 + y * x) % 7) as f32 - 3.0).unwrap();
    let w = Tensor::from_fn([1, 2, 7, 7], |_, c, y, x| ((c + y + x) % 4) as f32 * 0.01).unwrap();
    let a = spatial_attention(&x, &w, &[0.0], 3).unwrap();
    assert_eq!(a.shape().dims(), [1, 1, 9, 9]);
    assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));
    let zero = Tensor::zeros([1, 1, 9, 9]).unwrap();
    assert_eq!(attention_residual(&x, &zero).unwrap(), x);
}

#[test]
fn unpool_with_mismatched_indices_is_an_error() {
    use unimatte_core::tensor::{max_unpool2d, maxpool2d_indexed};
    let big = Tensor::zeros([1, 64, 16, 16]).unwrap();
    let (_, idx) = maxpool2d_indexed(&big, 3, 2, 1).unwrap();
    let wrong = Tensor::zeros([1, 64, 4, 4]).unwrap();
    assert!(max_unpool2d(&wrong, &idx, 2, 2, Some(idx.source_size())).is_err());
}
