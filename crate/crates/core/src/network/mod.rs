//! The matting network: encoder, semantic decoder, guided matting decoder
//! and fusion head.
//!
//! [`build_network`] describes the layers, [`WeightStore`] holds their
//! parameters and [`Network::forward`] runs inference. Batch norm is
//! inference-only.

mod hybrid;
mod spec;
mod weights;

use std::collections::HashMap;

use unimatte_tensor::{
    activation, adaptive_avgpool, batchnorm_infer, channel_max_mean, concat_channels, conv2d, linear,
    max_unpool2d, maxpool2d_indexed, resize_bilinear, upsample2x, Activation, BatchNorm, ConvParams,
    PoolIndices, Shape, Tensor, UpsampleMode,
};

pub use hybrid::{hybrid_inference, scaled_size, HybridOutput, DEFAULT_SCALES};
pub use spec::{
    build_network, count_macs, BasicBlockSpec, ConvSpec, Group, HeadActivation, LayerKind, LayerSpec,
    LinearSpec, NetworkSpec, ParamKind, ParamSpec,
};
pub use weights::{
    init_weights, load_weights, save_weights, Provenance, TensorRecord, WeightStore, DATA_FILE,
    MANIFEST_FILE,
};

use crate::losses::fuse;
use crate::semantics::{class_value, UnifiedRep};
use crate::{AlphaMatte, Error, ImageType, Plane, Result};

pub const BN_EPS: f32 = 1e-5;

/// Input sides must be multiples of this.
pub const SIZE_MULTIPLE: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutputs {
    /// `[n, 3, H, W]` pre-softmax semantic scores.
    pub semantic_logits: Tensor,
    pub semantic_probs: Tensor,
    /// `[n, 1, H, W]` argmax of the probabilities mapped to `{0, 0.5, 1}`.
    pub unified_pred: Tensor,
    /// `[n, 1, H, W]` raw matting output `M`.
    pub matting_raw: Tensor,
    /// `[n, 1, H, W]` spatial attention map.
    pub spatial_attention: Tensor,
    /// `[n, 1, H, W]` fused alpha `α`.
    pub fused_alpha: Tensor,
}

impl NetworkOutputs {
    /// Unified prediction of batch item `n`. A predicted map may hold all
    /// three values, so it is declared as an SO map.
    pub fn unified_rep(&self, n: usize) -> UnifiedRep {
        UnifiedRep::new(Plane::from_tensor(&self.unified_pred, n, 0), ImageType::So)
            .expect("decoded classes are ternary")
    }

    pub fn alpha(&self, n: usize) -> AlphaMatte {
        AlphaMatte::clamped(Plane::from_tensor(&self.fused_alpha, n, 0))
    }
}

/// Argmax over the three class channels (ties to the smaller class), mapped
/// to `{0, 0.5, 1}`.
pub fn decode_unified(probs: &Tensor) -> Result<Tensor> {
    let s = probs.shape();
    if s.c != 3 {
        return Err(Error::InvalidValue(format!("expected 3 class channels, got {}", s.c)));
    }
    let p = s.plane();
    let mut out = Vec::with_capacity(s.n * p);
    for n in 0..s.n {
        let (c0, c1, c2) = (probs.plane(n, 0), probs.plane(n, 1), probs.plane(n, 2));
        for i in 0..p {
            let mut best = 0u8;
            let mut v = c0[i];
            if c1[i] > v {
                best = 1;
                v = c1[i];
            }
            if c2[i] > v {
                best = 2;
            }
            out.push(class_value(best) as f32);
        }
    }
    Ok(Tensor::new(Shape::new(s.n, 1, s.h, s.w), out)?)
}

/// Fuses `[n, 1, h, w]` unified and matting maps per item.
pub fn fuse_tensors(unified: &Tensor, matting: &Tensor) -> Result<Tensor> {
    let s = matting.shape();
    let mut data = Vec::with_capacity(s.numel());
    for n in 0..s.n {
        let a = fuse(&Plane::from_tensor(unified, n, 0), &Plane::from_tensor(matting, n, 0))?;
        data.extend(a.data().iter().map(|&v| v as f32));
    }
    Ok(Tensor::new(Shape::new(s.n, 1, s.h, s.w), data)?)
}

/// Squeeze-and-excitation: per-channel gates `sigmoid(W2 relu(W1 mean(x) + b1) + b2)`
/// broadcast over the plane. Returns the gated tensor and the gates.
pub fn squeeze_excite(
    x: &Tensor,
    fc1: (&Tensor, &[f32]),
    fc2: (&Tensor, &[f32]),
) -> Result<(Tensor, Vec<f32>)> {
    let s = x.shape();
    let pooled = adaptive_avgpool(x, 1, 1)?;
    let mut gates = Vec::with_capacity(s.n * s.c);
    for n in 0..s.n {
        let squeezed = &pooled.data()[n * s.c..(n + 1) * s.c];
        let hidden: Vec<f32> = linear(squeezed, fc1.0, fc1.1)?.into_iter().map(|v| v.max(0.0)).collect();
        gates.extend(linear(&hidden, fc2.0, fc2.1)?.into_iter().map(unimatte_tensor::sigmoid_scalar));
    }
    Ok((x.scale_channels(&gates)?, gates))
}

/// Spatial attention `sigmoid(conv([max_c x, mean_c x]))`.
pub fn spatial_attention(x: &Tensor, weight: &Tensor, bias: &[f32], padding: usize) -> Result<Tensor> {
    let pooled = channel_max_mean(x)?;
    let p = ConvParams {
        padding,
        ..ConvParams::default()
    };
    Ok(activation(&conv2d(&pooled, weight, Some(bias), p)?, Activation::Sigmoid)?)
}

/// `features + attention ⊙ features`.
pub fn attention_residual(features: &Tensor, attention: &Tensor) -> Result<Tensor> {
    Ok(features.add(&features.mul_spatial(attention)?)?)
}

/// Spec plus weights, validated against each other.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    store: WeightStore,
}

/// Named activations kept for the layers that consume them later.
struct Activations {
    values: HashMap<&'static str, Tensor>,
    indices: HashMap<&'static str, PoolIndices>,
    trace: Option<Vec<(&'static str, Shape)>>,
}

impl Activations {
    fn put(&mut self, name: &'static str, t: Tensor) {
        if let Some(trace) = &mut self.trace {
            trace.push((name, t.shape()));
        }
        self.values.insert(name, t);
    }

    fn get(&self, name: &str) -> &Tensor {
        &self.values[name]
    }
}

impl Network {
    pub fn new(spec: NetworkSpec, store: WeightStore) -> Result<Self> {
        store.validate(&spec)?;
        Ok(Network { spec, store })
    }

    /// Network with freshly initialised weights.
    pub fn seeded(seed: u64) -> Self {
        let spec = build_network();
        let store = WeightStore::init(&spec, seed);
        Network { spec, store }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn store(&self) -> &WeightStore {
        &self.store
    }

    fn layer(&self, name: &str) -> &LayerSpec {
        self.spec.layer(name).expect("layer present in spec")
    }

    fn conv(&self, c: &ConvSpec, x: &Tensor) -> Result<Tensor> {
        let w = self.store.get(&format!("{}.weight", c.name))?;
        let b = if c.bias {
            Some(self.store.get(&format!("{}.bias", c.name))?.data())
        } else {
            None
        };
        let p = ConvParams {
            stride: c.stride,
            padding: c.padding,
            dilation: c.dilation,
        };
        let mut y = conv2d(x, w, b, p)?;
        if c.batch_norm {
            let get = |s: &str| self.store.get(&format!("{}.bn.{s}", c.name)).map(|t| t.data());
            y = batchnorm_infer(
                &y,
                BatchNorm {
                    mean: get("running_mean")?,
                    var: get("running_var")?,
                    gamma: get("weight")?,
                    beta: get("bias")?,
                    eps: BN_EPS,
                },
            )?;
        }
        if c.relu {
            y.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(y)
    }

    fn conv_layer(&self, layer: &LayerSpec, x: Tensor) -> Result<Tensor> {
        let LayerKind::Conv { convs, upsample } = &layer.kind else {
            unreachable!("{} is not a conv layer", layer.name)
        };
        let mut y = x;
        for c in convs {
            y = self.conv(c, &y)?;
        }
        if *upsample {
            y = upsample2x(&y, UpsampleMode::Bilinear)?;
        }
        Ok(y)
    }

    fn residual_stage(&self, layer: &LayerSpec, x: Tensor) -> Result<Tensor> {
        let LayerKind::ResidualStage { blocks } = &layer.kind else {
            unreachable!()
        };
        let mut y = x;
        for b in blocks {
            let h = self.conv(&b.conv2, &self.conv(&b.conv1, &y)?)?;
            let shortcut = match &b.downsample {
                Some(d) => self.conv(d, &y)?,
                None => y,
            };
            y = h.zip_with(&shortcut, |a, s| (a + s).max(0.0))?;
        }
        Ok(y)
    }

    fn pool(&self, acts: &mut Activations, name: &'static str, input: &str) -> Result<()> {
        let LayerKind::MaxPool {
            kernel,
            stride,
            padding,
        } = self.layer(name).kind
        else {
            unreachable!()
        };
        let (y, idx) = maxpool2d_indexed(acts.get(input), kernel, stride, padding)?;
        acts.indices.insert(name, idx);
        acts.put(name, y);
        Ok(())
    }

    fn se(&self, name: &str, x: &Tensor) -> Result<Tensor> {
        let LayerKind::SqueezeExcite { fc1, fc2 } = &self.layer(name).kind else {
            unreachable!()
        };
        let get = |l: &LinearSpec| -> Result<(&Tensor, &[f32])> {
            Ok((
                self.store.get(&format!("{}.weight", l.name))?,
                self.store.get(&format!("{}.bias", l.name))?.data(),
            ))
        };
        Ok(squeeze_excite(x, get(fc1)?, get(fc2)?)?.0)
    }

    fn unpool(&self, name: &str, x: &Tensor, acts: &Activations) -> Result<Tensor> {
        let LayerKind::MaxUnpool {
            kernel,
            stride,
            indices,
        } = self.layer(name).kind
        else {
            unreachable!()
        };
        let idx = &acts.indices[indices];
        Ok(max_unpool2d(x, idx, kernel, stride, Some(idx.source_size()))?)
    }

    fn head(&self, name: &str, x: &Tensor) -> Result<Tensor> {
        let LayerKind::Head { conv, .. } = &self.layer(name).kind else {
            unreachable!()
        };
        self.conv(conv, x)
    }

    /// Runs the network on an `[n, 3, H, W]` image with `H` and `W` positive
    /// multiples of 32.
    pub fn forward(&self, image: &Tensor) -> Result<NetworkOutputs> {
        self.run(image, false).map(|(o, _)| o)
    }

    /// Like [`forward`](Self::forward), also returning the output shape of
    /// every table layer in table order.
    pub fn forward_traced(&self, image: &Tensor) -> Result<(NetworkOutputs, Vec<(&'static str, Shape)>)> {
        let (out, trace) = self.run(image, true)?;
        let trace = trace.expect("tracing enabled");
        let order: HashMap<&str, usize> = self.spec.layers.iter().enumerate().map(|(i, l)| (l.name, i)).collect();
        let mut trace: Vec<_> = trace.into_iter().filter(|(n, _)| order.contains_key(n)).collect();
        trace.sort_by_key(|(n, _)| order[n]);
        Ok((out, trace))
    }

    fn run(&self, image: &Tensor, trace: bool) -> Result<(NetworkOutputs, Option<Vec<(&'static str, Shape)>>)> {
        let s = image.shape();
        if s.c != 3 {
            return Err(Error::InvalidValue(format!("network input needs 3 channels, got {}", s.c)));
        }
        if s.h % SIZE_MULTIPLE != 0 || s.w % SIZE_MULTIPLE != 0 {
            return Err(Error::InvalidValue(format!(
                "network input {}x{} is not a multiple of {SIZE_MULTIPLE}",
                s.h, s.w
            )));
        }
        let mut a = Activations {
            values: HashMap::new(),
            indices: HashMap::new(),
            trace: trace.then(Vec::new),
        };

        // Encoder.
        let e0 = self.conv_layer(self.layer("E0"), image.clone())?;
        a.put("E0", e0);
        self.pool(&mut a, "M0", "E0")?;
        self.pool(&mut a, "M1", "M0")?;
        for (stage, input, pool) in [
            ("E1", "M1", Some("M2")),
            ("E2", "M2", Some("M3")),
            ("E3", "M3", Some("M4")),
            ("E4", "M4", None),
        ] {
            let y = self.residual_stage(self.layer(stage), a.get(input).clone())?;
            a.put(stage, y);
            if let Some(p) = pool {
                self.pool(&mut a, p, stage)?;
            }
        }

        // Pyramid pooling.
        let LayerKind::PyramidPooling {
            bins,
            branches,
            fuse: fuse_conv,
            projections,
        } = &self.layer("PPM").kind
        else {
            unreachable!()
        };
        let e4 = a.get("E4").clone();
        let (h32, w32) = (e4.shape().h, e4.shape().w);
        let mut parts = vec![e4.clone()];
        for (&bin, conv) in bins.iter().zip(branches) {
            let pooled = adaptive_avgpool(&e4, bin, bin)?;
            parts.push(resize_bilinear(&self.conv(conv, &pooled)?, h32, w32)?);
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        let ppm = self.conv(fuse_conv, &concat_channels(&refs)?)?;
        drop(parts);
        let proj: Vec<Tensor> = projections
            .iter()
            .map(|c| self.conv(c, &ppm))
            .collect::<Result<_>>()?;
        a.put("PPM", ppm);

        // Semantic decoder.
        let sd4_in = concat_channels(&[a.get("PPM"), &e4])?;
        let sd4 = self.conv_layer(self.layer("SD_4"), sd4_in)?;
        a.put("SD_4", sd4);
        let se4 = self.se("SE_4", a.get("SD_4"))?;
        a.put("SE_4", se4);
        let stages: [(&str, &str, &str, &'static str, &'static str); 4] = [
            ("SE_4", "SD_3", "SE_3", "SD_3", "SE_3"),
            ("SE_3", "SD_2", "SE_2", "SD_2", "SE_2"),
            ("SE_2", "SD_1", "SE_1", "SD_1", "SE_1"),
            ("SE_1", "SD_0", "", "SD_0", ""),
        ];
        for (i, (prev, sd, se, sd_name, se_name)) in stages.into_iter().enumerate() {
            let prev_t = a.get(prev);
            let (ph, pw) = (prev_t.shape().h, prev_t.shape().w);
            let p = resize_bilinear(&proj[i], ph, pw)?;
            let y = self.conv_layer(self.layer(sd), concat_channels(&[&p, prev_t])?)?;
            a.put(sd_name, y);
            if !se.is_empty() {
                let g = self.se(se, a.get(sd_name))?;
                a.put(se_name, g);
            }
        }
        let LayerKind::SpatialAttention { conv: spa_conv } = &self.layer("SPA").kind else {
            unreachable!()
        };
        let spa = spatial_attention(
            a.get("SD_0"),
            self.store.get(&format!("{}.weight", spa_conv.name))?,
            self.store.get(&format!("{}.bias", spa_conv.name))?.data(),
            spa_conv.padding,
        )?;
        a.put("SPA", spa);
        let se0 = self.se("SE_0", a.get("SD_0"))?;
        a.put("SE_0", se0);
        let logits = self.head("SD-final", a.get("SE_0"))?;
        a.put("SD-final", logits.clone());
        let probs = activation(&logits, Activation::SoftmaxChannel)?;
        let unified = decode_unified(&probs)?;

        // Matting decoder.
        let md5 = self.conv_layer(self.layer("MD_5"), e4.clone())?;
        a.put("MD_5", md5);
        let md4 = self.conv_layer(self.layer("MD_4"), concat_channels(&[a.get("MD_5"), &e4])?)?;
        a.put("MD_4", md4);
        for (mu, from, md, skip) in [
            ("MU_4", "MD_4", "MD_3", "E3"),
            ("MU_3", "MD_3", "MD_2", "E2"),
            ("MU_2", "MD_2", "MD_1", "E1"),
        ] {
            let u = self.unpool(mu, a.get(from), &a)?;
            a.put(mu, u);
            let y = self.conv_layer(self.layer(md), concat_channels(&[a.get(mu), a.get(skip)])?)?;
            a.put(md, y);
        }
        let mu1 = self.unpool("MU_1", a.get("MD_1"), &a)?;
        a.put("MU_1", mu1);
        let mu0 = self.unpool("MU_0", a.get("MU_1"), &a)?;
        a.put("MU_0", mu0);
        let md0 = self.conv_layer(self.layer("MD_0"), concat_channels(&[a.get("MU_0"), a.get("E0")])?)?;
        a.put("MD_0", md0);
        let spar = attention_residual(a.get("MD_0"), a.get("SPA"))?;
        a.put("SPAR", spar);
        let m = activation(&self.head("MD-final", a.get("SPAR"))?, Activation::Sigmoid)?;
        a.put("MD-final", m.clone());
        let fused = fuse_tensors(&unified, &m)?;
        a.put("MF", fused.clone());

        let spatial_attention = a.values.remove("SPA").expect("SPA computed");
        Ok((
            NetworkOutputs {
                semantic_logits: logits,
                semantic_probs: probs,
                unified_pred: unified,
                matting_raw: m,
                spatial_attention,
                fused_alpha: fused,
            },
            a.trace,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_pick_smaller_class() {
        let p = Tensor::new([1, 3, 1, 3], vec![0.4, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.4, 0.4]).unwrap();
        assert_eq!(decode_unified(&p).unwrap().data(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn zero_attention_is_identity() {
        let f = Tensor::from_fn([1, 2, 2, 2], |_, c, y, x| (c + y + x) as f32).unwrap();
        let z = Tensor::zeros([1, 1, 2, 2]).unwrap();
        assert_eq!(attention_residual(&f, &z).unwrap(), f);
    }

    #[test]
    fn rejects_bad_sizes() {
        let net = Network::seeded(0);
        let x = Tensor::zeros([1, 3, 48, 64]).unwrap();
        assert!(net.forward(&x).is_err());
        let x = Tensor::zeros([1, 1, 64, 64]).unwrap();
        assert!(net.forward(&x).is_err());
    }
}
