//! The layer table.
//!
//! [`build_network`] lists every named stage of the network with its
//! hyperparameters and the output shape it produces. Shapes are given as a
//! channel count and a spatial divisor of the input size, so a 320×320 input
//! gives `E4 = 512 × 10 × 10` (divisor 32).
//!
//! Skip wiring of the matting decoder:
//!
//! | block | input                          | channels |
//! |-------|--------------------------------|----------|
//! | MD_4  | MD_5 ‖ E4                      | 1024 |
//! | MD_3  | MU_4 ‖ E3                      | 512  |
//! | MD_2  | MU_3 ‖ E2                      | 256  |
//! | MD_1  | MU_2 ‖ E1                      | 128  |
//! | MD_0  | MU_0 ‖ E0                      | 128  |
//!
//! and of the semantic decoder, where `P_k` is the PPM output projected by a
//! 3×3 conv and bilinearly resized to the stage resolution:
//!
//! | block | input          | channels |
//! |-------|----------------|----------|
//! | SD_4  | PPM ‖ E4       | 1024 |
//! | SD_3  | P_4 ‖ SE_4     | 512  |
//! | SD_2  | P_3 ‖ SE_3     | 256  |
//! | SD_1  | P_2 ‖ SE_2     | 128  |
//! | SD_0  | P_1 ‖ SE_1     | 128  |

use std::fmt;

/// A convolution, optionally followed by inference batch norm and ReLU.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    /// Parameter prefix in the weight store.
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub bias: bool,
    pub batch_norm: bool,
    pub relu: bool,
    /// Spatial divisor of the conv's output relative to the network input.
    /// `None` for convs that run at a fixed size (pyramid pooling bins).
    pub scale: Option<usize>,
    /// Fixed output side for convs without a `scale`.
    pub fixed_size: Option<usize>,
}

impl ConvSpec {
    /// 3×3 (or `kernel`) "same" conv with BN and ReLU, no bias.
    fn bn_relu(name: impl Into<String>, cin: usize, cout: usize, kernel: usize, scale: usize) -> Self {
        ConvSpec {
            name: name.into(),
            in_channels: cin,
            out_channels: cout,
            kernel,
            stride: 1,
            padding: kernel / 2,
            dilation: 1,
            bias: false,
            batch_norm: true,
            relu: true,
            scale: Some(scale),
            fixed_size: None,
        }
    }

    fn plain(name: impl Into<String>, cin: usize, cout: usize, kernel: usize, scale: usize) -> Self {
        ConvSpec {
            bias: true,
            batch_norm: false,
            relu: false,
            ..Self::bn_relu(name, cin, cout, kernel, scale)
        }
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    /// Learnable parameters: weights, bias, BN scale and shift.
    pub fn parameter_count(&self) -> usize {
        let mut n = self.out_channels * self.fan_in();
        if self.bias {
            n += self.out_channels;
        }
        if self.batch_norm {
            n += 2 * self.out_channels;
        }
        n
    }

    /// Output positions for an `input × input` network input.
    pub fn positions(&self, input: usize) -> usize {
        match (self.scale, self.fixed_size) {
            (Some(s), _) => (input / s) * (input / s),
            (None, Some(f)) => f * f,
            (None, None) => 0,
        }
    }

    pub fn macs(&self, input: usize) -> u64 {
        (self.out_channels * self.fan_in()) as u64 * self.positions(input) as u64
    }
}

/// Fully connected layer stored as a `[out, in, 1, 1]` weight plus bias.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSpec {
    pub name: String,
    pub in_features: usize,
    pub out_features: usize,
}

impl LinearSpec {
    pub fn parameter_count(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }
}

/// ResNet basic block: two 3×3 convs with an identity or projected shortcut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasicBlockSpec {
    pub conv1: ConvSpec,
    pub conv2: ConvSpec,
    pub downsample: Option<ConvSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadActivation {
    SoftmaxChannel,
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    /// Sequential convs, then optionally a 2× bilinear upsample.
    Conv { convs: Vec<ConvSpec>, upsample: bool },
    /// Index-keeping max pool.
    MaxPool { kernel: usize, stride: usize, padding: usize },
    ResidualStage { blocks: Vec<BasicBlockSpec> },
    /// Pyramid pooling with per-stage projections of its output for the
    /// semantic decoder.
    PyramidPooling {
        bins: Vec<usize>,
        branches: Vec<ConvSpec>,
        fuse: ConvSpec,
        projections: Vec<ConvSpec>,
    },
    SqueezeExcite { fc1: LinearSpec, fc2: LinearSpec },
    /// `sigmoid(conv([max_c x, mean_c x]))`.
    SpatialAttention { conv: ConvSpec },
    /// Max unpooling with the indices recorded by the named pool layer.
    MaxUnpool { kernel: usize, stride: usize, indices: &'static str },
    /// `features + attention ⊙ features`.
    AttentionResidual { attention: &'static str, features: &'static str },
    Head { conv: ConvSpec, activation: HeadActivation },
    /// Fusion of the unified representation and raw matte.
    Fusion,
}

impl LayerKind {
    pub fn short_name(&self) -> &'static str {
        match self {
            LayerKind::Conv { .. } => "conv",
            LayerKind::MaxPool { .. } => "maxpool",
            LayerKind::ResidualStage { .. } => "residual",
            LayerKind::PyramidPooling { .. } => "ppm",
            LayerKind::SqueezeExcite { .. } => "se",
            LayerKind::SpatialAttention { .. } => "spatial-attention",
            LayerKind::MaxUnpool { .. } => "unpool",
            LayerKind::AttentionResidual { .. } => "attention-residual",
            LayerKind::Head { .. } => "head",
            LayerKind::Fusion => "fusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Encoder,
    SemanticDecoder,
    MattingDecoder,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Group::Encoder => "encoder",
            Group::SemanticDecoder => "semantic decoder",
            Group::MattingDecoder => "matting decoder",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: &'static str,
    pub group: Group,
    pub kind: LayerKind,
    /// Layers whose outputs feed this one, concatenated in order.
    pub inputs: Vec<&'static str>,
    pub out_channels: usize,
    /// Output spatial divisor relative to the input.
    pub out_scale: usize,
    /// Human-readable description of the operations.
    pub detail: String,
}

impl LayerSpec {
    /// Expected output shape `[n, c, h, w]` for an `n × 3 × size × size` input.
    pub fn expected_shape(&self, n: usize, size: usize) -> [usize; 4] {
        [n, self.out_channels, size / self.out_scale, size / self.out_scale]
    }

    /// Every conv in the layer, in execution order.
    pub fn convs(&self) -> Vec<&ConvSpec> {
        match &self.kind {
            LayerKind::Conv { convs, .. } => convs.iter().collect(),
            LayerKind::ResidualStage { blocks } => blocks
                .iter()
                .flat_map(|b| [Some(&b.conv1), Some(&b.conv2), b.downsample.as_ref()])
                .flatten()
                .collect(),
            LayerKind::PyramidPooling {
                branches,
                fuse,
                projections,
                ..
            } => branches.iter().chain([fuse]).chain(projections).collect(),
            LayerKind::SpatialAttention { conv } | LayerKind::Head { conv, .. } => vec![conv],
            _ => Vec::new(),
        }
    }

    pub fn linears(&self) -> Vec<&LinearSpec> {
        match &self.kind {
            LayerKind::SqueezeExcite { fc1, fc2 } => vec![fc1, fc2],
            _ => Vec::new(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.convs().iter().map(|c| c.parameter_count()).sum::<usize>()
            + self.linears().iter().map(|l| l.parameter_count()).sum::<usize>()
    }

    pub fn macs(&self, input: usize) -> u64 {
        self.convs().iter().map(|c| c.macs(input)).sum::<u64>()
            + self
                .linears()
                .iter()
                .map(|l| (l.in_features * l.out_features) as u64)
                .sum::<u64>()
    }
}

/// Role of a stored tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight { fan_in: usize },
    Bias,
    BnWeight,
    BnBias,
    BnMean,
    BnVar,
}

impl ParamKind {
    /// Running statistics are stored but not learned.
    pub fn is_learnable(self) -> bool {
        !matches!(self, ParamKind::BnMean | ParamKind::BnVar)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: [usize; 4],
    pub kind: ParamKind,
}

/// Ordered layer list of the whole network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.layers.iter().find(|l| l.name == name)
    }

    /// Every stored tensor, in layer order.
    pub fn params(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        for layer in &self.layers {
            for c in layer.convs() {
                out.push(ParamSpec {
                    name: format!("{}.weight", c.name),
                    shape: c.weight_shape(),
                    kind: ParamKind::Weight { fan_in: c.fan_in() },
                });
                if c.bias {
                    out.push(ParamSpec {
                        name: format!("{}.bias", c.name),
                        shape: [c.out_channels, 1, 1, 1],
                        kind: ParamKind::Bias,
                    });
                }
                if c.batch_norm {
                    for (suffix, kind) in [
                        ("weight", ParamKind::BnWeight),
                        ("bias", ParamKind::BnBias),
                        ("running_mean", ParamKind::BnMean),
                        ("running_var", ParamKind::BnVar),
                    ] {
                        out.push(ParamSpec {
                            name: format!("{}.bn.{suffix}", c.name),
                            shape: [c.out_channels, 1, 1, 1],
                            kind,
                        });
                    }
                }
            }
            for l in layer.linears() {
                out.push(ParamSpec {
                    name: format!("{}.weight", l.name),
                    shape: [l.out_features, l.in_features, 1, 1],
                    kind: ParamKind::Weight {
                        fan_in: l.in_features,
                    },
                });
                out.push(ParamSpec {
                    name: format!("{}.bias", l.name),
                    shape: [l.out_features, 1, 1, 1],
                    kind: ParamKind::Bias,
                });
            }
        }
        out
    }

    /// Learnable parameter count (conv and linear weights and biases, BN
    /// scale and shift).
    pub fn count_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.parameter_count()).sum()
    }
}

/// Analytic multiply-accumulate count for a square `input × input` image:
/// `in · out · k² · out_h · out_w` per conv plus `in · out` per linear layer.
pub fn count_macs(spec: &NetworkSpec, input: usize) -> u64 {
    spec.layers.iter().map(|l| l.macs(input)).sum()
}

// ---------------------------------------------------------------------------
// Construction

const STAGES: [(&str, usize, usize, usize); 4] = [
    // name, blocks, channels, scale
    ("E1", 3, 64, 4),
    ("E2", 4, 128, 8),
    ("E3", 6, 256, 16),
    ("E4", 3, 512, 32),
];

fn residual_stage(prefix: &str, blocks: usize, cin: usize, cout: usize, scale: usize) -> Vec<BasicBlockSpec> {
    (0..blocks)
        .map(|i| {
            let bin = if i == 0 { cin } else { cout };
            let mut conv2 = ConvSpec::bn_relu(format!("{prefix}.{i}.conv2"), cout, cout, 3, scale);
            conv2.relu = false;
            let downsample = (bin != cout).then(|| {
                let mut d = ConvSpec::bn_relu(format!("{prefix}.{i}.downsample"), bin, cout, 1, scale);
                d.relu = false;
                d
            });
            BasicBlockSpec {
                conv1: ConvSpec::bn_relu(format!("{prefix}.{i}.conv1"), bin, cout, 3, scale),
                conv2,
                downsample,
            }
        })
        .collect()
}

fn conv_stack(prefix: &str, cin: usize, widths: &[usize], scale: usize) -> Vec<ConvSpec> {
    let mut prev = cin;
    widths
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let c = ConvSpec::bn_relu(format!("{prefix}.conv{i}"), prev, w, 3, scale);
            prev = w;
            c
        })
        .collect()
}

fn describe(convs: &[ConvSpec]) -> String {
    convs
        .iter()
        .map(|c| {
            let mut s = format!("conv({}x{}, {}", c.kernel, c.kernel, c.out_channels);
            if c.stride != 1 {
                s += &format!(", stride {}", c.stride);
            }
            if c.dilation != 1 {
                s += &format!(", dilation {}", c.dilation);
            }
            if c.padding != 0 {
                s += &format!(", padding {}", c.padding);
            }
            s += ")";
            if c.batch_norm {
                s += "+BN";
            }
            if c.relu {
                s += "+ReLU";
            }
            s
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn layer(
    name: &'static str,
    group: Group,
    kind: LayerKind,
    inputs: &[&'static str],
    out_channels: usize,
    out_scale: usize,
    detail: String,
) -> LayerSpec {
    LayerSpec {
        name,
        group,
        kind,
        inputs: inputs.to_vec(),
        out_channels,
        out_scale,
        detail,
    }
}

fn conv_layer(
    name: &'static str,
    group: Group,
    inputs: &[&'static str],
    convs: Vec<ConvSpec>,
    upsample: bool,
) -> LayerSpec {
    let last = convs.last().expect("conv layer has convs");
    let out_scale = last.scale.expect("stage convs have a scale") / if upsample { 2 } else { 1 };
    let mut detail = describe(&convs);
    if upsample {
        detail += ", upsample(2)";
    }
    layer(
        name,
        group,
        LayerKind::Conv {
            convs: convs.clone(),
            upsample,
        },
        inputs,
        last.out_channels,
        out_scale,
        detail,
    )
}

fn pool_layer(name: &'static str, input: &'static str, channels: usize, out_scale: usize) -> LayerSpec {
    layer(
        name,
        Group::Encoder,
        LayerKind::MaxPool {
            kernel: 3,
            stride: 2,
            padding: 1,
        },
        &[input],
        channels,
        out_scale,
        "maxpool(3x3, stride 2, padding 1, return indices)".into(),
    )
}

fn se_layer(name: &'static str, prefix: &str, input: &'static str, c: usize, scale: usize) -> LayerSpec {
    let r = c / 16;
    layer(
        name,
        Group::SemanticDecoder,
        LayerKind::SqueezeExcite {
            fc1: LinearSpec {
                name: format!("{prefix}.fc1"),
                in_features: c,
                out_features: r,
            },
            fc2: LinearSpec {
                name: format!("{prefix}.fc2"),
                in_features: r,
                out_features: c,
            },
        },
        &[input],
        c,
        scale,
        format!("avgpool + linear({c}, {r}) + ReLU + linear({r}, {c}) + Sigmoid"),
    )
}

fn unpool_layer(name: &'static str, input: &'static str, indices: &'static str, c: usize, scale: usize) -> LayerSpec {
    layer(
        name,
        Group::MattingDecoder,
        LayerKind::MaxUnpool {
            kernel: 2,
            stride: 2,
            indices,
        },
        &[input],
        c,
        scale,
        format!("max-unpool(2x2, stride 2) with {indices} indices"),
    )
}

/// The full layer table, in execution-independent table order.
pub fn build_network() -> NetworkSpec {
    use Group::*;
    let mut layers = Vec::new();

    // Encoder.
    let e0 = ConvSpec {
        padding: 3,
        ..ConvSpec::bn_relu("e0.conv", 3, 64, 7, 1)
    };
    layers.push(conv_layer("E0", Encoder, &["input"], vec![e0], false));
    layers.push(pool_layer("M0", "E0", 64, 2));
    layers.push(pool_layer("M1", "M0", 64, 4));
    let mut cin = 64;
    let pools = [("M2", 8), ("M3", 16), ("M4", 32)];
    let stage_inputs = ["M1", "M2", "M3", "M4"];
    for (i, &(name, blocks, cout, scale)) in STAGES.iter().enumerate() {
        let prefix = name.to_ascii_lowercase();
        layers.push(layer(
            name,
            Encoder,
            LayerKind::ResidualStage {
                blocks: residual_stage(&prefix, blocks, cin, cout, scale),
            },
            &[stage_inputs[i]],
            cout,
            scale,
            format!("{blocks} x BasicBlock({cout})"),
        ));
        cin = cout;
        if let Some(&(pool, pscale)) = pools.get(i) {
            layers.push(pool_layer(pool, name, cout, pscale));
        }
    }

    // Semantic decoder.
    let bins = vec![1, 3, 5];
    let branches = bins
        .iter()
        .map(|&b| ConvSpec {
            scale: None,
            fixed_size: Some(b),
            ..ConvSpec::bn_relu(format!("ppm.branch{b}"), 512, 128, 1, 32)
        })
        .collect();
    let fuse = ConvSpec::bn_relu("ppm.fuse", 512 + 3 * 128, 512, 3, 32);
    let projections = [(4, 256), (3, 128), (2, 64), (1, 64)]
        .iter()
        .map(|&(k, c)| ConvSpec::bn_relu(format!("ppm.proj{k}"), 512, c, 3, 32))
        .collect();
    layers.push(layer(
        "PPM",
        SemanticDecoder,
        LayerKind::PyramidPooling {
            bins,
            branches,
            fuse,
            projections,
        },
        &["E4"],
        512,
        32,
        "PSPModule(512, bins 1,3,5) + per-stage projections".into(),
    ));
    let sd = [
        // name, se name, inputs, in channels, widths, conv scale
        ("SD_4", "SE_4", ["PPM", "E4"], 1024, vec![512, 512, 256], 32),
        ("SD_3", "SE_3", ["PPM", "SE_4"], 512, vec![256, 256, 128], 16),
        ("SD_2", "SE_2", ["PPM", "SE_3"], 256, vec![128, 128, 64], 8),
        ("SD_1", "SE_1", ["PPM", "SE_2"], 128, vec![64, 64, 64], 4),
    ];
    for (name, se, inputs, cin, widths, scale) in sd {
        let prefix = name.replace('_', "").to_ascii_lowercase();
        let c = *widths.last().unwrap();
        layers.push(conv_layer(name, SemanticDecoder, &inputs, conv_stack(&prefix, cin, &widths, scale), true));
        let se_prefix = se.replace('_', "").to_ascii_lowercase();
        layers.push(se_layer(se, &se_prefix, name, c, scale / 2));
    }
    layers.push(conv_layer(
        "SD_0",
        SemanticDecoder,
        &["PPM", "SE_1"],
        conv_stack("sd0", 128, &[64, 64], 2),
        true,
    ));
    let spa = ConvSpec {
        padding: 3,
        ..ConvSpec::plain("spa.conv", 2, 1, 7, 1)
    };
    layers.push(layer(
        "SPA",
        SemanticDecoder,
        LayerKind::SpatialAttention { conv: spa },
        &["SD_0"],
        1,
        1,
        "channel maxpool + avgpool, conv(7x7, 1, padding 3) + Sigmoid".into(),
    ));
    layers.push(se_layer("SE_0", "se0", "SD_0", 64, 1));
    layers.push(layer(
        "SD-final",
        SemanticDecoder,
        LayerKind::Head {
            conv: ConvSpec::plain("sd_final.conv", 64, 3, 3, 1),
            activation: HeadActivation::SoftmaxChannel,
        },
        &["SE_0"],
        3,
        1,
        "conv(3x3, 3, padding 1), softmax".into(),
    ));

    // Matting decoder.
    let md5 = (0..3)
        .map(|i| ConvSpec {
            padding: 2,
            dilation: 2,
            ..ConvSpec::bn_relu(format!("md5.conv{i}"), 512, 512, 3, 32)
        })
        .collect();
    layers.push(conv_layer("MD_5", MattingDecoder, &["E4"], md5, false));
    layers.push(conv_layer(
        "MD_4",
        MattingDecoder,
        &["MD_5", "E4"],
        conv_stack("md4", 1024, &[512, 512, 256], 32),
        false,
    ));
    layers.push(unpool_layer("MU_4", "MD_4", "M4", 256, 16));
    layers.push(conv_layer(
        "MD_3",
        MattingDecoder,
        &["MU_4", "E3"],
        conv_stack("md3", 512, &[256, 256, 128], 16),
        false,
    ));
    layers.push(unpool_layer("MU_3", "MD_3", "M3", 128, 8));
    layers.push(conv_layer(
        "MD_2",
        MattingDecoder,
        &["MU_3", "E2"],
        conv_stack("md2", 256, &[128, 128, 64], 8),
        false,
    ));
    layers.push(unpool_layer("MU_2", "MD_2", "M2", 64, 4));
    layers.push(conv_layer(
        "MD_1",
        MattingDecoder,
        &["MU_2", "E1"],
        conv_stack("md1", 128, &[64, 64, 64], 4),
        false,
    ));
    layers.push(unpool_layer("MU_1", "MD_1", "M1", 64, 2));
    layers.push(unpool_layer("MU_0", "MU_1", "M0", 64, 1));
    layers.push(conv_layer(
        "MD_0",
        MattingDecoder,
        &["MU_0", "E0"],
        conv_stack("md0", 128, &[64, 64], 1),
        false,
    ));
    layers.push(layer(
        "SPAR",
        MattingDecoder,
        LayerKind::AttentionResidual {
            attention: "SPA",
            features: "MD_0",
        },
        &["MD_0", "SPA"],
        64,
        1,
        "MD_0 + SPA x MD_0".into(),
    ));
    layers.push(layer(
        "MD-final",
        MattingDecoder,
        LayerKind::Head {
            conv: ConvSpec::plain("md_final.conv", 64, 1, 3, 1),
            activation: HeadActivation::Sigmoid,
        },
        &["SPAR"],
        1,
        1,
        "conv(3x3, 1, padding 1) + Sigmoid".into(),
    ));
    layers.push(layer(
        "MF",
        MattingDecoder,
        LayerKind::Fusion,
        &["SD-final", "MD-final"],
        1,
        1,
        "(1 - 2|U - 0.5|) x M + 2|U - 0.5| x U".into(),
    ));
    NetworkSpec { layers }
}
