//! Topology descriptors.

use serde::{Deserialize, Serialize};

use super::NnError;
use crate::emotion::NUM_EMOTIONS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// Feedforward network over a pooled audio vector.
    Dnn,
    /// 1D convolution over the MFCC frame matrix.
    Cnn,
    /// Feedforward network over pooled audio features concatenated with text features.
    Fused,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Dnn => "dnn",
            Arch::Cnn => "cnn",
            Arch::Fused => "fused",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(Arch::Dnn),
            "cnn" => Ok(Arch::Cnn),
            "fused" => Ok(Arch::Fused),
            other => Err(NnError::InvalidSpec(format!("unknown architecture `{other}`"))),
        }
    }
}

impl std::fmt::Display for Arch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Shape of the value flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "width")]
pub enum InputShape {
    /// Fixed-length vector.
    Vector(usize),
    /// Variable number of frames, each with this many channels.
    Sequence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
    },
    Conv1d {
        kernel: usize,
        in_channels: usize,
        out_channels: usize,
    },
    Relu,
    /// Non-overlapping mean over `window` frames; trailing frames are dropped.
    MeanPool {
        window: usize,
    },
    /// Mean over all frames, sequence to vector.
    GlobalMeanPool,
}

impl LayerSpec {
    /// Parameter tensor shapes, weights then bias.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Dense { input, output } => vec![vec![input, output], vec![output]],
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
            } => vec![vec![kernel, in_channels, out_channels], vec![out_channels]],
            _ => Vec::new(),
        }
    }

    /// `(fan_in, fan_out)` for initialization of trainable layers.
    pub fn fans(&self) -> Option<(usize, usize)> {
        match *self {
            LayerSpec::Dense { input, output } => Some((input, output)),
            LayerSpec::Conv1d {
                kernel,
                in_channels,
                out_channels,
            } => Some((kernel * in_channels, kernel * out_channels)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl ModelSpec {
    /// `input -> 256 -> ReLU -> 128 -> ReLU -> 8`.
    pub fn default_dnn(input_dim: usize) -> Self {
        Self::mlp(Arch::Dnn, input_dim, &[256, 128])
    }

    /// Same topology as the DNN over the fused audio+text vector.
    pub fn default_fused(input_dim: usize) -> Self {
        Self::mlp(Arch::Fused, input_dim, &[256, 128])
    }

    /// `conv1d(k=5, 16ch) -> ReLU -> mean over time -> 64 -> ReLU -> 8`.
    pub fn default_cnn(channels: usize) -> Self {
        Self::cnn(channels, 5, 16, 64)
    }

    pub fn mlp(arch: Arch, input_dim: usize, hidden: &[usize]) -> Self {
        let mut layers = Vec::new();
        let mut width = input_dim;
        for h in hidden {
            layers.push(LayerSpec::Dense {
                input: width,
                output: *h,
            });
            layers.push(LayerSpec::Relu);
            width = *h;
        }
        layers.push(LayerSpec::Dense {
            input: width,
            output: NUM_EMOTIONS,
        });
        ModelSpec {
            arch,
            input: InputShape::Vector(input_dim),
            layers,
        }
    }

    pub fn cnn(channels: usize, kernel: usize, conv_channels: usize, hidden: usize) -> Self {
        ModelSpec {
            arch: Arch::Cnn,
            input: InputShape::Sequence(channels),
            layers: vec![
                LayerSpec::Conv1d {
                    kernel,
                    in_channels: channels,
                    out_channels: conv_channels,
                },
                LayerSpec::Relu,
                LayerSpec::GlobalMeanPool,
                LayerSpec::Dense {
                    input: conv_channels,
                    output: hidden,
                },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    input: hidden,
                    output: NUM_EMOTIONS,
                },
            ],
        }
    }

    /// Checks that consecutive layers compose and the head emits eight logits.
    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: String| Err(NnError::InvalidSpec(msg));
        match (self.arch, self.input) {
            (Arch::Cnn, InputShape::Sequence(_)) => {}
            (Arch::Dnn | Arch::Fused, InputShape::Vector(_)) => {}
            (arch, input) => return bad(format!("{arch} cannot take {input:?} input")),
        }
        let mut shape = self.input;
        for (i, layer) in self.layers.iter().enumerate() {
            shape = match (*layer, shape) {
                (_, InputShape::Vector(0) | InputShape::Sequence(0)) => {
                    return bad(format!("layer {i} receives a zero-width input"))
                }
                (LayerSpec::Dense { input, output }, InputShape::Vector(w)) if input == w && output > 0 => {
                    InputShape::Vector(output)
                }
                (
                    LayerSpec::Conv1d {
                        kernel,
                        in_channels,
                        out_channels,
                    },
                    InputShape::Sequence(c),
                ) if in_channels == c && kernel > 0 && out_channels > 0 => InputShape::Sequence(out_channels),
                (LayerSpec::Relu, s) => s,
                (LayerSpec::MeanPool { window }, InputShape::Sequence(c)) if window > 0 => InputShape::Sequence(c),
                (LayerSpec::GlobalMeanPool, InputShape::Sequence(c)) => InputShape::Vector(c),
                (layer, s) => return bad(format!("layer {i} ({layer:?}) cannot follow {s:?}")),
            };
        }
        if !matches!(self.layers.last(), Some(LayerSpec::Dense { .. })) {
            return bad("the last layer must be dense".into());
        }
        if shape != InputShape::Vector(NUM_EMOTIONS) {
            return bad(format!("output {shape:?}, expected {NUM_EMOTIONS} logits"));
        }
        Ok(())
    }

    /// Smallest frame count a sequence input needs to pass every layer.
    pub fn min_frames(&self) -> usize {
        // walk backwards: frames needed after each layer
        let mut need = 1;
        for layer in self.layers.iter().rev() {
            need = match *layer {
                LayerSpec::Conv1d { kernel, .. } => need + kernel - 1,
                LayerSpec::MeanPool { window } => need * window,
                _ => need,
            };
        }
        need
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.layers.iter().flat_map(LayerSpec::param_shapes).collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.param_shapes().iter().map(|s| s.iter().product::<usize>()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelSpec::default_dnn(28).validate().unwrap();
        ModelSpec::default_fused(36).validate().unwrap();
        ModelSpec::default_cnn(14).validate().unwrap();
        assert_eq!(ModelSpec::default_cnn(14).min_frames(), 5);
        assert_eq!(
            ModelSpec::default_dnn(28).num_parameters(),
            28 * 256 + 256 + 256 * 128 + 128 + 128 * 8 + 8
        );
    }

    #[test]
    fn rejects_broken_topologies() {
        let mut spec = ModelSpec::default_dnn(28);
        spec.layers[2] = LayerSpec::Dense {
            input: 100,
            output: 128,
        };
        assert!(spec.validate().is_err());

        let mut spec = ModelSpec::default_dnn(28);
        spec.layers.pop();
        assert!(spec.validate().is_err());

        let mut spec = ModelSpec::default_cnn(14);
        spec.layers.remove(2);
        assert!(spec.validate().is_err());

        let spec = ModelSpec {
            arch: Arch::Cnn,
            ..ModelSpec::default_dnn(28)
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn min_frames_with_pooling() {
        let spec = ModelSpec {
            arch: Arch::Cnn,
            input: InputShape::Sequence(2),
            layers: vec![
                LayerSpec::Conv1d {
                    kernel: 3,
                    in_channels: 2,
                    out_channels: 4,
                },
                LayerSpec::MeanPool { window: 2 },
                LayerSpec::Conv1d {
                    kernel: 2,
                    in_channels: 4,
                    out_channels: 4,
                },
                LayerSpec::GlobalMeanPool,
                LayerSpec::Dense { input: 4, output: 8 },
            ],
        };
        spec.validate().unwrap();
        // 2 frames before last conv -> 4 before pool -> 6 before first conv
        assert_eq!(spec.min_frames(), 6);
    }

    #[test]
    fn arch_parse() {
        assert_eq!("CNN".parse::<Arch>().unwrap(), Arch::Cnn);
        assert!("rnn".parse::<Arch>().is_err());
    }
}
