//! Parameter storage, forward pass with activation cache, and reverse-mode gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::spec::{InputShape, LayerSpec, ModelSpec};
use super::tensor::{conv1d_forward, cross_entropy, dense_forward, relu, softmax, Tensor};
use super::NnError;
use crate::emotion::{EmotionDistribution, EmotionLabel, NUM_EMOTIONS};

/// Per-feature (vector input) or per-channel (sequence input) standardization
/// applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(width: usize) -> Self {
        Normalizer {
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        }
    }

    /// Mean and population std over every row of every sample. Columns with
    /// std below 1e-8 keep scale 1.
    pub fn fit<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; width];
        let mut sum_sq = vec![0.0; width];
        let rows: Vec<&[f64]> = rows.collect();
        for row in &rows {
            for (s, x) in sum.iter_mut().zip(row.iter()) {
                *s += x;
            }
            n += 1;
        }
        if n == 0 {
            return Self::identity(width);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for row in &rows {
            for ((s, x), m) in sum_sq.iter_mut().zip(row.iter()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let scale = sum_sq
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd < 1e-8 {
                    1.0
                } else {
                    sd
                }
            })
            .collect();
        Normalizer { mean, scale }
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    fn apply(&self, input: &Tensor) -> Tensor {
        let w = self.width();
        let data = input
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let c = i % w;
                (x - self.mean[c]) / self.scale[c]
            })
            .collect();
        Tensor::new(input.shape().to_vec(), data).expect("shape preserved")
    }
}

/// One labeled training example. Vector inputs are 1-D, sequence inputs
/// `[frames, channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Tensor,
    pub label: EmotionLabel,
}

/// A topology plus its parameters. The output order is always
/// [`EmotionLabel::ALL`].
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    params: Vec<Tensor>,
    normalizer: Normalizer,
}

struct ForwardCache {
    /// Input to each layer; the last element is the logits.
    activations: Vec<Tensor>,
}

impl Model {
    pub fn new(spec: ModelSpec, params: Vec<Tensor>, normalizer: Normalizer) -> Result<Self, NnError> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(NnError::ShapeMismatch(format!(
                "spec needs {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (i, (shape, p)) in shapes.iter().zip(&params).enumerate() {
            if p.shape() != shape.as_slice() {
                return Err(NnError::ShapeMismatch(format!(
                    "parameter {i} has shape {:?}, expected {shape:?}",
                    p.shape()
                )));
            }
        }
        if normalizer.width() != input_width(&spec) || normalizer.scale.len() != normalizer.width() {
            return Err(NnError::ShapeMismatch(format!(
                "normalizer width {} does not match input width {}",
                normalizer.width(),
                input_width(&spec)
            )));
        }
        Ok(Model {
            spec,
            params,
            normalizer,
        })
    }

    /// All parameters zero; predicts the uniform distribution everywhere.
    pub fn zeros(spec: ModelSpec) -> Result<Self, NnError> {
        spec.validate()?;
        let params = spec.param_shapes().into_iter().map(Tensor::zeros).collect();
        let normalizer = Normalizer::identity(input_width(&spec));
        Self::new(spec, params, normalizer)
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(spec: ModelSpec, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        spec.validate()?;
        let mut params = Vec::new();
        for layer in &spec.layers {
            let Some((fan_in, fan_out)) = layer.fans() else {
                continue;
            };
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let shapes = layer.param_shapes();
            let n: usize = shapes[0].iter().product();
            let w = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
            params.push(Tensor::new(shapes[0].clone(), w)?);
            params.push(Tensor::zeros(shapes[1].clone()));
        }
        let normalizer = Normalizer::identity(input_width(&spec));
        Self::new(spec, params, normalizer)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<(), NnError> {
        if normalizer.width() != input_width(&self.spec) {
            return Err(NnError::ShapeMismatch("normalizer width".into()));
        }
        self.normalizer = normalizer;
        Ok(())
    }

    pub fn labels(&self) -> [EmotionLabel; NUM_EMOTIONS] {
        EmotionLabel::ALL
    }

    /// Checks an input tensor against the spec's input shape.
    pub fn check_input(&self, input: &Tensor) -> Result<(), NnError> {
        match (self.spec.input, input.shape()) {
            (InputShape::Vector(w), [n]) if *n == w => Ok(()),
            (InputShape::Sequence(c), [frames, ch]) if *ch == c => {
                if *frames < self.spec.min_frames() {
                    Err(NnError::ShapeMismatch(format!(
                        "{frames} frames, model needs at least {}",
                        self.spec.min_frames()
                    )))
                } else {
                    Ok(())
                }
            }
            (expected, got) => Err(NnError::ShapeMismatch(format!(
                "input shape {got:?} does not match {expected:?}"
            ))),
        }
    }

    fn forward_cached(&self, input: &Tensor) -> Result<ForwardCache, NnError> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.spec.layers.len() + 1);
        activations.push(self.normalizer.apply(input));
        let mut p = 0;
        for layer in &self.spec.layers {
            let x = activations.last().expect("nonempty");
            let y = match *layer {
                LayerSpec::Dense { .. } => {
                    let y = dense_forward(x, &self.params[p], &self.params[p + 1])?;
                    p += 2;
                    y
                }
                LayerSpec::Conv1d { .. } => {
                    let y = conv1d_forward(x, &self.params[p], &self.params[p + 1])?;
                    p += 2;
                    y
                }
                LayerSpec::Relu => relu(x),
                LayerSpec::MeanPool { window } => mean_pool(x, window)?,
                LayerSpec::GlobalMeanPool => global_mean_pool(x),
            };
            activations.push(y);
        }
        Ok(ForwardCache { activations })
    }

    /// Raw scores before softmax.
    pub fn logits(&self, input: &Tensor) -> Result<Vec<f64>, NnError> {
        let mut cache = self.forward_cached(input)?;
        Ok(cache.activations.pop().expect("nonempty").data().to_vec())
    }

    pub fn predict(&self, input: &Tensor) -> Result<EmotionDistribution, NnError> {
        let probs = softmax(&self.logits(input)?);
        let mut arr = [0.0; NUM_EMOTIONS];
        arr.copy_from_slice(&probs);
        EmotionDistribution::new(arr).ok_or_else(|| NnError::NonFinite("prediction is not a probability vector".into()))
    }

    /// Mean cross-entropy over `batch`.
    pub fn batch_loss(&self, batch: &[Sample]) -> Result<f64, NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let mut total = 0.0;
        for s in batch {
            let probs = softmax(&self.logits(&s.input)?);
            total += cross_entropy(&probs, s.label.index());
        }
        Ok(total / batch.len() as f64)
    }

    /// Mean batch loss and its exact gradient with respect to every parameter
    /// tensor, in `params()` order.
    pub fn gradients(&self, batch: &[Sample]) -> Result<(f64, Vec<Tensor>), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let mut grads: Vec<Tensor> = self.params.iter().map(|p| Tensor::zeros(p.shape().to_vec())).collect();
        let scale = 1.0 / batch.len() as f64;
        let mut total = 0.0;
        for sample in batch {
            let cache = self.forward_cached(&sample.input)?;
            let logits = cache.activations.last().expect("nonempty");
            let probs = softmax(logits.data());
            total += cross_entropy(&probs, sample.label.index());
            let mut delta: Vec<f64> = probs
                .iter()
                .enumerate()
                .map(|(k, p)| (p - if k == sample.label.index() { 1.0 } else { 0.0 }) * scale)
                .collect();
            self.backprop(&cache, &mut delta, &mut grads);
        }
        Ok((total * scale, grads))
    }

    fn backprop(&self, cache: &ForwardCache, delta: &mut Vec<f64>, grads: &mut [Tensor]) {
        let mut p = self.params.len();
        for (li, layer) in self.spec.layers.iter().enumerate().rev() {
            let x = &cache.activations[li];
            let y = &cache.activations[li + 1];
            let needs_dx = li > 0;
            *delta = match *layer {
                LayerSpec::Dense { input, output } => {
                    p -= 2;
                    let w = self.params[p].data();
                    let (gw, rest) = grads[p..].split_at_mut(1);
                    let gw = gw[0].data_mut();
                    let gb = rest[0].data_mut();
                    for (g, d) in gb.iter_mut().zip(delta.iter()) {
                        *g += d;
                    }
                    let mut dx = if needs_dx { vec![0.0; input] } else { Vec::new() };
                    for (i, xi) in x.data().iter().enumerate() {
                        let row = i * output..(i + 1) * output;
                        for (g, d) in gw[row.clone()].iter_mut().zip(delta.iter()) {
                            *g += xi * d;
                        }
                        if needs_dx {
                            dx[i] = w[row].iter().zip(delta.iter()).map(|(a, b)| a * b).sum();
                        }
                    }
                    dx
                }
                LayerSpec::Conv1d {
                    kernel,
                    in_channels,
                    out_channels,
                } => {
                    p -= 2;
                    let k = self.params[p].data();
                    let (gk, rest) = grads[p..].split_at_mut(1);
                    let gk = gk[0].data_mut();
                    let gb = rest[0].data_mut();
                    let xd = x.data();
                    let frames = x.shape()[0];
                    let out_frames = frames - kernel + 1;
                    let mut dx = if needs_dx {
                        vec![0.0; frames * in_channels]
                    } else {
                        Vec::new()
                    };
                    for t in 0..out_frames {
                        let d = &delta[t * out_channels..(t + 1) * out_channels];
                        for (g, dv) in gb.iter_mut().zip(d) {
                            *g += dv;
                        }
                        for j in 0..kernel {
                            for i in 0..in_channels {
                                let off = (j * in_channels + i) * out_channels;
                                let xi = xd[(t + j) * in_channels + i];
                                let mut acc = 0.0;
                                for o in 0..out_channels {
                                    gk[off + o] += xi * d[o];
                                    acc += k[off + o] * d[o];
                                }
                                if needs_dx {
                                    dx[(t + j) * in_channels + i] += acc;
                                }
                            }
                        }
                    }
                    dx
                }
                LayerSpec::Relu => x
                    .data()
                    .iter()
                    .zip(delta.iter())
                    .map(|(xi, d)| if *xi > 0.0 { *d } else { 0.0 })
                    .collect(),
                LayerSpec::MeanPool { window } => {
                    let channels = x.shape()[1];
                    let out_frames = y.shape()[0];
                    let mut dx = vec![0.0; x.len()];
                    for t in 0..out_frames {
                        for r in 0..window {
                            for c in 0..channels {
                                dx[(t * window + r) * channels + c] = delta[t * channels + c] / window as f64;
                            }
                        }
                    }
                    dx
                }
                LayerSpec::GlobalMeanPool => {
                    let frames = x.shape()[0];
                    let mut dx = Vec::with_capacity(x.len());
                    for _ in 0..frames {
                        dx.extend(delta.iter().map(|d| d / frames as f64));
                    }
                    dx
                }
            };
        }
    }
}

fn input_width(spec: &ModelSpec) -> usize {
    match spec.input {
        InputShape::Vector(w) | InputShape::Sequence(w) => w,
    }
}

fn mean_pool(x: &Tensor, window: usize) -> Result<Tensor, NnError> {
    let (frames, channels) = (x.shape()[0], x.shape()[1]);
    let out_frames = frames / window;
    if out_frames == 0 {
        return Err(NnError::ShapeMismatch(format!(
            "mean pool window {window} exceeds {frames} frames"
        )));
    }
    let xd = x.data();
    let mut y = vec![0.0; out_frames * channels];
    for t in 0..out_frames {
        for r in 0..window {
            for c in 0..channels {
                y[t * channels + c] += xd[(t * window + r) * channels + c];
            }
        }
    }
    y.iter_mut().for_each(|v| *v /= window as f64);
    Tensor::new(vec![out_frames, channels], y)
}

fn global_mean_pool(x: &Tensor) -> Tensor {
    let (frames, channels) = (x.shape()[0], x.shape()[1]);
    let mut y = vec![0.0; channels];
    for row in x.data().chunks_exact(channels) {
        for (a, b) in y.iter_mut().zip(row) {
            *a += b;
        }
    }
    y.iter_mut().for_each(|v| *v /= frames as f64);
    Tensor::vector(y)
}
