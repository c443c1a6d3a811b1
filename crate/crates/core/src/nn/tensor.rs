//! Dense row-major tensors and the primitive forward ops.

use super::NnError;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnError> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(NnError::ShapeMismatch(format!(
                "shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    /// `rows x cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NnError> {
        Self::new(vec![rows, cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// `y = x W + b` for a single row vector `x` of width `in`, `W` shaped `[in, out]`.
pub fn dense_forward(x: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (n_in, n_out) = match weights.shape() {
        [i, o] => (*i, *o),
        s => return Err(NnError::ShapeMismatch(format!("dense weights must be 2-D, got {s:?}"))),
    };
    if x.shape() != [n_in] {
        return Err(NnError::ShapeMismatch(format!(
            "dense input {:?} does not match weights {:?}",
            x.shape(),
            weights.shape()
        )));
    }
    if bias.shape() != [n_out] {
        return Err(NnError::ShapeMismatch(format!(
            "dense bias {:?}, expected [{n_out}]",
            bias.shape()
        )));
    }
    let mut y = bias.data().to_vec();
    let w = weights.data();
    for (i, xi) in x.data().iter().enumerate() {
        if *xi == 0.0 {
            continue;
        }
        let row = &w[i * n_out..(i + 1) * n_out];
        for (yo, wo) in y.iter_mut().zip(row) {
            *yo += xi * wo;
        }
    }
    Ok(Tensor::vector(y))
}

/// Stride-1, unpadded cross-correlation over time.
///
/// `x` is `[frames, in_ch]`, `kernels` `[width, in_ch, out_ch]`, bias `[out_ch]`;
/// output is `[frames - width + 1, out_ch]`.
pub fn conv1d_forward(x: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (width, c_in, c_out) = match kernels.shape() {
        [k, i, o] => (*k, *i, *o),
        s => return Err(NnError::ShapeMismatch(format!("conv kernels must be 3-D, got {s:?}"))),
    };
    let frames = match x.shape() {
        [t, c] if *c == c_in => *t,
        s => {
            return Err(NnError::ShapeMismatch(format!(
                "conv input {s:?} does not match {c_in} input channels"
            )))
        }
    };
    if bias.shape() != [c_out] {
        return Err(NnError::ShapeMismatch(format!(
            "conv bias {:?}, expected [{c_out}]",
            bias.shape()
        )));
    }
    if width == 0 || width > frames {
        return Err(NnError::ShapeMismatch(format!(
            "kernel width {width} does not fit {frames} frames"
        )));
    }
    let out_frames = frames - width + 1;
    let xd = x.data();
    let kd = kernels.data();
    let mut y = Vec::with_capacity(out_frames * c_out);
    for _ in 0..out_frames {
        y.extend_from_slice(bias.data());
    }
    for t in 0..out_frames {
        let out = &mut y[t * c_out..(t + 1) * c_out];
        for j in 0..width {
            let input = &xd[(t + j) * c_in..(t + j + 1) * c_in];
            for (i, xi) in input.iter().enumerate() {
                let k = &kd[(j * c_in + i) * c_out..(j * c_in + i + 1) * c_out];
                for (o, ko) in out.iter_mut().zip(k) {
                    *o += xi * ko;
                }
            }
        }
    }
    Tensor::new(vec![out_frames, c_out], y)
}

pub fn relu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|v| v.max(0.0)).collect(),
    }
}

/// Numerically stable softmax (max subtracted first).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub const CE_FLOOR: f64 = 1e-12;

/// `-ln(max(p[target], 1e-12))`.
pub fn cross_entropy(probs: &[f64], target: usize) -> f64 {
    -probs[target].max(CE_FLOOR).ln()
}
