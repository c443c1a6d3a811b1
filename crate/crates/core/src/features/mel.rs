//! Mel filterbank and orthonormal DCT-II.

use std::f64::consts::PI;

use super::FeatureConfig;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// `num_mel_filters + 2` edge frequencies in Hz, equally spaced in mel
/// between `fmin_hz` and `fmax_hz`. Filter `i` spans edges `i..=i+2` and is
/// centered on edge `i + 1`.
pub fn mel_edges_hz(config: &FeatureConfig) -> Vec<f64> {
    let lo = hz_to_mel(config.fmin_hz);
    let hi = hz_to_mel(config.fmax_hz);
    let count = config.num_mel_filters + 2;
    (0..count)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Center frequency in Hz of each filter.
pub fn mel_center_frequencies(config: &FeatureConfig) -> Vec<f64> {
    let edges = mel_edges_hz(config);
    edges[1..edges.len() - 1].to_vec()
}

/// Triangular filters on the FFT bin grid, one row per filter with
/// `fft_size / 2 + 1` columns. Edges snap to `floor((fft_size + 1) * f / rate)`
/// and each filter's center bin has weight exactly 1.
pub fn mel_filterbank(config: &FeatureConfig) -> Vec<Vec<f64>> {
    let bins = config.fft_size / 2 + 1;
    let rate = config.pipeline_rate_hz as f64;
    let edge_bins: Vec<usize> = mel_edges_hz(config)
        .iter()
        .map(|f| (((config.fft_size + 1) as f64 * f / rate).floor() as usize).min(bins - 1))
        .collect();

    edge_bins
        .windows(3)
        .map(|w| {
            let (left, center, right) = (w[0], w[1], w[2]);
            let mut row = vec![0.0; bins];
            for (k, weight) in row.iter_mut().enumerate().take(right + 1).skip(left) {
                *weight = if k < center {
                    (k - left) as f64 / (center - left) as f64
                } else if k == center {
                    1.0
                } else {
                    (right - k) as f64 / (right - center) as f64
                };
            }
            row
        })
        .collect()
}

/// Orthonormal DCT-II.
pub fn dct_ii(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    (0..n)
        .map(|k| {
            let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let sum: f64 = values
                .iter()
                .enumerate()
                .map(|(i, x)| x * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            scale * sum
        })
        .collect()
}
