//! DSP checks against independent straight-line implementations.

use std::f64::consts::PI;

use affect_core::audio_io::{resample, AudioClip};
use affect_core::features::{dct_ii, dft_magnitude, mfcc, naive_dft_magnitude, FeatureConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// DCT-III scaled to invert the orthonormal DCT-II.
fn inverse_dct(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len() as f64;
    (0..coeffs.len())
        .map(|i| {
            let mut x = coeffs[0] / n.sqrt();
            for (k, c) in coeffs.iter().enumerate().skip(1) {
                x += (2.0 / n).sqrt() * c * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos();
            }
            x
        })
        .collect()
}

#[test]
fn fast_dft_matches_naive_for_every_power_of_two() {
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    let mut size = 1;
    while size <= 1024 {
        for _ in 0..3 {
            let len = rng.gen_range(1..=size);
            let frame: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fast = dft_magnitude(&frame, size).unwrap();
            let slow = naive_dft_magnitude(&frame, size).unwrap();
            assert_eq!(fast.len(), size / 2 + 1);
            for (bin, (a, b)) in fast.iter().zip(&slow).enumerate() {
                assert!((a - b).abs() <= 1e-9, "n={size} bin={bin}: {a} vs {b}");
            }
        }
        size *= 2;
    }
}

#[test]
fn sixty_four_random_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frame: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let fast = dft_magnitude(&frame, 64).unwrap();
    let slow = naive_dft_magnitude(&frame, 64).unwrap();
    let worst = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn dct_round_trip_and_parseval() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for n in [1, 2, 7, 13, 26, 64] {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let c = dct_ii(&x);
        for (a, b) in inverse_dct(&c).iter().zip(&x) {
            assert!((a - b).abs() <= 1e-9, "n={n}");
        }
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let ec: f64 = c.iter().map(|v| v * v).sum();
        assert!((ex - ec).abs() <= 1e-9 * ex.max(1.0), "n={n}: {ex} vs {ec}");
    }
}

/// MFCC written out with explicit loops, the naive DFT and its own filterbank.
#[allow(clippy::needless_range_loop)]
fn reference_mfcc(samples: &[f64], cfg: &FeatureConfig) -> Vec<Vec<f64>> {
    let rate = cfg.pipeline_rate_hz as f64;
    let frame_len = (cfg.frame_len_ms * rate / 1000.0).round() as usize;
    let hop = (cfg.hop_ms * rate / 1000.0).round() as usize;
    let n_frames = if samples.len() < frame_len {
        1
    } else {
        (samples.len() - frame_len) / hop + 1
    };
    let n_bins = cfg.fft_size / 2 + 1;

    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let inv_mel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let m_lo = mel(cfg.fmin_hz);
    let m_hi = mel(cfg.fmax_hz);
    let mut edge_bins = Vec::new();
    for i in 0..cfg.num_mel_filters + 2 {
        let hz = inv_mel(m_lo + (m_hi - m_lo) * i as f64 / (cfg.num_mel_filters + 1) as f64);
        let bin = ((cfg.fft_size + 1) as f64 * hz / rate).floor() as usize;
        edge_bins.push(bin.min(n_bins - 1));
    }

    let mut rows = Vec::new();
    for f in 0..n_frames {
        let mut frame = vec![0.0; frame_len];
        for i in 0..frame_len {
            if f * hop + i < samples.len() {
                frame[i] = samples[f * hop + i];
            }
        }
        let mut energy = 0.0;
        for v in &frame {
            energy += v * v;
        }
        let mut windowed = vec![0.0; frame_len];
        for k in 0..frame_len {
            let w = 0.54 - 0.46 * (2.0 * PI * k as f64 / (frame_len - 1) as f64).cos();
            windowed[k] = w * frame[k];
        }
        let spectrum = naive_dft_magnitude(&windowed, cfg.fft_size).unwrap();
        let mut log_mel = vec![0.0; cfg.num_mel_filters];
        for m in 0..cfg.num_mel_filters {
            let (l, c, r) = (edge_bins[m], edge_bins[m + 1], edge_bins[m + 2]);
            let mut e = 0.0;
            for k in l..=r {
                let w = if k == c {
                    1.0
                } else if k < c {
                    (k - l) as f64 / (c - l) as f64
                } else {
                    (r - k) as f64 / (r - c) as f64
                };
                e += w * spectrum[k];
            }
            log_mel[m] = if e > 1e-10 { e.ln() } else { 1e-10f64.ln() };
        }
        let n = cfg.num_mel_filters as f64;
        let mut row = Vec::new();
        for k in 0..cfg.num_cepstra {
            let mut s = 0.0;
            for (i, v) in log_mel.iter().enumerate() {
                s += v * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos();
            }
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            row.push(scale * s);
        }
        row.push(if energy > 1e-10 { energy.ln() } else { 1e-10f64.ln() });
        rows.push(row);
    }
    rows
}

fn assert_matches_reference(samples: Vec<f64>, label: &str) {
    let cfg = FeatureConfig::default();
    let clip = AudioClip::new(samples, 16000).unwrap();
    let fast = mfcc(&clip, &cfg).unwrap();
    let reference = reference_mfcc(clip.samples(), &cfg);
    assert_eq!(fast.rows(), reference.len(), "{label}");
    let mut worst = 0.0f64;
    for (r, row) in reference.iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            worst = worst.max((fast.get(r, c) - v).abs());
        }
    }
    assert!(worst <= 1e-6, "{label}: max deviation {worst}");
}

#[test]
fn mfcc_matches_reference_on_fixture_clips() {
    let sine: Vec<f64> = (0..8000)
        .map(|i| 0.5 * (2.0 * PI * 440.0 * i as f64 / 16000.0).sin())
        .collect();
    assert_matches_reference(sine, "440 Hz sine");

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tone = affect_core::fixtures::synth_tone(affect_core::EmotionLabel::Fearful, 0.5, 16000, &mut rng);
    assert_matches_reference(tone.samples().to_vec(), "fixture tone");

    assert_matches_reference(vec![0.0; 1000], "silence");
    assert_matches_reference(
        (0..300).map(|i| (i as f64 / 300.0) - 0.5).collect(),
        "shorter than a frame",
    );
}

#[test]
fn mfcc_is_bitwise_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let samples: Vec<f64> = (0..4000).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let clip = AudioClip::new(samples, 16000).unwrap();
    let a = mfcc(&clip, &FeatureConfig::default()).unwrap();
    let b = mfcc(&clip, &FeatureConfig::default()).unwrap();
    assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn resampled_sine_keeps_its_pitch() {
    let samples: Vec<f64> = (0..48_000)
        .map(|i| 0.8 * (2.0 * PI * 1000.0 * i as f64 / 48_000.0).sin())
        .collect();
    let clip = AudioClip::new(samples, 48_000).unwrap();
    let down = resample(&clip, 16_000).unwrap();
    assert_eq!(down.len(), 16_000);
    let window = &down.samples()[..512];
    let mags = naive_dft_magnitude(window, 512).unwrap();
    let peak = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    // bin spacing is 16000 / 512 = 31.25 Hz, so 1 kHz lands on bin 32
    assert_eq!(peak, 32);
}
