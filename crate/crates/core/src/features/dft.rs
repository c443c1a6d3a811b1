//! Discrete Fourier transform magnitudes: an iterative radix-2 path and the
//! direct quadratic-time definition it is checked against.

use std::f64::consts::PI;

use super::FeatureError;

/// Magnitude spectrum of `frame` zero-padded to `fft_size`, via radix-2 FFT.
///
/// Returns `fft_size / 2 + 1` bins.
pub fn dft_magnitude(frame: &[f64], fft_size: usize) -> Result<Vec<f64>, FeatureError> {
    if fft_size == 0 || !fft_size.is_power_of_two() {
        return Err(FeatureError::NotPowerOfTwo(fft_size));
    }
    if frame.len() > fft_size {
        return Err(FeatureError::FrameTooLong {
            frame_len: frame.len(),
            fft_size,
        });
    }
    let mut re = vec![0.0; fft_size];
    let mut im = vec![0.0; fft_size];
    re[..frame.len()].copy_from_slice(frame);
    fft_in_place(&mut re, &mut im);
    Ok((0..=fft_size / 2).map(|k| re[k].hypot(im[k])).collect())
}

/// Direct `O(n^2)` DFT magnitude, any `fft_size >= frame.len()`.
pub fn naive_dft_magnitude(frame: &[f64], fft_size: usize) -> Result<Vec<f64>, FeatureError> {
    if frame.len() > fft_size {
        return Err(FeatureError::FrameTooLong {
            frame_len: frame.len(),
            fft_size,
        });
    }
    let n = fft_size as f64;
    Ok((0..=fft_size / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, x) in frame.iter().enumerate() {
                // reduce k*t mod n first so the angle stays small
                let phase = -2.0 * PI * ((k * t) % fft_size) as f64 / n;
                re += x * phase.cos();
                im += x * phase.sin();
            }
            re.hypot(im)
        })
        .collect())
}

fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    if n <= 1 {
        return;
    }
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for k in 0..half {
            // exact twiddle per index rather than a running product, keeps error at ~1e-13
            let angle = -2.0 * PI * k as f64 / len as f64;
            let (w_im, w_re) = angle.sin_cos();
            let mut start = 0;
            while start < n {
                let a = start + k;
                let b = a + half;
                let t_re = re[b] * w_re - im[b] * w_im;
                let t_im = re[b] * w_im + im[b] * w_re;
                re[b] = re[a] - t_re;
                im[b] = im[a] - t_im;
                re[a] += t_re;
                im[a] += t_im;
                start += len;
            }
        }
        len <<= 1;
    }
}
