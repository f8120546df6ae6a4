//! Radix-2 FFT and dominant-frequency estimation for tone classification.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Transform length used for peak picking.
pub const TRANSFORM_LEN: usize = 4096;

/// In-place iterative Cooley-Tukey FFT. `re.len()` must be a power of two
/// and equal `im.len()`.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert!(n.is_power_of_two() && im.len() == n, "fft length must be a power of two");
    let bits = n.trailing_zeros();
    if bits == 0 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let theta = -2.0 * PI / len as f64;
        for k in 0..half {
            let (w_im, w_re) = libm::sincos(theta * k as f64);
            let mut start = 0;
            while start < n {
                let (a, b) = (start + k, start + k + half);
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

/// Magnitudes of bins `0..=n/2` after a Hann window over the first
/// `min(samples.len(), n)` samples, zero-padded to `n`.
pub fn magnitude_spectrum(samples: &[f32], n: usize) -> Vec<f64> {
    let used = samples.len().min(n);
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (i, &s) in samples[..used].iter().enumerate() {
        let w = if used > 1 {
            0.5 - 0.5 * libm::cos(2.0 * PI * i as f64 / (used - 1) as f64)
        } else {
            1.0
        };
        re[i] = f64::from(s) * w;
    }
    fft_in_place(&mut re, &mut im);
    (0..=n / 2).map(|k| libm::hypot(re[k], im[k])).collect()
}

/// Index of the largest non-DC bin, lowest index on ties.
pub fn peak_bin(magnitudes: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, &m) in magnitudes.iter().enumerate().skip(1) {
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    best.filter(|(_, m)| *m > 0.0).map(|(k, _)| k)
}

/// Frequency in Hz of the strongest spectral peak, `None` for silence.
pub fn dominant_frequency(samples: &[f32], sample_rate: u32, n: usize) -> Option<f64> {
    let mags = magnitude_spectrum(samples, n);
    peak_bin(&mags).map(|k| k as f64 * f64::from(sample_rate) / n as f64)
}
