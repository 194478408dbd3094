//! Mel scale, triangular filterbank and the orthonormal DCT-II.

use super::{FeatureError, Result};

/// Hz to mel: `2595 * log10(1 + f / 700)`. Strictly increasing on f >= 0.
pub fn mel_scale(freq_hz: f64) -> Result<f64> {
    if freq_hz < 0.0 {
        return Err(FeatureError::NegativeFrequency(freq_hz));
    }
    Ok(2595.0 * (1.0 + freq_hz / 700.0).log10())
}

/// Inverse of [`mel_scale`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with centers equally spaced on the mel axis between
/// 0 Hz and Nyquist. Each row holds one filter's weight per spectrum bin
/// (`fft_size / 2 + 1` bins).
pub fn mel_filterbank_matrix(
    num_filters: usize,
    fft_size: usize,
    sample_rate: u32,
) -> Result<Vec<Vec<f64>>> {
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = mel_scale(nyquist)?;
    let n_bins = fft_size / 2 + 1;

    // num_filters + 2 boundary points: left edge, centers, right edge.
    let hz_points: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (num_filters + 1) as f64))
        .collect();

    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut bank = Vec::with_capacity(num_filters);
    for f in 1..=num_filters {
        let (left, center, right) = (hz_points[f - 1], hz_points[f], hz_points[f + 1]);
        let mut weights = vec![0.0; n_bins];
        let mut area = 0.0;
        for (k, w) in weights.iter_mut().enumerate() {
            let freq = k as f64 * bin_hz;
            *w = if freq > left && freq < center {
                (freq - left) / (center - left)
            } else if (freq - center).abs() < 1e-12 {
                1.0
            } else if freq > center && freq < right {
                (right - freq) / (right - center)
            } else {
                0.0
            };
            area += *w;
        }
        if area <= 0.0 {
            return Err(FeatureError::TooFewBins {
                num_filters,
                fft_size,
            });
        }
        bank.push(weights);
    }
    Ok(bank)
}

/// Weighted sums of the power spectrum under each filter.
pub fn apply_filterbank(spectrum: &[f64], bank: &[Vec<f64>]) -> Vec<f64> {
    bank.iter()
        .map(|weights| {
            weights
                .iter()
                .zip(spectrum)
                .map(|(w, p)| w * p)
                .sum::<f64>()
                .max(0.0)
        })
        .collect()
}

/// One-call filterbank: build the matrix for this spectrum's resolution and
/// apply it.
pub fn mel_filterbank(
    power_spectrum: &[f64],
    sample_rate: u32,
    num_filters: usize,
) -> Result<Vec<f64>> {
    if power_spectrum.len() < 2 {
        return Err(FeatureError::TooFewBins {
            num_filters,
            fft_size: 0,
        });
    }
    let fft_size = (power_spectrum.len() - 1) * 2;
    let bank = mel_filterbank_matrix(num_filters, fft_size, sample_rate)?;
    Ok(apply_filterbank(power_spectrum, &bank))
}

/// Orthonormal DCT-II of `input`, truncated to `num_out` coefficients:
/// `C[k] = s(k) * sum_n x[n] * cos(pi * k * (2n + 1) / (2N))` with
/// `s(0) = sqrt(1/N)` and `s(k) = sqrt(2/N)` otherwise.
pub fn dct_ii_orthonormal(input: &[f64], num_out: usize) -> Vec<f64> {
    let n = input.len();
    assert!(n > 0 && num_out <= n);
    let mut out = Vec::with_capacity(num_out);
    for k in 0..num_out {
        let mut acc = 0.0;
        for (i, &x) in input.iter().enumerate() {
            acc += x * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64)
                .cos();
        }
        let scale = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        out.push(scale * acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn mel_scale_anchor_points() {
        assert_eq!(mel_scale(0.0).unwrap(), 0.0);
        assert!((mel_scale(700.0).unwrap() - 2595.0 * 2f64.log10()).abs() < 1e-9);
        let expected_8k = 2595.0 * (1.0f64 + 8000.0 / 700.0).log10();
        assert!((mel_scale(8000.0).unwrap() - expected_8k).abs() < 1e-9);
        assert!((expected_8k - 2840.023).abs() < 1e-2);
    }

    #[test]
    fn mel_scale_rejects_negative_and_increases() {
        assert!(matches!(
            mel_scale(-1.0),
            Err(FeatureError::NegativeFrequency(_))
        ));
        let mut prev = -1.0;
        for f in (0..8000).step_by(100) {
            let m = mel_scale(f as f64).unwrap();
            assert!(m > prev);
            prev = m;
        }
    }

    #[test]
    fn mel_round_trips_through_hz() {
        for f in [0.0, 120.5, 700.0, 3299.0, 7999.0] {
            let back = mel_to_hz(mel_scale(f).unwrap());
            assert!((back - f).abs() < 1e-6, "f={f}");
        }
    }

    #[test]
    fn zero_spectrum_gives_zero_energies() {
        let energies = mel_filterbank(&vec![0.0; 257], 16000, 26).unwrap();
        assert_eq!(energies.len(), 26);
        assert!(energies.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn flat_spectrum_energies_equal_filter_areas() {
        let bank = mel_filterbank_matrix(26, 512, 16000).unwrap();
        let flat = vec![1.0; 257];
        let energies = apply_filterbank(&flat, &bank);
        for (f, (e, weights)) in energies.iter().zip(&bank).enumerate() {
            let area: f64 = weights.iter().sum();
            assert!(*e > 0.0, "filter {f} empty");
            assert!((e - area).abs() < 1e-9 * area.max(1.0));
        }
    }

    #[test]
    fn tone_at_center_peaks_its_own_filter() {
        let bank = mel_filterbank_matrix(20, 512, 16000).unwrap();
        // Pick filter 10's peak bin and put a single tone there.
        let center_bin = bank[10]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let mut spectrum = vec![0.0; 257];
        spectrum[center_bin] = 5.0;
        let energies = apply_filterbank(&spectrum, &bank);
        let argmax = energies
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 10);
    }

    #[test]
    fn too_many_filters_for_resolution_is_an_error() {
        // A 32-point fft cannot separate 40 mel centers.
        let result = mel_filterbank_matrix(40, 32, 16000);
        assert!(matches!(result, Err(FeatureError::TooFewBins { .. })));
    }

    #[test]
    fn dct_matches_naive_cosine_sum() {
        let mut rng = Rng::new(11);
        let input: Vec<f64> = (0..26).map(|_| rng.next_signed() * 4.0).collect();
        let out = dct_ii_orthonormal(&input, 26);
        let n = input.len() as f64;
        for (k, &c) in out.iter().enumerate() {
            let mut oracle = 0.0;
            for (i, &x) in input.iter().enumerate() {
                oracle += x
                    * (std::f64::consts::PI * k as f64 * (2.0 * i as f64 + 1.0) / (2.0 * n)).cos();
            }
            oracle *= if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            assert!((c - oracle).abs() < 1e-9);
        }
    }

    #[test]
    fn dct_of_constant_is_zero_past_term_zero() {
        let out = dct_ii_orthonormal(&vec![3.25; 26], 13);
        assert!(out[0] > 0.0);
        for &c in &out[1..] {
            assert!(c.abs() < 1e-12);
        }
    }
}
