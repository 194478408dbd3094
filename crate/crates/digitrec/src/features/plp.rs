//! Perceptual linear prediction.
//!
//! Per frame: bark-spaced critical-band integration of the power spectrum,
//! equal-loudness weighting, cube-root intensity-loudness compression, an
//! inverse cosine transform back to autocorrelation, Levinson-Durbin of the
//! configured order, and finally the LP-to-cepstrum recursion.

use super::lpc::levinson_durbin;
use super::{FeatureConfig, Result};
use crate::dsp::{self, FrameMatrix};

/// Hz to bark: `6 * asinh(f / 600)`.
pub fn bark_scale(freq_hz: f64) -> f64 {
    6.0 * (freq_hz / 600.0).asinh()
}

/// Equal-loudness weight at `freq_hz` (the classic 40-dB-equivalent curve).
pub fn equal_loudness(freq_hz: f64) -> f64 {
    let w2 = (std::f64::consts::TAU * freq_hz).powi(2);
    (w2 + 56.8e6) * w2 * w2 / ((w2 + 6.3e6).powi(2) * (w2 + 0.38e9))
}

/// Critical-band masking curve centered at zero, evaluated at a bark
/// distance `d`.
fn critical_band_weight(d: f64) -> f64 {
    if !(-1.3..=2.5).contains(&d) {
        0.0
    } else if d <= -0.5 {
        10f64.powf(2.5 * (d + 0.5))
    } else if d <= 0.5 {
        1.0
    } else {
        10f64.powf(-(d - 0.5))
    }
}

struct PlpAnalyzer {
    /// Per band: weight per spectrum bin.
    band_weights: Vec<Vec<f64>>,
    /// Equal-loudness gain per band center.
    loudness: Vec<f64>,
}

impl PlpAnalyzer {
    fn new(num_bands: usize, fft_size: usize, sample_rate: u32) -> PlpAnalyzer {
        let nyquist = sample_rate as f64 / 2.0;
        let bark_max = bark_scale(nyquist);
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;

        let mut band_weights = Vec::with_capacity(num_bands);
        let mut loudness = Vec::with_capacity(num_bands);
        for band in 1..=num_bands {
            let center_bark = bark_max * band as f64 / (num_bands + 1) as f64;
            let weights: Vec<f64> = (0..n_bins)
                .map(|k| critical_band_weight(bark_scale(k as f64 * bin_hz) - center_bark))
                .collect();
            band_weights.push(weights);
            let center_hz = 600.0 * (center_bark / 6.0).sinh();
            loudness.push(equal_loudness(center_hz));
        }
        PlpAnalyzer {
            band_weights,
            loudness,
        }
    }

    /// Compressed auditory spectrum of one power spectrum.
    fn auditory_spectrum(&self, spectrum: &[f64], floor: f64) -> Vec<f64> {
        self.band_weights
            .iter()
            .zip(&self.loudness)
            .map(|(weights, &gain)| {
                let energy: f64 = weights.iter().zip(spectrum).map(|(w, p)| w * p).sum();
                (energy * gain).max(floor).cbrt()
            })
            .collect()
    }
}

/// Inverse cosine transform of a real even spectrum sampled at `m + 2`
/// points over [0, pi] (band values plus duplicated endpoints), yielding
/// autocorrelation lags `0..=max_lag`.
fn idft_autocorrelation(bands: &[f64], max_lag: usize) -> Vec<f64> {
    let m = bands.len();
    let n = m + 1; // interval count in the DCT-I layout
    let first = bands[0];
    let last = bands[m - 1];
    (0..=max_lag)
        .map(|l| {
            let mut acc = first; // duplicated left endpoint, cos(0) = 1
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * last; // duplicated right endpoint, cos(pi*l)
            for (k, &b) in bands.iter().enumerate() {
                let angle = std::f64::consts::PI * (k + 1) as f64 * l as f64 / n as f64;
                acc += 2.0 * b * angle.cos();
            }
            acc / (2.0 * n as f64)
        })
        .collect()
}

/// LP-to-cepstrum recursion for `A(z) = 1 + sum a_k z^-k`:
/// `c_n = -a_n - sum_{k=1}^{n-1} ((n-k)/n) a_k c_{n-k}`, continued past the
/// model order with the pure convolution term.
fn lpc_to_cepstrum(coeffs: &[f64], num_ceps: usize) -> Vec<f64> {
    let p = coeffs.len();
    let mut ceps = vec![0.0; num_ceps];
    for n in 1..=num_ceps {
        let mut acc = if n <= p { -coeffs[n - 1] } else { 0.0 };
        for k in 1..n.min(p + 1) {
            acc -= (n - k) as f64 / n as f64 * coeffs[k - 1] * ceps[n - k - 1];
        }
        ceps[n - 1] = acc;
    }
    ceps
}

pub(super) fn extract_plp_rows(
    frames: &FrameMatrix,
    config: &FeatureConfig,
) -> Result<Vec<Vec<f64>>> {
    let frame_len = frames.frames.first().map_or(2, Vec::len);
    let fft_size = dsp::next_pow2(frame_len);
    let analyzer = PlpAnalyzer::new(config.num_filters, fft_size, frames.sample_rate);
    frames
        .frames
        .iter()
        .map(|frame| {
            let spectrum = dsp::power_spectrum(frame, fft_size)?;
            let bands = analyzer.auditory_spectrum(&spectrum, config.energy_floor);
            let r = idft_autocorrelation(&bands, config.lpc_order);
            let lp = levinson_durbin(&r, config.lpc_order);
            Ok(lpc_to_cepstrum(&lp.coeffs, config.num_ceps))
        })
        .collect()
}
