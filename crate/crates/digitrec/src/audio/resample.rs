//! Polyphase windowed-sinc sample-rate conversion.
//!
//! The kernel is a Kaiser-windowed sinc low-pass cut at 0.45 x the smaller
//! of the two sampling rates, which keeps the full transition band below the
//! destination Nyquist when downsampling. Output sample n is the kernel dot
//! product at input position n * src / dst; phases repeat with the reduced
//! rational ratio, so the per-phase tap tables are computed once.

use super::{AudioBuffer, AudioError, Result};

/// Sinc lobes on each side of the kernel center, measured at the cutoff
/// frequency. Together with the Kaiser beta this sets the stop-band floor
/// comfortably past 40 dB.
const LOBES: f64 = 48.0;
const KAISER_BETA: f64 = 10.0;

pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(AudioError::InvalidRate);
    }
    let src = buffer.sample_rate;
    if target_rate == src {
        return Ok(buffer.clone());
    }
    let out_len =
        (buffer.samples.len() as f64 * target_rate as f64 / src as f64).round() as usize;
    if buffer.samples.is_empty() || out_len == 0 {
        return Ok(AudioBuffer::new(
            vec![],
            target_rate,
            buffer.source_bit_depth,
        ));
    }

    // Cutoff in cycles per *input* sample.
    let cutoff = 0.45 * src.min(target_rate) as f64 / src as f64;
    let half_width = (LOBES / (2.0 * cutoff)).ceil() as i64;

    // Reduced rational step: input advances p/q samples per output sample.
    let g = gcd(src as u64, target_rate as u64);
    let p = (src as u64 / g) as i64;
    let q = (target_rate as u64 / g) as i64;

    // One tap table per fractional phase r/q.
    let taps_per_phase = (2 * half_width + 1) as usize;
    let mut phases: Vec<Vec<f64>> = Vec::with_capacity(q as usize);
    let i0_beta = bessel_i0(KAISER_BETA);
    for r in 0..q {
        let frac = r as f64 / q as f64;
        let mut taps = Vec::with_capacity(taps_per_phase);
        for j in -half_width..=half_width {
            taps.push(kernel(j as f64 - frac, cutoff, half_width as f64, i0_beta));
        }
        phases.push(taps);
    }

    let x = &buffer.samples;
    let n_in = x.len() as i64;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as i64 {
        let num = n * p;
        let ipos = num.div_euclid(q);
        let phase = num.rem_euclid(q) as usize;
        let taps = &phases[phase];
        let mut acc = 0.0;
        for (k, &t) in taps.iter().enumerate() {
            let m = ipos - half_width + k as i64;
            if m >= 0 && m < n_in {
                acc += t * x[m as usize];
            }
        }
        out.push(acc.clamp(-1.0, 1.0));
    }
    Ok(AudioBuffer::new(out, target_rate, buffer.source_bit_depth))
}

fn kernel(t: f64, cutoff: f64, half_width: f64, i0_beta: f64) -> f64 {
    let a = t / half_width;
    if a.abs() > 1.0 {
        return 0.0;
    }
    let window = bessel_i0(KAISER_BETA * (1.0 - a * a).sqrt()) / i0_beta;
    2.0 * cutoff * sinc(2.0 * cutoff * t) * window
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Modified Bessel function of the first kind, order zero (power series).
fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=40 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(freq: f64, rate: u32, secs: f64, amp: f64) -> AudioBuffer {
        let n = (secs * rate as f64).round() as usize;
        let samples = (0..n)
            .map(|i| amp * (std::f64::consts::TAU * freq * i as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::new(samples, rate, 24)
    }

    fn rms(v: &[f64]) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
    }

    /// Normalized cross-correlation at zero lag.
    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len());
        let dot: f64 = a[..n].iter().zip(&b[..n]).map(|(x, y)| x * y).sum();
        let ea: f64 = a[..n].iter().map(|x| x * x).sum();
        let eb: f64 = b[..n].iter().map(|x| x * x).sum();
        dot / (ea.sqrt() * eb.sqrt())
    }

    #[test]
    fn same_rate_is_identity() {
        let buf = sine(1000.0, 48000, 0.05, 0.8);
        let out = resample(&buf, 48000).unwrap();
        assert_eq!(out.samples, buf.samples);
    }

    #[test]
    fn zero_rate_is_invalid() {
        let buf = sine(1000.0, 48000, 0.01, 0.5);
        assert!(matches!(resample(&buf, 0), Err(AudioError::InvalidRate)));
    }

    #[test]
    fn duration_preserved_within_one_sample() {
        for (src, dst) in [(48000u32, 16000u32), (16000, 48000), (48000, 44100), (44100, 8000)] {
            let buf = sine(440.0, src, 0.237, 0.5);
            let out = resample(&buf, dst).unwrap();
            let diff = (out.duration_secs() - buf.duration_secs()).abs();
            assert!(diff <= 1.0 / dst as f64, "{src}->{dst}: {diff}");
        }
    }

    #[test]
    fn passband_tone_preserved() {
        let buf = sine(1000.0, 48000, 1.0, 0.8);
        let out = resample(&buf, 16000).unwrap();
        let reference = sine(1000.0, 16000, 1.0, 0.8);
        // Compare away from the boundary transient of the FIR kernel.
        let skip = 800;
        let n = out.samples.len() - skip;
        let c = correlation(&out.samples[skip..n], &reference.samples[skip..n]);
        assert!(c >= 0.999, "correlation {c}");
    }

    #[test]
    fn stopband_tone_rejected_by_40_db() {
        // 10 kHz is above the 8 kHz Nyquist of the 16 kHz target.
        let buf = sine(10_000.0, 48000, 1.0, 0.8);
        let out = resample(&buf, 16000).unwrap();
        let atten_db = 20.0 * (rms(&out.samples) / rms(&buf.samples)).log10();
        assert!(atten_db <= -40.0, "attenuation only {atten_db} dB");
    }

    #[test]
    fn round_trip_correlates_with_original() {
        // Band-limited content (< 7 kHz) survives 16k -> 48k -> 16k,
        // including a component near the band edge.
        let tones = [(2500.0, 0.4), (6500.0, 0.3)];
        let n = 8000;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                tones
                    .iter()
                    .map(|&(f, a)| {
                        a * (std::f64::consts::TAU * f * i as f64 / 16000.0).sin()
                    })
                    .sum()
            })
            .collect();
        let buf = AudioBuffer::new(samples, 16000, 24);
        let up = resample(&buf, 48000).unwrap();
        let back = resample(&up, 16000).unwrap();
        let skip = 400;
        let n = back.samples.len().min(buf.samples.len()) - skip;
        let c = correlation(&back.samples[skip..n], &buf.samples[skip..n]);
        assert!(c >= 0.999, "round-trip correlation {c}");
    }

    #[test]
    fn empty_input_resamples_to_empty() {
        let buf = AudioBuffer::new(vec![], 48000, 16);
        let out = resample(&buf, 8000).unwrap();
        assert!(out.is_empty());
        assert_eq!(out.sample_rate, 8000);
    }
}
