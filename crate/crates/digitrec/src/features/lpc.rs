//! Linear-prediction analysis: Levinson-Durbin recursion over the frame
//! autocorrelation.
//!
//! Coefficient convention: the predictor is `x^[n] = -sum_i a_i * x[n-i]`,
//! i.e. `A(z) = 1 + sum_i a_i z^-i` is the analysis polynomial. An AR(1)
//! source `x[n] = 0.9 x[n-1] + e[n]` therefore yields `a_1 ~ -0.9`.

use super::{FeatureConfig, Result};
use crate::dsp::{self, FrameMatrix};

/// Outcome of the Levinson-Durbin recursion.
#[derive(Debug, Clone)]
pub struct LevinsonResult {
    /// `a_1 .. a_p`.
    pub coeffs: Vec<f64>,
    /// Reflection coefficients `k_1 .. k_p`; all within [-1, 1] for a valid
    /// autocorrelation.
    pub reflections: Vec<f64>,
    /// Final prediction error power.
    pub prediction_error: f64,
}

/// Solve the order-`order` normal equations for autocorrelation `r`
/// (`r.len() > order`). A degenerate input (`r[0] <= 0`) produces the zero
/// solution.
pub fn levinson_durbin(r: &[f64], order: usize) -> LevinsonResult {
    assert!(r.len() > order, "need r[0..=order]");
    let mut coeffs = vec![0.0; order];
    let mut reflections = vec![0.0; order];
    if r[0] <= 0.0 {
        return LevinsonResult {
            coeffs,
            reflections,
            prediction_error: 0.0,
        };
    }
    let mut error = r[0];
    for i in 0..order {
        let mut acc = r[i + 1];
        for j in 0..i {
            acc += coeffs[j] * r[i - j];
        }
        if error <= 0.0 {
            // Perfectly predictable already; remaining coefficients stay 0.
            break;
        }
        let k = -acc / error;
        reflections[i] = k;
        coeffs[i] = k;
        for j in 0..i / 2 + i % 2 {
            let tmp = coeffs[j] + k * coeffs[i - 1 - j];
            coeffs[i - 1 - j] += k * coeffs[j];
            coeffs[j] = tmp;
        }
        error *= 1.0 - k * k;
    }
    LevinsonResult {
        coeffs,
        reflections,
        prediction_error: error.max(0.0),
    }
}

const DEGENERATE_ENERGY: f64 = 1e-12;

pub(super) fn extract_lpc_rows(
    frames: &FrameMatrix,
    config: &FeatureConfig,
) -> Result<Vec<Vec<f64>>> {
    let order = config.lpc_order;
    frames
        .frames
        .iter()
        .map(|frame| {
            if order >= frame.len() {
                return Err(dsp::DspError::LagTooLarge {
                    lag: order,
                    frame_len: frame.len(),
                }
                .into());
            }
            let r = dsp::autocorrelation(frame, order)?;
            if r[0] <= DEGENERATE_ENERGY {
                return Ok(vec![0.0; order]);
            }
            Ok(levinson_durbin(&r, order).coeffs)
        })
        .collect()
}
