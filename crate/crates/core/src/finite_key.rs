//! Finite-size correction of the phase error rate.
//!
//! The bit error rate is read off error correction and does not fluctuate.
//! The phase error rate is bounded by `delta_b + eps`, where the probability of
//! a larger deviation is at most `exp(-eps^2 n / (4 delta_b (1 - delta_b)))`
//! for `n = N Q_lambda` detection events. The bias is applied to the starting
//! phase error, before any B steps.

use crate::error::{check_range, Error, Result};
use crate::model::{overall_qber, ChannelScenario, SourceParams};
use crate::rates::{PostprocessingConfig, RatePoint, Scheme};
use crate::twoway::twoway_rate;

/// Ten minutes at the experimental repetition rate.
pub const DEFAULT_PULSES: u64 = 150_000_000_000;
/// Failure probability `exp(-50)`.
pub const DEFAULT_CONFIDENCE_EXPONENT: f64 = 50.0;
/// Rates below this are reported as zero (about 15 key bits for the default
/// data size).
pub const DEFAULT_RATE_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluctuationParams {
    /// Total number of pump pulses `N`.
    pub n_pulses: u64,
    /// `s` in `P_eps = exp(-s)`.
    pub confidence_exponent: f64,
    pub rate_cutoff: f64,
}

impl Default for FluctuationParams {
    fn default() -> Self {
        Self {
            n_pulses: DEFAULT_PULSES,
            confidence_exponent: DEFAULT_CONFIDENCE_EXPONENT,
            rate_cutoff: DEFAULT_RATE_CUTOFF,
        }
    }
}

impl FluctuationParams {
    pub fn new(n_pulses: u64, confidence_exponent: f64, rate_cutoff: f64) -> Result<Self> {
        if n_pulses == 0 {
            return Err(Error::InvalidParameter {
                name: "n_pulses",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if !(confidence_exponent > 0.0 && confidence_exponent.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "confidence_exponent",
                value: confidence_exponent,
                expected: "> 0",
            });
        }
        check_range("rate_cutoff", rate_cutoff, 0.0, 1.0, "[0, 1]")?;
        Ok(Self {
            n_pulses,
            confidence_exponent,
            rate_cutoff,
        })
    }
}

/// Phase-error bias `eps = sqrt(4 delta_b (1 - delta_b) s / n)`.
pub fn phase_bias(n_detections: f64, delta_b: f64, s: f64) -> Result<f64> {
    if n_detections.is_nan() || n_detections <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "n_detections",
            value: n_detections,
            expected: "> 0",
        });
    }
    check_range("delta_b", delta_b, 0.0, 0.5, "[0, 1/2]")?;
    check_range("s", s, 0.0, f64::INFINITY, ">= 0")?;
    Ok((4.0 * delta_b * (1.0 - delta_b) * s / n_detections).sqrt())
}

/// Key rate with the phase error rate raised by the finite-size bias.
pub fn finite_key_rate(
    src: &SourceParams,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
    flc: &FluctuationParams,
    bsteps: u32,
    recurrence: bool,
) -> Result<RatePoint> {
    let setup = scn.setup(e_d)?;
    let mut point = RatePoint {
        loss_db: scn.total_loss_db,
        mu: src.mu(),
        gain: 0.0,
        qber: 0.0,
        delta_b: 0.0,
        delta_p: 0.0,
        rate: 0.0,
        scheme: Scheme::for_placement(scn.placement),
        bsteps,
        recurrence,
    };
    let gq = match overall_qber(src, &setup) {
        Ok(gq) => gq,
        Err(Error::DegenerateGain) => return Ok(point),
        Err(e) => return Err(e),
    };
    let detections = flc.n_pulses as f64 * gq.gain;
    let delta_b = gq.qber.clamp(0.0, 0.5);
    let eps = phase_bias(detections, delta_b, flc.confidence_exponent)?;
    let delta_p = (delta_b + eps).min(0.5);

    point.gain = gq.gain;
    point.qber = gq.qber;
    point.delta_b = delta_b;
    point.delta_p = delta_p;
    point.rate = twoway_rate(gq.gain, delta_b, delta_p, bsteps, recurrence, cfg)?;
    Ok(point)
}
