//! Two-way post-processing: B steps with exact joint bit/phase error
//! bookkeeping, optionally recovering key from blocks that fail the parity
//! check (recurrence).
//!
//! A B step pairs up the surviving bits, compares the parity of each pair and
//! keeps the first bit only when the parities agree. For a pair of error
//! patterns `(b1, p1)` and `(b2, p2)` the parities agree iff `b1 == b2`; the
//! kept bit then has bit error `b1` and phase error `p1 ^ p2`.
//!
//! Failed blocks carry exactly one bit error at an unknown position and the
//! two phase errors of the previous level. With recurrence each such block is
//! hashed on its own, contributing `max(0, 2 - f - 2 H(p))` bits per block.

use crate::error::{check_range, Error, Result};
use crate::model::{overall_qber, ChannelScenario, SourceParams};
use crate::rates::{h2, kp_rate, PostprocessingConfig, RatePoint, Scheme};

/// Largest number of B steps considered by default.
pub const DEFAULT_MAX_BSTEPS: u32 = 3;

/// Joint distribution of (bit error, phase error) for one surviving pair,
/// with `q_bp` the probability of bit error `b` and phase error `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorState {
    pub q00: f64,
    pub q01: f64,
    pub q10: f64,
    pub q11: f64,
    /// Surviving pairs per initially detected pair.
    pub throughput: f64,
}

impl ErrorState {
    /// Independent bit and phase errors, full throughput.
    pub fn independent(delta_b: f64, delta_p: f64) -> Result<Self> {
        check_range("delta_b", delta_b, 0.0, 1.0, "[0, 1]")?;
        check_range("delta_p", delta_p, 0.0, 1.0, "[0, 1]")?;
        Ok(Self {
            q00: (1.0 - delta_b) * (1.0 - delta_p),
            q01: (1.0 - delta_b) * delta_p,
            q10: delta_b * (1.0 - delta_p),
            q11: delta_b * delta_p,
            throughput: 1.0,
        })
    }

    pub fn bit_error(&self) -> f64 {
        self.q10 + self.q11
    }

    pub fn phase_error(&self) -> f64 {
        self.q01 + self.q11
    }

    fn probs(&self) -> [f64; 4] {
        [self.q00, self.q01, self.q10, self.q11]
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.probs();
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::NotNormalized {
                sum: p.iter().sum(),
            });
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum });
        }
        check_range("throughput", self.throughput, 0.0, 1.0, "[0, 1]")?;
        Ok(())
    }
}

/// One B step. Returns the state of the kept pairs and the probability that a
/// block passes the parity check.
pub fn bstep_transform(s: &ErrorState) -> Result<(ErrorState, f64)> {
    s.validate()?;
    let [q00, q01, q10, q11] = s.probs();
    // bit 0 survivors: phase error iff exactly one of the two has it
    let p00 = q00 * q00 + q01 * q01;
    let p01 = 2.0 * q00 * q01;
    let p10 = q10 * q10 + q11 * q11;
    let p11 = 2.0 * q10 * q11;
    let survival = p00 + p01 + p10 + p11;
    if survival <= 0.0 {
        return Err(Error::NonFinite {
            what: "B-step survival probability",
        });
    }
    Ok((
        ErrorState {
            q00: p00 / survival,
            q01: p01 / survival,
            q10: p10 / survival,
            q11: p11 / survival,
            throughput: s.throughput * survival / 2.0,
        },
        survival,
    ))
}

/// Key bits per detected pair after `bsteps` B steps, before the `q * gain`
/// factor is applied. Without recurrence the main pool follows
/// `cfg.clamp_nonnegative`; with recurrence every pool is clamped at zero.
fn twoway_yield(
    delta_b: f64,
    delta_p: f64,
    bsteps: u32,
    recurrence: bool,
    cfg: &PostprocessingConfig,
) -> Result<f64> {
    let unit = PostprocessingConfig { q: 1.0, ..*cfg };
    if bsteps == 0 {
        return Ok(kp_rate(1.0, delta_b, delta_p, &unit));
    }
    let mut state = ErrorState::independent(delta_b, delta_p)?;
    let mut failed_pool = 0.0;
    for _ in 0..bsteps {
        let phase_before = state.phase_error();
        let throughput_before = state.throughput;
        let (next, survival) = bstep_transform(&state)?;
        if recurrence {
            let per_block = 2.0 - cfg.f_ec - 2.0 * h2(phase_before);
            failed_pool += throughput_before * (1.0 - survival) * 0.5 * per_block.max(0.0);
        }
        state = next;
    }
    let main_cfg = PostprocessingConfig {
        clamp_nonnegative: cfg.clamp_nonnegative || recurrence,
        ..unit
    };
    let main = kp_rate(
        state.throughput,
        state.bit_error(),
        state.phase_error(),
        &main_cfg,
    );
    Ok(main + failed_pool)
}

/// Rate per pump pulse with possibly asymmetric starting error rates.
pub fn twoway_rate(
    gain: f64,
    delta_b: f64,
    delta_p: f64,
    bsteps: u32,
    recurrence: bool,
    cfg: &PostprocessingConfig,
) -> Result<f64> {
    if bsteps == 0 && !recurrence {
        return Ok(kp_rate(gain, delta_b, delta_p, cfg));
    }
    Ok(cfg.q * gain * twoway_yield(delta_b, delta_p, bsteps, recurrence, cfg)?)
}

/// Rate with exactly `k` B steps, starting from `delta_b = delta_p = E_lambda`.
pub fn bstep_rate(
    src: &SourceParams,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
    k: u32,
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
        bsteps: k,
        recurrence,
    };
    let gq = match overall_qber(src, &setup) {
        Ok(gq) => gq,
        Err(Error::DegenerateGain) => return Ok(point),
        Err(e) => return Err(e),
    };
    point.gain = gq.gain;
    point.qber = gq.qber;
    point.delta_b = gq.qber;
    point.delta_p = gq.qber;
    point.rate = twoway_rate(gq.gain, gq.qber, gq.qber, k, recurrence, cfg)?;
    Ok(point)
}

/// Best of [`bstep_rate`] over `k = 0..=k_max`; ties keep the smaller `k`.
pub fn best_twoway_rate(
    src: &SourceParams,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
    k_max: u32,
    recurrence: bool,
) -> Result<RatePoint> {
    let mut best = bstep_rate(src, scn, e_d, cfg, 0, recurrence)?;
    for k in 1..=k_max {
        let p = bstep_rate(src, scn, e_d, cfg, k, recurrence)?;
        if p.rate > best.rate {
            best = p;
        }
    }
    Ok(best)
}
