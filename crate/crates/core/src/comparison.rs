//! Reference schemes for the loss comparison: weak-coherent-pulse BB84 with
//! ideal decoy estimation, and a triggered PDC source used as a heralded
//! single-photon source with ideal decoy estimation.
//!
//! Both use the GLLP-type rate `q { -Q f H(E) + Q_1 [1 - H(e_1)] }`, where
//! `Q_1` and `e_1` are the gain and error rate of the single-photon part.

use crate::error::{check_range, Error, Result};
use crate::model::{
    error_n, overall_qber, pair_pmf, transmittance, ChannelScenario, Placement, SourceParams, E0,
};
use crate::rates::{h2, PostprocessingConfig, RatePoint, Scheme};

/// Weak-coherent-pulse link: Alice's side is lossless, all loss is on Bob's
/// side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentSetup {
    /// Mean photon number of the signal state.
    pub mu: f64,
    /// Overall transmittance including Bob's detector.
    pub eta: f64,
    pub y0: f64,
    pub e_d: f64,
}

impl CoherentSetup {
    pub fn new(mu: f64, eta: f64, y0: f64, e_d: f64) -> Result<Self> {
        check_range("mu", mu, 0.0, f64::INFINITY, ">= 0")?;
        check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
        check_range("y0", y0, 0.0, 1.0, "[0, 1]")?;
        check_range("e_d", e_d, 0.0, 0.5, "[0, 1/2]")?;
        Ok(Self { mu, eta, y0, e_d })
    }

    /// Coherent link over a scenario's loss, with Bob's receiver efficiency
    /// and background.
    pub fn from_scenario(mu: f64, scn: &ChannelScenario, e_d: f64) -> Result<Self> {
        scn.validate()?;
        Self::new(
            mu,
            scn.eta_bob_intrinsic * transmittance(scn.total_loss_db),
            scn.y0_side,
            e_d,
        )
    }

    pub fn gain(&self) -> f64 {
        self.y0 + signal_click(self.eta, self.mu)
    }

    pub fn qber(&self) -> f64 {
        let q = self.gain();
        if q > 0.0 {
            (E0 * self.y0 + self.e_d * signal_click(self.eta, self.mu)) / q
        } else {
            0.0
        }
    }

    pub fn single_photon_yield(&self) -> f64 {
        self.y0 + self.eta - self.y0 * self.eta
    }

    pub fn single_photon_gain(&self) -> f64 {
        self.mu * (-self.mu).exp() * self.single_photon_yield()
    }

    pub fn single_photon_error(&self) -> f64 {
        let y1 = self.single_photon_yield();
        if y1 > 0.0 {
            (E0 * self.y0 + self.e_d * self.eta) / y1
        } else {
            0.0
        }
    }
}

/// `1 - exp(-eta mu)`
fn signal_click(eta: f64, mu: f64) -> f64 {
    -(-eta * mu).exp_m1()
}

fn gllp_rate(gain: f64, qber: f64, q1: f64, e1: f64, cfg: &PostprocessingConfig) -> f64 {
    let r = cfg.q * (-gain * cfg.f_ec * h2(qber) + q1 * (1.0 - h2(e1)));
    if cfg.clamp_nonnegative {
        r.max(0.0)
    } else {
        r
    }
}

/// Decoy-state BB84 with a weak coherent source. `delta_b`/`delta_p` report
/// the overall QBER and the single-photon error rate.
pub fn coherent_decoy_rate(
    mu: f64,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
) -> Result<RatePoint> {
    let link = CoherentSetup::from_scenario(mu, scn, e_d)?;
    let (gain, qber) = (link.gain(), link.qber());
    let (q1, e1) = (link.single_photon_gain(), link.single_photon_error());
    Ok(RatePoint {
        loss_db: scn.total_loss_db,
        mu,
        gain,
        qber,
        delta_b: qber,
        delta_p: e1,
        rate: gllp_rate(gain, qber, q1, e1, cfg),
        scheme: Scheme::CoherentDecoy,
        bsteps: 0,
        recurrence: false,
    })
}

/// Triggered PDC source at Alice with decoy estimation of the single-pair
/// contribution. The scenario's placement is ignored; the source always sits
/// with Alice.
pub fn triggering_pdc_decoy_rate(
    src: &SourceParams,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
) -> Result<RatePoint> {
    let scn = ChannelScenario {
        placement: Placement::SourceAtAlice,
        ..*scn
    };
    let setup = scn.setup(e_d)?;
    let mut point = RatePoint {
        loss_db: scn.total_loss_db,
        mu: src.mu(),
        gain: 0.0,
        qber: 0.0,
        delta_b: 0.0,
        delta_p: 0.0,
        rate: 0.0,
        scheme: Scheme::TriggeringDecoy,
        bsteps: 0,
        recurrence: false,
    };
    let gq = match overall_qber(src, &setup) {
        Ok(gq) => gq,
        Err(Error::DegenerateGain) => return Ok(point),
        Err(e) => return Err(e),
    };
    let y1 = crate::model::yield_n(1, &setup);
    let q1 = pair_pmf(1, src) * y1;
    let e1 = if y1 > 0.0 { error_n(1, &setup)? } else { E0 };
    point.gain = gq.gain;
    point.qber = gq.qber;
    point.delta_b = gq.qber;
    point.delta_p = e1;
    point.rate = gllp_rate(gq.gain, gq.qber, q1, e1, cfg);
    Ok(point)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::defaults;
    use approx::assert_relative_eq;

    #[test]
    fn coherent_by_hand() {
        let cfg = PostprocessingConfig::default();
        let scn = ChannelScenario::new(Placement::SourceAtAlice, 20.0).unwrap();
        let p = coherent_decoy_rate(0.5, &scn, 0.015, &cfg).unwrap();
        let eta = 0.145 * 0.01;
        let y0 = 6.02e-6;
        let q = y0 + 1.0 - (-eta * 0.5f64).exp();
        let e = (0.5 * y0 + 0.015 * (1.0 - (-eta * 0.5f64).exp())) / q;
        let y1 = y0 + eta - y0 * eta;
        let q1 = 0.5 * (-0.5f64).exp() * y1;
        let e1 = (0.5 * y0 + 0.015 * eta) / y1;
        let h = |x: f64| -x * x.log2() - (1.0 - x) * (1.0 - x).log2();
        let r = 0.5 * (-q * 1.22 * h(e) + q1 * (1.0 - h(e1)));
        assert_relative_eq!(p.gain, q, max_relative = 1e-12);
        assert_relative_eq!(p.qber, e, max_relative = 1e-10);
        assert_relative_eq!(p.rate, r, max_relative = 1e-9);
    }

    #[test]
    fn coherent_rate_vanishes_at_high_loss() {
        let cfg = PostprocessingConfig::default();
        let scn = ChannelScenario::new(Placement::SourceAtAlice, 45.0).unwrap();
        let p = coherent_decoy_rate(0.5, &scn, defaults::MISALIGNMENT_ERROR, &cfg).unwrap();
        assert_eq!(p.rate, 0.0);
    }

    #[test]
    fn triggering_single_pair_error() {
        let cfg = PostprocessingConfig::default();
        let scn = ChannelScenario::new(Placement::SourceInMiddle, 20.0).unwrap();
        let src = SourceParams::from_mu(0.2).unwrap();
        let p = triggering_pdc_decoy_rate(&src, &scn, 0.015, &cfg).unwrap();
        // forced to the source-at-Alice geometry
        let alice = ChannelScenario {
            placement: Placement::SourceAtAlice,
            ..scn
        };
        let setup = alice.setup(0.015).unwrap();
        assert_relative_eq!(p.delta_p, error_n(1, &setup).unwrap(), max_relative = 1e-15);
        assert!(p.delta_p < p.qber);
        assert!(p.rate > 0.0);
    }

    #[test]
    fn rejects_bad_setup() {
        assert!(CoherentSetup::new(-0.1, 0.1, 0.0, 0.0).is_err());
        assert!(CoherentSetup::new(0.1, 1.1, 0.0, 0.0).is_err());
        assert!(CoherentSetup::new(0.1, 0.1, 0.0, 0.6).is_err());
    }
}
