//! One-way key rate for a basis-independent source.

use std::fmt;
use std::str::FromStr;

use crate::error::{check_range, Error, Result};
use crate::model::{overall_qber, ChannelScenario, GainQber, Placement, SetupParams, SourceParams};

/// Error-correction efficiency used throughout the simulations.
pub const DEFAULT_F_EC: f64 = 1.22;

/// Basis reconciliation factor and error-correction inefficiency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostprocessingConfig {
    pub q: f64,
    pub f_ec: f64,
    /// Report negative rates as zero.
    pub clamp_nonnegative: bool,
}

impl Default for PostprocessingConfig {
    fn default() -> Self {
        Self {
            q: 0.5,
            f_ec: DEFAULT_F_EC,
            clamp_nonnegative: true,
        }
    }
}

impl PostprocessingConfig {
    pub fn new(q: f64, f_ec: f64, clamp_nonnegative: bool) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                expected: "(0, 1]",
            });
        }
        check_range("f_ec", f_ec, 1.0, f64::INFINITY, ">= 1")?;
        Ok(Self {
            q,
            f_ec,
            clamp_nonnegative,
        })
    }

    /// Same configuration with signed (unclamped) output.
    pub fn signed(self) -> Self {
        Self {
            clamp_nonnegative: false,
            ..self
        }
    }
}

/// Protocol families compared in the loss sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    CoherentDecoy,
    EntanglementAlice,
    EntanglementMiddle,
    TriggeringDecoy,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::CoherentDecoy,
        Scheme::EntanglementAlice,
        Scheme::EntanglementMiddle,
        Scheme::TriggeringDecoy,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Scheme::CoherentDecoy => "coherent-decoy",
            Scheme::EntanglementAlice => "entanglement-alice",
            Scheme::EntanglementMiddle => "entanglement-middle",
            Scheme::TriggeringDecoy => "triggering-decoy",
        }
    }

    pub fn for_placement(placement: Placement) -> Self {
        match placement {
            Placement::SourceInMiddle => Scheme::EntanglementMiddle,
            Placement::SourceAtAlice => Scheme::EntanglementAlice,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.label() == s)
            .ok_or_else(|| format!("unknown scheme `{s}`"))
    }
}

/// One evaluated operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    pub loss_db: f64,
    /// Expected photon (pair) number used.
    pub mu: f64,
    pub gain: f64,
    pub qber: f64,
    pub delta_b: f64,
    pub delta_p: f64,
    /// Key bits per pump pulse.
    pub rate: f64,
    pub scheme: Scheme,
    pub bsteps: u32,
    pub recurrence: bool,
}

/// Binary entropy in bits; `H(0) = H(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0, "[0, 1]")?;
    Ok(h2(x))
}

pub(crate) fn h2(x: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&x), "h2 argument {x}");
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (-x).ln_1p() / std::f64::consts::LN_2
    }
}

/// `q * gain * [1 - f H(delta_b) - H(delta_p)]`
pub fn kp_rate(gain: f64, delta_b: f64, delta_p: f64, cfg: &PostprocessingConfig) -> f64 {
    let r = cfg.q * gain * (1.0 - cfg.f_ec * h2(delta_b) - h2(delta_p));
    if cfg.clamp_nonnegative {
        r.max(0.0)
    } else {
        r
    }
}

/// One-way rate from an explicit setup, with `delta_b = delta_p = E_lambda`.
pub fn one_way_rate(
    src: &SourceParams,
    setup: &SetupParams,
    cfg: &PostprocessingConfig,
) -> Result<(f64, GainQber)> {
    let gq = overall_qber(src, setup)?;
    Ok((kp_rate(gq.gain, gq.qber, gq.qber, cfg), gq))
}

/// One-way rate for an entanglement scheme over a channel scenario.
///
/// A source that produces no coincidences at all yields a zero rate.
pub fn one_way_key_rate(
    src: &SourceParams,
    scn: &ChannelScenario,
    e_d: f64,
    cfg: &PostprocessingConfig,
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
        bsteps: 0,
        recurrence: false,
    };
    match one_way_rate(src, &setup, cfg) {
        Ok((rate, gq)) => {
            point.gain = gq.gain;
            point.qber = gq.qber;
            point.delta_b = gq.qber;
            point.delta_p = gq.qber;
            point.rate = rate;
            Ok(point)
        }
        Err(Error::DegenerateGain) => Ok(point),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{defaults, SideParams};
    use approx::assert_relative_eq;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.5).unwrap(), 1.0, max_relative = 1e-15);
        // mpmath, 30 digits: 0.499915958164528...
        assert_relative_eq!(
            binary_entropy(0.11).unwrap(),
            0.499_915_958_164_528_1,
            max_relative = 1e-14
        );
        assert!(binary_entropy(-0.01).is_err());
        assert!(binary_entropy(1.5).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn error_free_rate_is_q_times_gain() {
        let cfg = PostprocessingConfig::default();
        assert_eq!(kp_rate(0.01, 0.0, 0.0, &cfg), 0.005);
    }

    #[test]
    fn random_errors_give_negative_rate() {
        let cfg = PostprocessingConfig::default();
        assert_eq!(kp_rate(0.01, 0.5, 0.5, &cfg), 0.0);
        let signed = kp_rate(0.01, 0.5, 0.5, &cfg.signed());
        assert_relative_eq!(signed, 0.5 * 0.01 * -1.22, max_relative = 1e-14);
    }

    #[test]
    fn rate_at_30db_by_hand() {
        let cfg = PostprocessingConfig::default();
        let scn = ChannelScenario::new(Placement::SourceInMiddle, 30.0).unwrap();
        let src = SourceParams::new(0.05).unwrap();
        let point = one_way_key_rate(&src, &scn, defaults::MISALIGNMENT_ERROR, &cfg).unwrap();

        // recompute everything from the printed formulas
        let eta = 0.145 * 10f64.powf(-1.5);
        let (l, y0, ed) = (0.05f64, 6.02e-6f64, 0.015f64);
        let q = 1.0 - 2.0 * (1.0 - y0) / (1.0 + eta * l).powi(2)
            + (1.0 - y0).powi(2) / (1.0 + 2.0 * eta * l - eta * eta * l).powi(2);
        let eq = 0.5 * q
            - 2.0 * (0.5 - ed) * eta * eta * l * (1.0 + l)
                / ((1.0 + eta * l).powi(2) * (1.0 + 2.0 * eta * l - eta * eta * l));
        let e = eq / q;
        let h = -e * e.log2() - (1.0 - e) * (1.0 - e).log2();
        let r = 0.5 * q * (1.0 - 1.22 * h - h);
        assert_relative_eq!(point.gain, q, max_relative = 1e-8);
        assert_relative_eq!(point.qber, e, max_relative = 1e-8);
        assert_relative_eq!(point.rate, r, max_relative = 1e-7);
        assert_eq!(point.scheme, Scheme::EntanglementMiddle);
    }

    #[test]
    fn dark_source_gives_zero_rate() {
        let cfg = PostprocessingConfig::default();
        let mut scn = ChannelScenario::new(Placement::SourceInMiddle, 10.0).unwrap();
        scn.y0_side = 0.0;
        let point = one_way_key_rate(&SourceParams::new(0.0).unwrap(), &scn, 0.015, &cfg).unwrap();
        assert_eq!(point.rate, 0.0);
    }

    #[test]
    fn small_lambda_rate_is_gain_limited() {
        let cfg = PostprocessingConfig::default();
        let perfect = SetupParams::new(
            SideParams::new(1.0, 0.0).unwrap(),
            SideParams::new(1.0, 0.0).unwrap(),
            0.0,
        )
        .unwrap();
        let lambda = 1e-6;
        let (rate, _) = one_way_rate(&SourceParams::new(lambda).unwrap(), &perfect, &cfg).unwrap();
        assert_relative_eq!(rate, 0.5 * 2.0 * lambda, max_relative = 1e-3);
    }

    #[test]
    fn scheme_labels_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.label().parse::<Scheme>().unwrap(), s);
        }
        assert!("bb84".parse::<Scheme>().is_err());
    }
}
