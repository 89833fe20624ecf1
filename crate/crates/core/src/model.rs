//! Photon-pair statistics, detection, gain and QBER of an entangled PDC source.
//!
//! The source emits `n` photon pairs with probability `(n+1) λⁿ / (1+λ)^(n+2)`.
//! Each side detects with a threshold detector pair; every photon is detected
//! independently with the side's overall transmittance, and each side has an
//! independent background click probability. Everything here is available both
//! as a truncated series over `n` and as a closed form.
//!
//! Powers of `1 - η` are evaluated through `ln(1 - η)` with `exp_m1` so that
//! differences such as `(1-η)^a - (1-η)^b` stay accurate at very low
//! transmittance (high channel loss).

use crate::error::{check_range, Error, Result};

/// Error probability of a random (background or double-click) outcome.
pub const E0: f64 = 0.5;

/// Operating point of the 144 km free-space experiment.
pub mod defaults {
    /// Detection efficiency inside each receiver box (η_Alice = η_Bob).
    pub const DETECTOR_EFFICIENCY: f64 = 0.145;
    /// Intrinsic detector (misalignment) error.
    pub const MISALIGNMENT_ERROR: f64 = 0.015;
    /// Background count rate, taken per side.
    pub const BACKGROUND_RATE: f64 = 6.02e-6;
    /// Pump repetition rate.
    pub const REPETITION_RATE_HZ: f64 = 249e6;
    /// Expected pair number used in the experiment.
    pub const EXPERIMENT_MU: f64 = 0.053;
}

/// Brightness of the PDC source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    lambda: f64,
}

impl SourceParams {
    /// `lambda` is half the expected number of pairs per pump pulse.
    pub fn new(lambda: f64) -> Result<Self> {
        check_range("lambda", lambda, 0.0, f64::INFINITY, ">= 0")?;
        Ok(Self { lambda })
    }

    /// From the expected pair number `mu = 2 lambda`.
    pub fn from_mu(mu: f64) -> Result<Self> {
        check_range("mu", mu, 0.0, f64::INFINITY, ">= 0")?;
        Self::new(mu / 2.0)
    }

    /// From the coupling constant `chi`, with `lambda = sinh^2(chi)`.
    pub fn from_coupling(chi: f64) -> Result<Self> {
        let s = chi.sinh();
        Self::new(s * s)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Expected number of photon pairs per pulse.
    pub fn mu(&self) -> f64 {
        2.0 * self.lambda
    }
}

/// One receiving side: overall transmittance (channel times detector) and
/// background click probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideParams {
    pub eta: f64,
    pub y0: f64,
}

impl SideParams {
    pub fn new(eta: f64, y0: f64) -> Result<Self> {
        check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
        check_range("y0", y0, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { eta, y0 })
    }

    fn survival(&self) -> Survival {
        Survival::new(self.eta)
    }

    /// Probability that this side registers at least one click given it
    /// holds `n` photons.
    fn click_probability(&self, n: u32) -> f64 {
        if n == 0 {
            return self.y0;
        }
        let ln_no_click = (-self.y0).ln_1p() + self.survival().ln * f64::from(n);
        -ln_no_click.exp_m1()
    }
}

/// Both sides plus the intrinsic detector error `e_d`.
///
/// The random-outcome error is fixed at [`E0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetupParams {
    pub alice: SideParams,
    pub bob: SideParams,
    pub e_d: f64,
}

impl SetupParams {
    pub fn new(alice: SideParams, bob: SideParams, e_d: f64) -> Result<Self> {
        SideParams::new(alice.eta, alice.y0)?;
        SideParams::new(bob.eta, bob.y0)?;
        check_range("e_d", e_d, 0.0, 0.5, "[0, 1/2]")?;
        Ok(Self { alice, bob, e_d })
    }

    pub fn e0(&self) -> f64 {
        E0
    }

    /// Vacuum contribution `Y_0 = Y_0A * Y_0B`.
    pub fn vacuum_yield(&self) -> f64 {
        self.alice.y0 * self.bob.y0
    }

    /// The same setup with Alice and Bob exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            alice: self.bob,
            bob: self.alice,
            e_d: self.e_d,
        }
    }
}

/// Where the source sits along the link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    SourceInMiddle,
    SourceAtAlice,
}

/// A link geometry: source placement, combined channel loss, receiver
/// efficiencies and per-side background rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelScenario {
    pub placement: Placement,
    pub total_loss_db: f64,
    pub eta_alice_intrinsic: f64,
    pub eta_bob_intrinsic: f64,
    pub y0_side: f64,
}

impl ChannelScenario {
    /// Scenario with the experimental receiver parameters.
    pub fn new(placement: Placement, total_loss_db: f64) -> Result<Self> {
        let scn = Self {
            placement,
            total_loss_db,
            eta_alice_intrinsic: defaults::DETECTOR_EFFICIENCY,
            eta_bob_intrinsic: defaults::DETECTOR_EFFICIENCY,
            y0_side: defaults::BACKGROUND_RATE,
        };
        scn.validate()?;
        Ok(scn)
    }

    pub fn validate(&self) -> Result<()> {
        check_range(
            "total_loss_db",
            self.total_loss_db,
            0.0,
            f64::INFINITY,
            ">= 0",
        )?;
        check_range("eta_alice", self.eta_alice_intrinsic, 0.0, 1.0, "[0, 1]")?;
        check_range("eta_bob", self.eta_bob_intrinsic, 0.0, 1.0, "[0, 1]")?;
        check_range("y0", self.y0_side, 0.0, 1.0, "[0, 1]")?;
        Ok(())
    }

    pub fn with_loss(&self, total_loss_db: f64) -> Self {
        Self {
            total_loss_db,
            ..*self
        }
    }

    /// Overall transmittances `(eta_A, eta_B)`; see [`scenario_etas`].
    pub fn etas(&self) -> (f64, f64) {
        scenario_etas(self)
    }

    pub fn setup(&self, e_d: f64) -> Result<SetupParams> {
        let (eta_a, eta_b) = self.etas();
        SetupParams::new(
            SideParams::new(eta_a, self.y0_side)?,
            SideParams::new(eta_b, self.y0_side)?,
            e_d,
        )
    }
}

/// Power transmittance of a loss given in dB.
pub fn transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Overall transmittances for a scenario.
///
/// With the source in the middle the combined loss is split evenly between the
/// arms; with the source at Alice all of it sits in Bob's arm.
pub fn scenario_etas(scn: &ChannelScenario) -> (f64, f64) {
    match scn.placement {
        Placement::SourceInMiddle => {
            let arm = transmittance(scn.total_loss_db / 2.0);
            (scn.eta_alice_intrinsic * arm, scn.eta_bob_intrinsic * arm)
        }
        Placement::SourceAtAlice => (
            scn.eta_alice_intrinsic,
            scn.eta_bob_intrinsic * transmittance(scn.total_loss_db),
        ),
    }
}

/// Powers of `1 - eta`, held as a logarithm.
#[derive(Debug, Clone, Copy)]
struct Survival {
    ln: f64,
}

impl Survival {
    fn new(eta: f64) -> Self {
        Self { ln: (-eta).ln_1p() }
    }

    /// `(1 - eta)^k`
    fn pow(self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            (self.ln * f64::from(k)).exp()
        }
    }

    /// `1 - (1 - eta)^k`
    fn complement(self, k: u32) -> f64 {
        if k == 0 {
            0.0
        } else {
            -(self.ln * f64::from(k)).exp_m1()
        }
    }

    /// `(1 - eta)^lo - (1 - eta)^hi` for `lo <= hi`; never negative.
    fn gap(self, lo: u32, hi: u32) -> f64 {
        self.pow(lo) * self.complement(hi - lo)
    }
}

/// Probability that the source emits exactly `n` photon pairs.
pub fn pair_pmf(n: u32, src: &SourceParams) -> f64 {
    let lambda = src.lambda;
    if lambda == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let n_f = f64::from(n);
    ((n_f + 1.0).ln() + n_f * lambda.ln() - (n_f + 2.0) * lambda.ln_1p()).exp()
}

/// Detection probability of an `n`-pair state without background:
/// `[1-(1-eta_A)^n][1-(1-eta_B)^n]`.
pub fn eta_overall_n(n: u32, setup: &SetupParams) -> f64 {
    setup.alice.survival().complement(n) * setup.bob.survival().complement(n)
}

/// Conditional coincidence probability given an `n`-pair emission,
/// background included.
pub fn yield_n(n: u32, setup: &SetupParams) -> f64 {
    setup.alice.click_probability(n) * setup.bob.click_probability(n)
}

/// Gain of the `n`-pair component.
pub fn gain_n(n: u32, src: &SourceParams, setup: &SetupParams) -> f64 {
    yield_n(n, setup) * pair_pmf(n, src)
}

/// Probability of a coincidence per pump pulse, in closed form.
pub fn overall_gain(src: &SourceParams, setup: &SetupParams) -> f64 {
    let lambda = src.lambda;
    let (ea, eb) = (setup.alice.eta, setup.bob.eta);
    let (ya, yb) = (setup.alice.y0, setup.bob.y0);

    // 1 - (1-Y0A)/a² - (1-Y0B)/b² + (1-Y0A)(1-Y0B)/c², regrouped into a sum of
    // nonnegative terms so nothing cancels at small eta or lambda.
    let a = 1.0 + ea * lambda;
    let b = 1.0 + eb * lambda;
    let c = 1.0 + (ea + eb - ea * eb) * lambda;
    let ab = a * b;
    let side_a = ea * lambda * (2.0 + ea * lambda) + ya;
    let side_b = eb * lambda * (2.0 + eb * lambda) + yb;
    let joint = ea * eb * lambda * (1.0 + lambda);

    side_a * side_b / (ab * ab) + (1.0 - ya) * (1.0 - yb) * joint * (ab + c) / (c * c * ab * ab)
}

/// Error probability of the `|n-m, m>_a |m, n-m>_b` term of the `n`-pair state.
pub fn error_nm(n: u32, m: u32, setup: &SetupParams) -> Result<f64> {
    if m > n {
        return Err(Error::OutcomeOutOfRange { n, m });
    }
    let y = yield_n(n, setup);
    if y <= 0.0 {
        return Err(Error::ZeroYield { n });
    }
    let (lo, hi) = (m.min(n - m), m.max(n - m));
    let signal = setup.alice.survival().gap(lo, hi) * setup.bob.survival().gap(lo, hi);
    Ok(E0 - (E0 - setup.e_d) * signal / y)
}

/// Average error probability of the `n`-pair state, `n >= 1`.
pub fn error_n(n: u32, setup: &SetupParams) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter {
            name: "n",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let y = yield_n(n, setup);
    if y <= 0.0 {
        return Err(Error::ZeroYield { n });
    }
    Ok(error_yield_n(n, setup) / y)
}

/// `e_n * Y_n`, defined for every `n` including vacuum and zero yield.
pub fn error_yield_n(n: u32, setup: &SetupParams) -> f64 {
    let bracket = multi_pair_bracket(n, setup.alice.survival(), setup.bob.survival());
    E0 * yield_n(n, setup) - 2.0 * (E0 - setup.e_d) * bracket / f64::from(n + 1)
}

/// `[1-(x y)^(n+1)]/[1-x y] - [x^(n+1) - y^(n+1)]/[x - y]` with `x = 1-eta_A`,
/// `y = 1-eta_B`, i.e. half the sum over `m` of the signal terms of `e_nm`.
fn multi_pair_bracket(n: u32, sa: Survival, sb: Survival) -> f64 {
    let first = geometric_sum(sa.ln + sb.ln, n);
    let second = mixed_power_sum(sa, sb, n);
    let diff = first - second;
    if diff > 1e-3 * first {
        return diff;
    }
    // Both sums agree to first order in eta; fall back to the pairwise form,
    // whose terms are all nonnegative.
    (0..)
        .take_while(|&m| 2 * m < n)
        .map(|m| sa.gap(m, n - m) * sb.gap(m, n - m))
        .sum()
}

/// `sum_{j=0}^{n} r^j` for `r = exp(ln_r) <= 1`.
fn geometric_sum(ln_r: f64, n: u32) -> f64 {
    if ln_r == f64::NEG_INFINITY {
        1.0
    } else if ln_r == 0.0 {
        f64::from(n + 1)
    } else {
        (ln_r * f64::from(n + 1)).exp_m1() / ln_r.exp_m1()
    }
}

/// `sum_{j=0}^{n} x^j y^(n-j)`, i.e. `(x^(n+1) - y^(n+1)) / (x - y)` with its
/// `x = y` limit `(n+1) x^n`.
fn mixed_power_sum(sa: Survival, sb: Survival, n: u32) -> f64 {
    // Symmetric in x and y: order so that x <= y.
    let (small, large) = if sa.ln <= sb.ln { (sa, sb) } else { (sb, sa) };
    if large.ln == f64::NEG_INFINITY {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if small.ln == f64::NEG_INFINITY {
        return large.pow(n);
    }
    let d = small.ln - large.ln;
    if d == 0.0 {
        return f64::from(n + 1) * large.pow(n);
    }
    large.pow(n) * (d * f64::from(n + 1)).exp_m1() / d.exp_m1()
}

/// Overall gain together with the overall QBER.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainQber {
    pub gain: f64,
    pub qber: f64,
}

impl GainQber {
    /// `E_lambda * Q_lambda`
    pub fn error_gain(&self) -> f64 {
        self.qber * self.gain
    }
}

/// `E_lambda Q_lambda` in closed form.
pub fn overall_error_gain(src: &SourceParams, setup: &SetupParams) -> f64 {
    let lambda = src.lambda;
    let (ea, eb) = (setup.alice.eta, setup.bob.eta);
    let a = 1.0 + ea * lambda;
    let b = 1.0 + eb * lambda;
    let c = 1.0 + (ea + eb - ea * eb) * lambda;
    let signal = ea * eb * lambda * (1.0 + lambda) / (a * b * c);
    E0 * overall_gain(src, setup) - 2.0 * (E0 - setup.e_d) * signal
}

/// Overall gain and QBER; fails when the gain vanishes.
pub fn overall_qber(src: &SourceParams, setup: &SetupParams) -> Result<GainQber> {
    let gain = overall_gain(src, setup);
    if gain <= 0.0 {
        return Err(Error::DegenerateGain);
    }
    let qber = overall_error_gain(src, setup) / gain;
    if !qber.is_finite() {
        return Err(Error::NonFinite {
            what: "overall QBER",
        });
    }
    Ok(GainQber { gain, qber })
}

/// Largest pair number retained in truncated series.
pub const MAX_SERIES_ORDER: u32 = 500;

/// Truncation order: the first `n` past the mode with `P(n) < 1e-15`,
/// capped at [`MAX_SERIES_ORDER`].
pub fn truncation_order(src: &SourceParams) -> u32 {
    let mut n = 0;
    while n < MAX_SERIES_ORDER {
        if f64::from(n) > src.lambda && pair_pmf(n, src) < 1e-15 {
            break;
        }
        n += 1;
    }
    n
}

/// `sum_{n=0}^{n_max} Q_n`
pub fn series_gain(src: &SourceParams, setup: &SetupParams, n_max: u32) -> f64 {
    (0..=n_max).map(|n| gain_n(n, src, setup)).sum()
}

/// `sum_{n=0}^{n_max} e_n Y_n P(n)`
pub fn series_error_gain(src: &SourceParams, setup: &SetupParams, n_max: u32) -> f64 {
    (0..=n_max)
        .map(|n| error_yield_n(n, setup) * pair_pmf(n, src))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(ea: f64, eb: f64, y0: f64, e_d: f64) -> SetupParams {
        SetupParams::new(
            SideParams::new(ea, y0).unwrap(),
            SideParams::new(eb, y0).unwrap(),
            e_d,
        )
        .unwrap()
    }

    fn baseline(loss_db: f64) -> SetupParams {
        ChannelScenario::new(Placement::SourceInMiddle, loss_db)
            .unwrap()
            .setup(defaults::MISALIGNMENT_ERROR)
            .unwrap()
    }

    #[test]
    fn vacuum_probability() {
        let dark = SourceParams::new(0.0).unwrap();
        assert_eq!(pair_pmf(0, &dark), 1.0);
        assert_eq!(pair_pmf(3, &dark), 0.0);
        let src = SourceParams::new(0.3).unwrap();
        assert_relative_eq!(
            pair_pmf(0, &src),
            1.0 / 1.3f64.powi(2),
            max_relative = 1e-15
        );
    }

    #[test]
    fn mean_pair_number_is_twice_lambda() {
        let src = SourceParams::new(0.0265).unwrap();
        let mean: f64 = (0..=500).map(|n| f64::from(n) * pair_pmf(n, &src)).sum();
        assert!((mean - 0.053).abs() < 1e-10);
        assert_eq!(src.mu(), 0.053);
    }

    #[test]
    fn coupling_conversion() {
        let src = SourceParams::from_coupling(0.5).unwrap();
        assert_relative_eq!(src.lambda(), 0.5f64.sinh().powi(2));
        assert!(SourceParams::new(-0.1).is_err());
    }

    #[test]
    fn overall_transmittance() {
        let s = setup(0.3, 0.7, 0.0, 0.0);
        assert_relative_eq!(eta_overall_n(1, &s), 0.21, max_relative = 1e-15);
        assert_eq!(eta_overall_n(4, &setup(1.0, 1.0, 0.0, 0.0)), 1.0);
        assert_relative_eq!(
            eta_overall_n(2, &setup(0.5, 0.5, 0.0, 0.0)),
            0.5625,
            max_relative = 1e-15
        );
    }

    #[test]
    fn yields() {
        let s = setup(0.2, 0.1, 1e-3, 0.0);
        assert_relative_eq!(yield_n(0, &s), 1e-6, max_relative = 1e-12);
        let clean = setup(0.2, 0.1, 0.0, 0.0);
        for n in 1..6 {
            assert_relative_eq!(
                yield_n(n, &clean),
                eta_overall_n(n, &clean),
                max_relative = 1e-14
            );
        }
        // direct substitution at the experimental parameters
        let t = setup(0.145, 0.145, 6.02e-6, 0.015);
        let side = 1.0 - (1.0 - 6.02e-6) * (1.0 - 0.145);
        assert_relative_eq!(yield_n(1, &t), side * side, max_relative = 1e-13);
    }

    #[test]
    fn dark_source_gain() {
        let dark = SourceParams::new(0.0).unwrap();
        let s = setup(0.3, 0.4, 2e-4, 0.01);
        assert_relative_eq!(gain_n(0, &dark, &s), 4e-8, max_relative = 1e-12);
        assert_eq!(gain_n(2, &dark, &s), 0.0);
        assert_relative_eq!(overall_gain(&dark, &s), 4e-8, max_relative = 1e-12);
    }

    #[test]
    fn perfect_detection_gain() {
        let src = SourceParams::new(0.4).unwrap();
        let s = setup(1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(
            overall_gain(&src, &s),
            1.0 - 1.0 / 1.4f64.powi(2),
            max_relative = 1e-15
        );
    }

    #[test]
    fn gain_series_matches_closed_form_at_40db() {
        let src = SourceParams::new(0.0265).unwrap();
        let s = baseline(40.0);
        let closed = overall_gain(&src, &s);
        let series = series_gain(&src, &s, 500);
        assert_relative_eq!(series, closed, max_relative = 1e-10);
    }

    #[test]
    fn error_nm_edge_cases() {
        let perfect = setup(1.0, 1.0, 0.0, 0.03);
        assert_relative_eq!(
            error_nm(1, 0, &perfect).unwrap(),
            0.03,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            error_nm(2, 0, &perfect).unwrap(),
            0.03,
            max_relative = 1e-14
        );
        let lossy = setup(0.2, 0.6, 1e-4, 0.03);
        assert_eq!(error_nm(2, 1, &lossy).unwrap(), E0);
        assert!(matches!(
            error_nm(2, 3, &lossy),
            Err(Error::OutcomeOutOfRange { .. })
        ));
        let blind = setup(0.0, 0.5, 0.0, 0.0);
        assert!(matches!(
            error_nm(1, 0, &blind),
            Err(Error::ZeroYield { n: 1 })
        ));
    }

    #[test]
    fn error_n_edge_cases() {
        let s = setup(0.3, 0.05, 0.0, 0.02);
        assert_relative_eq!(error_n(1, &s).unwrap(), 0.02, max_relative = 1e-12);
        let perfect = setup(1.0, 1.0, 0.0, 0.0);
        assert_relative_eq!(
            error_n(2, &perfect).unwrap(),
            1.0 / 6.0,
            max_relative = 1e-14
        );
        let misaligned = setup(1.0, 1.0, 0.0, 0.04);
        assert_relative_eq!(
            error_n(2, &misaligned).unwrap(),
            (2.0 * 0.04 + E0) / 3.0,
            max_relative = 1e-14
        );
        assert!(error_n(0, &s).is_err());
    }

    #[test]
    fn error_n_is_mean_over_outcomes() {
        let s = baseline(0.0);
        for n in [1u32, 2, 3, 5, 8] {
            let mean = (0..=n).map(|m| error_nm(n, m, &s).unwrap()).sum::<f64>() / f64::from(n + 1);
            assert!((error_n(n, &s).unwrap() - mean).abs() < 1e-12, "n = {n}");
        }
        let asym = setup(0.3, 0.02, 1e-5, 0.015);
        for n in [1u32, 2, 5, 30] {
            let mean =
                (0..=n).map(|m| error_nm(n, m, &asym).unwrap()).sum::<f64>() / f64::from(n + 1);
            assert!((error_n(n, &asym).unwrap() - mean).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn error_n_continuous_across_equal_etas() {
        for n in [2u32, 5, 20] {
            let at = error_n(n, &setup(0.2, 0.2, 1e-5, 0.015)).unwrap();
            for d in [1e-6, 1e-9, 1e-13] {
                let near = error_n(n, &setup(0.2, 0.2 + d, 1e-5, 0.015)).unwrap();
                assert!((near - at).abs() < 10.0 * d + 1e-12, "n = {n}, d = {d}");
            }
        }
    }

    #[test]
    fn random_detector_gives_half_qber() {
        let src = SourceParams::new(0.1).unwrap();
        let r = overall_qber(&src, &setup(0.1, 0.3, 1e-5, 0.5)).unwrap();
        assert_relative_eq!(r.qber, 0.5, max_relative = 1e-14);
    }

    #[test]
    fn qber_without_losses() {
        let lambda = 0.2;
        let e_d = 0.03;
        let src = SourceParams::new(lambda).unwrap();
        let s = setup(1.0, 1.0, 0.0, e_d);
        let r = overall_qber(&src, &s).unwrap();
        let expected = E0 * r.gain - (1.0 - 2.0 * e_d) * lambda / (1.0 + lambda).powi(2);
        assert_relative_eq!(r.error_gain(), expected, max_relative = 1e-13);
    }

    #[test]
    fn degenerate_qber_is_rejected() {
        let dark = SourceParams::new(0.0).unwrap();
        assert_eq!(
            overall_qber(&dark, &setup(0.1, 0.1, 0.0, 0.0)),
            Err(Error::DegenerateGain)
        );
    }

    #[test]
    fn scenario_transmittances() {
        let (a, b) = ChannelScenario::new(Placement::SourceInMiddle, 0.0)
            .unwrap()
            .etas();
        assert_eq!((a, b), (0.145, 0.145));
        let (a, b) = ChannelScenario::new(Placement::SourceInMiddle, 20.0)
            .unwrap()
            .etas();
        assert_relative_eq!(a, 0.0145, max_relative = 1e-14);
        assert_relative_eq!(b, 0.0145, max_relative = 1e-14);
        let (a, b) = ChannelScenario::new(Placement::SourceAtAlice, 20.0)
            .unwrap()
            .etas();
        assert_eq!(a, 0.145);
        assert_relative_eq!(b, 0.00145, max_relative = 1e-14);
    }

    #[test]
    fn truncation_order_is_bounded() {
        assert!(truncation_order(&SourceParams::new(0.0265).unwrap()) < 20);
        assert_eq!(
            truncation_order(&SourceParams::new(50.0).unwrap()),
            MAX_SERIES_ORDER
        );
        let src = SourceParams::new(2.0).unwrap();
        let tail: f64 = (truncation_order(&src) + 1..5000)
            .map(|n| pair_pmf(n, &src))
            .sum();
        assert!(tail < 1e-12);
    }
}
