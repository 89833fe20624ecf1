//! Brightness optimization and the small-`eta_B` analysis of the optimal
//! expected pair number.

use crate::error::{Error, Result};
use crate::rates::h2;

/// Search interval and absolute tolerance for `lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tolerance: f64,
}

impl SearchBounds {
    pub fn new(lambda_min: f64, lambda_max: f64, tolerance: f64) -> Result<Self> {
        if !(lambda_min > 0.0 && lambda_min.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda_min",
                value: lambda_min,
                expected: "> 0",
            });
        }
        if !(lambda_max > lambda_min && lambda_max.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lambda_max",
                value: lambda_max,
                expected: "> lambda_min",
            });
        }
        if tolerance.is_nan() || tolerance <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "tolerance",
                value: tolerance,
                expected: "> 0",
            });
        }
        Ok(Self {
            lambda_min,
            lambda_max,
            tolerance,
        })
    }

    /// Bounds on the expected pair number `mu = 2 lambda`.
    pub fn from_mu(mu_min: f64, mu_max: f64, tolerance: f64) -> Result<Self> {
        Self::new(mu_min / 2.0, mu_max / 2.0, tolerance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub lambda: f64,
    pub rate: f64,
    /// The maximum sits on (within tolerance of) one of the search bounds.
    pub on_boundary: bool,
}

const COARSE_POINTS: usize = 64;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximize `rate_fn` over `lambda`: coarse log-spaced scan, then golden
/// section inside the bracket around the best grid point.
pub fn optimize_lambda<F>(rate_fn: F, bounds: &SearchBounds) -> Result<Optimum>
where
    F: Fn(f64) -> f64,
{
    let eval = |x: f64| -> Result<f64> {
        let r = rate_fn(x);
        if r.is_finite() {
            Ok(r)
        } else {
            Err(Error::NonFinite {
                what: "rate function",
            })
        }
    };

    let (lo, hi) = (bounds.lambda_min, bounds.lambda_max);
    let log_step = (hi / lo).ln() / (COARSE_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..COARSE_POINTS)
        .map(|i| {
            if i == COARSE_POINTS - 1 {
                hi
            } else {
                lo * (log_step * i as f64).exp()
            }
        })
        .collect();
    let values = grid.iter().map(|&x| eval(x)).collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > values[b] { i } else { b });

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(COARSE_POINTS - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > bounds.tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let f_mid = eval(mid)?;

    let (lambda, rate) = [(grid[best], values[best]), (c, fc), (d, fd), (mid, f_mid)]
        .into_iter()
        .fold((grid[best], values[best]), |acc, p| {
            if p.1 > acc.1 {
                p
            } else {
                acc
            }
        });
    let on_boundary = lambda - lo <= bounds.tolerance || hi - lambda <= bounds.tolerance;
    Ok(Optimum {
        lambda,
        rate,
        on_boundary,
    })
}

/// Largest loss in `[start, stop]` where `rate_at(loss) > threshold`,
/// located by a scan with `step` followed by bisection to `resolution`.
/// Returns `None` when the rate is below threshold already at `start`.
pub fn tolerable_loss<F>(
    rate_at: F,
    start: f64,
    stop: f64,
    step: f64,
    threshold: f64,
) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    const RESOLUTION: f64 = 1e-3;
    if rate_at(start)? <= threshold {
        return Ok(None);
    }
    let mut good = start;
    let mut bad = None;
    let mut loss = start;
    while loss < stop {
        loss = (loss + step).min(stop);
        if rate_at(loss)? > threshold {
            good = loss;
        } else {
            bad = Some(loss);
            break;
        }
    }
    let Some(mut bad) = bad else {
        return Ok(Some(good));
    };
    while bad - good > RESOLUTION {
        let mid = 0.5 * (good + bad);
        if rate_at(mid)? > threshold {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok(Some(good))
}

/// `Q_lambda ~ 2 eta_B lambda [1 - (1-eta_A)/(1+eta_A lambda)^3]`, valid for
/// small `eta_B` and negligible background.
pub fn approx_gain(lambda: f64, eta_a: f64, eta_b: f64) -> f64 {
    2.0 * eta_b * lambda * (1.0 - (1.0 - eta_a) / (1.0 + eta_a * lambda).powi(3))
}

/// Small-`eta_B` QBER approximation.
pub fn approx_qber(lambda: f64, eta_a: f64, e_d: f64) -> f64 {
    let num = (1.0 - 2.0 * e_d) * (1.0 + lambda) * (1.0 + eta_a * lambda);
    let den =
        2.0 * (1.0 + 3.0 * lambda + 3.0 * eta_a * lambda * lambda + eta_a * eta_a * lambda.powi(3));
    0.5 - num / den
}

/// Limiting regimes of Alice's transmittance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `eta_A ~ 1`
    EtaANearOne,
    /// `eta_A << 1`
    EtaASmall,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::EtaANearOne => "eta_a_near_one",
            Regime::EtaASmall => "eta_a_small",
        }
    }

    /// Normalized gain (gain divided by `2 eta_B`, resp. `2 eta_A eta_B`) and
    /// QBER in this regime.
    pub fn gain_qber(&self, lambda: f64, e_d: f64) -> (f64, f64) {
        match self {
            Regime::EtaANearOne => (lambda, (2.0 * e_d + lambda) / (2.0 + 2.0 * lambda)),
            Regime::EtaASmall => (
                lambda * (1.0 + 3.0 * lambda),
                (e_d + lambda + e_d * lambda) / (1.0 + 3.0 * lambda),
            ),
        }
    }
}

/// One-way rate in the given regime, up to the constant `q * 2 eta_B`
/// (resp. `q * 2 eta_A eta_B`) prefactor.
pub fn approx_rate(lambda: f64, e_d: f64, f_ec: f64, regime: Regime) -> f64 {
    let (gain, e) = regime.gain_qber(lambda, e_d);
    gain * (1.0 - (1.0 + f_ec) * h2(e.clamp(0.0, 1.0)))
}

/// Left-hand side of the stationarity condition `d approx_rate / d lambda = 0`
/// for the chosen regime (positive below the optimum, negative above).
pub fn stationarity_residual(lambda: f64, e_d: f64, f_ec: f64, regime: Regime) -> f64 {
    let (_, e) = regime.gain_qber(lambda, e_d);
    let e = e.clamp(f64::MIN_POSITIVE, 0.5);
    let log_odds = ((1.0 - e) / e).log2();
    let tail = 1.0 - (1.0 + f_ec) * h2(e);
    match regime {
        Regime::EtaANearOne => {
            tail - lambda * (1.0 + f_ec) * (1.0 - 2.0 * e_d) / (2.0 * (1.0 + lambda).powi(2))
                * log_odds
        }
        Regime::EtaASmall => {
            (1.0 + 6.0 * lambda) * tail
                - lambda * (1.0 + f_ec) * (1.0 - 2.0 * e_d) / (1.0 + 3.0 * lambda) * log_odds
        }
    }
}

/// Bracket scanned for the stationarity root.
pub const STATIONARITY_BRACKET: (f64, f64) = (1e-3, 5.0);
/// Bisection tolerance on `lambda`.
pub const STATIONARITY_TOLERANCE: f64 = 1e-6;

/// Root of [`stationarity_residual`] in `lambda`, or `None` when the residual
/// does not change sign from positive to negative inside the bracket.
pub fn stationary_lambda(e_d: f64, f_ec: f64, regime: Regime) -> Option<f64> {
    const SCAN: usize = 200;
    let (lo, hi) = STATIONARITY_BRACKET;
    let r = |x: f64| stationarity_residual(x, e_d, f_ec, regime);
    let ratio = (hi / lo).ln() / SCAN as f64;
    let mut a = lo;
    let mut ra = r(a);
    for i in 1..=SCAN {
        let b = if i == SCAN {
            hi
        } else {
            lo * (ratio * i as f64).exp()
        };
        let rb = r(b);
        if ra > 0.0 && rb <= 0.0 {
            let (mut left, mut right) = (a, b);
            while right - left > STATIONARITY_TOLERANCE {
                let mid = 0.5 * (left + right);
                if r(mid) > 0.0 {
                    left = mid;
                } else {
                    right = mid;
                }
            }
            return Some(0.5 * (left + right));
        }
        a = b;
        ra = rb;
    }
    None
}

/// A point on the optimal-`mu` curve; `mu_opt` is `None` where no sign change
/// of the stationarity residual exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalMu {
    pub e_d: f64,
    pub mu_opt: Option<f64>,
}

pub fn optimal_mu_curve(e_d_grid: &[f64], f_ec: f64, regime: Regime) -> Vec<OptimalMu> {
    e_d_grid
        .iter()
        .map(|&e_d| OptimalMu {
            e_d,
            mu_opt: stationary_lambda(e_d, f_ec, regime).map(|l| 2.0 * l),
        })
        .collect()
}
