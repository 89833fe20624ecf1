//! Event-level Monte Carlo simulation of the detection process.
//!
//! Each pump pulse draws a pair number `n`, projects the `n`-pair state onto
//! one of its `n + 1` polarization patterns, and sends every photon through a
//! lossy channel into a two-detector threshold receiver. The simulator never
//! touches the closed forms in [`crate::model`], so agreement between the two
//! is a genuine check.
//!
//! Samples are processed in fixed-size chunks, each with its own ChaCha8
//! stream, so results do not depend on how chunks are scheduled.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    overall_qber, ChannelScenario, Placement, SetupParams, SideParams, SourceParams,
};

/// Samples per independently seeded chunk.
pub const CHUNK_SAMPLES: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Loss,
    /// Both sides saw exactly one detector fire.
    SingleClickCoincidence,
    /// Both sides clicked and at least one of them saw both detectors fire.
    DoubleClickCoincidence,
}

/// Outcome of one pulse. Bits are `false` for horizontal, `true` for
/// vertical, and present only when both sides clicked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventOutcome {
    pub kind: EventKind,
    pub alice_bit: Option<bool>,
    pub bob_bit: Option<bool>,
    pub is_error: Option<bool>,
}

impl EventOutcome {
    const LOSS: Self = Self {
        kind: EventKind::Loss,
        alice_bit: None,
        bob_bit: None,
        is_error: None,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SideClick {
    Silent,
    Single(bool),
    Double,
}

/// Threshold receiver with `horizontal` and `vertical` photons incident.
fn detect_side<R: Rng + ?Sized>(
    rng: &mut R,
    side: &SideParams,
    horizontal: u32,
    vertical: u32,
) -> SideClick {
    let ln_miss = (-side.eta).ln_1p();
    let mut fires = |k: u32| k > 0 && rng.random_bool(-(ln_miss * f64::from(k)).exp_m1());
    let mut h = fires(horizontal);
    let mut v = fires(vertical);
    if rng.random_bool(side.y0) {
        if rng.random_bool(0.5) {
            h = true;
        } else {
            v = true;
        }
    }
    match (h, v) {
        (false, false) => SideClick::Silent,
        (true, false) => SideClick::Single(false),
        (false, true) => SideClick::Single(true),
        (true, true) => SideClick::Double,
    }
}

/// One pulse with a fixed pair number `n` and polarization pattern `m`:
/// Alice holds `n - m` horizontal and `m` vertical photons, Bob the
/// complement.
pub fn sample_event_with_pattern<R: Rng + ?Sized>(
    rng: &mut R,
    n: u32,
    m: u32,
    setup: &SetupParams,
) -> Result<EventOutcome> {
    if m > n {
        return Err(Error::OutcomeOutOfRange { n, m });
    }
    let alice = detect_side(rng, &setup.alice, n - m, m);
    let bob = detect_side(rng, &setup.bob, m, n - m);
    let resolve = |rng: &mut R, click: SideClick| match click {
        SideClick::Single(bit) => bit,
        _ => rng.random_bool(0.5),
    };
    let (kind, a, mut b) = match (alice, bob) {
        (SideClick::Silent, _) | (_, SideClick::Silent) => return Ok(EventOutcome::LOSS),
        (SideClick::Single(a), SideClick::Single(b)) => (EventKind::SingleClickCoincidence, a, b),
        (a, b) => (
            EventKind::DoubleClickCoincidence,
            resolve(rng, a),
            resolve(rng, b),
        ),
    };
    if kind == EventKind::SingleClickCoincidence && rng.random_bool(setup.e_d) {
        b = !b;
    }
    Ok(EventOutcome {
        kind,
        alice_bit: Some(a),
        bob_bit: Some(b),
        is_error: Some(a == b),
    })
}

/// One pulse with a fixed pair number; the pattern is drawn uniformly.
pub fn sample_event_with_pairs<R: Rng + ?Sized>(
    rng: &mut R,
    n: u32,
    setup: &SetupParams,
) -> EventOutcome {
    let m = rng.random_range(0..=n);
    sample_event_with_pattern(rng, n, m, setup).expect("pattern drawn in range")
}

/// Pair-number sampler: the sum of two geometric variables with success
/// probability `1/(1+lambda)` has exactly the thermal pair statistics.
#[derive(Debug, Clone, Copy)]
struct PairSampler(Geometric);

impl PairSampler {
    fn new(src: &SourceParams) -> Self {
        Self(Geometric::new(1.0 / (1.0 + src.lambda())).expect("probability in (0, 1]"))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let n = self.0.sample(rng).saturating_add(self.0.sample(rng));
        u32::try_from(n).unwrap_or(u32::MAX)
    }
}

/// One pump pulse of the source.
pub fn sample_event<R: Rng + ?Sized>(
    rng: &mut R,
    src: &SourceParams,
    setup: &SetupParams,
) -> EventOutcome {
    let n = PairSampler::new(src).sample(rng);
    sample_event_with_pairs(rng, n, setup)
}

/// Empirical gain and QBER with binomial standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub samples: u64,
    pub coincidences: u64,
    pub errors: u64,
    pub gain: f64,
    pub qber: f64,
    pub gain_se: f64,
    pub qber_se: f64,
}

impl Estimate {
    fn from_counts(samples: u64, coincidences: u64, errors: u64) -> Result<Self> {
        if coincidences == 0 {
            return Err(Error::NoCoincidences { samples });
        }
        let gain = coincidences as f64 / samples as f64;
        let qber = errors as f64 / coincidences as f64;
        Ok(Self {
            samples,
            coincidences,
            errors,
            gain,
            qber,
            gain_se: (gain * (1.0 - gain) / samples as f64).sqrt(),
            qber_se: (qber * (1.0 - qber) / coincidences as f64).sqrt(),
        })
    }
}

/// Count coincidences and errors over `samples` draws of `draw`.
fn run_chunks<F>(samples: u64, seed: u64, draw: F) -> (u64, u64)
where
    F: Fn(&mut ChaCha8Rng) -> EventOutcome + Sync,
{
    let chunks = samples.div_ceil(CHUNK_SAMPLES);
    (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk);
            let len = CHUNK_SAMPLES.min(samples - chunk * CHUNK_SAMPLES);
            (0..len).fold((0u64, 0u64), |(c, e), _| match draw(&mut rng).is_error {
                Some(err) => (c + 1, e + u64::from(err)),
                None => (c, e),
            })
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn check_samples(samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidParameter {
            name: "n_samples",
            value: 0.0,
            expected: ">= 1",
        });
    }
    Ok(())
}

/// Simulate `samples` pump pulses.
pub fn estimate(
    src: &SourceParams,
    setup: &SetupParams,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_samples(samples)?;
    let pairs = PairSampler::new(src);
    let (c, e) = run_chunks(samples, seed, |rng| {
        let n = pairs.sample(rng);
        sample_event_with_pairs(rng, n, setup)
    });
    Estimate::from_counts(samples, c, e)
}

/// Simulate `samples` pulses that all carry exactly `n` pairs.
pub fn estimate_forced(n: u32, setup: &SetupParams, samples: u64, seed: u64) -> Result<Estimate> {
    check_samples(samples)?;
    let (c, e) = run_chunks(samples, seed, |rng| sample_event_with_pairs(rng, n, setup));
    Estimate::from_counts(samples, c, e)
}

/// One point of the validation grid (source in the middle).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationCell {
    pub lambda: f64,
    pub loss_db: f64,
    pub e_d: f64,
}

pub const GRID_LAMBDAS: [f64; 3] = [0.0265, 0.1, 0.5];
pub const GRID_LOSSES_DB: [f64; 3] = [0.0, 10.0, 20.0];
pub const GRID_MISALIGNMENTS: [f64; 3] = [0.0, 0.015, 0.1];

/// The 27-cell grid over brightness, loss and misalignment.
pub fn default_grid() -> Vec<ValidationCell> {
    GRID_LAMBDAS
        .iter()
        .flat_map(|&lambda| {
            GRID_LOSSES_DB.iter().flat_map(move |&loss_db| {
                GRID_MISALIGNMENTS.iter().map(move |&e_d| ValidationCell {
                    lambda,
                    loss_db,
                    e_d,
                })
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub samples: u64,
    pub seed: u64,
    /// Largest accepted `|z|`.
    pub z_max: f64,
    /// Cells with fewer observed coincidences are reported, not judged.
    pub min_coincidences: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            samples: 10_000_000,
            seed: 42,
            z_max: 3.0,
            min_coincidences: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Pass,
    PassAfterRetry,
    Fail,
    InsufficientStatistics,
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Pass => "pass",
            CellStatus::PassAfterRetry => "pass-retry",
            CellStatus::Fail => "FAIL",
            CellStatus::InsufficientStatistics => "insufficient-statistics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellReport {
    pub cell: ValidationCell,
    pub model_gain: f64,
    pub model_qber: f64,
    /// Last estimate taken (the retry, if one was needed).
    pub estimate: Option<Estimate>,
    pub z_gain: f64,
    pub z_qber: f64,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub cells: Vec<CellReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.cells.iter().all(|c| c.status != CellStatus::Fail)
    }

    pub fn count(&self, status: CellStatus) -> usize {
        self.cells.iter().filter(|c| c.status == status).count()
    }
}

/// Seed for `cell` and `attempt`; `seed_from_u64` scrambles it further.
fn cell_seed(seed: u64, cell: usize, attempt: u64) -> u64 {
    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    seed ^ (cell as u64 + 1).wrapping_mul(GOLDEN) ^ attempt.wrapping_mul(GOLDEN.rotate_left(17))
}

/// z-scores of one estimate against the model, with the model's own
/// binomial spread as the scale.
fn z_scores(est: &Estimate, gain: f64, qber: f64) -> (f64, f64) {
    let n = est.samples as f64;
    let sigma_gain = (gain * (1.0 - gain) / n).sqrt();
    let sigma_qber = (qber * (1.0 - qber) / (n * gain)).sqrt();
    let z = |diff: f64, sigma: f64| {
        if sigma > 0.0 {
            diff / sigma
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    (
        z(est.gain - gain, sigma_gain),
        z(est.qber - qber, sigma_qber),
    )
}

/// Check one cell, with a single reseeded retry on failure.
pub fn validate_cell(
    cell: ValidationCell,
    index: usize,
    base: &ChannelScenario,
    cfg: &ValidationConfig,
) -> Result<CellReport> {
    let scn = ChannelScenario {
        placement: Placement::SourceInMiddle,
        total_loss_db: cell.loss_db,
        ..*base
    };
    scn.validate()?;
    let setup = scn.setup(cell.e_d)?;
    let src = SourceParams::new(cell.lambda)?;
    let model = overall_qber(&src, &setup)?;
    let mut report = CellReport {
        cell,
        model_gain: model.gain,
        model_qber: model.qber,
        estimate: None,
        z_gain: f64::NAN,
        z_qber: f64::NAN,
        status: CellStatus::InsufficientStatistics,
    };
    for attempt in 0..2u64 {
        let est = match estimate(
            &src,
            &setup,
            cfg.samples,
            cell_seed(cfg.seed, index, attempt),
        ) {
            Ok(est) => est,
            Err(Error::NoCoincidences { .. }) => return Ok(report),
            Err(e) => return Err(e),
        };
        let (zg, zq) = z_scores(&est, model.gain, model.qber);
        report.estimate = Some(est);
        report.z_gain = zg;
        report.z_qber = zq;
        if est.coincidences < cfg.min_coincidences {
            report.status = CellStatus::InsufficientStatistics;
            return Ok(report);
        }
        if zg.abs() <= cfg.z_max && zq.abs() <= cfg.z_max {
            report.status = if attempt == 0 {
                CellStatus::Pass
            } else {
                CellStatus::PassAfterRetry
            };
            return Ok(report);
        }
        report.status = CellStatus::Fail;
    }
    Ok(report)
}

/// Run the full grid. Cells are processed in order; each cell's samples are
/// spread over threads.
pub fn validate_grid(
    cells: &[ValidationCell],
    base: &ChannelScenario,
    cfg: &ValidationConfig,
) -> Result<ValidationReport> {
    cells
        .iter()
        .enumerate()
        .map(|(i, &cell)| validate_cell(cell, i, base, cfg))
        .collect::<Result<Vec<_>>>()
        .map(|cells| ValidationReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(eta_a: f64, eta_b: f64, y0: f64, e_d: f64) -> SetupParams {
        SetupParams::new(
            SideParams::new(eta_a, y0).unwrap(),
            SideParams::new(eta_b, y0).unwrap(),
            e_d,
        )
        .unwrap()
    }

    #[test]
    fn vacuum_source_is_always_lost() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = SourceParams::new(0.0).unwrap();
        let s = setup(0.5, 0.5, 0.0, 0.1);
        for _ in 0..10_000 {
            assert_eq!(sample_event(&mut rng, &src, &s).kind, EventKind::Loss);
        }
    }

    #[test]
    fn single_pair_is_perfectly_anticorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = setup(1.0, 1.0, 0.0, 0.0);
        for _ in 0..10_000 {
            let ev = sample_event_with_pairs(&mut rng, 1, &s);
            assert_eq!(ev.kind, EventKind::SingleClickCoincidence);
            assert_eq!(ev.is_error, Some(false));
            assert_ne!(ev.alice_bit, ev.bob_bit);
        }
    }

    #[test]
    fn bits_present_iff_coincidence() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = SourceParams::new(0.8).unwrap();
        let s = setup(0.3, 0.4, 0.05, 0.05);
        for _ in 0..10_000 {
            let ev = sample_event(&mut rng, &src, &s);
            let present = ev.kind != EventKind::Loss;
            assert_eq!(ev.alice_bit.is_some(), present);
            assert_eq!(ev.bob_bit.is_some(), present);
            assert_eq!(ev.is_error.is_some(), present);
        }
    }

    #[test]
    fn pattern_out_of_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(sample_event_with_pattern(&mut rng, 2, 3, &setup(1.0, 1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn seeded_runs_are_identical() {
        let src = SourceParams::new(0.3).unwrap();
        let s = setup(0.2, 0.2, 1e-3, 0.015);
        let a = estimate(&src, &s, 3 * CHUNK_SAMPLES / 2, 9).unwrap();
        let b = estimate(&src, &s, 3 * CHUNK_SAMPLES / 2, 9).unwrap();
        assert_eq!(a, b);
        let c = estimate(&src, &s, 3 * CHUNK_SAMPLES / 2, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn no_coincidences_is_an_error() {
        let src = SourceParams::new(0.0).unwrap();
        let s = setup(0.5, 0.5, 0.0, 0.0);
        assert!(matches!(
            estimate(&src, &s, 1000, 1),
            Err(Error::NoCoincidences { samples: 1000 })
        ));
        assert!(estimate(&src, &s, 0, 1).is_err());
    }

    #[test]
    fn grid_has_27_distinct_cells() {
        let g = default_grid();
        assert_eq!(g.len(), 27);
        let seeds: std::collections::HashSet<u64> = (0..27).map(|i| cell_seed(42, i, 0)).collect();
        assert_eq!(seeds.len(), 27);
    }
}
