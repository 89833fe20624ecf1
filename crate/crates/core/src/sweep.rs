//! Loss sweeps over the four schemes, CSV output and the built-in presets.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::comparison::{coherent_decoy_rate, triggering_pdc_decoy_rate};
use crate::config::{default_sweep, experiment_fluctuation, ConfigError};
use crate::error::Error;
use crate::finite_key::{finite_key_rate, FluctuationParams};
use crate::mc::ValidationConfig;
use crate::model::{ChannelScenario, Placement, SourceParams};
use crate::optimize::{optimal_mu_curve, optimize_lambda, Regime, SearchBounds};
use crate::rates::{PostprocessingConfig, RatePoint, Scheme};
use crate::twoway::bstep_rate;

/// Bit-exact CSV header of sweep output.
pub const CSV_HEADER: &str = "loss_db,scheme,mu,gain,qber,delta_b,delta_p,bsteps,recurrence,rate";
/// Header of the optimal-`mu` table.
pub const MU_TABLE_HEADER: &str = "e_d,regime,mu_opt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LossGrid {
    /// `START:STOP:STEP`
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, stop, step] = parts[..] else {
            return Err(ConfigError::invalid(
                "loss",
                format!("expected START:STOP:STEP, got `{text}`"),
            ));
        };
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::invalid("loss", format!("`{s}` is not a number")))
        };
        let grid = Self {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(ConfigError::invalid(
                "loss_step",
                format!("must be positive, got {}", self.step),
            ));
        }
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(ConfigError::invalid(
                "loss_start",
                format!("must be >= 0, got {}", self.start),
            ));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(ConfigError::invalid(
                "loss_stop",
                format!("must be >= loss_start, got {}", self.stop),
            ));
        }
        Ok(())
    }

    /// Grid points, rounded to 1e-9 dB so they print cleanly.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPolicy {
    Fixed(f64),
    Optimize,
}

/// `Best` keeps, per loss, the best of `0..=bsteps` B steps; `Each` emits one
/// row per B-step count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BStepMode {
    Best,
    Each,
}

impl BStepMode {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "best" => Some(BStepMode::Best),
            "each" => Some(BStepMode::Each),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub schemes: Vec<Scheme>,
    pub loss: LossGrid,
    pub mu: MuPolicy,
    /// Search interval for the expected photon (pair) number.
    pub mu_bounds: (f64, f64),
    pub bsteps: u32,
    pub bstep_mode: BStepMode,
    pub recurrence: bool,
    /// Emit rows both without and with recurrence.
    pub compare_recurrence: bool,
    /// Finite-size correction; applies to the entanglement schemes.
    pub fluctuation: Option<FluctuationParams>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Receiver parameters; placement and loss are set per row.
    pub scenario: ChannelScenario,
    pub e_d: f64,
    pub post: PostprocessingConfig,
    pub mc: ValidationConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schemes.is_empty() {
            return Err(ConfigError::invalid(
                "schemes",
                "at least one scheme is required",
            ));
        }
        self.loss.validate()?;
        let (lo, hi) = self.mu_bounds;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(ConfigError::invalid(
                "mu_max",
                format!("need 0 < mu_min < mu_max, got [{lo}, {hi}]"),
            ));
        }
        if !(0.0..=0.5).contains(&self.e_d) {
            return Err(ConfigError::invalid(
                "e_d",
                format!("must lie in [0, 0.5], got {}", self.e_d),
            ));
        }
        for (key, v) in [
            ("eta_alice", self.scenario.eta_alice_intrinsic),
            ("eta_bob", self.scenario.eta_bob_intrinsic),
            ("y0", self.scenario.y0_side),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::invalid(
                    key,
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        if self.mc.samples == 0 {
            return Err(ConfigError::invalid("mc_samples", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numeric failure at scheme={scheme} loss_db={loss_db} bsteps={bsteps} recurrence={recurrence}: {source}")]
    Numeric {
        scheme: Scheme,
        loss_db: f64,
        bsteps: u32,
        recurrence: bool,
        source: Error,
    },
    #[error("output error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// A sweep row; `below_cutoff` marks a positive rate that was zeroed by the
/// finite-size rate cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub point: RatePoint,
    pub below_cutoff: bool,
}

#[derive(Debug, Clone, Copy)]
struct Job {
    scheme: Scheme,
    loss_db: f64,
    /// `None` asks for the best B-step count.
    bsteps: Option<u32>,
    recurrence: bool,
}

fn jobs(cfg: &SweepConfig) -> Vec<Job> {
    let recurrences: Vec<bool> = if cfg.compare_recurrence {
        vec![false, true]
    } else {
        vec![cfg.recurrence]
    };
    let bsteps: Vec<Option<u32>> = match cfg.bstep_mode {
        BStepMode::Best => vec![None],
        BStepMode::Each => (0..=cfg.bsteps).map(Some).collect(),
    };
    let losses = cfg.loss.points();
    let mut out = Vec::new();
    for &scheme in &cfg.schemes {
        for &loss_db in &losses {
            match scheme {
                Scheme::EntanglementMiddle | Scheme::EntanglementAlice => {
                    for &k in &bsteps {
                        for &recurrence in &recurrences {
                            out.push(Job {
                                scheme,
                                loss_db,
                                bsteps: k,
                                recurrence,
                            });
                        }
                    }
                }
                Scheme::CoherentDecoy | Scheme::TriggeringDecoy => out.push(Job {
                    scheme,
                    loss_db,
                    bsteps: Some(0),
                    recurrence: false,
                }),
            }
        }
    }
    out
}

/// Rate at one `mu` for a job with a fixed B-step count.
fn evaluate_at(
    cfg: &SweepConfig,
    job: &Job,
    k: u32,
    mu: f64,
    post: &PostprocessingConfig,
) -> Result<RatePoint, Error> {
    let placement = match job.scheme {
        Scheme::EntanglementMiddle => Placement::SourceInMiddle,
        _ => Placement::SourceAtAlice,
    };
    let scn = ChannelScenario {
        placement,
        total_loss_db: job.loss_db,
        ..cfg.scenario
    };
    scn.validate()?;
    match job.scheme {
        Scheme::CoherentDecoy => coherent_decoy_rate(mu, &scn, cfg.e_d, post),
        Scheme::TriggeringDecoy => {
            triggering_pdc_decoy_rate(&SourceParams::from_mu(mu)?, &scn, cfg.e_d, post)
        }
        Scheme::EntanglementMiddle | Scheme::EntanglementAlice => {
            let src = SourceParams::from_mu(mu)?;
            match &cfg.fluctuation {
                Some(flc) => finite_key_rate(&src, &scn, cfg.e_d, post, flc, k, job.recurrence),
                None => bstep_rate(&src, &scn, cfg.e_d, post, k, job.recurrence),
            }
        }
    }
}

/// Choose `mu` per policy and evaluate.
fn evaluate_k(cfg: &SweepConfig, job: &Job, k: u32) -> Result<RatePoint, Error> {
    let mu = match cfg.mu {
        MuPolicy::Fixed(mu) => mu,
        MuPolicy::Optimize => {
            let (lo, hi) = cfg.mu_bounds;
            let bounds = SearchBounds::new(lo, hi, lo * 1e-3)?;
            let signed = cfg.post.signed();
            let objective = |mu: f64| {
                evaluate_at(cfg, job, k, mu, &signed)
                    .map(|p| p.rate)
                    .unwrap_or(f64::NAN)
            };
            optimize_lambda(objective, &bounds)?.lambda
        }
    };
    evaluate_at(cfg, job, k, mu, &cfg.post)
}

fn check_finite(p: &RatePoint) -> Result<(), Error> {
    let fields = [
        ("loss_db", p.loss_db),
        ("mu", p.mu),
        ("gain", p.gain),
        ("qber", p.qber),
        ("delta_b", p.delta_b),
        ("delta_p", p.delta_p),
        ("rate", p.rate),
    ];
    match fields.iter().find(|(_, v)| !v.is_finite()) {
        Some((what, _)) => Err(Error::NonFinite { what }),
        None => Ok(()),
    }
}

fn run_job(cfg: &SweepConfig, job: &Job) -> Result<SweepRow, SweepError> {
    let wrap = |source: Error| SweepError::Numeric {
        scheme: job.scheme,
        loss_db: job.loss_db,
        bsteps: job.bsteps.unwrap_or(cfg.bsteps),
        recurrence: job.recurrence,
        source,
    };
    let mut point = match job.bsteps {
        Some(k) => evaluate_k(cfg, job, k).map_err(wrap)?,
        None => {
            let mut best = evaluate_k(cfg, job, 0).map_err(wrap)?;
            for k in 1..=cfg.bsteps {
                let p = evaluate_k(cfg, job, k).map_err(wrap)?;
                if p.rate > best.rate {
                    best = p;
                }
            }
            best
        }
    };
    check_finite(&point).map_err(wrap)?;
    let mut below_cutoff = false;
    let entangled = matches!(
        job.scheme,
        Scheme::EntanglementMiddle | Scheme::EntanglementAlice
    );
    if let (Some(flc), true) = (&cfg.fluctuation, entangled) {
        if point.rate > 0.0 && point.rate < flc.rate_cutoff {
            point.rate = 0.0;
            below_cutoff = true;
        }
    }
    Ok(SweepRow {
        point,
        below_cutoff,
    })
}

/// Evaluate every (scheme, loss, B-step, recurrence) combination in parallel;
/// rows come back sorted by scheme, loss, B steps and recurrence.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, SweepError> {
    cfg.validate()?;
    let mut rows = jobs(cfg)
        .par_iter()
        .map(|job| run_job(cfg, job))
        .collect::<Result<Vec<_>, _>>()?;
    rows.sort_by(|a, b| {
        let (p, q) = (&a.point, &b.point);
        p.scheme
            .cmp(&q.scheme)
            .then(p.loss_db.total_cmp(&q.loss_db))
            .then(p.bsteps.cmp(&q.bsteps))
            .then(p.recurrence.cmp(&q.recurrence))
    });
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in rows {
        let p = &row.point;
        w.write_record([
            p.loss_db.to_string(),
            p.scheme.label().to_owned(),
            p.mu.to_string(),
            p.gain.to_string(),
            p.qber.to_string(),
            p.delta_b.to_string(),
            p.delta_p.to_string(),
            p.bsteps.to_string(),
            p.recurrence.to_string(),
            p.rate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Largest swept loss with a positive rate, per curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveCutoff {
    pub scheme: Scheme,
    pub bsteps: Option<u32>,
    pub recurrence: bool,
    pub max_loss_db: Option<f64>,
    pub rows_below_cutoff: usize,
}

/// Summarize the curves of a sweep. In `Best` mode the B-step count varies
/// along a curve, so it is not part of the curve key.
pub fn curve_cutoffs(rows: &[SweepRow], mode: BStepMode) -> Vec<CurveCutoff> {
    let mut out: Vec<CurveCutoff> = Vec::new();
    for row in rows {
        let p = &row.point;
        let bsteps = match mode {
            BStepMode::Each => Some(p.bsteps),
            BStepMode::Best => None,
        };
        let idx = match out.iter().position(|c| {
            c.scheme == p.scheme && c.bsteps == bsteps && c.recurrence == p.recurrence
        }) {
            Some(i) => i,
            None => {
                out.push(CurveCutoff {
                    scheme: p.scheme,
                    bsteps,
                    recurrence: p.recurrence,
                    max_loss_db: None,
                    rows_below_cutoff: 0,
                });
                out.len() - 1
            }
        };
        let c = &mut out[idx];
        if p.rate > 0.0 {
            c.max_loss_db = Some(c.max_loss_db.map_or(p.loss_db, |m: f64| m.max(p.loss_db)));
        }
        c.rows_below_cutoff += usize::from(row.below_cutoff);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Four schemes against combined loss, `mu <= 1`.
    Fig3,
    /// Source in the middle, 0..=3 B steps, with and without recurrence.
    Fig4,
    /// Finite-size rates of the experimental operating point.
    Fig5,
    /// Optimal `mu` against misalignment in both transmittance regimes.
    Fig6,
}

impl Preset {
    pub fn parse(text: &str) -> Option<Self> {
        match text {
            "fig3" => Some(Preset::Fig3),
            "fig4" => Some(Preset::Fig4),
            "fig5" => Some(Preset::Fig5),
            "fig6" => Some(Preset::Fig6),
            _ => None,
        }
    }

    /// Sweep configuration; `None` for the optimal-`mu` table.
    pub fn sweep(&self) -> Option<SweepConfig> {
        let base = default_sweep();
        match self {
            Preset::Fig3 => Some(SweepConfig {
                schemes: Scheme::ALL.to_vec(),
                loss: LossGrid {
                    start: 0.0,
                    stop: 80.0,
                    step: 0.5,
                },
                mu: MuPolicy::Optimize,
                mu_bounds: (1e-4, 1.0),
                ..base
            }),
            Preset::Fig4 => Some(SweepConfig {
                schemes: vec![Scheme::EntanglementMiddle],
                loss: LossGrid {
                    start: 0.0,
                    stop: 76.0,
                    step: 0.5,
                },
                mu: MuPolicy::Optimize,
                mu_bounds: (1e-4, 5.0),
                bsteps: 3,
                bstep_mode: BStepMode::Each,
                compare_recurrence: true,
                ..base
            }),
            Preset::Fig5 => Some(SweepConfig {
                schemes: vec![Scheme::EntanglementMiddle],
                loss: LossGrid {
                    start: 0.0,
                    stop: 60.0,
                    step: 0.5,
                },
                mu: MuPolicy::Fixed(crate::model::defaults::EXPERIMENT_MU),
                bsteps: 3,
                bstep_mode: BStepMode::Each,
                fluctuation: Some(experiment_fluctuation()),
                ..base
            }),
            Preset::Fig6 => None,
        }
    }
}

/// Misalignment grid of the optimal-`mu` table.
pub fn fig6_misalignments() -> Vec<f64> {
    (0..=20).map(|i| f64::from(i) * 0.005).collect()
}

/// `e_d,regime,mu_opt` rows; `mu_opt` is empty where no stationary point
/// exists.
pub fn write_mu_table<W: Write>(e_d_grid: &[f64], f_ec: f64, out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MU_TABLE_HEADER.split(','))?;
    for regime in [Regime::EtaANearOne, Regime::EtaASmall] {
        for point in optimal_mu_curve(e_d_grid, f_ec, regime) {
            w.write_record([
                point.e_d.to_string(),
                regime.label().to_owned(),
                point.mu_opt.map(|m| m.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_grid_points() {
        let g = LossGrid::parse("0:1:0.1").unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 11);
        assert_eq!(pts[3], 0.3);
        assert_eq!(*pts.last().unwrap(), 1.0);
        assert_eq!(LossGrid::parse("5:5:1").unwrap().points(), vec![5.0]);
    }

    #[test]
    fn loss_grid_rejects_bad_input() {
        for bad in ["0:10", "0:10:0", "10:0:1", "a:1:1", "0:10:-1"] {
            assert!(LossGrid::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let cfg = SweepConfig {
            schemes: vec![Scheme::TriggeringDecoy, Scheme::EntanglementMiddle],
            loss: LossGrid {
                start: 0.0,
                stop: 20.0,
                step: 10.0,
            },
            mu: MuPolicy::Fixed(0.1),
            bsteps: 1,
            bstep_mode: BStepMode::Each,
            compare_recurrence: true,
            ..default_sweep()
        };
        let rows = run_sweep(&cfg).unwrap();
        // 3 losses x (4 entanglement variants + 1 triggering)
        assert_eq!(rows.len(), 15);
        assert_eq!(rows[0].point.scheme, Scheme::EntanglementMiddle);
        assert_eq!(rows.last().unwrap().point.scheme, Scheme::TriggeringDecoy);
        assert!(rows.windows(2).all(|w| {
            let (a, b) = (&w[0].point, &w[1].point);
            (a.scheme, a.bsteps, a.recurrence) <= (b.scheme, b.bsteps, b.recurrence)
                || a.loss_db < b.loss_db
        }));
    }

    #[test]
    fn csv_header_is_exact() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn cutoff_zeroes_tiny_rates() {
        let cfg = SweepConfig {
            loss: LossGrid {
                start: 50.0,
                stop: 50.0,
                step: 1.0,
            },
            mu: MuPolicy::Fixed(0.053),
            bsteps: 1,
            bstep_mode: BStepMode::Each,
            fluctuation: Some(FluctuationParams {
                rate_cutoff: 0.5,
                ..experiment_fluctuation()
            }),
            ..default_sweep()
        };
        let rows = run_sweep(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.point.rate == 0.0));
        assert!(rows.iter().any(|r| r.below_cutoff));
    }

    #[test]
    fn mu_table_has_both_regimes() {
        let mut buf = Vec::new();
        write_mu_table(&[0.0, 0.1], 1.22, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], MU_TABLE_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[2].ends_with("eta_a_near_one,"));
    }
}
