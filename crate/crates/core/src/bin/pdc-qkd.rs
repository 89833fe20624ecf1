use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pdc_qkd::config::{default_sweep, ConfigError, ConfigFile, MuSetting};
use pdc_qkd::mc::{default_grid, validate_grid, CellStatus, ValidationReport};
use pdc_qkd::sweep::{
    curve_cutoffs, fig6_misalignments, run_sweep, write_csv, write_mu_table, LossGrid, MuPolicy,
    Preset, SweepConfig, SweepError,
};

const EXIT_IO: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VALIDATION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "pdc-qkd",
    version,
    about = "Key rates for entanglement-based PDC quantum key distribution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Key rate against combined channel loss.
    Sweep(Common),
    /// Sweep with the pair number optimized at every loss.
    OptimizeMu(Common),
    /// Finite-size key rates (defaults to the experimental operating point).
    Fluctuation(Common),
    /// Compare the Monte Carlo simulator with the closed forms on a 27-cell grid.
    McValidate {
        #[command(flatten)]
        common: Common,
        /// Pulses simulated per cell.
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Built-in figure configurations: fig3, fig4, fig5, fig6.
    Preset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Loss grid in dB as START:STOP:STEP.
    #[arg(long)]
    loss: Option<String>,
    /// Scheme to include; repeatable.
    #[arg(long = "scheme")]
    schemes: Vec<String>,
    /// Largest number of B steps.
    #[arg(long)]
    bsteps: Option<u32>,
    #[arg(long)]
    recurrence: bool,
    /// Expected photon (pair) number, or `opt`.
    #[arg(long)]
    mu: Option<String>,
    /// Number of pump pulses for the finite-size correction.
    #[arg(long)]
    pulses: Option<f64>,
    /// Confidence exponent `s` of the failure probability `exp(-s)`.
    #[arg(long)]
    confidence: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{failed} of {total} validation cells failed after a reseeded retry")]
    Validation { failed: usize, total: usize },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Sweep(SweepError::Config(_)) => EXIT_CONFIG,
            CliError::Sweep(SweepError::Numeric { .. }) => EXIT_NUMERIC,
            CliError::Validation { .. } => EXIT_VALIDATION,
            CliError::Io(_) | CliError::Sweep(_) => EXIT_IO,
        }
    }
}

impl Common {
    /// Overrides given on the command line, in config-file form.
    fn overrides(&self) -> Result<ConfigFile, ConfigError> {
        let mut file = ConfigFile {
            out: self.out.clone(),
            seed: self.seed,
            bsteps: self.bsteps,
            recurrence: self.recurrence.then_some(true),
            pulses: self.pulses,
            confidence: self.confidence,
            ..ConfigFile::default()
        };
        if !self.schemes.is_empty() {
            file.schemes = Some(self.schemes.clone());
        }
        if let Some(text) = &self.loss {
            let grid = LossGrid::parse(text)?;
            file.loss_start = Some(grid.start);
            file.loss_stop = Some(grid.stop);
            file.loss_step = Some(grid.step);
        }
        if let Some(text) = &self.mu {
            file.mu = Some(match MuSetting::parse(text)? {
                MuPolicy::Optimize => MuSetting::Keyword("opt".into()),
                MuPolicy::Fixed(v) => MuSetting::Value(v),
            });
        }
        Ok(file)
    }

    /// `base`, then the config file, then command-line flags.
    fn resolve(&self, base: &SweepConfig) -> Result<SweepConfig, ConfigError> {
        let from_file = match &self.config {
            Some(path) => ConfigFile::load(path)?.apply(base)?,
            None => base.clone(),
        };
        self.overrides()?.apply(&from_file)
    }
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn sweep_and_write(cfg: &SweepConfig) -> Result<(), CliError> {
    let rows = run_sweep(cfg)?;
    let mut out = open_output(cfg.out.as_deref())?;
    write_csv(&rows, &mut out)?;
    out.flush()?;
    for c in curve_cutoffs(&rows, cfg.bstep_mode) {
        let bsteps = c
            .bsteps
            .map_or_else(|| format!("best<={}", cfg.bsteps), |k| k.to_string());
        let max = c
            .max_loss_db
            .map_or_else(|| "none".to_owned(), |l| format!("{l} dB"));
        eprintln!(
            "{} bsteps={bsteps} recurrence={}: last positive rate at {max}; {} rows below cutoff",
            c.scheme, c.recurrence, c.rows_below_cutoff
        );
    }
    Ok(())
}

fn write_report(report: &ValidationReport, out: &mut dyn Write) -> io::Result<()> {
    writeln!(
        out,
        "lambda,loss_db,e_d,samples,coincidences,gain_model,gain_mc,z_gain,qber_model,qber_mc,z_qber,status"
    )?;
    for c in &report.cells {
        let (samples, coinc, gain, qber) = c.estimate.map_or((0, 0, f64::NAN, f64::NAN), |e| {
            (e.samples, e.coincidences, e.gain, e.qber)
        });
        writeln!(
            out,
            "{},{},{},{samples},{coinc},{},{gain},{:.3},{},{qber},{:.3},{}",
            c.cell.lambda,
            c.cell.loss_db,
            c.cell.e_d,
            c.model_gain,
            c.z_gain,
            c.model_qber,
            c.z_qber,
            c.status.label()
        )?;
    }
    Ok(())
}

fn mc_validate(common: &Common, samples: Option<u64>) -> Result<(), CliError> {
    let mut cfg = common.resolve(&default_sweep())?;
    if let Some(n) = samples {
        if n == 0 {
            return Err(ConfigError::invalid("samples", "must be >= 1").into());
        }
        cfg.mc.samples = n;
    }
    cfg.mc.seed = cfg.seed;
    let report = validate_grid(&default_grid(), &cfg.scenario, &cfg.mc).map_err(|source| {
        SweepError::Numeric {
            scheme: pdc_qkd::rates::Scheme::EntanglementMiddle,
            loss_db: f64::NAN,
            bsteps: 0,
            recurrence: false,
            source,
        }
    })?;
    let mut out = open_output(cfg.out.as_deref())?;
    write_report(&report, &mut out)?;
    out.flush()?;
    let total = report.cells.len();
    eprintln!(
        "{} pass, {} pass after retry, {} insufficient statistics, {} fail (of {total})",
        report.count(CellStatus::Pass),
        report.count(CellStatus::PassAfterRetry),
        report.count(CellStatus::InsufficientStatistics),
        report.count(CellStatus::Fail),
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Validation {
            failed: report.count(CellStatus::Fail),
            total,
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Sweep(common) => sweep_and_write(&common.resolve(&default_sweep())?),
        Command::OptimizeMu(common) => {
            let mut cfg = common.resolve(&default_sweep())?;
            cfg.mu = MuPolicy::Optimize;
            sweep_and_write(&cfg)
        }
        Command::Fluctuation(common) => {
            let base = Preset::Fig5.sweep().expect("fig5 is a sweep preset");
            let mut cfg = common.resolve(&base)?;
            if cfg.fluctuation.is_none() {
                cfg.fluctuation = base.fluctuation;
            }
            sweep_and_write(&cfg)
        }
        Command::McValidate { common, samples } => mc_validate(&common, samples),
        Command::Preset { name, common } => {
            let preset = Preset::parse(&name).ok_or_else(|| {
                ConfigError::invalid(
                    "preset",
                    format!("expected fig3, fig4, fig5 or fig6, got `{name}`"),
                )
            })?;
            match preset.sweep() {
                Some(base) => sweep_and_write(&common.resolve(&base)?),
                None => {
                    let cfg = common.resolve(&default_sweep())?;
                    let mut out = open_output(cfg.out.as_deref())?;
                    write_mu_table(&fig6_misalignments(), cfg.post.f_ec, &mut out)?;
                    out.flush()?;
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
