//! Flat TOML run configuration. Every key is optional; anything left out
//! falls back to the experimental defaults.
//!
//! ```toml
//! schemes = ["entanglement-middle", "coherent-decoy"]
//! loss_start = 0.0
//! loss_stop = 70.0
//! loss_step = 0.5
//! mu = "opt"          # or a number
//! bsteps = 3
//! bsteps_mode = "best"  # or "each"
//! recurrence = true
//! fluctuation = true
//! pulses = 1.5e11
//! confidence = 50.0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::finite_key::{
    FluctuationParams, DEFAULT_CONFIDENCE_EXPONENT, DEFAULT_PULSES, DEFAULT_RATE_CUTOFF,
};
use crate::mc::ValidationConfig;
use crate::model::defaults;
use crate::rates::{PostprocessingConfig, Scheme, DEFAULT_F_EC};
use crate::sweep::{BStepMode, LossGrid, MuPolicy, SweepConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_owned(),
            reason: reason.into(),
        }
    }
}

/// `mu = "opt"` or `mu = 0.053`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MuSetting {
    Value(f64),
    Keyword(String),
}

impl MuSetting {
    pub fn parse(text: &str) -> Result<MuPolicy, ConfigError> {
        if text == "opt" {
            return Ok(MuPolicy::Optimize);
        }
        text.parse::<f64>()
            .map_err(|_| {
                ConfigError::invalid("mu", format!("expected a number or `opt`, got `{text}`"))
            })
            .and_then(|v| MuSetting::Value(v).to_policy())
    }

    fn to_policy(&self) -> Result<MuPolicy, ConfigError> {
        match self {
            MuSetting::Keyword(k) if k == "opt" => Ok(MuPolicy::Optimize),
            MuSetting::Keyword(k) => Err(ConfigError::invalid(
                "mu",
                format!("expected a number or `opt`, got `{k}`"),
            )),
            MuSetting::Value(v) if *v > 0.0 && v.is_finite() => Ok(MuPolicy::Fixed(*v)),
            MuSetting::Value(v) => Err(ConfigError::invalid(
                "mu",
                format!("must be positive, got {v}"),
            )),
        }
    }
}

/// Raw file contents; unknown keys are rejected by name.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schemes: Option<Vec<String>>,
    pub loss_start: Option<f64>,
    pub loss_stop: Option<f64>,
    pub loss_step: Option<f64>,
    pub mu: Option<MuSetting>,
    pub mu_min: Option<f64>,
    pub mu_max: Option<f64>,
    pub bsteps: Option<u32>,
    pub bsteps_mode: Option<String>,
    pub recurrence: Option<bool>,
    pub compare_recurrence: Option<bool>,
    pub fluctuation: Option<bool>,
    pub pulses: Option<f64>,
    pub confidence: Option<f64>,
    pub cutoff: Option<f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eta_alice: Option<f64>,
    pub eta_bob: Option<f64>,
    pub e_d: Option<f64>,
    pub y0: Option<f64>,
    pub q: Option<f64>,
    pub f_ec: Option<f64>,
    pub mc_samples: Option<u64>,
    pub mc_z_max: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_owned()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Apply the set keys on top of `base`.
    pub fn apply(&self, base: &SweepConfig) -> Result<SweepConfig, ConfigError> {
        let mut cfg = base.clone();
        if let Some(names) = &self.schemes {
            cfg.schemes = names
                .iter()
                .map(|s| {
                    s.parse::<Scheme>()
                        .map_err(|e| ConfigError::invalid("schemes", e))
                })
                .collect::<Result<_, _>>()?;
        }
        cfg.loss = LossGrid {
            start: self.loss_start.unwrap_or(cfg.loss.start),
            stop: self.loss_stop.unwrap_or(cfg.loss.stop),
            step: self.loss_step.unwrap_or(cfg.loss.step),
        };
        if let Some(mu) = &self.mu {
            cfg.mu = mu.to_policy()?;
        }
        cfg.mu_bounds = (
            self.mu_min.unwrap_or(cfg.mu_bounds.0),
            self.mu_max.unwrap_or(cfg.mu_bounds.1),
        );
        if let Some(k) = self.bsteps {
            cfg.bsteps = k;
        }
        if let Some(mode) = &self.bsteps_mode {
            cfg.bstep_mode = BStepMode::parse(mode).ok_or_else(|| {
                ConfigError::invalid(
                    "bsteps_mode",
                    format!("expected `best` or `each`, got `{mode}`"),
                )
            })?;
        }
        if let Some(r) = self.recurrence {
            cfg.recurrence = r;
        }
        if let Some(c) = self.compare_recurrence {
            cfg.compare_recurrence = c;
        }
        let fluctuation_keys =
            self.pulses.is_some() || self.confidence.is_some() || self.cutoff.is_some();
        if self
            .fluctuation
            .unwrap_or(cfg.fluctuation.is_some() || fluctuation_keys)
        {
            let base_flc = cfg.fluctuation.unwrap_or_default();
            cfg.fluctuation = Some(fluctuation_params(
                self.pulses.unwrap_or(base_flc.n_pulses as f64),
                self.confidence.unwrap_or(base_flc.confidence_exponent),
                self.cutoff.unwrap_or(base_flc.rate_cutoff),
            )?);
        } else {
            cfg.fluctuation = None;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.scenario.eta_alice_intrinsic =
            self.eta_alice.unwrap_or(cfg.scenario.eta_alice_intrinsic);
        cfg.scenario.eta_bob_intrinsic = self.eta_bob.unwrap_or(cfg.scenario.eta_bob_intrinsic);
        cfg.scenario.y0_side = self.y0.unwrap_or(cfg.scenario.y0_side);
        cfg.e_d = self.e_d.unwrap_or(cfg.e_d);
        cfg.post = PostprocessingConfig::new(
            self.q.unwrap_or(cfg.post.q),
            self.f_ec.unwrap_or(cfg.post.f_ec),
            cfg.post.clamp_nonnegative,
        )
        .map_err(|e| {
            ConfigError::invalid(if self.q.is_some() { "q" } else { "f_ec" }, e.to_string())
        })?;
        if let Some(n) = self.mc_samples {
            cfg.mc.samples = n;
        }
        if let Some(z) = self.mc_z_max {
            if z.is_nan() || z <= 0.0 {
                return Err(ConfigError::invalid(
                    "mc_z_max",
                    format!("must be positive, got {z}"),
                ));
            }
            cfg.mc.z_max = z;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Build fluctuation parameters; `pulses` may be given in float notation.
pub fn fluctuation_params(
    pulses: f64,
    confidence: f64,
    cutoff: f64,
) -> Result<FluctuationParams, ConfigError> {
    if !(pulses >= 1.0 && pulses <= u64::MAX as f64) {
        return Err(ConfigError::invalid(
            "pulses",
            format!("must be >= 1, got {pulses}"),
        ));
    }
    if !(confidence > 0.0 && confidence.is_finite()) {
        return Err(ConfigError::invalid(
            "confidence",
            format!("must be positive, got {confidence}"),
        ));
    }
    if !(0.0..=1.0).contains(&cutoff) {
        return Err(ConfigError::invalid(
            "cutoff",
            format!("must lie in [0, 1], got {cutoff}"),
        ));
    }
    Ok(FluctuationParams {
        n_pulses: pulses.round() as u64,
        confidence_exponent: confidence,
        rate_cutoff: cutoff,
    })
}

/// Defaults for a sweep when neither a preset nor a file says otherwise.
pub fn default_sweep() -> SweepConfig {
    SweepConfig {
        schemes: vec![Scheme::EntanglementMiddle],
        loss: LossGrid {
            start: 0.0,
            stop: 70.0,
            step: 1.0,
        },
        mu: MuPolicy::Optimize,
        mu_bounds: (1e-4, 1.0),
        bsteps: 0,
        bstep_mode: BStepMode::Best,
        recurrence: false,
        compare_recurrence: false,
        fluctuation: None,
        out: None,
        seed: 42,
        scenario: crate::model::ChannelScenario::new(crate::model::Placement::SourceInMiddle, 0.0)
            .expect("default scenario is valid"),
        e_d: defaults::MISALIGNMENT_ERROR,
        post: PostprocessingConfig {
            q: 0.5,
            f_ec: DEFAULT_F_EC,
            clamp_nonnegative: true,
        },
        mc: ValidationConfig::default(),
    }
}

/// Fluctuation parameters of the ten-minute experiment.
pub fn experiment_fluctuation() -> FluctuationParams {
    FluctuationParams {
        n_pulses: DEFAULT_PULSES,
        confidence_exponent: DEFAULT_CONFIDENCE_EXPONENT,
        rate_cutoff: DEFAULT_RATE_CUTOFF,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ConfigFile::parse("")
            .unwrap()
            .apply(&default_sweep())
            .unwrap();
        assert_eq!(cfg, default_sweep());
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ConfigFile::parse("lossstart = 3.0").unwrap_err();
        assert!(err.to_string().contains("lossstart"), "{err}");
    }

    #[test]
    fn mu_accepts_number_or_keyword() {
        let f = ConfigFile::parse("mu = 0.053").unwrap();
        assert_eq!(
            f.apply(&default_sweep()).unwrap().mu,
            MuPolicy::Fixed(0.053)
        );
        let f = ConfigFile::parse("mu = \"opt\"").unwrap();
        assert_eq!(f.apply(&default_sweep()).unwrap().mu, MuPolicy::Optimize);
        let f = ConfigFile::parse("mu = \"best\"").unwrap();
        let err = f.apply(&default_sweep()).unwrap_err();
        assert!(err.to_string().contains("`mu`"));
    }

    #[test]
    fn bad_values_name_their_key() {
        for (text, key) in [
            ("loss_step = -1.0", "loss_step"),
            ("schemes = [\"bb84\"]", "schemes"),
            ("pulses = 0.0", "pulses"),
            ("e_d = 0.7", "e_d"),
            ("f_ec = 0.5", "f_ec"),
            ("bsteps_mode = \"all\"", "bsteps_mode"),
        ] {
            let err = ConfigFile::parse(text)
                .unwrap()
                .apply(&default_sweep())
                .unwrap_err();
            assert!(err.to_string().contains(key), "{text}: {err}");
        }
    }

    #[test]
    fn fluctuation_keys_enable_fluctuation() {
        let cfg = ConfigFile::parse("pulses = 1.5e11\nconfidence = 50.0")
            .unwrap()
            .apply(&default_sweep())
            .unwrap();
        let flc = cfg.fluctuation.unwrap();
        assert_eq!(flc.n_pulses, 150_000_000_000);
        assert_eq!(flc.confidence_exponent, 50.0);
        assert_eq!(flc, experiment_fluctuation());
    }
}
