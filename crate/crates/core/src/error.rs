use thiserror::Error;

/// Errors raised by the model, post-processing and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} is outside its valid range ({expected})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("overall gain is zero: no coincidences to estimate a QBER from")]
    DegenerateGain,

    #[error("yield of the {n}-photon-pair state is zero")]
    ZeroYield { n: u32 },

    #[error("outcome index m = {m} exceeds pair number n = {n}")]
    OutcomeOutOfRange { n: u32, m: u32 },

    #[error("error distribution is not normalized (sum = {sum})")]
    NotNormalized { sum: f64 },

    #[error("simulation produced no coincidences in {samples} samples")]
    NoCoincidences { samples: u64 },

    #[error("non-finite value encountered while evaluating {what}")]
    NonFinite { what: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<f64> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            expected,
        })
    }
}
