//! The three exposed hyperparameters plus the seed that makes a run repeatable.

use serde::{Deserialize, Serialize};

use crate::error::ParamError;

/// A closed or half-open real interval used to validate and describe a
/// hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub min_inclusive: bool,
}

impl ParamRange {
    pub fn contains(&self, value: f64) -> bool {
        let above = if self.min_inclusive {
            value >= self.min
        } else {
            value > self.min
        };
        value.is_finite() && above && value <= self.max
    }

    fn check(&self, field: &'static str, value: f64) -> Result<(), ParamError> {
        if self.contains(value) {
            Ok(())
        } else {
            Err(ParamError {
                field,
                value,
                range: *self,
            })
        }
    }
}

impl std::fmt::Display for ParamRange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let open = if self.min_inclusive { '[' } else { '(' };
        write!(f, "{open}{},{}]", self.min, self.max)
    }
}

pub const TOP_P_RANGE: ParamRange = ParamRange {
    min: 0.0,
    max: 1.0,
    min_inclusive: false,
};

pub const PENALTY_RANGE: ParamRange = ParamRange {
    min: 0.0,
    max: 2.0,
    min_inclusive: true,
};

pub const DEFAULT_TOP_P: f64 = 0.9;
pub const DEFAULT_FREQUENCY_PENALTY: f64 = 0.0;
pub const DEFAULT_PRESENCE_PENALTY: f64 = 0.0;

/// Validated sampling hyperparameters.
///
/// `frequency_penalty` scales with how often a token has already been
/// generated; `presence_penalty` applies once to any token generated at least
/// once. Both are restricted to `[0, 2]` so penalty denominators stay `>= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct SamplingParams {
    top_p: f64,
    frequency_penalty: f64,
    presence_penalty: f64,
    seed: u64,
}

#[derive(Deserialize)]
struct RawParams {
    top_p: f64,
    frequency_penalty: f64,
    presence_penalty: f64,
    seed: u64,
}

impl TryFrom<RawParams> for SamplingParams {
    type Error = ParamError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        SamplingParams::new(
            raw.top_p,
            raw.frequency_penalty,
            raw.presence_penalty,
            raw.seed,
        )
    }
}

impl SamplingParams {
    pub fn new(
        top_p: f64,
        frequency_penalty: f64,
        presence_penalty: f64,
        seed: u64,
    ) -> Result<Self, ParamError> {
        TOP_P_RANGE.check("top_p", top_p)?;
        PENALTY_RANGE.check("frequency_penalty", frequency_penalty)?;
        PENALTY_RANGE.check("presence_penalty", presence_penalty)?;
        Ok(Self {
            top_p,
            frequency_penalty,
            presence_penalty,
            seed,
        })
    }

    pub fn top_p(&self) -> f64 {
        self.top_p
    }

    pub fn frequency_penalty(&self) -> f64 {
        self.frequency_penalty
    }

    pub fn presence_penalty(&self) -> f64 {
        self.presence_penalty
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            top_p: DEFAULT_TOP_P,
            frequency_penalty: DEFAULT_FREQUENCY_PENALTY,
            presence_penalty: DEFAULT_PRESENCE_PENALTY,
            seed: 0,
        }
    }
}
