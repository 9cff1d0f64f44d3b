//! Plain-language help text for each exposed hyperparameter.

use paramscope_core::params::{
    ParamRange, DEFAULT_FREQUENCY_PENALTY, DEFAULT_PRESENCE_PENALTY, DEFAULT_TOP_P, PENALTY_RANGE,
    TOP_P_RANGE,
};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct HyperparameterDescription {
    pub name: &'static str,
    pub summary: &'static str,
    /// `[min, max]`.
    pub range: [f64; 2],
    pub min_inclusive: bool,
    /// Interval notation, e.g. `(0,1]`.
    pub range_text: String,
    pub default: f64,
}

fn describe(
    name: &'static str,
    summary: &'static str,
    range: ParamRange,
    default: f64,
) -> HyperparameterDescription {
    HyperparameterDescription {
        name,
        summary,
        range: [range.min, range.max],
        min_inclusive: range.min_inclusive,
        range_text: range.to_string(),
        default,
    }
}

pub fn hyperparameters() -> Vec<HyperparameterDescription> {
    vec![
        describe(
            "top_p",
            "Top-p, or nucleus sampling, decides how many candidate words the model may choose \
             from at each step. Candidates are ranked from most to least likely and added to a \
             pool until their combined probability reaches top-p; the next word is drawn at \
             random from that pool. Low values keep only the few most likely words, giving \
             focused and predictable text. Values near 1 admit unlikely words too, giving more \
             varied and surprising text.",
            TOP_P_RANGE,
            DEFAULT_TOP_P,
        ),
        describe(
            "frequency_penalty",
            "The frequency penalty discourages the model from repeating itself. Every time a \
             word has already been generated, its chance of being picked again is divided down \
             a little more, so a word used five times is suppressed far more than a word used \
             once. Zero turns the penalty off; higher values push the text toward new \
             vocabulary and away from loops.",
            PENALTY_RANGE,
            DEFAULT_FREQUENCY_PENALTY,
        ),
        describe(
            "presence_penalty",
            "The presence penalty encourages the model to introduce words it has not used yet. \
             Any word that has appeared at least once in the generated text has its chance \
             reduced by the same fixed amount, no matter how many times it appeared. Zero turns \
             the penalty off; higher values nudge the model toward new topics and fresh wording.",
            PENALTY_RANGE,
            DEFAULT_PRESENCE_PENALTY,
        ),
    ]
}
