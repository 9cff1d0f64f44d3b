//! Sampling mathematics and supporting pieces for exploring how top-p,
//! frequency penalty and presence penalty change generated text.
//!
//! - [`sampling`]: penalty reweighting, nucleus filtering, seeded token draws
//!   and the generation loop.
//! - [`ngram`]: a Laplace-smoothed n-gram model that exposes full next-token
//!   distributions, so the sampling loop can run locally.
//! - [`remote`]: a client for OpenAI-compatible completion endpoints, where the
//!   hyperparameters are forwarded instead of applied locally.
//! - [`store`]: an append-only JSON Lines log of generations and ratings.
//!
//! ```
//! use paramscope_core::ngram::{NGramModel, Tokenizer};
//! use paramscope_core::params::SamplingParams;
//! use paramscope_core::sampling::generate_sequence;
//!
//! let model = NGramModel::train("abababab", 2, Tokenizer::Char).unwrap();
//! let params = SamplingParams::new(0.1, 0.0, 0.0, 7).unwrap();
//! let out = generate_sequence(&model, "a", &params, 4).unwrap();
//! assert_eq!(out.text, "baba");
//! ```

pub mod distribution;
pub mod error;
pub mod history;
pub mod ngram;
pub mod params;
pub mod provider;
pub mod remote;
pub mod sampling;
pub mod store;

pub use distribution::{Token, TokenDistribution, TokenWeights};
pub use error::{DistributionError, ParamError, ProviderError, SamplingError};
pub use history::TokenHistory;
pub use params::SamplingParams;
pub use provider::{DistributionProvider, ProviderMode};
pub use sampling::{apply_penalties, generate_sequence, nucleus_filter, renormalize, sample_token};

// Compile and run the guide's code listings as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/distributions.md")]
    mod distributions {}
    #[doc = include_str!("../../../book/src/penalties.md")]
    mod penalties {}
    #[doc = include_str!("../../../book/src/nucleus.md")]
    mod nucleus {}
    #[doc = include_str!("../../../book/src/generation.md")]
    mod generation {}
    #[doc = include_str!("../../../book/src/ngram.md")]
    mod ngram {}
    #[doc = include_str!("../../../book/src/store.md")]
    mod store {}
    #[doc = include_str!("../../../book/src/http_api.md")]
    mod http_api {}
}
