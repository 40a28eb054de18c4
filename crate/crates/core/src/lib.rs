//! Plot search for short stories: batched tree search over plot actions,
//! scored by a surprisal-and-coherence value model, with preference-pair
//! mining for policy fine-tuning and the statistics used to evaluate runs.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod backend;
pub mod config;
pub mod error;
pub mod hash;
pub mod prefs;
pub mod search;
pub mod synth;
pub mod tree;
pub mod value;

pub use error::{BackendError, Error, Result};
pub use tree::{NodeId, SearchTree, StoryConfig, StoryState};
