//! The story value model: surprisal and coherence features, and the
//! classifier pipeline that maps them to a probability of being good.

pub mod calibration;
pub mod coherence;
pub mod corpus;
pub mod cv;
pub mod features;
pub mod metrics;
pub mod pca;
pub mod pipeline;
pub mod surprisal;
pub mod svm;
pub mod tune;
