//! Measurement procedures over finished searches: scaling fits, speedup to a
//! value threshold, V-Q agreement, rubric judging and paired effect sizes.

pub mod fit;
pub mod rubric;
pub mod speedup;
pub mod stats;
pub mod vq;

pub use fit::{loglinear_fit, ExperimentSeries, FitResult, GroupFit};
pub use rubric::{parse_rubric, rubric_rate, RubricReport, RubricScores, RUBRIC_KEYS};
pub use speedup::{iterations_to_gain, pf_days, speedup_table, trajectory, SpeedupRow};
pub use stats::{cles, effect_stats, wilcoxon_signed_rank, EffectReport, Wilcoxon};
pub use vq::{pearson, v_q_correlation};
