//! Scores and the statistics used to compare models across datasets.

mod critical_difference;
mod metrics;
mod ranks;
mod wilcoxon;

pub use critical_difference::{cd_groups, critical_difference, nemenyi_q, CdResult};
pub use metrics::{macro_mae, macro_zero_one};
pub use ranks::{average_ranks, rank_row, ScoreTable};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult};
