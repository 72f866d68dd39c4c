//! Robustness reports and human-correlation statistics.

mod corr;
mod drop;

pub use corr::{correlations, kendall_tau_c, pearson, CorrelationResult, RatingPairs};
pub use drop::{
    drop_report, evaluate_drop, pct_change, render_table, DropReport, KindDrop, LangDrop,
};
