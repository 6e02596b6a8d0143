//! Comparison estimators: a stacked TWFE event study with placebo-dated
//! controls, its gender triple difference, and propensity-score matching.

mod event_study;
mod matching;

pub use event_study::{build_stack, triple_did, twfe_event_study, EventStudySpec, Stack, StackMember};
pub use matching::{
    baseline_rows, matched_gt_did, ps_match, write_balance_csv, BalanceRow, BaselineRow, MatchResult, MatchedPair,
    TREATED_ROLE,
};
