//! Verification engine: exact oracles, Monte Carlo estimates, report
//! builders and the named verification suites.

pub mod exact;
pub mod mc;
pub mod reports;
pub mod suites;

pub use exact::{exact_bernoulli_expected_max, normal_cdf};
pub use mc::{empirical_tail, empirical_tails, estimate_expected_max, EstimateResult, TailEstimate};
pub use reports::{
    dkw_check, independence_reduction_check, mq_check, sandwich_report, DependentSpec, DkwReport, MqReport, ReductionReport,
    SandwichInstance, SandwichRow,
};
pub use suites::{run_suite, CheckRow, Suite, SuiteConfig};
