//! Criterion 5: both UCB policies beat the uniform-random reference on every
//! setting at m = 0 (one-sided Welch test, p < 0.05). Reuses the experiment
//! table produced for criterion 4, so it adds no extra run time of its own.

use std::time::{Duration, Instant};

use embandit::environments::Setting;
use embandit::harness::Algorithm;

use crate::c4::ExperimentTable;
use crate::support::CriterionReport;

pub fn run(table: &ExperimentTable) -> CriterionReport {
    let mut report = CriterionReport::new(
        "criterion 5: both UCB policies beat uniform random at m=0",
        Duration::from_secs(20 * 60),
    );
    let start = Instant::now();
    report.note("reuses the criterion-4 experiment matrix; wall time is attributed there");

    for setting in [Setting::A, Setting::B, Setting::C, Setting::D] {
        for algorithm in [Algorithm::CbmpUcb, Algorithm::CmeUcb] {
            let cmp = table.compare(setting, 0, algorithm, Algorithm::Random);
            report.check(
                cmp.mean_difference > 0.0 && cmp.p_one_sided < 0.05,
                format!(
                    "{setting:?}: {algorithm} beats random (diff {:+.1}, one-sided p={:.2e})",
                    cmp.mean_difference, cmp.p_one_sided
                ),
            );
        }
    }

    report.elapsed = start.elapsed();
    report
}
