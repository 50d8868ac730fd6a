//! Detection and repair statistics over a benchmark run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("true positives ({tp}) exceed detected defects ({detected}) or total ({total})")]
    Inconsistent { tp: u32, detected: u32, total: u32 },
}

/// Raw tallies collected per instance and reduced into a report.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total: u32,
    pub compilation_failures: u32,
    pub detected_defects: u32,
    pub true_positives: u32,
    pub successful_repairs: u32,
}

/// One row of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total: u32,
    pub compilation_failures: u32,
    pub detected_defects: u32,
    pub true_positives: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Only meaningful when the agent sees the defective source.
    pub successful_repairs: Option<u32>,
    /// Mean final-plan statement count per instrumented unit.
    pub avg_logs: f64,
    /// Mean number of runtime log events per instrumented unit.
    pub avg_events: f64,
}

impl MetricsReport {
    /// Precision = TP/detected, recall = TP/total, F1 = 2PR/(P+R); each is
    /// 0 when its denominator is 0.
    pub fn from_counts(
        total: u32,
        detected_defects: u32,
        true_positives: u32,
    ) -> Result<Self, MetricsError> {
        if true_positives > detected_defects || true_positives > total {
            return Err(MetricsError::Inconsistent {
                tp: true_positives,
                detected: detected_defects,
                total,
            });
        }
        let precision = ratio(true_positives, detected_defects);
        let recall = ratio(true_positives, total);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(Self {
            total,
            compilation_failures: 0,
            detected_defects,
            true_positives,
            precision,
            recall,
            f1,
            successful_repairs: None,
            avg_logs: 0.0,
            avg_events: 0.0,
        })
    }

    pub fn from_tally(
        tally: Tally,
        with_repairs: bool,
        avg_logs: f64,
        avg_events: f64,
    ) -> Result<Self, MetricsError> {
        let mut report =
            Self::from_counts(tally.total, tally.detected_defects, tally.true_positives)?;
        report.compilation_failures = tally.compilation_failures;
        report.successful_repairs = with_repairs.then_some(tally.successful_repairs);
        report.avg_logs = avg_logs;
        report.avg_events = avg_events;
        Ok(report)
    }
}

fn ratio(num: u32, den: u32) -> f64 {
    if den == 0 {
        0.0
    } else {
        f64::from(num) / f64::from(den)
    }
}
