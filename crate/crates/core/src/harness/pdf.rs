use crate::domain::{GoalKind, Money};
use crate::error::{Error, Result};
use crate::pacing::PerformancePdf;

use super::report::RunReport;

/// Mass given to a slot without events, before the final normalisation.
pub const EMPTY_SLOT_MASS: f64 = 1e-3;

/// Performance distribution proportional to events per unit of spend.
///
/// Slots with events are normalised first; every slot without events then
/// gets [`EMPTY_SLOT_MASS`] and the whole vector is normalised again. No
/// events anywhere gives the uniform distribution.
pub fn learn_performance_pdf(spend: &[Money], events: &[u64]) -> PerformancePdf {
    let n = spend.len().min(events.len());
    let proxy: Vec<f64> = (0..n)
        .map(|t| {
            if events[t] == 0 || spend[t].is_zero() {
                0.0
            } else {
                events[t] as f64 / spend[t].as_units()
            }
        })
        .collect();
    let mass: f64 = proxy.iter().sum();
    if mass.is_nan() || mass <= 0.0 {
        return PerformancePdf::uniform(spend.len());
    }
    let weights = proxy
        .iter()
        .map(|&p| if p > 0.0 { p / mass } else { EMPTY_SLOT_MASS })
        .collect();
    PerformancePdf::new(weights).expect("positive weights")
}

/// [`learn_performance_pdf`] over a run report, folding every day onto the
/// slots of one day.
pub fn learn_from_report(report: &RunReport, goal: GoalKind) -> Result<PerformancePdf> {
    let t = report.num_slots;
    if t == 0 || !report.series.len().is_multiple_of(t) {
        return Err(Error::invalid("report series is not a whole number of days"));
    }
    let mut spend = vec![Money::ZERO; t];
    let mut events = vec![0u64; t];
    for row in &report.series {
        let s = row.slot % t;
        spend[s] += row.actual_spend;
        events[s] += match goal.event_kind() {
            crate::domain::EventKind::Click => row.clicks,
            crate::domain::EventKind::Conversion => row.conversions,
        };
    }
    Ok(learn_performance_pdf(&spend, &events))
}
