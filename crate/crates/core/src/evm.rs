//! Budgeted versus actual cost tracking.
//!
//! Only BCWS and AC are tracked. A task that repeats (a daily coordination
//! task, say) is planned as several instances that share the task code and
//! differ by `sequence_index`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpm::Schedule;
use crate::plan::{Minutes, Money, Network};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostInstance {
    pub task_code: String,
    pub sequence_index: u32,
    pub bcws: Money,
    /// Planned working minute at which the cost is booked.
    pub planned_at: Minutes,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostPlan {
    pub instances: Vec<CostInstance>,
}

impl CostPlan {
    /// One instance per non-dummy task, or `repetitions[code]` instances
    /// spread evenly over the task's scheduled window. Each instance carries
    /// the task's full BCWS (the cost is per sequence).
    pub fn from_schedule(network: &Network, schedule: &Schedule, repetitions: &BTreeMap<String, u32>) -> Self {
        let mut instances = Vec::new();
        for task in network.tasks().iter().filter(|t| !t.is_dummy()) {
            let Some(window) = schedule.task(&task.code) else { continue };
            let count = repetitions.get(&task.code).copied().unwrap_or(1).max(1);
            for i in 1..=count {
                instances.push(CostInstance {
                    task_code: task.code.clone(),
                    sequence_index: i,
                    bcws: task.bcws_cost,
                    planned_at: window.early_start + window.duration * Minutes::from(i) / Minutes::from(count),
                });
            }
        }
        CostPlan { instances }
    }

    pub fn instance(&self, code: &str, sequence_index: u32) -> Option<&CostInstance> {
        self.instances
            .iter()
            .find(|c| c.task_code == code && c.sequence_index == sequence_index)
    }

    pub fn instances_of<'a>(&'a self, code: &'a str) -> impl Iterator<Item = &'a CostInstance> + 'a {
        self.instances.iter().filter(move |c| c.task_code == code)
    }
}

pub fn planned_cost_total(plan: &CostPlan, filter: impl Fn(&CostInstance) -> bool) -> Money {
    plan.instances.iter().filter(|c| filter(c)).map(|c| c.bcws).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvmError {
    #[error("TaskNotClosed: task {0} must be finished before its actual cost is recorded")]
    TaskNotClosed(String),
    #[error("UnknownInstance: no planned cost for task {code} sequence {sequence_index}")]
    UnknownInstance { code: String, sequence_index: u32 },
    #[error("NegativeCost: actual cost cannot be negative")]
    NegativeCost,
    #[error("MissingActuals: no actual cost for {}", .0.join(", "))]
    MissingActuals(Vec<String>),
}

impl EvmError {
    pub fn code(&self) -> &'static str {
        match self {
            EvmError::TaskNotClosed(_) => "TaskNotClosed",
            EvmError::UnknownInstance { .. } => "UnknownInstance",
            EvmError::NegativeCost => "NegativeCost",
            EvmError::MissingActuals(_) => "MissingActuals",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActualCost {
    pub ac: Money,
    /// Working minute at which the cost was incurred.
    pub at: Minutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RecordOutcome {
    Stored,
    /// Same value recorded again; nothing changed.
    Unchanged,
    /// A different value replaced an earlier one.
    Overwritten { previous: Money },
}

impl RecordOutcome {
    pub fn is_warning(self) -> bool {
        !matches!(self, RecordOutcome::Stored)
    }
}

/// Actual costs keyed by `(task code, sequence index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostLedger {
    #[serde(with = "keyed")]
    actuals: BTreeMap<(String, u32), ActualCost>,
}

impl CostLedger {
    pub fn record_actual_cost(
        &mut self,
        plan: &CostPlan,
        code: &str,
        sequence_index: u32,
        actual: ActualCost,
        task_closed: bool,
    ) -> Result<RecordOutcome, EvmError> {
        if plan.instance(code, sequence_index).is_none() {
            return Err(EvmError::UnknownInstance {
                code: code.to_string(),
                sequence_index,
            });
        }
        if !task_closed {
            return Err(EvmError::TaskNotClosed(code.to_string()));
        }
        if actual.ac < 0 {
            return Err(EvmError::NegativeCost);
        }
        let key = (code.to_string(), sequence_index);
        let outcome = match self.actuals.get(&key) {
            None => RecordOutcome::Stored,
            Some(prev) if prev.ac == actual.ac => return Ok(RecordOutcome::Unchanged),
            Some(prev) => RecordOutcome::Overwritten { previous: prev.ac },
        };
        self.actuals.insert(key, actual);
        Ok(outcome)
    }

    pub fn actual(&self, code: &str, sequence_index: u32) -> Option<ActualCost> {
        self.actuals.get(&(code.to_string(), sequence_index)).copied()
    }

    pub fn recorded(&self) -> impl Iterator<Item = (&str, u32, ActualCost)> {
        self.actuals.iter().map(|((c, s), a)| (c.as_str(), *s, *a))
    }
}

mod keyed {
    use super::ActualCost;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        task: String,
        sequence_index: u32,
        ac: i64,
        at: i64,
    }

    pub fn serialize<S: Serializer>(map: &BTreeMap<(String, u32), ActualCost>, s: S) -> Result<S::Ok, S::Error> {
        let entries: Vec<Entry> = map
            .iter()
            .map(|((task, seq), a)| Entry {
                task: task.clone(),
                sequence_index: *seq,
                ac: a.ac,
                at: a.at,
            })
            .collect();
        entries.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(String, u32), ActualCost>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        Ok(entries
            .into_iter()
            .map(|e| ((e.task, e.sequence_index), ActualCost { ac: e.ac, at: e.at }))
            .collect())
    }
}

/// One executed task instance. `ac` is `None` when no cost was recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutedRecord {
    pub task_code: String,
    pub sequence_index: u32,
    pub ac: Option<Money>,
    pub at: Minutes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub working_minute: Minutes,
    pub planned_cum: Money,
    pub actual_cum: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub bcws_baseline: Money,
    pub bcws_executed: Money,
    pub ac_total: Money,
    pub reduction: Money,
    pub curve: Vec<CurvePoint>,
}

impl CostReport {
    pub fn write_metrics_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "metric,value")?;
        writeln!(out, "bcws_baseline,{}", self.bcws_baseline)?;
        writeln!(out, "bcws_executed,{}", self.bcws_executed)?;
        writeln!(out, "ac_total,{}", self.ac_total)?;
        writeln!(out, "reduction,{}", self.reduction)
    }

    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "working_minute,planned_cum,actual_cum")?;
        for p in &self.curve {
            writeln!(out, "{},{},{}", p.working_minute, p.planned_cum, p.actual_cum)?;
        }
        Ok(())
    }
}

pub fn cost_report(baseline: &CostPlan, executed: &[ExecutedRecord]) -> Result<CostReport, EvmError> {
    let missing: Vec<String> = executed
        .iter()
        .filter(|r| r.ac.is_none())
        .map(|r| format!("{}#{}", r.task_code, r.sequence_index))
        .collect();
    if !missing.is_empty() {
        return Err(EvmError::MissingActuals(missing));
    }

    let bcws_baseline = planned_cost_total(baseline, |_| true);
    let mut bcws_executed = 0;
    let mut ac_total = 0;
    // minute -> (planned delta, actual delta)
    let mut deltas: BTreeMap<Minutes, (Money, Money)> = BTreeMap::new();
    for c in &baseline.instances {
        deltas.entry(c.planned_at).or_default().0 += c.bcws;
    }
    for r in executed {
        let planned = baseline
            .instance(&r.task_code, r.sequence_index)
            .ok_or_else(|| EvmError::UnknownInstance {
                code: r.task_code.clone(),
                sequence_index: r.sequence_index,
            })?;
        let ac = r.ac.unwrap_or_default();
        bcws_executed += planned.bcws;
        ac_total += ac;
        deltas.entry(r.at).or_default().1 += ac;
    }

    let mut curve = vec![CurvePoint {
        working_minute: 0,
        planned_cum: 0,
        actual_cum: 0,
    }];
    let (mut planned_cum, mut actual_cum) = (0, 0);
    for (minute, (p, a)) in deltas {
        planned_cum += p;
        actual_cum += a;
        let point = CurvePoint {
            working_minute: minute,
            planned_cum,
            actual_cum,
        };
        match curve.last_mut() {
            Some(last) if last.working_minute == minute => *last = point,
            _ => curve.push(point),
        }
    }

    Ok(CostReport {
        bcws_baseline,
        bcws_executed,
        ac_total,
        reduction: bcws_baseline - ac_total,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequences(code: &str, count: u32, bcws: Money) -> Vec<CostInstance> {
        (1..=count)
            .map(|i| CostInstance {
                task_code: code.into(),
                sequence_index: i,
                bcws,
                planned_at: Minutes::from(i) * 480,
            })
            .collect()
    }

    fn planning_and_tracking() -> CostPlan {
        CostPlan {
            instances: sequences("id3", 13, 150_000),
        }
    }

    #[test]
    fn planned_totals() {
        let plan = planning_and_tracking();
        assert_eq!(planned_cost_total(&plan, |_| true), 1_950_000);
        assert_eq!(planned_cost_total(&plan, |c| c.sequence_index <= 11), 1_650_000);
        assert_eq!(planned_cost_total(&plan, |c| c.task_code == "nope"), 0);
    }

    #[test]
    fn reduction_from_shortened_sequences() {
        let plan = planning_and_tracking();
        let executed: Vec<ExecutedRecord> = (1..=11)
            .map(|i| ExecutedRecord {
                task_code: "id3".into(),
                sequence_index: i,
                ac: Some(112_500),
                at: Minutes::from(i) * 400,
            })
            .collect();
        let report = cost_report(&plan, &executed).unwrap();
        assert_eq!(report.bcws_baseline, 1_950_000);
        assert_eq!(report.bcws_executed, 1_650_000);
        assert_eq!(report.ac_total, 1_237_500);
        assert_eq!(report.reduction, 712_500);

        let last = report.curve.last().unwrap();
        assert_eq!((last.planned_cum, last.actual_cum), (1_950_000, 1_237_500));
        for w in report.curve.windows(2) {
            assert!(w[0].working_minute < w[1].working_minute);
            assert!(w[0].planned_cum <= w[1].planned_cum && w[0].actual_cum <= w[1].actual_cum);
        }
    }

    #[test]
    fn no_shortening_no_reduction() {
        let plan = CostPlan {
            instances: sequences("x", 2, 500),
        };
        let executed: Vec<ExecutedRecord> = (1..=2)
            .map(|i| ExecutedRecord {
                task_code: "x".into(),
                sequence_index: i,
                ac: Some(500),
                at: 10,
            })
            .collect();
        assert_eq!(cost_report(&plan, &executed).unwrap().reduction, 0);
    }

    #[test]
    fn missing_actuals() {
        let plan = CostPlan {
            instances: sequences("x", 2, 500),
        };
        let executed = vec![
            ExecutedRecord {
                task_code: "x".into(),
                sequence_index: 1,
                ac: Some(500),
                at: 1,
            },
            ExecutedRecord {
                task_code: "x".into(),
                sequence_index: 2,
                ac: None,
                at: 2,
            },
        ];
        assert_eq!(
            cost_report(&plan, &executed).unwrap_err(),
            EvmError::MissingActuals(vec!["x#2".into()])
        );
    }

    #[test]
    fn recording_actuals() {
        let plan = planning_and_tracking();
        let mut ledger = CostLedger::default();
        let ac = ActualCost { ac: 112_500, at: 45 };
        assert_eq!(
            ledger.record_actual_cost(&plan, "id3", 1, ac, false),
            Err(EvmError::TaskNotClosed("id3".into()))
        );
        assert_eq!(ledger.record_actual_cost(&plan, "id3", 1, ac, true), Ok(RecordOutcome::Stored));
        let again = ledger.record_actual_cost(&plan, "id3", 1, ac, true).unwrap();
        assert_eq!(again, RecordOutcome::Unchanged);
        assert!(again.is_warning());
        assert_eq!(ledger.actual("id3", 1), Some(ac));
        assert_eq!(
            ledger.record_actual_cost(&plan, "id3", 1, ActualCost { ac: 100, at: 45 }, true),
            Ok(RecordOutcome::Overwritten { previous: 112_500 })
        );
        assert!(matches!(
            ledger.record_actual_cost(&plan, "id3", 14, ac, true),
            Err(EvmError::UnknownInstance { .. })
        ));

        let json = serde_json::to_string(&ledger).unwrap();
        assert_eq!(serde_json::from_str::<CostLedger>(&json).unwrap(), ledger);
    }

    #[test]
    fn csv_exports() {
        let plan = CostPlan {
            instances: sequences("x", 1, 500),
        };
        let executed = vec![ExecutedRecord {
            task_code: "x".into(),
            sequence_index: 1,
            ac: Some(300),
            at: 200,
        }];
        let report = cost_report(&plan, &executed).unwrap();
        let mut metrics = Vec::new();
        report.write_metrics_csv(&mut metrics).unwrap();
        assert_eq!(
            String::from_utf8(metrics).unwrap(),
            "metric,value\nbcws_baseline,500\nbcws_executed,500\nac_total,300\nreduction,200\n"
        );
        let mut curve = Vec::new();
        report.write_curve_csv(&mut curve).unwrap();
        assert_eq!(
            String::from_utf8(curve).unwrap(),
            "working_minute,planned_cum,actual_cum\n0,0,0\n200,0,300\n480,500,300\n"
        );
    }
}
