//! The critical-path time buffer and transfers out of it.
//!
//! Tasks are monitored against their optimistic durations. The buffer is half
//! the safety (`pessimistic - operational`) summed over the critical tasks of
//! the operational schedule. A transfer lengthens one task, the whole network
//! is rescheduled and the buffer is recomputed by the same rule. The buffer is
//! never decremented by the transferred amount.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpm::{schedule_with_durations, Schedule, ScheduleBasis};
use crate::plan::{Minutes, Network};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferRecord {
    pub task: String,
    pub amount: Minutes,
    pub reason: String,
    pub at: NaiveDateTime,
}

/// Durations the project is monitored against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationalPlan {
    durations: BTreeMap<String, Minutes>,
    ledger: Vec<TransferRecord>,
}

impl OperationalPlan {
    /// Every task starts at its optimistic estimate.
    pub fn from_network(network: &Network) -> Self {
        OperationalPlan {
            durations: network
                .tasks()
                .iter()
                .map(|t| (t.code.clone(), t.optimistic))
                .collect(),
            ledger: Vec::new(),
        }
    }

    /// Rebuilds a plan from the pristine network and a transfer ledger.
    pub fn replay(network: &Network, ledger: &[TransferRecord]) -> Result<Self, BufferError> {
        let mut plan = OperationalPlan::from_network(network);
        for record in ledger {
            plan.push_transfer(record.clone())?;
        }
        Ok(plan)
    }

    pub fn operational_duration(&self, code: &str) -> Option<Minutes> {
        self.durations.get(code).copied()
    }

    pub fn ledger(&self) -> &[TransferRecord] {
        &self.ledger
    }

    /// Total minutes transferred to one task.
    pub fn transferred_to(&self, code: &str) -> Minutes {
        self.ledger.iter().filter(|r| r.task == code).map(|r| r.amount).sum()
    }

    /// Operational durations aligned with `network.tasks()`.
    pub fn durations_for(&self, network: &Network) -> Vec<Minutes> {
        network
            .tasks()
            .iter()
            .map(|t| self.durations.get(&t.code).copied().unwrap_or(t.optimistic))
            .collect()
    }

    fn push_transfer(&mut self, record: TransferRecord) -> Result<(), BufferError> {
        check_transfer(record.amount, &record.reason)?;
        let slot = self
            .durations
            .get_mut(&record.task)
            .ok_or_else(|| BufferError::UnknownTask(record.task.clone()))?;
        *slot += record.amount;
        self.ledger.push(record);
        Ok(())
    }

    /// One JSON object per line: `{"task":..,"amount":..,"reason":..,"at":..}`.
    pub fn write_ledger_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for record in &self.ledger {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn read_ledger_jsonl<R: BufRead>(input: R) -> Result<Vec<TransferRecord>, BufferError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| BufferError::MalformedLedger { line: i + 1, reason: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| BufferError::MalformedLedger { line: i + 1, reason: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BufferState {
    pub value: Minutes,
    /// Critical tasks the value was summed over.
    pub computed_over: Vec<String>,
}

impl BufferState {
    pub fn is_exhausted(&self) -> bool {
        self.value == 0
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BufferError {
    #[error("UnknownTask: no task with code {0}")]
    UnknownTask(String),
    #[error("NonPositiveTransfer: transfer amount must be positive, got {0}")]
    NonPositiveTransfer(Minutes),
    #[error("EmptyReason: a transfer needs the reason that caused it")]
    EmptyReason,
    #[error("PercentOutOfRange: need 0 <= actual ({actual}) <= planned ({planned}) <= 100")]
    PercentOutOfRange { planned: f64, actual: f64 },
    #[error("NonPositiveDuration: operational duration must be positive")]
    NonPositiveDuration,
    #[error("MalformedLedger: line {line}: {reason}")]
    MalformedLedger { line: usize, reason: String },
}

impl BufferError {
    pub fn code(&self) -> &'static str {
        match self {
            BufferError::UnknownTask(_) => "UnknownTask",
            BufferError::NonPositiveTransfer(_) => "NonPositiveTransfer",
            BufferError::EmptyReason => "EmptyReason",
            BufferError::PercentOutOfRange { .. } => "PercentOutOfRange",
            BufferError::NonPositiveDuration => "NonPositiveDuration",
            BufferError::MalformedLedger { .. } => "MalformedLedger",
        }
    }
}

fn check_transfer(amount: Minutes, reason: &str) -> Result<(), BufferError> {
    if amount <= 0 {
        return Err(BufferError::NonPositiveTransfer(amount));
    }
    if reason.trim().is_empty() {
        return Err(BufferError::EmptyReason);
    }
    Ok(())
}

pub fn operational_schedule(network: &Network, plan: &OperationalPlan) -> Schedule {
    schedule_with_durations(network, &plan.durations_for(network), ScheduleBasis::Operational)
}

pub fn compute_buffer(network: &Network, plan: &OperationalPlan) -> BufferState {
    buffer_from_schedule(network, plan, &operational_schedule(network, plan))
}

fn buffer_from_schedule(network: &Network, plan: &OperationalPlan, schedule: &Schedule) -> BufferState {
    let path = schedule.primary_critical_path().to_vec();
    let safety: Minutes = path
        .iter()
        .filter_map(|code| network.task(code))
        .map(|t| {
            let operational = plan.operational_duration(&t.code).unwrap_or(t.optimistic);
            (t.pessimistic - operational).max(0)
        })
        .sum();
    BufferState {
        value: safety.div_euclid(2),
        computed_over: path,
    }
}

/// Knowledge emitted by a transfer, for the experience store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferNote {
    pub task: String,
    pub optimistic_initial: Minutes,
    pub amount: Minutes,
    pub reason: String,
}

/// Emitted when a transfer changed the set of critical paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalPathChange {
    /// The newly critical sequence (first in tie order), or the first
    /// remaining path when paths only dropped out.
    pub sequence: Vec<String>,
    pub trigger_task: String,
    pub transfer_value: Minutes,
    pub path_duration: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplanReport {
    pub critical_path: Vec<String>,
    pub critical_paths: Vec<Vec<String>>,
    pub project_duration: Minutes,
    pub buffer_before: Minutes,
    pub buffer_after: Minutes,
    pub critical_path_changed: bool,
    /// The task now runs longer than its pessimistic estimate.
    pub over_pessimistic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransferOutcome {
    pub plan: OperationalPlan,
    pub buffer: BufferState,
    pub report: ReplanReport,
    pub transfer_note: TransferNote,
    pub cp_change: Option<CriticalPathChange>,
}

pub fn apply_transfer(
    network: &Network,
    plan: &OperationalPlan,
    task_code: &str,
    amount: Minutes,
    reason: &str,
    at: NaiveDateTime,
) -> Result<TransferOutcome, BufferError> {
    let task = network
        .task(task_code)
        .ok_or_else(|| BufferError::UnknownTask(task_code.to_string()))?;
    check_transfer(amount, reason)?;

    let before_schedule = operational_schedule(network, plan);
    let before = buffer_from_schedule(network, plan, &before_schedule);

    let mut next = plan.clone();
    next.push_transfer(TransferRecord {
        task: task_code.to_string(),
        amount,
        reason: reason.trim().to_string(),
        at,
    })?;
    let after_schedule = operational_schedule(network, &next);
    let buffer = buffer_from_schedule(network, &next, &after_schedule);

    let changed = before_schedule.critical_paths != after_schedule.critical_paths;
    let cp_change = changed.then(|| {
        let sequence = after_schedule
            .critical_paths
            .iter()
            .find(|p| !before_schedule.critical_paths.contains(p))
            .cloned()
            .unwrap_or_else(|| after_schedule.primary_critical_path().to_vec());
        CriticalPathChange {
            sequence,
            trigger_task: task_code.to_string(),
            transfer_value: amount,
            path_duration: after_schedule.project_duration,
        }
    });

    let operational = next.operational_duration(task_code).unwrap_or(task.optimistic);
    let report = ReplanReport {
        critical_path: after_schedule.primary_critical_path().to_vec(),
        critical_paths: after_schedule.critical_paths.clone(),
        project_duration: after_schedule.project_duration,
        buffer_before: before.value,
        buffer_after: buffer.value,
        critical_path_changed: changed,
        over_pessimistic: operational > task.pessimistic,
    };
    Ok(TransferOutcome {
        transfer_note: TransferNote {
            task: task_code.to_string(),
            optimistic_initial: task.optimistic,
            amount,
            reason: reason.trim().to_string(),
        },
        plan: next,
        buffer,
        report,
        cp_change,
    })
}

/// Progress of one task, as seen by the compensation suggestion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskProgress {
    pub operational_duration: Minutes,
    pub planned_pct: f64,
    pub actual_pct: f64,
}

/// Minutes needed to compensate the gap between planned and achieved
/// progress, rounded up and at least one plan unit when there is any gap.
pub fn suggest_transfer(progress: TaskProgress, plan_unit_minutes: Minutes) -> Result<Minutes, BufferError> {
    let TaskProgress {
        operational_duration,
        planned_pct,
        actual_pct,
    } = progress;
    if !(0.0..=100.0).contains(&actual_pct) || !(0.0..=100.0).contains(&planned_pct) || actual_pct > planned_pct {
        return Err(BufferError::PercentOutOfRange {
            planned: planned_pct,
            actual: actual_pct,
        });
    }
    if operational_duration <= 0 {
        return Err(BufferError::NonPositiveDuration);
    }
    let gap = planned_pct - actual_pct;
    if gap <= 0.0 {
        return Ok(0);
    }
    // Tolerance keeps float noise such as 20.000000000000004 from rounding up.
    let raw = gap * operational_duration as f64 / 100.0;
    let minutes = (raw - 1e-9).ceil().max(0.0) as Minutes;
    Ok(minutes.max(plan_unit_minutes.max(1)))
}
