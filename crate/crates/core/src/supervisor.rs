//! Live supervision of a running project.
//!
//! Task phases are not stored; they are derived on every evaluation from the
//! operational schedule, the calendar, the injected `now`, and the few facts
//! users supply (start confirmations, progress, transfers, closures). A task
//! whose start was confirmed finishes automatically at the end of its
//! operational window. A due task whose start was never confirmed keeps
//! running past its window and holds its successors back.
//!
//! Every mutation is a [`Command`]; replaying the command log on the
//! pristine project reproduces the state exactly.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{
    apply_transfer, compute_buffer, suggest_transfer, BufferError, BufferState, OperationalPlan, ReplanReport,
    TaskProgress, TransferRecord,
};
use crate::calendar::{CalendarError, WorkCalendar};
use crate::cpm::{
    classify_completion_estimate, compute_schedule, pert_statistics, CompletionEstimate, DurationLens, PertError,
    Thresholds,
};
use crate::evm::{cost_report, ActualCost, CostLedger, CostPlan, CostReport, EvmError, ExecutedRecord, RecordOutcome};
use crate::kb::{Curation, KnowledgeBase};
use crate::plan::{build_network, Minutes, Money, Network, NetworkError, PlanError, Task};

fn default_alert_fraction() -> f64 {
    0.10
}

/// Everything needed to start supervising a project.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSpec {
    /// Planner type; experience frames are scoped by it.
    pub tag: String,
    pub tasks: Vec<Task>,
    pub calendar: WorkCalendar,
    /// Time the project is expected to take, in working minutes. Defaults
    /// to the PERT expected duration.
    #[serde(default)]
    pub scheduled_time: Option<Minutes>,
    /// Tasks planned as several cost instances (recurring tasks).
    #[serde(default)]
    pub repetitions: BTreeMap<String, u32>,
    #[serde(default = "default_alert_fraction")]
    pub alert_fraction: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    NotStarted,
    InProgress,
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Marker {
    #[serde(rename = "")]
    None,
    #[serde(rename = ">")]
    InProgress,
    #[serde(rename = "!")]
    Finished,
}

impl Marker {
    pub fn for_phase(phase: Phase) -> Self {
        match phase {
            Phase::NotStarted => Marker::None,
            Phase::InProgress => Marker::InProgress,
            Phase::Finished => Marker::Finished,
        }
    }

    pub fn glyph(self) -> &'static str {
        match self {
            Marker::None => "",
            Marker::InProgress => ">",
            Marker::Finished => "!",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStatus {
    pub code: String,
    pub name: String,
    pub phase: Phase,
    pub marker: Marker,
    pub planned_pct: f64,
    pub actual_pct: Option<f64>,
    pub nearing_end: bool,
    pub alert_latched: bool,
    pub start_confirmed: bool,
    pub critical: bool,
    pub operational_duration: Minutes,
    pub early_start: Minutes,
    pub early_finish: Minutes,
    pub window_start: NaiveDateTime,
    pub window_finish: NaiveDateTime,
    pub pending_transfer: Option<Minutes>,
    pub unresolved_deviation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub scheduled_time: Minutes,
    pub expected_duration: Minutes,
    pub probability: f64,
    pub z_value: Option<f64>,
    pub classification: CompletionEstimate,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub now: NaiveDateTime,
    pub origin: NaiveDateTime,
    pub tasks: Vec<TaskStatus>,
    pub buffer: BufferState,
    pub initial_buffer: Minutes,
    pub completion: Completion,
    /// Tasks that should be running but whose start nobody confirmed.
    pub prompts: Vec<DialogStep>,
    pub projected_duration: Minutes,
    pub projected_finish: NaiveDateTime,
    pub project_complete: bool,
}

impl StatusReport {
    pub fn task(&self, code: &str) -> Option<&TaskStatus> {
        self.tasks.iter().find(|t| t.code == code)
    }
}

/// Steps of the assistant dialog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DialogStep {
    /// The task should be running according to the plan; did it start?
    ConfirmInProgress { task: String, planned_pct: f64 },
    /// Started; enter the achieved percentage next to the planned one.
    EnterAchievedPct { task: String, planned_pct: f64 },
    /// Behind plan; the suggested transfer compensates the gap.
    ProposeTransfer {
        task: String,
        amount: Minutes,
        planned_pct: f64,
        actual_pct: f64,
    },
    OnSchedule { task: String, planned_pct: f64, actual_pct: f64 },
    /// The user declined the proposed transfer.
    DeviationUnresolved { task: String },
    ProjectAnalysis {
        replan: Option<ReplanReport>,
        analysis: Box<AnalysisReport>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskDiagnostic {
    pub code: String,
    pub name: String,
    pub phase: Phase,
    pub marker: Marker,
    pub optimistic: Minutes,
    pub probable: Minutes,
    pub pessimistic: Minutes,
    pub operational: Minutes,
    pub actual: Option<Minutes>,
    /// `actual - operational` for finished tasks.
    pub deviation: Option<Minutes>,
    pub transfers: Vec<TransferRecord>,
    pub critical: bool,
    pub unresolved_deviation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub at: Option<NaiveDateTime>,
    pub started: Vec<String>,
    pub finished: Vec<String>,
    pub not_started: Vec<String>,
    pub critical_path: Vec<String>,
    pub buffer: BufferState,
    pub initial_buffer: Minutes,
    pub completion: Completion,
    pub projected_duration: Minutes,
    /// Set once every task is finished: did the project meet its scheduled time?
    pub achieved: Option<bool>,
    pub unresolved_deviations: Vec<String>,
    pub tasks: Vec<TaskDiagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloseReport {
    pub task: String,
    pub actual: Minutes,
    pub operational: Minutes,
    pub deviation: Minutes,
}

/// A state-changing request. The log of these is the source of truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Command {
    Tick {
        now: NaiveDateTime,
    },
    ConfirmStart {
        task: String,
        confirmed: bool,
    },
    ReportProgress {
        task: String,
        actual_pct: f64,
    },
    ConfirmTransfer {
        task: String,
        amount: Minutes,
        reason: String,
        accepted: bool,
    },
    CloseTask {
        task: String,
        actual_minutes: Minutes,
    },
    RecordActualCost {
        task: String,
        sequence_index: u32,
        ac: Money,
    },
    AddException {
        date: NaiveDate,
    },
    CommitExperience {
        #[serde(default)]
        curation: Curation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    Status(Box<StatusReport>),
    Dialog(DialogStep),
    Closed(CloseReport),
    CostRecorded { outcome: RecordOutcome },
    CalendarUpdated,
    Committed { experience: KnowledgeBase },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SupervisorError {
    #[error("ClockBeforeStart: {0} is before the project start")]
    ClockBeforeStart(NaiveDateTime),
    #[error("UnknownTask: no task with code {0}")]
    UnknownTask(String),
    #[error("NotDueYet: task {0} is not scheduled to be in progress")]
    NotDueYet(String),
    #[error("TaskNotInProgress: task {0} is not in progress")]
    TaskNotInProgress(String),
    #[error("PercentOutOfRange: {0} is not within 0..=100")]
    PercentOutOfRange(f64),
    #[error("NoPendingProposal: no transfer proposal is pending for task {0}")]
    NoPendingProposal(String),
    #[error("ProposalPending: a transfer proposal is already pending for task {0}")]
    ProposalPending(String),
    #[error("InvalidActualDuration: actual duration must be positive, got {0}")]
    InvalidActualDuration(Minutes),
    #[error("AlreadyCommitted: the project experience was already committed")]
    AlreadyCommitted,
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
    #[error("OutOfOrderLog: expected sequence number {expected}, found {found}")]
    OutOfOrderLog { expected: u64, found: u64 },
    #[error("MalformedLog: line {line}: {reason}")]
    MalformedLog { line: usize, reason: String },
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Buffer(#[from] BufferError),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error(transparent)]
    Pert(#[from] PertError),
    #[error(transparent)]
    Evm(#[from] EvmError),
}

impl SupervisorError {
    pub fn code(&self) -> &'static str {
        match self {
            SupervisorError::ClockBeforeStart(_) => "ClockBeforeStart",
            SupervisorError::UnknownTask(_) => "UnknownTask",
            SupervisorError::NotDueYet(_) => "NotDueYet",
            SupervisorError::TaskNotInProgress(_) => "TaskNotInProgress",
            SupervisorError::PercentOutOfRange(_) => "PercentOutOfRange",
            SupervisorError::NoPendingProposal(_) => "NoPendingProposal",
            SupervisorError::ProposalPending(_) => "ProposalPending",
            SupervisorError::InvalidActualDuration(_) => "InvalidActualDuration",
            SupervisorError::AlreadyCommitted => "AlreadyCommitted",
            SupervisorError::InvalidConfig(_) => "InvalidConfig",
            SupervisorError::OutOfOrderLog { .. } => "OutOfOrderLog",
            SupervisorError::MalformedLog { .. } => "MalformedLog",
            SupervisorError::Plan(e) => e.code(),
            SupervisorError::Network(e) => e.code(),
            SupervisorError::Buffer(e) => e.code(),
            SupervisorError::Calendar(e) => e.code(),
            SupervisorError::Pert(_) => "NonPositiveScheduledTime",
            SupervisorError::Evm(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct TaskTrack {
    start_confirmed: bool,
    actual_pct: Option<f64>,
    closed_actual: Option<Minutes>,
    pending_transfer: Option<Minutes>,
    unresolved_deviation: bool,
    alert_latched: bool,
}

/// Evaluated state of one task at some instant.
#[derive(Debug, Clone)]
struct TaskView {
    phase: Phase,
    early_start: Minutes,
    duration: Minutes,
    planned_pct: f64,
    nearing_end: bool,
    window_start: NaiveDateTime,
    window_finish: NaiveDateTime,
}

#[derive(Debug, Clone)]
struct Timeline {
    views: Vec<TaskView>,
    projected_duration: Minutes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Supervisor {
    tag: String,
    network: Network,
    calendar: WorkCalendar,
    plan: OperationalPlan,
    alert_fraction: f64,
    thresholds: Thresholds,
    scheduled_time: Minutes,
    initial_buffer: Minutes,
    clock: Option<NaiveDateTime>,
    tracks: BTreeMap<String, TaskTrack>,
    experience: KnowledgeBase,
    cost_plan: CostPlan,
    repetitions: BTreeMap<String, u32>,
    costs: CostLedger,
    committed: Option<Curation>,
}

impl Supervisor {
    pub fn new(spec: ProjectSpec) -> Result<Self, SupervisorError> {
        if !(0.0..=1.0).contains(&spec.alert_fraction) {
            return Err(SupervisorError::InvalidConfig(format!(
                "alert_fraction {} must be within 0..=1",
                spec.alert_fraction
            )));
        }
        if spec.tag.trim().is_empty() {
            return Err(SupervisorError::InvalidConfig("project tag must not be empty".into()));
        }
        for task in &spec.tasks {
            task.validate()?;
        }
        let network = build_network(spec.tasks)?;
        for code in spec.repetitions.keys() {
            if network.task(code).is_none() {
                return Err(SupervisorError::UnknownTask(code.clone()));
            }
        }
        let scheduled_time = match spec.scheduled_time {
            Some(t) if t <= 0 => return Err(PertError::NonPositiveScheduledTime.into()),
            Some(t) => t,
            None => compute_schedule(&network, DurationLens::PertExpected).project_duration.max(1),
        };
        let plan = OperationalPlan::from_network(&network);
        let initial_buffer = compute_buffer(&network, &plan).value;
        let baseline = compute_schedule(&network, DurationLens::Probable);
        let cost_plan = CostPlan::from_schedule(&network, &baseline, &spec.repetitions);
        let tracks = network
            .tasks()
            .iter()
            .map(|t| (t.code.clone(), TaskTrack::default()))
            .collect();
        Ok(Supervisor {
            tag: spec.tag,
            network,
            calendar: spec.calendar,
            plan,
            alert_fraction: spec.alert_fraction,
            thresholds: spec.thresholds,
            scheduled_time,
            initial_buffer,
            clock: None,
            tracks,
            experience: KnowledgeBase::new(),
            cost_plan,
            repetitions: spec.repetitions,
            costs: CostLedger::default(),
            committed: None,
        })
    }

    /// Rebuilds a supervisor by replaying a command log on a fresh project.
    pub fn replay<'a>(
        spec: ProjectSpec,
        log: impl IntoIterator<Item = &'a LogEntry>,
    ) -> Result<Self, SupervisorError> {
        let mut sup = Supervisor::new(spec)?;
        for (expected, entry) in (1..).zip(log) {
            if entry.seq != expected {
                return Err(SupervisorError::OutOfOrderLog {
                    expected,
                    found: entry.seq,
                });
            }
            sup.apply(&entry.command)?;
        }
        Ok(sup)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn calendar(&self) -> &WorkCalendar {
        &self.calendar
    }

    pub fn plan(&self) -> &OperationalPlan {
        &self.plan
    }

    pub fn experience(&self) -> &KnowledgeBase {
        &self.experience
    }

    pub fn clock(&self) -> Option<NaiveDateTime> {
        self.clock
    }

    /// Equal apart from the clock of the last tick.
    pub fn same_except_clock(&self, other: &Supervisor) -> bool {
        let mut probe = other.clone();
        probe.clock = self.clock;
        *self == probe
    }

    pub fn scheduled_time(&self) -> Minutes {
        self.scheduled_time
    }

    pub fn initial_buffer(&self) -> Minutes {
        self.initial_buffer
    }

    pub fn cost_plan(&self) -> &CostPlan {
        &self.cost_plan
    }

    pub fn buffer(&self) -> BufferState {
        compute_buffer(&self.network, &self.plan)
    }

    pub fn apply(&mut self, command: &Command) -> Result<Outcome, SupervisorError> {
        match command {
            Command::Tick { now } => self.tick(*now).map(|r| Outcome::Status(Box::new(r))),
            Command::ConfirmStart { task, confirmed } => self.confirm_start(task, *confirmed).map(Outcome::Dialog),
            Command::ReportProgress { task, actual_pct } => {
                self.report_progress(task, *actual_pct).map(Outcome::Dialog)
            }
            Command::ConfirmTransfer {
                task,
                amount,
                reason,
                accepted,
            } => self.confirm_transfer(task, *amount, reason, *accepted).map(Outcome::Dialog),
            Command::CloseTask { task, actual_minutes } => self.close_task(task, *actual_minutes).map(Outcome::Closed),
            Command::RecordActualCost {
                task,
                sequence_index,
                ac,
            } => self
                .record_actual_cost(task, *sequence_index, *ac)
                .map(|outcome| Outcome::CostRecorded { outcome }),
            Command::AddException { date } => {
                self.add_exception(*date);
                Ok(Outcome::CalendarUpdated)
            }
            Command::CommitExperience { curation } => self
                .commit_experience(curation.clone())
                .map(|experience| Outcome::Committed { experience }),
        }
    }

    fn track(&self, code: &str) -> Result<&TaskTrack, SupervisorError> {
        self.tracks
            .get(code)
            .ok_or_else(|| SupervisorError::UnknownTask(code.to_string()))
    }

    fn track_mut(&mut self, code: &str) -> Result<&mut TaskTrack, SupervisorError> {
        self.tracks
            .get_mut(code)
            .ok_or_else(|| SupervisorError::UnknownTask(code.to_string()))
    }

    fn operational(&self, code: &str) -> Minutes {
        self.plan.operational_duration(code).unwrap_or_default()
    }

    /// Derives every task's phase and window at `now` (`None`: before sync).
    fn timeline(&self, now: Option<NaiveDateTime>) -> Timeline {
        let cal = &self.calendar;
        let origin = cal.origin();
        let now_offset = now.filter(|n| *n >= origin).map(|n| cal.working_time_between(origin, n));
        let tasks = self.network.tasks();
        let incoming = self.network.incoming();
        let outgoing = self.network.outgoing();

        let mut views: Vec<Option<TaskView>> = vec![None; tasks.len()];
        let mut event_time: BTreeMap<u32, Minutes> = BTreeMap::new();
        for node in self.network.topological_nodes() {
            let preds = &incoming[&node];
            let es = preds
                .iter()
                .map(|&i| {
                    let v = views[i].as_ref().expect("predecessor evaluated first");
                    v.early_start + v.duration
                })
                .max()
                .unwrap_or(0);
            let preds_done = preds
                .iter()
                .all(|&i| views[i].as_ref().map(|v| v.phase) == Some(Phase::Finished));
            event_time.insert(node, es);

            for &ti in &outgoing[&node] {
                let task = &tasks[ti];
                let track = &self.tracks[&task.code];
                let op = self.operational(&task.code);
                let window_start = cal.roll_forward(advance_from(cal, origin, es));

                let (phase, duration) = if let Some(actual) = track.closed_actual {
                    (Phase::Finished, actual)
                } else if task.is_dummy() {
                    match now_offset {
                        Some(off) if preds_done && off >= es => (Phase::Finished, 0),
                        _ => (Phase::NotStarted, 0),
                    }
                } else {
                    match (now, now_offset) {
                        (Some(n), Some(off)) if preds_done && n >= window_start => {
                            let elapsed = off - es;
                            if track.start_confirmed && elapsed >= op {
                                (Phase::Finished, op)
                            } else if !track.start_confirmed && elapsed > op {
                                (Phase::InProgress, elapsed)
                            } else {
                                (Phase::InProgress, op)
                            }
                        }
                        _ => (Phase::NotStarted, op),
                    }
                };

                let (planned_pct, nearing_end) = match phase {
                    Phase::NotStarted => (0.0, false),
                    Phase::Finished => (100.0, false),
                    Phase::InProgress => {
                        let elapsed = now_offset.unwrap_or(es) - es;
                        let pct = if op > 0 { (100.0 * elapsed as f64 / op as f64).clamp(0.0, 100.0) } else { 100.0 };
                        let remaining = es + op - now_offset.unwrap_or(es);
                        (pct, remaining as f64 <= self.alert_fraction * op as f64)
                    }
                };
                views[ti] = Some(TaskView {
                    phase,
                    early_start: es,
                    duration,
                    planned_pct,
                    nearing_end,
                    window_start,
                    window_finish: advance_from(cal, origin, es + duration),
                });
            }
        }
        let projected_duration = event_time.get(&self.network.sink_node()).copied().unwrap_or(0);
        Timeline {
            views: views.into_iter().map(|v| v.expect("every task evaluated")).collect(),
            projected_duration,
        }
    }

    fn view_at_clock(&self, code: &str) -> Result<Option<TaskView>, SupervisorError> {
        let idx = self
            .network
            .index_of(code)
            .ok_or_else(|| SupervisorError::UnknownTask(code.to_string()))?;
        Ok(self.clock.map(|now| self.timeline(Some(now)).views.swap_remove(idx)))
    }

    /// Estimates with progress folded in: finished tasks are certain, running
    /// tasks cannot be shorter than their operational duration.
    fn adjusted_network(&self, timeline: &Timeline) -> Network {
        let tasks = self
            .network
            .tasks()
            .iter()
            .zip(&timeline.views)
            .map(|(t, v)| {
                let mut t = t.clone();
                if v.phase == Phase::Finished {
                    t.optimistic = v.duration;
                    t.probable = v.duration;
                    t.pessimistic = v.duration;
                } else {
                    let op = self.plan.operational_duration(&t.code).unwrap_or(t.optimistic);
                    t.optimistic = op;
                    t.probable = t.probable.max(op);
                    t.pessimistic = t.pessimistic.max(op);
                }
                t
            })
            .collect();
        self.network.with_tasks(tasks)
    }

    fn completion(&self, timeline: &Timeline) -> Completion {
        let stats = pert_statistics(&self.adjusted_network(timeline), self.scheduled_time as f64)
            .expect("scheduled time validated at construction");
        let classification = classify_completion_estimate(stats.completion_probability, self.thresholds);
        Completion {
            scheduled_time: self.scheduled_time,
            expected_duration: stats.expected_duration,
            probability: stats.completion_probability,
            z_value: stats.z_value,
            classification,
            message: classification.message().map(str::to_string),
        }
    }

    fn critical_codes(&self) -> BTreeMap<String, bool> {
        let buffer = self.buffer();
        self.network
            .tasks()
            .iter()
            .map(|t| (t.code.clone(), buffer.computed_over.contains(&t.code)))
            .collect()
    }

    fn status_report(&self, now: NaiveDateTime) -> StatusReport {
        let timeline = self.timeline(Some(now));
        let critical = self.critical_codes();
        let mut prompts = Vec::new();
        let tasks: Vec<TaskStatus> = self
            .network
            .tasks()
            .iter()
            .zip(&timeline.views)
            .map(|(t, v)| {
                let track = &self.tracks[&t.code];
                if v.phase == Phase::InProgress && !track.start_confirmed && track.pending_transfer.is_none() {
                    prompts.push(DialogStep::ConfirmInProgress {
                        task: t.code.clone(),
                        planned_pct: v.planned_pct,
                    });
                }
                TaskStatus {
                    code: t.code.clone(),
                    name: t.name.clone(),
                    phase: v.phase,
                    marker: Marker::for_phase(v.phase),
                    planned_pct: v.planned_pct,
                    actual_pct: if v.phase == Phase::Finished { Some(100.0) } else { track.actual_pct },
                    nearing_end: v.nearing_end,
                    alert_latched: track.alert_latched || v.nearing_end,
                    start_confirmed: track.start_confirmed,
                    critical: critical[&t.code],
                    operational_duration: self.operational(&t.code),
                    early_start: v.early_start,
                    early_finish: v.early_start + v.duration,
                    window_start: v.window_start,
                    window_finish: v.window_finish,
                    pending_transfer: track.pending_transfer,
                    unresolved_deviation: track.unresolved_deviation,
                }
            })
            .collect();
        let origin = self.calendar.origin();
        StatusReport {
            now,
            origin,
            project_complete: tasks.iter().all(|t| t.phase == Phase::Finished),
            tasks,
            buffer: self.buffer(),
            initial_buffer: self.initial_buffer,
            completion: self.completion(&timeline),
            prompts,
            projected_duration: timeline.projected_duration,
            projected_finish: advance_from(&self.calendar, origin, timeline.projected_duration),
        }
    }

    /// Evaluates the project at `now`. Idempotent for a fixed `now`; the
    /// only state touched is the clock and the nearing-end alert latches.
    pub fn tick(&mut self, now: NaiveDateTime) -> Result<StatusReport, SupervisorError> {
        if now < self.calendar.start_instant() {
            return Err(SupervisorError::ClockBeforeStart(now));
        }
        self.clock = Some(now);
        let report = self.status_report(now);
        for status in report.tasks.iter().filter(|s| s.nearing_end) {
            if let Some(track) = self.tracks.get_mut(&status.code) {
                track.alert_latched = true;
            }
        }
        Ok(report)
    }

    /// Read-only status at the last tick (or at the origin before any tick).
    pub fn status(&self) -> StatusReport {
        self.status_report(self.clock.unwrap_or_else(|| self.calendar.origin()))
    }

    pub fn confirm_start(&mut self, code: &str, confirmed: bool) -> Result<DialogStep, SupervisorError> {
        let view = match self.view_at_clock(code)? {
            Some(v) if v.phase == Phase::InProgress => v,
            Some(v) if v.phase == Phase::Finished => {
                return Err(SupervisorError::TaskNotInProgress(code.to_string()))
            }
            _ => return Err(SupervisorError::NotDueYet(code.to_string())),
        };
        let op = self.operational(code);
        let unit = self.calendar.plan_unit_minutes();
        let track = self.track(code)?;
        if confirmed {
            self.track_mut(code)?.start_confirmed = true;
            return Ok(DialogStep::EnterAchievedPct {
                task: code.to_string(),
                planned_pct: view.planned_pct,
            });
        }
        if track.pending_transfer.is_some() {
            return Err(SupervisorError::ProposalPending(code.to_string()));
        }
        let amount = suggest_transfer(
            TaskProgress {
                operational_duration: op,
                planned_pct: view.planned_pct,
                actual_pct: 0.0,
            },
            unit,
        )?;
        let track = self.track_mut(code)?;
        track.actual_pct = Some(0.0);
        if amount == 0 {
            return Ok(DialogStep::OnSchedule {
                task: code.to_string(),
                planned_pct: view.planned_pct,
                actual_pct: 0.0,
            });
        }
        track.pending_transfer = Some(amount);
        Ok(DialogStep::ProposeTransfer {
            task: code.to_string(),
            amount,
            planned_pct: view.planned_pct,
            actual_pct: 0.0,
        })
    }

    pub fn report_progress(&mut self, code: &str, actual_pct: f64) -> Result<DialogStep, SupervisorError> {
        if !(0.0..=100.0).contains(&actual_pct) {
            return Err(SupervisorError::PercentOutOfRange(actual_pct));
        }
        let view = match self.view_at_clock(code)? {
            Some(v) if v.phase == Phase::InProgress => v,
            _ => return Err(SupervisorError::TaskNotInProgress(code.to_string())),
        };
        let planned = view.planned_pct;
        if actual_pct >= planned {
            let track = self.track_mut(code)?;
            track.start_confirmed = true;
            track.actual_pct = Some(actual_pct);
            return Ok(DialogStep::OnSchedule {
                task: code.to_string(),
                planned_pct: planned,
                actual_pct,
            });
        }
        if self.track(code)?.pending_transfer.is_some() {
            return Err(SupervisorError::ProposalPending(code.to_string()));
        }
        let amount = suggest_transfer(
            TaskProgress {
                operational_duration: self.operational(code),
                planned_pct: planned,
                actual_pct,
            },
            self.calendar.plan_unit_minutes(),
        )?;
        let track = self.track_mut(code)?;
        track.start_confirmed = true;
        track.actual_pct = Some(actual_pct);
        track.pending_transfer = Some(amount);
        Ok(DialogStep::ProposeTransfer {
            task: code.to_string(),
            amount,
            planned_pct: planned,
            actual_pct,
        })
    }

    /// Accepts (possibly with an edited amount) or declines the pending
    /// proposal for a task.
    pub fn confirm_transfer(
        &mut self,
        code: &str,
        amount: Minutes,
        reason: &str,
        accepted: bool,
    ) -> Result<DialogStep, SupervisorError> {
        if self.track(code)?.pending_transfer.is_none() {
            return Err(SupervisorError::NoPendingProposal(code.to_string()));
        }
        if !accepted {
            let track = self.track_mut(code)?;
            track.pending_transfer = None;
            track.unresolved_deviation = true;
            return Ok(DialogStep::DeviationUnresolved { task: code.to_string() });
        }
        // Extending a task that already ended would reopen it.
        match self.view_at_clock(code)? {
            Some(v) if v.phase == Phase::InProgress => {}
            _ => return Err(SupervisorError::TaskNotInProgress(code.to_string())),
        }
        let at = self.clock.unwrap_or_else(|| self.calendar.origin());
        let outcome = apply_transfer(&self.network, &self.plan, code, amount, reason, at)?;
        self.plan = outcome.plan;
        self.experience.record_transfer_frame(&self.tag, &outcome.transfer_note);
        if let Some(change) = &outcome.cp_change {
            self.experience.record_cp_frame(&self.tag, change);
        }
        let track = self.track_mut(code)?;
        track.pending_transfer = None;
        track.unresolved_deviation = false;
        track.alert_latched = false;
        Ok(DialogStep::ProjectAnalysis {
            replan: Some(outcome.report),
            analysis: Box::new(self.project_analysis()),
        })
    }

    pub fn close_task(&mut self, code: &str, actual_minutes: Minutes) -> Result<CloseReport, SupervisorError> {
        match self.view_at_clock(code)? {
            Some(v) if v.phase == Phase::InProgress => {}
            _ => return Err(SupervisorError::TaskNotInProgress(code.to_string())),
        }
        if actual_minutes <= 0 {
            return Err(SupervisorError::InvalidActualDuration(actual_minutes));
        }
        let operational = self.operational(code);
        let track = self.track_mut(code)?;
        track.closed_actual = Some(actual_minutes);
        track.start_confirmed = true;
        track.pending_transfer = None;
        track.actual_pct = Some(100.0);
        Ok(CloseReport {
            task: code.to_string(),
            actual: actual_minutes,
            operational,
            deviation: actual_minutes - operational,
        })
    }

    pub fn add_exception(&mut self, date: NaiveDate) {
        self.calendar = self.calendar.add_exception(date);
    }

    fn finished_views(&self) -> Vec<(usize, TaskView)> {
        let timeline = self.timeline(self.clock);
        timeline
            .views
            .into_iter()
            .enumerate()
            .filter(|(_, v)| v.phase == Phase::Finished)
            .collect()
    }

    pub fn record_actual_cost(
        &mut self,
        code: &str,
        sequence_index: u32,
        ac: Money,
    ) -> Result<RecordOutcome, SupervisorError> {
        let idx = self
            .network
            .index_of(code)
            .ok_or_else(|| SupervisorError::UnknownTask(code.to_string()))?;
        let finished = self.finished_views().into_iter().find(|(i, _)| *i == idx).map(|(_, v)| v);
        let at = finished
            .as_ref()
            .map(|v| cost_instant(v, sequence_index, self.repetitions.get(code).copied()))
            .unwrap_or_default();
        let outcome = self.costs.record_actual_cost(
            &self.cost_plan,
            code,
            sequence_index,
            ActualCost { ac, at },
            finished.is_some(),
        )?;
        Ok(outcome)
    }

    /// Executed cost instances: everything with a recorded actual cost, plus
    /// finished non-recurring tasks with a budget (reported as missing
    /// actuals until a cost is recorded).
    pub fn executed_records(&self) -> Vec<ExecutedRecord> {
        let mut records: Vec<ExecutedRecord> = self
            .costs
            .recorded()
            .map(|(code, seq, a)| ExecutedRecord {
                task_code: code.to_string(),
                sequence_index: seq,
                ac: Some(a.ac),
                at: a.at,
            })
            .collect();
        for (idx, view) in self.finished_views() {
            let task = &self.network.tasks()[idx];
            if task.is_dummy() || task.bcws_cost == 0 || self.repetitions.contains_key(&task.code) {
                continue;
            }
            if self.costs.actual(&task.code, 1).is_none() {
                records.push(ExecutedRecord {
                    task_code: task.code.clone(),
                    sequence_index: 1,
                    ac: None,
                    at: view.early_start + view.duration,
                });
            }
        }
        records
    }

    pub fn cost_report(&self) -> Result<CostReport, SupervisorError> {
        Ok(cost_report(&self.cost_plan, &self.executed_records())?)
    }

    /// Marks the end of the project. Returns the experience to merge into
    /// the shared knowledge base, with ignored frames removed.
    pub fn commit_experience(&mut self, curation: Curation) -> Result<KnowledgeBase, SupervisorError> {
        if self.committed.is_some() {
            return Err(SupervisorError::AlreadyCommitted);
        }
        let mut curated = KnowledgeBase::new();
        curated.merge_curated(&self.experience, &curation);
        self.committed = Some(curation);
        Ok(curated)
    }

    pub fn is_committed(&self) -> bool {
        self.committed.is_some()
    }

    pub fn project_analysis(&self) -> AnalysisReport {
        let timeline = self.timeline(self.clock);
        let critical = self.critical_codes();
        let mut started = Vec::new();
        let mut finished = Vec::new();
        let mut not_started = Vec::new();
        let mut unresolved = Vec::new();
        let diagnostics: Vec<TaskDiagnostic> = self
            .network
            .tasks()
            .iter()
            .zip(&timeline.views)
            .map(|(t, v)| {
                let track = &self.tracks[&t.code];
                match v.phase {
                    Phase::NotStarted => not_started.push(t.code.clone()),
                    Phase::InProgress => started.push(t.code.clone()),
                    Phase::Finished => finished.push(t.code.clone()),
                }
                if track.unresolved_deviation {
                    unresolved.push(t.code.clone());
                }
                let operational = self.operational(&t.code);
                let actual = (v.phase == Phase::Finished).then_some(v.duration);
                TaskDiagnostic {
                    code: t.code.clone(),
                    name: t.name.clone(),
                    phase: v.phase,
                    marker: Marker::for_phase(v.phase),
                    optimistic: t.optimistic,
                    probable: t.probable,
                    pessimistic: t.pessimistic,
                    operational,
                    actual,
                    deviation: actual.map(|a| a - operational),
                    transfers: self.plan.ledger().iter().filter(|r| r.task == t.code).cloned().collect(),
                    critical: critical[&t.code],
                    unresolved_deviation: track.unresolved_deviation,
                }
            })
            .collect();
        let buffer = self.buffer();
        let all_done = not_started.is_empty() && started.is_empty();
        AnalysisReport {
            at: self.clock,
            started,
            finished,
            not_started,
            critical_path: buffer.computed_over.clone(),
            buffer,
            initial_buffer: self.initial_buffer,
            completion: self.completion(&timeline),
            projected_duration: timeline.projected_duration,
            achieved: all_done.then_some(timeline.projected_duration <= self.scheduled_time),
            unresolved_deviations: unresolved,
            tasks: diagnostics,
        }
    }
}

fn advance_from(cal: &WorkCalendar, origin: NaiveDateTime, offset: Minutes) -> NaiveDateTime {
    cal.advance(origin, offset.max(0)).expect("origin is a working instant")
}

fn cost_instant(view: &TaskView, sequence_index: u32, repetitions: Option<u32>) -> Minutes {
    let count = Minutes::from(repetitions.unwrap_or(1).max(1));
    let i = Minutes::from(sequence_index).clamp(1, count);
    view.early_start + view.duration * i / count
}

pub fn write_log_entry<W: Write>(mut out: W, entry: &LogEntry) -> std::io::Result<()> {
    serde_json::to_writer(&mut out, entry)?;
    out.write_all(b"\n")
}

/// Reads a JSON-lines command log. Blank lines are skipped.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<LogEntry>, SupervisorError> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| SupervisorError::MalformedLog {
            line: i + 1,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = serde_json::from_str(&line).map_err(|e| SupervisorError::MalformedLog {
            line: i + 1,
            reason: e.to_string(),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}
