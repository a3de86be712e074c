//! Forward/backward pass over the activity-on-arrow network, critical paths,
//! PERT statistics and the completion-probability classification.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plan::{Minutes, Network, NodeId, Task};

/// Which of the task estimates drives a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationLens {
    Optimistic,
    Probable,
    Pessimistic,
    PertExpected,
}

impl DurationLens {
    pub const ALL: [DurationLens; 4] = [
        DurationLens::Optimistic,
        DurationLens::Probable,
        DurationLens::Pessimistic,
        DurationLens::PertExpected,
    ];

    pub fn duration_of(self, task: &Task) -> Minutes {
        match self {
            DurationLens::Optimistic => task.optimistic,
            DurationLens::Probable => task.probable,
            DurationLens::Pessimistic => task.pessimistic,
            DurationLens::PertExpected => pert_expected(task),
        }
    }
}

impl fmt::Display for DurationLens {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DurationLens::Optimistic => "optimistic",
            DurationLens::Probable => "probable",
            DurationLens::Pessimistic => "pessimistic",
            DurationLens::PertExpected => "pert",
        })
    }
}

impl FromStr for DurationLens {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "optimistic" => Ok(DurationLens::Optimistic),
            "probable" => Ok(DurationLens::Probable),
            "pessimistic" => Ok(DurationLens::Pessimistic),
            "pert" | "pert_expected" | "expected" => Ok(DurationLens::PertExpected),
            other => Err(format!("unknown lens `{other}` (optimistic|probable|pessimistic|pert)")),
        }
    }
}

/// `(o + 4m + p) / 6` rounded to the nearest minute, halves away from zero.
pub fn pert_expected(task: &Task) -> Minutes {
    let weighted = task.optimistic + 4 * task.probable + task.pessimistic;
    // weighted is non-negative for valid tasks; the general form keeps the
    // away-from-zero rule for negative inputs too.
    if weighted >= 0 {
        (weighted + 3) / 6
    } else {
        -((-weighted + 3) / 6)
    }
}

/// `((p - o) / 6)^2` in minutes squared.
pub fn pert_variance(task: &Task) -> f64 {
    let sigma = (task.pessimistic - task.optimistic) as f64 / 6.0;
    sigma * sigma
}

/// Where the durations of a schedule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleBasis {
    Lens(DurationLens),
    /// Current operational durations (optimistic plus transfers, or actuals).
    Operational,
}

impl fmt::Display for ScheduleBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleBasis::Lens(lens) => lens.fmt(f),
            ScheduleBasis::Operational => f.write_str("operational"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub code: String,
    pub source_knot: NodeId,
    pub dest_knot: NodeId,
    pub duration: Minutes,
    pub early_start: Minutes,
    pub early_finish: Minutes,
    pub late_start: Minutes,
    pub late_finish: Minutes,
    pub total_slack: Minutes,
}

impl ScheduledTask {
    pub fn is_critical(&self) -> bool {
        self.total_slack == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub basis: ScheduleBasis,
    pub source_node: NodeId,
    pub sink_node: NodeId,
    /// One entry per network task, in network order.
    pub tasks: Vec<ScheduledTask>,
    pub project_duration: Minutes,
    /// Every zero-slack source-to-sink path, lexicographically ordered.
    pub critical_paths: Vec<Vec<String>>,
}

impl Schedule {
    pub fn task(&self, code: &str) -> Option<&ScheduledTask> {
        self.tasks.iter().find(|t| t.code == code)
    }

    /// First critical path in tie order.
    pub fn primary_critical_path(&self) -> &[String] {
        self.critical_paths.first().map(Vec::as_slice).unwrap_or(&[])
    }

    /// `code,es,ef,ls,lf,slack,critical` rows followed by a `#` summary line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "code,es,ef,ls,lf,slack,critical")?;
        for t in &self.tasks {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t.code,
                t.early_start,
                t.early_finish,
                t.late_start,
                t.late_finish,
                t.total_slack,
                t.is_critical()
            )?;
        }
        writeln!(out, "# project_duration={} lens={}", self.project_duration, self.basis)
    }
}

pub fn compute_schedule(network: &Network, lens: DurationLens) -> Schedule {
    let durations: Vec<Minutes> = network.tasks().iter().map(|t| lens.duration_of(t)).collect();
    schedule_with_durations(network, &durations, ScheduleBasis::Lens(lens))
}

/// Forward and backward pass with explicit per-task durations, aligned with
/// `network.tasks()`.
pub fn schedule_with_durations(network: &Network, durations: &[Minutes], basis: ScheduleBasis) -> Schedule {
    assert_eq!(durations.len(), network.tasks().len(), "one duration per task");
    let order = network.topological_nodes();
    let outgoing = network.outgoing();
    let incoming = network.incoming();
    let tasks = network.tasks();

    let mut earliest: BTreeMap<NodeId, Minutes> = BTreeMap::new();
    for &n in &order {
        let e = incoming[&n]
            .iter()
            .map(|&i| earliest[&tasks[i].source_knot] + durations[i])
            .max()
            .unwrap_or(0);
        earliest.insert(n, e);
    }
    let project_duration = earliest.get(&network.sink_node()).copied().unwrap_or(0);

    let mut latest: BTreeMap<NodeId, Minutes> = BTreeMap::new();
    for &n in order.iter().rev() {
        let l = outgoing[&n]
            .iter()
            .map(|&i| latest[&tasks[i].dest_knot] - durations[i])
            .min()
            .unwrap_or(project_duration);
        latest.insert(n, l);
    }

    let scheduled: Vec<ScheduledTask> = tasks
        .iter()
        .zip(durations)
        .map(|(t, &d)| {
            let es = earliest[&t.source_knot];
            let lf = latest[&t.dest_knot];
            let ls = lf - d;
            ScheduledTask {
                code: t.code.clone(),
                source_knot: t.source_knot,
                dest_knot: t.dest_knot,
                duration: d,
                early_start: es,
                early_finish: es + d,
                late_start: ls,
                late_finish: lf,
                total_slack: ls - es,
            }
        })
        .collect();

    let mut schedule = Schedule {
        basis,
        source_node: network.source_node(),
        sink_node: network.sink_node(),
        tasks: scheduled,
        project_duration,
        critical_paths: Vec::new(),
    };
    schedule.critical_paths = critical_path(&schedule);
    schedule
}

/// All source-to-sink paths made of zero-slack tasks, sorted by their code
/// sequences.
pub fn critical_path(schedule: &Schedule) -> Vec<Vec<String>> {
    let mut zero_slack_out: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
    for (i, t) in schedule.tasks.iter().enumerate() {
        if t.is_critical() {
            zero_slack_out.entry(t.source_knot).or_default().push(i);
        }
    }

    let mut paths = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    // Explicit stack of (node, next outgoing index) to avoid recursion depth limits.
    let mut stack: Vec<(NodeId, usize)> = vec![(schedule.source_node, 0)];
    while let Some((node, next)) = stack.last_mut() {
        if *node == schedule.sink_node && *next == 0 {
            paths.push(current.iter().map(|&i| schedule.tasks[i].code.clone()).collect::<Vec<_>>());
        }
        let arcs = zero_slack_out.get(node).map(Vec::as_slice).unwrap_or(&[]);
        if *next < arcs.len() {
            let ti = arcs[*next];
            *next += 1;
            current.push(ti);
            stack.push((schedule.tasks[ti].dest_knot, 0));
        } else {
            stack.pop();
            current.pop();
        }
    }
    paths.sort();
    paths.dedup();
    paths
}

/// Classical single-path PERT figures for a scheduled completion time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PertStats {
    pub expected_duration: Minutes,
    pub path_variance: f64,
    /// `None` when the variance is zero and z is unbounded.
    pub z_value: Option<f64>,
    pub completion_probability: f64,
    pub critical_path: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PertError {
    #[error("NonPositiveScheduledTime: the scheduled completion time must be positive")]
    NonPositiveScheduledTime,
}

pub fn pert_statistics(network: &Network, scheduled_time: f64) -> Result<PertStats, PertError> {
    if !(scheduled_time.is_finite() && scheduled_time > 0.0) {
        return Err(PertError::NonPositiveScheduledTime);
    }
    let schedule = compute_schedule(network, DurationLens::PertExpected);
    let path = schedule.primary_critical_path().to_vec();
    let path_variance: f64 = path
        .iter()
        .filter_map(|code| network.task(code))
        .map(pert_variance)
        .sum();
    let expected = schedule.project_duration;
    let (z_value, completion_probability) = if path_variance > 0.0 {
        let z = (scheduled_time - expected as f64) / path_variance.sqrt();
        (Some(z), standard_normal_cdf(z))
    } else if scheduled_time >= expected as f64 {
        (None, 1.0)
    } else {
        (None, 0.0)
    };
    Ok(PertStats {
        expected_duration: expected,
        path_variance,
        z_value,
        completion_probability,
        critical_path: path,
    })
}

/// Standard normal CDF through the complementary error function.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionEstimate {
    TooMuchWaste,
    GreatRisk,
    Acceptable,
}

impl CompletionEstimate {
    /// The warning shown to the user, if any.
    pub fn message(self) -> Option<&'static str> {
        match self {
            CompletionEstimate::TooMuchWaste => Some("Too much waste of time"),
            CompletionEstimate::GreatRisk => Some("Great risk of non-completion in due time"),
            CompletionEstimate::Acceptable => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub waste: f64,
    pub risk: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { waste: 0.95, risk: 0.25 }
    }
}

pub fn classify_completion_estimate(probability: f64, thresholds: Thresholds) -> CompletionEstimate {
    if probability > thresholds.waste {
        CompletionEstimate::TooMuchWaste
    } else if probability < thresholds.risk {
        CompletionEstimate::GreatRisk
    } else {
        CompletionEstimate::Acceptable
    }
}
