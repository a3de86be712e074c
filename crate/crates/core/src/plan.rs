//! Tasks, the activity-on-arrow network, and plan file ingestion.
//!
//! Tasks are arcs between numbered event nodes ("knots"). Precedence is
//! implied by shared knots: every task leaving knot `n` follows every task
//! entering `n`. Durations are held as integer working minutes whatever unit
//! the plan file was written in.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Working minutes. Every duration and offset in the crate uses this unit.
pub type Minutes = i64;

/// Money in integer minor units. No currency is attached.
pub type Money = i64;

/// Event node identifier.
pub type NodeId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub code: String,
    pub name: String,
    pub source_knot: NodeId,
    pub dest_knot: NodeId,
    pub optimistic: Minutes,
    pub probable: Minutes,
    pub pessimistic: Minutes,
    pub bcws_cost: Money,
}

impl Task {
    /// Builds a task and checks the per-task invariants.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        code: impl Into<String>,
        name: impl Into<String>,
        source_knot: NodeId,
        dest_knot: NodeId,
        optimistic: Minutes,
        probable: Minutes,
        pessimistic: Minutes,
        bcws_cost: Money,
    ) -> Result<Self, PlanError> {
        let task = Task {
            code: code.into(),
            name: name.into(),
            source_knot,
            dest_knot,
            optimistic,
            probable,
            pessimistic,
            bcws_cost,
        };
        task.validate()?;
        Ok(task)
    }

    /// A zero-duration arc that only carries precedence.
    pub fn dummy(code: impl Into<String>, source_knot: NodeId, dest_knot: NodeId) -> Self {
        Task {
            code: code.into(),
            name: String::new(),
            source_knot,
            dest_knot,
            optimistic: 0,
            probable: 0,
            pessimistic: 0,
            bcws_cost: 0,
        }
    }

    pub fn is_dummy(&self) -> bool {
        self.optimistic == 0 && self.probable == 0 && self.pessimistic == 0
    }

    /// Checks a task built field by field (e.g. deserialized).
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.code.trim().is_empty() {
            return Err(PlanError::InvalidTask {
                code: self.code.clone(),
                reason: "empty task code".into(),
            });
        }
        if self.source_knot == self.dest_knot {
            return Err(PlanError::InvalidTask {
                code: self.code.clone(),
                reason: format!("source and destination knot are both {}", self.source_knot),
            });
        }
        if self.optimistic > self.probable || self.probable > self.pessimistic {
            return Err(PlanError::EstimateOrderViolation(self.code.clone()));
        }
        if self.optimistic < 0 {
            return Err(PlanError::InvalidTask {
                code: self.code.clone(),
                reason: "negative duration".into(),
            });
        }
        if self.optimistic == 0 && !self.is_dummy() {
            return Err(PlanError::InvalidTask {
                code: self.code.clone(),
                reason: "optimistic duration must be positive unless all estimates are zero".into(),
            });
        }
        if self.bcws_cost < 0 {
            return Err(PlanError::InvalidTask {
                code: self.code.clone(),
                reason: "negative BCWS cost".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("MalformedRow: line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("DuplicateCode: task code {0} appears more than once")]
    DuplicateCode(String),
    #[error("EstimateOrderViolation: task {0} must satisfy optimistic <= probable <= pessimistic")]
    EstimateOrderViolation(String),
    #[error("InvalidTask: task {code}: {reason}")]
    InvalidTask { code: String, reason: String },
    #[error("UnknownFormat: {0}")]
    UnknownFormat(String),
    #[error("Io: {0}")]
    Io(String),
}

impl PlanError {
    pub fn code(&self) -> &'static str {
        match self {
            PlanError::MalformedRow { .. } => "MalformedRow",
            PlanError::DuplicateCode(_) => "DuplicateCode",
            PlanError::EstimateOrderViolation(_) => "EstimateOrderViolation",
            PlanError::InvalidTask { .. } => "InvalidTask",
            PlanError::UnknownFormat(_) => "UnknownFormat",
            PlanError::Io(_) => "Io",
        }
    }
}

/// Structural problems of a network. `validate_network` reports them as a
/// list; `build_network` fails on the first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", content = "detail")]
pub enum NetworkError {
    #[error("EmptyNetwork: a network needs at least one task")]
    EmptyNetwork,
    #[error("DuplicateCode: task code {0} appears more than once")]
    DuplicateCode(String),
    #[error("CycleDetected: {}", join_nodes(.0))]
    CycleDetected(Vec<NodeId>),
    #[error("MultipleSources: knots {} have no incoming task", join_nodes(.0))]
    MultipleSources(Vec<NodeId>),
    #[error("MultipleSinks: knots {} have no outgoing task", join_nodes(.0))]
    MultipleSinks(Vec<NodeId>),
    #[error("DisconnectedNode: knot {0} is not on any source-to-sink path")]
    DisconnectedNode(NodeId),
}

impl NetworkError {
    pub fn code(&self) -> &'static str {
        match self {
            NetworkError::EmptyNetwork => "EmptyNetwork",
            NetworkError::DuplicateCode(_) => "DuplicateCode",
            NetworkError::CycleDetected(_) => "CycleDetected",
            NetworkError::MultipleSources(_) => "MultipleSources",
            NetworkError::MultipleSinks(_) => "MultipleSinks",
            NetworkError::DisconnectedNode(_) => "DisconnectedNode",
        }
    }
}

fn join_nodes(nodes: &[NodeId]) -> String {
    let parts: Vec<String> = nodes.iter().map(|n| n.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Activity-on-arrow network.
///
/// Values built by [`build_network`] satisfy every structural invariant.
/// [`Network::unchecked`] exists for diagnostics and may hold anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    tasks: Vec<Task>,
    nodes: BTreeSet<NodeId>,
    source_node: NodeId,
    sink_node: NodeId,
}

impl Network {
    /// Wraps tasks plus any extra declared knots without validation.
    pub fn unchecked(tasks: Vec<Task>, extra_nodes: impl IntoIterator<Item = NodeId>) -> Self {
        let mut nodes: BTreeSet<NodeId> = extra_nodes.into_iter().collect();
        for t in &tasks {
            nodes.insert(t.source_knot);
            nodes.insert(t.dest_knot);
        }
        let source_node = nodes.iter().copied().next().unwrap_or_default();
        let sink_node = nodes.iter().copied().next_back().unwrap_or_default();
        Network {
            tasks,
            nodes,
            source_node,
            sink_node,
        }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn nodes(&self) -> &BTreeSet<NodeId> {
        &self.nodes
    }

    pub fn source_node(&self) -> NodeId {
        self.source_node
    }

    pub fn sink_node(&self) -> NodeId {
        self.sink_node
    }

    pub fn task(&self, code: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.code == code)
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.code == code)
    }

    /// Outgoing task indices per node, in task order.
    pub fn outgoing(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut out: BTreeMap<NodeId, Vec<usize>> =
            self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for (i, t) in self.tasks.iter().enumerate() {
            out.entry(t.source_knot).or_default().push(i);
        }
        out
    }

    /// Incoming task indices per node, in task order.
    pub fn incoming(&self) -> BTreeMap<NodeId, Vec<usize>> {
        let mut inc: BTreeMap<NodeId, Vec<usize>> =
            self.nodes.iter().map(|&n| (n, Vec::new())).collect();
        for (i, t) in self.tasks.iter().enumerate() {
            inc.entry(t.dest_knot).or_default().push(i);
        }
        inc
    }

    /// Nodes in a deterministic topological order (Kahn, smallest id first).
    /// Only meaningful on acyclic networks; nodes on cycles are omitted.
    pub fn topological_nodes(&self) -> Vec<NodeId> {
        let out = self.outgoing();
        let mut indegree: BTreeMap<NodeId, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for t in &self.tasks {
            *indegree.get_mut(&t.dest_knot).expect("node registered") += 1;
        }
        let mut ready: BTreeSet<NodeId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&n, _)| n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(n) = ready.pop_first() {
            order.push(n);
            for &ti in &out[&n] {
                let d = indegree.get_mut(&self.tasks[ti].dest_knot).expect("node registered");
                *d -= 1;
                if *d == 0 {
                    ready.insert(self.tasks[ti].dest_knot);
                }
            }
        }
        order
    }

    /// Same structure with different task estimates. `tasks` must be the
    /// network's own tasks, in order, with only their estimates changed.
    pub fn with_tasks(&self, tasks: Vec<Task>) -> Network {
        debug_assert_eq!(tasks.len(), self.tasks.len());
        Network {
            tasks,
            nodes: self.nodes.clone(),
            source_node: self.source_node,
            sink_node: self.sink_node,
        }
    }
}

/// Builds and validates a network. Fails on the first violated invariant.
pub fn build_network(tasks: Vec<Task>) -> Result<Network, NetworkError> {
    let mut network = Network::unchecked(tasks, []);
    if let Some(err) = validate_network(&network).into_iter().next() {
        return Err(err);
    }
    let sources = in_out_extremes(&network).0;
    let sinks = in_out_extremes(&network).1;
    network.source_node = sources[0];
    network.sink_node = sinks[0];
    Ok(network)
}

fn in_out_extremes(network: &Network) -> (Vec<NodeId>, Vec<NodeId>) {
    let inc = network.incoming();
    let out = network.outgoing();
    let sources = network
        .nodes
        .iter()
        .copied()
        .filter(|n| inc[n].is_empty() && !out[n].is_empty())
        .collect();
    let sinks = network
        .nodes
        .iter()
        .copied()
        .filter(|n| out[n].is_empty() && !inc[n].is_empty())
        .collect();
    (sources, sinks)
}

/// Lists every violated structural invariant. Never mutates and never fails.
///
/// Isolated knots (no arcs at all) are reported as disconnected rather than
/// as extra sources or sinks. Source/sink checks are skipped on cyclic input.
pub fn validate_network(network: &Network) -> Vec<NetworkError> {
    let mut report = Vec::new();
    if network.tasks.is_empty() {
        report.push(NetworkError::EmptyNetwork);
        return report;
    }
    let mut seen = HashSet::new();
    for t in &network.tasks {
        if !seen.insert(t.code.as_str()) {
            report.push(NetworkError::DuplicateCode(t.code.clone()));
        }
    }
    if let Some(cycle) = find_cycle(network) {
        report.push(NetworkError::CycleDetected(cycle));
        return report;
    }

    let (sources, sinks) = in_out_extremes(network);
    if sources.len() > 1 {
        report.push(NetworkError::MultipleSources(sources.clone()));
    }
    if sinks.len() > 1 {
        report.push(NetworkError::MultipleSinks(sinks.clone()));
    }

    // Nodes not reachable from a source or not reaching a sink.
    let forward = reachable(network, &sources, true);
    let backward = reachable(network, &sinks, false);
    for &n in &network.nodes {
        if !forward.contains(&n) || !backward.contains(&n) {
            report.push(NetworkError::DisconnectedNode(n));
        }
    }
    report
}

fn reachable(network: &Network, roots: &[NodeId], forward: bool) -> BTreeSet<NodeId> {
    let adjacency = if forward { network.outgoing() } else { network.incoming() };
    let mut seen: BTreeSet<NodeId> = roots.iter().copied().collect();
    let mut stack: Vec<NodeId> = roots.to_vec();
    while let Some(n) = stack.pop() {
        for &ti in &adjacency[&n] {
            let t = &network.tasks[ti];
            let next = if forward { t.dest_knot } else { t.source_knot };
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    seen
}

/// Depth-first search for a cycle; returns the closed node sequence
/// (first node repeated at the end), e.g. `[1, 2, 1]`.
fn find_cycle(network: &Network) -> Option<Vec<NodeId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Fresh,
        Open,
        Done,
    }
    let mut succ: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
    for t in &network.tasks {
        succ.entry(t.source_knot).or_default().insert(t.dest_knot);
    }
    let mut marks: BTreeMap<NodeId, Mark> = network.nodes.iter().map(|&n| (n, Mark::Fresh)).collect();
    let empty = BTreeSet::new();

    for &root in &network.nodes {
        if marks[&root] != Mark::Fresh {
            continue;
        }
        // Stack of (node, remaining successors).
        let mut path: Vec<NodeId> = vec![root];
        let mut iters: Vec<std::collections::btree_set::Iter<'_, NodeId>> =
            vec![succ.get(&root).unwrap_or(&empty).iter()];
        marks.insert(root, Mark::Open);
        while let Some(it) = iters.last_mut() {
            match it.next() {
                Some(&next) => match marks[&next] {
                    Mark::Open => {
                        let start = path.iter().position(|&n| n == next).expect("open node on path");
                        let mut cycle = path[start..].to_vec();
                        cycle.push(next);
                        return Some(cycle);
                    }
                    Mark::Fresh => {
                        marks.insert(next, Mark::Open);
                        path.push(next);
                        iters.push(succ.get(&next).unwrap_or(&empty).iter());
                    }
                    Mark::Done => {}
                },
                None => {
                    let done = path.pop().expect("path tracks iterators");
                    marks.insert(done, Mark::Done);
                    iters.pop();
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanFormat {
    Csv,
    Json,
}

impl PlanFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self, PlanError> {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
            Some(e) if e == "csv" => Ok(PlanFormat::Csv),
            Some(e) if e == "json" => Ok(PlanFormat::Json),
            _ => Err(PlanError::UnknownFormat(path.display().to_string())),
        }
    }
}

impl fmt::Display for PlanFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlanFormat::Csv => "csv",
            PlanFormat::Json => "json",
        })
    }
}

pub const CSV_HEADER: [&str; 8] = [
    "code",
    "name",
    "source",
    "dest",
    "optimistic",
    "probable",
    "pessimistic",
    "bcws",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PlanRow {
    code: String,
    name: String,
    source: NodeId,
    dest: NodeId,
    optimistic: f64,
    probable: f64,
    pessimistic: f64,
    bcws: Money,
}

/// Reads a plan whose durations are already in minutes.
pub fn import_plan<R: Read>(input: R, format: PlanFormat) -> Result<Vec<Task>, PlanError> {
    import_plan_scaled(input, format, 1)
}

/// Reads a plan whose durations are in a unit worth `minutes_per_unit`
/// working minutes. Fractional durations are rounded to the nearest minute.
pub fn import_plan_scaled<R: Read>(
    input: R,
    format: PlanFormat,
    minutes_per_unit: Minutes,
) -> Result<Vec<Task>, PlanError> {
    let rows: Vec<(u64, PlanRow)> = match format {
        PlanFormat::Csv => read_csv_rows(input)?,
        PlanFormat::Json => {
            let rows: Vec<PlanRow> = serde_json::from_reader(input).map_err(|e| PlanError::MalformedRow {
                line: e.line() as u64,
                reason: e.to_string(),
            })?;
            rows.into_iter().enumerate().map(|(i, r)| (i as u64 + 1, r)).collect()
        }
    };

    let mut seen = HashSet::new();
    let mut tasks = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let scale = |v: f64, field: &str| -> Result<Minutes, PlanError> {
            if !v.is_finite() || v < 0.0 {
                return Err(PlanError::MalformedRow {
                    line,
                    reason: format!("{field} must be a non-negative number"),
                });
            }
            Ok((v * minutes_per_unit as f64).round() as Minutes)
        };
        let task = Task {
            optimistic: scale(row.optimistic, "optimistic")?,
            probable: scale(row.probable, "probable")?,
            pessimistic: scale(row.pessimistic, "pessimistic")?,
            code: row.code,
            name: row.name,
            source_knot: row.source,
            dest_knot: row.dest,
            bcws_cost: row.bcws,
        };
        task.validate().map_err(|e| match e {
            PlanError::InvalidTask { reason, .. } => PlanError::MalformedRow { line, reason },
            other => other,
        })?;
        if !seen.insert(task.code.clone()) {
            return Err(PlanError::DuplicateCode(task.code));
        }
        tasks.push(task);
    }
    Ok(tasks)
}

fn read_csv_rows<R: Read>(input: R) -> Result<Vec<(u64, PlanRow)>, PlanError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = reader.headers().map_err(|e| PlanError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(PlanError::MalformedRow {
            line: 1,
            reason: format!("header must be exactly `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for result in reader.deserialize::<PlanRow>() {
        match result {
            Ok(row) => {
                let line = rows.len() as u64 + 2;
                rows.push((line, row));
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(PlanError::MalformedRow {
                    line,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(rows)
}

/// Writes tasks with durations in minutes, in the same layout `import_plan` reads.
pub fn export_plan<W: Write>(tasks: &[Task], format: PlanFormat, out: W) -> Result<(), PlanError> {
    let rows = tasks.iter().map(|t| PlanRow {
        code: t.code.clone(),
        name: t.name.clone(),
        source: t.source_knot,
        dest: t.dest_knot,
        optimistic: t.optimistic as f64,
        probable: t.probable as f64,
        pessimistic: t.pessimistic as f64,
        bcws: t.bcws_cost,
    });
    match format {
        PlanFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            writer.write_record(CSV_HEADER).map_err(|e| PlanError::Io(e.to_string()))?;
            for t in tasks {
                writer
                    .write_record([
                        t.code.clone(),
                        t.name.clone(),
                        t.source_knot.to_string(),
                        t.dest_knot.to_string(),
                        t.optimistic.to_string(),
                        t.probable.to_string(),
                        t.pessimistic.to_string(),
                        t.bcws_cost.to_string(),
                    ])
                    .map_err(|e| PlanError::Io(e.to_string()))?;
            }
            writer.flush().map_err(|e| PlanError::Io(e.to_string()))
        }
        PlanFormat::Json => {
            let rows: Vec<PlanRow> = rows.collect();
            serde_json::to_writer_pretty(out, &rows).map_err(|e| PlanError::Io(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(code: &str, s: NodeId, d: NodeId, dur: Minutes) -> Task {
        Task::new(code, code, s, d, dur, dur, dur, 0).unwrap()
    }

    #[test]
    fn imports_csv_row() {
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\n\
                   T1,Know What to do,5,6,45,60,90,150000\n";
        let tasks = import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap();
        assert_eq!(
            tasks,
            vec![Task::new("T1", "Know What to do", 5, 6, 45, 60, 90, 150000).unwrap()]
        );
    }

    #[test]
    fn accepts_equal_estimates() {
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nT9,x,1,2,10,10,10,0\n";
        let tasks = import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap();
        assert_eq!(tasks[0].optimistic, 10);
        assert_eq!(tasks[0].pessimistic, 10);
    }

    #[test]
    fn rejects_estimate_order() {
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nT2,x,1,2,30,20,50,0\n";
        let err = import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap_err();
        assert_eq!(err, PlanError::EstimateOrderViolation("T2".into()));
    }

    #[test]
    fn rejects_duplicate_codes_and_bad_rows() {
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\n\
                   A,x,1,2,1,2,3,0\nA,y,2,3,1,2,3,0\n";
        assert_eq!(
            import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap_err(),
            PlanError::DuplicateCode("A".into())
        );

        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nA,x,1,two,1,2,3,0\n";
        match import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap_err() {
            PlanError::MalformedRow { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nA,x,3,3,1,2,3,0\n";
        assert!(matches!(
            import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap_err(),
            PlanError::MalformedRow { line: 2, .. }
        ));

        let csv = "code,name,src,dest,optimistic,probable,pessimistic,bcws\n";
        assert!(matches!(
            import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap_err(),
            PlanError::MalformedRow { line: 1, .. }
        ));
    }

    #[test]
    fn dummy_rows_are_zero_duration() {
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nD1,,2,3,0,0,0,0\n";
        let tasks = import_plan(csv.as_bytes(), PlanFormat::Csv).unwrap();
        assert!(tasks[0].is_dummy());
        // Zero optimistic with non-zero pessimistic is neither a dummy nor a real task.
        let csv = "code,name,source,dest,optimistic,probable,pessimistic,bcws\nD1,,2,3,0,0,5,0\n";
        assert!(import_plan(csv.as_bytes(), PlanFormat::Csv).is_err());
    }

    #[test]
    fn scales_plan_units() {
        let json = r#"[{"code":"A","name":"a","source":1,"dest":2,"optimistic":1.5,"probable":2,"pessimistic":4,"bcws":7}]"#;
        let tasks = import_plan_scaled(json.as_bytes(), PlanFormat::Json, 60).unwrap();
        assert_eq!((tasks[0].optimistic, tasks[0].probable, tasks[0].pessimistic), (90, 120, 240));
    }

    #[test]
    fn builds_chain() {
        let net = build_network(vec![t("A", 1, 2, 1), t("B", 2, 3, 1)]).unwrap();
        assert_eq!(net.source_node(), 1);
        assert_eq!(net.sink_node(), 3);
    }

    #[test]
    fn detects_two_cycle() {
        let err = build_network(vec![t("A", 1, 2, 1), t("B", 2, 1, 1)]).unwrap_err();
        assert_eq!(err, NetworkError::CycleDetected(vec![1, 2, 1]));
    }

    #[test]
    fn detects_multiple_sources() {
        let err = build_network(vec![t("A", 1, 2, 1), t("B", 3, 4, 1)]).unwrap_err();
        assert_eq!(err, NetworkError::MultipleSources(vec![1, 3]));
    }

    #[test]
    fn detects_multiple_sinks() {
        let err = build_network(vec![t("A", 1, 2, 1), t("B", 1, 3, 1)]).unwrap_err();
        assert_eq!(err, NetworkError::MultipleSinks(vec![2, 3]));
    }

    #[test]
    fn empty_plan_is_rejected() {
        assert_eq!(build_network(vec![]).unwrap_err(), NetworkError::EmptyNetwork);
    }

    fn diamond() -> Vec<Task> {
        vec![t("A", 1, 2, 3), t("B", 1, 3, 2), t("C", 2, 4, 4), t("D", 3, 4, 1)]
    }

    #[test]
    fn validates_diamond_idempotently() {
        let net = build_network(diamond()).unwrap();
        assert!(validate_network(&net).is_empty());
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn reports_isolated_node() {
        let net = Network::unchecked(diamond(), [9]);
        assert_eq!(validate_network(&net), vec![NetworkError::DisconnectedNode(9)]);
    }

    #[test]
    fn parallel_arcs_are_allowed() {
        let net = build_network(vec![t("A", 1, 2, 3), t("B", 1, 2, 5)]).unwrap();
        assert_eq!(net.tasks().len(), 2);
    }

    #[test]
    fn topological_order_respects_arcs() {
        let net = build_network(diamond()).unwrap();
        let order = net.topological_nodes();
        let pos = |n: NodeId| order.iter().position(|&x| x == n).unwrap();
        for task in net.tasks() {
            assert!(pos(task.source_knot) < pos(task.dest_knot));
        }
    }

    #[test]
    fn export_then_import_is_field_equal() {
        let tasks = vec![
            Task::new("A", "Spec, draft", 1, 2, 3, 4, 8, 1200).unwrap(),
            Task::dummy("D", 2, 3),
        ];
        for format in [PlanFormat::Csv, PlanFormat::Json] {
            let mut buf = Vec::new();
            export_plan(&tasks, format, &mut buf).unwrap();
            assert_eq!(import_plan(buf.as_slice(), format).unwrap(), tasks, "{format}");
        }
    }
}
