//! Project scheduling and supervision with a shared critical-path time buffer.
//!
//! Tasks carry three duration estimates. The plan is executed on the
//! optimistic ones; half of the pessimistic safety along the critical path is
//! pooled in a buffer that tasks draw from when they fall behind.

pub mod buffer;
pub mod calendar;
pub mod cpm;
pub mod evm;
pub mod kb;
pub mod plan;
pub mod supervisor;

pub use buffer::{apply_transfer, compute_buffer, suggest_transfer, BufferError, BufferState, OperationalPlan};
pub use calendar::{CalendarError, PlanUnit, WorkCalendar};
pub use cpm::{
    classify_completion_estimate, compute_schedule, critical_path, pert_statistics, standard_normal_cdf,
    CompletionEstimate, DurationLens, Schedule, Thresholds,
};
pub use evm::{cost_report, CostLedger, CostPlan, CostReport, EvmError};
pub use kb::{KbError, KnowledgeBase};
pub use plan::{build_network, import_plan, validate_network, Minutes, Money, Network, NetworkError, PlanError, Task};
pub use supervisor::{Command, DialogStep, LogEntry, ProjectSpec, StatusReport, Supervisor, SupervisorError};
