use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Local, NaiveDate, NaiveDateTime, NaiveTime};
use clap::{Parser, Subcommand};
use timebuffer_core::buffer::compute_buffer;
use timebuffer_core::calendar::{PlanUnit, WorkCalendar};
use timebuffer_core::cpm::{compute_schedule, DurationLens};
use timebuffer_core::kb::KnowledgeBase;
use timebuffer_core::plan::{build_network, import_plan_scaled, PlanFormat, Task};
use timebuffer_core::supervisor::{read_log, ProjectSpec, Supervisor};

use crate::http::{serve, AppState, Clock};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "timebuffer", version, about = "Project scheduling with a shared critical-path time buffer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Validate a plan file (CSV or JSON) and write a project file.
    Import {
        plan: PathBuf,
        /// Calendar JSON; defaults to an 08:00-16:00 program in minutes.
        #[arg(long)]
        calendar: Option<PathBuf>,
        /// Start date for the default calendar (defaults to today).
        #[arg(long)]
        start: Option<NaiveDate>,
        #[arg(long, default_value = "default")]
        tag: String,
        /// Scheduled project time in working minutes.
        #[arg(long)]
        scheduled_time: Option<i64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the schedule of a plan or project file as CSV.
    Compute {
        input: PathBuf,
        #[arg(long, default_value = "optimistic")]
        lens: DurationLens,
    },
    /// Print the current time buffer of a project.
    Buffer {
        project: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Replay an event log on a project and print the final analysis.
    Simulate {
        project: PathBuf,
        #[arg(long)]
        events: PathBuf,
    },
    /// Print a report on a project after replaying its events.
    Report {
        project: PathBuf,
        #[arg(long)]
        events: Option<PathBuf>,
        /// Cost metrics (CSV).
        #[arg(long)]
        evm: bool,
        /// With --evm: the cumulative cost curve instead of the totals.
        #[arg(long, requires = "evm")]
        curve: bool,
    },
    /// Inspect a knowledge base file.
    Kb {
        #[command(subcommand)]
        command: KbCmd,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "data")]
        data_dir: PathBuf,
        #[arg(long)]
        kb: Option<PathBuf>,
        /// Use a clock that only moves through PUT /clock.
        #[arg(long)]
        frozen_clock: bool,
        /// Initial time of the frozen clock.
        #[arg(long, requires = "frozen_clock")]
        now: Option<NaiveDateTime>,
    },
}

#[derive(Debug, Subcommand)]
pub enum KbCmd {
    /// List transfer frames.
    List {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        tag: Option<String>,
    },
    /// Show the warning recorded for a task.
    Show {
        task: String,
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        tag: String,
    },
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Cmd::Import {
            plan,
            calendar,
            start,
            tag,
            scheduled_time,
            output,
        } => {
            let calendar = match calendar {
                Some(path) => serde_json::from_str(&read(&path)?).with_context(|| format!("calendar {}", path.display()))?,
                None => default_calendar(start.unwrap_or_else(|| Local::now().date_naive()))?,
            };
            let tasks = read_plan(&plan, calendar.plan_unit_minutes())?;
            let spec = ProjectSpec {
                tag,
                tasks,
                calendar,
                scheduled_time,
                repetitions: Default::default(),
                alert_fraction: 0.10,
                thresholds: Default::default(),
            };
            Supervisor::new(spec.clone())?;
            let json = serde_json::to_string_pretty(&spec)?;
            match output {
                Some(path) => fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => writeln!(out, "{json}")?,
            }
        }
        Cmd::Compute { input, lens } => {
            let tasks = match load_project(&input) {
                Ok(spec) => spec.tasks,
                Err(_) => read_plan(&input, 1)?,
            };
            let network = build_network(tasks)?;
            compute_schedule(&network, lens).write_csv(&mut *out)?;
        }
        Cmd::Buffer { project, events } => {
            let sup = replayed(&project, events.as_deref())?;
            let state = compute_buffer(sup.network(), sup.plan());
            writeln!(out, "{}", serde_json::to_string_pretty(&state)?)?;
        }
        Cmd::Simulate { project, events } => {
            let sup = replayed(&project, Some(&events))?;
            writeln!(out, "{}", serde_json::to_string_pretty(&sup.project_analysis())?)?;
        }
        Cmd::Report {
            project,
            events,
            evm,
            curve,
        } => {
            let sup = replayed(&project, events.as_deref())?;
            if evm {
                let report = sup.cost_report()?;
                if curve {
                    report.write_curve_csv(&mut *out)?;
                } else {
                    report.write_metrics_csv(&mut *out)?;
                }
            } else {
                writeln!(out, "{}", serde_json::to_string_pretty(&sup.status())?)?;
            }
        }
        Cmd::Kb { command } => match command {
            KbCmd::List { kb, tag } => {
                let kb = KnowledgeBase::load(&kb)?;
                for f in kb.transfer_frames() {
                    if tag.as_deref().is_some_and(|t| t != f.project_tag) {
                        continue;
                    }
                    writeln!(
                        out,
                        "{}\t{}\tinitial={}\ttransferred={}\toccurrences={}",
                        f.project_tag, f.task_identifier, f.optimistic_initial, f.transfer_total, f.occurrences
                    )?;
                }
            }
            KbCmd::Show { task, kb, tag } => {
                let kb = KnowledgeBase::load(&kb)?;
                match kb.lookup_task_warnings(&task, &tag) {
                    Some(w) => writeln!(out, "{w}")?,
                    None => writeln!(out, "no experience recorded for task {task} ({tag})")?,
                }
            }
        },
        Cmd::Serve {
            port,
            data_dir,
            kb,
            frozen_clock,
            now,
        } => {
            let store = Store::open(&data_dir, kb)?;
            let clock = if frozen_clock {
                Clock::frozen(now.unwrap_or(DateTime::UNIX_EPOCH.naive_utc()))
            } else {
                Clock::System
            };
            let state = AppState {
                store: Arc::new(store),
                clock: Arc::new(clock),
            };
            writeln!(out, "listening on 127.0.0.1:{port}")?;
            out.flush()?;
            tokio::runtime::Runtime::new()?.block_on(serve(state, port))?;
        }
    }
    Ok(())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn default_calendar(start: NaiveDate) -> Result<WorkCalendar> {
    let hm = |h| NaiveTime::from_hms_opt(h, 0, 0).expect("valid hour");
    Ok(WorkCalendar::new(start, hm(8), (hm(8), hm(16)), PlanUnit::Minutes)?)
}

/// Plan durations are read in units of `minutes_per_unit` minutes.
fn read_plan(path: &Path, minutes_per_unit: i64) -> Result<Vec<Task>> {
    let format = PlanFormat::from_path(path)?;
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(import_plan_scaled(BufReader::new(file), format, minutes_per_unit)?)
}

fn load_project(path: &Path) -> Result<ProjectSpec> {
    let text = read(path)?;
    serde_json::from_str(&text).with_context(|| format!("{} is not a project file", path.display()))
}

fn replayed(project: &Path, events: Option<&Path>) -> Result<Supervisor> {
    let spec = load_project(project)?;
    let log = match events {
        Some(path) => {
            let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
            read_log(BufReader::new(file))?
        }
        None => Vec::new(),
    };
    if log.is_empty() && events.is_some() {
        bail!("event log is empty");
    }
    Ok(Supervisor::replay(spec, &log)?)
}
