//! Project sessions backed by one command log per project.
//!
//! Layout under the data directory:
//!
//! ```text
//! kb.json                      shared knowledge base (unless --kb points elsewhere)
//! projects/<id>/project.json   the project as created
//! projects/<id>/events.jsonl   command log, one JSON object per line
//! ```

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::NaiveDateTime;
use serde::Serialize;
use timebuffer_core::kb::{Curation, KbError, KnowledgeBase, TaskWarning};
use timebuffer_core::supervisor::{
    read_log, write_log_entry, Command, LogEntry, Outcome, ProjectSpec, StatusReport, Supervisor, SupervisorError,
};

#[derive(Debug)]
pub enum StoreError {
    ProjectNotFound(String),
    Domain(SupervisorError),
    Kb(KbError),
    CorruptProject { id: String, reason: String },
    Io(std::io::Error),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::ProjectNotFound(_) => "ProjectNotFound",
            StoreError::Domain(e) => e.code(),
            StoreError::Kb(e) => e.code(),
            StoreError::CorruptProject { .. } => "CorruptProject",
            StoreError::Io(_) => "Io",
        }
    }
}

impl std::fmt::Display for StoreError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StoreError::ProjectNotFound(id) => write!(f, "ProjectNotFound: no project {id}"),
            StoreError::Domain(e) => e.fmt(f),
            StoreError::Kb(e) => e.fmt(f),
            StoreError::CorruptProject { id, reason } => write!(f, "CorruptProject: {id}: {reason}"),
            StoreError::Io(e) => write!(f, "Io: {e}"),
        }
    }
}

impl std::error::Error for StoreError {}

impl From<SupervisorError> for StoreError {
    fn from(e: SupervisorError) -> Self {
        StoreError::Domain(e)
    }
}

impl From<KbError> for StoreError {
    fn from(e: KbError) -> Self {
        StoreError::Kb(e)
    }
}

impl From<std::io::Error> for StoreError {
    fn from(e: std::io::Error) -> Self {
        StoreError::Io(e)
    }
}

/// One project: its committed state and the log that produces it.
#[derive(Debug)]
pub struct Session {
    id: String,
    spec: ProjectSpec,
    supervisor: Supervisor,
    log: Vec<LogEntry>,
    log_path: Option<PathBuf>,
}

impl Session {
    pub fn new(id: &str, spec: ProjectSpec) -> Result<Self, StoreError> {
        Ok(Session {
            id: id.to_string(),
            supervisor: Supervisor::new(spec.clone())?,
            spec,
            log: Vec::new(),
            log_path: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &ProjectSpec {
        &self.spec
    }

    pub fn supervisor(&self) -> &Supervisor {
        &self.supervisor
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    fn commit(&mut self, command: Command, next: Supervisor) -> Result<u64, StoreError> {
        let entry = LogEntry {
            seq: self.log.len() as u64 + 1,
            command,
        };
        if let Some(path) = &self.log_path {
            let mut line = Vec::new();
            write_log_entry(&mut line, &entry)?;
            let mut file = OpenOptions::new().append(true).create(true).open(path)?;
            file.write_all(&line)?;
            file.sync_data()?;
        }
        let seq = entry.seq;
        self.log.push(entry);
        self.supervisor = next;
        Ok(seq)
    }

    /// Read-only view at `now`. Falls back to the committed clock when
    /// `now` is before the project start.
    pub fn snapshot(&self, now: NaiveDateTime) -> Supervisor {
        let mut view = self.supervisor.clone();
        let _ = view.tick(now);
        view
    }

    /// Status at `now`. Logged only when something besides the clock moved
    /// (a nearing-end alert latching); a pure clock move is evaluated on a
    /// scratch copy so polling does not grow the log.
    pub fn status(&mut self, now: NaiveDateTime) -> Result<(Option<u64>, StatusReport), StoreError> {
        let mut next = self.supervisor.clone();
        let report = next.tick(now)?;
        if next.same_except_clock(&self.supervisor) {
            return Ok((None, report));
        }
        let seq = self.commit(Command::Tick { now }, next)?;
        Ok((Some(seq), report))
    }

    /// Runs a command. Non-tick commands are evaluated at `now`; the tick
    /// that moves the clock there is logged first so replay sees the same
    /// clock.
    pub fn execute(&mut self, now: Option<NaiveDateTime>, command: Command) -> Result<(u64, Outcome), StoreError> {
        if let Some(now) = now {
            if !matches!(command, Command::Tick { .. }) && self.supervisor.clock() != Some(now) {
                let mut next = self.supervisor.clone();
                next.tick(now)?;
                self.commit(Command::Tick { now }, next)?;
            }
        }
        let mut next = self.supervisor.clone();
        let outcome = next.apply(&command)?;
        let seq = self.commit(command, next)?;
        Ok((seq, outcome))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Created {
    pub id: String,
    pub tag: String,
    /// Experience from earlier projects of the same type.
    pub warnings: Vec<TaskWarning>,
}

#[derive(Debug)]
pub struct Store {
    data_dir: Option<PathBuf>,
    kb_path: Option<PathBuf>,
    kb: Mutex<KnowledgeBase>,
    projects: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            data_dir: None,
            kb_path: None,
            kb: Mutex::new(KnowledgeBase::new()),
            projects: RwLock::new(BTreeMap::new()),
        }
    }

    /// Opens a data directory, replaying every project's log.
    pub fn open(data_dir: &Path, kb_path: Option<PathBuf>) -> Result<Self, StoreError> {
        let kb_path = kb_path.unwrap_or_else(|| data_dir.join("kb.json"));
        let kb = if kb_path.exists() {
            KnowledgeBase::load(&kb_path)?
        } else {
            KnowledgeBase::new()
        };
        let projects_dir = data_dir.join("projects");
        fs::create_dir_all(&projects_dir)?;
        let mut ids: Vec<String> = fs::read_dir(&projects_dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("project.json").exists())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();

        let mut projects = BTreeMap::new();
        for id in ids {
            let session = load_session(&projects_dir.join(&id), &id)?;
            projects.insert(id, Arc::new(Mutex::new(session)));
        }
        Ok(Store {
            data_dir: Some(data_dir.to_path_buf()),
            kb_path: Some(kb_path),
            kb: Mutex::new(kb),
            projects: RwLock::new(projects),
        })
    }

    pub fn create(&self, spec: ProjectSpec) -> Result<Created, StoreError> {
        let mut projects = self.projects.write().expect("project map lock");
        let next = projects
            .keys()
            .filter_map(|k| k.strip_prefix('p').and_then(|n| n.parse::<u32>().ok()))
            .max()
            .unwrap_or(0)
            + 1;
        let id = format!("p{next:04}");
        let mut session = Session::new(&id, spec)?;
        if let Some(dir) = &self.data_dir {
            let dir = dir.join("projects").join(&id);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("project.json"), to_pretty(&session.spec)?)?;
            let log_path = dir.join("events.jsonl");
            fs::write(&log_path, "")?;
            session.log_path = Some(log_path);
        }
        let warnings = self.warnings_for(&session.spec);
        let tag = session.spec.tag.clone();
        projects.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(Created { id, tag, warnings })
    }

    fn warnings_for(&self, spec: &ProjectSpec) -> Vec<TaskWarning> {
        let kb = self.kb.lock().expect("kb lock");
        spec.tasks
            .iter()
            .filter_map(|t| kb.lookup_task_warnings(&t.code, &spec.tag))
            .collect()
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, StoreError> {
        self.projects
            .read()
            .expect("project map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::ProjectNotFound(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        self.projects.read().expect("project map lock").keys().cloned().collect()
    }

    pub fn kb(&self) -> KnowledgeBase {
        self.kb.lock().expect("kb lock").clone()
    }

    pub fn warning(&self, tag: &str, task: &str) -> Option<TaskWarning> {
        self.kb.lock().expect("kb lock").lookup_task_warnings(task, tag)
    }

    /// Ends a project: commits its curated experience to the shared KB.
    pub fn finish(&self, id: &str, curation: Curation) -> Result<(u64, KnowledgeBase), StoreError> {
        let session = self.session(id)?;
        let mut session = session.lock().expect("session lock");
        let (seq, outcome) = session.execute(None, Command::CommitExperience { curation })?;
        let Outcome::Committed { experience } = outcome else {
            unreachable!("commit yields the curated experience")
        };
        let mut kb = self.kb.lock().expect("kb lock");
        kb.merge_curated(&experience, &Curation::default());
        if let Some(path) = &self.kb_path {
            kb.persist(path)?;
        }
        Ok((seq, experience))
    }
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String, StoreError> {
    serde_json::to_string_pretty(value).map_err(|e| StoreError::Io(e.into()))
}

fn load_session(dir: &Path, id: &str) -> Result<Session, StoreError> {
    let corrupt = |reason: String| StoreError::CorruptProject {
        id: id.to_string(),
        reason,
    };
    let spec: ProjectSpec = serde_json::from_reader(BufReader::new(fs::File::open(dir.join("project.json"))?))
        .map_err(|e| corrupt(e.to_string()))?;
    let log_path = dir.join("events.jsonl");
    let log = if log_path.exists() {
        read_log(BufReader::new(fs::File::open(&log_path)?)).map_err(|e| corrupt(e.to_string()))?
    } else {
        Vec::new()
    };
    let supervisor = Supervisor::replay(spec.clone(), &log).map_err(|e| corrupt(e.to_string()))?;
    Ok(Session {
        id: id.to_string(),
        spec,
        supervisor,
        log,
        log_path: Some(log_path),
    })
}
