//! Experience frames: task extensions and critical-path changes recorded
//! during a project, replayed as warnings when a later project of the same
//! type enters the same task.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::{CriticalPathChange, TransferNote};
use crate::plan::Minutes;

pub const KB_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferFrame {
    pub project_tag: String,
    pub task_identifier: String,
    pub optimistic_initial: Minutes,
    pub transfer_total: Minutes,
    pub reasons: Vec<String>,
    pub occurrences: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpFrame {
    pub project_tag: String,
    pub sequence: Vec<String>,
    pub trigger_task: String,
    pub transfer_value: Minutes,
    pub path_duration: Minutes,
}

/// What a user sees when entering a task that needed time before.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskWarning {
    pub task_identifier: String,
    pub project_tag: String,
    pub initial_period: Minutes,
    pub cumulated_period: Minutes,
    pub reasons: Vec<String>,
}

impl fmt::Display for TaskWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Task {} required a transfer from the time buffer: initial period {} min, cumulated period {} min; reasons: {}",
            self.task_identifier,
            self.initial_period,
            self.cumulated_period,
            self.reasons.join("; ")
        )
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("CorruptKbFile: {0}")]
    CorruptKbFile(String),
    #[error("Io: {0}")]
    Io(#[from] std::io::Error),
}

impl KbError {
    pub fn code(&self) -> &'static str {
        match self {
            KbError::CorruptKbFile(_) => "CorruptKbFile",
            KbError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    version: u32,
    transfer_frames: Vec<TransferFrame>,
    cp_frames: Vec<CpFrame>,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase {
            version: KB_VERSION,
            transfer_frames: Vec::new(),
            cp_frames: Vec::new(),
        }
    }
}

/// User decisions taken before a project's experience is merged.
/// Everything not listed is accepted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Curation {
    #[serde(default)]
    pub ignore_tasks: BTreeSet<String>,
    /// Indices into the project's critical-path history.
    #[serde(default)]
    pub ignore_cp_frames: BTreeSet<usize>,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.transfer_frames.is_empty() && self.cp_frames.is_empty()
    }

    pub fn transfer_frames(&self) -> &[TransferFrame] {
        &self.transfer_frames
    }

    pub fn frame(&self, project_tag: &str, task: &str) -> Option<&TransferFrame> {
        self.transfer_frames
            .iter()
            .find(|f| f.project_tag == project_tag && f.task_identifier == task)
    }

    pub fn tags(&self) -> BTreeSet<&str> {
        self.transfer_frames
            .iter()
            .map(|f| f.project_tag.as_str())
            .chain(self.cp_frames.iter().map(|f| f.project_tag.as_str()))
            .collect()
    }

    /// New frame, or merge into the frame already held for the same
    /// `(project_tag, task)`.
    pub fn record_transfer_frame(&mut self, project_tag: &str, note: &TransferNote) {
        self.merge_frame(TransferFrame {
            project_tag: project_tag.to_string(),
            task_identifier: note.task.clone(),
            optimistic_initial: note.optimistic_initial,
            transfer_total: note.amount,
            reasons: vec![note.reason.clone()],
            occurrences: 1,
        });
    }

    fn merge_frame(&mut self, frame: TransferFrame) {
        match self
            .transfer_frames
            .iter_mut()
            .find(|f| f.project_tag == frame.project_tag && f.task_identifier == frame.task_identifier)
        {
            Some(existing) => {
                existing.transfer_total += frame.transfer_total;
                existing.reasons.extend(frame.reasons);
                existing.occurrences += frame.occurrences;
            }
            None => self.transfer_frames.push(frame),
        }
    }

    pub fn record_cp_frame(&mut self, project_tag: &str, change: &CriticalPathChange) {
        self.cp_frames.push(CpFrame {
            project_tag: project_tag.to_string(),
            sequence: change.sequence.clone(),
            trigger_task: change.trigger_task.clone(),
            transfer_value: change.transfer_value,
            path_duration: change.path_duration,
        });
    }

    /// Critical-path history for one planner type, in recording order.
    pub fn list_cp_history(&self, project_tag: &str) -> Vec<&CpFrame> {
        self.cp_frames.iter().filter(|f| f.project_tag == project_tag).collect()
    }

    pub fn cp_frames(&self) -> &[CpFrame] {
        &self.cp_frames
    }

    pub fn lookup_task_warnings(&self, task: &str, project_tag: &str) -> Option<TaskWarning> {
        self.frame(project_tag, task).map(|f| TaskWarning {
            task_identifier: f.task_identifier.clone(),
            project_tag: f.project_tag.clone(),
            initial_period: f.optimistic_initial,
            cumulated_period: f.optimistic_initial + f.transfer_total,
            reasons: f.reasons.clone(),
        })
    }

    /// Merges a finished project's experience, skipping what the user chose
    /// to ignore.
    pub fn merge_curated(&mut self, experience: &KnowledgeBase, curation: &Curation) {
        for frame in &experience.transfer_frames {
            if !curation.ignore_tasks.contains(&frame.task_identifier) {
                self.merge_frame(frame.clone());
            }
        }
        for (i, frame) in experience.cp_frames.iter().enumerate() {
            if !curation.ignore_cp_frames.contains(&i) {
                self.cp_frames.push(frame.clone());
            }
        }
    }

    pub fn to_writer<W: Write>(&self, out: W) -> Result<(), KbError> {
        serde_json::to_writer_pretty(out, self).map_err(|e| KbError::Io(e.into()))
    }

    pub fn from_reader<R: Read>(input: R) -> Result<Self, KbError> {
        let kb: KnowledgeBase =
            serde_json::from_reader(input).map_err(|e| KbError::CorruptKbFile(e.to_string()))?;
        if kb.version != KB_VERSION {
            return Err(KbError::CorruptKbFile(format!(
                "unsupported version {} (expected {KB_VERSION})",
                kb.version
            )));
        }
        if let Some(f) = kb.transfer_frames.iter().find(|f| f.reasons.is_empty()) {
            return Err(KbError::CorruptKbFile(format!(
                "frame for task {} has no reasons",
                f.task_identifier
            )));
        }
        Ok(kb)
    }

    /// Writes through a temporary file so a crash never leaves half a KB.
    pub fn persist(&self, path: &Path) -> Result<(), KbError> {
        let tmp = path.with_extension("tmp");
        {
            let mut file = fs::File::create(&tmp)?;
            self.to_writer(&mut file)?;
            file.write_all(b"\n")?;
            file.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KbError> {
        let file = fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(task: &str, initial: Minutes, amount: Minutes, reason: &str) -> TransferNote {
        TransferNote {
            task: task.into(),
            optimistic_initial: initial,
            amount,
            reason: reason.into(),
        }
    }

    const TAG: &str = "software-v";

    #[test]
    fn records_and_warns() {
        let mut kb = KnowledgeBase::new();
        kb.record_transfer_frame(TAG, &note("id22", 45, 30, "wrong understanding of customer requirements"));
        kb.record_transfer_frame(TAG, &note("id31", 120, 60, "the remake of the interface between classes"));
        assert_eq!(kb.transfer_frames().len(), 2);

        let w = kb.lookup_task_warnings("id22", TAG).unwrap();
        assert_eq!((w.initial_period, w.cumulated_period), (45, 75));
        assert_eq!(w.reasons, vec!["wrong understanding of customer requirements".to_string()]);
        assert!(w.to_string().contains("initial period 45 min, cumulated period 75 min"));

        assert!(kb.lookup_task_warnings("id99", TAG).is_none());
        assert!(kb.lookup_task_warnings("id22", "hardware").is_none());
    }

    #[test]
    fn repeated_transfers_merge() {
        let mut kb = KnowledgeBase::new();
        kb.record_transfer_frame(TAG, &note("A", 40, 30, "first"));
        kb.record_transfer_frame(TAG, &note("A", 40, 15, "second"));
        let f = kb.frame(TAG, "A").unwrap();
        assert_eq!(f.transfer_total, 45);
        assert_eq!(f.reasons, vec!["first".to_string(), "second".to_string()]);
        assert_eq!(f.occurrences, 2);
        assert_eq!(kb.transfer_frames().len(), 1);
    }

    #[test]
    fn cp_history_in_order() {
        let mut kb = KnowledgeBase::new();
        for i in 0..3 {
            kb.record_cp_frame(
                TAG,
                &CriticalPathChange {
                    sequence: vec![format!("T{i}")],
                    trigger_task: format!("T{i}"),
                    transfer_value: 10 * i,
                    path_duration: 100 + i,
                },
            );
        }
        let history = kb.list_cp_history(TAG);
        assert_eq!(history.len(), 3);
        assert_eq!(
            history.iter().map(|f| f.path_duration).collect::<Vec<_>>(),
            vec![100, 101, 102]
        );
        assert!(kb.list_cp_history("other").is_empty());
    }

    #[test]
    fn persistence_round_trip_and_corruption() {
        let dir = std::env::temp_dir().join(format!("kb-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();

        let empty = dir.join("empty.json");
        KnowledgeBase::new().persist(&empty).unwrap();
        assert!(KnowledgeBase::load(&empty).unwrap().is_empty());

        let mut kb = KnowledgeBase::new();
        kb.record_transfer_frame(TAG, &note("id22", 45, 30, "why"));
        let path = dir.join("kb.json");
        kb.persist(&path).unwrap();
        assert_eq!(KnowledgeBase::load(&path).unwrap(), kb);

        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"version\": 1"));
        fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(KbError::CorruptKbFile(_))));

        fs::write(&path, r#"{"version":7,"transfer_frames":[],"cp_frames":[]}"#).unwrap();
        assert!(matches!(KnowledgeBase::load(&path), Err(KbError::CorruptKbFile(_))));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn curated_merge_skips_ignored() {
        let mut experience = KnowledgeBase::new();
        experience.record_transfer_frame(TAG, &note("keep", 10, 5, "a"));
        experience.record_transfer_frame(TAG, &note("drop", 10, 5, "b"));
        let mut kb = KnowledgeBase::new();
        kb.merge_curated(
            &experience,
            &Curation {
                ignore_tasks: ["drop".to_string()].into(),
                ..Default::default()
            },
        );
        assert!(kb.frame(TAG, "keep").is_some());
        assert!(kb.frame(TAG, "drop").is_none());
    }
}
