//! Recording collections: on-disk ingestion, deterministic fixtures and
//! subject-disjoint splitting.

use std::collections::BTreeMap;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::ink::{Class, InkError, Recording};

mod fixture;
mod io;
mod split;

pub use fixture::{make_fixture_corpus, FixtureParams};
pub use io::{load_corpus, parse_recording, recording_path, serialize_recording, write_corpus, write_manifest, MANIFEST_FILE};
pub use split::{k_folds, subject_split, SplitSpec};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{} file(s) failed to parse: {}", .0.len(), summarize(.0))]
    ParseReport(Vec<(PathBuf, String)>),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("duplicate recording for subject {subject_id} task {task_id}")]
    Duplicate { subject_id: String, task_id: u8 },
    #[error("subject {0} appears with both class labels")]
    MixedLabels(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("{subjects} subjects cannot fill {folds} folds")]
    InsufficientSubjects { subjects: usize, folds: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Ink(#[from] InkError),
}

fn summarize(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, m)| format!("{}: {m}", p.display()))
        .collect::<Vec<_>>()
        .join("; ")
}

/// An indexed set of recordings; every `(subject, task)` pair occurs at most once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    recordings: Vec<Recording>,
    index: BTreeMap<String, Vec<usize>>,
}

impl Corpus {
    pub fn new(recordings: Vec<Recording>) -> Result<Self, CorpusError> {
        let mut index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, rec) in recordings.iter().enumerate() {
            let positions = index.entry(rec.subject_id.clone()).or_default();
            for &j in positions.iter() {
                let other: &Recording = &recordings[j];
                if other.task_id == rec.task_id {
                    return Err(CorpusError::Duplicate { subject_id: rec.subject_id.clone(), task_id: rec.task_id });
                }
                if other.label != rec.label {
                    return Err(CorpusError::MixedLabels(rec.subject_id.clone()));
                }
            }
            positions.push(i);
        }
        Ok(Self { recordings, index })
    }

    pub fn recordings(&self) -> &[Recording] {
        &self.recordings
    }

    pub fn len(&self) -> usize {
        self.recordings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recordings.is_empty()
    }

    /// Subject ids in sorted order.
    pub fn subjects(&self) -> Vec<&str> {
        self.index.keys().map(String::as_str).collect()
    }

    pub fn n_subjects(&self) -> usize {
        self.index.len()
    }

    pub fn subject_label(&self, subject_id: &str) -> Option<Class> {
        self.index.get(subject_id).map(|pos| self.recordings[pos[0]].label)
    }

    pub fn subject_recordings(&self, subject_id: &str) -> impl Iterator<Item = &Recording> {
        self.index.get(subject_id).into_iter().flatten().map(|&i| &self.recordings[i])
    }

    /// Sorted subject ids of one class.
    pub fn subjects_of(&self, class: Class) -> Vec<&str> {
        self.index
            .iter()
            .filter(|(_, pos)| self.recordings[pos[0]].label == class)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Number of AD and healthy subjects.
    pub fn class_counts(&self) -> (usize, usize) {
        (self.subjects_of(Class::Ad).len(), self.subjects_of(Class::Healthy).len())
    }

    pub fn task(&self, task_id: u8) -> impl Iterator<Item = &Recording> {
        self.recordings.iter().filter(move |r| r.task_id == task_id)
    }

    pub fn has_task(&self, task_id: u8) -> bool {
        self.recordings.iter().any(|r| r.task_id == task_id)
    }

    /// Sub-corpus of the given subjects, keeping recording order.
    pub fn with_subjects(&self, subjects: &[&str]) -> Corpus {
        let wanted: std::collections::BTreeSet<&str> = subjects.iter().copied().collect();
        let recs = self
            .recordings
            .iter()
            .filter(|r| wanted.contains(r.subject_id.as_str()))
            .cloned()
            .collect();
        Corpus::new(recs).expect("subset of a valid corpus is valid")
    }

    /// SHA-256 over the canonical serialization of every recording, hex encoded.
    pub fn digest(&self) -> String {
        let mut order: Vec<&Recording> = self.recordings.iter().collect();
        order.sort_by(|a, b| (&a.subject_id, a.task_id).cmp(&(&b.subject_id, b.task_id)));
        let mut hasher = Sha256::new();
        for rec in order {
            hasher.update(recording_path(rec).to_string_lossy().as_bytes());
            hasher.update(b"\n");
            hasher.update(serialize_recording(rec).as_bytes());
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
