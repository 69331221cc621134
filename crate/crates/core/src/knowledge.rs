//! Keyword-indexed note store shared by the agents.
//!
//! Notes are plain-text files with a small front-matter block. The store is
//! append-only: recording never rewrites an existing note.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::AgentRole;

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("note text is empty")]
    EmptyNote,
    #[error("malformed note {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub id: String,
    pub tags: Vec<String>,
    pub producer: String,
    pub timestamp: String,
    pub body: String,
}

impl Note {
    fn render(&self) -> String {
        format!(
            "---\nid: {}\ntags: {}\nproducer: {}\ntimestamp: {}\n---\n{}\n",
            self.id,
            self.tags.join(", "),
            self.producer,
            self.timestamp,
            self.body.trim_end()
        )
    }

    fn parse(text: &str, name: &str) -> Result<Self, KnowledgeError> {
        let bad = || KnowledgeError::Malformed(name.to_string());
        let rest = text.strip_prefix("---\n").ok_or_else(bad)?;
        let (head, body) = rest.split_once("\n---\n").ok_or_else(bad)?;
        let mut note = Note {
            id: String::new(),
            tags: Vec::new(),
            producer: String::new(),
            timestamp: String::new(),
            body: body.trim_end().to_string(),
        };
        for line in head.lines() {
            let (k, v) = line.split_once(':').ok_or_else(bad)?;
            let v = v.trim();
            match k.trim() {
                "id" => note.id = v.to_string(),
                "tags" => {
                    note.tags = v
                        .split(',')
                        .map(|t| t.trim().to_string())
                        .filter(|t| !t.is_empty())
                        .collect()
                }
                "producer" => note.producer = v.to_string(),
                "timestamp" => note.timestamp = v.to_string(),
                _ => {}
            }
        }
        if note.id.is_empty() {
            return Err(bad());
        }
        Ok(note)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNote {
    pub note: Note,
    pub score: u32,
}

const BUNDLED: &[(&str, &str)] = &[
    (
        "material, 7075-t6, aluminium, density",
        "Aluminium 7075-T6: density 2810 kg/m³, Young's modulus 71.7 GPa, yield strength 503 MPa, ultimate strength 572 MPa, Poisson ratio 0.33.",
    ),
    (
        "loads, load-factor, structures",
        "Load-factor convention for small UAV wings: cruise n = 1.0, maneuver n = 2.5, gust n = 1.5, landing n = 3.0. Each case scales lift plus self-weight on the semi-span.",
    ),
    (
        "structures, safety-factor, design-rule",
        "Minimum safety factor on yield for primary wing structure is 1.5 unless the requirement states otherwise.",
    ),
    (
        "aerodynamics, turbulence, mesh",
        "Spalart-Allmaras with a wall-resolved C-mesh (y+ ~ 1) and 40k-45k cells is adequate for attached flow on 2D sections below stall.",
    ),
    (
        "acoustics, bpm, trailing-edge",
        "Turbulent boundary-layer trailing-edge noise dominates tripped sections at low incidence; its level scales roughly with U^5 and displacement thickness.",
    ),
    (
        "recovery, divergence, relaxation",
        "Solver divergence is first treated by lowering relaxation (p 0.3, U 0.2) and halving the time step before remeshing.",
    ),
];

/// Directory-backed note store.
#[derive(Debug)]
pub struct KnowledgeStore {
    dir: PathBuf,
    lock: Mutex<()>,
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || c == '-' || c == '.'))
        .map(|t| t.trim_matches('.').to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

impl KnowledgeStore {
    /// Opens the store, seeding the bundled notes into an empty directory.
    pub fn open(dir: &Path) -> Result<Self, KnowledgeError> {
        fs::create_dir_all(dir)?;
        let store = Self {
            dir: dir.to_path_buf(),
            lock: Mutex::new(()),
        };
        if store.note_files()?.is_empty() {
            for (tags, body) in BUNDLED {
                let tags: Vec<&str> = tags.split(", ").collect();
                store.append(body, &tags, "bundled", "bundled")?;
            }
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn note_files(&self) -> Result<Vec<PathBuf>, KnowledgeError> {
        let mut files: Vec<PathBuf> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "md"))
            .collect();
        files.sort();
        Ok(files)
    }

    fn append(
        &self,
        body: &str,
        tags: &[&str],
        producer: &str,
        timestamp: &str,
    ) -> Result<String, KnowledgeError> {
        if body.trim().is_empty() {
            return Err(KnowledgeError::EmptyNote);
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut seq = self.note_files()?.len() + 1;
        loop {
            let id = format!("note-{seq:04}");
            let path = self.dir.join(format!("{id}.md"));
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    let note = Note {
                        id: id.clone(),
                        tags: tags.iter().map(|t| t.trim().to_lowercase()).collect(),
                        producer: producer.to_string(),
                        timestamp: timestamp.to_string(),
                        body: body.to_string(),
                    };
                    f.write_all(note.render().as_bytes())?;
                    return Ok(id);
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => seq += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Appends a finding; duplicates get their own id.
    pub fn record_finding(
        &self,
        note: &str,
        tags: &[&str],
        producer: AgentRole,
    ) -> Result<String, KnowledgeError> {
        let ts = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        self.append(note, tags, producer.as_str(), &ts)
    }

    pub fn notes(&self) -> Result<Vec<Note>, KnowledgeError> {
        self.note_files()?
            .iter()
            .map(|p| {
                let name = p.display().to_string();
                Note::parse(&fs::read_to_string(p)?, &name)
            })
            .collect()
    }

    /// Notes ranked by term frequency over body and tags (tags count twice);
    /// ties go to the older note.
    pub fn query(&self, terms: &str) -> Result<Vec<ScoredNote>, KnowledgeError> {
        let q = tokens(terms);
        if q.is_empty() {
            return Ok(Vec::new());
        }
        let mut hits: Vec<ScoredNote> = self
            .notes()?
            .into_iter()
            .filter_map(|note| {
                let body = tokens(&note.body);
                let tags: Vec<String> = note.tags.iter().flat_map(|t| tokens(t)).collect();
                let score: usize = q
                    .iter()
                    .map(|t| {
                        body.iter().filter(|b| *b == t).count()
                            + 2 * tags.iter().filter(|b| *b == t).count()
                    })
                    .sum();
                (score > 0).then_some(ScoredNote {
                    note,
                    score: score as u32,
                })
            })
            .collect();
        hits.sort_by(|a, b| b.score.cmp(&a.score).then(a.note.id.cmp(&b.note.id)));
        Ok(hits)
    }

    /// Notes carrying `tag`, oldest first.
    pub fn by_tag(&self, tag: &str) -> Result<Vec<Note>, KnowledgeError> {
        let tag = tag.to_lowercase();
        Ok(self
            .notes()?
            .into_iter()
            .filter(|n| n.tags.contains(&tag))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn material_lookup() {
        let d = TempDir::new().unwrap();
        let s = KnowledgeStore::open(d.path()).unwrap();
        let hits = s.query("7075-T6 density").unwrap();
        assert!(hits[0].note.body.contains("2810 kg/m³"));
        assert!(s.query("unobtainium").unwrap().is_empty());
        assert_eq!(
            s.query("load factor gust").unwrap(),
            s.query("load factor gust").unwrap()
        );
    }

    #[test]
    fn findings_append() {
        let d = TempDir::new().unwrap();
        let s = KnowledgeStore::open(d.path()).unwrap();
        let before = s.notes().unwrap();
        let a = s
            .record_finding(
                "sweep config sw0.2 diverged",
                &["known-failure"],
                AgentRole::Structures,
            )
            .unwrap();
        let b = s
            .record_finding(
                "sweep config sw0.2 diverged",
                &["known-failure"],
                AgentRole::Structures,
            )
            .unwrap();
        assert_ne!(a, b);
        let tagged = s.by_tag("known-failure").unwrap();
        assert_eq!(tagged.len(), 2);
        assert_eq!(tagged[0].producer, "structures");
        assert_eq!(&s.notes().unwrap()[..before.len()], &before[..]);
        assert!(s
            .query("known-failure")
            .unwrap()
            .iter()
            .any(|h| h.note.id == a));
        assert!(matches!(
            s.record_finding("  ", &[], AgentRole::Chief),
            Err(KnowledgeError::EmptyNote)
        ));
        // reopening does not reseed
        assert_eq!(
            KnowledgeStore::open(d.path())
                .unwrap()
                .notes()
                .unwrap()
                .len(),
            before.len() + 2
        );
    }
}
