//! File-mediated data exchange.
//!
//! Agents never hand each other values directly: a producer publishes bytes to a
//! path under the project root, the workspace records an MD5 digest in an
//! append-only provenance ledger, and consumers read back through
//! [`ProjectWorkspace::read_for`], which re-verifies the digest.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat, Utc};
use md5::{Digest, Md5};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AgentRole, RequirementSpec};

pub const LAYOUT_VERSION: &str = "1";
pub const LEDGER_FILE: &str = "provenance.log";
pub const PIPELINE_LOG: &str = "pipeline.log";
pub const IDEA_PATH: &str = "airfoil/idea.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const KNOWLEDGE_DIR: &str = "knowledge";

#[derive(Debug, Error)]
pub enum WorkspaceError {
    #[error("workspace root {0} is not writable: {1}")]
    NotWritable(PathBuf, io::Error),
    #[error("workspace root {0} is not empty (use force to reuse it)")]
    NotEmpty(PathBuf),
    #[error("no workspace at {0}")]
    NotAWorkspace(PathBuf),
    #[error("path '{0}' escapes the workspace root")]
    PathEscape(String),
    #[error("artifact '{0}' has not been published")]
    MissingArtifact(String),
    #[error("digest mismatch for '{path}': ledger {expected}, file {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },
    #[error("'{0}' is already being published by another task")]
    PublishConflict(String),
    #[error("'{path}' is owned by {owner}, not {producer}")]
    ProducerConflict {
        path: String,
        owner: AgentRole,
        producer: AgentRole,
    },
    #[error("corrupt ledger line {line}: {reason}")]
    CorruptLedger { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = WorkspaceError> = std::result::Result<T, E>;

/// Lower-case hex MD5 of `bytes`. Integrity only; not a security primitive.
pub fn md5_hex(bytes: &[u8]) -> String {
    let digest = Md5::digest(bytes);
    let mut s = String::with_capacity(32);
    for b in digest {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Provenance entry of one published file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub producer: AgentRole,
    #[serde(default)]
    pub consumers: Vec<AgentRole>,
    #[serde(default)]
    pub digest: String,
    pub timestamp: DateTime<Utc>,
}

impl ArtifactRecord {
    pub fn new(path: impl Into<String>, producer: AgentRole) -> Self {
        Self {
            path: path.into(),
            producer,
            consumers: Vec::new(),
            digest: String::new(),
            timestamp: Utc::now(),
        }
    }

    pub fn consumed_by(mut self, roles: &[AgentRole]) -> Self {
        self.consumers = roles.to_vec();
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum LedgerEvent {
    Publish(ArtifactRecord),
    Consume {
        path: String,
        consumer: AgentRole,
        digest: String,
        timestamp: DateTime<Utc>,
    },
}

struct Ledger {
    file: File,
    index: HashMap<String, ArtifactRecord>,
}

struct Shared {
    ledger: Mutex<Ledger>,
    in_flight: Mutex<HashSet<String>>,
    log: Mutex<File>,
    tmp_counter: AtomicU64,
}

/// Handle on a project directory. Cheap to clone; clones share the ledger.
#[derive(Clone)]
pub struct ProjectWorkspace {
    root: PathBuf,
    pub layout_version: String,
    case_dirs: Arc<Mutex<BTreeMap<String, PathBuf>>>,
    shared: Arc<Shared>,
}

impl std::fmt::Debug for ProjectWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProjectWorkspace")
            .field("root", &self.root)
            .field("layout_version", &self.layout_version)
            .finish()
    }
}

/// Creates the project skeleton at `root` and persists `spec` as the idea document.
pub fn init_project(spec: &RequirementSpec, root: &Path, force: bool) -> Result<ProjectWorkspace> {
    if root.exists() {
        let non_empty = fs::read_dir(root)
            .map_err(|e| WorkspaceError::NotWritable(root.to_path_buf(), e))?
            .next()
            .is_some();
        if non_empty {
            // force only ever clears a previous project, never an arbitrary directory
            if !force || !root.join(LEDGER_FILE).is_file() {
                return Err(WorkspaceError::NotEmpty(root.to_path_buf()));
            }
            fs::remove_dir_all(root)
                .map_err(|e| WorkspaceError::NotWritable(root.to_path_buf(), e))?;
        }
    }
    for dir in [
        "",
        "airfoil/multi_case_analysis",
        CHECKPOINT_DIR,
        KNOWLEDGE_DIR,
    ] {
        fs::create_dir_all(root.join(dir))
            .map_err(|e| WorkspaceError::NotWritable(root.to_path_buf(), e))?;
    }
    File::create(root.join(LEDGER_FILE))
        .map_err(|e| WorkspaceError::NotWritable(root.to_path_buf(), e))?;
    File::create(root.join(PIPELINE_LOG))
        .map_err(|e| WorkspaceError::NotWritable(root.to_path_buf(), e))?;
    let ws = ProjectWorkspace::open(root)?;
    let idea = serde_json::to_vec_pretty(spec)?;
    ws.publish(ArtifactRecord::new(IDEA_PATH, AgentRole::Chief), &idea)?;
    ws.log("chief", "project initialized");
    Ok(ws)
}

impl ProjectWorkspace {
    /// Opens an existing project and replays its ledger.
    pub fn open(root: &Path) -> Result<Self> {
        let ledger_path = root.join(LEDGER_FILE);
        if !ledger_path.is_file() {
            return Err(WorkspaceError::NotAWorkspace(root.to_path_buf()));
        }
        let mut index: HashMap<String, ArtifactRecord> = HashMap::new();
        let reader = BufReader::new(File::open(&ledger_path)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let ev: LedgerEvent =
                serde_json::from_str(&line).map_err(|e| WorkspaceError::CorruptLedger {
                    line: i + 1,
                    reason: e.to_string(),
                })?;
            match ev {
                LedgerEvent::Publish(rec) => {
                    index.insert(rec.path.clone(), rec);
                }
                LedgerEvent::Consume { path, consumer, .. } => {
                    if let Some(rec) = index.get_mut(&path) {
                        if !rec.consumers.contains(&consumer) {
                            rec.consumers.push(consumer);
                        }
                    }
                }
            }
        }
        let file = OpenOptions::new().append(true).open(&ledger_path)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .open(root.join(PIPELINE_LOG))?;
        let mut case_dirs = BTreeMap::new();
        for entry in fs::read_dir(root)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().to_string();
            if name.starts_with("sim_") && entry.path().is_dir() {
                case_dirs.insert(name, entry.path());
            }
        }
        Ok(Self {
            root: root.to_path_buf(),
            layout_version: LAYOUT_VERSION.to_string(),
            case_dirs: Arc::new(Mutex::new(case_dirs)),
            shared: Arc::new(Shared {
                ledger: Mutex::new(Ledger { file, index }),
                in_flight: Mutex::new(HashSet::new()),
                log: Mutex::new(log),
                tmp_counter: AtomicU64::new(0),
            }),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn case_dirs(&self) -> BTreeMap<String, PathBuf> {
        self.case_dirs.lock().expect("case map poisoned").clone()
    }

    /// Registers (and creates) the directory of one simulation case.
    pub fn case_dir(&self, case_id: &str) -> Result<PathBuf> {
        let rel = checked_relative(case_id)?;
        let dir = self.root.join(rel);
        fs::create_dir_all(&dir)?;
        self.case_dirs
            .lock()
            .expect("case map poisoned")
            .insert(case_id.to_string(), dir.clone());
        Ok(dir)
    }

    /// Creates an (empty) directory inside the tree, e.g. solver time directories.
    pub fn ensure_dir(&self, rel: &str) -> Result<PathBuf> {
        let dir = self.root.join(checked_relative(rel)?);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Appends a timestamped, task-tagged line to `pipeline.log`.
    pub fn log(&self, tag: &str, message: &str) {
        let line = format!(
            "{} [{tag}] {message}\n",
            Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
        );
        if let Ok(mut f) = self.shared.log.lock() {
            let _ = f.write_all(line.as_bytes());
        }
    }

    /// Writes `content` atomically at `record.path` and appends a ledger entry.
    ///
    /// Republishing identical bytes is a no-op that returns the existing record.
    pub fn publish(&self, record: ArtifactRecord, content: &[u8]) -> Result<ArtifactRecord> {
        let rel = checked_relative(&record.path)?;
        let key = normalize(&rel);
        {
            let mut busy = self
                .shared
                .in_flight
                .lock()
                .expect("in-flight set poisoned");
            if !busy.insert(key.clone()) {
                return Err(WorkspaceError::PublishConflict(key));
            }
        }
        let result = self.publish_inner(record, key.clone(), &rel, content);
        self.shared
            .in_flight
            .lock()
            .expect("in-flight set poisoned")
            .remove(&key);
        result
    }

    fn publish_inner(
        &self,
        mut record: ArtifactRecord,
        key: String,
        rel: &Path,
        content: &[u8],
    ) -> Result<ArtifactRecord> {
        let target = self.root.join(rel);
        let digest = md5_hex(content);
        {
            let ledger = self.shared.ledger.lock().expect("ledger poisoned");
            if let Some(existing) = ledger.index.get(&key) {
                if existing.producer != record.producer {
                    return Err(WorkspaceError::ProducerConflict {
                        path: key,
                        owner: existing.producer,
                        producer: record.producer,
                    });
                }
                if existing.digest == digest
                    && fs::read(&target)
                        .map(|b| md5_hex(&b) == digest)
                        .unwrap_or(false)
                {
                    return Ok(existing.clone());
                }
            }
        }
        let parent = target.parent().unwrap_or(&self.root).to_path_buf();
        fs::create_dir_all(&parent)?;
        let n = self.shared.tmp_counter.fetch_add(1, Ordering::Relaxed);
        let tmp = parent.join(format!(
            ".{}.tmp-{}-{n}",
            target
                .file_name()
                .map(|s| s.to_string_lossy())
                .unwrap_or_default(),
            std::process::id()
        ));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(content)?;
            f.sync_all()?;
        }
        let mut ledger = self.shared.ledger.lock().expect("ledger poisoned");
        fs::rename(&tmp, &target)?;
        let back = fs::read(&target)?;
        let actual = md5_hex(&back);
        if actual != digest {
            return Err(WorkspaceError::DigestMismatch {
                path: key,
                expected: digest,
                actual,
            });
        }
        record.path = key.clone();
        record.digest = digest;
        record.timestamp = Utc::now();
        let line = serde_json::to_string(&LedgerEvent::Publish(record.clone()))?;
        writeln!(ledger.file, "{line}")?;
        ledger.file.flush()?;
        ledger.index.insert(key, record.clone());
        Ok(record)
    }

    /// Reads a published artifact on behalf of `consumer`, verifying its digest.
    pub fn read_for(&self, consumer: AgentRole, path: &str) -> Result<Vec<u8>> {
        let key = normalize(&checked_relative(path)?);
        let mut ledger = self.shared.ledger.lock().expect("ledger poisoned");
        let expected = match ledger.index.get(&key) {
            Some(rec) => rec.digest.clone(),
            None => return Err(WorkspaceError::MissingArtifact(key)),
        };
        let bytes = match fs::read(self.root.join(&key)) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                return Err(WorkspaceError::MissingArtifact(key))
            }
            Err(e) => return Err(e.into()),
        };
        let actual = md5_hex(&bytes);
        if actual != expected {
            return Err(WorkspaceError::DigestMismatch {
                path: key,
                expected,
                actual,
            });
        }
        let ev = LedgerEvent::Consume {
            path: key.clone(),
            consumer,
            digest: actual,
            timestamp: Utc::now(),
        };
        let line = serde_json::to_string(&ev)?;
        writeln!(ledger.file, "{line}")?;
        ledger.file.flush()?;
        if let Some(rec) = ledger.index.get_mut(&key) {
            if !rec.consumers.contains(&consumer) {
                rec.consumers.push(consumer);
            }
        }
        Ok(bytes)
    }

    pub fn read_string_for(&self, consumer: AgentRole, path: &str) -> Result<String> {
        let bytes = self.read_for(consumer, path)?;
        String::from_utf8(bytes)
            .map_err(|e| WorkspaceError::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
    }

    pub fn record(&self, path: &str) -> Option<ArtifactRecord> {
        let key = normalize(&checked_relative(path).ok()?);
        self.shared
            .ledger
            .lock()
            .expect("ledger poisoned")
            .index
            .get(&key)
            .cloned()
    }

    pub fn is_published(&self, path: &str) -> bool {
        self.record(path).is_some()
    }

    /// Latest record of every published path, sorted by path.
    pub fn artifacts(&self) -> Vec<ArtifactRecord> {
        let ledger = self.shared.ledger.lock().expect("ledger poisoned");
        let mut v: Vec<_> = ledger.index.values().cloned().collect();
        v.sort_by(|a, b| a.path.cmp(&b.path));
        v
    }

    /// Artifacts excluding the idea document written at initialization.
    pub fn produced_artifacts(&self) -> Vec<ArtifactRecord> {
        self.artifacts()
            .into_iter()
            .filter(|r| r.path != IDEA_PATH)
            .collect()
    }
}

fn checked_relative(path: &str) -> Result<PathBuf> {
    let p = Path::new(path);
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::Normal(s) => out.push(s),
            Component::CurDir => {}
            _ => return Err(WorkspaceError::PathEscape(path.to_string())),
        }
    }
    if out.as_os_str().is_empty() {
        return Err(WorkspaceError::PathEscape(path.to_string()));
    }
    Ok(out)
}

fn normalize(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().to_string())
        .collect::<Vec<_>>()
        .join("/")
}

/// Paths every completed project must contain, relative to the root.
pub const PROJECT_PATHS: &[&str] = &[
    PIPELINE_LOG,
    IDEA_PATH,
    "airfoil/result.md",
    "airfoil/aerodynamics_plan.md",
    "airfoil/acoustics_plan.md",
    "airfoil/multi_case_analysis/aerodynamic_data.csv",
    "airfoil/multi_case_analysis/acoustic_data.csv",
];

/// Paths every simulation case directory must contain. Trailing `/` marks a directory.
pub const CASE_PATHS: &[&str] = &[
    "mesh.md",
    "airfoil.geo",
    "constant/",
    "system/",
    "0/",
    "Allrun",
    "acoustics_data/flow_field.json",
    "acoustics_data/bpm_input.json",
    "acoustics_data/boundary_layer.json",
    "postProcessing/forceCoeffs/0/coefficient.dat",
    "postProcessing/integrated/force_coefficients.csv",
    "postProcessing/integrated/boundary_layer.csv",
    "postProcessing/integrated/cp_data.csv",
    "postProcessing/integrated/acoustics/acoustic_metrics.csv",
    "postProcessing/integrated/acoustics/third_octave_spectrum.csv",
    "VTK/openfoam.vtm.series",
    "VTK/openfoam_3000.vtm",
    "VTK/openfoam_3000/",
];

/// Mandatory project-tree paths that are absent under `root`.
pub fn missing_layout_paths(root: &Path) -> Vec<String> {
    let mut missing = Vec::new();
    let check = |rel: &str, missing: &mut Vec<String>| {
        let p = root.join(rel.trim_end_matches('/'));
        let ok = if rel.ends_with('/') {
            p.is_dir()
        } else {
            p.is_file()
        };
        if !ok {
            missing.push(rel.to_string());
        }
    };
    for rel in PROJECT_PATHS {
        check(rel, &mut missing);
    }
    let mut cases = 0;
    if let Ok(entries) = fs::read_dir(root) {
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().to_string())
            .filter(|n| n.starts_with("sim_"))
            .collect();
        names.sort();
        for name in names {
            cases += 1;
            for rel in CASE_PATHS {
                check(&format!("{name}/{rel}"), &mut missing);
            }
        }
    }
    if cases == 0 {
        missing.push("sim_*/".to_string());
    }
    missing
}

/// Files that are bookkeeping rather than agent artifacts; the knowledge store
/// keeps its own append-only notes.
fn exempt_from_provenance(rel: &str) -> bool {
    rel == PIPELINE_LOG
        || rel == LEDGER_FILE
        || rel.starts_with(&format!("{CHECKPOINT_DIR}/"))
        || rel.starts_with(&format!("{KNOWLEDGE_DIR}/"))
}

/// Every file in the tree that lacks a matching ledger entry, or whose bytes no
/// longer match the recorded digest.
pub fn provenance_violations(root: &Path) -> Result<Vec<String>> {
    let ws = ProjectWorkspace::open(root)?;
    let index: HashMap<String, ArtifactRecord> = ws
        .artifacts()
        .into_iter()
        .map(|r| (r.path.clone(), r))
        .collect();
    let mut producers: HashMap<String, BTreeSet<AgentRole>> = HashMap::new();
    let reader = BufReader::new(File::open(root.join(LEDGER_FILE))?);
    for line in reader.lines() {
        let line = line?;
        if let Ok(LedgerEvent::Publish(r)) = serde_json::from_str::<LedgerEvent>(&line) {
            producers.entry(r.path).or_default().insert(r.producer);
        }
    }
    let mut bad = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = normalize(path.strip_prefix(root).unwrap_or(&path));
            if exempt_from_provenance(&rel) {
                continue;
            }
            match index.get(&rel) {
                None => bad.push(format!("{rel}: no ledger entry")),
                Some(rec) => {
                    if producers.get(&rel).map_or(0, |s| s.len()) != 1 {
                        bad.push(format!("{rel}: more than one producer"));
                    }
                    if md5_hex(&fs::read(&path)?) != rec.digest {
                        bad.push(format!("{rel}: digest mismatch"));
                    }
                }
            }
        }
    }
    bad.sort();
    Ok(bad)
}

/// Legacy-format VTK polydata with one scalar point field.
pub fn vtk_polydata(title: &str, points: &[[f64; 3]], field: &str, values: &[f64]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET POLYDATA");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{:.9e} {:.9e} {:.9e}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "VERTICES {} {}", points.len(), 2 * points.len());
    for i in 0..points.len() {
        let _ = writeln!(s, "1 {i}");
    }
    let _ = writeln!(s, "POINT_DATA {}", values.len());
    let _ = writeln!(s, "SCALARS {field} double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in values {
        let _ = writeln!(s, "{v:.9e}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn fresh() -> (TempDir, ProjectWorkspace) {
        let dir = TempDir::new().unwrap();
        let root = dir.path().join("project");
        let ws = init_project(&RequirementSpec::uav_wing(), &root, false).unwrap();
        (dir, ws)
    }

    #[test]
    fn md5_known_vector() {
        assert_eq!(md5_hex(b""), "d41d8cd98f00b204e9800998ecf8427e");
        assert_eq!(md5_hex(b"abc"), "900150983cd24fb0d6963f7d28e17f72");
    }

    #[test]
    fn init_writes_idea_and_log() {
        let (_d, ws) = fresh();
        assert!(ws.root().join(IDEA_PATH).is_file());
        assert!(ws.root().join(PIPELINE_LOG).is_file());
        let spec: RequirementSpec =
            serde_json::from_slice(&ws.read_for(AgentRole::Aerodynamics, IDEA_PATH).unwrap())
                .unwrap();
        assert_eq!(spec, RequirementSpec::uav_wing());
    }

    #[test]
    fn reinit_without_force_fails() {
        let (_d, ws) = fresh();
        let err = init_project(&RequirementSpec::uav_wing(), ws.root(), false).unwrap_err();
        assert!(matches!(err, WorkspaceError::NotEmpty(_)));
        assert!(init_project(&RequirementSpec::uav_wing(), ws.root(), true).is_ok());
    }

    #[test]
    fn fresh_project_has_no_produced_artifacts() {
        let (_d, ws) = fresh();
        assert!(ws.produced_artifacts().is_empty());
    }

    #[test]
    fn publish_records_producer_and_digest() {
        let (_d, ws) = fresh();
        let rec = ws
            .publish(
                ArtifactRecord::new("sim_a/cfd_results/forces.dat", AgentRole::Aerodynamics)
                    .consumed_by(&[AgentRole::Structures]),
                b"# forces\n1 2 3\n",
            )
            .unwrap();
        assert_eq!(rec.producer, AgentRole::Aerodynamics);
        assert_eq!(rec.digest, md5_hex(b"# forces\n1 2 3\n"));
        let back = ws
            .read_for(AgentRole::Structures, "sim_a/cfd_results/forces.dat")
            .unwrap();
        assert_eq!(back, b"# forces\n1 2 3\n");
    }

    #[test]
    fn publish_outside_root_is_rejected() {
        let (_d, ws) = fresh();
        for bad in ["../x", "/etc/passwd", "a/../../b", ""] {
            let err = ws
                .publish(ArtifactRecord::new(bad, AgentRole::Geometry), b"x")
                .unwrap_err();
            assert!(matches!(err, WorkspaceError::PathEscape(_)), "{bad}");
        }
    }

    #[test]
    fn reading_unpublished_path_fails() {
        let (_d, ws) = fresh();
        let err = ws.read_for(AgentRole::Chief, "nothing.csv").unwrap_err();
        assert!(matches!(err, WorkspaceError::MissingArtifact(_)));
    }

    #[test]
    fn tampering_is_detected() {
        let (_d, ws) = fresh();
        ws.publish(
            ArtifactRecord::new("a.csv", AgentRole::Optimizer),
            b"x,y\n1,2\n",
        )
        .unwrap();
        let p = ws.root().join("a.csv");
        let mut bytes = fs::read(&p).unwrap();
        bytes[0] ^= 0x01;
        fs::write(&p, bytes).unwrap();
        let err = ws.read_for(AgentRole::Chief, "a.csv").unwrap_err();
        assert!(matches!(err, WorkspaceError::DigestMismatch { .. }));
    }

    #[test]
    fn republishing_identical_content_is_idempotent() {
        let (_d, ws) = fresh();
        let a = ws
            .publish(ArtifactRecord::new("x.md", AgentRole::Chief), b"same")
            .unwrap();
        let b = ws
            .publish(ArtifactRecord::new("x.md", AgentRole::Chief), b"same")
            .unwrap();
        assert_eq!(a, b);
        let lines = fs::read_to_string(ws.root().join(LEDGER_FILE)).unwrap();
        assert_eq!(lines.matches("\"x.md\"").count(), 1);
    }

    #[test]
    fn second_producer_is_rejected() {
        let (_d, ws) = fresh();
        ws.publish(ArtifactRecord::new("x.md", AgentRole::Chief), b"a")
            .unwrap();
        let err = ws
            .publish(ArtifactRecord::new("x.md", AgentRole::Geometry), b"b")
            .unwrap_err();
        assert!(matches!(err, WorkspaceError::ProducerConflict { .. }));
    }

    #[test]
    fn ledger_replays_on_open() {
        let (_d, ws) = fresh();
        ws.publish(ArtifactRecord::new("k/a.json", AgentRole::Acoustics), b"{}")
            .unwrap();
        ws.read_for(AgentRole::Chief, "k/a.json").unwrap();
        let reopened = ProjectWorkspace::open(ws.root()).unwrap();
        let rec = reopened.record("k/a.json").unwrap();
        assert_eq!(rec.producer, AgentRole::Acoustics);
        assert_eq!(rec.consumers, vec![AgentRole::Chief]);
    }

    #[test]
    fn provenance_audit_flags_strays() {
        let (_d, ws) = fresh();
        ws.publish(ArtifactRecord::new("ok.txt", AgentRole::Chief), b"1")
            .unwrap();
        assert!(provenance_violations(ws.root()).unwrap().is_empty());
        fs::write(ws.root().join("stray.txt"), b"?").unwrap();
        let bad = provenance_violations(ws.root()).unwrap();
        assert_eq!(bad, vec!["stray.txt: no ledger entry".to_string()]);
    }

    #[test]
    fn layout_checker_lists_missing_paths() {
        let (_d, ws) = fresh();
        let missing = missing_layout_paths(ws.root());
        assert!(missing.contains(&"airfoil/result.md".to_string()));
        assert!(missing.contains(&"sim_*/".to_string()));
        assert!(!missing.contains(&IDEA_PATH.to_string()));
    }

    #[test]
    fn vtk_header_and_counts() {
        let s = vtk_polydata("t", &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], "Cp", &[0.5, -0.5]);
        assert!(s.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(s.contains("POINTS 2 double"));
        assert!(s.contains("POINT_DATA 2"));
    }
}
