//! Log-based error diagnosis driven by a regex rule table.

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::RecoveryError;

const DEFAULT_RULES: &str = include_str!("../../data/log_rules.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    MeshConversionFailure,
    SolverDivergence,
    BoundaryConditionError,
    ResourceExhaustion,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorClass {
    pub kind: ErrorKind,
    /// Log lines that matched the winning rule.
    pub evidence: Vec<String>,
}

impl ErrorClass {
    pub fn unknown() -> Self {
        Self {
            kind: ErrorKind::Unknown,
            evidence: Vec::new(),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RuleDoc {
    rules: Vec<RuleEntry>,
}

#[derive(Debug, Deserialize)]
struct RuleEntry {
    kind: ErrorKind,
    patterns: Vec<String>,
}

#[derive(Debug)]
struct Rule {
    kind: ErrorKind,
    patterns: Vec<Regex>,
}

/// Ordered classification rules. The first rule with any matching line wins.
#[derive(Debug)]
pub struct LogRules {
    rules: Vec<Rule>,
}

impl LogRules {
    pub fn from_json(text: &str) -> Result<Self, RecoveryError> {
        let doc: RuleDoc =
            serde_json::from_str(text).map_err(|e| RecoveryError::Rules(e.to_string()))?;
        let mut rules = Vec::with_capacity(doc.rules.len());
        for entry in doc.rules {
            if entry.kind == ErrorKind::Unknown {
                return Err(RecoveryError::Rules(
                    "'unknown' is the fallback and cannot carry patterns".into(),
                ));
            }
            let patterns = entry
                .patterns
                .iter()
                .map(|p| Regex::new(p).map_err(|e| RecoveryError::Rules(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            rules.push(Rule {
                kind: entry.kind,
                patterns,
            });
        }
        Ok(Self { rules })
    }

    pub fn from_file(path: &Path) -> Result<Self, RecoveryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// The bundled table: mesh, divergence, boundary, then resource patterns.
    pub fn builtin() -> &'static LogRules {
        static RULES: OnceLock<LogRules> = OnceLock::new();
        RULES.get_or_init(|| LogRules::from_json(DEFAULT_RULES).expect("bundled rules parse"))
    }

    pub fn classify(&self, logs: &str) -> ErrorClass {
        for rule in &self.rules {
            let evidence: Vec<String> = logs
                .lines()
                .filter(|line| rule.patterns.iter().any(|re| re.is_match(line)))
                .map(|line| line.trim().to_string())
                .collect();
            if !evidence.is_empty() {
                return ErrorClass {
                    kind: rule.kind,
                    evidence,
                };
            }
        }
        ErrorClass::unknown()
    }
}

/// Classifies with the bundled rule table.
pub fn classify(logs: &str) -> ErrorClass {
    LogRules::builtin().classify(logs)
}
