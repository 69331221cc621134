//! Retry with rollback, strategy adjustment and exponential backoff.

use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::classify::{ErrorClass, LogRules};
use super::strategy::{strategy_for, RecoveryStrategy, SolverParams};

pub const MAX_RETRIES: u32 = 3;

/// Source of waiting. Tests inject [`SimulatedClock`] so backoff costs nothing.
pub trait Clock: Send + Sync {
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Records requested waits instead of sleeping.
#[derive(Debug, Default)]
pub struct SimulatedClock {
    waits: Mutex<Vec<Duration>>,
}

impl SimulatedClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn waits(&self) -> Vec<Duration> {
        self.waits.lock().expect("clock poisoned").clone()
    }

    pub fn total(&self) -> Duration {
        self.waits().iter().sum()
    }
}

impl Clock for SimulatedClock {
    fn sleep(&self, d: Duration) {
        self.waits.lock().expect("clock poisoned").push(d);
    }
}

/// State that recovery strategies can act on.
pub trait Recoverable: Clone {
    fn solver_params(&self) -> Option<&SolverParams> {
        None
    }

    fn apply_strategy(&mut self, _strategy: &RecoveryStrategy) {}
}

/// Failure of one execution attempt; `logs` feed the classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptFailure {
    pub message: String,
    pub logs: String,
}

impl AttemptFailure {
    pub fn new(message: impl Into<String>, logs: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            logs: logs.into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    /// Wait before attempt `k + 1` is `base · 2^k`.
    pub base_wait: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: MAX_RETRIES,
            base_wait: Duration::from_secs(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetryOutcome<S> {
    pub state: S,
    pub success: bool,
    pub attempts: u32,
    pub waits: Vec<Duration>,
    pub diagnoses: Vec<ErrorClass>,
    pub strategies: Vec<RecoveryStrategy>,
    pub last_error: Option<String>,
}

/// Runs `execute` up to `policy.max_retries` times.
///
/// Between failed attempts the state is rolled back via `rollback` (normally a
/// checkpoint load), a strategy is derived from the classified logs, and the
/// clock waits `2^attempt` base units. A successful execution must also pass
/// `validate` before it counts.
pub fn retry_loop<S, R, E, V>(
    initial: S,
    policy: RetryPolicy,
    rules: &LogRules,
    clock: &dyn Clock,
    mut rollback: R,
    mut execute: E,
    mut validate: V,
) -> RetryOutcome<S>
where
    S: Recoverable,
    R: FnMut() -> S,
    E: FnMut(&mut S, u32) -> Result<(), AttemptFailure>,
    V: FnMut(&S) -> Result<(), String>,
{
    let mut state = initial;
    let mut strategy: Option<RecoveryStrategy> = None;
    let mut out = RetryOutcome {
        state: state.clone(),
        success: false,
        attempts: 0,
        waits: Vec::new(),
        diagnoses: Vec::new(),
        strategies: Vec::new(),
        last_error: None,
    };
    let default_params = SolverParams::default();
    for attempt in 1..=policy.max_retries {
        out.attempts = attempt;
        let mut candidate = state.clone();
        if let Some(s) = &strategy {
            candidate.apply_strategy(s);
        }
        let failure = match execute(&mut candidate, attempt) {
            Ok(()) => match validate(&candidate) {
                Ok(()) => {
                    out.state = candidate;
                    out.success = true;
                    out.last_error = None;
                    return out;
                }
                Err(msg) => AttemptFailure::new(format!("integrity validation failed: {msg}"), msg),
            },
            Err(f) => f,
        };
        let class = rules.classify(&failure.logs);
        out.last_error = Some(failure.message);
        out.diagnoses.push(class.clone());
        if attempt < policy.max_retries {
            state = rollback();
            let params = state.solver_params().unwrap_or(&default_params);
            let next = strategy_for(&class, attempt, params);
            out.strategies.push(next.clone());
            strategy = Some(next);
            let wait = policy.base_wait * 2u32.saturating_pow(attempt);
            clock.sleep(wait);
            out.waits.push(wait);
        }
    }
    out.state = state;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recovery::classify::ErrorKind;
    use crate::recovery::strategy::RecoveryAction;

    #[derive(Debug, Clone, PartialEq)]
    struct Case {
        params: SolverParams,
        scratch: Vec<u32>,
    }

    impl Recoverable for Case {
        fn solver_params(&self) -> Option<&SolverParams> {
            Some(&self.params)
        }
        fn apply_strategy(&mut self, s: &RecoveryStrategy) {
            s.apply(&mut self.params);
        }
    }

    fn case() -> Case {
        Case {
            params: SolverParams::default(),
            scratch: vec![],
        }
    }

    fn secs(v: &[u64]) -> Vec<Duration> {
        v.iter().map(|s| Duration::from_secs(*s)).collect()
    }

    #[test]
    fn success_on_first_attempt_waits_nothing() {
        let clock = SimulatedClock::new();
        let out = retry_loop(
            case(),
            RetryPolicy::default(),
            LogRules::builtin(),
            &clock,
            case,
            |_, _| Ok(()),
            |_| Ok(()),
        );
        assert!(out.success);
        assert_eq!(out.attempts, 1);
        assert!(clock.waits().is_empty());
    }

    #[test]
    fn success_on_second_attempt_waits_two_seconds() {
        let clock = SimulatedClock::new();
        let out = retry_loop(
            case(),
            RetryPolicy::default(),
            LogRules::builtin(),
            &clock,
            case,
            |_, attempt| {
                if attempt == 1 {
                    Err(AttemptFailure::new("diverged", "Floating point exception"))
                } else {
                    Ok(())
                }
            },
            |_| Ok(()),
        );
        assert!(out.success);
        assert_eq!(clock.waits(), secs(&[2]));
        assert_eq!(out.state.params.relax_p, 0.3);
        assert_eq!(out.state.params.relax_u, 0.2);
        assert_eq!(out.state.params.time_step, 0.5);
    }

    #[test]
    fn exhaustion_backs_off_two_then_four() {
        let clock = SimulatedClock::new();
        let mut calls = 0;
        let out = retry_loop(
            case(),
            RetryPolicy::default(),
            LogRules::builtin(),
            &clock,
            case,
            |_, _| {
                calls += 1;
                Err(AttemptFailure::new(
                    "mesh",
                    "gmshToFoam: error reading airfoil.msh",
                ))
            },
            |_| Ok(()),
        );
        assert!(!out.success);
        assert_eq!(calls, 3);
        assert_eq!(clock.waits(), secs(&[2, 4]));
        assert_eq!(out.diagnoses.len(), 3);
        assert!(out
            .diagnoses
            .iter()
            .all(|d| d.kind == ErrorKind::MeshConversionFailure));
        // second retry runs with the composed refinement
        assert!(matches!(
            out.strategies[1].action,
            RecoveryAction::RegenerateMesh { refinement } if (refinement - 0.64).abs() < 1e-15
        ));
    }

    #[test]
    fn failed_attempts_roll_back_to_checkpoint() {
        let clock = SimulatedClock::new();
        let checkpoint = case();
        let out = retry_loop(
            checkpoint.clone(),
            RetryPolicy::default(),
            LogRules::builtin(),
            &clock,
            || checkpoint.clone(),
            |s, attempt| {
                s.scratch.push(attempt);
                Err(AttemptFailure::new("boom", ""))
            },
            |_| Ok(()),
        );
        assert!(!out.success);
        assert_eq!(out.state, checkpoint);
    }

    #[test]
    fn validation_failure_counts_as_failed_attempt() {
        let clock = SimulatedClock::new();
        let out = retry_loop(
            case(),
            RetryPolicy::default(),
            LogRules::builtin(),
            &clock,
            case,
            |_, _| Ok(()),
            |_| Err("digest audit failed".to_string()),
        );
        assert!(!out.success);
        assert_eq!(out.attempts, 3);
        assert!(out.last_error.unwrap().contains("integrity"));
    }
}
