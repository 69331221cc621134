//! Domain-specific recovery strategies keyed by error class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::classify::{ErrorClass, ErrorKind};

/// Numerical knobs a recovery strategy may turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    /// Mesh refinement scale in (0, 1].
    pub refinement: f64,
    pub relax_p: f64,
    pub relax_u: f64,
    pub time_step: f64,
    /// Patch name → boundary type.
    pub patch_types: BTreeMap<String, String>,
}

impl Default for SolverParams {
    fn default() -> Self {
        let patch_types = [
            ("inlet", "patch"),
            ("outlet", "patch"),
            ("walls", "wall"),
            ("front", "empty"),
            ("back", "empty"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        Self {
            refinement: 1.0,
            relax_p: 0.3,
            relax_u: 0.7,
            time_step: 1.0,
            patch_types,
        }
    }
}

impl SolverParams {
    /// Relaxation factors in (0, 1], refinement in (0, 1], positive time step.
    pub fn in_bounds(&self) -> bool {
        let unit = |x: f64| x > 0.0 && x <= 1.0;
        unit(self.refinement) && unit(self.relax_p) && unit(self.relax_u) && self.time_step > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum RecoveryAction {
    RegenerateMesh {
        refinement: f64,
    },
    AdjustRelaxation {
        pressure: f64,
        velocity: f64,
        time_step: f64,
    },
    CorrectPatches {
        mapping: BTreeMap<String, String>,
    },
    /// Clean up scratch state and retry unchanged.
    Default {
        cleanup: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryStrategy {
    pub class: ErrorKind,
    pub attempt: u32,
    #[serde(flatten)]
    pub action: RecoveryAction,
}

impl RecoveryStrategy {
    /// Applies the strategy's parameters to `params`.
    pub fn apply(&self, params: &mut SolverParams) {
        match &self.action {
            RecoveryAction::RegenerateMesh { refinement } => params.refinement = *refinement,
            RecoveryAction::AdjustRelaxation {
                pressure,
                velocity,
                time_step,
            } => {
                params.relax_p = *pressure;
                params.relax_u = *velocity;
                params.time_step = *time_step;
            }
            RecoveryAction::CorrectPatches { mapping } => {
                for (name, kind) in mapping {
                    if let Some(t) = params.patch_types.get_mut(name) {
                        *t = kind.clone();
                    }
                }
            }
            RecoveryAction::Default { .. } => {}
        }
    }
}

const MESH_SCALE: f64 = 0.8;
const DIVERGENCE_PRESSURE: f64 = 0.3;
const DIVERGENCE_VELOCITY: f64 = 0.2;
const TIME_STEP_SCALE: f64 = 0.5;

/// Strategy for the `attempt`-th recovery (1-based) starting from `current`.
///
/// Later attempts tighten the same action: mesh refinement and time step are
/// scaled once per attempt, relaxation factors shrink by 0.8 per extra attempt.
pub fn strategy_for(class: &ErrorClass, attempt: u32, current: &SolverParams) -> RecoveryStrategy {
    let attempt = attempt.max(1);
    let k = i32::try_from(attempt).unwrap_or(i32::MAX);
    let action = match class.kind {
        ErrorKind::MeshConversionFailure => RecoveryAction::RegenerateMesh {
            refinement: current.refinement * MESH_SCALE.powi(k),
        },
        ErrorKind::SolverDivergence => {
            let tighten = MESH_SCALE.powi(k - 1);
            RecoveryAction::AdjustRelaxation {
                pressure: DIVERGENCE_PRESSURE.min(current.relax_p) * tighten,
                velocity: DIVERGENCE_VELOCITY.min(current.relax_u) * tighten,
                time_step: current.time_step * TIME_STEP_SCALE.powi(k),
            }
        }
        ErrorKind::BoundaryConditionError => {
            let mapping = [("walls", "wall"), ("front", "empty"), ("back", "empty")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            RecoveryAction::CorrectPatches { mapping }
        }
        ErrorKind::ResourceExhaustion | ErrorKind::Unknown => {
            RecoveryAction::Default { cleanup: true }
        }
    };
    RecoveryStrategy {
        class: class.kind,
        attempt,
        action,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn class(kind: ErrorKind) -> ErrorClass {
        ErrorClass {
            kind,
            evidence: vec![],
        }
    }

    #[test]
    fn divergence_first_attempt_matches_reference_values() {
        let p = SolverParams::default();
        let s = strategy_for(&class(ErrorKind::SolverDivergence), 1, &p);
        assert_eq!(
            s.action,
            RecoveryAction::AdjustRelaxation {
                pressure: 0.3,
                velocity: 0.2,
                time_step: 0.5
            }
        );
    }

    #[test]
    fn mesh_refinement_scales_by_point_eight() {
        let p = SolverParams::default();
        let s = strategy_for(&class(ErrorKind::MeshConversionFailure), 1, &p);
        assert_eq!(s.action, RecoveryAction::RegenerateMesh { refinement: 0.8 });
    }

    #[test]
    fn mesh_failure_twice_composes() {
        let mut p = SolverParams::default();
        let c = class(ErrorKind::MeshConversionFailure);
        strategy_for(&c, 1, &p).clone().apply(&mut p);
        strategy_for(&c, 1, &p).clone().apply(&mut p);
        assert!((p.refinement - 0.64).abs() < 1e-15);
        let direct = strategy_for(&c, 2, &SolverParams::default());
        assert!(
            matches!(direct.action, RecoveryAction::RegenerateMesh { refinement } if (refinement - 0.64).abs() < 1e-15)
        );
    }

    #[test]
    fn boundary_errors_remap_patches() {
        let mut p = SolverParams::default();
        p.patch_types.insert("walls".into(), "patch".into());
        p.patch_types.insert("front".into(), "patch".into());
        strategy_for(&class(ErrorKind::BoundaryConditionError), 1, &p).apply(&mut p);
        assert_eq!(p.patch_types["walls"], "wall");
        assert_eq!(p.patch_types["front"], "empty");
        assert_eq!(p.patch_types["back"], "empty");
        assert_eq!(p.patch_types["inlet"], "patch");
    }

    #[test]
    fn unknown_and_resource_fall_back_to_default() {
        let p = SolverParams::default();
        for k in [ErrorKind::Unknown, ErrorKind::ResourceExhaustion] {
            let mut q = p.clone();
            let s = strategy_for(&class(k), 2, &p);
            assert_eq!(s.action, RecoveryAction::Default { cleanup: true });
            s.apply(&mut q);
            assert_eq!(q, p);
        }
    }

    #[test]
    fn strategies_stay_within_physical_bounds() {
        let kinds = [
            ErrorKind::MeshConversionFailure,
            ErrorKind::SolverDivergence,
            ErrorKind::BoundaryConditionError,
            ErrorKind::ResourceExhaustion,
            ErrorKind::Unknown,
        ];
        let mut p = SolverParams::default();
        for attempt in 1..=20 {
            for k in kinds {
                strategy_for(&class(k), attempt, &p).apply(&mut p);
                assert!(p.in_bounds(), "{k:?} attempt {attempt}: {p:?}");
            }
        }
    }
}
