//! Optimization agent: GP surrogates of stress and mass, constrained EI search
//! over the continuous structural parameters, and Pareto extraction.

mod gp;
mod normal;
mod pareto;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StructConfig;
use crate::structures::{SweepBounds, SweepTable};

pub use gp::{
    log_marginal_likelihood, r_squared, rbf, train, GpConfig, GpModel, Hyperparameters,
    InputScaling, ValidationReport, INITIAL_JITTER, LENGTH_SCALE_BOUNDS, MIN_TRAINING_SAMPLES,
};
pub use normal::{constrained_ei, erfc, expected_improvement, normal_cdf, normal_pdf};
pub use pareto::{dominates, pareto_front};

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("need at least {MIN_TRAINING_SAMPLES} samples, got {0}")]
    TooFewSamples(usize),
    #[error("kernel matrix not positive definite after jitter escalation")]
    NotPositiveDefinite,
    #[error("bad training data: {0}")]
    Shape(String),
    #[error("hyperparameter fit failed: {0}")]
    Fit(String),
    #[error("sweep table has no results")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignSource {
    Sweep,
    Bayesian,
}

impl DesignSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DesignSource::Sweep => "sweep",
            DesignSource::Bayesian => "bayesian",
        }
    }
}

/// One verified (stress MPa, mass g) evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub config: StructConfig,
    pub stress: f64,
    pub mass: f64,
    pub source: DesignSource,
}

/// Full design vector (spar width, rib, shell, spars, ribs).
pub fn design_vector(c: &StructConfig) -> Vec<f64> {
    vec![
        c.spar_width,
        c.rib_thickness,
        c.shell_thickness,
        f64::from(c.n_spars),
        f64::from(c.n_ribs),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoConfig {
    /// Proposals per (n_spars, n_ribs) combination.
    pub budget: usize,
    /// Random candidates scored per proposal.
    pub candidates: usize,
    pub seed: u64,
    pub gp: GpConfig,
    /// Mass ceiling (g); the mean sweep mass when absent.
    pub mass_cap: Option<f64>,
    /// Augmentation weight of the Chebyshev scalarization.
    pub rho: f64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            budget: 12,
            candidates: 2048,
            seed: 42,
            gp: GpConfig::default(),
            mass_cap: None,
            rho: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: Design,
    pub best_discrete: Design,
    /// (best discrete − best found) / best discrete stress.
    pub improvement: f64,
    pub mass_cap: f64,
    pub evaluated: Vec<Design>,
    pub pareto: Vec<Design>,
    pub stress_report: ValidationReport,
    pub mass_report: ValidationReport,
    pub proposals: usize,
}

fn feasible_best(designs: &[Design], cap: f64) -> Option<Design> {
    designs
        .iter()
        .filter(|d| d.mass <= cap)
        .min_by(|a, b| {
            a.stress
                .total_cmp(&b.stress)
                .then(a.mass.total_cmp(&b.mass))
        })
        .copied()
}

/// Trains validation surrogates on the sweep, then runs one constrained-EI
/// loop per integer combination and merges everything into a Pareto set.
/// `evaluate` returns the verified (stress, mass) of a proposal.
pub fn optimize<F>(
    table: &SweepTable,
    bounds: &SweepBounds,
    config: &BoConfig,
    mut evaluate: F,
) -> Result<OptimizationResult, OptimizerError>
where
    F: FnMut(&StructConfig) -> Option<(f64, f64)>,
{
    if table.results.is_empty() {
        return Err(OptimizerError::EmptySweep);
    }
    let sweep: Vec<Design> = table
        .results
        .iter()
        .map(|r| Design {
            config: r.config,
            stress: r.max_stress(),
            mass: r.mass,
            source: DesignSource::Sweep,
        })
        .collect();
    let cap = config
        .mass_cap
        .unwrap_or_else(|| sweep.iter().map(|d| d.mass).sum::<f64>() / sweep.len() as f64);

    let xs: Vec<Vec<f64>> = sweep.iter().map(|d| design_vector(&d.config)).collect();
    let stress: Vec<f64> = sweep.iter().map(|d| d.stress).collect();
    let mass: Vec<f64> = sweep.iter().map(|d| d.mass).collect();
    let (_, stress_report) = train(&xs, &stress, config.seed, &config.gp)?;
    let (_, mass_report) = train(&xs, &mass, config.seed, &config.gp)?;

    let best_discrete = feasible_best(&sweep, cap)
        .or_else(|| {
            sweep
                .iter()
                .min_by(|a, b| a.mass.total_cmp(&b.mass))
                .copied()
        })
        .ok_or(OptimizerError::EmptySweep)?;

    let continuous = InputScaling {
        lower: vec![
            bounds.spar_width.min,
            bounds.rib_thickness.min,
            bounds.shell_thickness.min,
        ],
        upper: vec![
            bounds.spar_width.max,
            bounds.rib_thickness.max,
            bounds.shell_thickness.max,
        ],
    };
    let combos: BTreeSet<(u32, u32)> = sweep
        .iter()
        .map(|d| (d.config.n_spars, d.config.n_ribs))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut evaluated = sweep.clone();
    let mut proposals = 0;

    for (ns, nr) in combos {
        let mut local: Vec<Design> = sweep
            .iter()
            .filter(|d| d.config.n_spars == ns && d.config.n_ribs == nr)
            .copied()
            .collect();
        if config.budget == 0 || local.len() < MIN_TRAINING_SAMPLES {
            continue;
        }
        let x_of = |d: &Design| {
            vec![
                d.config.spar_width,
                d.config.rib_thickness,
                d.config.shell_thickness,
            ]
        };
        let local_x: Vec<Vec<f64>> = local.iter().map(x_of).collect();
        let local_m: Vec<f64> = local.iter().map(|d| d.mass).collect();
        let mass_gp = GpModel::fit(&local_x, &local_m, Some(continuous.clone()), &config.gp)?;
        let scal_hyper = GpModel::fit(
            &local_x,
            &scalarize(&local, 0.5, config.rho),
            Some(continuous.clone()),
            &config.gp,
        )?
        .hyper;
        let mut mass_gp = mass_gp;

        for _ in 0..config.budget {
            let lambda: f64 = rng.gen();
            let g = scalarize(&local, lambda, config.rho);
            let xs: Vec<Vec<f64>> = local.iter().map(x_of).collect();
            let gp = GpModel::with_hyperparameters(&xs, &g, Some(continuous.clone()), scal_hyper)?;
            let f_best = local
                .iter()
                .zip(&g)
                .filter(|(d, _)| d.mass <= cap)
                .map(|(_, v)| *v)
                .fold(f64::INFINITY, f64::min);
            let f_best = if f_best.is_finite() {
                f_best
            } else {
                g.iter().copied().fold(f64::INFINITY, f64::min)
            };
            let mut best_z = vec![0.5; 3];
            let mut best_a = f64::NEG_INFINITY;
            for _ in 0..config.candidates.max(1) {
                let z: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
                let (mu, sigma) = gp.predict_normalized(&z);
                let (m_mu, m_sigma) = mass_gp.predict_normalized(&z);
                let a = constrained_ei(mu, sigma, f_best, m_mu, m_sigma, cap);
                if a > best_a {
                    best_a = a;
                    best_z = z;
                }
            }
            let raw: Vec<f64> = best_z
                .iter()
                .enumerate()
                .map(|(j, z)| continuous.lower[j] + z * (continuous.upper[j] - continuous.lower[j]))
                .collect();
            let cfg = StructConfig {
                spar_width: raw[0],
                rib_thickness: raw[1],
                shell_thickness: raw[2],
                n_spars: ns,
                n_ribs: nr,
            };
            proposals += 1;
            if let Some((s, m)) = evaluate(&cfg) {
                let d = Design {
                    config: cfg,
                    stress: s,
                    mass: m,
                    source: DesignSource::Bayesian,
                };
                local.push(d);
                evaluated.push(d);
                let xs: Vec<Vec<f64>> = local.iter().map(x_of).collect();
                let ms: Vec<f64> = local.iter().map(|d| d.mass).collect();
                mass_gp = GpModel::with_hyperparameters(
                    &xs,
                    &ms,
                    Some(continuous.clone()),
                    mass_gp.hyper,
                )?;
            }
        }
    }

    let best = feasible_best(&evaluated, cap)
        .filter(|d| d.stress < best_discrete.stress)
        .unwrap_or(best_discrete);
    let improvement = ((best_discrete.stress - best.stress) / best_discrete.stress).max(0.0);
    let points: Vec<(f64, f64)> = evaluated.iter().map(|d| (d.stress, d.mass)).collect();
    let pareto = pareto_front(&points)
        .into_iter()
        .map(|i| evaluated[i])
        .collect();
    Ok(OptimizationResult {
        best,
        best_discrete,
        improvement,
        mass_cap: cap,
        evaluated,
        pareto,
        stress_report,
        mass_report,
        proposals,
    })
}

/// Augmented Chebyshev scalarization of (stress, mass) normalized over `designs`.
fn scalarize(designs: &[Design], lambda: f64, rho: f64) -> Vec<f64> {
    let range = |f: fn(&Design) -> f64| {
        let lo = designs.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = designs.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let (s0, sr) = range(|d| d.stress);
    let (m0, mr) = range(|d| d.mass);
    designs
        .iter()
        .map(|d| {
            let a = lambda * (d.stress - s0) / sr;
            let b = (1.0 - lambda) * (d.mass - m0) / mr;
            a.max(b) + rho * (a + b)
        })
        .collect()
}

fn config_cells(c: &StructConfig) -> String {
    format!(
        "{:.4},{:.4},{:.4},{},{}",
        c.spar_width, c.rib_thickness, c.shell_thickness, c.n_spars, c.n_ribs
    )
}

pub fn pareto_csv(result: &OptimizationResult) -> String {
    let mut s = String::from("spar_width_mm,rib_thickness_mm,shell_thickness_mm,n_spars,n_ribs,stress_mpa,mass_g,source\n");
    for d in &result.pareto {
        let _ = writeln!(
            s,
            "{},{:.4},{:.4},{}",
            config_cells(&d.config),
            d.stress,
            d.mass,
            d.source.as_str()
        );
    }
    s
}

pub fn validation_csv(report: &ValidationReport) -> String {
    let mut s = String::from("actual,predicted,sigma\n");
    for (a, p, sd) in &report.predictions {
        let _ = writeln!(s, "{a:.6},{p:.6},{sd:.6}");
    }
    s
}

pub fn optimization_report(result: &OptimizationResult) -> String {
    let d = |x: &Design| {
        format!(
            "spar width {:.3} mm, rib {:.3} mm, shell {:.3} mm, {} spars, {} ribs: {:.2} MPa at {:.2} g ({})",
            x.config.spar_width,
            x.config.rib_thickness,
            x.config.shell_thickness,
            x.config.n_spars,
            x.config.n_ribs,
            x.stress,
            x.mass,
            x.source.as_str()
        )
    };
    let mut s = String::from("# Optimization report\n\n## Surrogates\n\n| model | train | test | R² | RMSE |\n|---|---|---|---|---|\n");
    for (name, r) in [
        ("stress (MPa)", &result.stress_report),
        ("mass (g)", &result.mass_report),
    ] {
        let _ = writeln!(
            s,
            "| {name} | {} | {} | {:.4} | {:.4} |",
            r.n_train, r.n_test, r.r2, r.rmse
        );
    }
    let _ = write!(
        s,
        "\n## Search\n\n- mass cap: {:.2} g\n- proposals: {}\n- evaluated designs: {}\n\n## Result\n\n- best discrete: {}\n- optimum: {}\n- stress improvement: {:.2}%\n\n## Pareto set ({} designs)\n\n| stress (MPa) | mass (g) | source |\n|---|---|---|\n",
        result.mass_cap,
        result.proposals,
        result.evaluated.len(),
        d(&result.best_discrete),
        d(&result.best),
        100.0 * result.improvement,
        result.pareto.len()
    );
    for p in &result.pareto {
        let _ = writeln!(
            s,
            "| {:.2} | {:.2} | {} |",
            p.stress,
            p.mass,
            p.source.as_str()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::StructResult;
    use crate::structures::sweep;

    /// Analytic stand-in: stress falls with material, mass rises with it.
    fn toy(c: &StructConfig) -> (f64, f64) {
        let material = c.spar_width * f64::from(c.n_spars)
            + c.rib_thickness * f64::from(c.n_ribs) * 0.5
            + 2.0 * c.shell_thickness;
        (1000.0 / material, 20.0 * material)
    }

    fn table() -> SweepTable {
        let results = sweep(&SweepBounds::default())
            .into_iter()
            .map(|c| {
                let (s, m) = toy(&c);
                StructResult {
                    config: c,
                    max_von_mises: vec![s],
                    max_displacement: vec![1.0],
                    mass: m,
                    safety_factor: 2.0,
                }
            })
            .collect();
        SweepTable {
            load_cases: vec!["cruise".into()],
            results,
            failures: vec![],
        }
    }

    #[test]
    fn zero_budget_returns_best_discrete() {
        let cfg = BoConfig {
            budget: 0,
            ..Default::default()
        };
        let r = optimize(&table(), &SweepBounds::default(), &cfg, |c| Some(toy(c))).unwrap();
        assert_eq!(r.best, r.best_discrete);
        assert_eq!(r.improvement, 0.0);
        assert_eq!(r.proposals, 0);
    }

    #[test]
    fn search_never_worsens_and_front_is_exact() {
        let cfg = BoConfig {
            budget: 4,
            candidates: 256,
            ..Default::default()
        };
        let r = optimize(&table(), &SweepBounds::default(), &cfg, |c| Some(toy(c))).unwrap();
        assert!(r.best.stress <= r.best_discrete.stress);
        assert!(r.improvement >= 0.0);
        assert!(r.best.mass <= r.mass_cap);
        assert_eq!(r.proposals, 16);
        for p in &r.pareto {
            assert!(!r
                .evaluated
                .iter()
                .any(|e| dominates((e.stress, e.mass), (p.stress, p.mass))));
        }
        assert!(r.mass_report.r2 > 0.99);
        assert!(optimization_report(&r).contains("Pareto set"));
    }
}
