use proptest::prelude::*;

use aeroforge::aero::{run_desk_solver, DeskSolverConfig};
use aeroforge::geometry::{self, AirfoilSpec};
use aeroforge::model::{CaseConfig, FlowResult};

const AIRFOILS: [&str; 4] = ["NACA0012", "NACA0015", "NACA2412", "NACA4412"];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn desk_flow_stays_physical(i in 0usize..4, u in 15.0f64..40.0, aoa in 0.0f64..6.0) {
        let spec = AirfoilSpec::parse(AIRFOILS[i]).unwrap();
        let case = CaseConfig::new(AIRFOILS[i], 0.1, u, aoa, 8.57e-6);
        let f = run_desk_solver(&case, &spec, &DeskSolverConfig::default()).flow;
        prop_assert!((1.2..=2.5).contains(&f.shape_factor), "H = {}", f.shape_factor);
        prop_assert!(f.cd > 0.0 && f.delta_star > f.theta && f.theta > 0.0);
        prop_assert!(f.lift_to_drag >= 0.0);
        prop_assert!(f.converged);
    }

    #[test]
    fn lift_to_drag_is_derived(cl in -0.5f64..1.5, cd in 1e-3f64..0.1) {
        let f = FlowResult::from_coefficients(cl, cd, 0.0, 2e-3, 1.4e-3, true, 10);
        prop_assert!((f.lift_to_drag - cl / cd).abs() <= 1e-9 * (cl / cd).abs().max(1.0));
        prop_assert!((f.shape_factor - 2e-3 / 1.4e-3).abs() < 1e-12);
    }

    #[test]
    fn generated_surfaces_bracket_the_camber_line(m in 1u32..8, p in 2u32..7, t in 8u32..25) {
        let name = format!("NACA{m}{p}{t:02}");
        let spec = AirfoilSpec::parse(&name).unwrap();
        let c = geometry::generate(&spec, 201).unwrap();
        for (u, l) in c.upper.iter().zip(&c.lower) {
            let mid = [(u[0] + l[0]) / 2.0, (u[1] + l[1]) / 2.0];
            let (yc, _) = geometry::camber(mid[0], spec.m, spec.p).unwrap();
            prop_assert!(u[1] >= l[1] - 1e-12);
            prop_assert!((mid[1] - yc).abs() < 0.02, "{name}: midpoint {mid:?} vs camber {yc}");
        }
    }
}
