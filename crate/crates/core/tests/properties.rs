use std::f64::consts::PI;

use proptest::prelude::*;

use liouville_lab::config::ScenarioConfig;
use liouville_lab::conformal::{pullback_field, ConformalMap};
use liouville_lab::fields::{normalize_gauge, u_lambda_field, u_lambda_at};
use liouville_lab::levelset::level_stats;
use liouville_lab::mesh::{mesh_disk, mesh_mapped_disk, shared};
use liouville_lab::scenario::run_scenario;
use liouville_lab::ScalarField;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn pullback_keeps_the_mass_of_the_disk_metric(a in -0.3f64..0.3, big in any::<bool>()) {
        let lambda = if big { 8f64.sqrt() } else { 1.0 };
        let map = ConformalMap::polynomial(&[1.0, a]).unwrap();
        let mesh = shared(mesh_mapped_disk(&map, 0.05).unwrap());
        let w = pullback_field(&map, lambda, &mesh).unwrap();
        let exact = PI * lambda * lambda / (1.0 + lambda * lambda / 8.0);
        prop_assert!((w.total_mass() - exact).abs() / exact < 2e-3, "{} vs {exact}", w.total_mass());
    }

    #[test]
    fn scaled_rotation_pullback_is_a_rescaled_bubble(delta in 0.5f64..3.0, theta in 0.0f64..std::f64::consts::TAU) {
        let map = ConformalMap::scaled_rotation(delta, theta).unwrap();
        let mesh = shared(mesh_mapped_disk(&map, 0.1).unwrap());
        let w = pullback_field(&map, 2.0, &mesh).unwrap();
        for (p, v) in mesh.vertices().iter().zip(w.values()) {
            prop_assert!((v - u_lambda_at(2.0 / delta, *p)).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_keeps_level_statistics(c in -2.0f64..2.0, frac in 0.1f64..0.9) {
        let mesh = shared(mesh_disk(2.0, 0.1).unwrap());
        let w = u_lambda_field(1.5, mesh.clone()).unwrap();
        let wc = normalize_gauge(&w, c).unwrap();
        let probe = ScalarField::from_fn(mesh, |p| 4.0 - p.norm_sq()).unwrap();
        let probe_c = ScalarField::new(wc.mesh().clone(), probe.values().to_vec()).unwrap();
        let t = frac * probe.max();
        let (s, sc) = (level_stats(&probe, &w, None, t).unwrap(), level_stats(&probe_c, &wc, None, t).unwrap());
        prop_assert!((s.mass - sc.mass).abs() <= 1e-10 * s.mass);
        prop_assert!((s.ell - sc.ell).abs() <= 1e-10 * s.ell);
    }
}

#[test]
fn scenarios_are_deterministic_in_process() {
    for name in ["equality_disk", "appendix_audit_union", "rearrangement_chain"] {
        let cfg = ScenarioConfig { scenario: Some(name.into()), h: 0.1, ..Default::default() };
        let (a, b) = (run_scenario(&cfg).unwrap(), run_scenario(&cfg).unwrap());
        assert_eq!(a.checks_csv().as_str(), b.checks_csv().as_str());
        let tables = |r: &liouville_lab::scenario::ScenarioReport| {
            r.tables.iter().map(|(n, c)| format!("{n}\n{}", c.as_str())).collect::<Vec<_>>()
        };
        assert_eq!(tables(&a), tables(&b));
    }
}
