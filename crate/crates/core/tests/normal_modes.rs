use approx::assert_relative_eq;
use dpo_core::normal_modes::*;
use dpo_core::semiclassical::DpoModel;
use dpo_core::Error;
use proptest::prelude::*;

fn base() -> PhysicalParams {
    PhysicalParams {
        g0: 1.0,
        coupling: 1e3,
        delta: 0.0,
        omega_m1: 2e4,
        omega_m2: 1e4,
        kappa: 100.0,
        gamma1: 1e-4,
        gamma2: 1e-4,
        bath: Bath::Occupations { n_b1: 0.0, n_b2: 0.0 },
    }
}

/// Lower eigenvector of `[[wm2 + delta, G], [G, wm2]]` via the mixing angle
/// `tan 2 theta = 2 G / delta`: photon/phonon weight ratio `tan theta`.
fn ratio_from_mixing_angle(g: f64, delta: f64) -> f64 {
    (0.5 * (2.0 * g).atan2(delta)).tan()
}

fn arb_params() -> impl Strategy<Value = PhysicalParams> {
    (
        0.01f64..5.0,
        200.0f64..2e3,
        -2e3f64..2e3,
        1e-5f64..1e-2,
        1e-5f64..1.0,
        0.0f64..50.0,
    )
        .prop_map(|(g0, coupling, delta, gamma1, gamma2, nb)| PhysicalParams {
            g0,
            coupling,
            delta,
            omega_m1: 2e4,
            omega_m2: 1e4,
            kappa: 100.0,
            gamma1,
            gamma2,
            bath: Bath::Occupations { n_b1: nb, n_b2: nb },
        })
}

proptest! {
    #[test]
    fn decay_sum_rule(p in arb_params()) {
        let d = derive_normal_modes(&p).unwrap();
        let lhs = d.kappa_plus + d.kappa_minus;
        prop_assert!((lhs - (p.kappa + p.gamma2)).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn ratio_matches_mixing_angle(g in 1.0f64..1e4, delta in -1e4f64..1e4) {
        let r = hybridization_ratio(g, delta);
        let oracle = ratio_from_mixing_angle(g, delta);
        prop_assert!((r - oracle).abs() <= 1e-10 * oracle.max(1.0), "{r} vs {oracle}");
    }

    #[test]
    fn normal_mode_frequencies_are_eigenvalues(p in arb_params()) {
        let d = derive_normal_modes(&p).unwrap();
        let (a, b, c) = (p.omega_m2 + p.delta, p.coupling, p.omega_m2);
        for w in [d.omega_plus0, d.omega_minus0] {
            // characteristic polynomial of the 2x2 coupling matrix
            let det = (a - w) * (c - w) - b * b;
            prop_assert!(det.abs() < 1e-9 * a * c);
        }
    }

    #[test]
    fn cooling_never_heats(p in arb_params()) {
        let d = derive_normal_modes(&p).unwrap();
        for model in [CoolingModel::Dpo, CoolingModel::Ndpo] {
            let c = cooling_prediction(&d, &p, model);
            prop_assert!(c.gamma1_eff >= p.gamma1);
            prop_assert!(c.nth1_eff <= d.nth_1 + 1e-15);
        }
    }

    #[test]
    fn occupations_non_negative(p in arb_params()) {
        let d = derive_normal_modes(&p).unwrap();
        prop_assert!(d.nth_plus >= 0.0 && d.nth_minus >= 0.0);
        prop_assert!(d.q_plus >= 0.0 && d.q_minus >= 0.0);
    }
}

#[test]
fn resonant_closed_forms() {
    let p = base();
    let d = derive_normal_modes(&p).unwrap();
    assert_eq!(d.r, 1.0);
    assert_eq!(d.p, 0.0);
    assert_eq!(d.gtilde_cross, 0.0);
    assert_relative_eq!(d.omega_plus0, p.omega_m2 + p.coupling, max_relative = 1e-15);
    assert_relative_eq!(d.omega_minus0, p.omega_m2 - p.coupling, max_relative = 1e-15);
    assert_relative_eq!(d.gtilde_minus, p.g0 * p.coupling / (4.0 * p.omega_m2), max_relative = 1e-14);
    assert_relative_eq!(d.gtilde_plus, -d.gtilde_minus, max_relative = 1e-14);
}

#[test]
fn resonant_shortcut_to_first_order() {
    // the shortcut drops gamma2 from kappa_-; the mismatch is gamma2 / kappa
    for gamma2 in [1e-4, 1e-2, 1.0] {
        let p = PhysicalParams { gamma2, ..base() };
        let d = derive_normal_modes(&p).unwrap();
        let rel = d.c_minus / c_minus_resonant_shortcut(&p) - 1.0;
        assert_relative_eq!(rel, -gamma2 / p.kappa, max_relative = 2.0 * gamma2 / p.kappa);
    }
}

#[test]
fn temperature_and_direct_occupations() {
    let omega = 1e4;
    let t = omega * HBAR_OVER_KB / std::f64::consts::LN_2;
    assert_relative_eq!(planck_occupation(omega, t).unwrap(), 1.0, max_relative = 1e-12);
    assert!(matches!(planck_occupation(0.0, 1.0), Err(Error::Domain(_))));
    assert!(matches!(planck_occupation(1.0, -1.0), Err(Error::Domain(_))));
    let p = PhysicalParams { bath: Bath::Temperature(0.0), ..base() };
    let d = derive_normal_modes(&p).unwrap();
    assert_eq!(d.nth_1, 0.0);
}

#[test]
fn cooling_worked_values() {
    let (g_eff, n_eff) = dpo_cooling(1.0, 5.0, 0.0, 1.0);
    assert_relative_eq!(g_eff, 6.0);
    assert_relative_eq!(n_eff, 1.0 / 6.0, max_relative = 1e-15);
    let (g_eff, _) = dpo_cooling(1.0, 10.0, 0.05, 1.0);
    assert_relative_eq!(g_eff, 12.0, max_relative = 1e-14);
}

#[test]
fn validity_report() {
    let p = base();
    let d = derive_normal_modes(&p).unwrap();
    let report = check_validity(&p, &d, DEFAULT_MARGIN);
    for name in ["hierarchy_kappa_coupling", "hierarchy_coupling_omega_m2"] {
        assert!(report.get(name).unwrap().passed, "{name}");
    }
    let weak = PhysicalParams { coupling: p.kappa, ..base() };
    let d = derive_normal_modes(&weak).unwrap();
    let report = check_validity(&weak, &d, DEFAULT_MARGIN);
    let c = report.get("strong_coupling").unwrap();
    assert!(!c.passed);
    assert_relative_eq!(c.measured, 1.0);
    assert!(report.checks.iter().all(|c| !c.inequality.is_empty()));
}

#[test]
fn dpo_model_from_probe() {
    let p = base();
    let d = derive_normal_modes(&p).unwrap();
    let m = build_dpo_model(&p, &d, Probe { delta_p: 0.0, omega_p: 2.0 }).unwrap();
    // r = 1, q_- and p vanish at leading order
    assert_relative_eq!(m.omega_minus, 2.0 / 2f64.sqrt(), max_relative = 2e-3);
    assert_relative_eq!(m.alpha0, 2.0 * m.omega_minus / m.kappa_minus, max_relative = 1e-12);
    let idle = build_dpo_model(&p, &d, Probe { delta_p: 0.0, omega_p: 0.0 }).unwrap();
    assert_eq!(idle.alpha0, 0.0);
    assert_eq!(idle.omega_tilde, 0.0);
    let decoupled = PhysicalParams { coupling: 0.0, ..base() };
    let d = derive_normal_modes(&decoupled).unwrap();
    assert!(matches!(
        build_dpo_model(&decoupled, &d, Probe { delta_p: 0.0, omega_p: 1.0 }),
        Err(Error::DegenerateModel(_))
    ));
}

#[test]
fn figure_eight_configuration() {
    let m = DpoModel::from_critical(
        1.0,
        4.0,
        15.6,
        0.01,
        1.0,
        0.0,
        dpo_core::semiclassical::Drive::Alpha0(3.6),
    )
    .unwrap();
    assert_relative_eq!(m.beta_crit, 4.0, max_relative = 1e-14);
    assert_relative_eq!(m.c_minus, 15.6, max_relative = 1e-14);
}
