use proptest::prelude::*;
use vortex_core::exact::{fd_gradient, fd_gradient_table, solve_derivatives, solve_fixation};
use vortex_core::perturbation::{
    compute_tables, probe_reconstruction_residual, v_prime_value, v_value, PerturbationOptions,
    PerturbationTables, TableMethod,
};
use vortex_core::{DemographicParams, PopulationState, StateClass};

fn small_b_tables(n_max: u32) -> PerturbationTables {
    let p = DemographicParams::neutral(0.02, 1.0, 1.0).unwrap();
    compute_tables(&p, n_max, &PerturbationOptions::default()).unwrap()
}

#[test]
fn maximum_principle_and_residual() {
    for (b, d, c, dl, dp) in [
        (2.0, 1.0, 0.5, 0.1, 0.3),
        (0.5, 0.2, 1.0, 0.5, 1.0),
        (3.0, 0.0, 0.3, 0.0, 0.05),
    ] {
        let p = DemographicParams::new(b, d, c, dl, dp).unwrap();
        let t = solve_fixation(&p, 50).unwrap();
        assert!(t.u.iter().all(|u| (0.0..=1.0).contains(u)));
        assert!(t.residual <= 1e-12, "residual {}", t.residual);
    }
}

#[test]
fn truncation_doubling_within_estimate() {
    let p = DemographicParams::new(2.0, 1.0, 0.5, 0.05, 0.1).unwrap();
    let coarse = solve_fixation(&p, 40).unwrap();
    let fine = solve_fixation(&p, 80).unwrap();
    let worst = coarse
        .lattice
        .states()
        .filter(|s| s.size() <= 20)
        .map(|s| (coarse.value(&s).unwrap() - fine.value(&s).unwrap()).abs())
        .fold(0.0, f64::max);
    assert!(
        worst < coarse.truncation_error_estimate,
        "{worst} vs {}",
        coarse.truncation_error_estimate
    );
}

#[test]
fn richardson_step_halving() {
    let p = DemographicParams::neutral(0.5, 1.0, 1.0).unwrap();
    let s = PopulationState::new(3, 2, 1).unwrap();
    let g = |h: f64| fd_gradient(&p, &s, h, 30).unwrap();
    let (a, b, c) = (g(4e-2), g(2e-2), g(1e-2));
    let (e1, e2) = ((a.0 - b.0).abs(), (b.0 - c.0).abs());
    assert!(e2 < 1e-5 && e1 / e2 > 3.0, "{e1} {e2}");
    let (e1, e2) = ((a.1 - b.1).abs(), (b.1 - c.1).abs());
    assert!(e2 < 1e-5 && e1 / e2 > 3.0, "{e1} {e2}");
}

#[test]
fn derivative_solves_match_differences() {
    let p = DemographicParams::neutral(0.5, 1.0, 1.0).unwrap();
    let direct = solve_derivatives(&p, 30).unwrap();
    let fd = fd_gradient_table(&p, 1e-3, 30).unwrap();
    for (i, _) in direct.lattice.states().enumerate() {
        assert!((direct.v[i] - fd.v[i]).abs() < 1e-6);
        assert!((direct.vprime[i] - fd.vprime[i]).abs() < 1e-6);
    }
}

#[test]
fn recurrence_agrees_with_dirichlet_extraction() {
    let p = DemographicParams::neutral(0.02, 1.0, 1.0).unwrap();
    let rec = compute_tables(
        &p,
        30,
        &PerturbationOptions {
            method: TableMethod::Recurrence,
            ..Default::default()
        },
    )
    .unwrap();
    let dir = compute_tables(
        &p,
        30,
        &PerturbationOptions {
            method: TableMethod::Dirichlet,
            ..Default::default()
        },
    )
    .unwrap();
    for n in 2..=30 {
        let (a, b) = (rec.z(n).unwrap(), dir.z(n).unwrap());
        let (ap, bp) = (rec.z_prime(n).unwrap(), dir.z_prime(n).unwrap());
        for (x, y) in [(a.0, b.0), (a.1, b.1), (ap.0, bp.0), (ap.1, bp.1)] {
            assert!(
                (x - y).abs() <= 1e-8 * (1.0 + y.abs()),
                "N = {n}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn probe_reconstruction() {
    let t = small_b_tables(40);
    assert!(probe_reconstruction_residual(&t, 40).unwrap() <= 1e-10);
}

fn interior_state(max: u32) -> impl Strategy<Value = PopulationState> {
    (0..max, 0..max, 0..max)
        .prop_filter("N >= 2", |(k, m, n)| k + m + n >= 2)
        .prop_map(|(k, m, n)| PopulationState::new(k, m, n).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn v_antisymmetric_and_signed(s in interior_state(14)) {
        let t = small_b_tables(40);
        let v = v_value(&s, &t).unwrap();
        let mirrored = v_value(&s.mirrored(), &t).unwrap();
        prop_assert!((v + mirrored).abs() <= 1e-15 * (1.0 + v.abs()));
        let vp = v_prime_value(&s, &t).unwrap();
        match s.class() {
            StateClass::Interior => {
                prop_assert_eq!(v.partial_cmp(&0.0), s.k().partial_cmp(&s.n()));
                prop_assert!(vp > 0.0);
            }
            _ => {
                prop_assert_eq!(v, 0.0);
                prop_assert_eq!(vp, 0.0);
            }
        }
    }

    #[test]
    fn deleterious_mutant_fixes_less_often(
        b in 0.2f64..3.0, d in 0.0f64..2.0, c in 0.2f64..2.0,
        dl in 0.0f64..0.3, extra in 0.01f64..0.3, s in interior_state(6),
    ) {
        prop_assume!(s.class() == StateClass::Interior);
        let p = DemographicParams::new(b, d, c, dl, dl + extra).unwrap();
        let t = solve_fixation(&p, 24).unwrap();
        let u = t.value(&s).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        prop_assert!(u < vortex_core::exact::neutral_fixation(&s));
    }
}

#[test]
fn extraction_outside_small_b_regime() {
    let p = DemographicParams::neutral(2.0, 1.0, 0.5).unwrap();
    let opts = |method| PerturbationOptions {
        method,
        ..Default::default()
    };
    let rec = compute_tables(&p, 15, &opts(TableMethod::Recurrence)).unwrap();
    let dir = compute_tables(&p, 15, &opts(TableMethod::Dirichlet)).unwrap();
    for n in 2..=15 {
        let (a, b) = (rec.z_prime(n).unwrap(), dir.z_prime(n).unwrap());
        assert!(
            (a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9,
            "N = {n}"
        );
    }
}
