//! The analytical model against explicit-chain and enumeration oracles, plus
//! fixed-point soundness and continuity.

use cbap_core::analytical::oracle::{chain_suite, delay_by_enumeration, explicit_macro, explicit_tx};
use cbap_core::analytical::{
    collision_system, delay, macro_chain, metrics, solve_point, transmission_chain, DtiConfig, EdcaParams,
    ModelInputs, ModelOptions, NtxForm,
};
use cbap_core::geometry::{BeamGeometry, GroupCounts};
use proptest::prelude::*;

#[test]
fn closed_form_chains_match_explicit_solves() {
    let checks = chain_suite(100, 0xc4a1).unwrap();
    assert_eq!(checks.len(), 100);
    for c in &checks {
        assert!(c.macro_error < 1e-10, "{c:?}");
        assert!(c.tx_error < 1e-10, "{c:?}");
        assert!(c.delay_error < 1e-9, "{c:?}");
    }
}

#[test]
fn fixed_point_is_sound_over_the_density_grid() {
    let params = EdcaParams::reference();
    let opts = ModelOptions::default();
    let geo = BeamGeometry::new(12, 8, 23.5).unwrap();
    for nu in [0.25, 0.5, 0.75, 1.0] {
        let dti = DtiConfig::reference(nu);
        for k in 0..=14 {
            let lambda = 0.005 + 0.005 * k as f64;
            let (sol, m, counts) = solve_point(lambda, &geo, &dti, &params, 0.0, &opts).unwrap();
            let inputs = ModelInputs { counts, dti, params, p_e: 0.0, ntx_form: opts.ntx_form };
            assert!(inputs.residual(sol.unknowns()) < 1e-10, "nu={nu} lambda={lambda}");
            for (name, v) in sol.probabilities() {
                assert!((0.0..=1.0).contains(&v), "{name}={v} at nu={nu} lambda={lambda}");
            }
            let pi_sum: f64 = sol.pi_states().iter().sum();
            assert!((pi_sum - 1.0).abs() < 1e-12);
            // Never above the always-transmitting bound.
            assert!(m.throughput_bps <= counts.n_total * params.payload_bits / sol.e_t_tx);
        }
    }
}

#[test]
fn throughput_is_continuous_in_fractional_counts() {
    let params = EdcaParams::reference();
    let dti = DtiConfig::reference(0.5);
    let opts = ModelOptions::default();
    let base = GroupCounts { n_i1: 3.0, n_i2: 2.7, n_i3: 1.0, n_i4: 6.0, n_total: 13.7 };
    let eval = |n_i2: f64| {
        let c = GroupCounts { n_i2, n_total: base.n_total - base.n_i2 + n_i2, ..base };
        let sol = collision_system(&c, &dti, &params, 0.0, &opts).unwrap();
        metrics(&sol, &c, &params, opts.throughput_form).unwrap()
    };
    let steps: Vec<f64> = (0..=40).map(|k| 2.0 + 0.025 * k as f64).collect();
    let values: Vec<_> = steps.iter().map(|&x| eval(x)).collect();
    // Second differences stay small relative to first differences: no jumps.
    let h = 0.025;
    for w in values.windows(2) {
        let ds = (w[1].throughput_bps - w[0].throughput_bps).abs() / w[0].throughput_bps;
        let dd = (w[1].delay_s - w[0].delay_s).abs() / w[0].delay_s;
        assert!(ds < 0.05 * h * 10.0 && dd < 0.05 * h * 10.0, "jump of {ds}/{dd} over one step");
    }
    for w in values.windows(3) {
        let d2 = (w[2].throughput_bps - 2.0 * w[1].throughput_bps + w[0].throughput_bps).abs();
        let d1 = (w[1].throughput_bps - w[0].throughput_bps).abs();
        assert!(d2 <= d1.max(1e-6 * w[1].throughput_bps));
    }
}

#[test]
fn full_hearing_has_no_hidden_collisions() {
    let params = EdcaParams::reference();
    let sol = collision_system(&GroupCounts::full_hearing(10), &DtiConfig::reference(1.0), &params, 0.0, &ModelOptions::default())
        .unwrap();
    assert_eq!(sol.q2, 0.0);
    assert_eq!(sol.q3, 0.0);
    assert_eq!(sol.p_c2, 0.0);
    assert!(sol.q1 > 0.0);
}

#[test]
fn printed_ntx_form_also_converges() {
    let params = EdcaParams::reference();
    let opts = ModelOptions { ntx_form: NtxForm::Printed, ..ModelOptions::default() };
    let geo = BeamGeometry::new(12, 8, 23.5).unwrap();
    let (sol, _, _) = solve_point(0.03, &geo, &DtiConfig::reference(0.5), &params, 0.0, &opts).unwrap();
    assert!(sol.converged && sol.residual < 1e-10);
}

proptest! {
    // The full chain with reference parameters has 2032 states; each dense solve takes a while.
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn macro_chain_matches_explicit_on_reference_params(p in 0.0f64..1.0, p_t in 0.0f64..0.9) {
        let params = EdcaParams::reference();
        let c = macro_chain(p, p_t, &params);
        let (b00, tau) = explicit_macro(p, p_t, &params);
        prop_assert!((c.b00 - b00).abs() < 1e-10);
        prop_assert!((c.tau - tau).abs() < 1e-10);
        prop_assert!(c.tau <= 1.0 && c.tau >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transmission_chain_matches_explicit(p_c1 in 0.0f64..=1.0, p_c2 in 0.0f64..=1.0, p_e in 0.0f64..=1.0) {
        let times = EdcaParams::reference().state_times();
        let c = transmission_chain(p_c1, p_c2, p_e, &times);
        let e = explicit_tx(p_c1, p_c2, p_e, &times);
        for j in 0..6 {
            prop_assert!((c.b[j] - e.b[j]).abs() < 1e-10);
            prop_assert!((c.pi[j] - e.pi[j]).abs() < 1e-10);
        }
    }

    #[test]
    fn lone_station_fails_only_through_channel_errors(p_e in 0.0f64..0.9, nu in 0.05f64..=1.0) {
        let params = EdcaParams::reference();
        let dti = DtiConfig::reference(nu);
        let sol = collision_system(&GroupCounts::lone(), &dti, &params, p_e, &ModelOptions::default()).unwrap();
        prop_assert_eq!(sol.p, p_e);
        if p_e == 0.0 {
            prop_assert_eq!(metrics(&sol, &GroupCounts::lone(), &params, Default::default()).unwrap().drop_rate, 0.0);
        }
    }

    #[test]
    fn random_groups_solve_soundly(
        n1 in 0.0f64..40.0, n2 in 0.0f64..40.0, n3 in 0.0f64..10.0, n4 in 0.0f64..80.0,
        nu in 0.1f64..=1.0, p_e in 0.0f64..0.3,
    ) {
        let params = EdcaParams::reference();
        let dti = DtiConfig::reference(nu);
        let counts = GroupCounts { n_i1: n1, n_i2: n2, n_i3: n3, n_i4: n4, n_total: n1 + n2 + n3 + n4 };
        let opts = ModelOptions::default();
        let sol = collision_system(&counts, &dti, &params, p_e, &opts).unwrap();
        let inputs = ModelInputs { counts, dti, params, p_e, ntx_form: opts.ntx_form };
        prop_assert!(inputs.residual(sol.unknowns()) < 1e-10);
        for (name, v) in sol.probabilities() {
            prop_assert!((0.0..=1.0).contains(&v), "{} = {}", name, v);
        }
        let d = delay(&sol, &params).unwrap();
        prop_assert!((d / delay_by_enumeration(&sol, &params, 10_000) - 1.0).abs() < 1e-9);
    }
}
