//! Simulator invariants and its ties to the geometry and analytical modules.

use cbap_core::analytical::{lone_station_throughput, DtiConfig, EdcaParams};
use cbap_core::geometry::oracle::mutual_beam;
use cbap_core::geometry::{region_areas, BeamGeometry};
use cbap_core::simulator::{
    derive_seed, place_stations, replicate, run, SimConfig, Topology, TopologySource,
};
use proptest::prelude::*;

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn station_count_is_poisson() {
    let geo = BeamGeometry::new(12, 8, 23.5).unwrap();
    let lambda = 0.02;
    let counts: Vec<f64> = (0..10_000).map(|k| place_stations(lambda, &geo, derive_seed(1, k)).len() as f64).collect();
    let (mean, se) = mean_and_se(&counts);
    let expected = lambda * geo.disk_area();
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean} vs {expected} (se {se})");
}

#[test]
fn hearer_counts_match_region_areas() {
    let geo = BeamGeometry::new(4, 3, 20.0).unwrap();
    let lambda = 0.03;
    let areas = region_areas(&geo).unwrap();
    assert!(areas.r3 > 0.0, "configuration should exercise all four groups");
    let mut samples: [Vec<f64>; 4] = Default::default();
    for k in 0..3000 {
        let topo = place_stations(lambda, &geo, derive_seed(2, k));
        if topo.is_empty() {
            continue;
        }
        for (g, c) in topo.group_counts_of(0).iter().enumerate() {
            samples[g].push(*c as f64);
        }
    }
    // Given N ≥ 1 stations, station 0 and the other N − 1 are i.i.d. uniform,
    // so group ℓ holds E[N − 1 | N ≥ 1]·r_ℓ/(πR²) stations on average; for
    // large λπR² this is λ·r_ℓ minus one station's share.
    let mu = lambda * geo.disk_area();
    let present = 1.0 - (-mu).exp();
    let others = (mu - present) / present;
    for (g, r) in areas.as_array().iter().enumerate() {
        let (mean, se) = mean_and_se(&samples[g]);
        let expected = others * r / geo.disk_area();
        assert!((mean - expected).abs() <= 3.0 * se, "group {}: {mean} vs {expected} (se {se})", g + 1);
        assert!((expected / (lambda * r) - 1.0).abs() < 1.0 / mu + 1e-9);
    }
}

#[test]
fn uplink_matrix_matches_first_principles_beams() {
    let geo = BeamGeometry::new(8, 5, 20.0).unwrap();
    let topo = place_stations(0.05, &geo, 77);
    assert!(topo.len() > 30);
    let xy: Vec<(f64, f64)> = topo.stations.iter().map(|s| (s.radius * s.angle.cos(), s.radius * s.angle.sin())).collect();
    for i in 0..topo.len() {
        for j in 0..topo.len() {
            if i != j {
                assert_eq!(topo.hears_uplink(i, j), mutual_beam(xy[i], xy[j], geo.theta_s), "{i} {j}");
            }
        }
    }
}

#[test]
fn lone_station_matches_renewal_throughput() {
    let params = EdcaParams::reference();
    let topo = Topology::full_hearing(1, 0);
    for nu in [0.25, 0.5, 0.75, 1.0] {
        let dti = DtiConfig::reference(nu);
        let cfg = SimConfig::new(params, dti, 0.0);
        let sim = replicate(TopologySource::Fixed(&topo), &cfg, 4, 3);
        let reference = lone_station_throughput(&params, &dti);
        let err = (sim.throughput_bps.mean / reference - 1.0).abs();
        assert!(err < 0.02, "nu={nu}: {} vs {reference}", sim.throughput_bps.mean);
        assert!(sim.runs.iter().all(|m| m.drop_count == 0 && m.collision_count == 0));
    }
}

#[test]
fn half_width_shrinks_like_inverse_root_n() {
    let geo = BeamGeometry::new(12, 8, 23.5).unwrap();
    let cfg = SimConfig { n_bis: 3, warmup_bis: 1, ..SimConfig::new(EdcaParams::reference(), DtiConfig::reference(0.5), 0.0) };
    let src = TopologySource::Poisson { lambda: 0.01, geo: &geo };
    let hw: Vec<f64> = [4usize, 16, 64].iter().map(|&n| replicate(src, &cfg, n, 2024).throughput_bps.half_width).collect();
    for w in hw.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2.0 - 1.0).abs() <= 0.3, "half-width ratio {ratio} (expected 2): {hw:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn runs_conserve_and_respect_bounds(
        lambda in 0.0f64..0.06, nu in 0.1f64..=1.0, p_e in 0.0f64..0.3,
        n_ap in 2u32..24, n_s in 2u32..16, seed in any::<u64>(),
    ) {
        let geo = BeamGeometry::new(n_ap, n_s, 23.5).unwrap();
        let topo = place_stations(lambda, &geo, seed);
        let cfg = SimConfig { n_bis: 3, warmup_bis: 1, ..SimConfig::new(EdcaParams::reference(), DtiConfig::reference(nu), p_e) };
        let m = run(&topo, &cfg, seed ^ 1);
        prop_assert_eq!(m.tx_attempts, m.success_count + m.collision_count + m.error_count);
        prop_assert_eq!(m.out_of_cbap_attempts, 0);
        prop_assert!(m.delivered_bits <= m.tx_attempts as f64 * cfg.params.payload_bits);
        if m.success_count > 0 {
            prop_assert!(m.min_delay >= cfg.params.t_success());
        }
        if topo.len() <= 1 && p_e == 0.0 {
            prop_assert_eq!(m.drop_count, 0);
        }
        // Cannot deliver faster than back-to-back exchanges in CBAP time.
        let cap = cfg.dti.cbap_fraction() * cfg.params.payload_bits / cfg.params.t_success();
        prop_assert!(m.throughput_bps() <= cap * (1.0 + 1e-9));
    }
}
