mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use starsim::beamforming::{
    multicast_min_power, multicast_min_power_exact, unicast_min_power, UnicastOptions,
};

use common::{db, multicast_phi_oracle, sinrs, span_residual, unicast_span_oracle};

fn channel(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n)
        .prop_map(|v| v.into_iter().map(|(re, im)| C64::new(re, im)).collect())
        .prop_filter("non-degenerate", |h: &Vec<C64>| {
            h.iter().map(|x| x.norm_sqr()).sum::<f64>() > 1e-2
        })
}

fn well_separated(h_t: &[C64], h_r: &[C64]) -> bool {
    let (a, b) = (common::energy(h_t), common::energy(h_r));
    let c = common::dot(h_t, h_r).norm_sqr();
    c < 0.95 * a * b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unicast_matches_direction_search(
        h_t in channel(2),
        h_r in channel(2),
        g_t in 0.1f64..6.0,
        g_r in 0.1f64..6.0,
    ) {
        prop_assume!(well_separated(&h_t, &h_r));
        let sol = unicast_min_power(&h_t, &h_r, g_t, g_r, 0.1, &UnicastOptions::default()).unwrap();
        let reference = unicast_span_oracle(&h_t, &h_r, g_t, g_r, 0.1).unwrap();
        // the direction search can only be worse than the optimum
        prop_assert!(sol.power_w <= reference * (1.0 + 1e-8));
        prop_assert!(db(reference / sol.power_w) < 0.05);
        let (s_t, s_r) = sinrs(&h_t, &h_r, &sol.w_t, &sol.w_r, 0.1);
        prop_assert!((s_t / g_t - 1.0).abs() < 1e-6 && (s_r / g_r - 1.0).abs() < 1e-6);
    }

    #[test]
    fn multicast_matches_phase_sampling(
        h_t in channel(3),
        h_r in channel(3),
        gamma in 0.1f64..10.0,
    ) {
        prop_assume!(well_separated(&h_t, &h_r));
        let exact = multicast_min_power_exact(&h_t, &h_r, gamma, 0.1).unwrap();
        let grid = multicast_min_power(&h_t, &h_r, gamma, 0.1, 64).unwrap();
        let reference = multicast_phi_oracle(&h_t, &h_r, gamma, 0.1, 4096);
        prop_assert!(exact.power_w <= reference * (1.0 + 1e-9));
        prop_assert!(db(reference / exact.power_w) < 0.02);
        prop_assert!(db(grid.power_w / exact.power_w).abs() < 1e-6);
        prop_assert!(span_residual(&exact.w, &h_t, &h_r) < 1e-9);
        let snr_t = common::dot(&h_t, &exact.w).norm_sqr() / 0.1;
        let snr_r = common::dot(&h_r, &exact.w).norm_sqr() / 0.1;
        prop_assert!(snr_t.min(snr_r) >= gamma * (1.0 - 1e-9));
        prop_assert!((snr_t.min(snr_r) / gamma - 1.0).abs() < 1e-6);
    }
}
