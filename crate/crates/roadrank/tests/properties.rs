//! Randomized property suites for the structure, importance, and
//! satisfaction layers.

use proptest::prelude::*;
use roadrank::importance::{barlow_proschan, barlow_proschan_combinatorial};
use roadrank::satisfaction::WeibullPatience;
use roadrank::sim::{safe_distances, SimParams};
use roadrank::structure::{EvaluationMode, StructureFunction};

const N: usize = 8;

fn arb_paths() -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::btree_set(0usize..N, 1..=4), 1..=5)
        .prop_map(|paths| paths.into_iter().map(|p| p.into_iter().collect()).collect())
}

fn state(bits: u32) -> Vec<bool> {
    (0..N).map(|i| bits & (1 << i) != 0).collect()
}

proptest! {
    #[test]
    fn structure_monotone_under_componentwise_increase(paths in arb_paths()) {
        let phi = StructureFunction::from_paths(N, paths).expect("nonempty path sets");
        for bits in 0u32..(1 << N) {
            let x = state(bits);
            let up = phi.evaluate(&x).expect("dimension matches");
            for i in 0..N {
                if !x[i] {
                    let mut y = x.clone();
                    y[i] = true;
                    let raised = phi.evaluate(&y).expect("dimension matches");
                    prop_assert!(
                        !up || raised,
                        "turning component {i} on at state {bits:b} broke the system"
                    );
                }
            }
        }
    }

    #[test]
    fn path_cut_duality_roundtrip(paths in arb_paths()) {
        let phi = StructureFunction::from_paths(N, paths).expect("nonempty path sets");
        let cuts = phi.minimal_cuts().expect("within enumeration cap");
        // the system functions iff every minimal cut contains a worker
        for bits in 0u32..(1 << N) {
            let x = state(bits);
            let via_paths = phi.evaluate(&x).expect("dimension matches");
            let via_cuts = cuts.iter().all(|c| c.iter().any(|&i| x[i]));
            prop_assert_eq!(via_paths, via_cuts, "path/cut disagreement at state {:b}", bits);
        }
        // hitting sets of the hitting sets recover the minimal paths
        let dual = StructureFunction::from_paths(N, cuts.iter().map(|c| c.iter().copied()))
            .expect("cut sets are nonempty");
        let back = dual.minimal_cuts().expect("within cap");
        let mut paths = phi.min_paths();
        paths.sort();
        prop_assert_eq!(back, paths);
    }

    #[test]
    fn barlow_proschan_routes_agree_and_sum_to_one(paths in arb_paths()) {
        let phi = StructureFunction::from_paths(N, paths).expect("nonempty path sets");
        let mut sum = 0.0;
        for i in 0..N {
            let integral = barlow_proschan(&phi, i).expect("component in range");
            let counted = barlow_proschan_combinatorial(&phi, i).expect("component in range");
            prop_assert!(
                (integral - counted).abs() < 1e-12,
                "component {}: {} vs {}", i, integral, counted
            );
            sum += integral;
        }
        prop_assert!((sum - 1.0).abs() < 1e-9, "importances sum to {}", sum);
    }

    #[test]
    fn exact_reliability_bounded_and_monotone(
        paths in arb_paths(),
        p in prop::collection::vec(0.0f64..=1.0, N),
        bump in 0usize..N,
    ) {
        let phi = StructureFunction::from_paths(N, paths).expect("nonempty path sets");
        let h = phi.reliability(&p, EvaluationMode::Exact).expect("valid vector");
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&h), "h = {} out of range", h);
        let mut q = p.clone();
        q[bump] = (q[bump] + 0.25).min(1.0);
        let raised = phi.reliability(&q, EvaluationMode::Exact).expect("valid vector");
        prop_assert!(raised >= h - 1e-12, "raising p[{}] dropped h: {} -> {}", bump, h, raised);
    }

    #[test]
    fn naive_mode_agrees_with_exact_on_disjoint_paths(
        cut_a in 1usize..4,
        cut_b in 4usize..7,
        p in prop::collection::vec(0.0f64..=1.0, N),
    ) {
        // three disjoint series blocks in parallel share no components, so
        // the naive product form is exact
        let paths =
            vec![(0..cut_a).collect::<Vec<_>>(), (cut_a..cut_b).collect(), (cut_b..N).collect()];
        let phi = StructureFunction::from_paths(N, paths).expect("nonempty path sets");
        let exact = phi.reliability(&p, EvaluationMode::Exact).expect("valid vector");
        let naive = phi.reliability(&p, EvaluationMode::PaperNaive).expect("valid vector");
        prop_assert!((exact - naive).abs() < 1e-12, "{} vs {}", exact, naive);
    }

    #[test]
    fn satisfaction_probability_decreases_with_delay(
        lambda in 1.0f64..120.0,
        k in 0.5f64..6.0,
        d1 in 0.0f64..600.0,
        extra in 0.0f64..600.0,
    ) {
        let patience = WeibullPatience::new(lambda, k).expect("positive parameters");
        let q1 = patience.satisfaction_probability(d1).expect("finite delay");
        let q2 = patience.satisfaction_probability(d1 + extra).expect("finite delay");
        prop_assert!((0.0..=1.0).contains(&q1));
        prop_assert!(q2 <= q1 + 1e-12, "Q rose with delay: {} -> {}", q1, q2);
    }

    #[test]
    fn safe_distances_ordered_and_monotone_in_speed(v_n in 0u8..=5, v_next in 0u8..=5) {
        let params = SimParams::default();
        let (d_acc, d_keep, d_dec) = safe_distances(v_n, v_next, &params);
        prop_assert!(d_acc >= d_keep && d_keep >= d_dec, "{} {} {}", d_acc, d_keep, d_dec);
        prop_assert!(d_dec >= 0);
        if v_n < 5 {
            let (up_acc, up_keep, up_dec) = safe_distances(v_n + 1, v_next, &params);
            prop_assert!(up_acc >= d_acc && up_keep >= d_keep && up_dec >= d_dec);
        }
    }
}
