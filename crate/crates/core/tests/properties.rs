//! Randomized property tests for the numeric invariants that the unit tests
//! only spot-check.

use proptest::prelude::*;

use sfw_core::numerics::{dot, l1_norm, l2_norm, topk_indices, RngStream, StreamPurpose, Tensor};
use sfw_core::optim::{sfw_step, OptimizerState, RescaleMode, ScheduleKind};
use sfw_core::regions::{k_support_norm, oracle, FeasibleRegion};

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

fn nonzero(x: &[f64]) -> bool {
    x.iter().any(|v| v.abs() > 1e-9)
}

proptest! {
    #[test]
    fn k_support_norm_sits_between_l2_and_l1(x in finite_vec(7), k in 1usize..=7) {
        let norm = k_support_norm(&x, k);
        prop_assert!(norm >= l2_norm(&x) - 1e-12);
        prop_assert!(norm <= l1_norm(&x) + 1e-12);
    }

    #[test]
    fn k_support_norm_interpolates_l1_and_l2(x in finite_vec(6)) {
        prop_assert!((k_support_norm(&x, 1) - l1_norm(&x)).abs() <= 1e-10 * (1.0 + l1_norm(&x)));
        prop_assert!((k_support_norm(&x, 6) - l2_norm(&x)).abs() <= 1e-10 * (1.0 + l2_norm(&x)));
    }

    #[test]
    fn k_support_norm_is_a_norm(
        x in finite_vec(5),
        y in finite_vec(5),
        c in -4.0f64..4.0,
        k in 1usize..=5,
    ) {
        let nx = k_support_norm(&x, k);
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        prop_assert!((k_support_norm(&scaled, k) - c.abs() * nx).abs() <= 1e-9 * (1.0 + nx));
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let ny = k_support_norm(&y, k);
        prop_assert!(k_support_norm(&sum, k) <= nx + ny + 1e-9);
    }

    #[test]
    fn topk_picks_the_largest_magnitudes(x in finite_vec(9), k in 1usize..=9) {
        let idx = topk_indices(&x, k).unwrap();
        prop_assert_eq!(idx.len(), k);
        let smallest_kept = idx.iter().map(|&i| x[i].abs()).fold(f64::INFINITY, f64::min);
        for (i, v) in x.iter().enumerate() {
            if !idx.contains(&i) {
                prop_assert!(v.abs() <= smallest_kept + 1e-12);
            }
        }
    }

    #[test]
    fn lmo_beats_sampled_atoms(
        g in finite_vec(6),
        tau in 0.5f64..3.0,
        k in 1usize..=4,
        kind in 0usize..4,
        seed in 0u64..1000,
    ) {
        prop_assume!(nonzero(&g));
        let groups: Vec<Vec<usize>> = (0..3).map(|i| vec![2 * i, 2 * i + 1]).collect();
        let region = match kind {
            0 => FeasibleRegion::L2Ball { tau },
            1 => FeasibleRegion::KSparsePolytope { tau, k },
            2 => FeasibleRegion::KSupport { tau, k },
            _ => FeasibleRegion::GroupKSupport { tau, k: k.min(3), groups },
        };
        let g = Tensor::new(vec![6], g).unwrap();
        let v = region.lmo(&g).unwrap();
        let attained = dot(v.data(), g.data());
        let mut rng = RngStream::new(seed, StreamPurpose::Noise);
        for _ in 0..25 {
            let atom = oracle::sample_atom(&region, 6, &mut rng);
            prop_assert!(attained <= dot(atom.data(), g.data()) + 1e-9);
        }
    }

    #[test]
    fn lmo_output_is_on_the_boundary(
        g in finite_vec(6),
        tau in 0.5f64..3.0,
        k in 1usize..=4,
    ) {
        prop_assume!(nonzero(&g));
        for region in [
            FeasibleRegion::L2Ball { tau },
            FeasibleRegion::KSparsePolytope { tau, k },
            FeasibleRegion::KSupport { tau, k },
        ] {
            let v = region.lmo(&Tensor::new(vec![6], g.clone()).unwrap()).unwrap();
            let gauge = region.gauge(&v).unwrap();
            prop_assert!((gauge - tau).abs() <= 1e-9 * tau, "gauge {gauge} vs tau {tau}");
        }
    }

    #[test]
    fn sfw_iterates_stay_feasible(
        tau in 0.5f64..2.0,
        k in 1usize..=4,
        seed in 0u64..1000,
        rho in 0.0f64..0.95,
    ) {
        let region = FeasibleRegion::KSupport { tau, k };
        let mut state = OptimizerState::new(
            0.4,
            ScheduleKind::LinearDecay,
            RescaleMode::None,
            rho,
            60,
        );
        let mut rng = RngStream::new(seed, StreamPurpose::Noise);
        let mut theta = Tensor::zeros(vec![6]);
        for _ in 0..60 {
            let g = Tensor::new(vec![6], (0..6).map(|_| rng.next_normal()).collect()).unwrap();
            theta = sfw_step(&mut state, &theta, &region, &g).unwrap().theta;
            prop_assert!(region.is_feasible(&theta, 1e-9).unwrap());
        }
    }

    #[test]
    fn permutations_are_bijections(seed in 0u64..10_000, n in 1usize..40) {
        let mut rng = RngStream::new(seed, StreamPurpose::Shuffle);
        let mut perm = rng.permutation(n);
        perm.sort_unstable();
        let identity: Vec<usize> = (0..n).collect();
        prop_assert_eq!(perm, identity);
    }
}
