use occupancy_core::applications::classical_rate;
use occupancy_core::entropy::relative_entropy_slice;
use occupancy_core::feasibility::{conservation_terms, feasibility_check};
use occupancy_core::path::zero_cost_endpoint;
use occupancy_core::simulation::{audit_trial, largest_remainder, SimConfig};
use occupancy_core::twist::terminal_rate_empty;
use occupancy_core::verify::{random_instance, InstanceBounds, InstanceKind};
use occupancy_core::SimplexVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn relative_entropy_is_nonnegative((a, b) in (2usize..8).prop_flat_map(|n| (simplex(n), simplex(n)))) {
        let d = relative_entropy_slice(&a, &b);
        prop_assert!(d >= -1e-15);
        prop_assert!(relative_entropy_slice(&a, &a).abs() < 1e-15);
    }

    #[test]
    fn simplex_rejects_bad_sums(w in simplex(4), off in 2e-6f64..0.1) {
        prop_assert!(SimplexVector::new(w.clone()).is_ok());
        let mut bad = w;
        bad[0] += off;
        prop_assert!(SimplexVector::new(bad).is_err());
    }

    #[test]
    fn zero_cost_endpoint_has_zero_rate(beta in 0.05f64..5.0, cap in 0usize..5) {
        let alpha = SimplexVector::<f64>::empty_start(cap);
        let omega = zero_cost_endpoint(&alpha, beta);
        let s: f64 = omega.entries().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(terminal_rate_empty(&omega, beta).abs() < 1e-9);
    }

    #[test]
    fn classical_rate_is_nonnegative_and_vanishes_at_mean(beta in 0.2f64..4.0, t in 0.0f64..1.0) {
        let mean = (-beta).exp();
        prop_assert!(classical_rate::<f64>(mean, beta).unwrap().j.abs() < 1e-9);
        let w = 0.005 + 0.99 * t;
        if let Ok(s) = classical_rate::<f64>(w, beta) {
            prop_assert!(s.j >= -1e-12);
        }
    }

    #[test]
    fn generated_instances_are_feasible(seed in any::<u64>(), k in 0usize..5) {
        let kinds = [
            InstanceKind::EmptyExponential,
            InstanceKind::GeneralExponential,
            InstanceKind::EmptyPolynomial,
            InstanceKind::GeneralPolynomial,
            InstanceKind::Reducible,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, kinds[k], InstanceBounds::default());
        let c = &inst.constraint;
        prop_assert!(feasibility_check(c).is_feasible());
        let (held, available) = conservation_terms(c);
        prop_assert!(available >= held - 1e-9 * c.beta.max(1.0));
    }

    #[test]
    fn largest_remainder_is_exact(w in simplex(6), n in 1usize..500) {
        let c = largest_remainder(&w, n);
        prop_assert_eq!(c.iter().sum::<u64>(), n as u64);
        for (ci, wi) in c.iter().zip(&w) {
            prop_assert!((*ci as f64 - wi * n as f64).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn simulated_trials_respect_dynamics(w in simplex(4), n in 5usize..60, beta in 0.0f64..3.0, seed in any::<u64>()) {
        let cfg = SimConfig::new(n, beta, SimplexVector::new(w).unwrap(), seed, 4).unwrap();
        for t in 0..4 {
            prop_assert_eq!(audit_trial(&cfg, t).unwrap(), cfg.throws());
        }
    }
}

#[test]
fn single_precision_agrees_with_double() {
    let w64 = SimplexVector::<f64>::new(vec![0.1, 0.2, 0.25, 0.45]).unwrap();
    let w32 = SimplexVector::<f32>::new(vec![0.1, 0.2, 0.25, 0.45]).unwrap();
    let a = terminal_rate_empty(&w64, 2.5);
    let b = terminal_rate_empty(&w32, 2.5f32);
    assert!((a - f64::from(b)).abs() < 1e-4, "{a} vs {b}");
    let c = classical_rate::<f32>(0.15, 3.0).unwrap().j;
    assert!((f64::from(c) - classical_rate::<f64>(0.15, 3.0).unwrap().j).abs() < 1e-4);
}
