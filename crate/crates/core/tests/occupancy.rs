//! Invariants of occupancy measures on random layered spaces.

mod common;

use common::*;
use csapo::occupancy::*;
use csapo::optimizer::mixing_step;
use csapo::{LayeredSpace, RewardTable, StateActionTable};
use proptest::prelude::*;

fn space_strategy() -> impl Strategy<Value = LayeredSpace> {
    (prop::collection::vec(1usize..=4, 0..4), 1usize..=3).prop_map(|(inner, actions)| {
        let mut sizes = vec![1];
        sizes.extend(inner);
        sizes.push(1);
        LayeredSpace::new(sizes, actions).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn induced_occupancies_are_valid_and_invert(space in space_strategy(), seed in any::<u64>()) {
        let mut rng = rng(seed);
        let kernel = random_kernel(&space, &mut rng);
        let policy = random_policy(&space, &mut rng);
        let q = occupancy_from_policy(&policy, &kernel).unwrap();
        prop_assert!(q.validate().passes(1e-9));
        for layer in q.state_distribution() {
            prop_assert!((layer.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
        let back = policy_of(&q);
        for (a, b) in back.layers().iter().flatten().zip(policy.layers().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let kernel_back = transition_of(&q);
        for (a, b) in kernel_back.layers().iter().flatten().zip(kernel.layers().iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        let again = occupancy_from_policy(&back, &kernel_back).unwrap();
        prop_assert!(again.max_abs_difference(&q) <= 1e-9);
    }

    #[test]
    fn mixtures_and_distances(space in space_strategy(), seed in any::<u64>(), alpha in 0.0f64..=1.0) {
        let mut rng = rng(seed);
        let kernel = random_kernel(&space, &mut rng);
        let a = occupancy_from_policy(&random_policy(&space, &mut rng), &kernel).unwrap();
        let b = occupancy_from_policy(&random_policy(&space, &mut rng), &kernel).unwrap();
        let c = random_occupancy(&space, &mut rng);
        // Same kernel: the mixture is itself an occupancy.
        prop_assert!(a.mix(alpha, &b).validate().passes(1e-9));
        prop_assert!((a.l1_distance(&b) - b.l1_distance(&a)).abs() <= 1e-15);
        prop_assert!(a.l1_distance(&c) <= a.l1_distance(&b) + b.l1_distance(&c) + 1e-12);
        prop_assert!(a.l1_distance(&b) <= 2.0 * space.horizon() as f64 + 1e-12);
        let mixed = mixing_step(&a, alpha).unwrap();
        prop_assert!(mixed.layers().iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn constant_tables_give_horizon_multiples(space in space_strategy(), seed in any::<u64>(), c in 0.0f64..1.0) {
        let mut rng = rng(seed);
        let q1 = random_occupancy(&space, &mut rng);
        let q2 = random_occupancy(&space, &mut rng);
        let l = space.horizon() as f64;
        let u = linear_utility(&q1, &StateActionTable::constant(&space, c)).unwrap();
        prop_assert!((u - c * l).abs() <= 1e-12);
        let r = RewardTable::constant(&space, &space, c).unwrap();
        prop_assert!((bilinear_reward(&q1, &q2, &r).unwrap() - c * l).abs() <= 1e-12);
    }

    #[test]
    fn csv_round_trip(space in space_strategy(), seed in any::<u64>()) {
        let q = random_occupancy(&space, &mut rng(seed));
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let back = Occupancy::read_csv(&space, buf.as_slice()).unwrap();
        prop_assert_eq!(back, q);
    }
}

#[test]
fn perturbed_occupancy_fails_validation() {
    let mut rng = rng(9);
    let space = LayeredSpace::new(vec![1, 2, 3, 1], 2).unwrap();
    let q = random_occupancy(&space, &mut rng);
    let mut layers = q.layers().to_vec();
    layers[1][0] += 1e-3;
    let report = validate(&space, &layers).unwrap();
    assert!(!report.passes(1e-9));
    assert!(report.max_flow_residual() >= 1e-3 - 1e-12 || report.max_mass_residual() >= 1e-3 - 1e-12);
}
