//! Property tests for the structural invariants: aggregation consistency,
//! the shrink-factor identities, telescoping totals, and the loss axioms.

use proptest::prelude::*;

use stratshrink::estimators::{estimate_basic, estimate_general, EstimatorRule};
use stratshrink::hierarchy::{
    aggregate, build_param_tree, BasicObs, HierarchySpec, ObservationSet,
};
use stratshrink::losses::{balanced_entropy_loss, entropy_loss, sse_loss};
use stratshrink::priors::{DepthExponents, PriorExponents};

fn arb_spec() -> impl Strategy<Value = HierarchySpec> {
    prop::collection::vec(1usize..=3, 1..=3).prop_map(|b| HierarchySpec::new(b).unwrap())
}

fn arb_tree() -> impl Strategy<Value = stratshrink::hierarchy::ParamTree> {
    arb_spec().prop_flat_map(|spec| {
        let leaves = spec.leaf_count();
        prop::collection::vec(0.01f64..10.0, leaves..=leaves)
            .prop_map(move |rates| build_param_tree(&spec, &rates).unwrap())
    })
}

fn arb_observations() -> impl Strategy<Value = ObservationSet> {
    arb_spec().prop_flat_map(|spec| {
        let d_max = spec.depth();
        (0..=d_max, proptest::arbitrary::any::<u64>()).prop_map(move |(d_prime, seed)| {
            let counts: Vec<Vec<u64>> = (0..=d_max)
                .map(|d| {
                    (0..spec.level_width(d))
                        .map(|idx| {
                            if d >= d_prime {
                                seed.rotate_left((7 * d + 3 * idx) as u32 % 64) % 9
                            } else {
                                0
                            }
                        })
                        .collect()
                })
                .collect();
            ObservationSet::new(spec.clone(), d_prime, counts).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn aggregates_match_brute_force_resummation(obs in arb_observations()) {
        let totals = aggregate(&obs);
        let spec = obs.spec();
        for d in 0..=spec.depth() {
            for idx in 0..spec.level_width(d) {
                let mut direct = 0u64;
                let mut frontier = vec![(d, idx)];
                while let Some((fd, fi)) = frontier.pop() {
                    direct += obs.count(fd, fi);
                    if fd < spec.depth() {
                        frontier.extend(spec.children(fd, fi).map(|c| (fd + 1, c)));
                    }
                }
                prop_assert_eq!(totals.total(d, idx), direct);
            }
        }
        // root total is the sum of every observed count
        let all: u64 = (0..=spec.depth())
            .flat_map(|d| obs.level(d).to_vec())
            .sum();
        prop_assert_eq!(totals.root(), all);
    }

    #[test]
    fn tree_invariants_hold(tree in arb_tree()) {
        let spec = tree.spec();
        let total = tree.lambda_total();
        for d in 1..=spec.depth() {
            // children ratios sum to one under each parent
            for parent in 0..spec.level_width(d - 1) {
                let sum: f64 = spec.children(d - 1, parent).map(|c| tree.theta(d, c)).sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
            // each aggregate is the total times the ratio path product
            for idx in 0..spec.level_width(d) {
                let mut product = total;
                let mut node = idx;
                for dd in (1..=d).rev() {
                    product *= tree.theta(dd, node);
                    node = spec.parent(dd, node);
                }
                // walk accumulated ratios top-down instead
                let mut path = 1.0;
                let mut node = idx;
                let mut depth = d;
                while depth >= 1 {
                    path *= tree.theta(depth, node);
                    node = spec.parent(depth, node);
                    depth -= 1;
                }
                let reconstructed = total * path;
                prop_assert!(
                    (reconstructed - tree.lambda(d, idx)).abs() <= 1e-12 * tree.lambda(d, idx).max(1.0)
                );
                prop_assert!((product - total * path).abs() <= 1e-9 * product.abs().max(1.0));
            }
        }
        // aggregates equal the sum of their children, to relative 1e-12
        for d in 0..spec.depth() {
            for idx in 0..spec.level_width(d) {
                let children: f64 = spec.children(d, idx).map(|c| tree.lambda(d + 1, c)).sum();
                prop_assert!((children - tree.lambda(d, idx)).abs() <= 1e-12 * children.max(1.0));
            }
        }
    }

    #[test]
    fn shrink_identities_and_ordering(
        x in prop::collection::vec(0u64..=12, 2..=5),
        y in 0u64..=12,
    ) {
        prop_assume!(x.iter().sum::<u64>() > 0);
        let obs = BasicObs { x: x.clone(), y };
        let m = x.len() as f64;
        let xs = obs.x_total() as f64;
        let yf = y as f64;
        let ml = estimate_basic(&obs, &EstimatorRule::BasicMl).unwrap();
        let flat = estimate_basic(&obs, &EstimatorRule::BasicFlatGb).unwrap();
        let shrink = estimate_basic(&obs, &EstimatorRule::BasicShrinkGb).unwrap();

        let f1 = 1.0 - (m - 1.0) * yf / ((xs + yf) * (xs + m - 1.0));
        let f2 = 1.0 - (m - 1.0) / (xs + yf + m - 1.0);
        for i in 0..x.len() {
            prop_assert!((flat.values[i] - f1 * ml.values[i]).abs() <= 1e-12 * ml.values[i].max(1.0));
            prop_assert!((shrink.values[i] - f2 * flat.values[i]).abs() <= 1e-12 * flat.values[i].max(1.0));
        }
        // toward the origin: |shrink| < |flat| <= |ml|, strict when y > 0
        prop_assert!(shrink.total() < flat.total());
        if y > 0 {
            prop_assert!(flat.total() < ml.total());
        } else {
            prop_assert!((flat.total() - ml.total()).abs() < 1e-12);
        }
    }

    #[test]
    fn general_estimator_total_telescopes(obs in arb_observations(), root_exp in 0.3f64..4.0) {
        let spec = obs.spec().clone();
        let depths = (1..=spec.depth())
            .map(|_| DepthExponents::Uniform(0.7))
            .collect();
        let prior = PriorExponents::new(&spec, root_exp, depths).unwrap();
        let est = estimate_general(&obs, &prior).unwrap();
        let totals = aggregate(&obs);
        let rate = (1 + spec.depth() - obs.start_depth()) as f64;
        let expected = (totals.root() as f64 + root_exp) / rate;
        prop_assert!((est.total() - expected).abs() <= 1e-10 * expected);
        prop_assert!(est.values.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn losses_nonnegative_zero_iff_equal(
        pairs in prop::collection::vec((0.05f64..8.0, 0.0f64..2.0), 1..=6),
    ) {
        let truth: Vec<f64> = pairs.iter().map(|(t, _)| *t).collect();
        let est: Vec<f64> = pairs.iter().map(|(t, p)| t + p).collect();
        let equal = est == truth;
        let sse = sse_loss(&est, &truth).unwrap();
        let ent = entropy_loss(&est, &truth).unwrap();
        prop_assert!(sse >= 0.0 && ent >= 0.0);
        prop_assert_eq!(sse == 0.0, equal);
        prop_assert_eq!(ent == 0.0, equal);

        let spec = HierarchySpec::new(vec![truth.len()]).unwrap();
        let tree = build_param_tree(&spec, &truth).unwrap();
        let bal = balanced_entropy_loss(&est, &tree).unwrap();
        prop_assert!(bal >= 0.0);
        prop_assert_eq!(bal == 0.0, equal);
    }
}
