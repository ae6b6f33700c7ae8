mod common;

use common::*;
use netfactor::network::{canonical_instance, CanonicalInstance};
use netfactor::search::{
    als_search, square_corner_assignment, square_necessary_conditions, SearchConfig, NO_HIT_BANNER,
};
use netfactor::task::{cross_pairs_task, subset_state_task, typewriter_task, SubsetKind};
use netfactor::tensor::{Domain, Scalar};
use netfactor::verify::{
    bundled_assignment, lift_classical_assignment, realized_tensor, verify_assignment, BundledAssignment,
};
use netfactor::DistributionTask;
use nalgebra::{Matrix2, Matrix4};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn butterfly_parity_assignment_against_oracle() {
    let net = canonical_instance(CanonicalInstance::Butterfly).unwrap();
    let xor = bundled_assignment(BundledAssignment::ButterflyXor).unwrap();
    let task = cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[2, 2], Domain::NonNegative).unwrap();
    let report = verify_assignment(&net, &task, &xor, 1e-12).unwrap();
    assert!(report.matched && report.residual <= 1e-12);
    assert!(max_abs_diff(&report.realized, &naive_realized(&net, &xor)) < 1e-12);
    assert!(max_abs_diff(&report.realized, task.tensor()) < 1e-12);
}

#[test]
fn product_tasks_compose() {
    let star = canonical_instance(CanonicalInstance::Star { n: 3, dim: 2 }).unwrap();
    let bf = canonical_instance(CanonicalInstance::Butterfly).unwrap();
    let net = star.disjoint_union(&bf).unwrap();
    let ghz = subset_state_task(&SubsetKind::Ghz { n: 3, d: 2 }, Domain::NonNegative).unwrap();
    let cross = cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[2, 2], Domain::NonNegative).unwrap();
    let task = ghz.product(&cross).unwrap();
    let a = bundled_assignment(BundledAssignment::StarGhz { n: 3, d: 2 })
        .unwrap()
        .union(&bundled_assignment(BundledAssignment::ButterflyXor).unwrap())
        .unwrap();
    let report = verify_assignment(&net, &task, &a, 1e-12).unwrap();
    assert!(report.matched, "residual {}", report.residual);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn lifting_preserves_verification(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 4, true);
        let classical = random_assignment(&mut r, &net, Domain::NonNegative);
        let realized = realized_tensor(&net, &classical).unwrap();
        let task = DistributionTask::new(realized.clone(), Domain::NonNegative).unwrap();
        let base = verify_assignment(&net, &task, &classical, 1e-10).unwrap();
        prop_assert!(base.matched);

        let lifted = lift_classical_assignment(&classical).unwrap();
        let quantum_task = DistributionTask::new(realized, Domain::Complex).unwrap();
        let up = verify_assignment(&net, &quantum_task, &lifted, 1e-10).unwrap();
        prop_assert!(up.matched);
        prop_assert!((up.residual - base.residual).abs() <= 1e-12);
    }

    #[test]
    fn spanning_check_agrees_with_determinant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| {
            Matrix2::from_fn(|_, _| Scalar::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        };
        let mut corners = [[Matrix2::zeros(); 2]; 4];
        for pair in corners.iter_mut() {
            pair[0] = draw(&mut r);
            // sometimes both client values share one matrix, which kills spanning
            pair[1] = if r.random_bool(0.3) { pair[0] } else { draw(&mut r) };
        }
        let a = square_corner_assignment(&corners).unwrap();
        let report = square_necessary_conditions(&a).unwrap();
        let names = ["A", "B", "C", "D"];
        for k in 0..4 {
            let next = (k + 1) % 4;
            let mut stacked = Matrix4::<Scalar>::zeros();
            for i in 0..2 {
                for j in 0..2 {
                    let p = corners[k][i] * corners[next][j];
                    for (e, z) in p.iter().enumerate() {
                        stacked[(2 * i + j, e)] = *z;
                    }
                }
            }
            let spans = stacked.determinant().norm() > 1e-9;
            let flagged = report.span_failures.contains(&(names[k].to_string(), names[next].to_string()));
            prop_assert_eq!(spans, !flagged);
        }
    }

    #[test]
    fn rank_one_corner_always_rejected(seed in any::<u64>(), corner in 0usize..4, bit in 0usize..2) {
        let mut r = rng(seed);
        let mut corners = [[Matrix2::identity(); 2]; 4];
        for pair in corners.iter_mut() {
            for m in pair.iter_mut() {
                *m = Matrix2::from_fn(|_, _| Scalar::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)));
            }
        }
        let u = nalgebra::Vector2::new(Scalar::new(r.random_range(-1.0..1.0), 0.3), Scalar::new(1.0, 0.0));
        let v = nalgebra::Vector2::new(Scalar::new(0.5, 0.0), Scalar::new(r.random_range(-1.0..1.0), -0.2));
        corners[corner][bit] = u * v.transpose();
        let report = square_necessary_conditions(&square_corner_assignment(&corners).unwrap()).unwrap();
        prop_assert!(!report.passes());
        prop_assert!(report.rank_failures.iter().any(|(_, b, rank)| *b == bit && *rank < 2));
    }
}

#[test]
fn search_hits_verify_and_stay_in_domain() {
    let net = canonical_instance(CanonicalInstance::Butterfly).unwrap();
    let task = cross_pairs_task(&[("S1", "T1"), ("S2", "T2")], &[2, 2], Domain::NonNegative).unwrap();
    let config = SearchConfig {
        restarts: 200,
        ..SearchConfig::default()
    };
    let result = als_search(&net, &task, Domain::NonNegative, &config).unwrap();
    assert!(result.hit);
    assert!(result.best_residual < 1e-8);
    let report = verify_assignment(&net, &task, &result.best_assignment, 10.0 * config.success_tol).unwrap();
    assert!(report.matched);
    for t in result.best_assignment.tensors().values() {
        assert!(t.data().iter().all(|z| z.re >= -1e-15 && z.im == 0.0));
    }
}

#[test]
fn typewriter_complex_hit_verifies() {
    let net = canonical_instance(CanonicalInstance::Channel { left: 4, inner: 3, right: 4 }).unwrap();
    let task = typewriter_task();
    let config = SearchConfig {
        restarts: 20,
        ..SearchConfig::default()
    };
    let result = als_search(&net, &task, Domain::Complex, &config).unwrap();
    assert!(result.hit);
    let as_complex = DistributionTask::new(task.tensor().clone(), Domain::Complex).unwrap();
    let report = verify_assignment(&net, &as_complex, &result.best_assignment, 10.0 * config.success_tol).unwrap();
    assert!(report.matched);
    assert!(!NO_HIT_BANNER.is_empty());
}

#[test]
fn search_is_deterministic_across_thread_counts() {
    let net = canonical_instance(CanonicalInstance::Channel { left: 4, inner: 3, right: 4 }).unwrap();
    let task = typewriter_task();
    let config = SearchConfig {
        restarts: 12,
        seed: 42,
        ..SearchConfig::default()
    };
    let a = als_search(&net, &task, Domain::NonNegative, &config).unwrap();
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| als_search(&net, &task, Domain::NonNegative, &config).unwrap());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.residual_per_restart), bits(&b.residual_per_restart));
    assert_eq!(a.sweeps_used, b.sweeps_used);
    assert_eq!(a.best_assignment, b.best_assignment);
    let other = als_search(&net, &task, Domain::NonNegative, &SearchConfig { seed: 43, ..config }).unwrap();
    assert_ne!(bits(&a.residual_per_restart), bits(&other.residual_per_restart));
}
