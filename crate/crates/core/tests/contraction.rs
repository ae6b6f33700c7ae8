mod common;

use common::*;
use netfactor::tensor::{contract, frobenius_distance, Axis, ContractionPlan, DenseTensor, Domain};
use netfactor::verify::realized_tensor;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn chain(seed: u64, domain: Domain) -> Vec<DenseTensor> {
    let mut r = rng(seed);
    let n = 2 + (seed % 3) as usize;
    (0..n)
        .map(|k| {
            let axes = vec![
                Axis::new(format!("b{k}"), 2 + (k % 2)),
                Axis::new(format!("o{k}"), 2),
                Axis::new(format!("b{}", k + 1), 2 + ((k + 1) % 2)),
            ];
            random_tensor(&mut r, axes, domain)
        })
        .collect()
}

fn chain_free(parts: &[DenseTensor]) -> Vec<String> {
    let n = parts.len();
    let mut free: Vec<String> = (0..n).map(|k| format!("o{k}")).collect();
    free.push("b0".into());
    free.push(format!("b{n}"));
    free
}

#[test]
fn ring_trace_is_two() {
    let a = DenseTensor::delta(&["x", "y"], 2).unwrap();
    let b = DenseTensor::delta(&["y", "z"], 2).unwrap();
    let c = DenseTensor::delta(&["z", "x"], 2).unwrap();
    let plan = ContractionPlan::new(vec![&a, &b, &c], &[]).unwrap();
    assert_eq!(contract(&plan).unwrap().data()[0].re, 2.0);
    assert_eq!(naive_contract(&[&a, &b, &c], &[]).data()[0].re, 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn realized_tensor_matches_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 4, true);
        let a = random_assignment(&mut r, &net, Domain::Complex);
        let fast = realized_tensor(&net, &a).unwrap();
        let slow = naive_realized(&net, &a);
        prop_assert!(max_abs_diff(&fast, &slow) < 1e-10);
    }

    #[test]
    fn chain_matches_oracle(seed in any::<u64>()) {
        let parts = chain(seed, Domain::Complex);
        let free = chain_free(&parts);
        let free_refs: Vec<&str> = free.iter().map(String::as_str).collect();
        let refs: Vec<&DenseTensor> = parts.iter().collect();
        let fast = contract(&ContractionPlan::new(refs.clone(), &free_refs).unwrap()).unwrap();
        let slow = naive_contract(&refs, &free_refs);
        prop_assert_eq!(fast.labels(), slow.labels());
        prop_assert!(max_abs_diff(&fast, &slow) < 1e-10);
    }

    #[test]
    fn schedule_independent(seed in any::<u64>()) {
        let parts = chain(seed, Domain::Complex);
        let free = chain_free(&parts);
        let free_refs: Vec<&str> = free.iter().map(String::as_str).collect();
        let refs: Vec<&DenseTensor> = parts.iter().collect();
        let base = contract(&ContractionPlan::new(refs.clone(), &free_refs).unwrap()).unwrap();
        let mut shuffled = refs.clone();
        shuffled.shuffle(&mut rng(seed ^ 0x5eed));
        let other = contract(&ContractionPlan::new(shuffled, &free_refs).unwrap()).unwrap();
        prop_assert!(frobenius_distance(&base, &other).unwrap() <= 1e-12 * base.norm().max(1.0));
    }

    #[test]
    fn nonnegative_inputs_stay_nonnegative(seed in any::<u64>()) {
        let parts = chain(seed, Domain::NonNegative);
        let free = chain_free(&parts);
        let free_refs: Vec<&str> = free.iter().map(String::as_str).collect();
        let out = contract(&ContractionPlan::new(parts.iter().collect(), &free_refs).unwrap()).unwrap();
        prop_assert_eq!(out.domain(), Domain::NonNegative);
        prop_assert!(out.data().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
    }

    #[test]
    fn distance_triangle_inequality(seed in any::<u64>()) {
        let mut r = rng(seed);
        let axes = vec![Axis::new("p", 2), Axis::new("q", 3)];
        let a = random_tensor(&mut r, axes.clone(), Domain::Complex);
        let b = random_tensor(&mut r, axes.clone(), Domain::Complex);
        let c = random_tensor(&mut r, axes, Domain::Complex).permuted(&["q", "p"]).unwrap();
        let ab = frobenius_distance(&a, &b).unwrap();
        let bc = frobenius_distance(&b, &c).unwrap();
        let ac = frobenius_distance(&a, &c).unwrap();
        prop_assert!(ac <= ab + bc + 1e-12);
        prop_assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn permutation_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let axes = vec![Axis::new("p", 2), Axis::new("q", 3), Axis::new("s", 2)];
        let t = random_tensor(&mut r, axes, Domain::Complex);
        let mut order = vec!["p", "q", "s"];
        order.shuffle(&mut r);
        let there = t.permuted(&order).unwrap();
        for (idx, label_idx) in [([1usize, 2, 0], 0), ([0, 1, 1], 1)] {
            let labeled: Vec<(&str, usize)> = vec![("p", idx[0]), ("q", idx[1]), ("s", idx[2])];
            prop_assert_eq!(there.get_labeled(&labeled).unwrap(), t.get(&idx).unwrap(), "case {}", label_idx);
        }
        let back = there.permuted(&["p", "q", "s"]).unwrap();
        prop_assert_eq!(back, t);
    }
}
