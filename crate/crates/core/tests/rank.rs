mod common;

use common::*;
use netfactor::rank::{
    factor_pair_residual, fooling_set_lower_bound, is_fooling_set, nonneg_rank_bounds, numerical_rank, BoundsConfig,
    DEFAULT_RANK_TOL,
};
use netfactor::search::SearchConfig;
use netfactor::tensor::{Axis, DenseTensor, Domain, Scalar};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn low_rank(seed: u64, rows: usize, cols: usize, inner: usize, domain: Domain) -> DenseTensor {
    let mut r = rng(seed);
    let w = random_tensor(&mut r, vec![Axis::new("r", rows), Axis::new("k", inner)], domain);
    let h = random_tensor(&mut r, vec![Axis::new("k", inner), Axis::new("c", cols)], domain);
    netfactor::tensor::contract_pair(&w, &h).unwrap()
}

/// Fooling-set search by trying every subset of positive cells.
fn brute_force_fooling(m: &DenseTensor) -> usize {
    let d = m.dims();
    let cells: Vec<(usize, usize)> = (0..d[0])
        .flat_map(|i| (0..d[1]).map(move |j| (i, j)))
        .filter(|&(i, j)| m.get(&[i, j]).unwrap().re > 0.0)
        .collect();
    let mut best = 0;
    for mask in 0u32..(1 << cells.len()) {
        let set: Vec<(usize, usize)> = (0..cells.len()).filter(|k| mask >> k & 1 == 1).map(|k| cells[k]).collect();
        if set.len() > best && is_fooling_set(m, &set).unwrap() {
            best = set.len();
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn rank_invariant_under_permutation_and_scale(seed in any::<u64>(), inner in 1usize..4) {
        let m = low_rank(seed, 4, 5, inner, Domain::Complex);
        let base = numerical_rank(&m, DEFAULT_RANK_TOL).unwrap().rank;
        prop_assert_eq!(base, inner);
        let mut r = rng(seed ^ 1);
        let mut rows: Vec<usize> = (0..4).collect();
        let mut cols: Vec<usize> = (0..5).collect();
        rows.shuffle(&mut r);
        cols.shuffle(&mut r);
        let s = Scalar::new(r.random_range(0.5..2.0), r.random_range(-1.0..1.0));
        let shuffled = DenseTensor::from_fn(m.axes().to_vec(), Domain::Complex, |idx| {
            s * m.get(&[rows[idx[0]], cols[idx[1]]]).unwrap()
        })
        .unwrap();
        prop_assert_eq!(numerical_rank(&shuffled, DEFAULT_RANK_TOL).unwrap().rank, base);
        let flipped = m.permuted(&["c", "r"]).unwrap();
        prop_assert_eq!(numerical_rank(&flipped, DEFAULT_RANK_TOL).unwrap().rank, base);
    }

    #[test]
    fn fooling_set_is_maximum_and_valid(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = DenseTensor::from_fn(vec![Axis::new("r", 3), Axis::new("c", 4)], Domain::NonNegative, |_| {
            Scalar::new(if r.random_bool(0.45) { 1.0 } else { 0.0 }, 0.0)
        })
        .unwrap();
        let fs = fooling_set_lower_bound(&m, 12).unwrap();
        prop_assert!(is_fooling_set(&m, &fs.witness).unwrap());
        prop_assert_eq!(fs.size, brute_force_fooling(&m));
        prop_assert!(fs.size <= 3);
    }
}

#[test]
fn bounds_bracket_and_witness_reproduces() {
    let config = BoundsConfig {
        search: SearchConfig {
            restarts: 30,
            ..SearchConfig::default()
        },
        rank_tol: DEFAULT_RANK_TOL,
    };
    for seed in 0..8 {
        let inner = 1 + (seed as usize % 3);
        let m = low_rank(seed, 4, 4, inner, Domain::NonNegative);
        let b = nonneg_rank_bounds(&m, &config).unwrap();
        assert!(b.lower <= b.upper, "seed {seed}");
        assert!(b.upper <= inner.max(b.lower), "seed {seed}: upper {} for inner {inner}", b.upper);
        assert!(factor_pair_residual(&m, &b.upper_witness).unwrap() <= 1e-6, "seed {seed}");
        for t in [&b.upper_witness.0, &b.upper_witness.1] {
            assert!(t.data().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
        }
    }
}
