use std::time::Instant;

use concord::block::{
    block_average, block_cholesky, block_psd, expand, expand_factor, reduce_spearman, spearman_verdict, BlockError,
    BlockSpec, SpearmanVerdict,
};
use concord::matrix::{cholesky, min_eigenvalue};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn random_spec(rng: &mut ChaCha12Rng, max_groups: usize, max_size: usize) -> BlockSpec {
    let s = rng.random_range(1..=max_groups);
    let sizes = (0..s).map(|_| rng.random_range(1..=max_size)).collect();
    let within = (0..s).map(|_| rng.random_range(-0.2..=0.9)).collect();
    let between = (0..s * (s - 1) / 2).map(|_| rng.random_range(-0.3..=0.6)).collect();
    BlockSpec::new(sizes, within, between).unwrap()
}

#[test]
fn factor_matches_dense_cholesky() {
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 200 {
        let spec = random_spec(&mut rng, 5, 6);
        let dense = expand(&spec);
        let lam = min_eigenvalue(dense.as_matrix());
        if lam < -1e-9 {
            assert!(block_cholesky(&spec).is_err(), "{spec}");
        }
        if lam < 1e-6 {
            continue;
        }
        let l = expand_factor(&block_cholesky(&spec).unwrap(), &spec);
        let oracle = cholesky(dense.as_matrix()).unwrap();
        assert!(l.as_matrix().max_abs_diff(oracle.as_matrix()) < 1e-10, "{spec}");
        checked += 1;
    }
}

#[test]
fn indefinite_specs_report_the_failing_pivot() {
    let spec: BlockSpec = "sizes=3,2; within=-0.6,0.5; between=0.1".parse().unwrap();
    assert!(!block_psd(&spec, 1e-9));
    assert!(matches!(block_cholesky(&spec), Err(BlockError::NotPositiveDefinite { group: 0, .. })));
}

#[test]
fn factor_scales_linearly_in_dimension() {
    let spec = |k: usize| BlockSpec::new(vec![k; 4], vec![0.5, 0.4, 0.3, 0.2], vec![0.1; 6]).unwrap();
    let time = |k: usize| {
        let t = Instant::now();
        let f = block_cholesky(&spec(k)).unwrap();
        assert_eq!(f.diag.iter().map(Vec::len).sum::<usize>(), 4 * k);
        t.elapsed().as_secs_f64()
    };
    time(10_000);
    let small = time(100_000).max(1e-4);
    let large = time(1_000_000);
    assert!(large < 40.0 * small, "{small} s at 4e5, {large} s at 4e6");
}

#[test]
fn verdicts() {
    let paper: BlockSpec = "sizes=4,3,2; within=0.4,0.3,0.2; between=0.1,0.1,0.15".parse().unwrap();
    assert!(matches!(spearman_verdict(&paper, 1e-9).unwrap(), SpearmanVerdict::CompatibleViaBernoulli { .. }));
    let bad: BlockSpec = "sizes=3; within=-0.6".parse().unwrap();
    assert_eq!(spearman_verdict(&bad, 1e-9).unwrap(), SpearmanVerdict::NotPsd);
    let small: BlockSpec = "sizes=2,2; within=0.9,0.9; between=-0.85".parse().unwrap();
    assert_eq!(spearman_verdict(&small, 1e-9).unwrap().is_compatible(), Some(true));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn block_psd_matches_dense_eigenvalues(seed in any::<u64>()) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 4, 5);
        let lam = min_eigenvalue(expand(&spec).as_matrix());
        if lam.abs() > 1e-7 {
            prop_assert_eq!(block_psd(&spec, 1e-9), lam > 0.0);
        }
    }

    #[test]
    fn spec_text_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 6, 9);
        prop_assert_eq!(spec.to_string().parse::<BlockSpec>().unwrap(), spec);
    }

    #[test]
    fn reduction_is_symmetric_with_unit_diagonal(seed in any::<u64>()) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let spec = random_spec(&mut rng, 5, 6);
        if let Ok(m) = reduce_spearman(&spec) {
            for a in 0..m.rows() {
                prop_assert!((m[(a, a)] - 1.0).abs() < 1e-15);
                for b in 0..a {
                    prop_assert_eq!(m[(a, b)], m[(b, a)]);
                }
            }
            prop_assert_eq!(m.rows(), block_average(&spec).rows());
        }
    }
}
