use concord::matrix::{cholesky, is_psd, min_eigenvalue, symmetric_eigen};
use concord::{CandidateMatrix, Matrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn random_symmetric(rng: &mut ChaCha12Rng, d: usize) -> Matrix {
    let upper: Vec<f64> = (0..d * (d - 1) / 2).map(|_| rng.random_range(-1.0..=1.0)).collect();
    CandidateMatrix::from_upper(d, &upper).unwrap().into_matrix()
}

#[test]
fn jacobi_eigenvalues_match_nalgebra_on_1000_matrices() {
    let mut rng = ChaCha12Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let d = rng.random_range(2..=8);
        let m = random_symmetric(&mut rng, d);
        let mut ours = symmetric_eigen(&m).0;
        ours.sort_by(f64::total_cmp);
        let mut theirs: Vec<f64> = to_na(&m).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        assert_eq!(is_psd(&m, 1e-9), theirs[0] >= -1e-9);
        assert!((min_eigenvalue(&m) - theirs[0]).abs() < 1e-10);
    }
}

#[test]
fn cholesky_reconstructs_gram_matrices() {
    let mut rng = ChaCha12Rng::seed_from_u64(12);
    for _ in 0..200 {
        let d = rng.random_range(1..=7);
        let a = Matrix::from_fn(d, d + 2, |_, _| rng.random_range(-1.0..1.0));
        let g = a.gram();
        let l = cholesky(&g).unwrap();
        assert!(l.reconstruct().max_abs_diff(&g) < 1e-12);
    }
}

proptest! {
    #[test]
    fn psd_is_permutation_invariant(seed in any::<u64>(), d in 2usize..7) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let m = random_symmetric(&mut rng, d);
        let mut perm: Vec<usize> = (0..d).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        prop_assert_eq!(is_psd(&m, 1e-9), is_psd(&m.permuted(&perm), 1e-9));
    }

    #[test]
    fn text_round_trip(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let m = random_symmetric(&mut rng, d);
        let c = CandidateMatrix::validate(&m, 1e-12).unwrap();
        let back = Matrix::parse_text(&c.as_matrix().to_text()).unwrap();
        prop_assert_eq!(back, m);
    }
}
