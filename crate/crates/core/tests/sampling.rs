use std::collections::BTreeMap;

use concord::bern::{is_bern_half_compatible, BernCertificate, BernVerdict};
use concord::hierarchy::{calibrate, hac_sample, Family, HacModel, HierTree};
use concord::samplers::{
    attain_kappa, gaussian_attain, neg_equicorr_uniform, sample_bern_vector, AttainmentModel, RngStream,
};
use concord::transforms::{
    blomqvist_matrix, kendall_matrix, normal_cdf, spearman_matrix, van_der_waerden_matrix, QuantileTransform,
};
use concord::{CandidateMatrix, Measure, SampleMatrix};

fn p2() -> CandidateMatrix {
    CandidateMatrix::from_upper(3, &[-0.9, 0.5, -0.4]).unwrap()
}

fn p2_certificate() -> BernCertificate {
    match is_bern_half_compatible(&p2()).unwrap() {
        BernVerdict::Compatible(c) => c,
        BernVerdict::Incompatible { objective } => panic!("objective {objective}"),
    }
}

fn ks_uniform(mut x: Vec<f64>) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().map(|(i, &v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n)).fold(0.0, f64::max)
}

fn max_err(a: &CandidateMatrix, b: &CandidateMatrix) -> f64 {
    a.as_matrix().max_abs_diff(b.as_matrix())
}

#[test]
fn same_seed_same_sample() {
    let cert = p2_certificate();
    let g = QuantileTransform::standard_normal();
    let a = attain_kappa(&cert, &g, 10_000, &RngStream::new(7, 3)).unwrap();
    let b = attain_kappa(&cert, &g, 10_000, &RngStream::new(7, 3)).unwrap();
    let c = attain_kappa(&cert, &g, 10_000, &RngStream::new(7, 4)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
    let ne1 = neg_equicorr_uniform(5, 9_000, &RngStream::new(1, 0)).unwrap();
    let ne2 = neg_equicorr_uniform(5, 9_000, &RngStream::new(1, 0)).unwrap();
    assert_eq!(ne1, ne2);
}

#[test]
fn bernoulli_vectors_reproduce_the_certificate() {
    let s = sample_bern_vector(&p2_certificate(), 200_000, &RngStream::new(1, 0));
    for col in s.columns() {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }
    let raw = |i: usize, j: usize| {
        let (x, y) = (s.column(i), s.column(j));
        let agree = x.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / x.len() as f64;
        2.0 * agree - 1.0
    };
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!((raw(i, j) - p2().get(i, j)).abs() < 0.01, "({i},{j}) {}", raw(i, j));
    }
}

#[test]
fn attained_matrices_match_every_measure_of_the_construction() {
    let cert = p2_certificate();
    let s = attain_kappa(&cert, &QuantileTransform::uniform(), 200_000, &RngStream::new(2, 0)).unwrap();
    assert!(max_err(&spearman_matrix(&s).unwrap(), &p2()) < 0.01);
    assert!(max_err(&blomqvist_matrix(&s).unwrap(), &p2()) < 0.01);
    let normal = attain_kappa(&cert, &QuantileTransform::standard_normal(), 200_000, &RngStream::new(3, 0)).unwrap();
    assert!(max_err(&van_der_waerden_matrix(&normal).unwrap(), &p2()) < 0.01);
    for col in normal.columns() {
        let u: Vec<f64> = col.iter().map(|&x| normal_cdf(x)).collect();
        assert!(ks_uniform(u) < 1.95 / (200_000f64).sqrt());
    }
}

#[test]
fn gaussian_copula_known_values() {
    let m = CandidateMatrix::from_upper(2, &[0.5]).unwrap();
    let s = gaussian_attain(&m, 400_000, &RngStream::new(4, 0)).unwrap();
    let beta = blomqvist_matrix(&s).unwrap().get(0, 1);
    let rho_s = spearman_matrix(&s).unwrap().get(0, 1);
    assert!((beta - 1.0 / 3.0).abs() < 0.01, "{beta}");
    assert!((rho_s - 0.482_583_739_530_997_4).abs() < 0.01, "{rho_s}");
}

#[test]
fn hac_kendall_round_trips() {
    let t: HierTree = "(1,2,3);0.5".parse().unwrap();
    let model = calibrate(&t, Family::Clayton, Measure::Tau).unwrap();
    let s = hac_sample(&model, 100_000, &RngStream::new(5, 0));
    assert!(max_err(&kendall_matrix(&s).unwrap(), &t.to_matrix()) < 0.01);

    let g = HacModel::new("(1,2);0.1".parse().unwrap(), Family::Gumbel, vec![10.0 / 9.0], Measure::Tau).unwrap();
    let s = hac_sample(&g, 100_000, &RngStream::new(6, 0));
    assert!((kendall_matrix(&s).unwrap().get(0, 1) - 0.1).abs() < 0.01);
}

#[test]
fn nested_clayton_spearman() {
    let t: HierTree = "((1,2);0.6,(3,4);0.5,5);0.2".parse().unwrap();
    let model = calibrate(&t, Family::Clayton, Measure::Spearman).unwrap();
    let s = hac_sample(&model, 200_000, &RngStream::new(9, 0));
    assert!(max_err(&spearman_matrix(&s).unwrap(), &t.to_matrix()) < 0.01);
    for col in s.columns() {
        assert!(ks_uniform(col) < 1.95 / (200_000f64).sqrt());
    }
}

#[test]
fn models_sample_like_the_direct_samplers() {
    let model = AttainmentModel::bern_mixture(Measure::Spearman, p2_certificate(), QuantileTransform::uniform());
    let a = model.sample(1000, &RngStream::new(8, 0)).unwrap();
    let b = attain_kappa(&p2_certificate(), &QuantileTransform::uniform(), 1000, &RngStream::new(8, 0)).unwrap();
    assert_eq!(a, b);
    assert_eq!(model.dim(), 3);
}

#[test]
fn csv_round_trip() {
    let s = neg_equicorr_uniform(3, 50, &RngStream::new(10, 0)).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let back = SampleMatrix::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn certificate_from_explicit_weights() {
    // half "all agree" (0,0,0), half "first disagrees" (0,1,1)
    let c = BernCertificate::new(3, BTreeMap::from([(1u64, 0.5), (4u64, 0.5)])).unwrap();
    let want = CandidateMatrix::from_upper(3, &[0.0, 0.0, 1.0]).unwrap();
    assert_eq!(c.reconstruct(), *want.as_matrix());
}
