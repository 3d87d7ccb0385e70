use rayon::prelude::*;
use thiserror::Error;

use super::QuantileTransform;
use crate::matrix::{CandidateMatrix, Matrix};
use crate::sample::SampleMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("need at least 2 observations, got {0}")]
    TooFewSamples(usize),
    #[error("column {column} is constant")]
    ConstantColumn { column: usize },
    #[error("non-finite value in row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
}

fn check(samples: &SampleMatrix) -> Result<(), EstimateError> {
    if samples.n() < 2 {
        return Err(EstimateError::TooFewSamples(samples.n()));
    }
    for (i, row) in samples.rows().enumerate() {
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(EstimateError::NonFinite { row: i, column: j });
        }
    }
    for j in 0..samples.d() {
        let first = samples.row(0)[j];
        if samples.rows().all(|r| r[j] == first) {
            return Err(EstimateError::ConstantColumn { column: j });
        }
    }
    Ok(())
}

/// Ranks `1..=n` of `x`; tied values are ranked in order of appearance.
pub fn ranks(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0; x.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    r
}

fn has_ties(x: &[f64]) -> bool {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}

fn warn_ties(samples: &SampleMatrix, columns: &[Vec<f64>]) {
    let tied: Vec<usize> = (0..samples.d()).filter(|&j| has_ties(&columns[j])).collect();
    if !tied.is_empty() {
        log::warn!("ties in columns {tied:?}; ranks broken by order of appearance");
    }
}

/// Fills a symmetric matrix with unit diagonal from a pairwise statistic.
fn pairwise<F>(d: usize, stat: F) -> Result<CandidateMatrix, EstimateError>
where
    F: Fn(usize, usize) -> Result<f64, EstimateError> + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs.par_iter().map(|&(i, j)| stat(i, j)).collect::<Result<_, _>>()?;
    let mut m = Matrix::identity(d);
    for (&(i, j), v) in pairs.iter().zip(vals) {
        let v = v.clamp(-1.0, 1.0);
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    Ok(CandidateMatrix::validate(&m, 0.0).expect("estimates are symmetric with unit diagonal"))
}

/// `κ_G` estimate: Pearson correlation of the scores `G⁻¹(rank/(n+1))`.
pub fn kappa_matrix(samples: &SampleMatrix, g: &QuantileTransform) -> Result<CandidateMatrix, EstimateError> {
    check(samples)?;
    let n = samples.n();
    let columns = samples.columns();
    warn_ties(samples, &columns);
    let scores: Vec<Vec<f64>> = columns
        .par_iter()
        .map(|c| {
            let s: Vec<f64> = ranks(c).into_iter().map(|r| g.quantile(r as f64 / (n + 1) as f64)).collect();
            let mean = s.iter().sum::<f64>() / n as f64;
            s.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let ss: Vec<f64> = scores.iter().map(|s| s.iter().map(|v| v * v).sum()).collect();
    if let Some(column) = ss.iter().position(|&v| !(v > 0.0)) {
        return Err(EstimateError::ConstantColumn { column });
    }
    pairwise(samples.d(), |i, j| {
        let sxy: f64 = scores[i].iter().zip(&scores[j]).map(|(a, b)| a * b).sum();
        Ok(sxy / (ss[i] * ss[j]).sqrt())
    })
}

/// Spearman's rho estimate (`κ_G` with uniform `G`).
pub fn spearman_matrix(samples: &SampleMatrix) -> Result<CandidateMatrix, EstimateError> {
    kappa_matrix(samples, &QuantileTransform::uniform())
}

/// Van der Waerden's coefficient estimate (`κ_G` with normal `G`).
pub fn van_der_waerden_matrix(samples: &SampleMatrix) -> Result<CandidateMatrix, EstimateError> {
    kappa_matrix(samples, &QuantileTransform::standard_normal())
}

fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

/// Blomqvist's beta estimate from sign agreement about the column medians:
/// `(agree − disagree)/(agree + disagree)` over rows where neither entry
/// equals its median. For even `n` without ties this is
/// `4·(fraction of rows above both medians) − 1`.
pub fn blomqvist_matrix(samples: &SampleMatrix) -> Result<CandidateMatrix, EstimateError> {
    check(samples)?;
    let columns = samples.columns();
    warn_ties(samples, &columns);
    let signs: Vec<Vec<i8>> = columns
        .iter()
        .map(|c| {
            let m = median(c);
            c.iter()
                .map(|&v| {
                    if v > m {
                        1
                    } else if v < m {
                        -1
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect();
    pairwise(samples.d(), |i, j| {
        let (mut agree, mut disagree) = (0u64, 0u64);
        for (a, b) in signs[i].iter().zip(&signs[j]) {
            match a * b {
                1 => agree += 1,
                -1 => disagree += 1,
                _ => {}
            }
        }
        if agree + disagree == 0 {
            return Err(EstimateError::ConstantColumn { column: i });
        }
        Ok((agree as f64 - disagree as f64) / (agree + disagree) as f64)
    })
}

fn tie_pairs(sorted: &[f64]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts inversions of `y` while merge-sorting it.
fn merge_count(y: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = y.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut y[..mid], &mut buf[..mid]) + merge_count(&mut y[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if y[j] < y[i] {
            buf[k] = y[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = y[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&y[i..mid]);
    let k = k + mid - i;
    buf[k..k + n - j].copy_from_slice(&y[j..n]);
    y.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-a of two columns in `O(n log n)`: sort by `(x, y)`, count
/// the discordant pairs as inversions of `y`, and correct for ties.
pub(crate) fn kendall_tau(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tie_pairs(&xs);
    let mut n3 = 0u64;
    let mut start = 0;
    for k in 1..=n {
        if k == n || xs[k] != xs[start] {
            n3 += tie_pairs(&ys[start..k]);
            start = k;
        }
    }
    let mut buf = vec![0.0; n];
    let discordant = merge_count(&mut ys, &mut buf);
    let n2 = tie_pairs(&ys);
    let diff = n0 as i128 - n1 as i128 - n2 as i128 + n3 as i128 - 2 * discordant as i128;
    diff as f64 / n0 as f64
}

/// Kendall's tau estimate (concordant minus discordant pair fraction).
pub fn kendall_matrix(samples: &SampleMatrix) -> Result<CandidateMatrix, EstimateError> {
    check(samples)?;
    let columns = samples.columns();
    warn_ties(samples, &columns);
    pairwise(samples.d(), |i, j| Ok(kendall_tau(&columns[i], &columns[j])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two(x: Vec<f64>, y: Vec<f64>) -> SampleMatrix {
        SampleMatrix::from_columns(&[x, y]).unwrap()
    }

    fn naive_tau(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                let a = (x[i] - x[j]).signum() * f64::from(u8::from(x[i] != x[j]));
                let b = (y[i] - y[j]).signum() * f64::from(u8::from(y[i] != y[j]));
                s += (a * b) as i64;
            }
        }
        s as f64 / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn ranks_are_stable() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3, 1, 4, 2]);
    }

    #[test]
    fn comonotone_and_countermonotone() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let co = two(x.clone(), x.iter().map(|v| v.exp()).collect());
        let counter = two(x, neg);
        assert_eq!(spearman_matrix(&co).unwrap().get(0, 1), 1.0);
        assert!((van_der_waerden_matrix(&counter).unwrap().get(0, 1) + 1.0).abs() < 1e-14);
        assert_eq!(kendall_matrix(&co).unwrap().get(0, 1), 1.0);
        assert_eq!(kendall_matrix(&counter).unwrap().get(0, 1), -1.0);
        assert_eq!(blomqvist_matrix(&co).unwrap().get(0, 1), 1.0);
        assert_eq!(blomqvist_matrix(&counter).unwrap().get(0, 1), -1.0);
    }

    #[test]
    fn constant_column_is_an_error() {
        let s = two(vec![1.0, 2.0, 3.0], vec![5.0; 3]);
        assert_eq!(kendall_matrix(&s), Err(EstimateError::ConstantColumn { column: 1 }));
        assert_eq!(spearman_matrix(&s), Err(EstimateError::ConstantColumn { column: 1 }));
        let one = two(vec![1.0], vec![2.0]);
        assert_eq!(blomqvist_matrix(&one), Err(EstimateError::TooFewSamples(1)));
    }

    #[test]
    fn kendall_with_ties_matches_naive() {
        let x = [1.0, 1.0, 2.0, 2.0, 3.0, 1.0];
        let y = [2.0, 1.0, 2.0, 2.0, 0.0, 1.0];
        assert!((kendall_tau(&x, &y) - naive_tau(&x, &y)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn kendall_agrees_with_quadratic_oracle(
            pairs in prop::collection::vec((0u8..6, 0u8..6), 2..60)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            prop_assert!((kendall_tau(&x, &y) - naive_tau(&x, &y)).abs() < 1e-12);
        }

        #[test]
        fn kappa_ignores_increasing_column_maps(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 3..40)
        ) {
            let cols = vec![
                rows.iter().map(|r| r.0).collect::<Vec<_>>(),
                rows.iter().map(|r| r.1).collect(),
                rows.iter().map(|r| r.2).collect(),
            ];
            let s = SampleMatrix::from_columns(&cols).unwrap();
            prop_assume!(check(&s).is_ok());
            let mut t = s.clone();
            t.map_column(0, f64::exp);
            t.map_column(2, |v| v * v * v + 2.0 * v);
            for g in [QuantileTransform::uniform(), QuantileTransform::standard_normal()] {
                prop_assert_eq!(kappa_matrix(&s, &g).unwrap(), kappa_matrix(&t, &g).unwrap());
            }
        }

        #[test]
        fn kappa_is_location_scale_invariant(
            rows in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3..40),
            a in 0.01f64..100.0,
            b in -100.0f64..100.0,
        ) {
            let s = SampleMatrix::from_columns(&[
                rows.iter().map(|r| r.0).collect(),
                rows.iter().map(|r| r.1).collect(),
            ]).unwrap();
            prop_assume!(check(&s).is_ok());
            let g = QuantileTransform::standard_normal();
            let ga = g.clone().affine(a, b).unwrap();
            let k1 = kappa_matrix(&s, &g).unwrap().get(0, 1);
            let k2 = kappa_matrix(&s, &ga).unwrap().get(0, 1);
            prop_assert!((k1 - k2).abs() < 1e-12);
        }
    }
}
