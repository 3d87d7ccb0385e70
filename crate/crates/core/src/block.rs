//! Block-homogeneous correlation matrices.
//!
//! Variables come in `S` groups of sizes `d_1, …, d_S`. Pairs inside group
//! `s` share the value `ρ_ss` and pairs across groups `s ≠ t` share `ρ_st`.
//! Such a matrix is stored with `O(S²)` numbers and most questions about it
//! reduce to `S × S` matrices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bern::{is_bern_half_compatible, BernCertificate, BernError, BernVerdict};
use crate::matrix::{is_psd, CandidateMatrix, LowerTriangular, Matrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("invalid block specification: {0}")]
    InvalidSpec(String),
    #[error("cannot parse block specification: {0}")]
    Parse(String),
    #[error("not positive definite: pivot {pivot} at position {index} of group {group}")]
    NotPositiveDefinite { group: usize, index: usize, pivot: f64 },
    #[error("degenerate Schur complement in group {group}: denominator {value}")]
    DegenerateSchur { group: usize, value: f64 },
    #[error("1 + (d_s - 1) rho_ss = {value} is not positive for group {group}")]
    DenominatorNonpositive { group: usize, value: f64 },
    #[error(transparent)]
    Bern(#[from] BernError),
}

/// Group sizes, within-group values and the row-major upper triangle of
/// between-group values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockSpecRepr", into = "BlockSpecRepr")]
pub struct BlockSpec {
    sizes: Vec<usize>,
    within: Vec<f64>,
    between: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BlockSpecRepr {
    sizes: Vec<usize>,
    within: Vec<f64>,
    between: Vec<f64>,
}

impl TryFrom<BlockSpecRepr> for BlockSpec {
    type Error = BlockError;

    fn try_from(r: BlockSpecRepr) -> Result<Self, BlockError> {
        Self::new(r.sizes, r.within, r.between)
    }
}

impl From<BlockSpec> for BlockSpecRepr {
    fn from(s: BlockSpec) -> Self {
        Self { sizes: s.sizes, within: s.within, between: s.between }
    }
}

impl BlockSpec {
    pub fn new(sizes: Vec<usize>, within: Vec<f64>, between: Vec<f64>) -> Result<Self, BlockError> {
        let s = sizes.len();
        if s == 0 {
            return Err(BlockError::InvalidSpec("at least one group is required".into()));
        }
        if sizes.contains(&0) {
            return Err(BlockError::InvalidSpec("group sizes must be positive".into()));
        }
        if within.len() != s {
            return Err(BlockError::InvalidSpec(format!("{s} groups but {} within values", within.len())));
        }
        if between.len() != s * (s - 1) / 2 {
            return Err(BlockError::InvalidSpec(format!(
                "{s} groups need {} between values, got {}",
                s * (s - 1) / 2,
                between.len()
            )));
        }
        if let Some(v) = within.iter().chain(&between).find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(BlockError::InvalidSpec(format!("value {v} outside [-1, 1]")));
        }
        Ok(Self { sizes, within, between })
    }

    /// Number of groups `S`.
    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn within(&self) -> &[f64] {
        &self.within
    }

    /// Total dimension `d = Σ d_s`.
    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// `ρ_st`; for `s == t` the within value.
    pub fn value(&self, s: usize, t: usize) -> f64 {
        if s == t {
            return self.within[s];
        }
        let (a, b) = if s < t { (s, t) } else { (t, s) };
        let n = self.groups();
        self.between[a * (2 * n - a - 1) / 2 + (b - a - 1)]
    }

    /// Group index of every variable.
    pub fn membership(&self) -> Vec<usize> {
        self.sizes.iter().enumerate().flat_map(|(s, &k)| std::iter::repeat_n(s, k)).collect()
    }

    /// Offset of the first variable of each group.
    pub fn offsets(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .scan(0, |acc, &k| {
                let o = *acc;
                *acc += k;
                Some(o)
            })
            .collect()
    }
}

impl FromStr for BlockSpec {
    type Err = BlockError;

    /// `sizes=4,3,2; within=0.4,0.3,0.2; between=0.1,0.1,0.15`; fields may
    /// also be separated by newlines.
    fn from_str(text: &str) -> Result<Self, BlockError> {
        let (mut sizes, mut within, mut between) = (None, None, None);
        for field in text.split([';', '\n']).map(str::trim).filter(|f| !f.is_empty() && !f.starts_with('#')) {
            let (key, val) = field
                .split_once('=')
                .ok_or_else(|| BlockError::Parse(format!("expected key=value, found {field:?}")))?;
            let nums = || -> Result<Vec<f64>, BlockError> {
                val.split(',')
                    .map(str::trim)
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<f64>().map_err(|e| BlockError::Parse(format!("{key}: {t:?}: {e}"))))
                    .collect()
            };
            match key.trim() {
                "sizes" => {
                    let v = val
                        .split(',')
                        .map(str::trim)
                        .filter(|t| !t.is_empty())
                        .map(|t| t.parse::<usize>().map_err(|e| BlockError::Parse(format!("sizes: {t:?}: {e}"))))
                        .collect::<Result<Vec<_>, _>>()?;
                    sizes = Some(v);
                }
                "within" => within = Some(nums()?),
                "between" => between = Some(nums()?),
                other => return Err(BlockError::Parse(format!("unknown field {other:?}"))),
            }
        }
        let sizes = sizes.ok_or_else(|| BlockError::Parse("missing `sizes`".into()))?;
        let within = within.ok_or_else(|| BlockError::Parse("missing `within`".into()))?;
        Self::new(sizes, within, between.unwrap_or_default())
    }
}

impl fmt::Display for BlockSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        let sizes = self.sizes.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
        write!(f, "sizes={sizes}; within={}; between={}", join(&self.within), join(&self.between))
    }
}

/// The dense `d × d` matrix.
pub fn expand(spec: &BlockSpec) -> CandidateMatrix {
    let g = spec.membership();
    let d = g.len();
    let m = Matrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { spec.value(g[i], g[j]) });
    CandidateMatrix::validate(&m, 0.0).expect("block values lie in [-1, 1]")
}

/// `φ(P)`: diagonal `ρ̃_ss = (1 + (d_s − 1)ρ_ss)/d_s`, off-diagonal `ρ_st`.
pub fn block_average(spec: &BlockSpec) -> Matrix {
    let s = spec.groups();
    Matrix::from_fn(s, s, |a, b| {
        if a == b {
            let k = spec.sizes[a] as f64;
            (1.0 + (k - 1.0) * spec.within[a]) / k
        } else {
            spec.value(a, b)
        }
    })
}

/// Positive semi-definiteness of the expanded matrix, decided on `φ(P)`.
pub fn block_psd(spec: &BlockSpec, tol: f64) -> bool {
    is_psd(&block_average(spec), tol)
}

/// Compressed Schur complement before eliminating a group: for each
/// remaining group `t` the diagonal value, the within-group off-diagonal
/// value, and the between-group values.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedState {
    /// Indices of the remaining groups (the first is eliminated next).
    pub groups: Vec<usize>,
    pub diag: Vec<f64>,
    pub within: Vec<f64>,
    /// `between[(a, b)]` for remaining positions `a ≠ b`; the diagonal is unused.
    pub between: Matrix,
}

/// Compressed Cholesky factor of a block matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockCholeskyFactor {
    /// Per group: diagonal entries `l̃_1, …, l̃_{d_s}`.
    pub diag: Vec<Vec<f64>>,
    /// Per group: value `l_j` shared by column `j` below the diagonal, `j < d_s − 1`.
    pub sub: Vec<Vec<f64>>,
    /// `cols[s][m − 1]`: value shared by each column of the block of group
    /// `s + m` under group `s`; length `d_s`.
    pub cols: Vec<Vec<Vec<f64>>>,
}

fn cholesky_impl(
    spec: &BlockSpec,
    mut trace: Option<&mut Vec<ReducedState>>,
) -> Result<BlockCholeskyFactor, BlockError> {
    let n = spec.groups();
    let mut diag_val: Vec<f64> = vec![1.0; n];
    let mut within: Vec<f64> = spec.within.clone();
    let mut between = Matrix::from_fn(n, n, |a, b| if a == b { 0.0 } else { spec.value(a, b) });

    let mut factor = BlockCholeskyFactor { diag: Vec::new(), sub: Vec::new(), cols: Vec::new() };
    for s in 0..n {
        if let Some(t) = trace.as_deref_mut() {
            let rest: Vec<usize> = (s..n).collect();
            t.push(ReducedState {
                groups: rest.clone(),
                diag: diag_val[s..].to_vec(),
                within: within[s..].to_vec(),
                between: Matrix::from_fn(n - s, n - s, |a, b| if a == b { 0.0 } else { between[(s + a, s + b)] }),
            });
        }
        let k = spec.sizes[s];
        let (a, b) = (diag_val[s], within[s]);

        let mut lt = Vec::with_capacity(k);
        let mut l = Vec::with_capacity(k.saturating_sub(1));
        let mut acc = 0.0; // Σ_{i<j} l_i²
        for j in 0..k {
            let pivot = a - acc;
            if !(pivot > 0.0) {
                return Err(BlockError::NotPositiveDefinite { group: s, index: j, pivot });
            }
            let ltj = pivot.sqrt();
            lt.push(ltj);
            if j + 1 < k {
                let lj = (b - acc) / ltj;
                l.push(lj);
                acc += lj * lj;
            }
        }

        let mut cols = Vec::with_capacity(n - s - 1);
        for t in s + 1..n {
            let rho = between[(t, s)];
            let mut c = Vec::with_capacity(k);
            let mut acc = 0.0; // Σ_{i<j} c_i l_i
            for j in 0..k {
                let cj = (rho - acc) / lt[j];
                c.push(cj);
                if j + 1 < k {
                    acc += cj * l[j];
                }
            }
            cols.push(c);
        }

        let den = a + (k as f64 - 1.0) * b;
        if s + 1 < n {
            if !(den > 1e-12) {
                return Err(BlockError::DegenerateSchur { group: s, value: den });
            }
            let kf = k as f64;
            for t in s + 1..n {
                let shift = kf * between[(t, s)] * between[(t, s)] / den;
                diag_val[t] -= shift;
                within[t] -= shift;
                for u in t + 1..n {
                    let v = between[(t, u)] - kf * between[(t, s)] * between[(u, s)] / den;
                    between[(t, u)] = v;
                    between[(u, t)] = v;
                }
            }
        }
        factor.diag.push(lt);
        factor.sub.push(l);
        factor.cols.push(cols);
    }
    Ok(factor)
}

/// Cholesky factor of `expand(spec)` in `O(S²·d)` time and `O(S·d)` memory.
pub fn block_cholesky(spec: &BlockSpec) -> Result<BlockCholeskyFactor, BlockError> {
    cholesky_impl(spec, None)
}

/// As [`block_cholesky`], also returning the reduced state before each group
/// is eliminated.
pub fn block_cholesky_traced(spec: &BlockSpec) -> Result<(BlockCholeskyFactor, Vec<ReducedState>), BlockError> {
    let mut trace = Vec::new();
    let f = cholesky_impl(spec, Some(&mut trace))?;
    Ok((f, trace))
}

/// Dense lower-triangular assembly of a compressed factor.
pub fn expand_factor(f: &BlockCholeskyFactor, spec: &BlockSpec) -> LowerTriangular {
    let g = spec.membership();
    let off = spec.offsets();
    let d = g.len();
    let m = Matrix::from_fn(d, d, |r, c| {
        let (t, s) = (g[r], g[c]);
        let (i, k) = (r - off[t], c - off[s]);
        if t == s {
            match i.cmp(&k) {
                std::cmp::Ordering::Equal => f.diag[s][k],
                std::cmp::Ordering::Greater => f.sub[s][k],
                std::cmp::Ordering::Less => 0.0,
            }
        } else if t > s {
            f.cols[s][t - s - 1][k]
        } else {
            0.0
        }
    });
    LowerTriangular::new(m).expect("assembled factor is square")
}

/// The `S × S` matrix `M` with unit diagonal and
/// `m_st = d_s d_t ρ_st / ((1 + (d_s − 1)ρ_ss)(1 + (d_t − 1)ρ_tt))`.
pub fn reduce_spearman(spec: &BlockSpec) -> Result<Matrix, BlockError> {
    let n = spec.groups();
    let den: Vec<f64> = (0..n).map(|s| 1.0 + (spec.sizes[s] as f64 - 1.0) * spec.within[s]).collect();
    if let Some(s) = den.iter().position(|&v| !(v > 0.0)) {
        return Err(BlockError::DenominatorNonpositive { group: s, value: den[s] });
    }
    Ok(Matrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            spec.sizes[a] as f64 * spec.sizes[b] as f64 * spec.value(a, b) / (den[a] * den[b])
        }
    }))
}

/// Why a block matrix is or is not known to be a Spearman's rho matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum SpearmanVerdict {
    /// `d ≤ 9` and the expanded matrix is a correlation matrix.
    CompatibleSmall,
    /// `M` is a symmetric-Bernoulli correlation matrix; the certificate
    /// drives the attaining construction.
    CompatibleViaBernoulli { m: CandidateMatrix, certificate: BernCertificate },
    /// `S ≤ 9` and `M` is a correlation matrix.
    CompatibleViaReduction { m: Matrix },
    /// The expanded matrix is not positive semi-definite.
    NotPsd,
    /// No decision: the sufficient conditions fail and `d ≥ 10`.
    Inconclusive { m: Option<Matrix>, reason: String },
}

impl SpearmanVerdict {
    pub fn is_compatible(&self) -> Option<bool> {
        match self {
            Self::CompatibleSmall | Self::CompatibleViaBernoulli { .. } | Self::CompatibleViaReduction { .. } => {
                Some(true)
            }
            Self::NotPsd => Some(false),
            Self::Inconclusive { .. } => None,
        }
    }
}

/// Decides Spearman compatibility of `expand(spec)` where possible.
pub fn spearman_verdict(spec: &BlockSpec, tol: f64) -> Result<SpearmanVerdict, BlockError> {
    if !block_psd(spec, tol) {
        return Ok(SpearmanVerdict::NotPsd);
    }
    let m = match reduce_spearman(spec) {
        Ok(m) => m,
        Err(BlockError::DenominatorNonpositive { .. }) if spec.dim() <= 9 => {
            return Ok(SpearmanVerdict::CompatibleSmall)
        }
        Err(BlockError::DenominatorNonpositive { group, value }) => {
            return Ok(SpearmanVerdict::Inconclusive {
                m: None,
                reason: format!("reduction undefined: 1 + (d_s - 1) rho_ss = {value} in group {group}"),
            })
        }
        Err(e) => return Err(e),
    };
    let in_range = m.as_slice().iter().all(|v| v.abs() <= 1.0 + tol);
    if in_range && m.rows() <= crate::bern::DEFAULT_D_MAX {
        let cand = CandidateMatrix::validate(&m, tol).expect("entries checked");
        if let BernVerdict::Compatible(certificate) = is_bern_half_compatible(&cand)? {
            return Ok(SpearmanVerdict::CompatibleViaBernoulli { m: cand, certificate });
        }
    }
    if spec.dim() <= 9 {
        return Ok(SpearmanVerdict::CompatibleSmall);
    }
    if in_range && m.rows() <= 9 && is_psd(&m, tol) {
        return Ok(SpearmanVerdict::CompatibleViaReduction { m });
    }
    let reason = if !in_range {
        "reduced matrix M has entries outside [-1, 1]".to_string()
    } else if m.rows() <= 9 {
        "reduced matrix M is not positive semi-definite".to_string()
    } else {
        "M is not a symmetric-Bernoulli correlation matrix and S >= 10".to_string()
    };
    Ok(SpearmanVerdict::Inconclusive { m: Some(m), reason })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::cholesky;

    fn paper_spec() -> BlockSpec {
        "sizes=4,3,2; within=0.4,0.3,0.2; between=0.1,0.1,0.15".parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        let s = paper_spec();
        assert_eq!((s.groups(), s.dim()), (3, 9));
        assert_eq!(s.value(0, 1), 0.1);
        assert_eq!(s.value(2, 1), 0.15);
        assert_eq!(s.to_string().parse::<BlockSpec>().unwrap(), s);
        assert!("sizes=2; within=1.5".parse::<BlockSpec>().is_err());
        assert!("sizes=2,2; within=0.1,0.1".parse::<BlockSpec>().is_err());
        assert!("sizes=0; within=0.1".parse::<BlockSpec>().is_err());
        assert_eq!("sizes=2\nwithin=0.7\n".parse::<BlockSpec>().unwrap().value(0, 0), 0.7);
    }

    #[test]
    fn expand_small_cases() {
        let s = BlockSpec::new(vec![2], vec![0.7], vec![]).unwrap();
        assert_eq!(expand(&s).as_matrix().to_rows(), vec![vec![1.0, 0.7], vec![0.7, 1.0]]);
        let z = BlockSpec::new(vec![2, 3], vec![0.0, 0.0], vec![0.0]).unwrap();
        assert_eq!(expand(&z).as_matrix(), &Matrix::identity(5));
        let p = expand(&paper_spec());
        assert_eq!(p.get(0, 3), 0.4);
        assert_eq!(p.get(4, 6), 0.3);
        assert_eq!(p.get(7, 8), 0.2);
        assert_eq!(p.get(3, 4), 0.1);
        assert_eq!(p.get(0, 8), 0.1);
        assert_eq!(p.get(6, 7), 0.15);
    }

    #[test]
    fn block_average_values() {
        let phi = block_average(&paper_spec());
        assert!((phi[(0, 0)] - 0.55).abs() < 1e-15);
        assert!((phi[(1, 1)] - 1.6 / 3.0).abs() < 1e-15);
        assert!((phi[(2, 2)] - 0.6).abs() < 1e-15);
        assert_eq!(phi[(1, 2)], 0.15);
        assert!(block_psd(&paper_spec(), 1e-9));
        assert!(!block_psd(&BlockSpec::new(vec![3], vec![-0.6], vec![]).unwrap(), 1e-9));
    }

    #[test]
    fn cholesky_matches_dense() {
        let spec = paper_spec();
        let f = block_cholesky(&spec).unwrap();
        let dense = cholesky(expand(&spec).as_matrix()).unwrap();
        assert!(expand_factor(&f, &spec).as_matrix().max_abs_diff(dense.as_matrix()) < 1e-12);
    }

    #[test]
    fn reduction_values() {
        let m = reduce_spearman(&paper_spec()).unwrap();
        assert!((m[(0, 1)] - 0.75 / 2.2).abs() < 1e-15);
        assert!((m[(0, 2)] - 0.8 / 2.64).abs() < 1e-15);
        assert!((m[(1, 2)] - 0.9 / 1.92).abs() < 1e-15);
        let ones = BlockSpec::new(vec![1, 1, 1], vec![0.0; 3], vec![0.2, -0.1, 0.3]).unwrap();
        assert_eq!(&reduce_spearman(&ones).unwrap(), expand(&ones).as_matrix());
    }

    #[test]
    fn verdicts() {
        assert_eq!(spearman_verdict(&paper_spec(), 1e-9).unwrap().is_compatible(), Some(true));
        let bad = BlockSpec::new(vec![3], vec![-0.6], vec![]).unwrap();
        assert_eq!(spearman_verdict(&bad, 1e-9).unwrap(), SpearmanVerdict::NotPsd);
    }
}
