//! Symmetric-Bernoulli compatibility.
//!
//! A correlation matrix is the correlation matrix of some random vector with
//! Bern(1/2) margins exactly when it lies in the convex hull of the matrices
//! `b ↦ (2·𝟙{b_i = b_j} − 1)` over bit vectors `b` with `b_1 = 0`. These are
//! also exactly the attainable Blomqvist's beta matrices. Membership is a
//! phase-I linear program over `2^(d−1)` mixture weights.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{CandidateMatrix, Matrix};

/// Largest dimension accepted unless configured otherwise.
pub const DEFAULT_D_MAX: usize = 20;
/// Objective values at or below this count as zero.
pub const ZERO_OBJECTIVE: f64 = 1e-9;
/// Slack on the tetrahedron inequalities.
pub const TETRAHEDRON_TOL: f64 = 1e-12;

const ITERATION_CAP: usize = 1_000_000;
const REFACTOR_EVERY: usize = 64;
const PRICE_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BernError {
    #[error("index l = {l} is outside 1..=2^(d-1) for d = {d}")]
    OutOfRange { l: u64, d: usize },
    #[error("dimension {d} exceeds the configured maximum {max}")]
    DimensionTooLarge { d: usize, max: usize },
    #[error("dimension must be at least {min}, got {d}")]
    DimensionTooSmall { d: usize, min: usize },
    #[error("invalid right-hand side: {0}")]
    InvalidLambda(String),
    #[error("simplex failed: {0}")]
    NumericalFailure(String),
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("certificate line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Bits `(b_1, …, b_d)` of `l = 1 + Σ b_j 2^(d−j)`; `b_1` is always 0.
pub fn binary_expansion(l: u64, d: usize) -> Result<Vec<u8>, BernError> {
    if d == 0 || d > 64 || l == 0 || l > 1u64 << (d - 1) {
        return Err(BernError::OutOfRange { l, d });
    }
    let k = l - 1;
    Ok((0..d).map(|j| ((k >> (d - 1 - j)) & 1) as u8).collect())
}

/// Inverse of [`binary_expansion`].
pub fn binary_index(bits: &[u8]) -> Result<u64, BernError> {
    let d = bits.len();
    if d == 0 || d > 64 || bits[0] != 0 || bits.iter().any(|&b| b > 1) {
        return Err(BernError::OutOfRange { l: 0, d });
    }
    Ok(1 + bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b)))
}

/// Row order of the pair constraints: `(1,2), (1,3), (2,3), (1,4), …`, 0-based.
pub fn pair_order(d: usize) -> Vec<(usize, usize)> {
    (1..d).flat_map(|j| (0..j).map(move |i| (i, j))).collect()
}

/// `λ_ij = (ρ_ij + 1)/2` in [`pair_order`], followed by the final 1.
pub fn lambda_vector(m: &CandidateMatrix) -> Vec<f64> {
    let mut lambda: Vec<f64> = pair_order(m.dim()).into_iter().map(|(i, j)| (m.get(i, j) + 1.0) / 2.0).collect();
    lambda.push(1.0);
    lambda
}

fn check_dim(d: usize, d_max: usize) -> Result<(), BernError> {
    if d < 2 {
        return Err(BernError::DimensionTooSmall { d, min: 2 });
    }
    if d > d_max {
        return Err(BernError::DimensionTooLarge { d, max: d_max });
    }
    Ok(())
}

/// The constraint matrix of the phase-I program, column by column.
pub trait ConstraintColumns {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// Writes column `j` into `out` (length [`rows`](Self::rows)).
    fn column(&self, j: usize, out: &mut [f64]);
    /// `yᵀ a_j`.
    fn dot(&self, j: usize, y: &[f64], scratch: &mut [f64]) -> f64 {
        self.column(j, scratch);
        scratch.iter().zip(y).map(|(a, b)| a * b).sum()
    }
}

impl ConstraintColumns for Matrix {
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }

    fn cols(&self) -> usize {
        Matrix::cols(self)
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self[(i, j)];
        }
    }
}

/// The `D` matrix of dimension `d` generated on demand, so that large `d`
/// never materializes all `2^(d−1)` columns.
#[derive(Clone, Debug)]
pub struct CutColumns {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl CutColumns {
    pub fn new(d: usize, d_max: usize) -> Result<Self, BernError> {
        check_dim(d, d_max)?;
        Ok(Self { d, pairs: pair_order(d) })
    }

    fn bit(&self, col: usize, i: usize) -> usize {
        (col >> (self.d - 1 - i)) & 1
    }
}

impl ConstraintColumns for CutColumns {
    fn rows(&self) -> usize {
        self.pairs.len() + 1
    }

    fn cols(&self) -> usize {
        1 << (self.d - 1)
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        for (o, &(a, b)) in out.iter_mut().zip(&self.pairs) {
            *o = f64::from(u8::from(self.bit(j, a) == self.bit(j, b)));
        }
        out[self.pairs.len()] = 1.0;
    }

    fn dot(&self, j: usize, y: &[f64], _scratch: &mut [f64]) -> f64 {
        let mut s = y[self.pairs.len()];
        for (yp, &(a, b)) in y.iter().zip(&self.pairs) {
            if self.bit(j, a) == self.bit(j, b) {
                s += yp;
            }
        }
        s
    }
}

/// The 0/1 matrix `D` with entries `𝟙{b_i(l) = b_j(l)}` and a final all-ones row.
pub fn build_d_matrix(d: usize) -> Result<Matrix, BernError> {
    build_d_matrix_capped(d, DEFAULT_D_MAX)
}

pub fn build_d_matrix_capped(d: usize, d_max: usize) -> Result<Matrix, BernError> {
    let cols = CutColumns::new(d, d_max)?;
    let (m, n) = (cols.rows(), cols.cols());
    let mut out = Matrix::zeros(m, n);
    let mut buf = vec![0.0; m];
    for j in 0..n {
        cols.column(j, &mut buf);
        for (i, v) in buf.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

/// Optimal solution of the phase-I program.
#[derive(Clone, Debug, PartialEq)]
pub struct LPOutcome {
    pub objective: f64,
    pub alpha: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
}

/// Inverts a dense square matrix by Gauss-Jordan elimination with partial pivoting.
fn invert(a: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut lhs = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for c in 0..m {
        let p = (c..m).max_by(|&x, &y| lhs[x * m + c].abs().total_cmp(&lhs[y * m + c].abs()))?;
        if lhs[p * m + c].abs() < 1e-12 {
            return None;
        }
        if p != c {
            for k in 0..m {
                lhs.swap(p * m + k, c * m + k);
                inv.swap(p * m + k, c * m + k);
            }
        }
        let piv = lhs[c * m + c];
        for k in 0..m {
            lhs[c * m + k] /= piv;
            inv[c * m + k] /= piv;
        }
        for r in 0..m {
            if r != c {
                let f = lhs[r * m + c];
                if f != 0.0 {
                    for k in 0..m {
                        lhs[r * m + k] -= f * lhs[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Solves `min Σ z` subject to `D α + z = λ`, `α, z ≥ 0` by the revised
/// primal simplex method with Bland's rule, starting from `(α, z) = (0, λ)`.
///
/// Variables are indexed `α_0, …, α_{n−1}, z_0, …, z_{m−1}`; Bland's rule
/// enters the lowest-indexed improving variable and breaks ratio ties by the
/// lowest-indexed leaving variable.
pub fn phase1_lp<C: ConstraintColumns + ?Sized>(cols: &C, lambda: &[f64]) -> Result<LPOutcome, BernError> {
    let (m, n) = (cols.rows(), cols.cols());
    if lambda.len() != m {
        return Err(BernError::InvalidLambda(format!("expected {m} components, got {}", lambda.len())));
    }
    if let Some(v) = lambda.iter().find(|v| !(-1e-12..=1.0 + 1e-12).contains(*v)) {
        return Err(BernError::InvalidLambda(format!("component {v} outside [0, 1]")));
    }
    let rhs: Vec<f64> = lambda.iter().map(|v| v.clamp(0.0, 1.0)).collect();

    // basis[i] is the variable basic in row i
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut binv = vec![0.0; m * m];
    for i in 0..m {
        binv[i * m + i] = 1.0;
    }
    let mut xb = rhs.clone();
    let mut is_basic = vec![false; n + m];
    for &b in &basis {
        is_basic[b] = true;
    }

    let mut col = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut dir = vec![0.0; m];
    let column_of = |j: usize, out: &mut [f64]| {
        if j < n {
            cols.column(j, out);
        } else {
            out.fill(0.0);
            out[j - n] = 1.0;
        }
    };

    let mut iterations = 0;
    loop {
        let objective: f64 = basis.iter().zip(&xb).filter(|(&b, _)| b >= n).map(|(_, x)| x).sum();
        if objective <= 1e-15 {
            break;
        }
        if iterations >= ITERATION_CAP {
            return Err(BernError::NumericalFailure(format!("no optimum after {ITERATION_CAP} pivots")));
        }

        // duals y = c_Bᵀ B⁻¹
        y.fill(0.0);
        for (i, &b) in basis.iter().enumerate() {
            if b >= n {
                for k in 0..m {
                    y[k] += binv[i * m + k];
                }
            }
        }

        let entering = (0..n + m).find(|&j| {
            if is_basic[j] {
                return false;
            }
            let reduced = if j < n { -cols.dot(j, &y, &mut scratch) } else { 1.0 - y[j - n] };
            reduced < -PRICE_TOL
        });
        let Some(q) = entering else { break };

        column_of(q, &mut col);
        for i in 0..m {
            dir[i] = (0..m).map(|k| binv[i * m + k] * col[k]).sum();
        }

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            if dir[i] > PIVOT_TOL {
                let ratio = xb[i].max(0.0) / dir[i];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((r, theta)) = leave else {
            return Err(BernError::NumericalFailure("unbounded direction in a bounded program".into()));
        };

        for i in 0..m {
            if i != r {
                xb[i] -= theta * dir[i];
            }
        }
        xb[r] = theta;
        let piv = dir[r];
        for k in 0..m {
            binv[r * m + k] /= piv;
        }
        for i in 0..m {
            if i != r && dir[i] != 0.0 {
                let f = dir[i];
                for k in 0..m {
                    binv[i * m + k] -= f * binv[r * m + k];
                }
            }
        }
        is_basic[basis[r]] = false;
        is_basic[q] = true;
        basis[r] = q;
        iterations += 1;

        if iterations % REFACTOR_EVERY == 0 {
            let mut bmat = vec![0.0; m * m];
            for (c, &b) in basis.iter().enumerate() {
                column_of(b, &mut col);
                for k in 0..m {
                    bmat[k * m + c] = col[k];
                }
            }
            binv = invert(&bmat, m).ok_or_else(|| BernError::NumericalFailure("singular basis".into()))?;
            for i in 0..m {
                xb[i] = (0..m).map(|k| binv[i * m + k] * rhs[k]).sum::<f64>().max(0.0);
            }
        }
    }

    let mut alpha = vec![0.0; n];
    let mut z = vec![0.0; m];
    for (&b, &x) in basis.iter().zip(&xb) {
        let x = x.max(0.0);
        if b < n {
            alpha[b] = x;
        } else {
            z[b - n] = x;
        }
    }
    Ok(LPOutcome { objective: z.iter().sum(), alpha, z, iterations })
}

/// Mixture weights `α_l` over the two-point distributions `±b(l)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CertificateRepr", into = "CertificateRepr")]
pub struct BernCertificate {
    d: usize,
    weights: BTreeMap<u64, f64>,
}

/// Serialized form: weights as `[l, α_l]` pairs, validated on load.
#[derive(Serialize, Deserialize)]
struct CertificateRepr {
    d: usize,
    weights: Vec<(u64, f64)>,
}

impl TryFrom<CertificateRepr> for BernCertificate {
    type Error = BernError;

    fn try_from(r: CertificateRepr) -> Result<Self, BernError> {
        Self::new(r.d, r.weights.into_iter().collect())
    }
}

impl From<BernCertificate> for CertificateRepr {
    fn from(c: BernCertificate) -> Self {
        Self { d: c.d, weights: c.weights.into_iter().collect() }
    }
}

impl BernCertificate {
    /// Validates `α_l ≥ 0`, `1 ≤ l ≤ 2^(d−1)` and `Σ α_l = 1` within 1e−9,
    /// then drops zero weights and rescales the sum to exactly 1.
    pub fn new(d: usize, weights: BTreeMap<u64, f64>) -> Result<Self, BernError> {
        if d == 0 || d > 63 {
            return Err(BernError::InvalidCertificate(format!("unsupported dimension {d}")));
        }
        let top = 1u64 << (d - 1);
        let mut total = 0.0;
        for (&l, &a) in &weights {
            if l == 0 || l > top {
                return Err(BernError::OutOfRange { l, d });
            }
            if !(a >= 0.0) || !a.is_finite() {
                return Err(BernError::InvalidCertificate(format!("weight {a} for l = {l}")));
            }
            total += a;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(BernError::InvalidCertificate(format!("weights sum to {total}")));
        }
        let weights = weights.into_iter().filter(|&(_, a)| a > 0.0).map(|(l, a)| (l, a / total)).collect();
        Ok(Self { d, weights })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn weights(&self) -> &BTreeMap<u64, f64> {
        &self.weights
    }

    /// Correlation matrix of the mixture: `Σ_l α_l (2·𝟙{b_i(l) = b_j(l)} − 1)`.
    pub fn reconstruct(&self) -> Matrix {
        let d = self.d;
        let mut out = Matrix::zeros(d, d);
        for (&l, &a) in &self.weights {
            let b = binary_expansion(l, d).expect("validated index");
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += a * if b[i] == b[j] { 1.0 } else { -1.0 };
                }
            }
        }
        out
    }

    /// `d=<d>` followed by `l,alpha_l` lines in increasing `l`.
    pub fn to_text(&self) -> String {
        let mut s = format!("d={}\n", self.d);
        for (l, a) in &self.weights {
            let _ = writeln!(s, "{l},{a:?}");
        }
        s
    }

    pub fn parse_text(text: &str) -> Result<Self, BernError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let perr = |line: usize, message: String| BernError::Parse { line: line + 1, message };
        let (n0, head) = lines.next().ok_or_else(|| perr(0, "empty certificate".into()))?;
        let d = head
            .trim()
            .strip_prefix("d=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| perr(n0, format!("expected `d=<d>`, found {head:?}")))?;
        let mut weights = BTreeMap::new();
        let mut last = 0;
        for (n, line) in lines {
            let (l, a) = line.split_once(',').ok_or_else(|| perr(n, "expected `l,alpha`".into()))?;
            let l: u64 = l.trim().parse().map_err(|e| perr(n, format!("{e}")))?;
            let a: f64 = a.trim().parse().map_err(|e| perr(n, format!("{e}")))?;
            if l <= last {
                return Err(perr(n, "indices must increase".into()));
            }
            last = l;
            weights.insert(l, a);
        }
        Self::new(d, weights)
    }
}

/// Result of a symmetric-Bernoulli compatibility check.
#[derive(Clone, Debug, PartialEq)]
pub enum BernVerdict {
    Compatible(BernCertificate),
    Incompatible { objective: f64 },
}

impl BernVerdict {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Self::Compatible(_))
    }
}

/// `−1 ≤ ρ12 + ρ13 + ρ23 ≤ 1 + 2·min ρ`, each side with slack [`TETRAHEDRON_TOL`].
pub fn tetrahedron_check(r12: f64, r13: f64, r23: f64) -> bool {
    let s = r12 + r13 + r23;
    s >= -1.0 - TETRAHEDRON_TOL && s <= 1.0 + 2.0 * r12.min(r13).min(r23) + TETRAHEDRON_TOL
}

fn closed_form(d: usize, raw: &[(u64, f64)]) -> BernCertificate {
    let total: f64 = raw.iter().map(|(_, a)| a.max(0.0)).sum();
    let weights = raw.iter().map(|&(l, a)| (l, a.max(0.0) / total)).collect();
    BernCertificate::new(d, weights).expect("closed-form weights are valid")
}

/// Decides membership with the default dimension cap.
pub fn is_bern_half_compatible(m: &CandidateMatrix) -> Result<BernVerdict, BernError> {
    is_bern_half_compatible_capped(m, DEFAULT_D_MAX)
}

/// Decides membership: `d ≤ 2` always holds, `d = 3` is settled by the
/// tetrahedron inequalities, larger `d` by the phase-I program.
pub fn is_bern_half_compatible_capped(m: &CandidateMatrix, d_max: usize) -> Result<BernVerdict, BernError> {
    let d = m.dim();
    if d > d_max {
        return Err(BernError::DimensionTooLarge { d, max: d_max });
    }
    match d {
        1 => return Ok(BernVerdict::Compatible(closed_form(1, &[(1, 1.0)]))),
        2 => {
            let r = m.get(0, 1);
            return Ok(BernVerdict::Compatible(closed_form(2, &[(1, (1.0 + r) / 2.0), (2, (1.0 - r) / 2.0)])));
        }
        3 => {
            let (a, b, c) = (m.get(0, 1), m.get(0, 2), m.get(1, 2));
            if tetrahedron_check(a, b, c) {
                return Ok(BernVerdict::Compatible(closed_form(
                    3,
                    &[
                        (1, (1.0 + a + b + c) / 4.0),
                        (2, (1.0 + a - b - c) / 4.0),
                        (3, (1.0 - a + b - c) / 4.0),
                        (4, (1.0 - a - b + c) / 4.0),
                    ],
                )));
            }
            let out = phase1_lp(&CutColumns::new(3, d_max)?, &lambda_vector(m))?;
            return Ok(BernVerdict::Incompatible { objective: out.objective });
        }
        _ => {}
    }
    let cols = CutColumns::new(d, d_max)?;
    let out = phase1_lp(&cols, &lambda_vector(m))?;
    if out.objective > ZERO_OBJECTIVE {
        return Ok(BernVerdict::Incompatible { objective: out.objective });
    }
    let weights: BTreeMap<u64, f64> =
        out.alpha.iter().enumerate().filter(|(_, &a)| a > 0.0).map(|(j, &a)| (j as u64 + 1, a)).collect();
    let total: f64 = weights.values().sum();
    let weights = weights.into_iter().map(|(l, a)| (l, a / total)).collect();
    Ok(BernVerdict::Compatible(BernCertificate::new(d, weights)?))
}

/// Necessary condition for a Kendall's tau matrix: every such matrix is a
/// symmetric-Bernoulli correlation matrix. `false` rules `m` out; `true` is
/// inconclusive.
pub fn kendall_necessary(m: &CandidateMatrix) -> Result<bool, BernError> {
    Ok(is_bern_half_compatible(m)?.is_compatible())
}
