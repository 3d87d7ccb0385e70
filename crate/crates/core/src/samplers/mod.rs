//! Random vectors that attain given matrices of concordance measures.

mod model;

pub use model::{AttainmentModel, ModelKind, MODEL_VERSION};

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Open01};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::bern::{binary_expansion, BernCertificate};
use crate::block::{reduce_spearman, BlockSpec};
use crate::matrix::{cholesky, psd_root, CandidateMatrix, Matrix, DEFAULT_TOL};
use crate::sample::SampleMatrix;
use crate::transforms::{is_concordance_inducing, QuantileTransform, SYMMETRY_GRID, SYMMETRY_TOL};

/// Rows generated from one derived stream.
const BLOCK_ROWS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("transform is not concordance-inducing: {0}")]
    NotConcordanceInducing(String),
    #[error("matrix is not positive semi-definite")]
    NotPsd,
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("lambda = {lambda} for group {group} is outside (0, 1)")]
    LambdaOutOfRange { group: usize, lambda: f64 },
    #[error("inner certificate does not match the reduced matrix: {0}")]
    InnerNotCompatible(String),
    #[error(transparent)]
    Hierarchy(#[from] crate::hierarchy::HierarchyError),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A reproducible random stream: ChaCha12 keyed by `seed` on stream `stream_id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A child stream with the same seed and a hashed stream id.
    pub fn split(&self, index: u64) -> Self {
        Self { seed: self.seed, stream_id: splitmix64(self.stream_id ^ splitmix64(index)) }
    }

    pub fn generator(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Fills `n` rows of width `d` in parallel; block `b` of [`BLOCK_ROWS`] rows
/// draws from `rng.split(b)`, so the output does not depend on scheduling.
pub(crate) fn sample_rows<F>(n: usize, d: usize, rng: &RngStream, fill: F) -> SampleMatrix
where
    F: Fn(&mut ChaCha12Rng, &mut [f64]) + Sync,
{
    let mut values = vec![0.0; n * d];
    if d > 0 {
        values.par_chunks_mut(BLOCK_ROWS * d).enumerate().for_each(|(b, chunk)| {
            let mut g = rng.split(b as u64).generator();
            for row in chunk.chunks_exact_mut(d) {
                fill(&mut g, row);
            }
        });
    }
    SampleMatrix::new(n, d, values).expect("buffer has n * d entries")
}

pub(crate) fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Precomputed Algorithm 1 draw: pick `l` with probability `α_l`, then
/// `b(l)` or its complement with probability 1/2 each.
struct BernDraw {
    index: WeightedIndex<f64>,
    bits: Vec<Vec<u8>>,
}

impl BernDraw {
    fn new(cert: &BernCertificate) -> Self {
        let (ls, ws): (Vec<u64>, Vec<f64>) = cert.weights().iter().map(|(&l, &a)| (l, a)).unzip();
        let bits = ls.iter().map(|&l| binary_expansion(l, cert.dim()).expect("certificate index")).collect();
        Self { index: WeightedIndex::new(ws).expect("certificate weights are positive"), bits }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u8]) {
        let b = &self.bits[self.index.sample(rng)];
        let flip = u8::from(rng.random_bool(0.5));
        for (o, &bit) in out.iter_mut().zip(b) {
            *o = bit ^ flip;
        }
    }
}

/// Algorithm 1: rows of 0/1 values with Bern(1/2) margins and correlation
/// matrix `cert.reconstruct()`.
pub fn sample_bern_vector(cert: &BernCertificate, n: usize, rng: &RngStream) -> SampleMatrix {
    let draw = BernDraw::new(cert);
    let d = cert.dim();
    sample_rows(n, d, rng, |g, row| {
        let mut bits = vec![0u8; d];
        draw.draw(g, &mut bits);
        for (r, b) in row.iter_mut().zip(bits) {
            *r = f64::from(b);
        }
    })
}

/// `X_j = G⁻¹(B_j U + (1 − B_j)(1 − U))` with `B` from Algorithm 1 and one
/// shared uniform `U`; `κ_G(X) = cert.reconstruct()`.
pub fn attain_kappa(
    cert: &BernCertificate,
    g: &QuantileTransform,
    n: usize,
    rng: &RngStream,
) -> Result<SampleMatrix, SamplerError> {
    is_concordance_inducing(g, SYMMETRY_GRID, SYMMETRY_TOL)
        .map_err(|e| SamplerError::NotConcordanceInducing(e.to_string()))?;
    let draw = BernDraw::new(cert);
    let d = cert.dim();
    Ok(sample_rows(n, d, rng, |r, row| {
        let mut bits = vec![0u8; d];
        draw.draw(r, &mut bits);
        let u = uniform(r);
        for (x, b) in row.iter_mut().zip(bits) {
            *x = if b == 1 { g.quantile(u) } else { g.upper_quantile(u) };
        }
    }))
}

/// A factor `A` with `A Aᵀ = m`: the Cholesky factor, or the symmetric
/// square root when `m` is singular but positive semi-definite.
pub fn gaussian_factor(m: &CandidateMatrix) -> Result<Matrix, SamplerError> {
    match cholesky(m.as_matrix()) {
        Ok(l) => Ok(l.as_matrix().clone()),
        Err(_) => psd_root(m.as_matrix(), DEFAULT_TOL).ok_or(SamplerError::NotPsd),
    }
}

pub(crate) fn sample_gaussian(factor: &Matrix, n: usize, rng: &RngStream) -> SampleMatrix {
    let d = factor.rows();
    sample_rows(n, d, rng, |g, row| {
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(g)).collect();
        for (i, x) in row.iter_mut().enumerate() {
            *x = factor.row(i).iter().zip(&z).map(|(a, b)| a * b).sum();
        }
    })
}

/// Rows `A·z` with `z` standard normal and `A Aᵀ = m`; the van der Waerden
/// matrix of the result is `m`.
pub fn gaussian_attain(m: &CandidateMatrix, n: usize, rng: &RngStream) -> Result<SampleMatrix, SamplerError> {
    Ok(sample_gaussian(&gaussian_factor(m)?, n, rng))
}

const TRIPLE: [[f64; 3]; 3] = [[1.0, 0.5, 0.0], [0.0, 1.0, 0.5], [0.5, 0.0, 1.0]];

/// One row of uniforms summing to `d/2`: a random perfect matching filled
/// antithetically, with one random triple on the cyclic three-segment path
/// when `d` is odd.
pub(crate) fn neg_equicorr_row<R: Rng + ?Sized>(rng: &mut R, perm: &mut [usize], row: &mut [f64]) {
    let d = row.len();
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    perm.shuffle(rng);
    let mut rest = &perm[..];
    if d % 2 == 1 {
        let seg = rng.random_range(0..3);
        let (a, b) = (TRIPLE[seg], TRIPLE[(seg + 1) % 3]);
        let t = uniform(rng);
        for k in 0..3 {
            row[perm[k]] = (1.0 - t) * a[k] + t * b[k];
        }
        rest = &perm[3..];
    }
    for pair in rest.chunks_exact(2) {
        let u = uniform(rng);
        row[pair[0]] = u;
        row[pair[1]] = 1.0 - u;
    }
}

/// Uniform margins with pairwise correlation `−1/(d − 1)`.
pub fn neg_equicorr_uniform(d: usize, n: usize, rng: &RngStream) -> Result<SampleMatrix, SamplerError> {
    if d < 2 {
        return Err(SamplerError::DimensionTooSmall(d));
    }
    Ok(sample_rows(n, d, rng, |g, row| {
        let mut perm = vec![0; d];
        neg_equicorr_row(g, &mut perm, row);
    }))
}

/// `λ_s = (1 + (d_s − 1)ρ_ss)/d_s`, required in `(0, 1)` for groups of size ≥ 2.
pub fn block_lambdas(spec: &BlockSpec) -> Result<Vec<f64>, SamplerError> {
    spec.sizes()
        .iter()
        .zip(spec.within())
        .enumerate()
        .map(|(s, (&k, &r))| {
            let kf = k as f64;
            let lambda = (1.0 + (kf - 1.0) * r) / kf;
            if k >= 2 && !(lambda > 0.0 && lambda < 1.0) {
                return Err(SamplerError::LambdaOutOfRange { group: s, lambda });
            }
            Ok(lambda)
        })
        .collect()
}

/// Checks that `inner` certifies the Spearman reduction `M` of `spec`.
pub fn check_inner(spec: &BlockSpec, inner: &BernCertificate) -> Result<(), SamplerError> {
    let m = reduce_spearman(spec).map_err(|e| SamplerError::InnerNotCompatible(e.to_string()))?;
    if inner.dim() != spec.groups() {
        return Err(SamplerError::InnerNotCompatible(format!(
            "certificate has dimension {}, spec has {} groups",
            inner.dim(),
            spec.groups()
        )));
    }
    let diff = inner.reconstruct().max_abs_diff(&m);
    if diff > 1e-7 {
        return Err(SamplerError::InnerNotCompatible(format!("reconstruction differs from M by {diff:e}")));
    }
    Ok(())
}

/// `W_s = B_s U_s 1 + (1 − B_s) V_s` per group: `U` attains `M` in
/// Spearman's rho, `V_s` are negatively equicorrelated uniforms and
/// `B_s ~ Bern(λ_s)`. The Spearman matrix of `W` is `expand(spec)`.
pub fn block_spearman_attain(
    spec: &BlockSpec,
    inner: &BernCertificate,
    n: usize,
    rng: &RngStream,
) -> Result<SampleMatrix, SamplerError> {
    check_inner(spec, inner)?;
    let lambdas = block_lambdas(spec)?;
    let draw = BernDraw::new(inner);
    let sizes = spec.sizes().to_vec();
    let s_count = sizes.len();
    let d = spec.dim();
    let max_size = sizes.iter().copied().max().unwrap_or(0);
    Ok(sample_rows(n, d, rng, |g, row| {
        let mut bits = vec![0u8; s_count];
        let mut perm = vec![0; max_size];
        draw.draw(g, &mut bits);
        let u0 = uniform(g);
        let mut at = 0;
        for s in 0..s_count {
            let k = sizes[s];
            let us = if bits[s] == 1 { u0 } else { 1.0 - u0 };
            let out = &mut row[at..at + k];
            if k == 1 || g.random_bool(lambdas[s]) {
                out.fill(us);
            } else {
                neg_equicorr_row(g, &mut perm[..k], out);
            }
            at += k;
        }
    }))
}
