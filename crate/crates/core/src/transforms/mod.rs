//! Concordance-inducing distributions and the transformed rank correlation.
//!
//! A [`QuantileTransform`] describes a distribution `G` through its quantile
//! function `G⁻¹`. Plugging `G⁻¹` into ranks turns Pearson correlation into a
//! rank statistic `κ_G`: uniform `G` gives Spearman's rho, the symmetric
//! Bernoulli gives Blomqvist's beta and the standard normal gives van der
//! Waerden's coefficient. `κ_G` is a measure of concordance exactly when `G`
//! is non-degenerate, symmetric and has finite variance; see
//! [`is_concordance_inducing`].

mod bounds;
mod estimate;

pub use bounds::{attainable_bounds, bernoulli_bounds, Bounds};
pub use estimate::{
    blomqvist_matrix, kappa_matrix, kendall_matrix, ranks, spearman_matrix, van_der_waerden_matrix, EstimateError,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("distribution is degenerate (zero variance)")]
    DegenerateDistribution,
    #[error("distribution has infinite variance")]
    InfiniteVariance,
    #[error("cannot parse distribution descriptor {0:?}")]
    Parse(String),
    #[error("cannot read quantile table {path}: {message}")]
    Table { path: String, message: String },
    #[error("argument {0} lies outside [-1, 1]")]
    OutOfRange(f64),
}

/// The distribution family behind a [`QuantileTransform`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Uniform,
    BernoulliHalf,
    StandardNormal,
    StudentT {
        nu: f64,
    },
    Laplace,
    Logistic,
    /// Uniform on `{1, …, k}`.
    DiscreteUniform {
        k: u32,
    },
    /// Piecewise-linear quantile through `(p, G⁻¹(p))` points, flat outside.
    Table {
        points: Vec<(f64, f64)>,
    },
    Lognormal {
        sigma: f64,
    },
    Bernoulli {
        p: f64,
    },
}

/// A distribution `G` represented by its quantile function, mean and variance.
///
/// An optional increasing affine map `x ↦ location + scale·x` is applied on
/// top of the base family; `κ_G` does not depend on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransformRepr", into = "TransformRepr")]
pub struct QuantileTransform {
    kind: TransformKind,
    location: f64,
    scale: f64,
    mean: f64,
    variance: f64,
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    #[serde(flatten)]
    kind: TransformKind,
    #[serde(default)]
    location: f64,
    #[serde(default = "one")]
    scale: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<TransformRepr> for QuantileTransform {
    type Error = TransformError;

    fn try_from(r: TransformRepr) -> Result<Self, TransformError> {
        Self::new(r.kind)?.affine(r.scale, r.location)
    }
}

impl From<QuantileTransform> for TransformRepr {
    fn from(t: QuantileTransform) -> Self {
        Self { kind: t.kind, location: t.location, scale: t.scale }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// Standard normal quantile `Φ⁻¹(p)`, exactly odd about `p = 1/2`.
pub fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        -std_normal().inverse_cdf(1.0 - p)
    } else {
        std_normal().inverse_cdf(p)
    }
}

/// Standard normal distribution function `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

impl QuantileTransform {
    /// Builds a transform, validating parameters and computing mean and
    /// variance in closed form (exactly, by segment integration, for tables).
    pub fn new(kind: TransformKind) -> Result<Self, TransformError> {
        use TransformKind::*;
        let (mean, variance) = match &kind {
            Uniform => (0.5, 1.0 / 12.0),
            BernoulliHalf => (0.5, 0.25),
            StandardNormal => (0.0, 1.0),
            StudentT { nu } => {
                if !(*nu > 0.0) || !nu.is_finite() {
                    return Err(TransformError::InvalidParameter(format!("degrees of freedom must be > 0, got {nu}")));
                }
                let mean = if *nu > 1.0 { 0.0 } else { f64::NAN };
                let var = if *nu > 2.0 { nu / (nu - 2.0) } else { f64::INFINITY };
                (mean, var)
            }
            Laplace => (0.0, 2.0),
            Logistic => (0.0, std::f64::consts::PI.powi(2) / 3.0),
            DiscreteUniform { k } => {
                if *k == 0 {
                    return Err(TransformError::InvalidParameter("discrete uniform needs k >= 1".into()));
                }
                let k = f64::from(*k);
                ((k + 1.0) / 2.0, (k * k - 1.0) / 12.0)
            }
            Table { points } => table_moments(points)?,
            Lognormal { sigma } => {
                if !(*sigma > 0.0) || !sigma.is_finite() {
                    return Err(TransformError::InvalidParameter(format!("lognormal sigma must be > 0, got {sigma}")));
                }
                let s2 = sigma * sigma;
                ((s2 / 2.0).exp(), s2.exp_m1() * s2.exp())
            }
            Bernoulli { p } => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(TransformError::InvalidParameter(format!("Bernoulli p must lie in (0,1), got {p}")));
                }
                (*p, p * (1.0 - p))
            }
        };
        if variance == 0.0 {
            return Err(TransformError::DegenerateDistribution);
        }
        Ok(Self { kind, location: 0.0, scale: 1.0, mean, variance })
    }

    pub fn uniform() -> Self {
        Self::new(TransformKind::Uniform).unwrap()
    }

    pub fn bernoulli_half() -> Self {
        Self::new(TransformKind::BernoulliHalf).unwrap()
    }

    pub fn standard_normal() -> Self {
        Self::new(TransformKind::StandardNormal).unwrap()
    }

    /// Piecewise-linear quantile function through `points`.
    pub fn table(points: Vec<(f64, f64)>) -> Result<Self, TransformError> {
        Self::new(TransformKind::Table { points })
    }

    /// The transform of `scale·Y + location` for `Y ~ G`; `scale` must be positive.
    pub fn affine(mut self, scale: f64, location: f64) -> Result<Self, TransformError> {
        if !(scale > 0.0) || !scale.is_finite() || !location.is_finite() {
            return Err(TransformError::InvalidParameter(format!(
                "affine map needs finite location and positive scale, got ({location}, {scale})"
            )));
        }
        self.mean = location + scale * self.mean;
        self.variance *= scale * scale;
        self.location = location + scale * self.location;
        self.scale *= scale;
        Ok(self)
    }

    pub fn kind(&self) -> &TransformKind {
        &self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// `G⁻¹(p)` for `p ∈ (0, 1)`: nondecreasing and left-continuous.
    pub fn quantile(&self, p: f64) -> f64 {
        self.location + self.scale * self.base_quantile(p)
    }

    /// `G⁻¹(1 − q)`, accurate for tiny `q` where `1 − q` would round.
    pub fn upper_quantile(&self, q: f64) -> f64 {
        self.location + self.scale * self.base_upper_quantile(q)
    }

    fn base_upper_quantile(&self, q: f64) -> f64 {
        use TransformKind::*;
        match &self.kind {
            StandardNormal | StudentT { .. } | Laplace | Logistic => -self.base_quantile(q),
            Lognormal { sigma } => (-sigma * normal_quantile(q)).exp(),
            _ => self.base_quantile(1.0 - q),
        }
    }

    fn base_quantile(&self, p: f64) -> f64 {
        use TransformKind::*;
        match &self.kind {
            Uniform => p,
            BernoulliHalf => f64::from(u8::from(p > 0.5)),
            StandardNormal => normal_quantile(p),
            StudentT { nu } => {
                let t = StudentsT::new(0.0, 1.0, *nu).expect("validated at construction");
                if p > 0.5 {
                    -t.inverse_cdf(1.0 - p)
                } else {
                    t.inverse_cdf(p)
                }
            }
            Laplace => {
                if p <= 0.5 {
                    (2.0 * p).ln()
                } else {
                    -(2.0 * (1.0 - p)).ln()
                }
            }
            Logistic => (p / (1.0 - p)).ln(),
            DiscreteUniform { k } => {
                let k = f64::from(*k);
                (k * p).ceil().clamp(1.0, k)
            }
            Table { points } => table_quantile(points, p),
            Lognormal { sigma } => (sigma * normal_quantile(p)).exp(),
            Bernoulli { p: prob } => f64::from(u8::from(p > 1.0 - prob)),
        }
    }

    /// Points in `(0, 1)` where the quantile function jumps or has a kink.
    /// Quadrature splits its domain there.
    pub fn breakpoints(&self) -> Vec<f64> {
        use TransformKind::*;
        match &self.kind {
            BernoulliHalf => vec![0.5],
            Bernoulli { p } => vec![1.0 - p],
            DiscreteUniform { k } => (1..*k).map(|j| f64::from(j) / f64::from(*k)).collect(),
            Table { points } => points.iter().map(|&(p, _)| p).filter(|&p| p > 0.0 && p < 1.0).collect(),
            _ => Vec::new(),
        }
    }
}

fn validate_table(points: &[(f64, f64)]) -> Result<(), TransformError> {
    if points.len() < 2 {
        return Err(TransformError::InvalidParameter("quantile table needs at least two points".into()));
    }
    for w in points.windows(2) {
        let ((p0, q0), (p1, q1)) = (w[0], w[1]);
        if !(p1 > p0) {
            return Err(TransformError::InvalidParameter(format!(
                "table probabilities must increase ({p0} then {p1})"
            )));
        }
        if q1 < q0 {
            return Err(TransformError::InvalidParameter(format!(
                "table quantiles must not decrease ({q0} then {q1})"
            )));
        }
    }
    for &(p, q) in points {
        if !(0.0..=1.0).contains(&p) || !q.is_finite() {
            return Err(TransformError::InvalidParameter(format!("invalid table point ({p}, {q})")));
        }
    }
    Ok(())
}

/// Exact first two moments of the piecewise-linear quantile (flat outside the grid).
fn table_moments(points: &[(f64, f64)]) -> Result<(f64, f64), TransformError> {
    validate_table(points)?;
    let (p_first, q_first) = points[0];
    let (p_last, q_last) = points[points.len() - 1];
    let mut m1 = p_first * q_first + (1.0 - p_last) * q_last;
    let mut m2 = p_first * q_first * q_first + (1.0 - p_last) * q_last * q_last;
    for w in points.windows(2) {
        let ((p0, a), (p1, b)) = (w[0], w[1]);
        let dp = p1 - p0;
        m1 += dp * (a + b) / 2.0;
        m2 += dp * (a * a + a * b + b * b) / 3.0;
    }
    let var = (m2 - m1 * m1).max(0.0);
    Ok((m1, var))
}

fn table_quantile(points: &[(f64, f64)], p: f64) -> f64 {
    let idx = points.partition_point(|&(pp, _)| pp < p);
    if idx == 0 {
        return points[0].1;
    }
    if idx == points.len() {
        return points[points.len() - 1].1;
    }
    let (p0, q0) = points[idx - 1];
    let (p1, q1) = points[idx];
    q0 + (q1 - q0) * (p - p0) / (p1 - p0)
}

/// Why a transform fails to induce a measure of concordance.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum InducingFailure {
    Degenerate,
    InfiniteVariance,
    /// `G⁻¹(1−p) ≠ 2μ − G⁻¹(p)` at this grid point.
    Asymmetric {
        p: f64,
        lower: f64,
        mirrored: f64,
    },
}

impl fmt::Display for InducingFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Degenerate => write!(f, "degenerate distribution"),
            Self::InfiniteVariance => write!(f, "infinite or undefined variance"),
            Self::Asymmetric { p, lower, mirrored } => {
                write!(f, "asymmetric: G^-1(1-p) = {mirrored} but 2*mean - G^-1(p) = {lower} at p = {p}")
            }
        }
    }
}

/// Checks non-degeneracy, finite variance and the symmetry identity
/// `G⁻¹(1−p) = 2μ − G⁻¹(p)` on the midpoint grid `p_i = (i + ½)/grid_n`.
///
/// The symmetry tolerance is `tol·max(1, σ)`. Midpoints avoid the jump
/// locations of the common discrete families, where left-continuity breaks
/// the identity on a null set.
pub fn is_concordance_inducing(g: &QuantileTransform, grid_n: usize, tol: f64) -> Result<(), InducingFailure> {
    if !g.variance.is_finite() || !g.mean.is_finite() {
        return Err(InducingFailure::InfiniteVariance);
    }
    if !(g.variance > 0.0) {
        return Err(InducingFailure::Degenerate);
    }
    let slack = tol * g.variance.sqrt().max(1.0);
    for i in 0..grid_n {
        let p = (i as f64 + 0.5) / grid_n as f64;
        let mirrored = g.quantile(1.0 - p);
        let lower = 2.0 * g.mean - g.quantile(p);
        if !((mirrored - lower).abs() <= slack) {
            return Err(InducingFailure::Asymmetric { p, lower, mirrored });
        }
    }
    Ok(())
}

/// Default grid size for [`is_concordance_inducing`].
pub const SYMMETRY_GRID: usize = 10_000;
/// Default tolerance for [`is_concordance_inducing`].
pub const SYMMETRY_TOL: f64 = 1e-8;

/// Distribution descriptor accepted on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Descriptor {
    Uniform,
    Bernoulli(f64),
    Normal,
    StudentT(f64),
    Laplace,
    Logistic,
    DiscreteUniform(u32),
    Lognormal(f64),
    Table(PathBuf),
}

impl FromStr for Descriptor {
    type Err = TransformError;

    fn from_str(s: &str) -> Result<Self, TransformError> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("table:") {
            return Ok(Self::Table(PathBuf::from(path)));
        }
        let bad = || TransformError::Parse(s.to_string());
        let (name, arg) = match s.find('(') {
            Some(open) => {
                let inner = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
                (&s[..open], Some(inner.trim()))
            }
            None => (s, None),
        };
        let num =
            |a: Option<&str>| -> Result<f64, TransformError> { a.ok_or_else(bad)?.parse::<f64>().map_err(|_| bad()) };
        match (name.trim(), arg) {
            ("uniform", None) => Ok(Self::Uniform),
            ("normal", None) => Ok(Self::Normal),
            ("laplace", None) => Ok(Self::Laplace),
            ("logistic", None) => Ok(Self::Logistic),
            ("bern", a) => Ok(Self::Bernoulli(num(a)?)),
            ("t", a) => Ok(Self::StudentT(num(a)?)),
            ("lognormal", a) => Ok(Self::Lognormal(num(a)?)),
            ("dunif", a) => {
                let k = a.ok_or_else(bad)?.parse::<u32>().map_err(|_| bad())?;
                Ok(Self::DiscreteUniform(k))
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => write!(f, "uniform"),
            Self::Bernoulli(p) => write!(f, "bern({p})"),
            Self::Normal => write!(f, "normal"),
            Self::StudentT(nu) => write!(f, "t({nu})"),
            Self::Laplace => write!(f, "laplace"),
            Self::Logistic => write!(f, "logistic"),
            Self::DiscreteUniform(k) => write!(f, "dunif({k})"),
            Self::Lognormal(s) => write!(f, "lognormal({s})"),
            Self::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

/// Builds the transform named by a descriptor. `bern(0.5)` yields the
/// symmetric Bernoulli kind; `table:<path>` reads a two-column CSV of
/// `p, quantile` rows.
pub fn make_transform(desc: &Descriptor) -> Result<QuantileTransform, TransformError> {
    let kind = match desc {
        Descriptor::Uniform => TransformKind::Uniform,
        Descriptor::Bernoulli(p) if *p == 0.5 => TransformKind::BernoulliHalf,
        Descriptor::Bernoulli(p) => TransformKind::Bernoulli { p: *p },
        Descriptor::Normal => TransformKind::StandardNormal,
        Descriptor::StudentT(nu) => TransformKind::StudentT { nu: *nu },
        Descriptor::Laplace => TransformKind::Laplace,
        Descriptor::Logistic => TransformKind::Logistic,
        Descriptor::DiscreteUniform(k) => TransformKind::DiscreteUniform { k: *k },
        Descriptor::Lognormal(s) => TransformKind::Lognormal { sigma: *s },
        Descriptor::Table(path) => TransformKind::Table { points: read_table(path)? },
    };
    QuantileTransform::new(kind)
}

fn read_table(path: &Path) -> Result<Vec<(f64, f64)>, TransformError> {
    let err = |message: String| TransformError::Table { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    parse_table(&text).map_err(err)
}

/// Parses `p, quantile` rows; blank lines and `#` comments are skipped.
pub fn parse_table(text: &str) -> Result<Vec<(f64, f64)>, String> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split(',').map(str::trim);
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(format!("line {}: expected two comma-separated values", i + 1));
        };
        let p = a.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1))?;
        let q = b.parse::<f64>().map_err(|e| format!("line {}: {e}", i + 1))?;
        points.push((p, q));
    }
    Ok(points)
}

/// Spearman's rho of a bivariate Gauss copula with correlation `rho`:
/// `(6/π)·asin(rho/2)`.
pub fn gauss_spearman(rho: f64) -> Result<f64, TransformError> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(TransformError::OutOfRange(rho));
    }
    Ok(6.0 / std::f64::consts::PI * (rho / 2.0).asin())
}

/// Inverse of [`gauss_spearman`]: `2·sin(π·rho_s/6)`.
pub fn gauss_spearman_inverse(rho_s: f64) -> Result<f64, TransformError> {
    if !(-1.0..=1.0).contains(&rho_s) {
        return Err(TransformError::OutOfRange(rho_s));
    }
    Ok(2.0 * (std::f64::consts::PI * rho_s / 6.0).sin())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(g: &QuantileTransform) -> Result<(), InducingFailure> {
        is_concordance_inducing(g, SYMMETRY_GRID, SYMMETRY_TOL)
    }

    #[test]
    fn uniform_basics() {
        let u = QuantileTransform::uniform();
        assert_eq!(u.quantile(0.3), 0.3);
        assert_eq!(u.mean(), 0.5);
        assert!((u.variance() - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn bernoulli_half_quantile_is_indicator() {
        let b = QuantileTransform::bernoulli_half();
        assert_eq!(b.quantile(0.5), 0.0);
        assert_eq!(b.quantile(0.5000001), 1.0);
        assert_eq!(b.quantile(0.2), 0.0);
        assert!(check(&b).is_ok());
    }

    #[test]
    fn student_t_two_has_infinite_variance() {
        let t2 = make_transform(&"t(2)".parse().unwrap()).unwrap();
        assert_eq!(check(&t2), Err(InducingFailure::InfiniteVariance));
        let t5 = make_transform(&"t(5)".parse().unwrap()).unwrap();
        assert!(check(&t5).is_ok());
        assert!((t5.variance() - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn builtin_symmetric_kinds_are_inducing() {
        for d in ["uniform", "bern(0.5)", "normal", "t(3)", "laplace", "logistic", "dunif(6)", "dunif(7)"] {
            let g = make_transform(&d.parse().unwrap()).unwrap();
            assert!(check(&g).is_ok(), "{d}: {:?}", check(&g));
        }
    }

    #[test]
    fn asymmetric_kinds_are_rejected() {
        let ln = make_transform(&Descriptor::Lognormal(1.0)).unwrap();
        assert!(matches!(check(&ln), Err(InducingFailure::Asymmetric { .. })));
        let b = make_transform(&Descriptor::Bernoulli(0.3)).unwrap();
        assert!(matches!(check(&b), Err(InducingFailure::Asymmetric { .. })));
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(make_transform(&Descriptor::Bernoulli(1.0)), Err(TransformError::InvalidParameter(_))));
        assert!(matches!(make_transform(&Descriptor::StudentT(0.0)), Err(TransformError::InvalidParameter(_))));
        assert!(matches!(make_transform(&Descriptor::Lognormal(-1.0)), Err(TransformError::InvalidParameter(_))));
        assert_eq!(make_transform(&Descriptor::DiscreteUniform(1)), Err(TransformError::DegenerateDistribution));
        assert_eq!(QuantileTransform::table(vec![(0.0, 2.0), (1.0, 2.0)]), Err(TransformError::DegenerateDistribution));
    }

    #[test]
    fn descriptor_grammar() {
        assert_eq!("uniform".parse::<Descriptor>().unwrap(), Descriptor::Uniform);
        assert_eq!("bern(0.5)".parse::<Descriptor>().unwrap(), Descriptor::Bernoulli(0.5));
        assert_eq!("t(5)".parse::<Descriptor>().unwrap(), Descriptor::StudentT(5.0));
        assert_eq!("dunif(6)".parse::<Descriptor>().unwrap(), Descriptor::DiscreteUniform(6));
        assert_eq!("lognormal(1.0)".parse::<Descriptor>().unwrap(), Descriptor::Lognormal(1.0));
        assert_eq!("table:q.csv".parse::<Descriptor>().unwrap(), Descriptor::Table("q.csv".into()));
        for bad in ["gauss", "bern", "t(x)", "dunif(2.5)", "normal(1)", "bern(0.5"] {
            assert!(bad.parse::<Descriptor>().is_err(), "{bad}");
        }
        for d in ["uniform", "bern(0.3)", "normal", "t(5)", "laplace", "logistic", "dunif(6)", "lognormal(1)"] {
            let parsed: Descriptor = d.parse().unwrap();
            assert_eq!(parsed.to_string().parse::<Descriptor>().unwrap(), parsed);
        }
        assert_eq!(make_transform(&Descriptor::Bernoulli(0.5)).unwrap().kind(), &TransformKind::BernoulliHalf);
    }

    #[test]
    fn table_moments_match_uniform() {
        let t = QuantileTransform::table(vec![(0.0, 0.0), (0.25, 0.25), (1.0, 1.0)]).unwrap();
        assert!((t.mean() - 0.5).abs() < 1e-15);
        assert!((t.variance() - 1.0 / 12.0).abs() < 1e-15);
        assert!((t.quantile(0.6) - 0.6).abs() < 1e-15);
        assert!(check(&t).is_ok());
        let skew = QuantileTransform::table(vec![(0.0, 0.0), (0.5, 0.1), (1.0, 1.0)]).unwrap();
        assert!(check(&skew).is_err());
    }

    #[test]
    fn affine_preserves_inducing() {
        let g = QuantileTransform::standard_normal().affine(3.0, -2.0).unwrap();
        assert_eq!(g.mean(), -2.0);
        assert_eq!(g.variance(), 9.0);
        assert!((g.quantile(0.975) - (-2.0 + 3.0 * 1.959963984540054)).abs() < 1e-9);
        assert!(check(&g).is_ok());
        assert!(QuantileTransform::uniform().affine(-1.0, 0.0).is_err());
    }

    #[test]
    fn gauss_spearman_values() {
        assert_eq!(gauss_spearman(0.0).unwrap(), 0.0);
        assert!((gauss_spearman(1.0).unwrap() - 1.0).abs() < 1e-15);
        // direct evaluation: (6/π)·asin(0.25)
        assert!((gauss_spearman(0.5).unwrap() - 0.482_583_739_530_997_4).abs() < 1e-12);
        assert!(gauss_spearman(1.5).is_err());
        assert!(gauss_spearman_inverse(-1.01).is_err());
        for i in 0..=200 {
            let r = -1.0 + i as f64 / 100.0;
            let back = gauss_spearman_inverse(gauss_spearman(r).unwrap()).unwrap();
            assert!((back - r).abs() < 1e-12);
        }
    }

    #[test]
    fn repr_roundtrip_recomputes_moments() {
        let g = make_transform(&Descriptor::Lognormal(0.5)).unwrap().affine(2.0, 1.0).unwrap();
        let repr: TransformRepr = g.clone().into();
        assert_eq!(QuantileTransform::try_from(repr).unwrap(), g);
    }
}
