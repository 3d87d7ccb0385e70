use std::f64::consts::{LN_2, PI};
use std::fmt;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::measure::Measure;
use crate::samplers::uniform;
use crate::transforms::normal_cdf;

/// Archimedean generator families with completely monotone nestings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `ψ(t) = exp(−t^(1/θ))`, `θ ≥ 1`.
    Gumbel,
    /// `ψ(t) = (1 + t)^(−1/θ)`, `θ ≥ 0` (`θ = 0` is independence).
    Clayton,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gumbel => "gumbel",
            Self::Clayton => "clayton",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gumbel" => Ok(Self::Gumbel),
            "clayton" => Ok(Self::Clayton),
            _ => Err(format!("unknown family {s:?} (expected gumbel or clayton)")),
        }
    }
}

/// Positive stable variate with Laplace transform `exp(−t^α)`, `0 < α < 1`,
/// by Kanter's representation.
fn stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let th = PI * uniform(rng);
    let w: f64 = Exp1.sample(rng);
    let a = (alpha * th).sin() / th.sin().powf(1.0 / alpha);
    a * (((1.0 - alpha) * th).sin() / w).powf((1.0 - alpha) / alpha)
}

/// Variate with Laplace transform `exp(−c((1 + t)^α − 1))`: a sum of
/// `⌈c⌉` exponentially tilted stables, each drawn by rejection.
fn tilted_stable<R: Rng + ?Sized>(alpha: f64, c: f64, rng: &mut R) -> f64 {
    let m = c.ceil().max(1.0) as usize;
    let piece = c / m as f64;
    let scale = piece.powf(1.0 / alpha);
    (0..m)
        .map(|_| loop {
            let s = scale * stable(alpha, rng);
            if uniform(rng) <= (-s).exp() {
                break s;
            }
        })
        .sum()
}

impl Family {
    pub fn theta_lower(self) -> f64 {
        match self {
            Self::Gumbel => 1.0,
            Self::Clayton => 0.0,
        }
    }

    /// The generator `ψ_θ(t)`.
    pub fn psi(self, theta: f64, t: f64) -> f64 {
        match self {
            Self::Gumbel => (-t.powf(1.0 / theta)).exp(),
            Self::Clayton if theta == 0.0 => (-t).exp(),
            Self::Clayton => (-t.ln_1p() / theta).exp(),
        }
    }

    /// The bivariate copula `C_θ(u, v)`.
    pub fn copula(self, theta: f64, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Gumbel => {
                // ‖(x, y)‖_θ scaled by the larger coordinate so x^θ cannot overflow
                let (x, y) = (-u.ln(), -v.ln());
                let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
                if hi == 0.0 {
                    return 1.0;
                }
                (-hi * ((lo / hi).powf(theta).ln_1p() / theta).exp()).exp()
            }
            Self::Clayton if theta == 0.0 => u * v,
            Self::Clayton => {
                // log(u^−θ + v^−θ − 1) with the larger exponent factored out
                let (a, b) = (-theta * u.ln(), -theta * v.ln());
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                let log_sum = hi + ((lo - hi).exp() - (-hi).exp()).ln_1p();
                (-log_sum / theta).exp()
            }
        }
    }

    /// Frailty of the root node: the distribution whose Laplace transform is `ψ_θ`.
    pub(crate) fn root_frailty<R: Rng + ?Sized>(self, theta: f64, rng: &mut R) -> f64 {
        match self {
            Self::Gumbel if theta == 1.0 => 1.0,
            Self::Gumbel => stable(1.0 / theta, rng),
            Self::Clayton if theta == 0.0 => 1.0,
            Self::Clayton => Gamma::new(1.0 / theta, 1.0).expect("positive shape").sample(rng),
        }
    }

    /// Frailty of a child given its parent's frailty `v0`: Laplace transform
    /// `exp(−v0 · ψ_parent⁻¹(ψ_child(t)))`.
    pub(crate) fn inner_frailty<R: Rng + ?Sized>(self, parent: f64, child: f64, v0: f64, rng: &mut R) -> f64 {
        if parent == child {
            return v0;
        }
        match self {
            Self::Gumbel => {
                let alpha = parent / child;
                v0.powf(1.0 / alpha) * stable(alpha, rng)
            }
            Self::Clayton if parent == 0.0 => Gamma::new(v0 / child, 1.0).expect("positive shape").sample(rng),
            Self::Clayton => tilted_stable(parent / child, v0, rng),
        }
    }
}

/// Composite Gauss–Legendre rule: 8 panels of 32 nodes on `[a, b]`.
fn gauss_legendre(a: f64, b: f64) -> Vec<(f64, f64)> {
    static BASE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    let base = BASE.get_or_init(|| {
        let n = 32;
        (1..=n)
            .map(|i| {
                let mut x = (PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    });
    let panels = 8;
    let h = (b - a) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let lo = a + p as f64 * h;
            base.iter().map(move |&(x, w)| (lo + h * (x + 1.0) / 2.0, w * h / 2.0))
        })
        .collect()
}

/// `κ(C_θ)` for the bivariate copula of the family: closed forms for tau
/// and beta, two-dimensional quadrature for Spearman's rho and van der
/// Waerden's coefficient.
pub fn kappa_of_theta(family: Family, measure: Measure, theta: f64) -> f64 {
    match (family, measure) {
        (Family::Gumbel, Measure::Tau) => 1.0 - 1.0 / theta,
        (Family::Gumbel, Measure::Beta) => 2f64.powf(2.0 - 2f64.powf(1.0 / theta)) - 1.0,
        (Family::Clayton, Measure::Tau) => theta / (theta + 2.0),
        (Family::Clayton, Measure::Beta) if theta == 0.0 => 0.0,
        (Family::Clayton, Measure::Beta) => {
            // log C(1/2, 1/2) = −log(2^(θ+1) − 1)/θ, kept finite for large θ
            let log_c = -((theta + 1.0) * LN_2 + (-(-(theta + 1.0) * LN_2).exp()).ln_1p()) / theta;
            4.0 * log_c.exp() - 1.0
        }
        (_, Measure::Spearman) => {
            let nodes = gauss_legendre(0.0, 1.0);
            let mut s = 0.0;
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    s += wu * wv * (family.copula(theta, u, v) - u * v);
                }
            }
            12.0 * s
        }
        (_, Measure::Waerden) => {
            let nodes: Vec<(f64, f64)> =
                gauss_legendre(-8.5, 8.5).into_iter().map(|(x, w)| (normal_cdf(x), w)).collect();
            let mut s = 0.0;
            for &(u, wu) in &nodes {
                for &(v, wv) in &nodes {
                    s += wu * wv * (family.copula(theta, u, v) - u * v);
                }
            }
            s
        }
    }
}
