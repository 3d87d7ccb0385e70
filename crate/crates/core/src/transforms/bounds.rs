use serde::Serialize;

use super::{QuantileTransform, TransformError};

/// Attainable range of `κ_{G1,G2}` over all copulas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

/// Logistic-scale half-width of each quadrature piece.
const LOGIT_SPAN: f64 = 40.0;

/// Quadrature node: the point `u`, its complement `1 − u` computed without
/// cancellation, and the weight.
struct Node {
    u: f64,
    ubar: f64,
    w: f64,
}

fn expit(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Midpoint rule on each piece `[a, b]` of a partition of `(0, 1)`, taken in
/// the logistic variable `s` with `u = a + (b − a)·expit(s)`. The change of
/// variables clusters nodes at the piece ends, where quantiles of unbounded
/// distributions blow up; the weights on each piece are renormalized to its
/// length, so piecewise-constant integrands are integrated exactly.
fn nodes(breaks: &[f64], per_piece: usize) -> Vec<Node> {
    let mut cuts = vec![0.0];
    cuts.extend(breaks.iter().copied().filter(|&b| b > 0.0 && b < 1.0));
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let mut out = Vec::with_capacity(per_piece * (cuts.len() - 1));
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        let h = 2.0 * LOGIT_SPAN / per_piece as f64;
        let start = out.len();
        let mut total = 0.0;
        for k in 0..per_piece {
            let s = -LOGIT_SPAN + (k as f64 + 0.5) * h;
            let e = expit(s);
            let ebar = expit(-s);
            let weight = e * ebar;
            total += weight;
            out.push(Node { u: a + len * e, ubar: (1.0 - b) + len * ebar, w: weight });
        }
        for node in &mut out[start..] {
            node.w *= len / total;
        }
    }
    out
}

/// `G⁻¹(u)` evaluated from whichever of `u`, `1 − u` is smaller.
fn eval(g: &QuantileTransform, u: f64, ubar: f64) -> f64 {
    if u > 0.5 {
        g.upper_quantile(ubar)
    } else {
        g.quantile(u)
    }
}

/// `min = corr(G1⁻¹(U), G2⁻¹(1−U))` and `max = corr(G1⁻¹(U), G2⁻¹(U))`.
///
/// Means and variances are taken from the same quadrature as the cross
/// moments, so `attainable_bounds(g, g, _).max` is 1 up to rounding.
/// `quad_n` is the number of nodes per piece between consecutive
/// breakpoints of the two quantile functions.
pub fn attainable_bounds(
    g1: &QuantileTransform,
    g2: &QuantileTransform,
    quad_n: usize,
) -> Result<Bounds, TransformError> {
    for g in [g1, g2] {
        if !g.variance().is_finite() {
            return Err(TransformError::InfiniteVariance);
        }
        if !(g.variance() > 0.0) {
            return Err(TransformError::DegenerateDistribution);
        }
    }
    if quad_n == 0 {
        return Err(TransformError::InvalidParameter("quad_n must be positive".into()));
    }

    let corr = |mirror: bool| -> Result<f64, TransformError> {
        let mut breaks = g1.breakpoints();
        let b2 = g2.breakpoints();
        if mirror {
            breaks.extend(b2.iter().map(|b| 1.0 - b));
        } else {
            breaks.extend(b2);
        }
        let (mut m1, mut m2) = (0.0, 0.0);
        let pts: Vec<(f64, f64, f64)> = nodes(&breaks, quad_n)
            .into_iter()
            .map(|n| {
                let x = eval(g1, n.u, n.ubar);
                let y = if mirror { eval(g2, n.ubar, n.u) } else { eval(g2, n.u, n.ubar) };
                m1 += n.w * x;
                m2 += n.w * y;
                (n.w, x, y)
            })
            .collect();
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (w, x, y) in pts {
            let (dx, dy) = (x - m1, y - m2);
            sxy += w * dx * dy;
            sxx += w * dx * dx;
            syy += w * dy * dy;
        }
        if !(sxx > 0.0 && syy > 0.0) {
            return Err(TransformError::DegenerateDistribution);
        }
        Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
    };

    Ok(Bounds { min: corr(true)?, max: corr(false)? })
}

/// Closed-form bounds of `κ` for Bernoulli(p1) and Bernoulli(p2) margins.
pub fn bernoulli_bounds(p1: f64, p2: f64) -> Bounds {
    let (q1, q2) = (1.0 - p1, 1.0 - p2);
    let sd = (p1 * q1 * p2 * q2).sqrt();
    Bounds { min: ((p1 + p2 - 1.0).max(0.0) - p1 * p2) / sd, max: (p1.min(p2) - p1 * p2) / sd }
}
