//! Impurity objectives, their gradients, and confidence intervals for
//! subsampled split estimates.
//!
//! A candidate split's quality is `mu = w_L * I(left) + w_R * I(right)`,
//! written in closed form over mass-normalized side statistics so the same
//! arithmetic serves exact computation and plug-in estimation. Confidence
//! intervals come from the delta method: the objective is a smooth function
//! of a mean vector theta (class masses, or side moments for regression),
//! so `Var(mu_hat) ~= g' Sigma g / n` with `g` the gradient at theta_hat
//! and `Sigma` the per-sample covariance of theta's contribution vector.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Clamp applied to probability entries before differentiating, keeping
/// logarithms finite at empirical zeros.
pub const PROB_EPSILON: f64 = 1e-10;

/// Allowed deviation of a node's total mass from 1.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpurityKind {
    Gini,
    Entropy,
    Mse,
}

/// Mass-normalized statistics of one side of a split (or of a whole node):
/// every entry is an average over the node's rows, so for a side they sum
/// to the side's mass `w <= 1` rather than to 1.
#[derive(Debug, Clone, PartialEq)]
pub enum SideStats {
    Classification {
        masses: Vec<f64>,
    },
    Regression {
        weight: f64,
        sum: f64,
        sum_sq: f64,
        sum_cube: f64,
        sum_quartic: f64,
    },
}

impl SideStats {
    pub fn weight(&self) -> f64 {
        match self {
            SideStats::Classification { masses } => masses.iter().sum(),
            SideStats::Regression { weight, .. } => *weight,
        }
    }
}

/// Third and fourth side moments, needed only to build the regression
/// covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionTail {
    pub s3_left: f64,
    pub s4_left: f64,
    pub s3_right: f64,
    pub s4_right: f64,
}

/// The mean vector a split estimate is a function of.
///
/// Classification stores the 2K-1 free components `[L_1..L_K, R_1..R_K-1]`;
/// the last right mass is implied by the unit total. Regression stores
/// `(w_L, s1_L, s2_L, s1_R, s2_R)` with `w_R = 1 - w_L` implied, plus
/// optional tail moments for covariance work.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaVector {
    Classification {
        free: Vec<f64>,
        n_classes: usize,
    },
    Regression {
        w_left: f64,
        s1_left: f64,
        s2_left: f64,
        s1_right: f64,
        s2_right: f64,
        tail: Option<RegressionTail>,
    },
}

impl ThetaVector {
    /// Assemble theta from two side summaries of the same node.
    pub fn from_sides(left: &SideStats, right: &SideStats) -> Result<ThetaVector> {
        match (left, right) {
            (
                SideStats::Classification { masses: l },
                SideStats::Classification { masses: r },
            ) => {
                if l.len() != r.len() || l.is_empty() {
                    return Err(Error::InvalidParam("side class counts differ".into()));
                }
                let k = l.len();
                let mut free = Vec::with_capacity(2 * k - 1);
                free.extend_from_slice(l);
                free.extend_from_slice(&r[..k - 1]);
                Ok(ThetaVector::Classification { free, n_classes: k })
            }
            (
                SideStats::Regression {
                    weight: wl,
                    sum: s1l,
                    sum_sq: s2l,
                    sum_cube: s3l,
                    sum_quartic: s4l,
                },
                SideStats::Regression {
                    sum: s1r,
                    sum_sq: s2r,
                    sum_cube: s3r,
                    sum_quartic: s4r,
                    ..
                },
            ) => Ok(ThetaVector::Regression {
                w_left: *wl,
                s1_left: *s1l,
                s2_left: *s2l,
                s1_right: *s1r,
                s2_right: *s2r,
                tail: Some(RegressionTail {
                    s3_left: *s3l,
                    s4_left: *s4l,
                    s3_right: *s3r,
                    s4_right: *s4r,
                }),
            }),
            _ => Err(Error::InvalidParam("mixed-task side statistics".into())),
        }
    }

    /// Number of free components the gradient and covariance range over.
    pub fn free_len(&self) -> usize {
        match self {
            ThetaVector::Classification { free, .. } => free.len(),
            ThetaVector::Regression { .. } => 5,
        }
    }
}

/// Impurity of a whole node from its mass-normalized statistics. The total
/// mass must be 1 within tolerance.
pub fn node_impurity(kind: ImpurityKind, stats: &SideStats) -> Result<f64> {
    let w = stats.weight();
    if (w - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::MassMismatch(w));
    }
    match (kind, stats) {
        (ImpurityKind::Gini, SideStats::Classification { masses }) => {
            Ok(gini_side(masses, 1.0))
        }
        (ImpurityKind::Entropy, SideStats::Classification { masses }) => {
            Ok(entropy_side(masses, 1.0))
        }
        (ImpurityKind::Mse, SideStats::Regression { sum, sum_sq, .. }) => {
            Ok((sum_sq - sum * sum).max(0.0))
        }
        _ => Err(Error::InvalidParam(
            "impurity kind does not match the statistics' task".into(),
        )),
    }
}

/// Weighted gini of one side: `w * (1 - sum((p/w)^2)) = w - sum(p^2)/w`.
/// An empty side contributes nothing.
fn gini_side(masses: &[f64], w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    let sq: f64 = masses.iter().map(|p| p * p).sum();
    w - sq / w
}

/// Weighted entropy of one side: `-sum(p * log2(p/w))` over positive
/// masses. An empty side contributes nothing.
fn entropy_side(masses: &[f64], w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    -masses
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * (p / w).log2())
        .sum::<f64>()
}

/// Weighted mean squared deviation of one side from mass-normalized first
/// and second moments: `s2 - s1^2 / w`. An empty side contributes nothing.
fn mse_side(s1: f64, s2: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    s2 - s1 * s1 / w
}

/// The split objective `mu(theta)`: mass-weighted impurity summed over both
/// sides.
pub fn split_objective(kind: ImpurityKind, theta: &ThetaVector) -> Result<f64> {
    match (kind, theta) {
        (ImpurityKind::Gini, ThetaVector::Classification { free, n_classes })
        | (ImpurityKind::Entropy, ThetaVector::Classification { free, n_classes }) => {
            let (left, right) = side_masses(free, *n_classes)?;
            let wl: f64 = left.iter().sum();
            let wr: f64 = right.iter().sum();
            let side = match kind {
                ImpurityKind::Gini => gini_side,
                _ => entropy_side,
            };
            Ok(side(&left, wl) + side(&right, wr))
        }
        (
            ImpurityKind::Mse,
            ThetaVector::Regression {
                w_left,
                s1_left,
                s2_left,
                s1_right,
                s2_right,
                ..
            },
        ) => {
            if !(*w_left >= -MASS_TOLERANCE && *w_left <= 1.0 + MASS_TOLERANCE) {
                return Err(Error::InvalidParam(format!("left mass {w_left} outside [0, 1]")));
            }
            Ok(mse_side(*s1_left, *s2_left, *w_left)
                + mse_side(*s1_right, *s2_right, 1.0 - *w_left))
        }
        _ => Err(Error::InvalidParam(
            "impurity kind does not match theta's task".into(),
        )),
    }
}

/// Reconstruct both sides' full mass vectors from the free components.
fn side_masses(free: &[f64], k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if k == 0 || free.len() != 2 * k - 1 {
        return Err(Error::InvalidParam(format!(
            "classification theta needs 2K-1 components, got {} for K={k}",
            free.len()
        )));
    }
    if free.iter().any(|&p| p < -MASS_TOLERANCE) {
        return Err(Error::InvalidParam("negative mass component".into()));
    }
    let total: f64 = free.iter().sum();
    if total > 1.0 + MASS_TOLERANCE {
        return Err(Error::InvalidParam(format!("free masses sum to {total} > 1")));
    }
    let left = free[..k].to_vec();
    let mut right = free[k..].to_vec();
    right.push((1.0 - total).max(0.0));
    Ok((left, right))
}

/// Gradient of the split objective over theta's free components, evaluated
/// with probability entries clamped to `[eps, 1-eps]` so it stays finite at
/// empirical zeros.
pub fn objective_gradient(kind: ImpurityKind, theta: &ThetaVector) -> Result<Vec<f64>> {
    let eps = PROB_EPSILON;
    match (kind, theta) {
        (ImpurityKind::Gini, ThetaVector::Classification { free, n_classes })
        | (ImpurityKind::Entropy, ThetaVector::Classification { free, n_classes }) => {
            let (left, right) = side_masses(free, *n_classes)?;
            let clamp = |p: f64| p.clamp(eps, 1.0 - eps);
            let left: Vec<f64> = left.into_iter().map(clamp).collect();
            let right: Vec<f64> = right.into_iter().map(clamp).collect();
            let wl: f64 = left.iter().sum();
            let wr: f64 = right.iter().sum();
            let k = *n_classes;

            // per-mass partial of one side's weighted impurity
            let partial = |p: f64, w: f64, sq: f64| -> f64 {
                match kind {
                    ImpurityKind::Gini => 1.0 - 2.0 * p / w + sq / (w * w),
                    _ => -(p / w).log2(),
                }
            };
            let sq_l: f64 = left.iter().map(|p| p * p).sum();
            let sq_r: f64 = right.iter().map(|p| p * p).sum();
            let d_last = partial(right[k - 1], wr, sq_r);

            let mut grad = Vec::with_capacity(2 * k - 1);
            for &p in &left {
                grad.push(partial(p, wl, sq_l) - d_last);
            }
            for &p in &right[..k - 1] {
                grad.push(partial(p, wr, sq_r) - d_last);
            }
            Ok(grad)
        }
        (
            ImpurityKind::Mse,
            ThetaVector::Regression {
                w_left,
                s1_left,
                s1_right,
                ..
            },
        ) => {
            let wl = w_left.clamp(eps, 1.0 - eps);
            let wr = 1.0 - wl;
            Ok(vec![
                s1_left * s1_left / (wl * wl) - s1_right * s1_right / (wr * wr),
                -2.0 * s1_left / wl,
                1.0,
                -2.0 * s1_right / wr,
                1.0,
            ])
        }
        _ => Err(Error::InvalidParam(
            "impurity kind does not match theta's task".into(),
        )),
    }
}

/// Covariance of one multinomial draw's free indicator components:
/// `Sigma_ii = p_i (1 - p_i)`, `Sigma_ij = -p_i p_j`.
pub fn multinomial_covariance(free: &[f64]) -> Vec<Vec<f64>> {
    let d = free.len();
    let mut cov = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            cov[i][j] = if i == j {
                free[i] * (1.0 - free[i])
            } else {
                -free[i] * free[j]
            };
        }
    }
    cov
}

/// Covariance of one draw's regression contribution vector
/// `v = (1_L, 1_L y, 1_L y^2, 1_R y, 1_R y^2)`: `Sigma = E[v v'] - theta theta'`.
/// The second-moment matrix needs side moments up to y^4, so theta must
/// carry its tail.
pub fn regression_covariance(theta: &ThetaVector) -> Result<Vec<Vec<f64>>> {
    let ThetaVector::Regression {
        w_left,
        s1_left,
        s2_left,
        s1_right,
        s2_right,
        tail,
    } = theta
    else {
        return Err(Error::InvalidParam("regression covariance needs a regression theta".into()));
    };
    let tail = tail.ok_or(Error::MissingTailMoments)?;
    let t = [*w_left, *s1_left, *s2_left, *s1_right, *s2_right];
    // E[v v']: products of indicator-masked powers of y collapse to side
    // moments; cross-side products vanish.
    let m = [
        [t[0], t[1], t[2], 0.0, 0.0],
        [t[1], t[2], tail.s3_left, 0.0, 0.0],
        [t[2], tail.s3_left, tail.s4_left, 0.0, 0.0],
        [0.0, 0.0, 0.0, t[4], tail.s3_right],
        [0.0, 0.0, 0.0, tail.s3_right, tail.s4_right],
    ];
    let mut cov = vec![vec![0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            cov[i][j] = m[i][j] - t[i] * t[j];
        }
    }
    Ok(cov)
}

/// A split quality estimate with its confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitEstimate {
    pub mu_hat: f64,
    pub ci_half_width: f64,
    pub n_used: usize,
    /// True when the estimate consumed the whole finite population, making
    /// the half-width exactly zero.
    pub exact: bool,
}

/// Delta-method confidence interval around the plug-in objective:
/// `half = z_{1-delta/2} * sqrt(g' Sigma g / n_used)`, scaled by the finite
/// population correction `sqrt((n_total - n_used) / (n_total - 1))` when
/// sampling without replacement.
pub fn estimate_with_ci(
    kind: ImpurityKind,
    theta: &ThetaVector,
    n_used: usize,
    n_total: usize,
    delta: f64,
    finite_population: bool,
) -> Result<SplitEstimate> {
    if n_used == 0 {
        return Err(Error::InvalidParam("estimate needs at least one sample".into()));
    }
    if n_used > n_total {
        return Err(Error::InvalidParam(format!(
            "n_used {n_used} exceeds population {n_total}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParam(format!("delta must be in (0, 1), got {delta}")));
    }
    let mu_hat = split_objective(kind, theta)?;

    if finite_population && n_used == n_total {
        return Ok(SplitEstimate { mu_hat, ci_half_width: 0.0, n_used, exact: true });
    }

    let grad = objective_gradient(kind, theta)?;
    let var = match theta {
        ThetaVector::Classification { free, .. } => {
            // g' Sigma g for the multinomial collapses to
            // sum(p g^2) - (sum(p g))^2
            let mut quad = 0.0;
            let mut lin = 0.0;
            for (&p, &g) in free.iter().zip(&grad) {
                quad += p * g * g;
                lin += p * g;
            }
            quad - lin * lin
        }
        ThetaVector::Regression { .. } => {
            let cov = regression_covariance(theta)?;
            let mut q = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    q += grad[i] * cov[i][j] * grad[j];
                }
            }
            q
        }
    }
    .max(0.0);

    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - delta / 2.0);
    let mut half = z * (var / n_used as f64).sqrt();
    if finite_population {
        half *= ((n_total - n_used) as f64 / (n_total - 1) as f64).sqrt();
    }
    Ok(SplitEstimate { mu_hat, ci_half_width: half, n_used, exact: false })
}

/// Signed impurity change of a split: `mu - parent`. Negative values mean
/// the split helps; stopping rules compare `-reduction` against a minimum
/// decrease.
pub fn impurity_reduction(parent_impurity: f64, mu: f64) -> f64 {
    mu - parent_impurity
}
