//! The geometric condition on neuron directions.
//!
//! A set of unit directions `w~_j` satisfies the condition when the origin lies
//! in the interior of their convex hull; equivalently, no closed hemisphere
//! contains all of them. [`gc_check`] decides this with a linear program and
//! returns a certificate that [`verify_certificate`] can re-check by plain
//! arithmetic. [`gc_check_2d`] is an independent angular-gap test for the plane.

pub mod simplex;
mod wendel;

use serde::{Deserialize, Serialize};

pub use wendel::{gc_probability, gc_probability_exact, gc_probability_mc, McEstimate};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, null_direction, rank};
use crate::model::WeightMatrix;
use simplex::{solve, LpOutcome, StandardLp};

/// Default tolerance on the LP margin.
pub const GC_TOL: f64 = 1e-9;
/// Weights shorter than this have no direction and are dropped.
pub const MIN_WEIGHT_NORM: f64 = 1e-12;

/// Normalized weight directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionSet {
    pub dirs: Vec<Vec<f64>>,
    pub source_indices: Vec<usize>,
    pub dropped: Vec<usize>,
}

impl DirectionSet {
    /// Normalizes the given columns of `weights`.
    pub fn from_weights(weights: &WeightMatrix, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self {
            dirs: Vec::new(),
            source_indices: Vec::new(),
            dropped: Vec::new(),
        };
        for j in indices {
            let w = weights.col(j);
            let n = norm(w);
            if n < MIN_WEIGHT_NORM {
                out.dropped.push(j);
            } else {
                out.dirs.push(w.iter().map(|x| x / n).collect());
                out.source_indices.push(j);
            }
        }
        out
    }

    /// Normalizes arbitrary vectors, indexing them by position.
    pub fn from_vectors(vectors: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::Degenerate("no directions given".into()));
        };
        let weights = WeightMatrix::from_columns(vectors)?;
        debug_assert_eq!(weights.dim(), first.len());
        Ok(Self::from_weights(&weights, 0..vectors.len()))
    }

    /// Unit vectors at the given planar angles.
    pub fn from_angles(angles: &[f64]) -> Self {
        Self {
            dirs: angles.iter().map(|a| vec![a.cos(), a.sin()]).collect(),
            source_indices: (0..angles.len()).collect(),
            dropped: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dirs.first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcCertificate {
    pub verdict: Verdict,
    /// Convex weights with `sum lambda_j w~_j = 0`, present when the condition holds.
    pub hull_coeffs: Option<Vec<f64>>,
    /// Unit `n` with `<n, w~_j> >= 0` for all `j`; present when the condition fails
    /// (and, when available, for degenerate configurations).
    pub separator: Option<Vec<f64>>,
    /// Optimum of `max eps s.t. sum lambda_j w~_j = 0, sum lambda_j = 1, lambda_j >= eps`;
    /// `None` when no affine combination of the directions vanishes.
    pub margin: Option<f64>,
}

impl GcCertificate {
    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }
}

fn require_directions(dirs: &DirectionSet) -> Result<()> {
    if dirs.is_empty() {
        return Err(Error::Degenerate(format!(
            "no usable directions ({} dropped as near-zero)",
            dirs.dropped.len()
        )));
    }
    if dirs.dim() == 0 {
        return Err(Error::Degenerate("directions have dimension 0".into()));
    }
    Ok(())
}

/// Solves the hull-margin LP. Returns `(eps*, lambda)` or `None` if infeasible.
fn hull_margin(dirs: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let k = dirs.len();
    let d = dirs[0].len();
    // variables: mu_1..mu_k, eps+, eps-   with lambda_j = mu_j + eps
    let mut a = Vec::with_capacity(d + 1);
    for r in 0..d {
        let s: f64 = dirs.iter().map(|w| w[r]).sum();
        let mut row: Vec<f64> = dirs.iter().map(|w| w[r]).collect();
        row.extend([s, -s]);
        a.push(row);
    }
    let mut row = vec![1.0; k];
    row.extend([k as f64, -(k as f64)]);
    a.push(row);
    let mut b = vec![0.0; d];
    b.push(1.0);
    let mut c = vec![0.0; k];
    c.extend([1.0, -1.0]);
    match solve(&StandardLp { a, b, c }) {
        LpOutcome::Optimal { x, objective } => {
            let eps = x[k] - x[k + 1];
            let lambda = x[..k].iter().map(|m| m + eps).collect();
            Some((objective, lambda))
        }
        LpOutcome::Infeasible | LpOutcome::Unbounded => None,
    }
}

/// Point of minimum norm in the convex hull of `points` (Wolfe's active-set method).
/// Returns the point and its convex weights.
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    let d = points[0].len();
    let combine = |support: &[usize], w: &[f64]| {
        let mut x = vec![0.0; d];
        for (&i, &wi) in support.iter().zip(w) {
            crate::linalg::axpy(wi, &points[i], &mut x);
        }
        x
    };
    let scale = points.iter().map(|p| dot(p, p)).fold(0.0, f64::max).max(1e-300);
    let start = (0..k)
        .min_by(|&a, &b| dot(&points[a], &points[a]).total_cmp(&dot(&points[b], &points[b])))
        .unwrap_or(0);
    let mut support = vec![start];
    let mut weights = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..(50 * (k + d + 5)) {
        let (j, best) = (0..k)
            .map(|j| (j, dot(&x, &points[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap_or((start, 0.0));
        if dot(&x, &x) - best <= 1e-13 * scale || support.contains(&j) {
            break;
        }
        support.push(j);
        weights.push(0.0);
        for _ in 0..=k {
            let Some(alpha) = affine_min_norm(points, &support) else {
                break;
            };
            if alpha.iter().all(|&a| a > 1e-14) {
                weights = alpha;
                x = combine(&support, &weights);
                break;
            }
            let theta = weights
                .iter()
                .zip(&alpha)
                .filter(|(_, &a)| a <= 1e-14)
                .map(|(&l, &a)| l / (l - a))
                .fold(1.0, f64::min);
            for (l, a) in weights.iter_mut().zip(&alpha) {
                *l = theta * a + (1.0 - theta) * *l;
            }
            let keep: Vec<bool> = weights.iter().map(|&l| l > 1e-14).collect();
            let mut idx = 0;
            support.retain(|_| {
                idx += 1;
                keep[idx - 1]
            });
            weights.retain(|&l| l > 1e-14);
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|l| *l /= total);
            x = combine(&support, &weights);
        }
    }
    let mut full = vec![0.0; k];
    for (&i, &w) in support.iter().zip(&weights) {
        full[i] = w;
    }
    (x, full)
}

/// Affine weights (summing to one) of the minimum-norm point in the affine hull of `support`.
fn affine_min_norm(points: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let m = support.len();
    let mut sys = nalgebra::DMatrix::zeros(m + 1, m + 1);
    for (r, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            sys[(r, c)] = dot(&points[i], &points[j]);
        }
        sys[(r, m)] = 1.0;
        sys[(m, r)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let sol = sys.lu().solve(&rhs)?;
    let alpha: Vec<f64> = sol.iter().take(m).copied().collect();
    alpha.iter().all(|a| a.is_finite()).then_some(alpha)
}

/// Decides the geometric condition with an LP certificate.
pub fn gc_check(dirs: &DirectionSet, tol: f64) -> Result<GcCertificate> {
    require_directions(dirs)?;
    let d = dirs.dim();
    let hull = hull_margin(&dirs.dirs);
    let margin = hull.as_ref().map(|(eps, _)| *eps);
    let full_rank = rank(&dirs.dirs, 1e-10) == d;

    if let Some((eps, lambda)) = &hull {
        if *eps > tol && full_rank {
            return Ok(GcCertificate {
                verdict: Verdict::Holds,
                hull_coeffs: Some(lambda.clone()),
                separator: None,
                margin,
            });
        }
    }

    // Not strictly inside: the nearest hull point to the origin gives the
    // max-margin separating direction when the origin is outside the hull.
    let (nearest, _) = min_norm_point(&dirs.dirs);
    let gap = norm(&nearest);
    if gap > tol {
        let n: Vec<f64> = nearest.iter().map(|x| x / gap).collect();
        return Ok(GcCertificate {
            verdict: Verdict::Fails,
            hull_coeffs: None,
            separator: Some(n),
            margin,
        });
    }

    // Boundary case: some closed hemisphere holds every direction, no open one does.
    let separator = if full_rank {
        None
    } else {
        null_direction(&dirs.dirs, d, 1e-10)
    };
    Ok(GcCertificate {
        verdict: Verdict::Degenerate,
        hull_coeffs: None,
        separator,
        margin,
    })
}

/// Planar oracle: the condition holds iff the largest circular gap between
/// consecutive direction angles is below `pi`.
pub fn gc_check_2d(dirs: &DirectionSet) -> Result<GcCertificate> {
    require_directions(dirs)?;
    if dirs.dim() != 2 {
        return Err(Error::Dimension {
            what: "planar geometric check",
            expected: 2,
            got: dirs.dim(),
        });
    }
    use std::f64::consts::{PI, TAU};
    let mut angles: Vec<(f64, usize)> = dirs
        .dirs
        .iter()
        .enumerate()
        .map(|(j, w)| (w[1].atan2(w[0]).rem_euclid(TAU), j))
        .collect();
    angles.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k = angles.len();
    let (mut gap, mut gap_start) = (TAU - angles[k - 1].0 + angles[0].0, angles[k - 1].0);
    for pair in angles.windows(2) {
        let g = pair[1].0 - pair[0].0;
        if g > gap {
            gap = g;
            gap_start = pair[0].0;
        }
    }
    const ANGLE_TOL: f64 = 1e-9;
    if gap > PI + ANGLE_TOL {
        let mid = gap_start + gap / 2.0;
        return Ok(GcCertificate {
            verdict: Verdict::Fails,
            hull_coeffs: None,
            separator: Some(vec![-mid.cos(), -mid.sin()]),
            margin: None,
        });
    }
    if gap >= PI - ANGLE_TOL {
        return Ok(GcCertificate {
            verdict: Verdict::Degenerate,
            hull_coeffs: None,
            separator: None,
            margin: None,
        });
    }
    Ok(GcCertificate {
        verdict: Verdict::Holds,
        hull_coeffs: Some(triangle_weights(&dirs.dirs)),
        separator: None,
        margin: None,
    })
}

/// Convex weights on three directions whose triangle contains the origin,
/// choosing the triple with the largest minimum barycentric coordinate.
fn triangle_weights(dirs: &[Vec<f64>]) -> Vec<f64> {
    let cross = |a: &[f64], b: &[f64]| a[0] * b[1] - a[1] * b[0];
    let k = dirs.len();
    let mut best: Option<(f64, [usize; 3], [f64; 3])> = None;
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                let la = cross(&dirs[b], &dirs[c]);
                let lb = cross(&dirs[c], &dirs[a]);
                let lc = cross(&dirs[a], &dirs[b]);
                let total = la + lb + lc;
                if total.abs() < 1e-14 {
                    continue;
                }
                let bary = [la / total, lb / total, lc / total];
                let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
                if best.as_ref().is_none_or(|(w, _, _)| worst > *w) {
                    best = Some((worst, [a, b, c], bary));
                }
            }
        }
    }
    let mut lambda = vec![0.0; k];
    if let Some((_, idx, bary)) = best {
        for (i, l) in idx.iter().zip(bary) {
            lambda[*i] = l.max(0.0);
        }
    }
    lambda
}

/// Re-checks a certificate by direct arithmetic.
pub fn verify_certificate(dirs: &DirectionSet, cert: &GcCertificate, tol: f64) -> bool {
    match cert.verdict {
        Verdict::Holds => {
            let Some(lambda) = &cert.hull_coeffs else {
                return false;
            };
            if lambda.len() != dirs.len() || lambda.iter().any(|&l| !(l >= 0.0)) {
                return false;
            }
            let total: f64 = lambda.iter().sum();
            if (total - 1.0).abs() > tol {
                return false;
            }
            let mut combo = vec![0.0; dirs.dim()];
            for (l, w) in lambda.iter().zip(&dirs.dirs) {
                crate::linalg::axpy(*l, w, &mut combo);
            }
            norm(&combo) <= tol
        }
        Verdict::Fails => {
            let Some(n) = &cert.separator else {
                return false;
            };
            n.len() == dirs.dim()
                && (norm(n) - 1.0).abs() <= 1e-9
                && dirs.dirs.iter().all(|w| dot(n, w) >= -tol)
        }
        Verdict::Degenerate => false,
    }
}
