//! Slow/fast phase analysis of training trajectories and the associated bounds.
//!
//! For class `i`, the slow set `T1` holds the iterations at which the owner
//! directions `{w~_j : v_{i,j} > 0}` fail the geometric condition, and the fast
//! set `T2` those at which it holds. Degenerate verdicts count toward `T1`.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::geometry::{gc_check, DirectionSet, GC_TOL};
use crate::linalg::{coordinates, norm};
use crate::model::{OutputMap, WeightMatrix};
use crate::trainer::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub class: usize,
    pub times: Vec<usize>,
    pub gc_timeline: Vec<bool>,
    /// First iteration at which the condition holds.
    pub first_hold: Option<usize>,
    pub t1_size: usize,
    pub t2_size: usize,
    /// Fraction of iterations from `first_hold` on at which the condition holds.
    pub persistence: Option<f64>,
    /// `sum_{t in T2} l_i(W^t)^2`
    pub sum_sq_loss_t2: f64,
}

/// Owner-neuron directions of `class`, optionally expressed in the coordinates of
/// the class subspace `basis` (orthonormal rows).
pub fn owner_directions(
    weights: &WeightMatrix,
    output: &OutputMap,
    class: usize,
    basis: Option<&[Vec<f64>]>,
) -> Result<DirectionSet> {
    let owners: Vec<usize> = output.owned_by(class).collect();
    match basis {
        None => Ok(DirectionSet::from_weights(weights, owners)),
        Some(b) => {
            let cols: Vec<Vec<f64>> = owners.iter().map(|&j| coordinates(weights.col(j), b)).collect();
            let projected = WeightMatrix::from_columns(&cols)?;
            let mut set = DirectionSet::from_weights(&projected, 0..owners.len());
            set.source_indices = set.source_indices.iter().map(|&p| owners[p]).collect();
            set.dropped = set.dropped.iter().map(|&p| owners[p]).collect();
            Ok(set)
        }
    }
}

/// Geometric condition for the owner neurons of `class`; an empty or
/// all-zero owner set counts as not holding.
pub fn owner_gc(weights: &WeightMatrix, output: &OutputMap, class: usize, basis: Option<&[Vec<f64>]>) -> Result<bool> {
    let dirs = owner_directions(weights, output, class, basis)?;
    if dirs.is_empty() {
        return Ok(false);
    }
    Ok(gc_check(&dirs, GC_TOL)?.holds())
}

fn require_dense(trajectory: &Trajectory) -> Result<()> {
    let dense = trajectory.records.iter().enumerate().all(|(i, r)| r.t == i)
        && trajectory.snapshots.len() == trajectory.records.len();
    if dense {
        Ok(())
    } else {
        config_err("phase detection needs a weight snapshot at every iteration; train with record_every = 1 and snapshots enabled")
    }
}

pub fn detect_phases(
    trajectory: &Trajectory,
    output: &OutputMap,
    class: usize,
    basis: Option<&[Vec<f64>]>,
) -> Result<PhaseReport> {
    require_dense(trajectory)?;
    let mut timeline = Vec::with_capacity(trajectory.records.len());
    for w in &trajectory.snapshots {
        timeline.push(owner_gc(w, output, class, basis)?);
    }
    let times: Vec<usize> = trajectory.records.iter().map(|r| r.t).collect();
    let first_idx = timeline.iter().position(|&g| g);
    let t2_size = timeline.iter().filter(|&&g| g).count();
    let persistence = first_idx.map(|i| {
        let tail = &timeline[i..];
        tail.iter().filter(|&&g| g).count() as f64 / tail.len() as f64
    });
    let mut sum_sq = 0.0;
    for (rec, &g) in trajectory.records.iter().zip(&timeline) {
        if g {
            let l = rec
                .loss_per_class
                .get(class)
                .copied()
                .flatten()
                .ok_or(Error::EmptyClass(class))?;
            sum_sq += l * l;
        }
    }
    Ok(PhaseReport {
        class,
        first_hold: first_idx.map(|i| times[i]),
        t1_size: timeline.len() - t2_size,
        t2_size,
        persistence,
        sum_sq_loss_t2: sum_sq,
        times,
        gc_timeline: timeline,
    })
}

/// Copies per-class timelines into the trajectory records.
pub fn annotate_trajectory(trajectory: &mut Trajectory, reports: &[PhaseReport], classes: usize) {
    for (idx, rec) in trajectory.records.iter_mut().enumerate() {
        let mut flags = vec![false; classes];
        for r in reports {
            if let Some(&g) = r.gc_timeline.get(idx) {
                flags[r.class] = g;
            }
        }
        rec.gc_flag_per_class = Some(flags);
    }
}

/// Constants entering the phase bounds for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Output magnitude `v`.
    pub v: f64,
    pub eta: f64,
    /// Uniform bound on `|W^t|`.
    pub r: f64,
    /// Data norm bounds `m_i <= |x| <= M_i`.
    pub m_inner: f64,
    pub m_outer: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Subspace dimension `d_i`.
    pub dim: usize,
    /// Class count `n`.
    pub classes: usize,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.v, self.eta, self.r, self.m_inner, self.m_outer, self.p_max];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return config_err(format!("bound inputs must be positive and finite: {self:?}"));
        }
        if !(self.p_min >= 0.0) || self.p_min > self.p_max {
            return config_err("need 0 <= p_min <= p_max");
        }
        if self.m_inner > self.m_outer {
            return config_err("need m_i <= M_i");
        }
        if self.dim < 1 || self.classes < 1 {
            return config_err("need d_i >= 1 and n >= 1");
        }
        Ok(())
    }
}

/// `C_p <= M_i^{d_i - 1} p_max`
pub fn cp_upper_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(inputs.m_outer.powi(inputs.dim as i32 - 1) * inputs.p_max)
}

/// Surface area of the unit sphere `S^m` in `R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    let a = (m as f64 + 1.0) / 2.0;
    2.0 * std::f64::consts::PI.powf(a) / statrs::function::gamma::gamma(a)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, 50)
}

/// Lower estimate of the slow-phase probability mass:
/// `p_min |S^{d-2}| / |S^{d-1}| * int_0^beta sin^{d-2}(theta) dtheta` with `sin beta = 1 / (2 v M R)`.
pub fn p_r_lower_bound(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if inputs.dim < 2 {
        return Err(Error::Hypothesis("p_R needs subspace dimension >= 2".into()));
    }
    let s = 2.0 * inputs.v * inputs.m_outer * inputs.r;
    if !(s > 1.0) {
        return Err(Error::Hypothesis(format!("p_R needs 2 v M R > 1, got {s}")));
    }
    let beta = (1.0 / s).asin();
    let power = inputs.dim as i32 - 2;
    let integral = adaptive_simpson(&|th: f64| th.sin().powi(power), 0.0, beta, 1e-10);
    Ok(inputs.p_min * sphere_area(inputs.dim - 2) / sphere_area(inputs.dim - 1) * integral)
}

/// `|T1| <= C_p R / (v eta p_R^2)`
pub fn t1_bound(inputs: &BoundInputs) -> Result<f64> {
    let cp = cp_upper_bound(inputs)?;
    let p_r = p_r_lower_bound(inputs)?;
    if p_r <= 0.0 {
        return Err(Error::Hypothesis("p_R is zero; the slow-phase bound is infinite".into()));
    }
    Ok(cp * inputs.r / (inputs.v * inputs.eta * p_r * p_r))
}

/// `sum_{t in T2} l_i(W^t)^2 <= 4 eta^{-1} v n^2 C_p R^2 M_i^2 R`
pub fn phase2_sum_bound(inputs: &BoundInputs) -> Result<f64> {
    let cp = cp_upper_bound(inputs)?;
    let n = inputs.classes as f64;
    let (r, m) = (inputs.r, inputs.m_outer);
    Ok(4.0 * inputs.v * n * n * cp * r * r * m * m * r / inputs.eta)
}

/// Step size below which non-owner norms above `radius` cannot grow:
/// `min{ r / (C_p M_i^2), r / (2 v n M_i) }`.
pub fn non_owner_eta_threshold(inputs: &BoundInputs, radius: f64) -> Result<f64> {
    let cp = cp_upper_bound(inputs)?;
    let m = inputs.m_outer;
    Ok((radius / (cp * m * m)).min(radius / (2.0 * inputs.v * inputs.classes as f64 * m)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OwnerDecrease,
    NonOwnerIncrease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormViolation {
    /// The step from `t` to `t + 1`.
    pub t: usize,
    pub neuron: usize,
    pub kind: ViolationKind,
    pub before: f64,
    pub after: f64,
}

/// Non-owner check parameters: audit neurons with `|w_j| > radius` when `eta`
/// is below the threshold implied by `bounds`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonOwnerAudit {
    pub radius: f64,
    pub bounds: BoundInputs,
}

pub const NORM_TOL: f64 = 1e-12;

/// Audits per-step neuron norms, given as one row of norms per consecutive iteration.
pub fn audit_norm_series(
    times: &[usize],
    norms: &[Vec<f64>],
    output: &OutputMap,
    class: usize,
    non_owner: Option<NonOwnerAudit>,
) -> Result<Vec<NormViolation>> {
    let check_non_owner = match non_owner {
        Some(a) => (a.bounds.eta < non_owner_eta_threshold(&a.bounds, a.radius)?).then_some(a.radius),
        None => None,
    };
    let mut out = Vec::new();
    for (step, pair) in norms.windows(2).enumerate() {
        if times[step + 1] != times[step] + 1 {
            return config_err("norm audit needs consecutive iterations (record_every = 1)");
        }
        for (j, (&before, &after)) in pair[0].iter().zip(&pair[1]).enumerate() {
            if output.owner(j) == class {
                if after < before - NORM_TOL {
                    out.push(NormViolation {
                        t: times[step],
                        neuron: j,
                        kind: ViolationKind::OwnerDecrease,
                        before,
                        after,
                    });
                }
            } else if let Some(radius) = check_non_owner {
                if before > radius && after > before + NORM_TOL {
                    out.push(NormViolation {
                        t: times[step],
                        neuron: j,
                        kind: ViolationKind::NonOwnerIncrease,
                        before,
                        after,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Norm-monotonicity audit of a single-class, no-bias training trajectory.
pub fn monotonicity_audit(
    trajectory: &Trajectory,
    output: &OutputMap,
    class: usize,
    non_owner: Option<NonOwnerAudit>,
) -> Result<Vec<NormViolation>> {
    let times: Vec<usize> = trajectory.records.iter().map(|r| r.t).collect();
    let norms: Vec<Vec<f64>> = trajectory.records.iter().map(|r| r.neuron_norms.clone()).collect();
    audit_norm_series(&times, &norms, output, class, non_owner)
}

/// The same audit on the components of the weights inside a class subspace,
/// for runs that train several classes on orthogonal subspaces at once.
pub fn monotonicity_audit_projected(
    trajectory: &Trajectory,
    output: &OutputMap,
    class: usize,
    basis: &[Vec<f64>],
) -> Result<Vec<NormViolation>> {
    require_dense(trajectory)?;
    let times: Vec<usize> = trajectory.records.iter().map(|r| r.t).collect();
    let norms: Vec<Vec<f64>> = trajectory
        .snapshots
        .iter()
        .map(|w| w.columns().map(|c| norm(&coordinates(c, basis))).collect())
        .collect();
    audit_norm_series(&times, &norms, output, class, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainer::{StopReason, TrajectoryRecord};
    use std::f64::consts::PI;

    fn inputs() -> BoundInputs {
        BoundInputs {
            v: 1.0,
            eta: 0.1,
            r: 1.0,
            m_inner: 1.0,
            m_outer: 1.0,
            p_min: 1.0,
            p_max: 1.0,
            dim: 2,
            classes: 2,
        }
    }

    fn trajectory_from(snapshots: Vec<WeightMatrix>, losses: Vec<f64>) -> Trajectory {
        let records = snapshots
            .iter()
            .zip(&losses)
            .enumerate()
            .map(|(t, (w, &l))| TrajectoryRecord {
                t,
                loss_total: l,
                loss_per_class: vec![Some(l), None],
                neuron_norms: w.column_norms(),
                weight_norm: w.norm(),
                grad_norm: 0.0,
                gc_flag_per_class: None,
            })
            .collect();
        Trajectory {
            records,
            snapshots,
            stop_reason: StopReason::MaxIters,
            final_t: losses.len() - 1,
            max_weight_norm: 0.0,
            diverged: false,
            stop_loss: 0.0,
        }
    }

    fn star(angles: &[f64], radius: f64) -> WeightMatrix {
        // owners (class 0) at the given angles, plus one idle class-1 neuron
        let mut cols: Vec<Vec<f64>> = angles.iter().map(|a| vec![radius * a.cos(), radius * a.sin()]).collect();
        cols.push(vec![0.0, 0.0]);
        WeightMatrix::from_columns(&cols).unwrap()
    }

    fn star_output(owners: usize) -> OutputMap {
        let mut o = vec![0; owners];
        o.push(1);
        OutputMap::from_owners(2, o, 1.0).unwrap()
    }

    #[test]
    fn cp_examples() {
        assert_eq!(cp_upper_bound(&inputs()).unwrap(), 1.0);
        let mut i = inputs();
        i.dim = 7;
        assert_eq!(cp_upper_bound(&i).unwrap(), 1.0);
        i.m_outer = 2.0;
        i.dim = 3;
        i.p_max = 0.5;
        i.p_min = 0.1;
        assert_eq!(cp_upper_bound(&i).unwrap(), 2.0);
        let mut j = i;
        j.m_outer = 3.0;
        assert!(cp_upper_bound(&j).unwrap() > 2.0);
    }

    #[test]
    fn p_r_planar_closed_form() {
        // d = 2: integrand 1, so the integral is beta = pi / 6 for v = M = R = 1
        let got = p_r_lower_bound(&inputs()).unwrap();
        let expect = 2.0 / (2.0 * PI) * (PI / 6.0);
        assert!((got - expect).abs() < 1e-10);
        let mut zero = inputs();
        zero.p_min = 0.0;
        assert_eq!(p_r_lower_bound(&zero).unwrap(), 0.0);
        assert!(t1_bound(&zero).is_err());
        let mut flat = inputs();
        flat.dim = 1;
        assert!(p_r_lower_bound(&flat).is_err());
        let mut small = inputs();
        small.r = 0.4;
        assert!(p_r_lower_bound(&small).is_err());
    }

    #[test]
    fn p_r_higher_dimension_antiderivative() {
        // d = 3: integrand sin(theta), so integral 1 - cos(beta); ratio |S^1|/|S^2| = 1/2
        let mut i = inputs();
        i.dim = 3;
        i.r = 2.0;
        let beta = (1.0f64 / 4.0).asin();
        let expect = 0.5 * (1.0 - beta.cos());
        assert!((p_r_lower_bound(&i).unwrap() - expect).abs() < 1e-10);
        // d = 4: integrand sin^2, integral (beta - sin(beta)cos(beta))/2; ratio 4pi/(2pi^2)
        i.dim = 4;
        let expect = 4.0 * PI / (2.0 * PI * PI) * (beta - beta.sin() * beta.cos()) / 2.0;
        assert!((p_r_lower_bound(&i).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn p_r_decreases_with_r() {
        let mut prev = f64::INFINITY;
        for r in [0.6, 1.0, 2.0, 5.0, 20.0] {
            let mut i = inputs();
            i.r = r;
            let p = p_r_lower_bound(&i).unwrap();
            assert!(p < prev);
            prev = p;
        }
    }

    #[test]
    fn bound_arithmetic() {
        let base = t1_bound(&inputs()).unwrap();
        assert!(base.is_finite() && base > 0.0);
        let mut doubled = inputs();
        doubled.eta = 0.2;
        assert!((t1_bound(&doubled).unwrap() - base / 2.0).abs() < 1e-9 * base);

        assert!((phase2_sum_bound(&inputs()).unwrap() - 160.0).abs() < 1e-9);
        let mut big_eta = inputs();
        big_eta.eta = 1e12;
        assert!(phase2_sum_bound(&big_eta).unwrap() < 1e-9);
        let mut bigger_r = inputs();
        bigger_r.r = 2.0;
        assert!(phase2_sum_bound(&bigger_r).unwrap() > 160.0);
        assert!(t1_bound(&bigger_r).unwrap() > base);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(0) - 2.0).abs() < 1e-12);
        assert!((sphere_area(1) - 2.0 * PI).abs() < 1e-12);
        assert!((sphere_area(2) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn phases_of_a_spreading_trajectory() {
        let snaps = vec![
            star(&[0.0, 0.2, 0.4], 1.0),
            star(&[0.0, 1.5, 3.0], 1.1),
            star(&[0.0, 2.1, 4.2], 1.2),
            star(&[0.0, 2.1, 4.2], 1.3),
        ];
        let traj = trajectory_from(snaps, vec![0.9, 0.5, 0.2, 0.1]);
        let out = star_output(3);
        let rep = detect_phases(&traj, &out, 0, None).unwrap();
        assert_eq!(rep.gc_timeline, vec![false, false, true, true]);
        assert_eq!(rep.first_hold, Some(2));
        assert_eq!(rep.t1_size + rep.t2_size, 4);
        assert_eq!(rep.persistence, Some(1.0));
        assert!((rep.sum_sq_loss_t2 - (0.04 + 0.01)).abs() < 1e-15);
        for (i, w) in traj.snapshots.iter().enumerate() {
            assert_eq!(owner_gc(w, &out, 0, None).unwrap(), rep.gc_timeline[i]);
        }
    }

    #[test]
    fn already_spread_start() {
        let traj = trajectory_from(vec![star(&[0.0, 2.1, 4.2], 1.0)], vec![0.0]);
        let rep = detect_phases(&traj, &star_output(3), 0, None).unwrap();
        assert_eq!(rep.first_hold, Some(0));
        assert_eq!(rep.t1_size, 0);
        assert_eq!(rep.gc_timeline.len(), 1);
    }

    #[test]
    fn sparse_trajectory_rejected() {
        let mut traj = trajectory_from(vec![star(&[0.0], 1.0), star(&[0.0], 1.0)], vec![1.0, 1.0]);
        traj.records[1].t = 5;
        assert!(detect_phases(&traj, &star_output(1), 0, None).is_err());
        traj.snapshots.clear();
        assert!(detect_phases(&traj, &star_output(1), 0, None).is_err());
    }

    #[test]
    fn audit_detects_owner_decrease() {
        let traj = trajectory_from(
            vec![star(&[0.0, 1.0], 1.0), star(&[0.0, 1.0], 1.0), star(&[0.0, 1.0], 0.9)],
            vec![1.0, 1.0, 1.0],
        );
        let v = monotonicity_audit(&traj, &star_output(2), 0, None).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.t == 1 && x.kind == ViolationKind::OwnerDecrease));
        let constant = trajectory_from(vec![star(&[0.3], 2.0); 5], vec![1.0; 5]);
        assert!(monotonicity_audit(&constant, &star_output(1), 0, None).unwrap().is_empty());
    }
}
