//! Full-batch gradient descent `W <- W - eta * grad l(W)` with trajectory recording.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::loss::{class_loss, loss_and_subgradient_on, LabeledDataset};
use crate::model::{NetworkParams, WeightMatrix};

/// How the per-class losses of the trained classes are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// `(1/|S|) sum_{i in S} l_i`
    #[default]
    ClassMean,
    /// `sum_{i in S} l_i`
    ClassSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub eta: f64,
    pub max_iters: usize,
    pub stop_loss: f64,
    pub record_every: usize,
    /// Classes whose losses are descended; `None` means every class present in the data.
    pub train_classes: Option<Vec<usize>>,
    pub objective: Objective,
    /// Keep a weight snapshot with every record.
    pub keep_snapshots: bool,
    /// Divergence flag threshold for `max_t |W^t|`.
    pub r_max: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            max_iters: 5000,
            stop_loss: 0.0,
            record_every: 1,
            train_classes: None,
            objective: Objective::ClassMean,
            keep_snapshots: false,
            r_max: 1e3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return config_err(format!("eta must be finite and non-negative, got {}", self.eta));
        }
        if self.max_iters < 1 {
            return config_err("max_iters must be at least 1");
        }
        if self.record_every < 1 {
            return config_err("record_every must be at least 1");
        }
        if !(self.stop_loss >= 0.0) {
            return config_err("stop_loss must be non-negative");
        }
        Ok(())
    }

    fn classes(&self, data: &LabeledDataset) -> Result<Vec<usize>> {
        match &self.train_classes {
            None => Ok(data.present_classes()),
            Some(list) => {
                if list.is_empty() {
                    return config_err("train_classes must not be empty");
                }
                for &c in list {
                    if c >= data.classes() || data.class_count(c) == 0 {
                        return Err(Error::EmptyClass(c));
                    }
                }
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    /// Value of the training objective.
    pub loss_total: f64,
    /// `l_i(W^t)` for every class present in the data (`None` for absent classes).
    pub loss_per_class: Vec<Option<f64>>,
    pub neuron_norms: Vec<f64>,
    pub weight_norm: f64,
    /// Column-norm sum of the objective's subgradient.
    pub grad_norm: f64,
    /// Filled in by phase analysis.
    pub gc_flag_per_class: Option<Vec<bool>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
    /// Zero gradient at the initial point with positive loss.
    DeadStart,
    /// Zero gradient at a later iterate with positive loss.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Weight snapshots aligned with `records` when requested.
    pub snapshots: Vec<WeightMatrix>,
    pub stop_reason: StopReason,
    /// Last iteration index evaluated.
    pub final_t: usize,
    /// `max_t |W^t|` over every iterate, recorded or not.
    pub max_weight_norm: f64,
    pub diverged: bool,
    pub stop_loss: f64,
}

/// Combined objective value and subgradient over the trained classes.
pub fn objective_and_gradient(
    params: &NetworkParams,
    data: &LabeledDataset,
    classes: &[usize],
    objective: Objective,
) -> Result<(f64, WeightMatrix)> {
    let weight = match objective {
        Objective::ClassMean => 1.0 / classes.len() as f64,
        Objective::ClassSum => 1.0,
    };
    let mut loss = 0.0;
    let mut grad = WeightMatrix::zeros(params.dim(), params.neurons());
    for &c in classes {
        let (l, g) = loss_and_subgradient_on(params, data, data.class_indices(c))?;
        loss += weight * l;
        grad.add_scaled(weight, &g);
    }
    Ok((loss, grad))
}

/// One gradient step on the configured objective.
pub fn gd_step(params: &NetworkParams, data: &LabeledDataset, cfg: &TrainConfig) -> Result<NetworkParams> {
    cfg.validate()?;
    let classes = cfg.classes(data)?;
    let (_, grad) = objective_and_gradient(params, data, &classes, cfg.objective)?;
    apply_step(params, &grad, cfg.eta, 0)
}

fn apply_step(params: &NetworkParams, grad: &WeightMatrix, eta: f64, t: usize) -> Result<NetworkParams> {
    if !grad.is_finite() {
        return Err(Error::NonFinite(format!("gradient at iteration {t}")));
    }
    let mut w = params.weights.clone();
    w.add_scaled(-eta, grad);
    if !w.is_finite() {
        return Err(Error::NonFinite(format!("weights after iteration {t}")));
    }
    Ok(params.with_weights(w))
}

/// Whether some owner neuron of a trained class is active (`|<w_j, x>| > b_j`) on
/// some sample of that class. Without it the first gradient can vanish.
pub fn activation_precondition(params: &NetworkParams, data: &LabeledDataset, classes: &[usize]) -> bool {
    classes.iter().any(|&c| {
        data.class_samples(c).any(|s| {
            params.output().owned_by(c).any(|j| {
                let inner = crate::linalg::dot(params.weights.col(j), &s.x);
                inner.abs() > params.bias()[j]
            })
        })
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub trajectory: Trajectory,
}

pub fn train(initial: &NetworkParams, data: &LabeledDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let classes = cfg.classes(data)?;
    if !activation_precondition(initial, data, &classes) {
        warn!("no owner neuron is active on its class at initialization; gradient descent may not move");
    }
    let present = data.present_classes();
    let mut params = initial.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut max_norm: f64 = 0.0;
    let mut t = 0;
    let stop_reason = loop {
        let (loss, grad) = objective_and_gradient(&params, data, &classes, cfg.objective)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("loss at iteration {t}")));
        }
        let weight_norm = params.weights.norm();
        max_norm = max_norm.max(weight_norm);
        let grad_norm = grad.norm();

        let converged = loss <= cfg.stop_loss;
        let zero_grad = grad.as_slice().iter().all(|&g| g == 0.0);
        let reason = if converged {
            Some(StopReason::Converged)
        } else if zero_grad && t == 0 {
            Some(StopReason::DeadStart)
        } else if zero_grad {
            Some(StopReason::Stalled)
        } else if t >= cfg.max_iters {
            Some(StopReason::MaxIters)
        } else {
            None
        };

        if t % cfg.record_every == 0 || reason.is_some() {
            let loss_per_class = (0..data.classes())
                .map(|c| {
                    if present.contains(&c) {
                        class_loss(&params, data, c).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            records.push(TrajectoryRecord {
                t,
                loss_total: loss,
                loss_per_class,
                neuron_norms: params.weights.column_norms(),
                weight_norm,
                grad_norm,
                gc_flag_per_class: None,
            });
            if cfg.keep_snapshots {
                snapshots.push(params.weights.clone());
            }
        }
        if let Some(r) = reason {
            break r;
        }
        params = apply_step(&params, &grad, cfg.eta, t)?;
        t += 1;
    };
    let diverged = max_norm > cfg.r_max;
    if diverged {
        warn!("weight norm reached {max_norm:.3e}, above r_max = {:.3e}", cfg.r_max);
    }
    Ok(TrainOutcome {
        params,
        trajectory: Trajectory {
            records,
            snapshots,
            stop_reason,
            final_t: t,
            max_weight_norm: max_norm,
            diverged,
            stop_loss: cfg.stop_loss,
        },
    })
}

/// First recorded iteration whose objective reached the stop threshold.
pub fn iterations_to_convergence(trajectory: &Trajectory) -> Option<usize> {
    trajectory
        .records
        .iter()
        .find(|r| r.loss_total <= trajectory.stop_loss)
        .map(|r| r.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{dataset_loss, LabeledSample};
    use crate::model::OutputMap;

    fn tiny_problem(w0: Vec<f64>) -> (NetworkParams, LabeledDataset) {
        let w = WeightMatrix::from_columns(&[w0, vec![0.0, 0.0]]).unwrap();
        let out = OutputMap::round_robin(2, 2, 1.0).unwrap();
        let p = NetworkParams::without_bias(w, out).unwrap();
        let data = LabeledDataset::new(
            vec![LabeledSample {
                x: vec![1.0, 0.0],
                label: 0,
            }],
            2,
        )
        .unwrap();
        (p, data)
    }

    #[test]
    fn single_step_matches_hand_computation() {
        let (p, data) = tiny_problem(vec![0.1, 0.0]);
        let next = gd_step(&p, &data, &TrainConfig::default()).unwrap();
        assert!((next.weights.col(0)[0] - 0.3).abs() < 1e-15);
        assert_eq!(next.weights.col(0)[1], 0.0);
    }

    #[test]
    fn zero_eta_and_zero_loss_are_fixed_points() {
        let (p, data) = tiny_problem(vec![0.1, 0.0]);
        let cfg = TrainConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert_eq!(gd_step(&p, &data, &cfg).unwrap(), p);

        let (q, data) = tiny_problem(vec![5.0, 0.0]);
        assert_eq!(dataset_loss(&q, &data).unwrap(), 0.0);
        assert_eq!(gd_step(&q, &data, &TrainConfig::default()).unwrap(), q);
        let out = train(&q, &data, &TrainConfig::default()).unwrap();
        assert_eq!(out.trajectory.stop_reason, StopReason::Converged);
        assert_eq!(iterations_to_convergence(&out.trajectory), Some(0));
        assert_eq!(out.trajectory.records.len(), 1);
    }

    #[test]
    fn zero_init_is_a_dead_start() {
        let (p, data) = tiny_problem(vec![0.0, 0.0]);
        let out = train(&p, &data, &TrainConfig::default()).unwrap();
        assert_eq!(out.trajectory.stop_reason, StopReason::DeadStart);
        assert_eq!(iterations_to_convergence(&out.trajectory), None);
    }

    #[test]
    fn tiny_problem_converges() {
        let (p, data) = tiny_problem(vec![0.1, 0.0]);
        let out = train(&p, &data, &TrainConfig::default()).unwrap();
        // w: 0.1 -> 0.3 -> 0.5, where 2 * 0.5 = 1 meets the margin
        assert_eq!(out.trajectory.stop_reason, StopReason::Converged);
        assert_eq!(iterations_to_convergence(&out.trajectory), Some(2));
        assert_eq!(out.trajectory.final_t, 2);
    }

    #[test]
    fn capped_run_reports_none() {
        let (p, data) = tiny_problem(vec![0.1, 0.0]);
        let cfg = TrainConfig {
            eta: 0.001,
            max_iters: 5,
            record_every: 2,
            ..Default::default()
        };
        let out = train(&p, &data, &cfg).unwrap();
        assert_eq!(out.trajectory.stop_reason, StopReason::MaxIters);
        assert_eq!(iterations_to_convergence(&out.trajectory), None);
        let ts: Vec<usize> = out.trajectory.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 2, 4, 5]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let (p, data) = tiny_problem(vec![0.1, 0.0]);
        for cfg in [
            TrainConfig {
                max_iters: 0,
                ..Default::default()
            },
            TrainConfig {
                eta: -1.0,
                ..Default::default()
            },
            TrainConfig {
                record_every: 0,
                ..Default::default()
            },
            TrainConfig {
                train_classes: Some(vec![1]),
                ..Default::default()
            },
        ] {
            assert!(train(&p, &data, &cfg).is_err());
        }
    }
}
