//! Task construction and the single-run pipeline shared by every command.

use anyhow::{bail, Result};
use rayon::prelude::*;
use serde::Serialize;

use reluphase::datagen::{
    binary_network, grid_dataset, grid_plane_dataset, init_fan, init_halfspace, init_random, make_subspace_pair,
    sample_annulus, AnnulusDistribution, GridDatasetSpec,
};
use reluphase::landscape::{critical_point_audit, LandscapeAudit, DELTA_LOSS, EPS_CRIT};
use reluphase::phases::{
    detect_phases, monotonicity_audit, monotonicity_audit_projected, p_r_lower_bound, phase2_sum_bound, t1_bound,
    BoundInputs, PhaseReport,
};
use reluphase::trainer::{iterations_to_convergence, train, Objective, StopReason, TrainConfig, Trajectory};
use reluphase::{LabeledDataset, NetworkParams, Rng, WeightMatrix};

use crate::config::{ExperimentConfig, Init, Task};
use crate::output::{fmt_f64, fmt_opt_f64, fmt_opt_usize};

/// Angle-sweep noise when the config leaves it unset.
pub const DEFAULT_AMBIENT_NOISE: f64 = 0.05;

pub struct TaskSetup {
    pub task: Task,
    pub theta: Option<f64>,
    pub data: LabeledDataset,
    pub dim: usize,
    pub train_classes: Vec<usize>,
    pub objective: Objective,
    /// Orthonormal basis of each trained class's subspace when it is a proper
    /// subspace of the input space.
    pub bases: Vec<Option<Vec<Vec<f64>>>>,
    pub annulus: Option<AnnulusDistribution>,
}

pub fn task_setup(cfg: &ExperimentConfig, theta: f64) -> Result<TaskSetup> {
    let spec = GridDatasetSpec::default();
    Ok(match cfg.task {
        Task::GridSubspace => TaskSetup {
            task: cfg.task,
            theta: None,
            data: grid_plane_dataset(&spec)?,
            dim: 2,
            train_classes: vec![0],
            objective: Objective::ClassMean,
            bases: vec![None],
            annulus: None,
        },
        Task::GridAmbient => {
            let pair = make_subspace_pair(theta)?;
            let spec = GridDatasetSpec::with_noise(cfg.noise_std.unwrap_or(DEFAULT_AMBIENT_NOISE));
            let data = grid_dataset(&pair, &spec, &mut Rng::new(cfg.data_seed))?;
            TaskSetup {
                task: cfg.task,
                theta: Some(theta),
                data,
                dim: 4,
                train_classes: vec![0, 1],
                objective: Objective::ClassSum,
                bases: vec![Some(pair.class_basis(0)), Some(pair.class_basis(1))],
                annulus: None,
            }
        }
        Task::Annulus => {
            let a = &cfg.annulus;
            let basis: Vec<Vec<f64>> = (0..a.dim)
                .map(|i| (0..a.dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let dist = AnnulusDistribution {
                basis,
                m_inner: a.m_inner,
                m_outer: a.m_outer,
            };
            let sampled = sample_annulus(std::slice::from_ref(&dist), a.samples, &mut Rng::new(cfg.data_seed))?;
            let data = LabeledDataset::new(sampled.samples().to_vec(), 2)?;
            TaskSetup {
                task: cfg.task,
                theta: None,
                data,
                dim: a.dim,
                train_classes: vec![0],
                objective: Objective::ClassMean,
                bases: vec![None],
                annulus: Some(dist),
            }
        }
    })
}

pub fn initial_weights(init: Init, dim: usize, width: usize, seed: u64) -> Result<WeightMatrix> {
    let mut rng = Rng::new(seed);
    Ok(match init {
        Init::Random => init_random(dim, width, &mut rng),
        Init::Halfspace => init_halfspace(dim, width, &mut rng)?,
        Init::Fan => {
            if dim != 2 || width != 6 {
                bail!("fan initialization needs a planar task with width 6");
            }
            init_fan(3)
        }
    })
}

pub fn train_config(cfg: &ExperimentConfig, setup: &TaskSetup) -> TrainConfig {
    TrainConfig {
        eta: cfg.eta,
        max_iters: cfg.max_iters,
        stop_loss: 0.0,
        record_every: cfg.record_every,
        train_classes: Some(setup.train_classes.clone()),
        objective: setup.objective,
        keep_snapshots: cfg.record_every == 1,
        r_max: cfg.r_max,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub cell: String,
    pub theta: Option<f64>,
    pub width: usize,
    pub init: Init,
    pub run: usize,
    pub seed: u64,
    pub stop_reason: StopReason,
    pub converged: bool,
    pub iterations: Option<usize>,
    pub final_t: usize,
    pub final_loss: f64,
    pub max_weight_norm: f64,
    pub diverged: bool,
    /// Owner-norm decreases measured in each trained class's subspace.
    pub owner_violations: Option<usize>,
    /// Latest first-hold iteration over the trained classes.
    pub first_hold: Option<usize>,
    pub persistence: Option<f64>,
    pub sum_sq_loss_t2: Option<f64>,
    pub audit: LandscapeAudit,
}

impl RunRecord {
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.cell.clone(),
            fmt_opt_f64(self.theta),
            self.width.to_string(),
            self.init.name().to_string(),
            self.run.to_string(),
            self.seed.to_string(),
            format!("{:?}", self.stop_reason),
            self.converged.to_string(),
            fmt_opt_usize(self.iterations),
            self.final_t.to_string(),
            fmt_f64(self.final_loss),
            fmt_f64(self.max_weight_norm),
            self.diverged.to_string(),
            fmt_opt_usize(self.owner_violations),
            fmt_opt_usize(self.first_hold),
            fmt_opt_f64(self.persistence),
            fmt_opt_f64(self.sum_sq_loss_t2),
            fmt_f64(self.audit.grad_norm),
            serde_json::to_value(self.audit.verdict)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default(),
        ]
    }
}

pub fn runs_header() -> Vec<String> {
    crate::schema::RUNS.columns.iter().map(|(n, _)| n.to_string()).collect()
}

pub struct RunOutcome {
    pub record: RunRecord,
    pub phases: Vec<PhaseReport>,
    pub params: NetworkParams,
    pub trajectory: Trajectory,
}

pub fn cell_name(setup: &TaskSetup, init: Init, width: usize) -> String {
    match setup.theta {
        Some(th) => format!("theta={th:.6}/width={width}/{}", init.name()),
        None => format!("width={width}/{}", init.name()),
    }
}

/// Trains run `run` (seed `seed_base + run`) and analyses its trajectory.
pub fn run_one(cfg: &ExperimentConfig, setup: &TaskSetup, init: Init, width: usize, run: usize) -> Result<RunOutcome> {
    let seed = cfg.seed_base + run as u64;
    let weights = initial_weights(init, setup.dim, width, seed)?;
    let params = binary_network(weights)?;
    let tcfg = train_config(cfg, setup);
    let mut outcome = train(&params, &setup.data, &tcfg)?;
    let traj = &mut outcome.trajectory;
    let iterations = iterations_to_convergence(traj);

    let mut phases = Vec::new();
    let mut violations = None;
    if cfg.record_every == 1 {
        let mut count = 0;
        for (&class, basis) in setup.train_classes.iter().zip(&setup.bases) {
            let b = basis.as_deref();
            phases.push(detect_phases(traj, params.output(), class, b)?);
            count += match b {
                Some(b) => monotonicity_audit_projected(traj, params.output(), class, b)?.len(),
                None => monotonicity_audit(traj, params.output(), class, None)?.len(),
            };
        }
        violations = Some(count);
        reluphase::phases::annotate_trajectory(traj, &phases, setup.data.classes());
        traj.snapshots.clear();
    }
    let first_hold = if phases.is_empty() {
        None
    } else {
        phases.iter().map(|p| p.first_hold).collect::<Option<Vec<_>>>().and_then(|v| v.into_iter().max())
    };
    let persistence = if phases.is_empty() {
        None
    } else {
        phases
            .iter()
            .map(|p| p.persistence)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.into_iter().fold(1.0, f64::min))
    };
    let sum_sq = (!phases.is_empty()).then(|| phases.iter().map(|p| p.sum_sq_loss_t2).sum());
    let audit = critical_point_audit(&outcome.params, &setup.data, EPS_CRIT, DELTA_LOSS)?;
    let final_loss = traj.records.last().map(|r| r.loss_total).unwrap_or(f64::NAN);
    let record = RunRecord {
        cell: cell_name(setup, init, width),
        theta: setup.theta,
        width,
        init,
        run,
        seed,
        stop_reason: traj.stop_reason,
        converged: traj.stop_reason == StopReason::Converged,
        iterations,
        final_t: traj.final_t,
        final_loss,
        max_weight_norm: traj.max_weight_norm,
        diverged: traj.diverged,
        owner_violations: violations,
        first_hold,
        persistence,
        sum_sq_loss_t2: sum_sq,
        audit,
    };
    Ok(RunOutcome {
        record,
        phases,
        params: outcome.params,
        trajectory: outcome.trajectory,
    })
}

/// `runs` independent runs in parallel, returned in run order.
pub fn run_cell(cfg: &ExperimentConfig, setup: &TaskSetup, init: Init, width: usize, runs: usize) -> Result<Vec<RunRecord>> {
    if runs < 1 {
        bail!("runs must be at least 1");
    }
    (0..runs)
        .into_par_iter()
        .map(|r| run_one(cfg, setup, init, width, r).map(|o| o.record))
        .collect()
}

/// Theory-bound diagnostics for annulus runs, with `R` measured as `max_t |W^t|`.
#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub inputs: BoundInputs,
    pub measured: MeasuredPhases,
    pub p_r: Option<f64>,
    pub t1_bound: Option<f64>,
    pub phase2_sum_bound: Option<f64>,
    pub t1_dominated: Option<bool>,
    pub phase2_dominated: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasuredPhases {
    pub t1_size: usize,
    pub sum_sq_loss_t2: f64,
    pub r: f64,
}

pub fn bounds_report(cfg: &ExperimentConfig, setup: &TaskSetup, out: &RunOutcome) -> Option<BoundsReport> {
    let dist = setup.annulus.as_ref()?;
    let phase = out.phases.first()?;
    let inputs = BoundInputs {
        v: out.params.output().magnitude(),
        eta: cfg.eta,
        r: out.record.max_weight_norm,
        m_inner: dist.m_inner,
        m_outer: dist.m_outer,
        p_min: dist.density(),
        p_max: dist.density(),
        dim: dist.dim(),
        classes: setup.data.classes(),
    };
    let mut warnings = Vec::new();
    let mut note = |r: reluphase::Result<f64>| match r {
        Ok(v) => Some(v),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let p_r = note(p_r_lower_bound(&inputs));
    let t1 = note(t1_bound(&inputs));
    let p2 = note(phase2_sum_bound(&inputs));
    let t1_ok = t1.map(|b| phase.t1_size as f64 <= b);
    let p2_ok = p2.map(|b| phase.sum_sq_loss_t2 <= b);
    if t1_ok == Some(false) {
        warnings.push(format!("slow phase lasted {} iterations, above the bound {:.6e}", phase.t1_size, t1.unwrap_or(0.0)));
    }
    if p2_ok == Some(false) {
        warnings.push(format!(
            "fast-phase squared loss sum {:.6e} exceeds the bound {:.6e}",
            phase.sum_sq_loss_t2,
            p2.unwrap_or(0.0)
        ));
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Some(BoundsReport {
        inputs,
        measured: MeasuredPhases {
            t1_size: phase.t1_size,
            sum_sq_loss_t2: phase.sum_sq_loss_t2,
            r: out.record.max_weight_norm,
        },
        p_r,
        t1_bound: t1,
        phase2_sum_bound: p2,
        t1_dominated: t1_ok,
        phase2_dominated: p2_ok,
        warnings,
    })
}
