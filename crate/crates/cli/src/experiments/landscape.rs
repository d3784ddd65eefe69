use std::path::Path;

use anyhow::{bail, Result};
use serde::Serialize;

use reluphase::datagen::{grid_dataset, grid_plane_dataset, make_subspace_pair, GridDatasetSpec};
use reluphase::landscape::{
    construct_zero_loss, critical_point_audit, lipschitz_estimate, AuditVerdict, ClassSupport, GaussianPairSampler,
    HistBin, LandscapeAudit, DELTA_LOSS, EPS_CRIT,
};
use reluphase::loss::{dataset_loss, subgradient};
use reluphase::{LabeledDataset, NetworkParams, OutputMap, Rng};

use super::common::{run_cell, task_setup, RunRecord};
use crate::config::ExperimentConfig;
use crate::output::OutputDir;
use crate::schema;

#[derive(Debug, Clone, Serialize)]
pub struct ConstructedCheck {
    pub task: String,
    pub loss: f64,
    pub grad_norm: f64,
    pub audit: LandscapeAudit,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditSummary {
    pub runs: usize,
    pub global_min: usize,
    pub degenerate_zero_output: usize,
    pub not_critical: usize,
    pub spurious_critical: usize,
    /// Runs ending with gradient norm below `EPS_CRIT` and a nonzero output whose loss exceeds `DELTA_LOSS`.
    pub critical_with_loss: usize,
    pub records: Vec<RunRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzSummary {
    pub pairs: usize,
    pub bias: f64,
    pub s_min: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub all_finite: bool,
    pub skipped: usize,
    pub histogram: Vec<HistBin>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeReport {
    pub constructed: Vec<ConstructedCheck>,
    pub audits: AuditSummary,
    pub lipschitz: LipschitzSummary,
}

fn grid_support(basis: Vec<Vec<f64>>) -> ClassSupport {
    ClassSupport {
        basis,
        m_inner: 1.0,
        m_outer: 2.0,
    }
}

fn check(task: &str, supports: &[Option<ClassSupport>], data: &LabeledDataset, per_class: usize) -> Result<ConstructedCheck> {
    let output = OutputMap::blocks(&[per_class, per_class], 0.5)?;
    let w = construct_zero_loss(supports, &output, &vec![0.0; 2 * per_class])?;
    let params = NetworkParams::without_bias(w, output)?;
    Ok(ConstructedCheck {
        task: task.to_string(),
        loss: dataset_loss(&params, data)?,
        grad_norm: subgradient(&params, data)?.norm(),
        audit: critical_point_audit(&params, data, EPS_CRIT, DELTA_LOSS)?,
    })
}

/// Zero-loss constructions on the grid tasks (3 owners per class).
pub fn constructed_checks() -> Result<Vec<ConstructedCheck>> {
    let spec = GridDatasetSpec::default();
    let plane = grid_plane_dataset(&spec)?;
    let e = |i: usize, d: usize| -> Vec<f64> { (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect() };
    let mut out = vec![check("grid-subspace", &[Some(grid_support(vec![e(0, 2), e(1, 2)])), None], &plane, 3)?];
    let pair = make_subspace_pair(std::f64::consts::FRAC_PI_2)?;
    let ambient = grid_dataset(&pair, &spec, &mut Rng::new(0))?;
    out.push(check(
        "grid-ambient",
        &[Some(grid_support(pair.class_basis(0))), Some(grid_support(pair.class_basis(1)))],
        &ambient,
        3,
    )?);
    Ok(out)
}

/// Ratio statistics of the gradient-Lipschitz diagnostic on the planar grid task with bias.
pub fn lipschitz_summary(cfg: &ExperimentConfig) -> Result<LipschitzSummary> {
    let k = cfg.width;
    if cfg.bias <= 0.0 {
        bail!("gradient Lipschitz continuity needs biases with 0 < sum(b) < 1; set a positive bias (no-bias networks are refused)");
    }
    if cfg.bias * k as f64 >= 1.0 {
        bail!("bias {} on {k} neurons gives sum(b) >= 1", cfg.bias);
    }
    let data = grid_plane_dataset(&GridDatasetSpec::default())?;
    let sampler = GaussianPairSampler {
        dim: 2,
        output: OutputMap::blocks(&[k / 2, k / 2], 0.5)?,
        bias: vec![cfg.bias; k],
        s_min: cfg.lipschitz_s_min,
        s_max: 1.0,
    };
    let est = lipschitz_estimate(|r: &mut Rng| sampler.sample(r), &data, cfg.lipschitz_pairs, cfg.seed_base, cfg.hist_bins)?;
    let mut sorted = est.ratios.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LipschitzSummary {
        pairs: cfg.lipschitz_pairs,
        bias: cfg.bias,
        s_min: cfg.lipschitz_s_min,
        max_ratio: est.max_ratio,
        median_ratio: if sorted.is_empty() { f64::NAN } else { crate::stats::quantile(&sorted, 0.5) },
        all_finite: est.ratios.iter().all(|r| r.is_finite()),
        skipped: est.skipped,
        histogram: est.histogram,
    })
}

pub fn summarize_audits(records: Vec<RunRecord>) -> AuditSummary {
    let count = |v: AuditVerdict| records.iter().filter(|r| r.audit.verdict == v).count();
    let critical_with_loss = records
        .iter()
        .filter(|r| r.audit.grad_norm < EPS_CRIT && r.audit.nonzero_output_witness.is_some() && r.audit.loss >= DELTA_LOSS)
        .count();
    AuditSummary {
        runs: records.len(),
        global_min: count(AuditVerdict::GlobalMin),
        degenerate_zero_output: count(AuditVerdict::DegenerateZeroOutput),
        not_critical: count(AuditVerdict::NotCritical),
        spurious_critical: count(AuditVerdict::SpuriousCritical),
        critical_with_loss,
        records,
    }
}

pub fn cmd_landscape_audit(cfg: &ExperimentConfig, out_dir: &Path) -> Result<LandscapeReport> {
    cfg.validate()?;
    let lipschitz = lipschitz_summary(cfg)?;
    let constructed = constructed_checks()?;
    let setup = task_setup(cfg, cfg.theta)?;
    let records = run_cell(cfg, &setup, cfg.init, cfg.width, cfg.runs_or(20))?;
    let report = LandscapeReport {
        constructed,
        audits: summarize_audits(records),
        lipschitz,
    };
    let mut out = OutputDir::create(out_dir, "landscape-audit")?;
    out.write_json("config.json", &schema::CONFIG_JSON, cfg)?;
    out.write_json("landscape_report.json", &schema::LANDSCAPE_JSON, &report)?;
    out.finish()?;
    Ok(report)
}
