use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use reluphase::phases::PhaseReport;
use reluphase::trainer::TrajectoryRecord;

use super::common::{bounds_report, run_one, task_setup, RunOutcome, RunRecord};
use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, fmt_opt_f64, OutputDir};
use crate::schema;
use crate::svg::{line_plot, Series};

#[derive(Serialize)]
struct RunJson<'a> {
    record: &'a RunRecord,
    trajectory: TrajectoryJson<'a>,
    final_weights: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct TrajectoryJson<'a> {
    stop_reason: reluphase::trainer::StopReason,
    final_t: usize,
    max_weight_norm: f64,
    diverged: bool,
    records: &'a [TrajectoryRecord],
}

#[derive(Serialize)]
struct PhasesJson<'a> {
    reports: &'a [PhaseReport],
}

fn trajectory_rows(records: &[TrajectoryRecord], classes: usize, neurons: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = schema::TRAJECTORY.columns.iter().map(|(n, _)| n.to_string()).collect();
    header.extend((1..=classes).map(|c| format!("loss_class{c}")));
    header.extend((1..=classes).map(|c| format!("gc_class{c}")));
    header.extend((1..=neurons).map(|j| format!("norm_{j}")));
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.t.to_string(), fmt_f64(r.loss_total), fmt_f64(r.weight_norm), fmt_f64(r.grad_norm)];
            row.extend(r.loss_per_class.iter().map(|l| fmt_opt_f64(*l)));
            row.extend((0..classes).map(|c| match &r.gc_flag_per_class {
                Some(f) => f[c].to_string(),
                None => "NA".to_string(),
            }));
            row.extend(r.neuron_norms.iter().map(|n| fmt_f64(*n)));
            row
        })
        .collect();
    (header, rows)
}

/// Single training run with trajectory, phase, audit and (annulus task) bound outputs.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    let setup = task_setup(cfg, cfg.theta)?;
    let outcome = run_one(cfg, &setup, cfg.init, cfg.width, 0)?;
    let mut out = OutputDir::create(out_dir, "train")?;
    out.write_json("config.json", &schema::CONFIG_JSON, cfg)?;

    let traj = &outcome.trajectory;
    let (header, rows) = trajectory_rows(&traj.records, setup.data.classes(), outcome.params.neurons());
    out.write_csv("trajectory.csv", &schema::TRAJECTORY, &header, &rows)?;
    out.write_json(
        "run.json",
        &schema::RUN_JSON,
        &RunJson {
            record: &outcome.record,
            trajectory: TrajectoryJson {
                stop_reason: traj.stop_reason,
                final_t: traj.final_t,
                max_weight_norm: traj.max_weight_norm,
                diverged: traj.diverged,
                records: &traj.records,
            },
            final_weights: outcome.params.weights.to_columns(),
        },
    )?;
    out.write_json("phases.json", &schema::PHASES_JSON, &PhasesJson { reports: &outcome.phases })?;
    out.write_json("landscape_audit.json", &schema::AUDIT_JSON, &outcome.record.audit)?;
    if let Some(b) = bounds_report(cfg, &setup, &outcome) {
        out.write_json("bounds.json", &schema::BOUNDS_JSON, &b)?;
    }
    let series = Series {
        name: "training loss".into(),
        points: traj.records.iter().map(|r| (r.t as f64, r.loss_total, 0.0)).collect(),
    };
    out.write_svg("loss.svg", &line_plot("Training loss", "iteration", "loss", &[series]))?;
    out.finish()?;
    Ok(outcome)
}
