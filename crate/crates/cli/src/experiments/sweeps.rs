use std::path::Path;

use anyhow::Result;

use reluphase::landscape::histogram;

use super::common::{run_cell, runs_header, task_setup, RunRecord};
use crate::config::{ExperimentConfig, Init, Task};
use crate::output::{fmt_f64, fmt_opt_f64, OutputDir};
use crate::schema;
use crate::stats::{summarize, Summary};
use crate::svg::{box_plot, line_plot, BoxGroup, Series};

/// Runs of one configuration cell with iteration statistics over the converged runs.
#[derive(Debug, Clone)]
pub struct Cell {
    pub theta: Option<f64>,
    pub width: usize,
    pub init: Init,
    pub runs: Vec<RunRecord>,
    pub summary: Option<Summary>,
}

impl Cell {
    fn new(theta: Option<f64>, width: usize, init: Init, runs: Vec<RunRecord>) -> Self {
        let iters: Vec<f64> = runs.iter().filter_map(|r| r.iterations).map(|i| i as f64).collect();
        Self {
            theta,
            width,
            init,
            summary: summarize(&iters),
            runs,
        }
    }

    pub fn converged(&self) -> usize {
        self.runs.iter().filter(|r| r.converged).count()
    }

    pub fn mean(&self) -> Option<f64> {
        self.summary.map(|s| s.mean)
    }

    fn aggregate_row(&self) -> Vec<String> {
        let s = self.summary;
        let f = |g: fn(&Summary) -> f64| fmt_opt_f64(s.as_ref().map(g));
        vec![
            self.runs.first().map(|r| r.cell.clone()).unwrap_or_default(),
            fmt_opt_f64(self.theta),
            self.width.to_string(),
            self.init.name().to_string(),
            self.runs.len().to_string(),
            self.converged().to_string(),
            f(|s| s.mean),
            fmt_opt_f64(s.and_then(|s| s.std)),
            f(|s| s.min),
            f(|s| s.q1),
            f(|s| s.median),
            f(|s| s.q3),
            f(|s| s.max),
        ]
    }
}

fn write_tables(out: &mut OutputDir, cells: &[Cell]) -> Result<()> {
    let rows: Vec<Vec<String>> = cells.iter().flat_map(|c| c.runs.iter().map(RunRecord::csv_row)).collect();
    out.write_csv("runs.csv", &schema::RUNS, &runs_header(), &rows)?;
    let header: Vec<String> = schema::AGGREGATE.columns.iter().map(|(n, _)| n.to_string()).collect();
    let agg: Vec<Vec<String>> = cells.iter().map(Cell::aggregate_row).collect();
    out.write_csv("aggregate.csv", &schema::AGGREGATE, &header, &agg)
}

/// Iterations to convergence versus subspace angle on the ambient grid task.
pub fn cmd_sweep_angle(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<Cell>> {
    let cfg = ExperimentConfig {
        task: Task::GridAmbient,
        ..cfg.clone()
    };
    cfg.validate()?;
    let runs = cfg.runs_or(100);
    let mut cells = Vec::new();
    for &theta in &cfg.thetas {
        let setup = task_setup(&cfg, theta)?;
        let records = run_cell(&cfg, &setup, cfg.init, cfg.width, runs)?;
        cells.push(Cell::new(Some(theta), cfg.width, cfg.init, records));
    }
    let mut out = OutputDir::create(out_dir, "sweep-angle")?;
    out.write_json("config.json", &schema::CONFIG_JSON, &cfg)?;
    write_tables(&mut out, &cells)?;
    let series = Series {
        name: "mean iterations (converged runs)".into(),
        points: cells
            .iter()
            .filter_map(|c| c.summary.map(|s| (c.theta.unwrap_or(0.0), s.mean, s.std.unwrap_or(0.0))))
            .collect(),
    };
    out.write_svg(
        "sweep_angle.svg",
        &line_plot("Iterations to convergence vs subspace angle", "theta (rad)", "iterations", &[series]),
    )?;
    out.finish()?;
    Ok(cells)
}

/// Iterations to convergence versus width under random and half-space initialization.
pub fn cmd_sweep_width(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<Cell>> {
    cfg.validate()?;
    let runs = cfg.runs_or(100);
    let setup = task_setup(cfg, cfg.theta)?;
    let mut cells = Vec::new();
    for &width in &cfg.widths {
        for init in [Init::Random, Init::Halfspace] {
            let records = run_cell(cfg, &setup, init, width, runs)?;
            cells.push(Cell::new(setup.theta, width, init, records));
        }
    }
    let mut out = OutputDir::create(out_dir, "sweep-width")?;
    out.write_json("config.json", &schema::CONFIG_JSON, cfg)?;
    write_tables(&mut out, &cells)?;
    let groups: Vec<BoxGroup> = cells
        .iter()
        .filter_map(|c| {
            c.summary.map(|s| BoxGroup {
                label: format!("2k={} {}", c.width, c.init.name()),
                min: s.min,
                q1: s.q1,
                median: s.median,
                q3: s.q3,
                max: s.max,
            })
        })
        .collect();
    out.write_svg("sweep_width.svg", &box_plot("Iterations to convergence vs width", "iterations", &groups))?;
    out.finish()?;
    Ok(cells)
}

pub struct NormHist {
    pub runs: Vec<RunRecord>,
    pub bins: Vec<reluphase::landscape::HistBin>,
}

/// Histogram of `max_t |W^t|` across seeded runs.
pub fn cmd_norm_hist(cfg: &ExperimentConfig, out_dir: &Path) -> Result<NormHist> {
    cfg.validate()?;
    let runs = cfg.runs_or(200);
    let setup = task_setup(cfg, cfg.theta)?;
    let records = run_cell(cfg, &setup, cfg.init, cfg.width, runs)?;
    let norms: Vec<f64> = records.iter().map(|r| r.max_weight_norm).collect();
    let bins = histogram(&norms, cfg.hist_bins);
    let mut out = OutputDir::create(out_dir, "norm-hist")?;
    out.write_json("config.json", &schema::CONFIG_JSON, cfg)?;
    let rows: Vec<Vec<String>> = records.iter().map(RunRecord::csv_row).collect();
    out.write_csv("runs.csv", &schema::RUNS, &runs_header(), &rows)?;
    let header: Vec<String> = schema::HISTOGRAM.columns.iter().map(|(n, _)| n.to_string()).collect();
    let hist_rows: Vec<Vec<String>> = bins
        .iter()
        .enumerate()
        .map(|(i, b)| vec![i.to_string(), fmt_f64(b.lo), fmt_f64(b.hi), b.count.to_string()])
        .collect();
    out.write_csv("histogram.csv", &schema::HISTOGRAM, &header, &hist_rows)?;
    let triples: Vec<(f64, f64, usize)> = bins.iter().map(|b| (b.lo, b.hi, b.count)).collect();
    out.write_svg("norm_hist.svg", &crate::svg::histogram("Histogram of max_t |W^t|", "max_t |W^t|", &triples))?;
    out.finish()?;
    Ok(NormHist { runs: records, bins })
}
