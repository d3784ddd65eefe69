use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use reluphase::geometry::{gc_probability, gc_probability_exact, gc_probability_mc, McEstimate};

use crate::config::ExperimentConfig;
use crate::output::{fmt_f64, fmt_opt_f64, OutputDir};
use crate::schema;

#[derive(Debug, Clone, Serialize)]
pub struct GcRow {
    pub d: usize,
    pub k: usize,
    pub closed_form: f64,
    pub exact: String,
    pub mc: McEstimate,
    /// `(mc - p) / sqrt(p (1 - p) / trials)`; undefined when `p` is 0 or 1.
    pub z_score: Option<f64>,
}

impl GcRow {
    /// Agreement within `sigmas` binomial standard errors, or exact agreement when `p` is 0 or 1.
    pub fn agrees(&self, sigmas: f64) -> bool {
        match self.z_score {
            Some(z) => z.abs() <= sigmas,
            None => self.mc.estimate == self.closed_form,
        }
    }
}

/// Closed-form probability of the geometric condition against Monte Carlo.
pub fn cmd_gc_prob(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Vec<GcRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for (i, &(d, k)) in cfg.gc_pairs.iter().enumerate() {
        let p = gc_probability(d, k)?;
        let exact = gc_probability_exact(d, k)?.to_string();
        let mc = gc_probability_mc(d, k, cfg.mc_trials, cfg.seed_base.wrapping_add(i as u64))?;
        let se = (p * (1.0 - p) / mc.trials as f64).sqrt();
        let z_score = (se > 0.0).then(|| (mc.estimate - p) / se);
        rows.push(GcRow {
            d,
            k,
            closed_form: p,
            exact,
            mc,
            z_score,
        });
    }
    let mut out = OutputDir::create(out_dir, "gc-prob")?;
    out.write_json("config.json", &schema::CONFIG_JSON, cfg)?;
    let header: Vec<String> = schema::GC_TABLE.columns.iter().map(|(n, _)| n.to_string()).collect();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.d.to_string(),
                r.k.to_string(),
                fmt_f64(r.closed_form),
                r.exact.clone(),
                fmt_f64(r.mc.estimate),
                fmt_f64(r.mc.stderr),
                r.mc.trials.to_string(),
                r.mc.holds.to_string(),
                fmt_opt_f64(r.z_score),
            ]
        })
        .collect();
    out.write_csv("gc_table.csv", &schema::GC_TABLE, &header, &table)?;
    out.finish()?;
    Ok(rows)
}
