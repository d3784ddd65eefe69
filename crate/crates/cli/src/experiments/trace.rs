use std::path::Path;

use anyhow::Result;
use serde::Serialize;

use reluphase::datagen::{binary_network, init_fan, kelvin, rho_at, rho_curve};
use reluphase::linalg::norm;
use reluphase::trainer::train;
use reluphase::NetworkParams;

use super::common::{task_setup, train_config};
use crate::config::{ExperimentConfig, Init, Task};
use crate::output::OutputDir;
use crate::schema;
use crate::svg::Scene;

#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub t: usize,
    pub loss: f64,
    /// Normalized positive-class weights `w_j / |w_j|` (zero columns stay zero).
    pub positive_directions: Vec<[f64; 2]>,
    pub positive_norms: Vec<f64>,
    /// Raw negative-class weights `u_j`.
    pub negative_weights: Vec<[f64; 2]>,
    pub rho: Vec<(f64, f64)>,
    /// `min_x (rho(angle of x) - |x*|)` over the data; non-negative iff the loss is zero.
    pub min_rho_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trace {
    pub data_kelvin: Vec<[f64; 2]>,
    pub frames: Vec<Frame>,
    pub final_t: usize,
}

fn frame(params: &NetworkParams, t: usize, loss: f64, data: &[Vec<f64>], rho_samples: usize) -> Result<Frame> {
    let k = params.neurons() / 2;
    let cols = params.weights.to_columns();
    let pos: Vec<[f64; 2]> = cols[..k]
        .iter()
        .map(|c| {
            let n = norm(c);
            if n > 0.0 {
                [c[0] / n, c[1] / n]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    let mut margin = f64::INFINITY;
    for x in data {
        margin = margin.min(rho_at(params, x)? - 1.0 / norm(x));
    }
    Ok(Frame {
        t,
        loss,
        positive_directions: pos,
        positive_norms: cols[..k].iter().map(|c| norm(c)).collect(),
        negative_weights: cols[k..].iter().map(|c| [c[0], c[1]]).collect(),
        rho: rho_curve(params, rho_samples)?,
        min_rho_margin: margin,
    })
}

fn frame_svg(f: &Frame, data_kelvin: &[[f64; 2]]) -> String {
    let reach = f
        .negative_weights
        .iter()
        .map(|u| norm(u))
        .fold(1.0, f64::max);
    let mut scene = Scene::new(1.15 * reach, 480.0);
    scene.circle([0.0, 0.0], 1.0, "black", false);
    for p in data_kelvin {
        scene.dot(*p, 1.5, "#1f77b4");
    }
    let curve: Vec<[f64; 2]> = f.rho.iter().map(|&(th, r)| [r * th.cos(), r * th.sin()]).collect();
    scene.closed_path(&curve, "#ff7f0e", true);
    for w in &f.positive_directions {
        scene.arrow(*w, "#d62728");
    }
    for u in &f.negative_weights {
        scene.arrow(*u, "#2ca02c");
    }
    scene.text(10.0, 20.0, &format!("t = {}", f.t));
    scene.finish()
}

/// Planar dynamics from the fixed three-neuron start, with Kelvin-transformed data and the rho curve.
pub fn cmd_trace_dynamics(cfg: &ExperimentConfig, out_dir: &Path) -> Result<Trace> {
    let cfg = ExperimentConfig {
        task: Task::GridSubspace,
        width: 6,
        init: Init::Fan,
        record_every: 1,
        ..cfg.clone()
    };
    cfg.validate()?;
    let setup = task_setup(&cfg, cfg.theta)?;
    let params = binary_network(init_fan(3))?;
    let tcfg = train_config(&cfg, &setup);
    let outcome = train(&params, &setup.data, &tcfg)?;
    let traj = &outcome.trajectory;

    let xs: Vec<Vec<f64>> = setup.data.samples().iter().map(|s| s.x.clone()).collect();
    let data_kelvin = xs
        .iter()
        .map(|x| kelvin(x).map(|k| [k[0], k[1]]))
        .collect::<reluphase::Result<Vec<_>>>()?;
    let mut times: Vec<usize> = cfg.snapshots.iter().copied().filter(|&t| t <= traj.final_t).collect();
    times.push(traj.final_t);
    times.sort_unstable();
    times.dedup();
    let mut frames = Vec::new();
    for &t in &times {
        let w = traj.snapshots[t].clone();
        let p = params.with_weights(w);
        frames.push(frame(&p, t, traj.records[t].loss_total, &xs, cfg.rho_samples)?);
    }
    let trace = Trace {
        data_kelvin,
        frames,
        final_t: traj.final_t,
    };
    let mut out = OutputDir::create(out_dir, "trace-dynamics")?;
    out.write_json("config.json", &schema::CONFIG_JSON, &cfg)?;
    out.write_json("frames.json", &schema::FRAMES_JSON, &trace)?;
    for f in &trace.frames {
        out.write_svg(&format!("frame_t{:06}.svg", f.t), &frame_svg(f, &trace.data_kelvin))?;
    }
    out.finish()?;
    Ok(trace)
}
