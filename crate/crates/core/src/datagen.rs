//! Synthetic subspace data, initializers and Kelvin-transform helpers.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg::{axpy, norm};
use crate::loss::{LabeledDataset, LabeledSample};
use crate::model::{NetworkParams, OutputMap, WeightMatrix};
use crate::phases::sphere_area;
use crate::rng::Rng;

/// `V_1 = span(v1, v2)` and `V_2 = span(v3, v4)` in `R^4` at angle `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspacePair {
    pub theta: f64,
    pub basis: [Vec<f64>; 4],
}

impl SubspacePair {
    /// Orthonormal basis of the subspace of `class` (0 or 1).
    pub fn class_basis(&self, class: usize) -> Vec<Vec<f64>> {
        match class {
            0 => vec![self.basis[0].clone(), self.basis[1].clone()],
            _ => vec![self.basis[2].clone(), self.basis[3].clone()],
        }
    }
}

pub fn make_subspace_pair(theta: f64) -> Result<SubspacePair> {
    if !(theta > 0.0 && theta <= PI / 2.0) {
        return config_err(format!("subspace angle must lie in (0, pi/2], got {theta}"));
    }
    let (s, c) = if theta == PI / 2.0 { (1.0, 0.0) } else { theta.sin_cos() };
    Ok(SubspacePair {
        theta,
        basis: [
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, s, c, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDatasetSpec {
    pub radii: Vec<f64>,
    pub angles: Vec<f64>,
    pub noise_std: f64,
}

impl Default for GridDatasetSpec {
    fn default() -> Self {
        Self {
            radii: (10..=20).map(|j| 20.0 / j as f64).collect(),
            angles: (1..=80).map(|j| j as f64 * PI / 40.0).collect(),
            noise_std: 0.0,
        }
    }
}

impl GridDatasetSpec {
    pub fn with_noise(noise_std: f64) -> Self {
        Self {
            noise_std,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.angles.is_empty() {
            return config_err("grid needs at least one radius and one angle");
        }
        if self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return config_err("grid radii must be positive");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return config_err("noise_std must be finite and non-negative");
        }
        Ok(())
    }

    /// Planar grid `r (cos phi, sin phi)`, radius-major.
    pub fn plane_points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(self.radii.len() * self.angles.len());
        for &r in &self.radii {
            for &phi in &self.angles {
                pts.push([r * phi.cos(), r * phi.sin()]);
            }
        }
        pts
    }
}

/// Both classes embedded in `R^4`: class 0 on `V_1`, class 1 on `V_2`, with
/// Gaussian noise added coordinatewise in `R^4` when `noise_std > 0`.
pub fn grid_dataset(pair: &SubspacePair, spec: &GridDatasetSpec, rng: &mut Rng) -> Result<LabeledDataset> {
    spec.validate()?;
    let pts = spec.plane_points();
    let mut samples = Vec::with_capacity(2 * pts.len());
    for class in 0..2 {
        let basis = pair.class_basis(class);
        for p in &pts {
            let mut x = vec![0.0; 4];
            axpy(p[0], &basis[0], &mut x);
            axpy(p[1], &basis[1], &mut x);
            if spec.noise_std > 0.0 {
                for xi in x.iter_mut() {
                    *xi += spec.noise_std * rng.normal();
                }
            }
            samples.push(LabeledSample { x, label: class });
        }
    }
    LabeledDataset::new(samples, 2)
}

/// Class-0 grid points in the coordinates of `V_1`; class 1 is left empty.
pub fn grid_plane_dataset(spec: &GridDatasetSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let samples = spec
        .plane_points()
        .into_iter()
        .map(|p| LabeledSample {
            x: p.to_vec(),
            label: 0,
        })
        .collect();
    LabeledDataset::new(samples, 2)
}

/// Uniform density on `{x in span(basis) : m <= |x| <= M}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusDistribution {
    pub basis: Vec<Vec<f64>>,
    pub m_inner: f64,
    pub m_outer: f64,
}

impl AnnulusDistribution {
    pub fn validate(&self) -> Result<()> {
        if self.basis.is_empty() {
            return config_err("annulus needs a non-empty basis");
        }
        if !(self.m_inner > 0.0 && self.m_inner < self.m_outer && self.m_outer.is_finite()) {
            return config_err(format!("need 0 < m < M, got m = {}, M = {}", self.m_inner, self.m_outer));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis[0].len()
    }

    /// Constant density with respect to Lebesgue measure on the subspace.
    pub fn density(&self) -> f64 {
        let d = self.dim() as i32;
        let volume = sphere_area(self.dim() - 1) / d as f64 * (self.m_outer.powi(d) - self.m_inner.powi(d));
        1.0 / volume
    }

    pub fn sample_point(&self, rng: &mut Rng) -> Vec<f64> {
        let d = self.dim();
        let dir = rng.unit_vector(d);
        let dp = d as f64;
        let (lo, hi) = (self.m_inner.powf(dp), self.m_outer.powf(dp));
        let r = (lo + rng.uniform() * (hi - lo)).powf(1.0 / dp).clamp(self.m_inner, self.m_outer);
        let mut x = vec![0.0; self.ambient_dim()];
        for (c, b) in dir.iter().zip(&self.basis) {
            axpy(r * c, b, &mut x);
        }
        x
    }
}

/// `count` samples per class; class `i` draws from `dists[i]`.
pub fn sample_annulus(dists: &[AnnulusDistribution], count: usize, rng: &mut Rng) -> Result<LabeledDataset> {
    if count < 1 {
        return config_err("need at least one sample per class");
    }
    for d in dists {
        d.validate()?;
    }
    let mut samples = Vec::with_capacity(count * dists.len());
    for (label, d) in dists.iter().enumerate() {
        for _ in 0..count {
            samples.push(LabeledSample {
                x: d.sample_point(rng),
                label,
            });
        }
    }
    LabeledDataset::new(samples, dists.len())
}

/// Standard normal entries, drawn column by column.
pub fn init_random(d: usize, k: usize, rng: &mut Rng) -> WeightMatrix {
    let cols: Vec<Vec<f64>> = (0..k).map(|_| rng.normal_vec(d)).collect();
    WeightMatrix::from_columns(&cols).expect("normal draws are finite")
}

/// `init_random` with the first coordinate of every column replaced by its absolute value.
pub fn init_halfspace(d: usize, k: usize, rng: &mut Rng) -> Result<WeightMatrix> {
    if d < 1 {
        return config_err("half-space initialization needs d >= 1");
    }
    let mut w = init_random(d, k, rng);
    for j in 0..k {
        let c = w.col_mut(j);
        c[0] = c[0].abs();
    }
    Ok(w)
}

/// Planar start with `w_j = u_j = 3/4 (cos((2-j) pi/6), sin((2-j) pi/6))`, `j = 1..k`,
/// positive-class neurons first.
pub fn init_fan(k: usize) -> WeightMatrix {
    let half: Vec<Vec<f64>> = (1..=k)
        .map(|j| {
            let a = (2.0 - j as f64) * PI / 6.0;
            vec![0.75 * a.cos(), 0.75 * a.sin()]
        })
        .collect();
    let cols: Vec<Vec<f64>> = half.iter().chain(&half).cloned().collect();
    WeightMatrix::from_columns(&cols).expect("finite")
}

/// Binary network with `k` neurons per class in block order and `v = 1/2`,
/// for which `f_1 - f_2` equals `sum_j s(w_j x) - sum_j s(u_j x)`.
pub fn binary_network(weights: WeightMatrix) -> Result<NetworkParams> {
    let k = weights.neurons();
    if k % 2 != 0 {
        return config_err("binary network needs an even neuron count");
    }
    let out = OutputMap::blocks(&[k / 2, k / 2], 0.5)?;
    NetworkParams::without_bias(weights, out)
}

/// `x / |x|^2`
pub fn kelvin(x: &[f64]) -> Result<Vec<f64>> {
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2 == 0.0 {
        return Err(Error::Degenerate("Kelvin transform of the zero vector".into()));
    }
    Ok(x.iter().map(|v| v / n2).collect())
}

/// `rho(theta) = min{1, s(f(W; (cos theta, sin theta)))}` at `samples` equispaced angles in `[0, 2 pi)`.
pub fn rho_curve(params: &NetworkParams, samples: usize) -> Result<Vec<(f64, f64)>> {
    if params.dim() != 2 {
        return Err(Error::Dimension {
            what: "rho curve input dimension",
            expected: 2,
            got: params.dim(),
        });
    }
    (0..samples)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / samples as f64;
            let f = params.forward_binary(&[th.cos(), th.sin()])?;
            Ok((th, f.max(0.0).min(1.0)))
        })
        .collect()
}

/// `rho` at the direction of `x`, compared against `|x*| = 1/|x|` by the zero-loss criterion.
pub fn rho_at(params: &NetworkParams, x: &[f64]) -> Result<f64> {
    let n = norm(x);
    let unit: Vec<f64> = x.iter().map(|v| v / n).collect();
    Ok(params.forward_binary(&unit)?.max(0.0).min(1.0))
}
