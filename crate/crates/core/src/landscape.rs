//! Constructed global minima, critical-point audits and gradient-Lipschitz estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg::{axpy, dot};
use crate::loss::{dataset_loss, subgradient, LabeledDataset};
use crate::model::{BiasMode, NetworkParams, OutputMap, WeightMatrix};
use crate::rng::Rng;

pub const EPS_CRIT: f64 = 1e-8;
pub const DELTA_LOSS: f64 = 1e-8;
const SAFETY: f64 = 1.01;

/// Support of one class: an orthonormal basis of `V_i` and the data radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSupport {
    pub basis: Vec<Vec<f64>>,
    pub m_inner: f64,
    pub m_outer: f64,
}

/// Vertices of a regular `d`-simplex centered at the origin with unit circumradius.
pub fn regular_simplex(d: usize) -> Vec<Vec<f64>> {
    // centered standard basis of R^{d+1}, expressed in an orthonormal basis of the sum-zero hyperplane
    let n = d + 1;
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64).collect())
        .collect();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    for c in centered.iter().take(d) {
        let mut u = c.clone();
        for f in &frame {
            let p = dot(&u, f);
            axpy(-p, f, &mut u);
        }
        let nu = dot(&u, &u).sqrt();
        frame.push(u.iter().map(|x| x / nu).collect());
    }
    let radius = (d as f64 / n as f64).sqrt();
    centered
        .iter()
        .map(|c| frame.iter().map(|f| dot(c, f) / radius).collect())
        .collect()
}

/// Weights with zero loss on every sample of the classes' supports.
///
/// Owner neurons of class `i` sit on the vertices of a regular simplex in `V_i`
/// whose inscribed ball has radius `1.01 * max_j (1 + b_j) / (m_i min(1, 2v))`;
/// every other neuron, including the owners of classes given as `None`, is zero.
pub fn construct_zero_loss(supports: &[Option<ClassSupport>], output: &OutputMap, bias: &[f64]) -> Result<WeightMatrix> {
    if supports.len() != output.classes() {
        return Err(Error::Dimension {
            what: "class supports",
            expected: output.classes(),
            got: supports.len(),
        });
    }
    if bias.len() != output.neurons() {
        return Err(Error::Dimension {
            what: "bias",
            expected: output.neurons(),
            got: bias.len(),
        });
    }
    let given: Vec<(usize, &ClassSupport)> = supports.iter().enumerate().filter_map(|(i, s)| s.as_ref().map(|s| (i, s))).collect();
    let dim = given
        .iter()
        .flat_map(|(_, s)| s.basis.first())
        .map(|b| b.len())
        .next()
        .ok_or_else(|| Error::Config("no class support with a non-empty basis".into()))?;
    for (n, &(i, s)) in given.iter().enumerate() {
        if s.basis.is_empty() || s.basis.iter().any(|b| b.len() != dim) {
            return config_err(format!("class {i}: basis vectors must be non-empty and of length {dim}"));
        }
        if !(s.m_inner > 0.0 && s.m_inner <= s.m_outer) {
            return config_err(format!("class {i}: need 0 < m_i <= M_i"));
        }
        for &(a, sa) in &given[n + 1..] {
            let cross = s.basis.iter().flat_map(|u| sa.basis.iter().map(move |w| dot(u, w).abs()));
            if cross.fold(0.0, f64::max) > 1e-12 {
                return Err(Error::Hypothesis(format!("subspaces of classes {i} and {a} are not orthogonal")));
            }
        }
    }
    let v = output.magnitude();
    let mut weights = WeightMatrix::zeros(dim, output.neurons());
    for &(i, s) in &given {
        let d = s.basis.len();
        let owners: Vec<usize> = output.owned_by(i).collect();
        if owners.len() <= d {
            return config_err(format!(
                "class {i} has {} owner neurons; a simplex in dimension {d} needs {}",
                owners.len(),
                d + 1
            ));
        }
        let worst_bias = owners.iter().map(|&j| bias[j]).fold(0.0, f64::max);
        let inradius = (1.0 + worst_bias) / (s.m_inner * (2.0 * v).min(1.0));
        let radius = d as f64 * inradius * SAFETY;
        let vertices = regular_simplex(d);
        for (slot, &j) in owners.iter().enumerate() {
            let coords = &vertices[slot % vertices.len()];
            let col = weights.col_mut(j);
            for (c, b) in coords.iter().zip(&s.basis) {
                axpy(radius * c, b, col);
            }
        }
    }
    Ok(weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditVerdict {
    GlobalMin,
    DegenerateZeroOutput,
    NotCritical,
    /// Vanishing subgradient with positive loss and a nonzero output.
    SpuriousCritical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeAudit {
    pub grad_norm: f64,
    pub loss: f64,
    pub nonzero_output_witness: Option<usize>,
    pub verdict: AuditVerdict,
}

pub fn critical_point_audit(
    params: &NetworkParams,
    data: &LabeledDataset,
    eps_crit: f64,
    delta_loss: f64,
) -> Result<LandscapeAudit> {
    let loss = dataset_loss(params, data)?;
    let grad_norm = subgradient(params, data)?.norm();
    let witness = data
        .samples()
        .iter()
        .position(|s| params.forward_unchecked(&s.x).scores.iter().any(|&f| f != 0.0));
    let verdict = match witness {
        None => AuditVerdict::DegenerateZeroOutput,
        Some(_) if grad_norm > eps_crit => AuditVerdict::NotCritical,
        Some(_) if loss <= delta_loss => AuditVerdict::GlobalMin,
        Some(_) => AuditVerdict::SpuriousCritical,
    };
    Ok(LandscapeAudit {
        grad_norm,
        loss,
        nonzero_output_witness: witness,
        verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram over `[0, max]`; the last bin is closed.
pub fn histogram(values: &[f64], bins: usize) -> Vec<HistBin> {
    let bins = bins.max(1);
    let hi = values.iter().copied().fold(0.0, f64::max);
    let width = if hi > 0.0 { hi / bins as f64 } else { 1.0 };
    let mut out: Vec<HistBin> = (0..bins)
        .map(|b| HistBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let b = ((v / width) as usize).min(bins - 1);
        out[b].count += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub histogram: Vec<HistBin>,
    pub skipped: usize,
}

/// Draws pairs `W_2 = W_1 + s Z` with `W_1`, `Z` standard normal and `s`
/// log-uniform in `[s_min, s_max]`, keeping bias and output fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPairSampler {
    pub dim: usize,
    pub output: OutputMap,
    pub bias: Vec<f64>,
    pub s_min: f64,
    pub s_max: f64,
}

impl GaussianPairSampler {
    pub fn sample(&self, rng: &mut Rng) -> Result<(NetworkParams, NetworkParams)> {
        let k = self.output.neurons();
        let w1 = gaussian_matrix(self.dim, k, rng)?;
        let z = gaussian_matrix(self.dim, k, rng)?;
        let s = (self.s_min.ln() + rng.uniform() * (self.s_max.ln() - self.s_min.ln())).exp();
        let mut w2 = w1.clone();
        w2.add_scaled(s, &z);
        Ok((
            NetworkParams::with_bias(w1, self.bias.clone(), self.output.clone())?,
            NetworkParams::with_bias(w2, self.bias.clone(), self.output.clone())?,
        ))
    }
}

fn gaussian_matrix(dim: usize, k: usize, rng: &mut Rng) -> Result<WeightMatrix> {
    let cols: Vec<Vec<f64>> = (0..k).map(|_| rng.normal_vec(dim)).collect();
    WeightMatrix::from_columns(&cols)
}

/// Ratios `|grad l(W_1) - grad l(W_2)| / |W_1 - W_2|` over sampled pairs.
/// Pair `i` is drawn from `Rng::derive(seed, i)`.
pub fn lipschitz_estimate<F>(sampler: F, data: &LabeledDataset, pairs: usize, seed: u64, bins: usize) -> Result<LipschitzEstimate>
where
    F: Fn(&mut Rng) -> Result<(NetworkParams, NetworkParams)> + Sync,
{
    if pairs < 1 {
        return config_err("need at least one pair");
    }
    let results = (0..pairs)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::derive(seed, i as u64);
            let (p1, p2) = sampler(&mut rng)?;
            for p in [&p1, &p2] {
                if p.mode() != BiasMode::Bias {
                    return Err(Error::Hypothesis(
                        "gradient Lipschitz continuity needs biases with 0 < sum(b) < 1; no-bias networks are refused".into(),
                    ));
                }
            }
            let mut diff = p1.weights.clone();
            diff.add_scaled(-1.0, &p2.weights);
            let dw = diff.norm();
            if dw < 1e-14 {
                return Ok(None);
            }
            let mut dg = subgradient(&p1, data)?;
            dg.add_scaled(-1.0, &subgradient(&p2, data)?);
            Ok(Some(dg.norm() / dw))
        })
        .collect::<Result<Vec<Option<f64>>>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let ratios: Vec<f64> = results.into_iter().flatten().collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzEstimate {
        max_ratio,
        histogram: histogram(&ratios, bins),
        ratios,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::LabeledSample;

    #[test]
    fn simplex_vertices() {
        for d in 1..6 {
            let v = regular_simplex(d);
            assert_eq!(v.len(), d + 1);
            let mut centroid = vec![0.0; d];
            for p in &v {
                assert!((dot(p, p) - 1.0).abs() < 1e-12);
                axpy(1.0, p, &mut centroid);
            }
            assert!(centroid.iter().all(|c| c.abs() < 1e-12));
            // pairwise inner products of a regular simplex are -1/d
            for a in 0..=d {
                for b in a + 1..=d {
                    assert!((dot(&v[a], &v[b]) + 1.0 / d as f64).abs() < 1e-12);
                }
            }
        }
    }

    fn plane_support() -> ClassSupport {
        ClassSupport {
            basis: vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]],
            m_inner: 1.0,
            m_outer: 2.0,
        }
    }

    fn other_support() -> ClassSupport {
        ClassSupport {
            basis: vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
            m_inner: 1.0,
            m_outer: 2.0,
        }
    }

    #[test]
    fn triangle_radius() {
        let out = OutputMap::blocks(&[3, 3], 1.0).unwrap();
        let w = construct_zero_loss(&[Some(plane_support()), Some(other_support())], &out, &[0.0; 6]).unwrap();
        for j in 0..6 {
            assert!((w.column_norms()[j] - 2.0 * 1.01).abs() < 1e-12);
        }
        for a in 0..3 {
            for b in a + 1..3 {
                let c = dot(w.col(a), w.col(b)) / (2.02f64 * 2.02);
                assert!((c + 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_owners() {
        let out = OutputMap::blocks(&[2, 3], 1.0).unwrap();
        assert!(construct_zero_loss(&[Some(plane_support()), Some(other_support())], &out, &[0.0; 5]).is_err());
        let mut skew = other_support();
        skew.basis[0] = vec![0.6, 0.0, 0.8, 0.0];
        let out = OutputMap::blocks(&[3, 3], 1.0).unwrap();
        assert!(construct_zero_loss(&[Some(plane_support()), Some(skew)], &out, &[0.0; 6]).is_err());
    }

    #[test]
    fn zero_weights_are_degenerate() {
        let out = OutputMap::round_robin(2, 4, 1.0).unwrap();
        let p = NetworkParams::without_bias(WeightMatrix::zeros(2, 4), out).unwrap();
        let data = LabeledDataset::new(
            vec![
                LabeledSample { x: vec![1.0, 0.0], label: 0 },
                LabeledSample { x: vec![0.0, 1.0], label: 1 },
            ],
            2,
        )
        .unwrap();
        let audit = critical_point_audit(&p, &data, EPS_CRIT, DELTA_LOSS).unwrap();
        assert_eq!(audit.verdict, AuditVerdict::DegenerateZeroOutput);
        assert_eq!(audit.loss, 1.0);
        assert_eq!(audit.grad_norm, 0.0);
        assert_eq!(audit.nonzero_output_witness, None);
    }

    #[test]
    fn histogram_counts() {
        let h = histogram(&[0.0, 0.5, 1.0, 1.0, 0.25], 4);
        assert_eq!(h.iter().map(|b| b.count).sum::<usize>(), 5);
        assert_eq!(h[3].count, 2);
        assert_eq!(histogram(&[], 3).iter().map(|b| b.count).sum::<usize>(), 0);
    }

    #[test]
    fn no_bias_refused() {
        let out = OutputMap::round_robin(2, 2, 1.0).unwrap();
        let data = LabeledDataset::new(vec![LabeledSample { x: vec![1.0, 0.0], label: 0 }], 2).unwrap();
        let out2 = out.clone();
        let sampler = move |rng: &mut Rng| {
            let w = WeightMatrix::from_columns(&[rng.normal_vec(2), rng.normal_vec(2)])?;
            let p = NetworkParams::without_bias(w, out2.clone())?;
            Ok((p.clone(), p))
        };
        assert!(matches!(
            lipschitz_estimate(sampler, &data, 4, 0, 5),
            Err(Error::Hypothesis(_))
        ));
        assert!(lipschitz_estimate(
            |_: &mut Rng| -> Result<(NetworkParams, NetworkParams)> { unreachable!() },
            &data,
            0,
            0,
            5
        )
        .is_err());
    }
}
