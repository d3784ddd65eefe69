//! Multiclass hinge loss and its exact subgradient.
//!
//! For a sample `(x, y)` the loss is `sum_{i != y} max(0, 1 - f_y + f_i)`.
//! The subgradient with respect to neuron `j` is
//!
//! ```text
//! -sum_{i != y} (v_{y,j} - v_{i,j}) 1[f_y < f_i + 1] 1[<w_j, x> > b_j] x
//! ```
//!
//! Both indicator sets use strict inequalities, so samples sitting exactly on
//! a margin or a ReLU kink contribute nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, relu};
use crate::model::{NetworkParams, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub label: usize,
}

/// A finite labelled dataset with a per-class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    samples: Vec<LabeledSample>,
    classes: usize,
    dim: usize,
    class_index: Vec<Vec<usize>>,
}

impl LabeledDataset {
    /// Builds a dataset over `classes` labels. Classes may be absent.
    pub fn new(samples: Vec<LabeledSample>, classes: usize) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::Config("dataset must not be empty".into()));
        };
        let dim = first.x.len();
        let mut class_index = vec![Vec::new(); classes];
        for (idx, s) in samples.iter().enumerate() {
            if s.x.len() != dim {
                return Err(Error::Dimension {
                    what: "sample",
                    expected: dim,
                    got: s.x.len(),
                });
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("sample {idx}")));
            }
            if s.label >= classes {
                return Err(Error::Config(format!(
                    "sample {idx} has label {} but only {classes} classes",
                    s.label
                )));
            }
            class_index[s.label].push(idx);
        }
        Ok(Self {
            samples,
            classes,
            dim,
            class_index,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn class_indices(&self, class: usize) -> &[usize] {
        &self.class_index[class]
    }

    pub fn class_count(&self, class: usize) -> usize {
        self.class_index[class].len()
    }

    pub fn class_samples(&self, class: usize) -> impl Iterator<Item = &LabeledSample> + '_ {
        self.class_index[class].iter().map(move |&i| &self.samples[i])
    }

    /// Classes that have at least one sample.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.classes).filter(|&c| !self.class_index[c].is_empty()).collect()
    }

    /// Concatenation of two datasets over the same label set.
    pub fn merged(&self, other: &Self) -> Result<Self> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Self::new(samples, self.classes.max(other.classes))
    }

    fn check(&self, params: &NetworkParams) -> Result<()> {
        if self.dim != params.dim() {
            return Err(Error::Dimension {
                what: "dataset vs network input",
                expected: params.dim(),
                got: self.dim,
            });
        }
        if self.classes > params.classes() {
            return Err(Error::Dimension {
                what: "dataset classes vs network outputs",
                expected: params.classes(),
                got: self.classes,
            });
        }
        Ok(())
    }
}

/// Active-set membership for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSets {
    /// `margin[i]` is `f_y < f_i + 1` (always false for `i == y`).
    pub margin: Vec<bool>,
    /// `relu[j]` is `<w_j, x> > b_j`.
    pub relu: Vec<bool>,
}

pub fn active_sets(params: &NetworkParams, sample: &LabeledSample) -> Result<ActiveSets> {
    let fwd = params.forward(&sample.x)?;
    let fy = fwd.scores[sample.label];
    let margin = fwd
        .scores
        .iter()
        .enumerate()
        .map(|(i, &fi)| i != sample.label && fy < fi + 1.0)
        .collect();
    let relu = fwd.pre.iter().map(|&h| h > 0.0).collect();
    Ok(ActiveSets { margin, relu })
}

pub fn sample_loss(params: &NetworkParams, sample: &LabeledSample) -> Result<f64> {
    let fwd = params.forward(&sample.x)?;
    Ok(hinge(&fwd.scores, sample.label))
}

fn hinge(scores: &[f64], label: usize) -> f64 {
    let fy = scores[label];
    scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label)
        .map(|(_, &fi)| relu(1.0 - fy + fi))
        .sum()
}

/// Mean sample loss over class `class`, the finite-data `l_i(W)`.
pub fn class_loss(params: &NetworkParams, data: &LabeledDataset, class: usize) -> Result<f64> {
    data.check(params)?;
    if class >= data.classes() || data.class_count(class) == 0 {
        return Err(Error::EmptyClass(class));
    }
    Ok(mean_loss(params, data, data.class_indices(class)))
}

/// Mean sample loss over the whole dataset.
pub fn dataset_loss(params: &NetworkParams, data: &LabeledDataset) -> Result<f64> {
    data.check(params)?;
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(mean_loss(params, data, &all))
}

fn mean_loss(params: &NetworkParams, data: &LabeledDataset, indices: &[usize]) -> f64 {
    let total: f64 = indices
        .iter()
        .map(|&i| {
            let s = &data.samples[i];
            hinge(&params.forward_unchecked(&s.x).scores, s.label)
        })
        .sum();
    total / indices.len() as f64
}

/// Mean loss and mean subgradient over the samples at `indices`, summed in index order.
pub fn loss_and_subgradient_on(
    params: &NetworkParams,
    data: &LabeledDataset,
    indices: &[usize],
) -> Result<(f64, WeightMatrix)> {
    data.check(params)?;
    let mut grad = WeightMatrix::zeros(params.dim(), params.neurons());
    if indices.is_empty() {
        return Ok((0.0, grad));
    }
    let output = params.output();
    let k = params.neurons();
    let mut coeff = vec![0.0; k];
    let mut loss = 0.0;
    for &idx in indices {
        let s = &data.samples[idx];
        let fwd = params.forward_unchecked(&s.x);
        let fy = fwd.scores[s.label];
        coeff.iter_mut().for_each(|c| *c = 0.0);
        let mut any = false;
        for (i, &fi) in fwd.scores.iter().enumerate() {
            if i == s.label || !(fy < fi + 1.0) {
                continue;
            }
            loss += 1.0 - fy + fi;
            for (j, c) in coeff.iter_mut().enumerate() {
                if fwd.pre[j] > 0.0 {
                    *c -= output.entry(s.label, j) - output.entry(i, j);
                    any = true;
                }
            }
        }
        if any {
            for (j, &c) in coeff.iter().enumerate() {
                if c != 0.0 {
                    axpy(c, &s.x, grad.col_mut(j));
                }
            }
        }
    }
    let n = indices.len() as f64;
    Ok((loss / n, grad.scaled(1.0 / n)))
}

/// Mean subgradient of the loss over every sample of `batch`.
pub fn subgradient(params: &NetworkParams, batch: &LabeledDataset) -> Result<WeightMatrix> {
    let all: Vec<usize> = (0..batch.len()).collect();
    Ok(loss_and_subgradient_on(params, batch, &all)?.1)
}

/// Central difference `(l(W + hU) - l(W - hU)) / 2h` of the dataset loss.
pub fn directional_derivative_fd(
    params: &NetworkParams,
    batch: &LabeledDataset,
    direction: &WeightMatrix,
    h: f64,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let (plus, minus) = shifted_pair(params, direction, h);
    Ok((dataset_loss(&plus, batch)? - dataset_loss(&minus, batch)?) / (2.0 * h))
}

/// Forward and backward one-sided differences of the dataset loss.
pub fn one_sided_differences(
    params: &NetworkParams,
    batch: &LabeledDataset,
    direction: &WeightMatrix,
    h: f64,
) -> Result<(f64, f64)> {
    let (plus, minus) = shifted_pair(params, direction, h);
    let center = dataset_loss(params, batch)?;
    Ok((
        (dataset_loss(&plus, batch)? - center) / h,
        (center - dataset_loss(&minus, batch)?) / h,
    ))
}

fn shifted_pair(params: &NetworkParams, direction: &WeightMatrix, h: f64) -> (NetworkParams, NetworkParams) {
    let mut plus = params.weights.clone();
    plus.add_scaled(h, direction);
    let mut minus = params.weights.clone();
    minus.add_scaled(-h, direction);
    (params.with_weights(plus), params.with_weights(minus))
}

/// Smallest distance of any sample to a margin or ReLU kink, in units of the
/// relevant pre-activation or score gap.
pub fn kink_distance(params: &NetworkParams, data: &LabeledDataset) -> f64 {
    let mut best = f64::INFINITY;
    for s in data.samples() {
        let fwd = params.forward_unchecked(&s.x);
        for &h in &fwd.pre {
            best = best.min(h.abs());
        }
        let fy = fwd.scores[s.label];
        for (i, &fi) in fwd.scores.iter().enumerate() {
            if i != s.label {
                best = best.min((fy - fi - 1.0).abs());
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutputMap;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn two_class_net(cols: &[Vec<f64>], v: f64) -> NetworkParams {
        let w = WeightMatrix::from_columns(cols).unwrap();
        let out = OutputMap::round_robin(2, cols.len(), v).unwrap();
        NetworkParams::without_bias(w, out).unwrap()
    }

    fn sample(x: &[f64], label: usize) -> LabeledSample {
        LabeledSample { x: x.to_vec(), label }
    }

    #[test]
    fn zero_weights_cost_n_minus_one() {
        for n in 2..6 {
            let out = OutputMap::round_robin(n, n, 1.0).unwrap();
            let p = NetworkParams::without_bias(WeightMatrix::zeros(3, n), out).unwrap();
            let loss = sample_loss(&p, &sample(&[1.0, 2.0, 3.0], n - 1)).unwrap();
            assert_eq!(loss, (n - 1) as f64);
        }
    }

    #[test]
    fn class_loss_of_zero_network_and_singletons() {
        let p = two_class_net(&[vec![0.0, 0.0], vec![0.0, 0.0]], 1.0);
        let data = LabeledDataset::new(vec![sample(&[1.0, 0.0], 0), sample(&[0.0, 1.0], 1)], 2).unwrap();
        assert_eq!(class_loss(&p, &data, 0).unwrap(), 1.0);
        assert_eq!(class_loss(&p, &data, 1).unwrap(), 1.0);

        let q = two_class_net(&[vec![0.3, -0.2], vec![0.1, 0.5]], 1.0);
        let single = LabeledDataset::new(vec![sample(&[1.0, 0.7], 1)], 2).unwrap();
        assert_eq!(
            class_loss(&q, &single, 1).unwrap(),
            sample_loss(&q, &single.samples()[0]).unwrap()
        );
        assert!(matches!(class_loss(&q, &single, 0), Err(Error::EmptyClass(0))));
    }

    #[test]
    fn balanced_total_is_mean_of_class_losses() {
        let mut rng = Rng::new(5);
        let cols: Vec<Vec<f64>> = (0..6).map(|_| rng.normal_vec(3)).collect();
        let out = OutputMap::round_robin(3, 6, 0.7).unwrap();
        let p = NetworkParams::without_bias(WeightMatrix::from_columns(&cols).unwrap(), out).unwrap();
        let samples = (0..30).map(|i| sample(&rng.normal_vec(3), i % 3)).collect();
        let data = LabeledDataset::new(samples, 3).unwrap();
        let mean_of_classes = (0..3).map(|c| class_loss(&p, &data, c).unwrap()).sum::<f64>() / 3.0;
        assert!((dataset_loss(&p, &data).unwrap() - mean_of_classes).abs() < 1e-12);
    }

    #[test]
    fn single_neuron_gradient_by_hand() {
        // class-0 neuron w = (0.1, 0), idle class-1 neuron; x = (1, 0) of class 0
        let p = two_class_net(&[vec![0.1, 0.0], vec![0.0, 0.0]], 1.0);
        let data = LabeledDataset::new(vec![sample(&[1.0, 0.0], 0)], 2).unwrap();
        let g = subgradient(&p, &data).unwrap();
        assert_eq!(g.col(0), &[-2.0, 0.0]);
        assert_eq!(g.col(1), &[0.0, 0.0]);
        let mut w = p.weights.clone();
        w.add_scaled(-0.1, &g);
        assert!((w.col(0)[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn satisfied_margins_give_zero_gradient() {
        let p = two_class_net(&[vec![2.0, 0.0], vec![-2.0, 0.0]], 1.0);
        let data = LabeledDataset::new(vec![sample(&[1.0, 0.0], 0), sample(&[-1.0, 0.3], 1)], 2).unwrap();
        assert_eq!(dataset_loss(&p, &data).unwrap(), 0.0);
        let g = subgradient(&p, &data).unwrap();
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn exact_margin_contributes_nothing() {
        // f_0 - f_1 = 2 * 0.5 = 1 exactly: on the margin, loss 0 and no gradient
        let p = two_class_net(&[vec![0.5, 0.0], vec![0.0, 0.0]], 1.0);
        let data = LabeledDataset::new(vec![sample(&[1.0, 0.0], 0)], 2).unwrap();
        let sets = active_sets(&p, &data.samples()[0]).unwrap();
        assert_eq!(sets.margin, vec![false, false]);
        assert_eq!(sets.relu, vec![true, false]);
        assert_eq!(dataset_loss(&p, &data).unwrap(), 0.0);
        assert!(subgradient(&p, &data).unwrap().as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_direction_fd_is_zero() {
        let p = two_class_net(&[vec![0.3, 0.1], vec![-0.2, 0.4]], 1.0);
        let data = LabeledDataset::new(vec![sample(&[1.0, 0.5], 0)], 2).unwrap();
        let u = WeightMatrix::zeros(2, 2);
        assert_eq!(directional_derivative_fd(&p, &data, &u, 1e-6).unwrap(), 0.0);
        assert!(directional_derivative_fd(&p, &data, &u, 0.0).is_err());
    }

    #[test]
    fn gradient_stays_in_data_subspace() {
        let mut rng = Rng::new(11);
        // class-0 data confined to span(e1, e2) in R^4
        let samples = (0..50)
            .map(|_| {
                let c = rng.normal_vec(2);
                sample(&[c[0], c[1], 0.0, 0.0], 0)
            })
            .collect();
        let data = LabeledDataset::new(samples, 2).unwrap();
        let cols: Vec<Vec<f64>> = (0..6).map(|_| rng.normal_vec(4)).collect();
        let p = two_class_net(&cols, 1.0);
        let g = subgradient(&p, &data).unwrap();
        for col in g.columns() {
            assert!(col[2].abs() < 1e-12 && col[3].abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn zero_loss_iff_all_margins_met(seed in 0u64..500) {
            let mut rng = Rng::new(seed);
            let cols: Vec<Vec<f64>> = (0..4).map(|_| rng.normal_vec(2).iter().map(|x| 3.0 * x).collect()).collect();
            let p = two_class_net(&cols, 1.0);
            let samples = (0..5).map(|_| sample(&rng.normal_vec(2), 0)).collect();
            let data = LabeledDataset::new(samples, 2).unwrap();
            let loss = class_loss(&p, &data, 0).unwrap();
            let all_met = data.samples().iter().all(|s| {
                let f = p.forward(&s.x).unwrap().scores;
                f[0] >= f[1] + 1.0
            });
            prop_assert_eq!(loss == 0.0, all_met);
        }

        #[test]
        fn zero_loss_is_closed_under_upscaling(seed in 0u64..500, c in 1.0f64..20.0) {
            let mut rng = Rng::new(seed);
            let cols: Vec<Vec<f64>> = (0..6).map(|_| rng.normal_vec(2).iter().map(|x| 4.0 * x).collect()).collect();
            let p = two_class_net(&cols, 1.0);
            let samples = (0..4).map(|_| {
                let u = rng.unit_vector(2);
                sample(&u, 0)
            }).collect();
            let data = LabeledDataset::new(samples, 2).unwrap();
            if dataset_loss(&p, &data).unwrap() == 0.0 {
                let scaled = p.with_weights(p.weights.scaled(c));
                prop_assert_eq!(dataset_loss(&scaled, &data).unwrap(), 0.0);
            }
        }
    }
}
