//! The two-layer ReLU classifier `f(W; x) = V relu(W^T x - b)`.
//!
//! Only the hidden-layer weights `W` are trainable. The output map `V` has
//! entries of a single magnitude `v`; each neuron (column of `V`) has exactly
//! one class with a positive entry, its *owner*, and negative entries for every
//! other class. Classes are indexed from zero throughout the library; labels
//! written to files are one-based.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::linalg::{dot, norm, relu};

/// Hidden-layer weights, stored column-major: column `j` is neuron `j`'s weight vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    dim: usize,
    neurons: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(dim: usize, neurons: usize) -> Self {
        Self {
            dim,
            neurons,
            data: vec![0.0; dim * neurons],
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = columns.first() else {
            return config_err("weight matrix needs at least one column");
        };
        let dim = first.len();
        let mut data = Vec::with_capacity(dim * columns.len());
        for c in columns {
            if c.len() != dim {
                return Err(Error::Dimension {
                    what: "weight column",
                    expected: dim,
                    got: c.len(),
                });
            }
            if c.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite("weight entry".into()));
            }
            data.extend_from_slice(c);
        }
        Ok(Self {
            dim,
            neurons: columns.len(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neurons(&self) -> usize {
        self.neurons
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        self.columns().map(<[f64]>::to_vec).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm).collect()
    }

    /// Sum of column Euclidean norms, `|W| = sum_j |w_j|`.
    pub fn norm(&self) -> f64 {
        self.columns().map(norm).sum()
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        dot(&self.data, &other.data)
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= alpha);
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.dim == other.dim && self.neurons == other.neurons
    }
}

/// The fixed second-layer map `V` (n classes by k neurons), stored by owner class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputMap {
    classes: usize,
    magnitude: f64,
    owners: Vec<usize>,
}

impl OutputMap {
    /// Round-robin ownership: neuron `j` belongs to class `j mod n`.
    pub fn round_robin(classes: usize, neurons: usize, magnitude: f64) -> Result<Self> {
        if neurons < classes {
            return config_err(format!(
                "output map needs k >= n (got k = {neurons}, n = {classes})"
            ));
        }
        Self::from_owners(classes, (0..neurons).map(|j| j % classes).collect(), magnitude)
    }

    /// Contiguous ownership: the first `per_class[0]` neurons belong to class 0, and so on.
    /// With two classes and equal blocks this is the binary layout
    /// `sum_{j<=k} relu(h_j) - sum_{j>k} relu(h_j)`.
    pub fn blocks(per_class: &[usize], magnitude: f64) -> Result<Self> {
        let owners = per_class
            .iter()
            .enumerate()
            .flat_map(|(c, &count)| std::iter::repeat_n(c, count))
            .collect();
        Self::from_owners(per_class.len(), owners, magnitude)
    }

    pub fn from_owners(classes: usize, owners: Vec<usize>, magnitude: f64) -> Result<Self> {
        if classes < 1 {
            return config_err("output map needs at least one class");
        }
        if !(magnitude > 0.0 && magnitude.is_finite()) {
            return config_err(format!("output magnitude must be positive, got {magnitude}"));
        }
        if let Some(&bad) = owners.iter().find(|&&o| o >= classes) {
            return config_err(format!("owner class {bad} out of range for n = {classes}"));
        }
        for c in 0..classes {
            if !owners.contains(&c) {
                return config_err(format!("class {c} owns no neuron"));
            }
        }
        Ok(Self {
            classes,
            magnitude,
            owners,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn neurons(&self) -> usize {
        self.owners.len()
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    pub fn owner(&self, j: usize) -> usize {
        self.owners[j]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    /// Neurons owned by `class`.
    pub fn owned_by(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.owners
            .iter()
            .enumerate()
            .filter(move |(_, &o)| o == class)
            .map(|(j, _)| j)
    }

    /// Entry `v_{i,j}`.
    pub fn entry(&self, class: usize, j: usize) -> f64 {
        if self.owners[j] == class {
            self.magnitude
        } else {
            -self.magnitude
        }
    }

    /// Dense `n x k` matrix, row `i` holding `v_{i,.}`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|i| (0..self.neurons()).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// Whether the hidden layer carries a (fixed) bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasMode {
    Bias,
    NoBias,
}

/// Weights plus the fixed bias and output map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub weights: WeightMatrix,
    bias: Vec<f64>,
    output: OutputMap,
    mode: BiasMode,
}

/// Output of a forward pass: class scores `f` and pre-activations `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub scores: Vec<f64>,
    pub pre: Vec<f64>,
}

impl NetworkParams {
    pub fn without_bias(weights: WeightMatrix, output: OutputMap) -> Result<Self> {
        let k = weights.neurons();
        Self::new(weights, vec![0.0; k], output, BiasMode::NoBias)
    }

    pub fn with_bias(weights: WeightMatrix, bias: Vec<f64>, output: OutputMap) -> Result<Self> {
        Self::new(weights, bias, output, BiasMode::Bias)
    }

    pub fn new(weights: WeightMatrix, bias: Vec<f64>, output: OutputMap, mode: BiasMode) -> Result<Self> {
        let k = weights.neurons();
        if output.neurons() != k {
            return Err(Error::Dimension {
                what: "output map neurons",
                expected: k,
                got: output.neurons(),
            });
        }
        if bias.len() != k {
            return Err(Error::Dimension {
                what: "bias",
                expected: k,
                got: bias.len(),
            });
        }
        match mode {
            BiasMode::NoBias => {
                if bias.iter().any(|&b| b != 0.0) {
                    return config_err("no-bias mode requires b = 0");
                }
            }
            BiasMode::Bias => {
                if bias.iter().any(|&b| !(b >= 0.0 && b.is_finite())) {
                    return config_err("biases must be finite and non-negative");
                }
                let total: f64 = bias.iter().sum();
                if !(total > 0.0 && total < 1.0) {
                    return config_err(format!("bias mode requires 0 < sum(b) < 1, got {total}"));
                }
            }
        }
        Ok(Self {
            weights,
            bias,
            output,
            mode,
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.dim()
    }

    pub fn neurons(&self) -> usize {
        self.weights.neurons()
    }

    pub fn classes(&self) -> usize {
        self.output.classes()
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn output(&self) -> &OutputMap {
        &self.output
    }

    pub fn mode(&self) -> BiasMode {
        self.mode
    }

    /// Same bias, output map and mode with different weights.
    pub fn with_weights(&self, weights: WeightMatrix) -> Self {
        debug_assert!(weights.same_shape(&self.weights));
        Self {
            weights,
            ..self.clone()
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                what: "input",
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activations `h_j = <w_j, x> - b_j`.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .columns()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) - b)
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Forward> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Forward {
        let pre = self.pre_activations(x);
        let v = self.output.magnitude();
        let active_sum: f64 = pre.iter().map(|&h| relu(h)).sum();
        let mut owned = vec![0.0; self.classes()];
        for (j, &h) in pre.iter().enumerate() {
            owned[self.output.owner(j)] += relu(h);
        }
        // f_i = v * (owned_i - (total - owned_i))
        let scores = owned.iter().map(|&o| v * (2.0 * o - active_sum)).collect();
        Forward { scores, pre }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?.scores))
    }

    /// `sum_{owner=0} relu(h_j) - sum_{owner=1} relu(h_j)` for two-class networks.
    pub fn forward_binary(&self, x: &[f64]) -> Result<f64> {
        if self.classes() != 2 {
            return config_err(format!(
                "binary output needs exactly two classes, got {}",
                self.classes()
            ));
        }
        self.check_input(x)?;
        let mut total = 0.0;
        for (j, (w, b)) in self.weights.columns().zip(&self.bias).enumerate() {
            let a = relu(dot(w, x) - b);
            if self.output.owner(j) == 0 {
                total += a;
            } else {
                total -= a;
            }
        }
        Ok(total)
    }

    /// Class 0 when the binary output is strictly positive, class 1 otherwise.
    pub fn predict_binary(&self, x: &[f64]) -> Result<usize> {
        Ok(binary_class(self.forward_binary(x)?))
    }
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

pub fn binary_class(output: f64) -> usize {
    if output > 0.0 {
        0
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Literal check of the three output-map clauses on the dense matrix.
    fn satisfies_output_assumption(dense: &[Vec<f64>]) -> bool {
        let n = dense.len();
        let k = dense[0].len();
        let v = dense[0][0].abs();
        let has_positive = (0..n).all(|i| (0..k).any(|j| dense[i][j] > 0.0));
        let exclusive = (0..n).all(|i| {
            (0..k).all(|j| dense[i][j] <= 0.0 || (0..n).all(|r| r == i || dense[r][j] < 0.0))
        });
        let magnitude = dense.iter().flatten().all(|&e| e.abs() == v);
        has_positive && exclusive && magnitude && v > 0.0
    }

    /// One class-0 neuron `w`; class 1 owns an idle zero neuron so the map stays valid.
    fn single_neuron(w: Vec<f64>) -> NetworkParams {
        let idle = vec![0.0; w.len()];
        let weights = WeightMatrix::from_columns(&[w, idle]).unwrap();
        let out = OutputMap::round_robin(2, 2, 1.0).unwrap();
        NetworkParams::without_bias(weights, out).unwrap()
    }

    #[test]
    fn round_robin_minimal() {
        let m = OutputMap::round_robin(2, 2, 1.0).unwrap();
        assert_eq!(m.to_dense(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let m = OutputMap::round_robin(2, 4, 1.0).unwrap();
        assert_eq!(m.owners(), &[0, 1, 0, 1]);
        assert!(OutputMap::round_robin(3, 2, 1.0).is_err());
    }

    #[test]
    fn zero_weights_give_zero_scores() {
        let out = OutputMap::round_robin(3, 5, 1.0).unwrap();
        let p = NetworkParams::without_bias(WeightMatrix::zeros(4, 5), out).unwrap();
        let f = p.forward(&[1.0, -2.0, 0.5, 3.0]).unwrap();
        assert_eq!(f.scores, vec![0.0; 3]);
        assert_eq!(p.predict(&[1.0, -2.0, 0.5, 3.0]).unwrap(), 0);
    }

    #[test]
    fn hand_evaluated_forward() {
        let p = single_neuron(vec![1.0, 0.0]);
        let f = p.forward(&[2.0, 0.0]).unwrap();
        assert_eq!(f.pre, vec![2.0, 0.0]);
        assert_eq!(f.scores, vec![2.0, -2.0]);
        assert_eq!(p.forward_binary(&[2.0, 0.0]).unwrap(), 2.0);
        assert_eq!(p.predict(&[2.0, 0.0]).unwrap(), 0);
    }

    #[test]
    fn inactive_relus_give_zero() {
        let w = WeightMatrix::from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let out = OutputMap::round_robin(2, 2, 1.0).unwrap();
        let p = NetworkParams::with_bias(w, vec![0.4, 0.4], out).unwrap();
        let f = p.forward(&[0.3, 0.2]).unwrap();
        assert_eq!(f.scores, vec![0.0, 0.0]);
    }

    #[test]
    fn argmax_ties_and_order() {
        assert_eq!(argmax(&[2.0, -2.0]), 0);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
        assert_eq!(argmax(&[-1.0, 3.0, 0.0]), 1);
        assert_eq!(binary_class(0.0), 1);
        assert_eq!(binary_class(1e-300), 0);
    }

    #[test]
    fn binary_requires_two_classes() {
        let out = OutputMap::round_robin(3, 3, 1.0).unwrap();
        let p = NetworkParams::without_bias(WeightMatrix::zeros(2, 3), out).unwrap();
        assert!(p.forward_binary(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn bias_constraints() {
        let out = OutputMap::round_robin(2, 2, 1.0).unwrap();
        let w = WeightMatrix::zeros(2, 2);
        assert!(NetworkParams::with_bias(w.clone(), vec![0.5, 0.5], out.clone()).is_err());
        assert!(NetworkParams::with_bias(w.clone(), vec![0.0, 0.0], out.clone()).is_err());
        assert!(NetworkParams::with_bias(w.clone(), vec![0.2, 0.3], out.clone()).is_ok());
        assert!(NetworkParams::new(w, vec![0.1, 0.0], out, BiasMode::NoBias).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = single_neuron(vec![1.0, 0.0]);
        assert!(matches!(p.forward(&[1.0]), Err(Error::Dimension { .. })));
    }

    fn arb_network() -> impl Strategy<Value = (NetworkParams, Vec<f64>)> {
        (1usize..4, 2usize..5, 1usize..4).prop_flat_map(|(d, n, extra)| {
            let k = n + extra;
            (
                prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), k),
                prop::collection::vec(-3.0f64..3.0, d),
                0.1f64..2.0,
            )
                .prop_map(move |(cols, x, v)| {
                    let w = WeightMatrix::from_columns(&cols).unwrap();
                    let out = OutputMap::round_robin(n, k, v).unwrap();
                    (NetworkParams::without_bias(w, out).unwrap(), x)
                })
        })
    }

    proptest! {
        #[test]
        fn round_robin_satisfies_assumption(n in 1usize..6, extra in 0usize..6, v in 0.01f64..10.0) {
            let m = OutputMap::round_robin(n, n + extra, v).unwrap();
            prop_assert!(satisfies_output_assumption(&m.to_dense()));
        }

        #[test]
        fn binary_matches_half_score_gap(cols in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..8),
                                         x in prop::collection::vec(-3.0f64..3.0, 3)) {
            let k = cols.len();
            let w = WeightMatrix::from_columns(&cols).unwrap();
            let out = OutputMap::round_robin(2, k, 1.0).unwrap();
            let p = NetworkParams::without_bias(w, out).unwrap();
            let f = p.forward(&x).unwrap().scores;
            prop_assert!((p.forward_binary(&x).unwrap() - (f[0] - f[1]) / 2.0).abs() <= 1e-12);
        }

        #[test]
        fn positive_homogeneity((p, x) in arb_network(), c in 0.01f64..50.0) {
            let f = p.forward(&x).unwrap().scores;
            let cx: Vec<f64> = x.iter().map(|xi| c * xi).collect();
            let fc = p.forward(&cx).unwrap().scores;
            for (a, b) in f.iter().zip(&fc) {
                prop_assert!((c * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn argmax_scale_invariant(scores in prop::collection::vec(-5.0f64..5.0, 1..6), c in 0.001f64..100.0) {
            let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
            prop_assert_eq!(argmax(&scores), argmax(&scaled));
        }
    }
}
