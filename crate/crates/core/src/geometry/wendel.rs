//! Probability that `k` uniformly random directions in `R^d` satisfy the
//! geometric condition: `2^{1-k} sum_{j=d}^{k-1} C(k-1, j)`.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gc_check, DirectionSet, GC_TOL};
use crate::error::{config_err, Result};
use crate::rng::Rng;

/// Exact value as a reduced fraction.
pub fn gc_probability_exact(d: usize, k: usize) -> Result<BigRational> {
    if d < 1 || k < 1 {
        return config_err(format!("need d >= 1 and k >= 1, got d = {d}, k = {k}"));
    }
    let n = k - 1;
    let mut numer = BigUint::zero();
    // C(n, j) built incrementally from C(n, 0) = 1
    let mut binom = BigUint::one();
    for j in 0..=n {
        if j >= d {
            numer += &binom;
        }
        binom = binom * BigUint::from(n - j) / BigUint::from(j + 1);
    }
    let denom = BigUint::one() << n;
    Ok(BigRational::new(numer.into(), denom.into()))
}

pub fn gc_probability(d: usize, k: usize) -> Result<f64> {
    let exact = gc_probability_exact(d, k)?;
    Ok(exact.to_f64().unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub trials: usize,
    pub holds: usize,
}

/// Monte Carlo frequency of the condition for `k` normalized Gaussian directions.
/// Trial `i` draws from `Rng::derive(seed, i)`, so results do not depend on threading.
pub fn gc_probability_mc(d: usize, k: usize, trials: usize, seed: u64) -> Result<McEstimate> {
    if trials < 1 {
        return config_err("Monte Carlo needs at least one trial");
    }
    if d < 1 || k < 1 {
        return config_err(format!("need d >= 1 and k >= 1, got d = {d}, k = {k}"));
    }
    let holds = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::derive(seed, i as u64);
            let vecs: Vec<Vec<f64>> = (0..k).map(|_| rng.unit_vector(d)).collect();
            let dirs = DirectionSet::from_vectors(&vecs)?;
            Ok(usize::from(gc_check(&dirs, GC_TOL)?.holds()))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let p = holds as f64 / trials as f64;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(gc_probability(2, 4).unwrap(), 0.5);
        assert_eq!(gc_probability(2, 3).unwrap(), 0.25);
        for d in 1..8 {
            assert_eq!(gc_probability(d, d).unwrap(), 0.0);
            assert_eq!(gc_probability(d, 1).unwrap(), 0.0);
        }
        assert_eq!(gc_probability(1, 2).unwrap(), 0.5);
        assert!(gc_probability(2, 64).unwrap() > 0.999);
        assert!(gc_probability(0, 3).is_err());
    }

    #[test]
    fn monotone_in_k_and_large_k_is_finite() {
        for d in 1..6 {
            let mut prev = 0.0;
            for k in 1..80 {
                let p = gc_probability(d, k).unwrap();
                assert!(p >= prev && p <= 1.0);
                prev = p;
            }
        }
        let p = gc_probability(10, 2000).unwrap();
        assert!(p > 0.999_999 && p <= 1.0);
    }

    #[test]
    fn brute_force_binomials_agree() {
        // independent oracle: Pascal's triangle in f64
        let mut row = vec![1.0f64];
        for n in 0..40usize {
            let k = n + 1;
            for d in 1..6 {
                let s: f64 = (d..=n).map(|j| row[j]).sum();
                let expect = s / 2f64.powi(n as i32);
                assert!((gc_probability(d, k).unwrap() - expect).abs() < 1e-14);
            }
            let mut next = vec![1.0; n + 2];
            for j in 1..=n {
                next[j] = row[j - 1] + row[j];
            }
            row = next;
        }
    }

    #[test]
    fn monte_carlo_small_cases() {
        let est = gc_probability_mc(3, 3, 10_000, 1).unwrap();
        assert_eq!(est.holds, 0);
        let est = gc_probability_mc(2, 4, 20_000, 2).unwrap();
        assert!((est.estimate - 0.5).abs() <= 3.0 * est.stderr);
        assert!(gc_probability_mc(2, 4, 0, 2).is_err());
    }
}
