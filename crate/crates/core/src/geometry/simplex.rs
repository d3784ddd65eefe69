//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Solves `max c^T x` subject to `A x = b`, `x >= 0`. Problems here have at
//! most a few dozen variables, so the tableau is kept dense and pivots are
//! chosen by smallest index to rule out cycling.

const PIVOT_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct StandardLp {
    /// Constraint rows, each of length `n_vars`.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Basic variable of each row.
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[row].clone();
        for (r, line) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, pv) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * pv;
                }
                line[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Maximizes `obj . x` over the current basis; only columns with `allowed[col]` may enter.
    /// Returns false if unbounded.
    fn optimize(&mut self, obj: &[f64], allowed: &[bool]) -> bool {
        let m = self.rows.len();
        let rhs = self.width;
        let max_pivots = 50 * (self.width + m + 10);
        for _ in 0..max_pivots {
            // reduced cost r_j = obj_j - sum_i obj_{basis_i} a_ij
            let entering = (0..self.width).find(|&j| {
                if !allowed[j] || self.basis.contains(&j) {
                    return false;
                }
                let z: f64 = (0..m).map(|i| obj[self.basis[i]] * self.rows[i][j]).sum();
                obj[j] - z > PIVOT_EPS
            });
            let Some(col) = entering else {
                return true;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rows[i][rhs] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15 || (ratio <= br + 1e-15 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return false;
            };
            self.pivot(row, col);
        }
        log::warn!("simplex pivot limit reached");
        true
    }
}

pub fn solve(lp: &StandardLp) -> LpOutcome {
    let m = lp.a.len();
    let n = lp.c.len();
    // Columns: n structural, m artificial, then rhs.
    let width = n + m;
    let mut rows = Vec::with_capacity(m);
    for (i, (row, &bi)) in lp.a.iter().zip(&lp.b).enumerate() {
        debug_assert_eq!(row.len(), n);
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut line: Vec<f64> = row.iter().map(|v| sign * v).collect();
        line.extend((0..m).map(|k| if k == i { 1.0 } else { 0.0 }));
        line.push(sign * bi);
        rows.push(line);
    }
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        width,
    };

    // Phase 1: maximize -sum(artificials).
    let phase1: Vec<f64> = (0..width).map(|j| if j >= n { -1.0 } else { 0.0 }).collect();
    let all = vec![true; width];
    tab.optimize(&phase1, &all);
    let infeasibility: f64 = tab
        .basis
        .iter()
        .zip(&tab.rows)
        .filter(|(&b, _)| b >= n)
        .map(|(_, r)| r[width])
        .sum();
    if infeasibility > FEAS_EPS {
        return LpOutcome::Infeasible;
    }
    // Drive zero-level artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(col) => {
                    tab.pivot(i, col);
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    // Phase 2 over structural columns only.
    let mut obj = lp.c.clone();
    obj.extend(std::iter::repeat_n(0.0, m));
    let structural: Vec<bool> = (0..width).map(|j| j < n).collect();
    if !tab.optimize(&obj, &structural) {
        return LpOutcome::Unbounded;
    }
    let mut x = vec![0.0; n];
    for (r, &bvar) in tab.basis.iter().enumerate() {
        if bvar < n {
            x[bvar] = tab.rows[r][width];
        }
    }
    let objective = x.iter().zip(&lp.c).map(|(a, b)| a * b).sum();
    LpOutcome::Optimal { x, objective }
}
