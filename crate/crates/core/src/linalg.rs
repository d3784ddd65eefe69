//! Small dense vector helpers.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Component of `x` orthogonal to the span of the orthonormal `basis`.
pub fn orthogonal_residual(x: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = x.to_vec();
    for b in basis {
        let c = dot(&r, b);
        axpy(-c, b, &mut r);
    }
    r
}

/// Coordinates of `x` in the orthonormal `basis`.
pub fn coordinates(x: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    basis.iter().map(|b| dot(x, b)).collect()
}

/// Orthogonal projection of `x` onto the span of the orthonormal `basis`.
pub fn project(x: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut p = vec![0.0; x.len()];
    for b in basis {
        axpy(dot(x, b), b, &mut p);
    }
    p
}

/// Numerical rank of the matrix whose columns are `cols`.
pub fn rank(cols: &[Vec<f64>], tol: f64) -> usize {
    if cols.is_empty() {
        return 0;
    }
    let d = cols[0].len();
    let m = nalgebra::DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r]);
    m.rank(tol)
}

/// Unit vector orthogonal to every column in `cols`, if the columns do not span.
pub fn null_direction(cols: &[Vec<f64>], d: usize, tol: f64) -> Option<Vec<f64>> {
    // Rows of the (k x d) matrix are the columns; its null space is the orthogonal complement.
    let k = cols.len();
    let m = nalgebra::DMatrix::from_fn(k.max(d), d, |r, c| if r < k { cols[r][c] } else { 0.0 });
    let svd = m.svd(false, true);
    let v_t = svd.v_t?;
    let sv = svd.singular_values;
    let (idx, smin) = sv
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, s)| (i, *s))?;
    if smin > tol {
        return None;
    }
    let mut n: Vec<f64> = v_t.row(idx).iter().copied().collect();
    let len = norm(&n);
    n.iter_mut().for_each(|x| *x /= len);
    Some(n)
}
