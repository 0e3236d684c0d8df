//! Dense kernels: one-sided Jacobi singular values, column-pivoted
//! Gram-Schmidt, and small combinatorial helpers.

use nalgebra::{DMatrix, DVector};

pub const JACOBI_MAX_SWEEPS: usize = 100;
pub const JACOBI_TOL: f64 = 1e-12;

/// Relative tolerance for rank decisions, scaled by the largest column norm.
pub const RANK_TOL: f64 = 1e-10;

/// Singular values in descending order, by one-sided (Hestenes) Jacobi.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    // Rotate the smaller side.
    let mut u = if m.ncols() > m.nrows() {
        m.transpose()
    } else {
        m.clone()
    };
    let n = u.ncols();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = u.column(i).norm_squared();
                let beta = u.column(j).norm_squared();
                let gamma = u.column(i).dot(&u.column(j));
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..u.nrows() {
                    let ui = u[(k, i)];
                    let uj = u[(k, j)];
                    u[(k, i)] = c * ui - s * uj;
                    u[(k, j)] = s * ui + c * uj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = (0..n).map(|k| u.column(k).norm()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Column-pivoted Gram-Schmidt.
///
/// Returns the pivot order (largest residual first, ties to the lowest
/// index) and the orthonormal factor for the selected columns. Stops once
/// the largest remaining residual is at most `RANK_TOL` times the largest
/// original column norm.
pub fn pivoted_gram_schmidt(m: &DMatrix<f64>) -> (Vec<usize>, DMatrix<f64>) {
    let rows = m.nrows();
    let cols = m.ncols();
    let scale = (0..cols).map(|j| m.column(j).norm()).fold(0.0, f64::max);
    let mut residual = m.clone();
    let mut pivots = Vec::new();
    let mut q: Vec<DVector<f64>> = Vec::new();
    if scale == 0.0 {
        return (pivots, DMatrix::zeros(rows, 0));
    }
    let tol = RANK_TOL * scale;
    loop {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..cols {
            if pivots.contains(&j) {
                continue;
            }
            let r = residual.column(j).norm();
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((j, r));
            }
        }
        let Some((j, r)) = best else { break };
        if r <= tol {
            break;
        }
        let mut v: DVector<f64> = residual.column(j).into();
        // second pass for numerical orthogonality
        for qk in &q {
            let d = qk.dot(&v);
            v.axpy(-d, qk, 1.0);
        }
        let nv = v.norm();
        if nv <= tol {
            break;
        }
        v /= nv;
        for k in 0..cols {
            let d = v.dot(&residual.column(k));
            let mut col = residual.column_mut(k);
            col.axpy(-d, &v, 1.0);
        }
        pivots.push(j);
        q.push(v);
    }
    let qm = if q.is_empty() {
        DMatrix::zeros(rows, 0)
    } else {
        DMatrix::from_columns(&q)
    };
    (pivots, qm)
}

pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    pivoted_gram_schmidt(m).0.len()
}

/// Orthonormal basis of the column span, columns processed in order.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(m.ncols());
    for j in 0..m.ncols() {
        let mut v: DVector<f64> = m.column(j).into();
        for _ in 0..2 {
            for qk in &q {
                let d = qk.dot(&v);
                v.axpy(-d, qk, 1.0);
            }
        }
        let n = v.norm();
        if n > 0.0 {
            q.push(v / n);
        }
    }
    if q.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&q)
    }
}

/// Moore-Penrose left inverse `(BᵀB)⁻¹Bᵀ` of a full column rank matrix.
pub fn left_inverse(b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let gram = b.transpose() * b;
    let chol = gram.cholesky()?;
    Some(chol.solve(&b.transpose()))
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for t in (i + 1)..k {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sign vectors in `{±1}^n` with the first entry fixed to `+1`; the other
/// half of the cube is the negation of these.
pub fn half_sign_vectors(n: usize) -> impl Iterator<Item = DVector<f64>> {
    let count: u64 = if n == 0 { 1 } else { 1u64 << (n - 1) };
    (0..count).map(move |mask| {
        DVector::from_fn(n, |i, _| {
            if i == 0 || (mask >> (i - 1)) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        })
    })
}
