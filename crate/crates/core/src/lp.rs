//! Small dense simplex solver.
//!
//! Solves `maximize c·x  s.t.  A x <= b, x >= 0` for `b >= 0`, so the origin
//! is always a feasible starting vertex and no phase one is needed. Pivoting
//! follows Bland's rule: the entering variable is the lowest-indexed column
//! with a positive reduced profit, the leaving row is chosen by the minimum
//! ratio test with ties broken by the lowest basic variable index. The
//! output is therefore fully deterministic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: DVector<f64>, value: f64 },
    Unbounded,
}

/// Maximize `objective · x` over `{x >= 0 : a x <= b}` with `b >= 0`.
pub fn maximize(objective: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LpOutcome> {
    let rows = a.nrows();
    let vars = a.ncols();
    if objective.len() != vars {
        return Err(Error::DimensionMismatch {
            expected: vars,
            got: objective.len(),
        });
    }
    if b.len() != rows {
        return Err(Error::DimensionMismatch {
            expected: rows,
            got: b.len(),
        });
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument(
            "right-hand side must be nonnegative".into(),
        ));
    }

    // Tableau columns: structural vars, slacks, rhs. Last row holds the
    // negated objective so that a negative entry marks an improving column.
    let width = vars + rows + 1;
    let rhs = width - 1;
    let mut t = DMatrix::<f64>::zeros(rows + 1, width);
    for i in 0..rows {
        for j in 0..vars {
            t[(i, j)] = a[(i, j)];
        }
        t[(i, vars + i)] = 1.0;
        t[(i, rhs)] = b[i];
    }
    for j in 0..vars {
        t[(rows, j)] = -objective[j];
    }
    let mut basis: Vec<usize> = (vars..vars + rows).collect();

    let scale = objective.amax().max(1.0);
    for _ in 0..MAX_PIVOTS {
        let entering = (0..vars + rows).find(|&j| t[(rows, j)] < -PIVOT_TOL * scale);
        let Some(col) = entering else {
            let mut x = DVector::zeros(vars);
            for (i, &bv) in basis.iter().enumerate() {
                if bv < vars {
                    x[bv] = t[(i, rhs)];
                }
            }
            let value = objective.dot(&x);
            return Ok(LpOutcome::Optimal { x, value });
        };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..rows {
            let coef = t[(i, col)];
            if coef > PIVOT_TOL {
                let ratio = t[(i, rhs)] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - 1e-14 || (ratio <= best + 1e-14 && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Ok(LpOutcome::Unbounded);
        };

        let p = t[(row, col)];
        for j in 0..width {
            t[(row, j)] /= p;
        }
        for i in 0..=rows {
            if i != row {
                let f = t[(i, col)];
                if f != 0.0 {
                    for j in 0..width {
                        let delta = f * t[(row, j)];
                        t[(i, j)] -= delta;
                    }
                }
            }
        }
        basis[row] = col;
    }
    Err(Error::PivotLimit(MAX_PIVOTS))
}
