//! Finite-rank operators between finite-dimensional normed spaces, stored as
//! dense matrices, with exact induced norms for every pair of norm tags.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;
use crate::space::{same_space, section_vertices, Functional, NormTag, NormedSpace, SubspaceBasis, Vector};

/// Default ceiling on the dimension of any sign or vertex enumeration.
pub const DEFAULT_ENUM_CAP: usize = 20;

/// Relative accuracy of [`FiniteRankOperator::operator_norm`].
pub const TOL_NORM: f64 = 1e-8;

/// Enumeration cap, overridable through `BAPFACTOR_MAX_ENUM_DIM`.
pub fn enumeration_cap() -> usize {
    std::env::var("BAPFACTOR_MAX_ENUM_DIM")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ENUM_CAP)
}

#[derive(Debug, Clone)]
pub struct FiniteRankOperator {
    matrix: DMatrix<f64>,
    domain: NormedSpace,
    codomain: NormedSpace,
    rank: OnceLock<usize>,
}

impl PartialEq for FiniteRankOperator {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.codomain == other.codomain && self.matrix == other.matrix
    }
}

impl FiniteRankOperator {
    /// `matrix` is `codomain.dim() x domain.dim()`.
    pub fn new(domain: NormedSpace, codomain: NormedSpace, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.ncols() != domain.dim() {
            return Err(Error::DimensionMismatch {
                expected: domain.dim(),
                got: matrix.ncols(),
            });
        }
        if matrix.nrows() != codomain.dim() {
            return Err(Error::DimensionMismatch {
                expected: codomain.dim(),
                got: matrix.nrows(),
            });
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("operator matrix"));
        }
        Ok(Self::from_parts(domain, codomain, matrix))
    }

    pub fn from_rows(domain: NormedSpace, codomain: NormedSpace, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(domain, codomain, matrix_from_rows(rows)?)
    }

    pub(crate) fn from_parts(domain: NormedSpace, codomain: NormedSpace, matrix: DMatrix<f64>) -> Self {
        FiniteRankOperator {
            matrix,
            domain,
            codomain,
            rank: OnceLock::new(),
        }
    }

    pub fn zero(domain: NormedSpace, codomain: NormedSpace) -> Self {
        Self::from_parts(domain, codomain, DMatrix::zeros(codomain.dim(), domain.dim()))
    }

    pub fn identity(space: NormedSpace) -> Self {
        Self::from_parts(space, space, DMatrix::identity(space.dim(), space.dim()))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn domain(&self) -> &NormedSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &NormedSpace {
        &self.codomain
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.matrix)
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        same_space(&self.domain, x.space())?;
        Ok(Vector::from_parts(self.codomain, &self.matrix * x.coords()))
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        same_space(&self.domain, &other.domain)?;
        same_space(&self.codomain, &other.codomain)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_parts(self.domain, self.codomain, &self.matrix + &other.matrix))
    }

    pub fn subtract(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::from_parts(self.domain, self.codomain, &self.matrix - &other.matrix))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_parts(self.domain, self.codomain, &self.matrix * alpha)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        same_space(&inner.codomain, &self.domain)?;
        Ok(Self::from_parts(inner.domain, self.codomain, &self.matrix * &inner.matrix))
    }

    /// Exact induced norm `sup ‖Ax‖ / ‖x‖`.
    pub fn operator_norm(&self) -> Result<f64> {
        induced_norm(&self.matrix, self.domain.tag(), self.codomain.tag())
    }

    /// Induced norm of the restriction to `span(sub)` of the domain.
    pub fn restricted_norm(&self, sub: &SubspaceBasis) -> Result<f64> {
        same_space(&self.domain, sub.space())?;
        let b = sub.columns();
        let from = self.domain.tag();
        let to = self.codomain.tag();
        match from {
            NormTag::L2 => {
                let q = linalg::orthonormalize(b);
                induced_norm(&(&self.matrix * q), NormTag::L2, to)
            }
            NormTag::L1 | NormTag::Linf => {
                let image = &self.matrix * b;
                let mut best: f64 = 0.0;
                for c in section_vertices(from, b)? {
                    let denom = from.eval((b * &c).iter());
                    let num = to.eval((&image * &c).iter());
                    best = best.max(num / denom);
                }
                Ok(best)
            }
        }
    }

    /// Numerical rank at the `RANK_TOL` column-scaled tolerance; cached.
    pub fn rank(&self) -> usize {
        *self.rank.get_or_init(|| linalg::numerical_rank(&self.matrix))
    }

    /// Column-pivoted basis of the range; `None` for the zero operator.
    pub fn range_basis(&self) -> Option<SubspaceBasis> {
        let (pivots, _) = linalg::pivoted_gram_schmidt(&self.matrix);
        let _ = self.rank.set(pivots.len());
        if pivots.is_empty() {
            return None;
        }
        let cols = self.matrix.select_columns(&pivots);
        SubspaceBasis::new(self.codomain, cols).ok()
    }
}

pub fn operator_norm(op: &FiniteRankOperator) -> Result<f64> {
    op.operator_norm()
}

pub fn range_basis(op: &FiniteRankOperator) -> Option<SubspaceBasis> {
    op.range_basis()
}

/// `x ↦ f(x)·w`.
pub fn rank_one(f: &Functional, w: &Vector) -> FiniteRankOperator {
    FiniteRankOperator::from_parts(*f.space(), *w.space(), w.coords() * f.coords().transpose())
}

fn check_cap(dim: usize) -> Result<()> {
    let cap = enumeration_cap();
    if dim > cap {
        return Err(Error::Capacity { dim, cap });
    }
    Ok(())
}

/// Induced norm of `m` from `ℓ^from` to `ℓ^to`.
///
/// ℓ¹ domains take the largest column norm, ℓ^∞ codomains the largest
/// row dual norm, ℓ²→ℓ² the top singular value. The remaining pairs are
/// convex maximizations settled by enumerating sign vectors: the cube's
/// vertices for an ℓ^∞ domain, and the codomain dual-ball vertices for ℓ²→ℓ¹.
pub fn induced_norm(m: &DMatrix<f64>, from: NormTag, to: NormTag) -> Result<f64> {
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    Ok(match (from, to) {
        (NormTag::L1, _) => fold_max(&mut (0..m.ncols()).map(|j| to.eval(m.column(j).iter()))),
        (_, NormTag::Linf) => {
            let d = from.dual();
            fold_max(&mut (0..m.nrows()).map(|i| d.eval(m.row(i).iter())))
        }
        (NormTag::L2, NormTag::L2) => linalg::spectral_norm(m),
        (NormTag::Linf, _) => {
            check_cap(m.ncols())?;
            fold_max(&mut linalg::half_sign_vectors(m.ncols()).map(|s| to.eval((m * s).iter())))
        }
        (NormTag::L2, NormTag::L1) => {
            check_cap(m.nrows())?;
            let mt = m.transpose();
            fold_max(&mut linalg::half_sign_vectors(m.nrows()).map(|s| (&mt * s).norm()))
        }
    })
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    if r == 0 {
        return Err(Error::InvalidArgument("matrix has no rows".into()));
    }
    let c = rows[0].len();
    if c == 0 {
        return Err(Error::InvalidArgument("matrix has no columns".into()));
    }
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(Error::DimensionMismatch {
            expected: c,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}
