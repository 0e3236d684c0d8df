//! Finite-dimensional ℓ¹/ℓ²/ℓ^∞ spaces, vectors, functionals and subspaces,
//! plus the support oracle: maximize a linear functional over the unit ball,
//! optionally restricted to a subspace.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{self, LpOutcome};

/// Accuracy of the support oracle.
pub const TOL_LP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTag {
    L1,
    L2,
    Linf,
}

impl NormTag {
    pub const ALL: [NormTag; 3] = [NormTag::L1, NormTag::L2, NormTag::Linf];

    pub fn dual(self) -> NormTag {
        match self {
            NormTag::L1 => NormTag::Linf,
            NormTag::L2 => NormTag::L2,
            NormTag::Linf => NormTag::L1,
        }
    }

    pub fn eval<'a>(self, coords: impl IntoIterator<Item = &'a f64>) -> f64 {
        let it = coords.into_iter();
        match self {
            NormTag::L1 => it.map(|x| x.abs()).sum(),
            NormTag::L2 => it.map(|x| x * x).sum::<f64>().sqrt(),
            NormTag::Linf => it.fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NormTag::L1 => "l1",
            NormTag::L2 => "l2",
            NormTag::Linf => "linf",
        }
    }
}

impl fmt::Display for NormTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(NormTag::L1),
            "l2" => Ok(NormTag::L2),
            "linf" => Ok(NormTag::Linf),
            other => Err(Error::Parse(format!("unknown norm tag {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormedSpace {
    dim: usize,
    norm: NormTag,
}

impl NormedSpace {
    pub fn new(dim: usize, norm: NormTag) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("space dimension must be positive".into()));
        }
        Ok(NormedSpace { dim, norm })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> NormTag {
        self.norm
    }

    pub fn zero(&self) -> Vector {
        Vector {
            space: *self,
            coords: DVector::zeros(self.dim),
        }
    }

    pub fn basis_vector(&self, i: usize) -> Vector {
        let mut v = self.zero();
        v.coords[i] = 1.0;
        v
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }
}

impl fmt::Display for NormedSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}^{}", self.norm, self.dim)
    }
}

/// A point of a [`NormedSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    space: NormedSpace,
    coords: DVector<f64>,
}

impl Vector {
    pub fn new(space: NormedSpace, coords: DVector<f64>) -> Result<Self> {
        space.check_len(coords.len())?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector { space, coords })
    }

    pub fn from_slice(space: NormedSpace, coords: &[f64]) -> Result<Self> {
        Self::new(space, DVector::from_column_slice(coords))
    }

    pub(crate) fn from_parts(space: NormedSpace, coords: DVector<f64>) -> Self {
        debug_assert_eq!(coords.len(), space.dim);
        Vector { space, coords }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.space.norm.eval(self.coords.iter())
    }

    pub fn scaled(&self, alpha: f64) -> Vector {
        Vector::from_parts(self.space, &self.coords * alpha)
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        same_space(&self.space, &other.space)?;
        Ok(Vector::from_parts(self.space, &self.coords - &other.coords))
    }

    pub fn add(&self, other: &Vector) -> Result<Vector> {
        same_space(&self.space, &other.space)?;
        Ok(Vector::from_parts(self.space, &self.coords + &other.coords))
    }
}

/// A linear functional acting through the standard pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    space: NormedSpace,
    coords: DVector<f64>,
}

impl Functional {
    pub fn new(space: NormedSpace, coords: DVector<f64>) -> Result<Self> {
        space.check_len(coords.len())?;
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("functional"));
        }
        Ok(Functional { space, coords })
    }

    pub fn from_slice(space: NormedSpace, coords: &[f64]) -> Result<Self> {
        Self::new(space, DVector::from_column_slice(coords))
    }

    pub(crate) fn from_parts(space: NormedSpace, coords: DVector<f64>) -> Self {
        debug_assert_eq!(coords.len(), space.dim);
        Functional { space, coords }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn eval(&self, v: &Vector) -> Result<f64> {
        same_space(&self.space, &v.space)?;
        Ok(self.coords.dot(&v.coords))
    }

    pub fn dual_norm(&self) -> f64 {
        self.space.norm.dual().eval(self.coords.iter())
    }

    pub fn scaled(&self, alpha: f64) -> Functional {
        Functional::from_parts(self.space, &self.coords * alpha)
    }
}

/// Linearly independent columns spanning a subspace of an ambient space,
/// normed by restriction.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    space: NormedSpace,
    columns: DMatrix<f64>,
}

impl SubspaceBasis {
    /// Rejects empty or rank-deficient column sets.
    pub fn new(space: NormedSpace, columns: DMatrix<f64>) -> Result<Self> {
        space.check_len(columns.nrows())?;
        let k = columns.ncols();
        if k == 0 || k > space.dim {
            return Err(Error::InvalidArgument(format!(
                "subspace needs between 1 and {} columns, got {k}",
                space.dim
            )));
        }
        if columns.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("subspace basis"));
        }
        let rank = linalg::numerical_rank(&columns);
        if rank < k {
            return Err(Error::RankDeficient { rank, columns: k });
        }
        Ok(SubspaceBasis { space, columns })
    }

    pub fn from_vectors(vectors: &[Vector]) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyList)?;
        for v in vectors {
            same_space(&first.space, &v.space)?;
        }
        let cols: Vec<DVector<f64>> = vectors.iter().map(|v| v.coords.clone()).collect();
        Self::new(first.space, DMatrix::from_columns(&cols))
    }

    pub fn full(space: NormedSpace) -> Self {
        SubspaceBasis {
            space,
            columns: DMatrix::identity(space.dim, space.dim),
        }
    }

    pub fn space(&self) -> &NormedSpace {
        &self.space
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn dim(&self) -> usize {
        self.columns.ncols()
    }

    pub fn column(&self, j: usize) -> Vector {
        Vector::from_parts(self.space, self.columns.column(j).into())
    }

    /// Ambient point with the given subspace coordinates.
    pub fn embed(&self, coords: &DVector<f64>) -> Vector {
        Vector::from_parts(self.space, &self.columns * coords)
    }
}

pub(crate) fn same_space(a: &NormedSpace, b: &NormedSpace) -> Result<()> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    if a.norm != b.norm {
        return Err(Error::SpaceMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

pub fn norm(space: &NormedSpace, v: &Vector) -> Result<f64> {
    same_space(space, &v.space)?;
    Ok(v.norm())
}

pub fn dual_norm(space: &NormedSpace, f: &Functional) -> Result<f64> {
    same_space(space, &f.space)?;
    Ok(f.dual_norm())
}

/// Result of [`support_maximize`].
#[derive(Debug, Clone)]
pub struct Support {
    pub point: Vector,
    pub value: f64,
    /// The functional vanishes on the subspace; `point` is zero.
    pub degenerate: bool,
}

/// Maximize `f(v)` over `‖v‖ <= 1`, with `v` restricted to `span(sub)` when
/// a subspace is given. The value is the dual norm of `f` restricted to the
/// subspace. ℓ¹ and ℓ^∞ go through the simplex solver, ℓ² is closed form.
pub fn support_maximize(
    space: &NormedSpace,
    f: &Functional,
    sub: Option<&SubspaceBasis>,
) -> Result<Support> {
    same_space(space, &f.space)?;
    let full;
    let basis = match sub {
        Some(s) => {
            same_space(space, &s.space)?;
            s
        }
        None => {
            full = SubspaceBasis::full(*space);
            &full
        }
    };
    let g = basis.columns.transpose() * &f.coords;
    let scale = f.coords.amax() * column_scale(&basis.columns);
    if g.amax() <= 1e-13 * scale || scale == 0.0 {
        return Ok(Support {
            point: space.zero(),
            value: 0.0,
            degenerate: true,
        });
    }
    let (c, _) = support_in_coords(space.norm, &basis.columns, &g)?;
    let point = basis.embed(&c);
    let value = f.coords.dot(&point.coords);
    Ok(Support {
        point,
        value,
        degenerate: false,
    })
}

fn column_scale(b: &DMatrix<f64>) -> f64 {
    (0..b.ncols()).map(|j| b.column(j).amax()).fold(0.0, f64::max)
}

/// Maximize `g·c` subject to `‖B c‖ <= 1`, in subspace coordinates `c`.
/// `B` must have full column rank.
pub(crate) fn support_in_coords(
    tag: NormTag,
    b: &DMatrix<f64>,
    g: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let n = b.nrows();
    let m = b.ncols();
    match tag {
        NormTag::L2 => {
            let chol = (b.transpose() * b)
                .cholesky()
                .ok_or(Error::RankDeficient { rank: 0, columns: m })?;
            let h = chol.solve(g);
            let value = g.dot(&h).max(0.0).sqrt();
            if value == 0.0 {
                return Ok((DVector::zeros(m), 0.0));
            }
            Ok((h / value, value))
        }
        NormTag::Linf => {
            // c = c⁺ - c⁻ ;  -1 <= B c <= 1
            let mut a = DMatrix::zeros(2 * n, 2 * m);
            for i in 0..n {
                for j in 0..m {
                    a[(i, j)] = b[(i, j)];
                    a[(i, m + j)] = -b[(i, j)];
                    a[(n + i, j)] = -b[(i, j)];
                    a[(n + i, m + j)] = b[(i, j)];
                }
            }
            let rhs = DVector::from_element(2 * n, 1.0);
            let obj = DVector::from_fn(2 * m, |j, _| if j < m { g[j] } else { -g[j - m] });
            split_solution(lp::maximize(&obj, &a, &rhs)?, m)
        }
        NormTag::L1 => {
            // c = c⁺ - c⁻, t >= |B c| entrywise, Σ t <= 1
            let vars = 2 * m + n;
            let mut a = DMatrix::zeros(2 * n + 1, vars);
            for i in 0..n {
                for j in 0..m {
                    a[(i, j)] = b[(i, j)];
                    a[(i, m + j)] = -b[(i, j)];
                    a[(n + i, j)] = -b[(i, j)];
                    a[(n + i, m + j)] = b[(i, j)];
                }
                a[(i, 2 * m + i)] = -1.0;
                a[(n + i, 2 * m + i)] = -1.0;
                a[(2 * n, 2 * m + i)] = 1.0;
            }
            let mut rhs = DVector::zeros(2 * n + 1);
            rhs[2 * n] = 1.0;
            let obj = DVector::from_fn(vars, |j, _| {
                if j < m {
                    g[j]
                } else if j < 2 * m {
                    -g[j - m]
                } else {
                    0.0
                }
            });
            split_solution(lp::maximize(&obj, &a, &rhs)?, m)
        }
    }
}

fn split_solution(out: LpOutcome, m: usize) -> Result<(DVector<f64>, f64)> {
    match out {
        LpOutcome::Optimal { x, value } => {
            let c = DVector::from_fn(m, |j, _| x[j] - x[m + j]);
            Ok((c, value))
        }
        // Cannot happen for a full-rank basis: the section is bounded.
        LpOutcome::Unbounded => Err(Error::RankDeficient { rank: 0, columns: m }),
    }
}

/// Vertices of the polytope `{c : ‖B c‖ <= 1}` for polyhedral norms, one
/// representative per antipodal pair, in subspace coordinates.
///
/// For ℓ¹ a vertex vanishes on `m - 1` independent rows of `B`; for ℓ^∞ it
/// saturates `m` independent rows. Both families are enumerated exhaustively.
pub fn section_vertices(tag: NormTag, b: &DMatrix<f64>) -> Result<Vec<DVector<f64>>> {
    let n = b.nrows();
    let m = b.ncols();
    let cap = crate::operator::enumeration_cap();
    if n > cap {
        return Err(Error::Capacity { dim: n, cap });
    }
    let row_norm = |i: usize| b.row(i).norm();
    let mut out = Vec::new();
    match tag {
        NormTag::L2 => {
            return Err(Error::InvalidArgument(
                "the Euclidean ball has no vertices".into(),
            ))
        }
        NormTag::L1 => {
            for zero_rows in linalg::subsets(n, m - 1) {
                let sub = b.select_rows(&zero_rows);
                let d = null_vector(&sub);
                let bound: f64 = zero_rows.iter().map(|&i| row_norm(i)).product();
                if d.norm() <= 1e-10 * bound.max(f64::MIN_POSITIVE) {
                    continue;
                }
                let v = b * &d;
                let s = NormTag::L1.eval(v.iter());
                if s <= 0.0 {
                    continue;
                }
                out.push(d / s);
            }
        }
        NormTag::Linf => {
            for rows in linalg::subsets(n, m) {
                let sub = b.select_rows(&rows);
                let bound: f64 = rows.iter().map(|&i| row_norm(i)).product();
                let lu = sub.clone().lu();
                if lu.determinant().abs() <= 1e-10 * bound {
                    continue;
                }
                for signs in linalg::half_sign_vectors(m) {
                    let Some(c) = lu.solve(&signs) else { continue };
                    let v = b * &c;
                    if NormTag::Linf.eval(v.iter()) <= 1.0 + TOL_LP {
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Generalized cross product: for a `(m-1) x m` matrix, the vector of
/// signed maximal minors, which spans its kernel when the rows are
/// independent.
fn null_vector(rows: &DMatrix<f64>) -> DVector<f64> {
    let m = rows.ncols();
    if m == 1 {
        return DVector::from_element(1, 1.0);
    }
    DVector::from_fn(m, |k, _| {
        let minor = rows.clone().remove_column(k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}
