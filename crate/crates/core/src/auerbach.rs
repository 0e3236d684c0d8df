//! Auerbach systems for finite-dimensional subspaces.
//!
//! An Auerbach system of an `m`-dimensional normed space is a basis of unit
//! vectors whose biorthogonal functionals also have norm one. It is found
//! by coordinate ascent on `|det|`: each point in turn is replaced by a
//! maximizer of its cofactor functional over the unit ball. At a stationary
//! configuration every biorthogonal functional attains its maximum, equal
//! to one, at the matching point, which is exactly the Auerbach property.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::{rank_one, FiniteRankOperator};
use crate::space::{support_in_coords, Functional, NormTag, SubspaceBasis, Vector};

/// Tolerance on the norm-one certificate of each biorthogonal functional.
pub const TOL_AUER: f64 = 1e-7;
/// Tolerance on unit norms and biorthogonality.
pub const TOL_EXACT: f64 = 1e-9;
pub const MAX_CYCLES: usize = 500;
pub const STALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct AuerbachSystem {
    subspace: SubspaceBasis,
    /// Subspace coordinates of the points, one column per point.
    coords: DMatrix<f64>,
    points: Vec<Vector>,
    cofunctionals: Vec<Functional>,
    det_value: f64,
    det_trace: Vec<f64>,
}

impl AuerbachSystem {
    /// Assemble a system from explicit points and ambient functionals
    /// without any checking. Used to audit externally supplied systems.
    pub fn from_parts(subspace: SubspaceBasis, points: Vec<Vector>, cofunctionals: Vec<Functional>) -> Result<Self> {
        let m = subspace.dim();
        if points.len() != m || cofunctionals.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: points.len().min(cofunctionals.len()),
            });
        }
        let pinv = linalg::left_inverse(subspace.columns()).ok_or(Error::RankDeficient { rank: 0, columns: m })?;
        let cols: Vec<DVector<f64>> = points.iter().map(|p| &pinv * p.coords()).collect();
        let coords = DMatrix::from_columns(&cols);
        let det_value = coords.determinant().abs();
        Ok(AuerbachSystem {
            subspace,
            coords,
            points,
            cofunctionals,
            det_value,
            det_trace: vec![det_value],
        })
    }

    pub fn subspace(&self) -> &SubspaceBasis {
        &self.subspace
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn cofunctionals(&self) -> &[Functional] {
        &self.cofunctionals
    }

    /// `|det|` of the points in the coordinates of the input basis.
    pub fn det_value(&self) -> f64 {
        self.det_value
    }

    /// `|det|` after initialization and after every ascent cycle.
    pub fn det_trace(&self) -> &[f64] {
        &self.det_trace
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }
}

/// Residuals of the three defining properties of an Auerbach system.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AuerbachReport {
    pub tol: f64,
    pub unit_norm_residual: f64,
    pub biorthogonality_residual: f64,
    pub dual_norm_residual: f64,
    pub unit_norm_pass: bool,
    pub biorthogonality_pass: bool,
    pub dual_norm_pass: bool,
    pub dual_norms: Vec<f64>,
}

impl AuerbachReport {
    pub fn pass(&self) -> bool {
        self.unit_norm_pass && self.biorthogonality_pass && self.dual_norm_pass
    }
}

pub fn verify_auerbach(sys: &AuerbachSystem, tol: f64) -> Result<AuerbachReport> {
    let tag = sys.subspace.space().tag();
    let b = sys.subspace.columns();
    let unit = sys
        .points
        .iter()
        .map(|p| (p.norm() - 1.0).abs())
        .fold(0.0, f64::max);
    let mut biorth: f64 = 0.0;
    for (i, f) in sys.cofunctionals.iter().enumerate() {
        for (j, p) in sys.points.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            biorth = biorth.max((f.eval(p)? - target).abs());
        }
    }
    let mut dual_norms = Vec::with_capacity(sys.dim());
    for f in &sys.cofunctionals {
        let g = b.transpose() * f.coords();
        let (_, value) = support_in_coords(tag, b, &g)?;
        dual_norms.push(value);
    }
    let dual = dual_norms.iter().map(|d| (d - 1.0).abs()).fold(0.0, f64::max);
    Ok(AuerbachReport {
        tol,
        unit_norm_residual: unit,
        biorthogonality_residual: biorth,
        dual_norm_residual: dual,
        unit_norm_pass: unit <= tol,
        biorthogonality_pass: biorth <= tol,
        dual_norm_pass: dual <= tol,
        dual_norms,
    })
}

/// Compute an Auerbach system for `sub`.
///
/// Starts from the normalized input columns; if that run stalls with the
/// dual-norm residual above [`TOL_AUER`], one restart is made from the
/// normalized Gram-Schmidt basis. The ℓ² case is settled directly by an
/// orthonormal basis.
pub fn auerbach_system(sub: &SubspaceBasis) -> Result<AuerbachSystem> {
    let tag = sub.space().tag();
    let b = sub.columns();
    let m = sub.dim();
    let pinv = linalg::left_inverse(b).ok_or(Error::RankDeficient { rank: 0, columns: m })?;

    if tag == NormTag::L2 {
        let q = linalg::orthonormalize(b);
        let coords = &pinv * &q;
        return finish(sub, coords, vec![], &pinv);
    }

    // coordinates of b_j / ‖b_j‖ are e_j / ‖b_j‖
    let start = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 / tag.eval(b.column(j).iter()) } else { 0.0 });
    let first = ascend(tag, b, start)?;
    let sys = finish(sub, first.coords, first.trace, &pinv)?;
    let report = verify_auerbach(&sys, TOL_AUER)?;
    if report.pass() && first.converged {
        return Ok(sys);
    }

    let rotated = unit_columns(tag, linalg::orthonormalize(b));
    let second = ascend(tag, b, &pinv * rotated)?;
    let sys = finish(sub, second.coords, second.trace, &pinv)?;
    let report = verify_auerbach(&sys, TOL_AUER)?;
    if report.pass() && second.converged {
        return Ok(sys);
    }
    Err(Error::Convergence {
        cycles: second.cycles,
        unit: report.unit_norm_residual,
        biorth: report.biorthogonality_residual,
        dual: report.dual_norm_residual,
        last: Box::new(sys),
    })
}

fn unit_columns(tag: NormTag, mut s: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..s.ncols() {
        let n = tag.eval(s.column(j).iter());
        s.column_mut(j).scale_mut(1.0 / n);
    }
    s
}

struct Ascent {
    coords: DMatrix<f64>,
    trace: Vec<f64>,
    cycles: usize,
    converged: bool,
}

fn ascend(tag: NormTag, b: &DMatrix<f64>, mut a: DMatrix<f64>) -> Result<Ascent> {
    let m = a.ncols();
    let mut det = a.determinant();
    if det < 0.0 {
        a.column_mut(0).neg_mut();
        det = -det;
    }
    let mut trace = vec![det];
    for cycle in 1..=MAX_CYCLES {
        let before = det;
        for j in 0..m {
            let Some(inv) = a.clone().try_inverse() else {
                return Err(Error::RankDeficient { rank: m - 1, columns: m });
            };
            // cofactor column j: d det / d a_{kj} = det · (A⁻¹)_{jk}
            let g: DVector<f64> = inv.row(j).transpose() * det;
            let (c, value) = support_in_coords(tag, b, &g)?;
            if value > det * (1.0 + 1e-14) {
                a.set_column(j, &c);
                det = a.determinant();
            }
        }
        trace.push(det);
        if (det - before) <= STALL_TOL * before {
            return Ok(Ascent {
                coords: a,
                trace,
                cycles: cycle,
                converged: true,
            });
        }
    }
    Ok(Ascent {
        coords: a,
        trace,
        cycles: MAX_CYCLES,
        converged: false,
    })
}

fn finish(sub: &SubspaceBasis, coords: DMatrix<f64>, trace: Vec<f64>, pinv: &DMatrix<f64>) -> Result<AuerbachSystem> {
    let m = sub.dim();
    let space = *sub.space();
    let inv = coords
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { rank: m - 1, columns: m })?;
    // e_j* = row j of A⁻¹ B⁺, which annihilates the orthogonal complement
    let dual = inv * pinv;
    let points = (0..m)
        .map(|j| sub.embed(&coords.column(j).into()))
        .collect();
    let cofunctionals = (0..m)
        .map(|j| Functional::from_parts(space, dual.row(j).transpose()))
        .collect();
    let det_value = coords.determinant().abs();
    let det_trace = if trace.is_empty() { vec![det_value] } else { trace };
    Ok(AuerbachSystem {
        subspace: sub.clone(),
        coords,
        points,
        cofunctionals,
        det_value,
        det_trace,
    })
}

/// The rank-one maps `B_j = e_j* ⊗ e_j`, as ambient matrices that vanish on
/// the orthogonal complement of the subspace. They sum to the identity on
/// the subspace.
pub fn auerbach_projections(sys: &AuerbachSystem) -> Vec<FiniteRankOperator> {
    sys.points
        .iter()
        .zip(&sys.cofunctionals)
        .map(|(e, f)| rank_one(f, e))
        .collect()
}
