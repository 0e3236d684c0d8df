//! The sequence space `Y` over the atom lines of a [`SplittingPlan`].
//!
//! An element is a finitely supported coefficient map `s ↦ c_s` standing for
//! the sequence `y(s) = c_s ỹ_s`, where `ỹ_s` is the unit vector spanning the
//! image of atom `s`. The norm is `|||y||| = sup_n ‖Σ_{s<=n} y(s)‖`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::FiniteRankOperator;
use crate::space::{same_space, NormedSpace, Vector};
use crate::splitting::{SplittingPlan, BOUND_SLACK, GLOBAL_FACTOR};
use crate::telescope::{bap_from_pointwise, BapCertificate};

/// Relative tolerance for `‖j y‖ <= |||y|||` and for monotonicity.
pub const CONTRACTION_TOL: f64 = 1e-12;
/// Relative tolerance for `|||Ã x||| <= 5K‖T‖‖x‖`.
pub const LIFT_TOL: f64 = 1e-7;
/// Relative tolerance of the identity `T = jÃ`.
pub const FACTORIZATION_TOL: f64 = 1e-8;
/// Tolerance of `R_final = T`.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct YElement<'a> {
    plan: &'a SplittingPlan,
    coeffs: BTreeMap<usize, f64>,
}

impl<'a> YElement<'a> {
    /// Build from `(s, c_s)` pairs. Repeated indices accumulate. Atoms with
    /// zero image carry no line, so only a zero coefficient is accepted there.
    pub fn new(plan: &'a SplittingPlan, entries: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (s, c) in entries {
            if !c.is_finite() {
                return Err(Error::NonFinite("Y coefficient"));
            }
            let atom = plan.atom(s)?;
            if atom.direction().is_none() {
                if c != 0.0 {
                    return Err(Error::InvalidArgument(format!("atom {s} has zero image")));
                }
                continue;
            }
            *coeffs.entry(s).or_insert(0.0) += c;
        }
        Ok(YElement { plan, coeffs })
    }

    pub fn zero(plan: &'a SplittingPlan) -> Self {
        YElement {
            plan,
            coeffs: BTreeMap::new(),
        }
    }

    /// `ȳ_s`: `ỹ_s` in slot `s`, zero elsewhere.
    pub fn basis_vector(plan: &'a SplittingPlan, s: usize) -> Result<Self> {
        if plan.atom(s)?.direction().is_none() {
            return Err(Error::InvalidArgument(format!("atom {s} has zero image")));
        }
        Self::new(plan, [(s, 1.0)])
    }

    pub fn plan(&self) -> &'a SplittingPlan {
        self.plan
    }

    pub fn coeffs(&self) -> &BTreeMap<usize, f64> {
        &self.coeffs
    }

    pub fn coeff(&self, s: usize) -> f64 {
        self.coeffs.get(&s).copied().unwrap_or(0.0)
    }

    /// Largest index in the support, 0 for the empty element.
    pub fn support_end(&self) -> usize {
        self.coeffs.keys().next_back().copied().unwrap_or(0)
    }

    /// `y(s) = c_s ỹ_s`.
    pub fn term(&self, s: usize) -> Result<Vector> {
        let atom = self.plan.atom(s)?;
        Ok(match atom.direction() {
            Some(d) => d.scaled(self.coeff(s)),
            None => self.plan.codomain().zero(),
        })
    }

    /// `‖Σ_{s<=n} y(s)‖` for `n = 1..=support_end`.
    pub fn prefix_norms(&self) -> Vec<f64> {
        let end = self.support_end();
        let mut acc = self.plan.codomain().zero();
        let mut out = Vec::with_capacity(end);
        for s in 1..=end {
            if let Some(&c) = self.coeffs.get(&s) {
                let d = self.plan.atoms()[s - 1].direction().expect("support avoids zero atoms");
                acc = acc.add(&d.scaled(c)).expect("codomain");
            }
            out.push(acc.norm());
        }
        out
    }

    pub fn y_norm(&self) -> f64 {
        self.prefix_norms().into_iter().fold(0.0, f64::max)
    }

    /// The map `j`: `Σ_s y(s)` in `W`.
    pub fn sum_j(&self) -> Vector {
        let mut acc = self.plan.codomain().zero();
        for (&s, &c) in &self.coeffs {
            let d = self.plan.atoms()[s - 1].direction().expect("support avoids zero atoms");
            acc = acc.add(&d.scaled(c)).expect("codomain");
        }
        acc
    }

    /// Basis projection `P_n`: keep the coefficients with `s <= n`.
    pub fn truncate(&self, n: usize) -> Self {
        YElement {
            plan: self.plan,
            coeffs: self.coeffs.range(..=n).map(|(&s, &c)| (s, c)).collect(),
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        YElement {
            plan: self.plan,
            coeffs: self.coeffs.iter().map(|(&s, &c)| (s, alpha * c)).collect(),
        }
    }

    pub fn add(&self, other: &YElement<'_>) -> Result<Self> {
        if !std::ptr::eq(self.plan, other.plan) {
            return Err(Error::SpaceMismatch("Y elements over different plans".into()));
        }
        let mut coeffs = self.coeffs.clone();
        for (&s, &c) in &other.coeffs {
            *coeffs.entry(s).or_insert(0.0) += c;
        }
        Ok(YElement {
            plan: self.plan,
            coeffs,
        })
    }
}

pub fn y_norm(y: &YElement<'_>) -> f64 {
    y.y_norm()
}

pub fn sum_j(y: &YElement<'_>) -> Vector {
    y.sum_j()
}

/// The map `Ã`: `x ↦ (Ã_s x)_s`, written against the lines `ỹ_s`.
pub fn lift<'a>(plan: &'a SplittingPlan, x: &Vector) -> Result<YElement<'a>> {
    same_space(x.space(), plan.domain())?;
    let mut coeffs = BTreeMap::new();
    for (i, atom) in plan.atoms().iter().enumerate() {
        let Some(d) = atom.direction() else { continue };
        // Ã_s x = f(x)·w and w = ±‖w‖·ỹ_s
        let w = atom.vector();
        let sign = if w.coords().dot(d.coords()) >= 0.0 { 1.0 } else { -1.0 };
        let c = atom.functional().eval(x)? * w.norm() * sign;
        coeffs.insert(i + 1, c);
    }
    Ok(YElement { plan, coeffs })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub norm_t: f64,
    /// `‖jÃx − Tx‖` per test vector.
    pub residuals: Vec<f64>,
    /// `10⁻⁸‖T‖‖x‖` per test vector.
    pub tolerances: Vec<f64>,
    pub max_residual: f64,
    pub failures: Vec<usize>,
    pub pass: bool,
}

/// Check `Tx = jÃx` on every vector of `test_set`.
pub fn verify_factorization(
    plan: &SplittingPlan,
    t: &FiniteRankOperator,
    test_set: &[Vector],
) -> Result<FactorizationReport> {
    same_space(t.domain(), plan.domain())?;
    same_space(t.codomain(), plan.codomain())?;
    let norm_t = plan.norm_t();
    let mut residuals = Vec::with_capacity(test_set.len());
    let mut tolerances = Vec::with_capacity(test_set.len());
    let mut failures = Vec::new();
    for (k, x) in test_set.iter().enumerate() {
        let r = lift(plan, x)?.sum_j().sub(&t.apply(x)?)?.norm();
        let tol = FACTORIZATION_TOL * norm_t * x.norm();
        if r > tol {
            failures.push(k);
        }
        residuals.push(r);
        tolerances.push(tol);
    }
    Ok(FactorizationReport {
        norm_t,
        max_residual: residuals.iter().copied().fold(0.0, f64::max),
        residuals,
        tolerances,
        pass: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormAudit {
    pub samples: usize,
    /// `max ‖j y‖ / |||y|||` over random `y`; at most 1.
    pub j_max_ratio: f64,
    /// `max |||Ã x||| / ‖x‖` over random `x`.
    pub lift_max_ratio: f64,
    /// `5K‖T‖`.
    pub lift_bound: f64,
    pub j_ok: bool,
    pub lift_ok: bool,
}

impl NormAudit {
    pub fn pass(&self) -> bool {
        self.j_ok && self.lift_ok
    }
}

fn gaussian_vector(rng: &mut ChaCha8Rng, space: NormedSpace) -> Vector {
    let coords: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
    Vector::from_slice(space, &coords).expect("finite sample")
}

/// Random Gaussian element supported on every atom with a nonzero image.
pub fn random_element<'a>(plan: &'a SplittingPlan, rng: &mut ChaCha8Rng) -> YElement<'a> {
    let coeffs = plan
        .atoms()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.direction().is_some())
        .map(|(i, _)| (i + 1, rng.sample::<f64, _>(StandardNormal)))
        .collect();
    YElement { plan, coeffs }
}

/// Sample `‖j‖ <= 1` and `‖Ã‖ <= 5K‖T‖` with `samples` random elements and
/// vectors each.
pub fn norm_audit(plan: &SplittingPlan, samples: usize, seed: u64) -> Result<NormAudit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut j_ratio: f64 = 0.0;
    let mut j_ok = true;
    for _ in 0..samples {
        let y = random_element(plan, &mut rng);
        let yn = y.y_norm();
        let jn = y.sum_j().norm();
        if jn > yn * (1.0 + CONTRACTION_TOL) {
            j_ok = false;
        }
        if yn > 0.0 {
            j_ratio = j_ratio.max(jn / yn);
        }
    }
    let lift_bound = GLOBAL_FACTOR * plan.k() * plan.norm_t();
    let mut lift_ratio: f64 = 0.0;
    let mut lift_ok = true;
    for _ in 0..samples {
        let x = gaussian_vector(&mut rng, *plan.domain());
        let xn = x.norm();
        let ln = lift(plan, &x)?.y_norm();
        if ln > lift_bound * xn * (1.0 + LIFT_TOL) {
            lift_ok = false;
        }
        if xn > 0.0 {
            lift_ratio = lift_ratio.max(ln / xn);
        }
    }
    Ok(NormAudit {
        samples,
        j_max_ratio: j_ratio,
        lift_max_ratio: lift_ratio,
        lift_bound,
        j_ok,
        lift_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub prefixes_checked: usize,
    pub violations: usize,
    /// Largest `|||P_m y||| − |||P_{m+1} y|||` seen, relative to `|||y|||`.
    pub max_violation: f64,
    pub pass: bool,
}

/// Check `|||Σ_{s<=m} c_s ȳ_s||| <= |||Σ_{s<=m+1} c_s ȳ_s|||` for Gaussian
/// coefficient sequences and every `m` below the atom count.
pub fn basis_monotonicity_check(plan: &SplittingPlan, coeff_samples: usize, seed: u64) -> MonotonicityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = plan.atoms().len();
    let mut checked = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..coeff_samples {
        let y = random_element(plan, &mut rng);
        let scale = y.y_norm().max(f64::MIN_POSITIVE);
        let norms: Vec<f64> = (1..=n).map(|m| y.truncate(m).y_norm()).collect();
        for m in 1..n {
            let gap = (norms[m - 1] - norms[m]) / scale;
            worst = worst.max(gap);
            if gap > CONTRACTION_TOL {
                violations += 1;
            }
            checked += 1;
        }
    }
    MonotonicityReport {
        samples: coeff_samples,
        prefixes_checked: checked,
        violations,
        max_violation: if checked == 0 { 0.0 } else { worst.max(0.0) },
        pass: violations == 0,
    }
}

/// The approximation certificate carried by a factorization: `R_N = j P_N Ã`
/// with constant `5K`, tested on the unit vectors of `X`.
///
/// `R_N` is also evaluated through `Y` on the test set, and the final
/// approximant must reproduce `T`.
pub fn certificate_from_factorization(plan: &SplittingPlan) -> Result<BapCertificate> {
    let t = plan.target();
    let r_list = plan.atom_partial_sums();
    if r_list.is_empty() {
        return Err(Error::EmptyList);
    }
    let test_set: Vec<Vector> = (0..plan.domain().dim()).map(|i| plan.domain().basis_vector(i)).collect();
    let scale = plan.norm_t().max(1.0);
    for x in &test_set {
        let y = lift(plan, x)?;
        for (n, r) in r_list.iter().enumerate() {
            let d = y.truncate(n + 1).sum_j().sub(&r.apply(x)?)?.norm();
            if d > RECONSTRUCTION_TOL * scale {
                return Err(Error::Protocol {
                    step: n + 1,
                    reason: format!("R_N differs from j P_N Ã by {d:.3e}"),
                });
            }
        }
    }
    let c = GLOBAL_FACTOR * plan.k();
    let bound = c * plan.norm_t() + BOUND_SLACK;
    let cert = bap_from_pointwise(&t, &r_list, &test_set, c, &[])?;
    if let Some((i, &n)) = cert.approximant_norms.iter().enumerate().find(|(_, &n)| n > bound) {
        return Err(Error::NormBound { index: i + 1, norm: n, bound });
    }
    let residual = r_list.last().unwrap().subtract(&t)?.operator_norm()?;
    if residual > RECONSTRUCTION_TOL * scale {
        return Err(Error::EpsilonNotReached {
            eps: RECONSTRUCTION_TOL * scale,
            residual,
        });
    }
    Ok(cert)
}
