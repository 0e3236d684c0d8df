//! End-to-end runs behind the `bapfactor` subcommands.
//!
//! Input and capacity problems come back as `Err`; certification problems
//! are recorded as failing stages in the returned [`Report`].

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::auerbach::{verify_auerbach, TOL_AUER};
use crate::error::{Error, Result};
use crate::linalg::orthonormalize;
use crate::operator::{induced_norm, FiniteRankOperator};
use crate::report::{Report, Stage};
use crate::scenario::Instance;
use crate::space::{NormTag, NormedSpace, Vector};
use crate::splitting::{build_splitting, verify_partial_sums, CurvePoint, SplittingPlan, GLOBAL_FACTOR};
use crate::telescope::{bap_from_pointwise, partial_sums, BapCertificate};
use crate::yspace::{basis_monotonicity_check, certificate_from_factorization, norm_audit, verify_factorization};

pub const TEST_VECTORS: usize = 500;
pub const AUDIT_SAMPLES: usize = 500;
pub const MONOTONE_SAMPLES: usize = 100;
pub const CERTIFY_TEST_VECTORS: usize = 100;
/// Tolerance for exact finite identities of the splitting.
pub const SPLIT_TOL: f64 = 1e-9;
/// Step of the grid cross-check in `opnorm`.
pub const GRID_STEP: f64 = 1e-2;
/// Largest disagreement accepted between the exact norm and the grid.
pub const GRID_AGREEMENT: f64 = 2e-2;
pub const GRID_MAX_DIM: usize = 3;

/// `count` seeded unit vectors of `space` with Gaussian directions.
pub fn test_vectors(space: NormedSpace, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = DVector::from_fn(space.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = Vector::new(space, c).expect("finite sample");
        let n = v.norm();
        if n > 0.0 {
            out.push(v.scaled(1.0 / n));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAudit {
    /// `Σ_s Ã_s − T` in operator norm.
    pub reconstruction_residual: f64,
    /// Per block, `max_e ‖Σ_i C_i e − e‖` over the basis of the range.
    pub block_identity_residuals: Vec<f64>,
    /// Largest rank among the atoms.
    pub max_atom_rank: usize,
    /// Largest relative distance from an atom image to its block range.
    pub max_image_offset: f64,
    pub pass: bool,
}

/// Check the finite identities of a splitting: reconstruction, the
/// within-block identity, and that every atom is rank one into its block.
pub fn audit_split(plan: &SplittingPlan) -> Result<SplitAudit> {
    let t = plan.target();
    let scale = plan.norm_t().max(1.0);
    let total = plan.atom_partial_sums().pop().unwrap_or_else(|| FiniteRankOperator::zero(*plan.domain(), *plan.codomain()));
    let reconstruction = total.subtract(&t)?.operator_norm()?;

    let mut identity = Vec::with_capacity(plan.blocks().len());
    for block in plan.blocks() {
        let Some(range) = block.range() else {
            identity.push(0.0);
            continue;
        };
        let mut sum = FiniteRankOperator::zero(*plan.codomain(), *plan.codomain());
        for c in block.pieces() {
            sum = sum.add(c)?;
        }
        let mut worst: f64 = 0.0;
        for j in 0..range.dim() {
            let e = range.column(j);
            worst = worst.max(sum.apply(&e)?.sub(&e)?.norm() / e.norm());
        }
        identity.push(worst);
    }

    let mut max_rank = 0;
    let mut offset: f64 = 0.0;
    for atom in plan.atoms() {
        max_rank = max_rank.max(atom.operator().rank());
        let block = &plan.blocks()[atom.block() - 1];
        let q = orthonormalize(block.range().expect("atoms come from nonzero blocks").columns());
        let w = atom.vector().coords();
        let residual = w - &q * (q.transpose() * w);
        offset = offset.max(residual.norm() / w.norm());
    }
    let pass = reconstruction <= SPLIT_TOL * scale
        && identity.iter().all(|&r| r <= SPLIT_TOL)
        && max_rank <= 1
        && offset <= crate::linalg::RANK_TOL.sqrt();
    Ok(SplitAudit {
        reconstruction_residual: reconstruction,
        block_identity_residuals: identity,
        max_atom_rank: max_rank,
        max_image_offset: offset,
        pass,
    })
}

fn plan_or_stage(inst: &Instance, report: &mut Report) -> Result<Option<SplittingPlan>> {
    match build_splitting(&inst.blocks, inst.k) {
        Ok(plan) => Ok(Some(plan)),
        Err(e) if e.is_certification_failure() => {
            report.push(Stage::failed("splitting", &e));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
struct InputSummary {
    x: NormedSpace,
    w: NormedSpace,
    k: f64,
    norm_t: f64,
    ranks: Vec<usize>,
    atoms: usize,
    partial_sum_norms: Vec<f64>,
}

/// Run the whole factorization pipeline on an instance.
pub fn factorize(inst: &Instance) -> Result<Report> {
    let start = Instant::now();
    let mut report = Report::new("factorize", inst.seed);
    let Some(plan) = plan_or_stage(inst, &mut report)? else {
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok(report);
    };
    let kt = plan.k() * plan.norm_t();
    let partial_norms = partial_sums(&inst.blocks)?
        .iter()
        .map(|s| s.operator_norm())
        .collect::<Result<Vec<_>>>()?;
    let summary = InputSummary {
        x: inst.x,
        w: inst.w,
        k: plan.k(),
        norm_t: plan.norm_t(),
        ranks: plan.index().ranks().to_vec(),
        atoms: plan.atoms().len(),
        partial_sum_norms: partial_norms.clone(),
    };
    report.margin("input_partial_sums", kt, partial_norms.iter().copied().fold(0.0, f64::max));
    report.push(Stage::new("input", true, &summary));

    let mut auerbach = Vec::new();
    let mut worst: f64 = 0.0;
    for block in plan.blocks() {
        if let Some(sys) = block.auerbach() {
            let r = verify_auerbach(sys, TOL_AUER)?;
            worst = worst
                .max(r.unit_norm_residual)
                .max(r.biorthogonality_residual)
                .max(r.dual_norm_residual);
            auerbach.push(r);
        }
    }
    report.margin("auerbach_residual", TOL_AUER, worst);
    report.push(Stage::new("auerbach", auerbach.iter().all(|r| r.pass()), &auerbach));

    let split = audit_split(&plan)?;
    report.margin("reconstruction", SPLIT_TOL * plan.norm_t().max(1.0), split.reconstruction_residual);
    report.push(Stage::new("split", split.pass, &split));

    let sums = verify_partial_sums(&plan)?;
    report.margin("within_block", crate::splitting::WITHIN_BLOCK_BOUND, sums.within_block_max);
    let block_max = sums.block_norms.iter().map(|p| p.norm).fold(0.0, f64::max);
    report.margin("block_norm", crate::splitting::BLOCK_FACTOR * kt, block_max);
    report.margin("global_partial_sums", sums.global_bound, sums.global_max);
    report.curve = sums.global_curve.clone();
    report.push(Stage::new("partial_sums", sums.pass, &sums));

    let xs = test_vectors(inst.x, TEST_VECTORS, inst.seed);
    let fact = verify_factorization(&plan, &plan.target(), &xs)?;
    let slack = fact
        .tolerances
        .iter()
        .zip(&fact.residuals)
        .map(|(t, r)| t - r)
        .fold(f64::INFINITY, f64::min);
    report.margins.insert("factorization".into(), slack);
    report.push(Stage::new("factorization", fact.pass, &fact));

    let audit = norm_audit(&plan, AUDIT_SAMPLES, inst.seed.wrapping_add(1))?;
    report.margin("j_contraction", 1.0, audit.j_max_ratio);
    report.margin("lift_bound", audit.lift_bound, audit.lift_max_ratio);
    report.push(Stage::new("norms", audit.pass(), &audit));

    let mono = basis_monotonicity_check(&plan, MONOTONE_SAMPLES, inst.seed.wrapping_add(2));
    report.margin("monotone_basis", 0.0, mono.max_violation);
    report.push(Stage::new("monotone_basis", mono.pass, &mono));

    match certificate_from_factorization(&plan) {
        Ok(cert) => {
            let max = cert.approximant_norms.iter().copied().fold(0.0, f64::max);
            report.margin("converse", GLOBAL_FACTOR * kt, max);
            report.push(Stage::new("converse", true, &cert));
        }
        Err(e) if e.is_certification_failure() => report.push(Stage::failed("converse", &e)),
        Err(e) => return Err(e),
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheck {
    /// `‖S_p − Σ_{s<=end of block p} Ã_s‖` per block.
    pub block_deviations: Vec<f64>,
    /// First block whose deviation exceeds the tolerance.
    pub first_mismatch: Option<usize>,
    pub both_bounded: bool,
    pub pass: bool,
}

/// Compare the approximants `S_p` with the atom sums at the end of each
/// block, where both sequences must agree.
pub fn cross_check(
    plan: &SplittingPlan,
    s_list: &[FiniteRankOperator],
    pointwise: &BapCertificate,
    converse: &BapCertificate,
) -> Result<CrossCheck> {
    if s_list.len() != plan.blocks().len() {
        return Err(Error::DimensionMismatch {
            expected: plan.blocks().len(),
            got: s_list.len(),
        });
    }
    let sums = plan.atom_partial_sums();
    let tol = SPLIT_TOL * plan.norm_t().max(1.0);
    let mut end = 0;
    let mut deviations = Vec::with_capacity(s_list.len());
    for (p, s) in s_list.iter().enumerate() {
        end += plan.index().ranks()[p].pow(2);
        let r = match end {
            0 => FiniteRankOperator::zero(*plan.domain(), *plan.codomain()),
            n => sums[n - 1].clone(),
        };
        deviations.push(s.subtract(&r)?.operator_norm()?);
    }
    let first_mismatch = deviations.iter().position(|&d| d > tol).map(|p| p + 1);
    let both_bounded = pointwise.check_norms().is_ok() && converse.check_norms().is_ok();
    Ok(CrossCheck {
        pass: first_mismatch.is_none() && both_bounded,
        block_deviations: deviations,
        first_mismatch,
        both_bounded,
    })
}

/// Certify the approximation property twice, from the partial sums and
/// from the factorization, and cross-check the two certificates.
pub fn certify(inst: &Instance, eps_list: &[f64]) -> Result<Report> {
    let start = Instant::now();
    let mut report = Report::new("certify", inst.seed);
    let s_list = partial_sums(&inst.blocks)?;
    let t = s_list.last().unwrap().clone();
    let xs = test_vectors(inst.x, CERTIFY_TEST_VECTORS, inst.seed);

    let pointwise = match bap_from_pointwise(&t, &s_list, &xs, inst.k, eps_list) {
        Ok(c) => {
            let max = c.approximant_norms.iter().copied().fold(0.0, f64::max);
            report.margin("pointwise_norms", inst.k * c.norm_t, max);
            report.push(Stage::new("pointwise", true, &c));
            Some(c)
        }
        Err(Error::NormBound { index, norm, bound }) => {
            return Err(Error::PartialSumBound {
                prefix: index,
                norm,
                bound,
            })
        }
        Err(e) if e.is_certification_failure() => {
            report.push(Stage::failed("pointwise", &e));
            None
        }
        Err(e) => return Err(e),
    };

    let Some(plan) = plan_or_stage(inst, &mut report)? else {
        report.wall_time_seconds = start.elapsed().as_secs_f64();
        return Ok(report);
    };
    let converse = match certificate_from_factorization(&plan) {
        Ok(c) => {
            let max = c.approximant_norms.iter().copied().fold(0.0, f64::max);
            let bound = GLOBAL_FACTOR * plan.k() * plan.norm_t();
            report.margin("converse", bound, max);
            report.curve = c
                .approximant_norms
                .iter()
                .enumerate()
                .map(|(n, &v)| CurvePoint::new(n + 1, v, bound))
                .collect();
            report.push(Stage::new("converse", true, &c));
            Some(c)
        }
        Err(e) if e.is_certification_failure() => {
            report.push(Stage::failed("converse", &e));
            None
        }
        Err(e) => return Err(e),
    };
    if let (Some(a), Some(b)) = (&pointwise, &converse) {
        let check = cross_check(&plan, &s_list, a, b)?;
        let worst = check.block_deviations.iter().copied().fold(0.0, f64::max);
        report.margin("cross_check", SPLIT_TOL * plan.norm_t().max(1.0), worst);
        report.push(Stage::new("cross_check", check.pass, &check));
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpnormOutcome {
    pub from: NormTag,
    pub to: NormTag,
    pub norm: f64,
    /// Grid estimate, for domains of dimension at most 3.
    pub grid: Option<f64>,
    pub agree: bool,
}

/// Exact induced norm of `m`, cross-checked against the grid for small
/// domains.
pub fn opnorm(m: &DMatrix<f64>, from: NormTag, to: NormTag) -> Result<OpnormOutcome> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let norm = induced_norm(m, from, to)?;
    let grid = (m.ncols() <= GRID_MAX_DIM).then(|| grid_norm(m, from, to, GRID_STEP));
    let agree = grid.is_none_or(|g| (g - norm).abs() <= GRID_AGREEMENT);
    Ok(OpnormOutcome {
        from,
        to,
        norm,
        grid,
        agree,
    })
}

/// Maximum of `‖m x‖` over a grid on the unit sphere of the domain, laid
/// out on the faces of the ball so that its vertices are hit exactly.
pub fn grid_norm(m: &DMatrix<f64>, from: NormTag, to: NormTag, step: f64) -> f64 {
    let d = m.ncols();
    let mut best: f64 = 0.0;
    let mut eval = |x: &[f64]| {
        let y = m * DVector::from_column_slice(x);
        best = best.max(to.eval(y.iter()));
    };
    match (from, d) {
        (_, 1) => eval(&[1.0]),
        (NormTag::Linf, _) => {
            let n = (2.0 / step).round() as usize;
            let grid: Vec<f64> = (0..=n).map(|k| -1.0 + 2.0 * k as f64 / n as f64).collect();
            for axis in 0..d {
                let others = d - 1;
                let mut idx = vec![0usize; others];
                loop {
                    let mut x = vec![1.0; d];
                    let mut o = 0;
                    for (i, xi) in x.iter_mut().enumerate() {
                        if i != axis {
                            *xi = grid[idx[o]];
                            o += 1;
                        }
                    }
                    eval(&x);
                    if !advance(&mut idx, n) {
                        break;
                    }
                }
            }
        }
        (NormTag::L1, _) => {
            let n = (1.0 / step).round() as usize;
            let mut idx = vec![0usize; d];
            loop {
                if idx.iter().sum::<usize>() == n {
                    for signs in 0..(1usize << (d - 1)) {
                        let x: Vec<f64> = idx
                            .iter()
                            .enumerate()
                            .map(|(i, &k)| {
                                let s = if i > 0 && signs >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
                                s * k as f64 / n as f64
                            })
                            .collect();
                        eval(&x);
                    }
                }
                if !advance(&mut idx, n) {
                    break;
                }
            }
        }
        (NormTag::L2, 2) => {
            let n = (std::f64::consts::PI / step).ceil() as usize;
            for k in 0..n {
                let a = std::f64::consts::PI * k as f64 / n as f64;
                eval(&[a.cos(), a.sin()]);
            }
        }
        (NormTag::L2, _) => {
            let n = (std::f64::consts::PI / step).ceil() as usize;
            for i in 0..=n {
                let theta = std::f64::consts::PI * i as f64 / n as f64;
                for k in 0..2 * n {
                    let phi = std::f64::consts::PI * k as f64 / n as f64;
                    eval(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
                }
            }
        }
    }
    best
}

/// Odometer step over `{0..=n}^len`; false once it wraps around.
fn advance(idx: &mut [usize], n: usize) -> bool {
    for v in idx.iter_mut() {
        if *v < n {
            *v += 1;
            return true;
        }
        *v = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{gen_scenario, Scenario};

    fn square() -> Instance {
        let text = r#"{"x":{"dim":2,"norm":"linf"},"w":{"dim":2,"norm":"linf"},"k":1,"seed":3,"blocks":[[[1,0],[0,1]]]}"#;
        Scenario::from_json(text).unwrap().instance().unwrap()
    }

    #[test]
    fn square_factorizes() {
        let r = factorize(&square()).unwrap();
        assert!(r.pass, "{:?}", r.first_failure());
        assert!(r.margins["within_block"] >= 0.0);
        assert_eq!(r.curve.len(), 4);
    }

    #[test]
    fn generated_instance_certifies() {
        let s = gen_scenario(11, [3, 4], [NormTag::L1, NormTag::L2], 3, &[1, 2, 2], 0.6).unwrap();
        let inst = s.instance().unwrap();
        let r = factorize(&inst).unwrap();
        assert!(r.pass, "{:?}", r.first_failure());
        let c = certify(&inst, &[0.5, 1e-3, 0.0]).unwrap();
        assert!(c.pass, "{:?}", c.first_failure());
    }

    #[test]
    fn k_violation_is_an_input_error() {
        let text = r#"{"x":{"dim":2,"norm":"l2"},"w":{"dim":2,"norm":"l2"},"k":1,"blocks":[[[1,0],[0,1]],[[2,0],[0,2]],[[-2,0],[0,-2]]]}"#;
        let inst = Scenario::from_json(text).unwrap().instance().unwrap();
        assert!(matches!(factorize(&inst), Err(Error::PartialSumBound { prefix: 2, .. })));
        assert!(matches!(certify(&inst, &[0.1]), Err(Error::PartialSumBound { prefix: 2, .. })));
    }

    #[test]
    fn perturbed_partial_sum_is_localized() {
        let s = gen_scenario(2, [3, 3], [NormTag::L2, NormTag::Linf], 3, &[1, 1, 2], 0.5).unwrap();
        let inst = s.instance().unwrap();
        let plan = build_splitting(&inst.blocks, inst.k).unwrap();
        let mut s_list = partial_sums(&inst.blocks).unwrap();
        let t = s_list.last().unwrap().clone();
        let xs = test_vectors(inst.x, 10, 0);
        let a = bap_from_pointwise(&t, &s_list, &xs, inst.k, &[]).unwrap();
        let b = certificate_from_factorization(&plan).unwrap();
        assert!(cross_check(&plan, &s_list, &a, &b).unwrap().pass);
        s_list[1] = s_list[1].scale(1.0 + 1e-6);
        let c = cross_check(&plan, &s_list, &a, &b).unwrap();
        assert!(!c.pass);
        assert_eq!(c.first_mismatch, Some(2));
    }

    #[test]
    fn opnorm_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        for from in NormTag::ALL {
            for to in NormTag::ALL {
                let o = opnorm(&id, from, to).unwrap();
                assert!(o.agree);
                if from == to {
                    assert!((o.norm - 1.0).abs() < 1e-12);
                }
            }
        }
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let o = opnorm(&h, NormTag::Linf, NormTag::Linf).unwrap();
        assert!((o.norm - 2.0).abs() < 1e-12);
        assert_eq!(o.grid, Some(2.0));
        assert!(matches!(
            opnorm(&DMatrix::zeros(2, 25), NormTag::Linf, NormTag::L1),
            Err(Error::Capacity { dim: 25, .. })
        ));
    }

    #[test]
    fn test_vectors_are_unit_and_seeded() {
        let s = NormedSpace::new(4, NormTag::L1).unwrap();
        let a = test_vectors(s, 20, 8);
        assert_eq!(a, test_vectors(s, 20, 8));
        assert!(a.iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }
}
