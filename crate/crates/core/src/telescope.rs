//! Approximant sequences and their block increments, and certificates of
//! the bounded approximation property over finite test sets.
//!
//! Compact sets are represented by explicit finite test sets, and every
//! supremum over an infinite index range is a maximum over the supplied
//! finite list.

use num_traits::Num;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::FiniteRankOperator;
use crate::space::{same_space, Vector};

/// Relative slack on norm bounds `‖R‖ <= C‖T‖`.
pub const NORM_SLACK: f64 = 1e-8;

/// Block increments `Q₁ = S₁, Q_l = S_l − S_{l−1}`.
pub fn telescope(s_list: &[FiniteRankOperator]) -> Result<Vec<FiniteRankOperator>> {
    let first = s_list.first().ok_or(Error::EmptyList)?;
    let mut out = Vec::with_capacity(s_list.len());
    out.push(first.clone());
    for pair in s_list.windows(2) {
        out.push(pair[1].subtract(&pair[0])?);
    }
    Ok(out)
}

/// Running sums `S_N = Q₁ + ⋯ + Q_N`; the inverse of [`telescope`].
pub fn partial_sums(q_list: &[FiniteRankOperator]) -> Result<Vec<FiniteRankOperator>> {
    let first = q_list.first().ok_or(Error::EmptyList)?;
    let mut out: Vec<FiniteRankOperator> = Vec::with_capacity(q_list.len());
    out.push(first.clone());
    for q in &q_list[1..] {
        let next = out[out.len() - 1].add(q)?;
        out.push(next);
    }
    Ok(out)
}

/// Which net radius to use when reducing a compact set to a finite net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NetRule {
    /// `ε / (2 + C)`, for `‖T‖ = 1`: net of the compact, approximant chosen
    /// on the net.
    FiniteFamily,
    /// `ε / (‖T‖ + 1 + C‖T‖)`: net of the compact, approximant taken from a
    /// pointwise convergent sequence.
    PointwiseLimit,
}

/// Net radius `ε₀` under the given rule, over any ordered field such as
/// the exact rationals.
pub fn net_tolerance<F>(eps: F, c: F, norm_t: F, rule: NetRule) -> Result<F>
where
    F: Num + PartialOrd + Copy,
{
    if eps < F::zero() {
        return Err(Error::InvalidArgument("eps must be nonnegative".into()));
    }
    if c < F::one() {
        return Err(Error::InvalidArgument("C must be at least 1".into()));
    }
    if norm_t < F::zero() {
        return Err(Error::InvalidArgument("norm of T must be nonnegative".into()));
    }
    let two = F::one() + F::one();
    match rule {
        NetRule::FiniteFamily => {
            if norm_t != F::one() {
                return Err(Error::InvalidArgument(
                    "the finite-family radius assumes ‖T‖ = 1".into(),
                ));
            }
            Ok(eps / (two + c))
        }
        NetRule::PointwiseLimit => Ok(eps / (norm_t + F::one() + c * norm_t)),
    }
}

fn sup_error(t: &FiniteRankOperator, r: &FiniteRankOperator, test_set: &[Vector]) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for x in test_set {
        let d = r.apply(x)?.sub(&t.apply(x)?)?;
        sup = sup.max(d.norm());
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteSetReport {
    pub set_size: usize,
    pub eps: f64,
    pub c: f64,
    pub norm_t: f64,
    pub norm_r: f64,
    pub sup_error: f64,
    pub norm_ok: bool,
    pub error_ok: bool,
}

impl FiniteSetReport {
    pub fn pass(&self) -> bool {
        self.norm_ok && self.error_ok
    }
}

/// Check `‖R‖ <= C‖T‖` and `max_k ‖R x_k − T x_k‖ <= ε` on a finite family.
pub fn certify_finite_set(
    t: &FiniteRankOperator,
    r: &FiniteRankOperator,
    test_set: &[Vector],
    eps: f64,
    c: f64,
) -> Result<FiniteSetReport> {
    same_space(t.domain(), r.domain())?;
    same_space(t.codomain(), r.codomain())?;
    let norm_t = t.operator_norm()?;
    let norm_r = r.operator_norm()?;
    let sup = sup_error(t, r, test_set)?;
    Ok(FiniteSetReport {
        set_size: test_set.len(),
        eps,
        c,
        norm_t,
        norm_r,
        sup_error: sup,
        norm_ok: norm_r <= c * norm_t * (1.0 + NORM_SLACK),
        error_ok: sup <= eps,
    })
}

/// First index from which the residual stays within `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsWitness {
    pub eps: f64,
    /// 1-based index into the approximant list.
    pub index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BapCertificate {
    pub c: f64,
    pub norm_t: f64,
    #[serde(skip)]
    pub approximants: Vec<FiniteRankOperator>,
    #[serde(skip)]
    pub test_set: Vec<Vector>,
    /// `‖R_N‖` for every `N`.
    pub approximant_norms: Vec<f64>,
    /// `max_x ‖R_N x − T x‖` over the test set, for every `N`.
    pub epsilon_schedule: Vec<f64>,
    pub witnesses: Vec<EpsWitness>,
    pub list_len: usize,
    pub test_set_size: usize,
}

impl BapCertificate {
    /// Re-check the norm bound of every approximant.
    pub fn check_norms(&self) -> Result<()> {
        let bound = self.c * self.norm_t;
        for (i, &n) in self.approximant_norms.iter().enumerate() {
            if n > bound * (1.0 + NORM_SLACK) {
                return Err(Error::NormBound {
                    index: i + 1,
                    norm: n,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Certify the approximation property from a pointwise convergent sequence.
///
/// Every `R_N` must satisfy `‖R_N‖ <= C‖T‖`; each requested `ε` must be met
/// at the final index (finite lists stabilize) and is witnessed by the
/// first index after which the residual stays below it.
pub fn bap_from_pointwise(
    t: &FiniteRankOperator,
    r_list: &[FiniteRankOperator],
    test_set: &[Vector],
    c: f64,
    eps_list: &[f64],
) -> Result<BapCertificate> {
    if r_list.is_empty() {
        return Err(Error::EmptyList);
    }
    if c < 1.0 {
        return Err(Error::InvalidArgument("C must be at least 1".into()));
    }
    let norm_t = t.operator_norm()?;
    let mut norms = Vec::with_capacity(r_list.len());
    let mut schedule = Vec::with_capacity(r_list.len());
    for r in r_list {
        same_space(t.domain(), r.domain())?;
        same_space(t.codomain(), r.codomain())?;
        norms.push(r.operator_norm()?);
        schedule.push(sup_error(t, r, test_set)?);
    }
    let cert = BapCertificate {
        c,
        norm_t,
        approximants: r_list.to_vec(),
        test_set: test_set.to_vec(),
        approximant_norms: norms,
        epsilon_schedule: schedule,
        witnesses: Vec::new(),
        list_len: r_list.len(),
        test_set_size: test_set.len(),
    };
    cert.check_norms()?;

    let mut witnesses = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let last = *cert.epsilon_schedule.last().unwrap();
        if last > eps {
            return Err(Error::EpsilonNotReached { eps, residual: last });
        }
        let mut index = cert.list_len;
        while index > 1 && cert.epsilon_schedule[index - 2] <= eps {
            index -= 1;
        }
        witnesses.push(EpsWitness { eps, index });
    }
    Ok(BapCertificate { witnesses, ..cert })
}

/// Responds to finite-set approximation requests for a fixed target `T`
/// with constant `C`.
pub trait ApproximationOracle {
    fn target(&self) -> &FiniteRankOperator;
    fn constant(&self) -> f64;
    /// An operator `R` with `‖R‖ <= C‖T‖` and `max_{x∈set} ‖Rx − Tx‖ <= eps`.
    fn respond(&self, set: &[Vector], eps: f64) -> Result<FiniteRankOperator>;
}

/// The tolerances `1/2^(N+1)` for `N = 1..=depth`.
pub fn dyadic_schedule(depth: usize) -> Vec<f64> {
    (1..=depth).map(|n| 0.5f64.powi(n as i32 + 1)).collect()
}

/// Build `R_1, …, R_depth` by querying the oracle on growing prefixes of
/// `dense_seq` with tolerance `1/2^(N+1)`, auditing every response.
pub fn pointwise_from_bap<O: ApproximationOracle + ?Sized>(
    oracle: &O,
    dense_seq: &[Vector],
    depth: usize,
) -> Result<Vec<FiniteRankOperator>> {
    let t = oracle.target();
    let bound = oracle.constant() * t.operator_norm()?;
    let mut out = Vec::with_capacity(depth);
    for (step, eps) in dyadic_schedule(depth).into_iter().enumerate() {
        let n = step + 1;
        let prefix = &dense_seq[..n.min(dense_seq.len())];
        let r = oracle.respond(prefix, eps)?;
        if same_space(t.domain(), r.domain()).is_err() || same_space(t.codomain(), r.codomain()).is_err() {
            return Err(Error::Protocol {
                step: n,
                reason: "response acts between the wrong spaces".into(),
            });
        }
        let norm = r.operator_norm()?;
        if norm > bound * (1.0 + NORM_SLACK) {
            return Err(Error::Protocol {
                step: n,
                reason: format!("‖R‖ = {norm:.6e} exceeds C‖T‖ = {bound:.6e}"),
            });
        }
        let err = sup_error(t, &r, prefix)?;
        if err > eps {
            return Err(Error::Protocol {
                step: n,
                reason: format!("error {err:.6e} on the prefix exceeds {eps:.6e}"),
            });
        }
        out.push(r);
    }
    Ok(out)
}

/// Answers requests with the shortest partial sum of a finite block
/// decomposition of `T` that meets the tolerance on the requested set.
#[derive(Debug, Clone)]
pub struct TruncationOracle {
    target: FiniteRankOperator,
    partial: Vec<FiniteRankOperator>,
    c: f64,
}

impl TruncationOracle {
    pub fn new(blocks: &[FiniteRankOperator], c: f64) -> Result<Self> {
        let partial = partial_sums(blocks)?;
        let target = partial.last().unwrap().clone();
        Ok(TruncationOracle { target, partial, c })
    }
}

impl ApproximationOracle for TruncationOracle {
    fn target(&self) -> &FiniteRankOperator {
        &self.target
    }

    fn constant(&self) -> f64 {
        self.c
    }

    fn respond(&self, set: &[Vector], eps: f64) -> Result<FiniteRankOperator> {
        for s in &self.partial {
            if sup_error(&self.target, s, set)? <= eps {
                return Ok(s.clone());
            }
        }
        Ok(self.target.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{NormTag, NormedSpace};
    use nalgebra::DMatrix;

    fn sp(dim: usize, tag: NormTag) -> NormedSpace {
        NormedSpace::new(dim, tag).unwrap()
    }

    #[test]
    fn telescope_examples() {
        let s = sp(2, NormTag::L2);
        let a = FiniteRankOperator::new(s, s, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0])).unwrap();
        assert_eq!(telescope(std::slice::from_ref(&a)).unwrap(), vec![a.clone()]);
        let id = FiniteRankOperator::identity(s);
        let q = telescope(&[id.clone(), id.clone(), id.clone()]).unwrap();
        assert_eq!(q[0], id);
        assert!(q[1].matrix().iter().all(|&v| v == 0.0));
        assert!(q[2].matrix().iter().all(|&v| v == 0.0));
        assert!(matches!(telescope(&[]), Err(Error::EmptyList)));
    }

    #[test]
    fn partial_sums_examples() {
        let s = sp(2, NormTag::L1);
        let id = FiniteRankOperator::identity(s);
        assert_eq!(partial_sums(std::slice::from_ref(&id)).unwrap(), vec![id.clone()]);
        let out = partial_sums(&[id.clone(), id.scale(-1.0)]).unwrap();
        assert_eq!(out[0], id);
        assert!(out[1].matrix().iter().all(|&v| v == 0.0));
        assert!(partial_sums(&[]).is_err());
    }

    #[test]
    fn net_tolerance_examples() {
        assert_eq!(net_tolerance(1.0, 1.0, 1.0, NetRule::FiniteFamily).unwrap(), 1.0 / 3.0);
        assert_eq!(net_tolerance(3.0, 2.0, 1.0, NetRule::PointwiseLimit).unwrap(), 0.75);
        for rule in [NetRule::FiniteFamily, NetRule::PointwiseLimit] {
            assert_eq!(net_tolerance(0.0, 2.5, 1.0, rule).unwrap(), 0.0);
        }
        assert!(net_tolerance(1.0, 1.0, 2.0, NetRule::FiniteFamily).is_err());
        assert!(net_tolerance(1.0, 0.5, 1.0, NetRule::PointwiseLimit).is_err());
        assert!(net_tolerance(-1.0, 1.0, 1.0, NetRule::PointwiseLimit).is_err());
    }

    #[test]
    fn certify_finite_set_examples() {
        let s = sp(2, NormTag::L2);
        let id = FiniteRankOperator::identity(s);
        let x = Vector::from_slice(s, &[1.0, 0.0]).unwrap();
        let r = certify_finite_set(&id, &id, std::slice::from_ref(&x), 0.0, 1.0).unwrap();
        assert!(r.pass());
        let zero = FiniteRankOperator::zero(s, s);
        let r = certify_finite_set(&id, &zero, &[x], 0.5, 1.0).unwrap();
        assert!(!r.pass());
        assert_eq!(r.sup_error, 1.0);
    }

    #[test]
    fn bap_from_pointwise_examples() {
        let s = sp(2, NormTag::Linf);
        let t = FiniteRankOperator::new(s, s, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])).unwrap();
        let xs = vec![Vector::from_slice(s, &[1.0, -1.0]).unwrap()];
        let cert = bap_from_pointwise(&t, std::slice::from_ref(&t), &xs, 1.0, &[0.0]).unwrap();
        assert_eq!(cert.epsilon_schedule, vec![0.0]);
        assert_eq!(cert.witnesses, vec![EpsWitness { eps: 0.0, index: 1 }]);

        // ‖R₂‖ = 2C‖T‖
        let bad = vec![t.clone(), t.scale(2.0 * 1.5), t.clone()];
        match bap_from_pointwise(&t, &bad, &xs, 1.5, &[]) {
            Err(Error::NormBound { index, .. }) => assert_eq!(index, 2),
            other => panic!("expected norm failure, got {other:?}"),
        }
        assert!(matches!(bap_from_pointwise(&t, &[], &xs, 1.0, &[]), Err(Error::EmptyList)));
    }

    #[test]
    fn dyadic_schedule_values() {
        assert_eq!(dyadic_schedule(3), vec![0.25, 0.125, 0.0625]);
    }

    struct Exact(FiniteRankOperator);

    impl ApproximationOracle for Exact {
        fn target(&self) -> &FiniteRankOperator {
            &self.0
        }
        fn constant(&self) -> f64 {
            1.0
        }
        fn respond(&self, _: &[Vector], _: f64) -> Result<FiniteRankOperator> {
            Ok(self.0.clone())
        }
    }

    struct Liar(FiniteRankOperator);

    impl ApproximationOracle for Liar {
        fn target(&self) -> &FiniteRankOperator {
            &self.0
        }
        fn constant(&self) -> f64 {
            1.0
        }
        fn respond(&self, _: &[Vector], _: f64) -> Result<FiniteRankOperator> {
            Ok(self.0.scale(0.5))
        }
    }

    #[test]
    fn pointwise_from_exact_oracle() {
        let s = sp(3, NormTag::L1);
        let t = FiniteRankOperator::identity(s);
        let seq: Vec<Vector> = (0..3).map(|i| s.basis_vector(i)).collect();
        let r = pointwise_from_bap(&Exact(t.clone()), &seq, 4).unwrap();
        assert_eq!(r.len(), 4);
        assert!(r.iter().all(|x| *x == t));
        match pointwise_from_bap(&Liar(t), &seq, 2) {
            Err(Error::Protocol { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected protocol error, got {other:?}"),
        }
    }
}
