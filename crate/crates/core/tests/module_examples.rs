mod common;

use bapfactor::auerbach::{auerbach_projections, auerbach_system};
use bapfactor::operator::FiniteRankOperator;
use bapfactor::pipeline::{audit_split, test_vectors};
use bapfactor::space::{NormTag, NormedSpace, SubspaceBasis, Vector};
use bapfactor::splitting::{build_splitting, split_block, verify_partial_sums};
use bapfactor::yspace::{basis_monotonicity_check, lift, YElement};
use common::{gaussian, prefix_sup, vnorm};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rank(x: NormedSpace, w: NormedSpace, r: usize, rng: &mut ChaCha8Rng) -> FiniteRankOperator {
    let a = DMatrix::from_fn(w.dim(), r, |_, _| gaussian(rng));
    let b = DMatrix::from_fn(r, x.dim(), |_, _| gaussian(rng));
    FiniteRankOperator::new(x, w, a * b).unwrap()
}

#[test]
fn random_rank_two_block_splits_back() {
    let mut g = rng(1);
    for (a, b) in common::TAG_PAIRS {
        let x = NormedSpace::new(3, a).unwrap();
        let w = NormedSpace::new(4, b).unwrap();
        let op = random_rank(x, w, 2, &mut g);
        let sys = auerbach_system(&op.range_basis().unwrap()).unwrap();
        let parts = split_block(&op, &sys).unwrap();
        assert_eq!(parts.len(), 4);
        let mut sum = FiniteRankOperator::zero(x, w);
        for p in &parts {
            assert!(p.rank() <= 1);
            sum = sum.add(p).unwrap();
        }
        assert!(sum.subtract(&op).unwrap().operator_norm().unwrap() < 1e-9);
    }
}

#[test]
fn two_random_blocks_give_five_atoms() {
    let mut g = rng(2);
    let x = NormedSpace::new(4, NormTag::L1).unwrap();
    let w = NormedSpace::new(3, NormTag::Linf).unwrap();
    let q = vec![random_rank(x, w, 1, &mut g), random_rank(x, w, 2, &mut g)];
    let k = {
        let s1 = q[0].operator_norm().unwrap();
        let s2 = q[0].add(&q[1]).unwrap().operator_norm().unwrap();
        s1.max(s2) / s2
    };
    let plan = build_splitting(&q, k).unwrap();
    assert_eq!(plan.atoms().len(), 5);
    let total = plan.atom_partial_sums().pop().unwrap();
    assert!(total.subtract(&q[0].add(&q[1]).unwrap()).unwrap().operator_norm().unwrap() < 1e-9);
    let audit = audit_split(&plan).unwrap();
    assert!(audit.pass, "{audit:?}");
    assert!(verify_partial_sums(&plan).unwrap().pass);
}

#[test]
fn projections_reproduce_hexagon_points() {
    let s = NormedSpace::new(3, NormTag::Linf).unwrap();
    let sub = SubspaceBasis::new(s, DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0])).unwrap();
    let sys = auerbach_system(&sub).unwrap();
    let b = auerbach_projections(&sys);
    for p in &b {
        assert!((p.restricted_norm(&sub).unwrap() - 1.0).abs() < 1e-7);
    }
    let mut g = rng(3);
    for _ in 0..100 {
        let c = DVector::from_fn(2, |_, _| gaussian(&mut g));
        let e = sub.embed(&c);
        let mut acc = s.zero();
        for p in &b {
            acc = acc.add(&p.apply(&e).unwrap()).unwrap();
        }
        assert!(acc.sub(&e).unwrap().norm() < 1e-9 * (1.0 + e.norm()));
    }
}

#[test]
fn tails_vanish_at_the_last_atom() {
    let mut g = rng(4);
    let x = NormedSpace::new(3, NormTag::L2).unwrap();
    let w = NormedSpace::new(3, NormTag::L1).unwrap();
    let q = vec![random_rank(x, w, 2, &mut g), random_rank(x, w, 1, &mut g).scale(0.3)];
    let sums: Vec<f64> = [q[0].clone(), q[0].add(&q[1]).unwrap()]
        .iter()
        .map(|s| s.operator_norm().unwrap())
        .collect();
    let plan = build_splitting(&q, sums[0].max(sums[1]) / sums[1]).unwrap();
    let n = plan.atoms().len();
    for v in test_vectors(x, 100, 5) {
        let images: Vec<Vector> = plan.atoms().iter().map(|a| a.apply(&v).unwrap()).collect();
        let tail = |from: usize| images[from..].iter().fold(w.zero(), |acc, y| acc.add(y).unwrap()).norm();
        let tv = q[0].add(&q[1]).unwrap().apply(&v).unwrap();
        assert!((tail(0) - tv.norm()).abs() < 1e-9);
        assert!((tail(n - 1) - images[n - 1].norm()).abs() < 1e-15);
        assert_eq!(tail(n), 0.0);
    }
}

#[test]
fn y_norm_matches_prefix_enumeration_on_five_atoms() {
    let mut g = rng(6);
    let x = NormedSpace::new(3, NormTag::Linf).unwrap();
    let w = NormedSpace::new(3, NormTag::L1).unwrap();
    let q = vec![random_rank(x, w, 1, &mut g), random_rank(x, w, 2, &mut g).scale(0.2)];
    let s = [q[0].clone(), q[0].add(&q[1]).unwrap()].map(|s| s.operator_norm().unwrap());
    let plan = build_splitting(&q, s[0].max(s[1]) / s[1]).unwrap();
    assert_eq!(plan.atoms().len(), 5);
    for _ in 0..100 {
        let entries: Vec<(usize, f64)> = (1..=5).map(|s| (s, gaussian(&mut g))).collect();
        let y = YElement::new(&plan, entries.clone()).unwrap();
        let terms: Vec<DVector<f64>> = entries
            .iter()
            .map(|&(s, c)| plan.atoms()[s - 1].direction().unwrap().coords() * c)
            .collect();
        let oracle = prefix_sup(NormTag::L1, &terms, 3);
        assert!((y.y_norm() - oracle).abs() <= 1e-12 * oracle.max(1.0));
        let j: DVector<f64> = terms.iter().sum();
        assert!((y.sum_j().norm() - vnorm(NormTag::L1, j.as_slice())).abs() < 1e-12);
    }
    let m = basis_monotonicity_check(&plan, 100, 7);
    assert!(m.pass);
    assert_eq!(m.prefixes_checked, 400);
    // single coefficient: constant prefix norms from its slot on
    let y = YElement::basis_vector(&plan, 1).unwrap();
    assert!((1..=5).all(|m| (y.truncate(m).y_norm() - 1.0).abs() < 1e-15));
    let zero = lift(&plan, &x.zero()).unwrap();
    assert_eq!(zero.y_norm(), 0.0);
}
