//! Independent oracles shared by the integration tests. Nothing here calls
//! the norm engine of the crate.
#![allow(dead_code)]

use bapfactor::scenario::{gen_scenario, Scenario};
use bapfactor::space::NormTag;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TAG_PAIRS: [(NormTag, NormTag); 9] = [
    (NormTag::L1, NormTag::L1),
    (NormTag::L1, NormTag::L2),
    (NormTag::L1, NormTag::Linf),
    (NormTag::L2, NormTag::L1),
    (NormTag::L2, NormTag::L2),
    (NormTag::L2, NormTag::Linf),
    (NormTag::Linf, NormTag::L1),
    (NormTag::Linf, NormTag::L2),
    (NormTag::Linf, NormTag::Linf),
];

pub fn vnorm(tag: NormTag, v: &[f64]) -> f64 {
    match tag {
        NormTag::L1 => v.iter().map(|x| x.abs()).sum(),
        NormTag::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormTag::Linf => v.iter().fold(0.0, |a, x| a.max(x.abs())),
    }
}

/// Points of the unit sphere of `ℓ_tag^d` on a grid of spacing about `step`,
/// laid out face by face so that polytope vertices are included.
pub fn sphere_grid(tag: NormTag, d: usize, step: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    match tag {
        NormTag::Linf => {
            let n = (2.0 / step).round() as usize;
            for axis in 0..d {
                for side in [1.0, -1.0] {
                    for idx in lattice(d - 1, n) {
                        let mut x = Vec::with_capacity(d);
                        let mut it = idx.iter();
                        for i in 0..d {
                            if i == axis {
                                x.push(side);
                            } else {
                                x.push(-1.0 + 2.0 * *it.next().unwrap() as f64 / n as f64);
                            }
                        }
                        out.push(x);
                    }
                }
            }
        }
        NormTag::L1 => {
            let n = (1.0 / step).round() as usize;
            for idx in lattice(d, n) {
                if idx.iter().sum::<usize>() != n {
                    continue;
                }
                for signs in 0..(1usize << d) {
                    out.push(
                        idx.iter()
                            .enumerate()
                            .map(|(i, &k)| if signs >> i & 1 == 1 { -1.0 } else { 1.0 } * k as f64 / n as f64)
                            .collect(),
                    );
                }
            }
        }
        NormTag::L2 => {
            let n = (std::f64::consts::PI / step).ceil() as usize;
            if d == 2 {
                for k in 0..2 * n {
                    let a = std::f64::consts::PI * k as f64 / n as f64;
                    out.push(vec![a.cos(), a.sin()]);
                }
            } else {
                for i in 0..=n {
                    let th = std::f64::consts::PI * i as f64 / n as f64;
                    for k in 0..2 * n {
                        let ph = std::f64::consts::PI * k as f64 / n as f64;
                        out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
                    }
                }
            }
        }
    }
    out
}

/// All points of `{0..=n}^len`.
fn lattice(len: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=n).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

/// `max ‖m x‖` over the sphere grid of the domain.
pub fn grid_operator_norm(m: &DMatrix<f64>, from: NormTag, to: NormTag, step: f64) -> f64 {
    sphere_grid(from, m.ncols(), step)
        .iter()
        .map(|x| vnorm(to, (m * DVector::from_column_slice(x)).as_slice()))
        .fold(0.0, f64::max)
}

/// Largest `|det|` of `m` columns in orthonormal coordinates of the subspace
/// with orthonormal basis `q` (ambient `n x m`), by grid for `m <= 2`.
pub fn grid_det(tag: NormTag, q: &DMatrix<f64>, step: f64) -> f64 {
    let m = q.ncols();
    let to_sphere = |u: DVector<f64>| -> DVector<f64> {
        let n = vnorm(tag, (q * &u).as_slice());
        u / n
    };
    match m {
        1 => to_sphere(DVector::from_element(1, 1.0))[0].abs(),
        2 => {
            let n = (std::f64::consts::PI / step).ceil() as usize;
            let pts: Vec<DVector<f64>> = (0..n)
                .map(|k| {
                    let a = std::f64::consts::PI * k as f64 / n as f64;
                    to_sphere(DVector::from_vec(vec![a.cos(), a.sin()]))
                })
                .collect();
            let mut best: f64 = 0.0;
            for p in &pts {
                for r in &pts {
                    best = best.max((p[0] * r[1] - p[1] * r[0]).abs());
                }
            }
            best
        }
        _ => panic!("grid determinant oracle only covers m <= 2"),
    }
}

/// Largest `|det|` of `d` vertices of the unit ball of `ℓ_tag^d`
/// (`tag` polyhedral), by exhaustive enumeration.
pub fn vertex_det(tag: NormTag, d: usize) -> f64 {
    let verts: Vec<Vec<f64>> = match tag {
        NormTag::L1 => (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
        NormTag::Linf => (0..1usize << d)
            .map(|s| (0..d).map(|j| if s >> j & 1 == 1 { -1.0 } else { 1.0 }).collect())
            .collect(),
        NormTag::L2 => panic!("not polyhedral"),
    };
    let mut best: f64 = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let m = DMatrix::from_fn(d, d, |r, c| verts[idx[c]][r]);
        best = best.max(m.determinant().abs());
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < verts.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            return best;
        }
    }
}

/// Brute-force `max_n ‖Σ_{s<=n} v_s‖` from explicit terms.
pub fn prefix_sup(tag: NormTag, terms: &[DVector<f64>], dim: usize) -> f64 {
    let mut best: f64 = 0.0;
    for n in 1..=terms.len() {
        let mut acc = DVector::zeros(dim);
        for t in &terms[..n] {
            acc += t;
        }
        best = best.max(vnorm(tag, acc.as_slice()));
    }
    best
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// The seeded family of 50 scenarios: dimensions 2 to 8, ranks 1 to 4,
/// every domain/codomain norm pair.
pub fn scenario_family() -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..50)
        .map(|i| {
            let (from, to) = TAG_PAIRS[i % 9];
            let dx = rng.random_range(2..=8);
            let dw = rng.random_range(2..=8);
            let blocks = rng.random_range(1..=4);
            let max_rank = dx.min(dw).min(4);
            let ranks: Vec<usize> = (0..blocks).map(|_| rng.random_range(1..=max_rank)).collect();
            let decay = rng.random_range(0.4..0.95);
            gen_scenario(1000 + i as u64, [dx, dw], [from, to], blocks, &ranks, decay).expect("family scenario")
        })
        .collect()
}
