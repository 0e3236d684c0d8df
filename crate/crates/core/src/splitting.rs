//! Rank-one splitting of block decompositions.
//!
//! Each block `A_p` with range `E_p` of dimension `m_p` is split through an
//! Auerbach system of `E_p`: with `B_j = e_j* ⊗ e_j` the pieces are
//! `C_i = B_j / m_p` for `i = r·m_p + j` (`r = 0..m_p`, `j = 1..=m_p`), and
//! the atoms of the block are `C_i ∘ A_p`, in that order. Blocks are
//! concatenated, so atom `s` of block `p` sits at
//! `s = m_1² + ⋯ + m_{p−1}² + i`.

use std::fmt::Write as _;

use serde::Serialize;

use crate::auerbach::{auerbach_projections, auerbach_system, AuerbachSystem};
use crate::error::{Error, Result};
use crate::operator::{rank_one, FiniteRankOperator};
use crate::space::{same_space, support_maximize, Functional, NormedSpace, SubspaceBasis, Vector};
use crate::telescope::partial_sums;

pub const WITHIN_BLOCK_BOUND: f64 = 2.0;
pub const BLOCK_FACTOR: f64 = 2.0;
pub const GLOBAL_FACTOR: f64 = 5.0;
/// Absolute slack on the certified partial-sum bounds.
pub const BOUND_SLACK: f64 = 1e-7;
/// Relative slack when checking the input partial sums against `K‖T‖`.
pub const INPUT_SLACK: f64 = 1e-9;

/// Index bookkeeping between global atom positions `s` and block-local
/// positions `(p, i)`, all 1-based. Block `p` owns `m_p²` positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexMap {
    ranks: Vec<usize>,
    offsets: Vec<usize>,
}

impl IndexMap {
    pub fn new(ranks: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(ranks.len());
        let mut acc = 0;
        for &m in ranks {
            offsets.push(acc);
            acc += m * m;
        }
        IndexMap {
            ranks: ranks.to_vec(),
            offsets,
        }
    }

    pub fn len(&self) -> usize {
        match (self.offsets.last(), self.ranks.last()) {
            (Some(o), Some(m)) => o + m * m,
            _ => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn global(&self, p: usize, i: usize) -> Result<usize> {
        if p == 0 || p > self.ranks.len() {
            return Err(Error::IndexOutOfRange(format!("block {p} of {}", self.ranks.len())));
        }
        let m = self.ranks[p - 1];
        if i == 0 || i > m * m {
            return Err(Error::IndexOutOfRange(format!(
                "position {i} in block {p} with m_p = {m}"
            )));
        }
        Ok(self.offsets[p - 1] + i)
    }

    pub fn local(&self, s: usize) -> Result<(usize, usize)> {
        if s == 0 || s > self.len() {
            return Err(Error::IndexOutOfRange(format!("atom {s} of {}", self.len())));
        }
        // last block whose range starts before s; zero blocks own nothing
        let p = (0..self.ranks.len())
            .rev()
            .find(|&p| self.ranks[p] > 0 && self.offsets[p] < s)
            .expect("s lies in some nonempty block");
        Ok((p + 1, s - self.offsets[p]))
    }
}

pub fn index_map(ranks: &[usize], p: usize, i: usize) -> Result<usize> {
    IndexMap::new(ranks).global(p, i)
}

pub fn index_unmap(ranks: &[usize], s: usize) -> Result<(usize, usize)> {
    IndexMap::new(ranks).local(s)
}

/// One block `A_p` with its range, Auerbach system and pieces `C_i`.
#[derive(Debug, Clone)]
pub struct Block {
    operator: FiniteRankOperator,
    range: Option<SubspaceBasis>,
    auerbach: Option<AuerbachSystem>,
    pieces: Vec<FiniteRankOperator>,
}

impl Block {
    pub fn operator(&self) -> &FiniteRankOperator {
        &self.operator
    }

    pub fn range(&self) -> Option<&SubspaceBasis> {
        self.range.as_ref()
    }

    pub fn rank(&self) -> usize {
        self.range.as_ref().map_or(0, |r| r.dim())
    }

    pub fn auerbach(&self) -> Option<&AuerbachSystem> {
        self.auerbach.as_ref()
    }

    /// The operators `C_i` on the range, in ambient coordinates.
    pub fn pieces(&self) -> &[FiniteRankOperator] {
        &self.pieces
    }
}

/// A rank-one atom `x ↦ f(x)·w`.
#[derive(Debug, Clone)]
pub struct Atom {
    block: usize,
    local: usize,
    functional: Functional,
    vector: Vector,
    direction: Option<Vector>,
}

impl Atom {
    pub fn block(&self) -> usize {
        self.block
    }

    pub fn local(&self) -> usize {
        self.local
    }

    pub fn functional(&self) -> &Functional {
        &self.functional
    }

    pub fn vector(&self) -> &Vector {
        &self.vector
    }

    /// Unit vector spanning the image line; `None` for a zero atom.
    pub fn direction(&self) -> Option<&Vector> {
        self.direction.as_ref()
    }

    pub fn operator(&self) -> FiniteRankOperator {
        rank_one(&self.functional, &self.vector)
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        Ok(self.vector.scaled(self.functional.eval(x)?))
    }

    pub fn norm(&self) -> f64 {
        self.functional.dual_norm() * self.vector.norm()
    }
}

/// The materialized splitting: blocks, the flat atom sequence and the
/// constants it is certified against.
#[derive(Debug, Clone)]
pub struct SplittingPlan {
    domain: NormedSpace,
    codomain: NormedSpace,
    blocks: Vec<Block>,
    atoms: Vec<Atom>,
    index: IndexMap,
    k: f64,
    norm_t: f64,
}

impl SplittingPlan {
    pub fn domain(&self) -> &NormedSpace {
        &self.domain
    }

    pub fn codomain(&self) -> &NormedSpace {
        &self.codomain
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atom at 1-based position `s`.
    pub fn atom(&self, s: usize) -> Result<&Atom> {
        s.checked_sub(1)
            .and_then(|i| self.atoms.get(i))
            .ok_or_else(|| Error::IndexOutOfRange(format!("atom {s} of {}", self.atoms.len())))
    }

    pub fn index(&self) -> &IndexMap {
        &self.index
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn norm_t(&self) -> f64 {
        self.norm_t
    }

    /// `T = Σ_p A_p`.
    pub fn target(&self) -> FiniteRankOperator {
        let mut t = FiniteRankOperator::zero(self.domain, self.codomain);
        for b in &self.blocks {
            t = t.add(&b.operator).expect("blocks share spaces");
        }
        t
    }

    /// The running sums `Σ_{s<=n} Ã_s` for `n = 1..=len`.
    pub fn atom_partial_sums(&self) -> Vec<FiniteRankOperator> {
        let mut acc = FiniteRankOperator::zero(self.domain, self.codomain);
        self.atoms
            .iter()
            .map(|a| {
                acc = acc.add(&a.operator()).expect("atoms share spaces");
                acc.clone()
            })
            .collect()
    }

    /// Multiply atom `s` by `factor`. Fault injection for audits.
    pub fn scale_atom(&mut self, s: usize, factor: f64) -> Result<()> {
        self.atom(s)?;
        let a = &mut self.atoms[s - 1];
        a.functional = a.functional.scaled(factor);
        if factor == 0.0 {
            a.direction = None;
        }
        Ok(())
    }

    /// Replace atom `s` by zero. Fault injection for audits.
    pub fn drop_atom(&mut self, s: usize) -> Result<()> {
        self.scale_atom(s, 0.0)
    }
}

/// Split `A_p` into `m_p²` operators `C_i ∘ A_p` through `sys`, which must
/// be an Auerbach system of the range of `A_p`.
pub fn split_block(a_p: &FiniteRankOperator, sys: &AuerbachSystem) -> Result<Vec<FiniteRankOperator>> {
    same_space(a_p.codomain(), sys.subspace().space())?;
    let pieces = block_pieces(sys);
    pieces.iter().map(|c| c.compose(a_p)).collect()
}

fn block_pieces(sys: &AuerbachSystem) -> Vec<FiniteRankOperator> {
    let m = sys.dim();
    let b = auerbach_projections(sys);
    let inv = 1.0 / m as f64;
    (0..m * m).map(|i| b[i % m].scale(inv)).collect()
}

/// Build the full plan from block increments `Q_1, …` and constant `K`.
///
/// The partial sums of the blocks must satisfy `‖S_N‖ <= K‖T‖` with
/// `T = Σ Q_l`; otherwise the input is rejected naming the first offending
/// prefix length.
pub fn build_splitting(q_list: &[FiniteRankOperator], k: f64) -> Result<SplittingPlan> {
    let first = q_list.first().ok_or(Error::EmptyList)?;
    if !k.is_finite() || k < 1.0 {
        return Err(Error::InvalidArgument(format!("K must be a finite number >= 1, got {k}")));
    }
    let domain = *first.domain();
    let codomain = *first.codomain();
    let sums = partial_sums(q_list)?;
    let norm_t = sums.last().unwrap().operator_norm()?;
    let bound = k * norm_t;
    for (n, s) in sums.iter().enumerate() {
        let norm = s.operator_norm()?;
        if norm > bound * (1.0 + INPUT_SLACK) {
            return Err(Error::PartialSumBound {
                prefix: n + 1,
                norm,
                bound,
            });
        }
    }

    let mut blocks = Vec::with_capacity(q_list.len());
    let mut atoms = Vec::new();
    let mut ranks = Vec::with_capacity(q_list.len());
    for (p, a_p) in q_list.iter().enumerate() {
        let Some(range) = a_p.range_basis() else {
            ranks.push(0);
            blocks.push(Block {
                operator: a_p.clone(),
                range: None,
                auerbach: None,
                pieces: Vec::new(),
            });
            continue;
        };
        let sys = auerbach_system(&range)?;
        let m = sys.dim();
        let pieces = block_pieces(&sys);
        let a_norm = a_p.operator_norm()?;
        let inv = 1.0 / m as f64;
        for i in 0..m * m {
            let j = i % m;
            let phi = &sys.cofunctionals()[j];
            // (C_i ∘ A_p) x = (1/m) e_j*(A_p x) e_j
            let f = Functional::from_parts(domain, a_p.matrix().transpose() * phi.coords() * inv);
            let w = sys.points()[j].clone();
            let direction = line_direction(&f, &w, a_norm)?;
            atoms.push(Atom {
                block: p + 1,
                local: i + 1,
                functional: f,
                vector: w,
                direction,
            });
        }
        ranks.push(m);
        blocks.push(Block {
            operator: a_p.clone(),
            range: Some(range),
            auerbach: Some(sys),
            pieces,
        });
    }
    Ok(SplittingPlan {
        domain,
        codomain,
        blocks,
        atoms,
        index: IndexMap::new(&ranks),
        k,
        norm_t,
    })
}

/// `Ã x* / ‖Ã x*‖` where `x*` attains `‖Ã‖` on the unit ball.
fn line_direction(f: &Functional, w: &Vector, scale: f64) -> Result<Option<Vector>> {
    if f.dual_norm() * w.norm() <= 1e-13 * scale {
        return Ok(None);
    }
    let witness = support_maximize(f.space(), f, None)?;
    if witness.degenerate {
        return Ok(None);
    }
    let image = w.scaled(f.eval(&witness.point)?);
    let n = image.norm();
    Ok(Some(image.scaled(1.0 / n)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub norm: f64,
    pub bound: f64,
    pub margin: f64,
}

impl CurvePoint {
    pub fn new(n: usize, norm: f64, bound: f64) -> Self {
        CurvePoint {
            n,
            norm,
            bound,
            margin: bound - norm,
        }
    }

    pub fn holds(&self) -> bool {
        self.norm <= self.bound + BOUND_SLACK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCurve {
    pub block: usize,
    pub rank: usize,
    /// `‖Σ_{i<=q} C_i‖` on the range, for `q = 1..=m_p²`.
    pub curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    WithinBlock { block: usize, q: usize, norm: f64, bound: f64 },
    BlockNorm { block: usize, norm: f64, bound: f64 },
    Global { n: usize, norm: f64, bound: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumReport {
    pub k: f64,
    pub norm_t: f64,
    pub within_block: Vec<BlockCurve>,
    pub within_block_max: f64,
    /// `‖A_p‖` against `2K‖T‖`, one point per block.
    pub block_norms: Vec<CurvePoint>,
    /// `‖Σ_{s<=n} Ã_s‖` against `5K‖T‖`.
    pub global_curve: Vec<CurvePoint>,
    pub global_max: f64,
    pub global_bound: f64,
    /// `global_max / (K‖T‖)`, reported for inspection only.
    pub observed_ratio: f64,
    pub violations: Vec<Violation>,
    pub pass: bool,
}

/// Certify the within-block bound `‖Σ_{i<=q} C_i‖ <= 2`, the block bound
/// `‖A_p‖ <= 2K‖T‖` and the global bound `‖Σ_{s<=n} Ã_s‖ <= 5K‖T‖`.
pub fn verify_partial_sums(plan: &SplittingPlan) -> Result<PartialSumReport> {
    let mut violations = Vec::new();
    let mut within_block = Vec::new();
    let mut within_max: f64 = 0.0;
    let mut block_norms = Vec::new();
    let block_bound = BLOCK_FACTOR * plan.k * plan.norm_t;

    for (p, block) in plan.blocks.iter().enumerate() {
        let a_norm = block.operator.operator_norm()?;
        let pt = CurvePoint::new(p + 1, a_norm, block_bound);
        if !pt.holds() {
            violations.push(Violation::BlockNorm {
                block: p + 1,
                norm: a_norm,
                bound: block_bound,
            });
        }
        block_norms.push(pt);

        let Some(range) = &block.range else { continue };
        let mut acc = FiniteRankOperator::zero(plan.codomain, plan.codomain);
        let mut curve = Vec::with_capacity(block.pieces.len());
        for (q, c) in block.pieces.iter().enumerate() {
            acc = acc.add(c)?;
            let norm = acc.restricted_norm(range)?;
            within_max = within_max.max(norm);
            let pt = CurvePoint::new(q + 1, norm, WITHIN_BLOCK_BOUND);
            if !pt.holds() {
                violations.push(Violation::WithinBlock {
                    block: p + 1,
                    q: q + 1,
                    norm,
                    bound: WITHIN_BLOCK_BOUND,
                });
            }
            curve.push(pt);
        }
        within_block.push(BlockCurve {
            block: p + 1,
            rank: block.rank(),
            curve,
        });
    }

    let global_bound = GLOBAL_FACTOR * plan.k * plan.norm_t;
    let mut global_curve = Vec::with_capacity(plan.atoms.len());
    let mut global_max: f64 = 0.0;
    for (n, s) in plan.atom_partial_sums().iter().enumerate() {
        let norm = s.operator_norm()?;
        global_max = global_max.max(norm);
        let pt = CurvePoint::new(n + 1, norm, global_bound);
        if !pt.holds() {
            violations.push(Violation::Global {
                n: n + 1,
                norm,
                bound: global_bound,
            });
        }
        global_curve.push(pt);
    }
    let kt = plan.k * plan.norm_t;
    Ok(PartialSumReport {
        k: plan.k,
        norm_t: plan.norm_t,
        within_block,
        within_block_max: within_max,
        block_norms,
        global_curve,
        global_max,
        global_bound,
        observed_ratio: if kt > 0.0 { global_max / kt } else { 0.0 },
        pass: violations.is_empty(),
        violations,
    })
}

/// CSV rendering of a norm curve with columns `n,norm,bound,margin`.
pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from("n,norm,bound,margin\n");
    for p in curve {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e}",
            p.n, p.norm, p.bound, p.margin
        );
    }
    out
}
