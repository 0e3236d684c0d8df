//! Scenario files: the spaces, the constant `K` and the block list, given
//! explicitly or through a seeded generator.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{enumeration_cap, matrix_to_rows, FiniteRankOperator};
use crate::report::to_json;
use crate::space::{NormTag, NormedSpace};
use crate::telescope::partial_sums;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub block_count: usize,
    pub ranks: Vec<usize>,
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub x: NormedSpace,
    pub w: NormedSpace,
    pub k: f64,
    /// Seed for test vectors and audits.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    /// Row-major block matrices, each `w.dim x x.dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blocks: Option<Vec<Vec<Vec<f64>>>>,
}

/// A validated scenario with its blocks materialized.
#[derive(Debug, Clone)]
pub struct Instance {
    pub x: NormedSpace,
    pub w: NormedSpace,
    pub k: f64,
    pub seed: u64,
    pub blocks: Vec<FiniteRankOperator>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    /// Check the header fields and materialize the blocks.
    pub fn instance(&self) -> Result<Instance> {
        let x = NormedSpace::new(self.x.dim(), self.x.tag())?;
        let w = NormedSpace::new(self.w.dim(), self.w.tag())?;
        check_capacity(x, w)?;
        if !self.k.is_finite() || self.k < 1.0 {
            return Err(Error::InvalidArgument(format!("K must be a finite number >= 1, got {}", self.k)));
        }
        let blocks = match (&self.blocks, &self.generator) {
            (Some(rows), _) => rows
                .iter()
                .map(|b| FiniteRankOperator::from_rows(x, w, b))
                .collect::<Result<Vec<_>>>()?,
            (None, Some(g)) => generate_blocks(x, w, g)?.0,
            (None, None) => return Err(Error::Parse("scenario needs blocks or a generator".into())),
        };
        if blocks.is_empty() {
            return Err(Error::EmptyList);
        }
        Ok(Instance {
            x,
            w,
            k: self.k,
            seed: self.seed,
            blocks,
        })
    }
}

/// Reject space pairs whose operator norm needs an enumeration beyond the cap.
pub fn check_capacity(x: NormedSpace, w: NormedSpace) -> Result<()> {
    let cap = enumeration_cap();
    let dim = match (x.tag(), w.tag()) {
        (NormTag::Linf, _) => x.dim(),
        (NormTag::L2, NormTag::L1) => w.dim(),
        _ => 0,
    };
    if dim > cap {
        return Err(Error::Capacity { dim, cap });
    }
    Ok(())
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Expand a generator: block `p` is `decay^p` times a Gaussian rank-`r_p`
/// matrix of unit norm, and the whole list is rescaled so that `‖T‖ = 1`.
/// Returns the blocks with `K = max_N ‖S_N‖`.
pub fn generate_blocks(x: NormedSpace, w: NormedSpace, generator: &GeneratorSpec) -> Result<(Vec<FiniteRankOperator>, f64)> {
    if generator.block_count == 0 {
        return Err(Error::EmptyList);
    }
    if generator.ranks.len() != generator.block_count {
        return Err(Error::InvalidArgument(format!(
            "{} ranks given for {} blocks",
            generator.ranks.len(),
            generator.block_count
        )));
    }
    if generator.decay.is_nan() || generator.decay <= 0.0 || generator.decay >= 1.0 {
        return Err(Error::InvalidArgument(format!("decay must lie in (0, 1), got {}", generator.decay)));
    }
    let max_rank = x.dim().min(w.dim());
    if let Some(&r) = generator.ranks.iter().find(|&&r| r == 0 || r > max_rank) {
        return Err(Error::InvalidArgument(format!("rank {r} outside 1..={max_rank}")));
    }
    check_capacity(x, w)?;

    let mut rng = ChaCha8Rng::seed_from_u64(generator.seed);
    let mut raw = Vec::with_capacity(generator.block_count);
    let mut weight = 1.0;
    for &r in &generator.ranks {
        weight *= generator.decay;
        let m = gaussian_matrix(&mut rng, w.dim(), r) * gaussian_matrix(&mut rng, r, x.dim());
        let op = FiniteRankOperator::new(x, w, m)?;
        let n = op.operator_norm()?;
        raw.push(op.scale(weight / n));
    }
    let sums = partial_sums(&raw)?;
    let norm_t = sums.last().unwrap().operator_norm()?;
    if norm_t <= 1e-12 {
        return Err(Error::InvalidArgument("generated blocks cancel out".into()));
    }
    let blocks: Vec<_> = raw.iter().map(|b| b.scale(1.0 / norm_t)).collect();
    let mut k: f64 = 1.0;
    for s in partial_sums(&blocks)? {
        k = k.max(s.operator_norm()?);
    }
    Ok((blocks, k))
}

/// A seeded scenario with materialized blocks and the smallest admissible `K`.
pub fn gen_scenario(
    seed: u64,
    dims: [usize; 2],
    tags: [NormTag; 2],
    block_count: usize,
    ranks: &[usize],
    decay: f64,
) -> Result<Scenario> {
    let x = NormedSpace::new(dims[0], tags[0])?;
    let w = NormedSpace::new(dims[1], tags[1])?;
    let generator = GeneratorSpec {
        seed,
        block_count,
        ranks: ranks.to_vec(),
        decay,
    };
    let (blocks, k) = generate_blocks(x, w, &generator)?;
    Ok(Scenario {
        x,
        w,
        k,
        seed,
        generator: Some(generator),
        blocks: Some(blocks.iter().map(|b| matrix_to_rows(b.matrix())).collect()),
    })
}
