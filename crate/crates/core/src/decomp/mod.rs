//! Shared mathematical kernel: parameter types, losses, the Procrustes
//! mixing update, parameter maps, the stopping rule and gradients.

mod convergence;
mod gradient;
mod loss;
mod param;
mod procrustes;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::data::{BlockKey, FusionDataset, Split};
use crate::error::{Error, Result};
use crate::linalg::{row_orthonormality_error, Mat};

pub use convergence::{converged, DEFAULT_TOL, DEFAULT_WINDOW};
pub(crate) use gradient::preimage_gradient;
pub use gradient::{envelope_gradient, partial_gradient, sse_at_procrustes, sse_gradient, SseAtProcrustes};
pub use loss::{l1_exact, l1_surrogate, l2_penalty, residual, spca_objective, spca_objective_exact, sse};
pub use param::{
    sigmoid, softmax_cols, softmax_cols_backward, softplus, softplus_inv, softplus_map, PREIMAGE_EPS,
};
pub use procrustes::{procrustes_from_sources, procrustes_update, ProcrustesSolution};

/// One block of a fitting problem: target `x` (N × P) and driver
/// `x_tilde` (N × P̃).
#[derive(Clone, Debug)]
pub struct ProblemBlock {
    pub key: BlockKey,
    pub x: Mat,
    pub x_tilde: Mat,
}

/// The blocks of one split, ready for the solvers.
#[derive(Clone, Debug)]
pub struct Problem {
    blocks: Vec<ProblemBlock>,
    p: usize,
    p_tilde: usize,
}

impl Problem {
    pub fn new(blocks: Vec<ProblemBlock>) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Shape("problem has no blocks".into()))?;
        let (p, p_tilde) = (first.x.ncols(), first.x_tilde.ncols());
        for b in &blocks {
            if b.x.ncols() != p || b.x_tilde.ncols() != p_tilde || b.x.nrows() != b.x_tilde.nrows() {
                return Err(Error::Shape(format!(
                    "block {} has X {}x{} and X̃ {}x{}",
                    b.key,
                    b.x.nrows(),
                    b.x.ncols(),
                    b.x_tilde.nrows(),
                    b.x_tilde.ncols()
                )));
            }
        }
        Ok(Self { blocks, p, p_tilde })
    }

    /// Single block with X̃ = X.
    pub fn single(x: Mat) -> Self {
        let p = x.ncols();
        Self {
            blocks: vec![ProblemBlock {
                key: BlockKey::new("x", "x"),
                x_tilde: x.clone(),
                x,
            }],
            p,
            p_tilde: p,
        }
    }

    pub fn from_dataset(dataset: &FusionDataset, split: Split) -> Result<Self> {
        let blocks: Vec<ProblemBlock> = dataset
            .split_blocks(split)
            .map(|b| ProblemBlock {
                key: b.key(),
                x: b.data.clone(),
                x_tilde: dataset.tilde(b),
            })
            .collect();
        if blocks.is_empty() {
            return Err(Error::InvalidDataset(format!("dataset has no {split} blocks")));
        }
        Self::new(blocks)
    }

    pub fn blocks(&self) -> &[ProblemBlock] {
        &self.blocks
    }

    pub fn shared_dim(&self) -> usize {
        self.p
    }

    pub fn tilde_dim(&self) -> usize {
        self.p_tilde
    }

    /// Σ ||X||_F² over blocks: the loss of the zero generator.
    pub fn total_sum_squares(&self) -> f64 {
        self.blocks.iter().map(|b| crate::linalg::frob_sq(&b.x)).sum()
    }
}

/// Nonnegative pre-images with `G = softplus(pos) − softplus(neg)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PreImages {
    pub pos: Mat,
    pub neg: Mat,
}

/// The shared generator `G` (P̃ × K).
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub g: Mat,
    pub pre: Option<PreImages>,
}

impl Generator {
    pub fn dense(g: Mat) -> Self {
        Self { g, pre: None }
    }

    pub fn from_preimages(pos: Mat, neg: Mat) -> Self {
        let g = softplus_map(&pos, &neg);
        Self {
            g,
            pre: Some(PreImages { pos, neg }),
        }
    }

    /// Attach pre-images `softplus⁻¹(max(±G, 0) + ε)` when absent.
    pub fn with_preimages(mut self) -> Self {
        if self.pre.is_none() {
            let pos = self.g.map(|v| softplus_inv(v.max(0.0) + PREIMAGE_EPS));
            let neg = self.g.map(|v| softplus_inv((-v).max(0.0) + PREIMAGE_EPS));
            self = Self::from_preimages(pos, neg);
        }
        self
    }

    pub fn without_preimages(mut self) -> Self {
        self.pre = None;
        self
    }

    pub fn k(&self) -> usize {
        self.g.ncols()
    }

    pub fn rows(&self) -> usize {
        self.g.nrows()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    OrthonormalRows,
    ColumnStochastic,
}

/// Per-block mixing matrices S (K × P).
#[derive(Clone, Debug, PartialEq)]
pub struct MixingSet {
    pub kind: ConstraintKind,
    pub blocks: Vec<(BlockKey, Mat)>,
}

impl MixingSet {
    pub fn get(&self, key: &BlockKey) -> Option<&Mat> {
        self.blocks.iter().find(|(k, _)| k == key).map(|(_, s)| s)
    }

    /// Largest violation of the constraint over all blocks.
    pub fn constraint_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|(_, s)| match self.kind {
                ConstraintKind::OrthonormalRows => row_orthonormality_error(s),
                ConstraintKind::ColumnStochastic => column_stochastic_error(s),
            })
            .fold(0.0, f64::max)
    }
}

/// Worst of: negative entries, and |column sum − 1|.
pub fn column_stochastic_error(m: &Mat) -> f64 {
    let mut worst = 0.0f64;
    for col in m.column_iter() {
        worst = worst.max((col.sum() - 1.0).abs());
        for &v in col.iter() {
            worst = worst.max(-v);
        }
    }
    worst
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl RegPair {
    pub const NONE: RegPair = RegPair { lambda1: 0.0, lambda2: 0.0 };

    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        let reg = Self { lambda1, lambda2 };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Per-iteration objective values and wall-clock durations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub values: Vec<f64>,
    pub durations: Vec<Duration>,
}

impl LossTrace {
    pub fn push(&mut self, value: f64, elapsed: Duration) {
        self.values.push(value);
        self.durations.push(elapsed);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    pub fn converged(&self, tol: f64, window: usize) -> bool {
        converged(&self.values, tol, window)
    }

    pub fn total_time(&self) -> Duration {
        self.durations.iter().sum()
    }
}
