use std::collections::BTreeSet;

use crate::data::{formulate, BlockKey, Formulation, FusionDataset, Split};
use crate::decomp::Problem;
use crate::error::{Error, Result};
use crate::linalg::frob_sq;
use crate::spca::FitResult;

/// `Σ ||X_heldout − X̃_train G S||_F²` over the held-out blocks: training
/// sources `X̃_train G` and trained per-block `S` scored against held-out
/// targets.
pub fn heldout_loss(heldout: &Problem, train: &Problem, fit: &FitResult) -> Result<f64> {
    let g = &fit.generator.g;
    let mut total = 0.0;
    for block in heldout.blocks() {
        let source = train
            .blocks()
            .iter()
            .find(|b| b.key == block.key)
            .ok_or_else(|| Error::MissingBlock {
                key: block.key.to_string(),
                split: Split::Train.to_string(),
            })?;
        let s = fit.mixing.get(&block.key).ok_or_else(|| Error::MissingBlock {
            key: block.key.to_string(),
            split: "fitted mixing".into(),
        })?;
        if source.x_tilde.nrows() != block.x.nrows() {
            return Err(Error::Shape(format!(
                "block {} has {} held-out rows but {} training rows",
                block.key,
                block.x.nrows(),
                source.x_tilde.nrows()
            )));
        }
        total += frob_sq(&(&block.x - &source.x_tilde * g * s));
    }
    Ok(total)
}

/// A held-out split paired with the training blocks that drive its
/// reconstruction, both stacked under the same formulation.
#[derive(Clone, Debug)]
pub struct HeldoutPair {
    pub heldout: Problem,
    pub train: Problem,
}

impl HeldoutPair {
    pub fn loss(&self, fit: &FitResult) -> Result<f64> {
        heldout_loss(&self.heldout, &self.train, fit)
    }
}

/// Training problem plus the held-out pairs of one formulation.
#[derive(Clone, Debug)]
pub struct EvalProblems {
    pub formulation: Formulation,
    pub train: Problem,
    pub validation: Option<HeldoutPair>,
    pub test: Option<HeldoutPair>,
}

impl EvalProblems {
    /// Builds every split of `dataset` under `formulation`. When a held-out
    /// split covers fewer subjects than training, only the matching training
    /// blocks are stacked as its sources.
    pub fn new(dataset: &FusionDataset, formulation: Formulation) -> Result<Self> {
        let (train_ds, _) = formulate(&dataset.restrict_splits(&[Split::Train])?, formulation)?;
        let train = Problem::from_dataset(&train_ds, Split::Train)?;
        let pair = |split: Split| -> Result<Option<HeldoutPair>> {
            if !dataset.has_split(split) {
                return Ok(None);
            }
            let keys: BTreeSet<BlockKey> = dataset.split_blocks(split).map(|b| b.key()).collect();
            let mut blocks: Vec<_> = dataset.split_blocks(split).cloned().collect();
            for key in &keys {
                let b = dataset.block(Split::Train, key).ok_or_else(|| Error::MissingBlock {
                    key: key.to_string(),
                    split: Split::Train.to_string(),
                })?;
                blocks.push(b.clone());
            }
            let both = dataset.with_blocks(dataset.formulation(), blocks)?;
            let (both, _) = formulate(&both, formulation)?;
            Ok(Some(HeldoutPair {
                heldout: Problem::from_dataset(&both, split)?,
                train: Problem::from_dataset(&both, Split::Train)?,
            }))
        };
        Ok(Self {
            formulation,
            validation: pair(Split::Validation)?,
            test: pair(Split::Test)?,
            train,
        })
    }
}
