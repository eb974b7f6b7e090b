//! Blocks, datasets, condition stacking and split handling.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{select_columns, vstack, Mat};

pub use io::{load_dataset, read_csv_matrix, save_dataset, write_csv_matrix, Manifest, ManifestBlock};
pub use synth::{synth_dataset, SynthConfig, SyntheticData};

/// Label used for both modality and subject of a group-stacked block.
pub const GROUP_LABEL: &str = "group";
/// Subject label of a modality-stacked block.
pub const ALL_SUBJECTS: &str = "all";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How blocks are fused: everything stacked into one matrix, one block per
/// modality, or one block per (modality, subject).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Group,
    Multimodal,
    #[serde(alias = "mmms")]
    MultimodalMultisubject,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [
        Formulation::Group,
        Formulation::Multimodal,
        Formulation::MultimodalMultisubject,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Group => "group",
            Formulation::Multimodal => "multimodal",
            Formulation::MultimodalMultisubject => "multimodal_multisubject",
        }
    }

    /// Coarseness rank: group < multimodal < multimodal_multisubject.
    fn granularity(self) -> u8 {
        match self {
            Formulation::Group => 0,
            Formulation::Multimodal => 1,
            Formulation::MultimodalMultisubject => 2,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Formulation::Group),
            "multimodal" | "mm" => Ok(Formulation::Multimodal),
            "multimodal_multisubject" | "mmms" => Ok(Formulation::MultimodalMultisubject),
            other => Err(Error::InvalidArgument(format!("unknown formulation '{other}'"))),
        }
    }
}

/// (modality, subject) identity of a block, independent of split.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockKey {
    pub modality: String,
    pub subject: String,
}

impl BlockKey {
    pub fn new(modality: impl Into<String>, subject: impl Into<String>) -> Self {
        Self {
            modality: modality.into(),
            subject: subject.into(),
        }
    }

    /// Filesystem-friendly `<modality>_<subject>`.
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.modality, self.subject)
    }
}

impl fmt::Display for BlockKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.modality, self.subject)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize)", into = "(String, usize)")]
pub struct ConditionSegment {
    pub label: String,
    pub len: usize,
}

impl From<(String, usize)> for ConditionSegment {
    fn from((label, len): (String, usize)) -> Self {
        Self { label, len }
    }
}

impl From<ConditionSegment> for (String, usize) {
    fn from(seg: ConditionSegment) -> Self {
        (seg.label, seg.len)
    }
}

/// One data matrix: rows are channels, columns are the shared axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ErpBlock {
    pub modality: String,
    pub subject: String,
    pub split: Split,
    pub data: Mat,
}

impl ErpBlock {
    pub fn new(
        modality: impl Into<String>,
        subject: impl Into<String>,
        split: Split,
        data: Mat,
    ) -> Self {
        Self {
            modality: modality.into(),
            subject: subject.into(),
            split,
            data,
        }
    }

    pub fn key(&self) -> BlockKey {
        BlockKey::new(&self.modality, &self.subject)
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn shared_dim(&self) -> usize {
        self.data.ncols()
    }

    fn describe(&self) -> String {
        format!("({}, {}, {})", self.modality, self.subject, self.split)
    }
}

/// Rows `start..start + len` of a stacked block came from `source`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowSpan {
    pub source: BlockKey,
    pub split: Split,
    pub target: BlockKey,
    pub start: usize,
    pub len: usize,
}

/// A coherent set of blocks sharing the column dimension, condition layout
/// and reconstruction-driver mask.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionDataset {
    formulation: Formulation,
    condition_layout: Vec<ConditionSegment>,
    tilde_prestim_len: usize,
    tilde_mask: Vec<bool>,
    blocks: Vec<ErpBlock>,
}

impl FusionDataset {
    /// Validates every dataset invariant and orders blocks by
    /// (split, modality, subject).
    pub fn new(
        formulation: Formulation,
        condition_layout: Vec<ConditionSegment>,
        tilde_prestim_len: usize,
        mut blocks: Vec<ErpBlock>,
    ) -> Result<Self> {
        let p: usize = condition_layout.iter().map(|s| s.len).sum();
        if p == 0 {
            return Err(Error::InvalidDataset("shared dimension P must be positive".into()));
        }
        let tilde_mask = make_tilde_mask(&condition_layout, tilde_prestim_len)?;
        if blocks.is_empty() {
            return Err(Error::InvalidDataset("dataset has no blocks".into()));
        }
        let mut seen = BTreeSet::new();
        for block in &blocks {
            if block.shared_dim() != p {
                return Err(Error::InconsistentSharedDim {
                    key: block.describe(),
                    expected: p,
                    found: block.shared_dim(),
                });
            }
            if block.n_channels() == 0 {
                return Err(Error::InvalidDataset(format!("block {} has no channels", block.describe())));
            }
            if block.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "block {} contains non-finite values",
                    block.describe()
                )));
            }
            if !seen.insert((block.split, block.key())) {
                return Err(Error::DuplicateKey { key: block.describe() });
            }
        }
        match formulation {
            Formulation::Group => {
                for split in Split::ALL {
                    let n = blocks.iter().filter(|b| b.split == split).count();
                    if n > 1 {
                        return Err(Error::InvalidDataset(format!(
                            "group formulation allows one block per split, found {n} in {split}"
                        )));
                    }
                }
            }
            Formulation::Multimodal => {
                let mut per_modality = BTreeSet::new();
                for block in &blocks {
                    if !per_modality.insert((block.split, block.modality.clone())) {
                        return Err(Error::InvalidDataset(format!(
                            "multimodal formulation allows one block per modality per split; {} repeats",
                            block.describe()
                        )));
                    }
                }
            }
            Formulation::MultimodalMultisubject => {}
        }
        blocks.sort_by(|a, b| (a.split, &a.modality, &a.subject).cmp(&(b.split, &b.modality, &b.subject)));
        Ok(Self {
            formulation,
            condition_layout,
            tilde_prestim_len,
            tilde_mask,
            blocks,
        })
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn condition_layout(&self) -> &[ConditionSegment] {
        &self.condition_layout
    }

    pub fn tilde_prestim_len(&self) -> usize {
        self.tilde_prestim_len
    }

    pub fn tilde_mask(&self) -> &[bool] {
        &self.tilde_mask
    }

    /// Shared column count P.
    pub fn shared_dim(&self) -> usize {
        self.tilde_mask.len()
    }

    /// Number of X̃ columns.
    pub fn tilde_dim(&self) -> usize {
        self.tilde_mask.iter().filter(|&&m| m).count()
    }

    pub fn blocks(&self) -> &[ErpBlock] {
        &self.blocks
    }

    pub fn split_blocks(&self, split: Split) -> impl Iterator<Item = &ErpBlock> {
        self.blocks.iter().filter(move |b| b.split == split)
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.blocks.iter().any(|b| b.split == split)
    }

    pub fn block(&self, split: Split, key: &BlockKey) -> Option<&ErpBlock> {
        self.blocks
            .iter()
            .find(|b| b.split == split && b.modality == key.modality && b.subject == key.subject)
    }

    /// X̃ of a block: its columns restricted to the tilde mask.
    pub fn tilde(&self, block: &ErpBlock) -> Mat {
        if self.tilde_mask.iter().all(|&m| m) {
            block.data.clone()
        } else {
            select_columns(&block.data, &self.tilde_mask)
        }
    }

    /// Sorted subject ids present in `split`.
    pub fn subjects(&self, split: Split) -> Vec<String> {
        self.split_blocks(split)
            .map(|b| b.subject.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Same data with a different set of blocks (layout and mask kept).
    pub fn with_blocks(&self, formulation: Formulation, blocks: Vec<ErpBlock>) -> Result<Self> {
        Self::new(
            formulation,
            self.condition_layout.clone(),
            self.tilde_prestim_len,
            blocks,
        )
    }

    /// Keep only blocks of the given splits.
    pub fn restrict_splits(&self, splits: &[Split]) -> Result<Self> {
        let blocks = self
            .blocks
            .iter()
            .filter(|b| splits.contains(&b.split))
            .cloned()
            .collect();
        self.with_blocks(self.formulation, blocks)
    }
}

/// Subtract each row's mean across the full shared axis.
pub fn demean_rows(m: &mut Mat) {
    let n = m.ncols() as f64;
    for mut row in m.row_iter_mut() {
        let mean = row.sum() / n;
        row.add_scalar_mut(-mean);
    }
}

/// Horizontal concatenation of per-condition matrices in label order.
pub fn stack_conditions(per_condition: &[Mat], labels: &[String]) -> Result<(Mat, Vec<ConditionSegment>)> {
    if per_condition.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} matrices but {} labels",
            per_condition.len(),
            labels.len()
        )));
    }
    let first = per_condition
        .first()
        .ok_or_else(|| Error::Shape("no condition matrices".into()))?;
    let (n, t) = first.shape();
    if let Some((i, m)) = per_condition.iter().enumerate().find(|(_, m)| m.shape() != (n, t)) {
        return Err(Error::Shape(format!(
            "condition '{}' is {}x{}, expected {n}x{t}",
            labels[i],
            m.nrows(),
            m.ncols()
        )));
    }
    let mut out = Mat::zeros(n, t * per_condition.len());
    for (c, m) in per_condition.iter().enumerate() {
        out.view_mut((0, c * t), (n, t)).copy_from(m);
    }
    let layout = labels
        .iter()
        .map(|l| ConditionSegment { label: l.clone(), len: t })
        .collect();
    Ok((out, layout))
}

/// Mask that drops the first `prestim_len` samples of every condition segment.
pub fn make_tilde_mask(layout: &[ConditionSegment], prestim_len: usize) -> Result<Vec<bool>> {
    let mut mask = Vec::with_capacity(layout.iter().map(|s| s.len).sum());
    for seg in layout {
        if prestim_len >= seg.len {
            return Err(Error::InvalidArgument(format!(
                "prestim_len {prestim_len} out of range for condition '{}' of length {}",
                seg.label, seg.len
            )));
        }
        mask.extend((0..seg.len).map(|i| i >= prestim_len));
    }
    Ok(mask)
}

fn stack_by(
    dataset: &FusionDataset,
    target: Formulation,
    target_key: impl Fn(&ErpBlock) -> BlockKey,
) -> Result<(FusionDataset, Vec<RowSpan>)> {
    let mut groups: BTreeMap<(Split, BlockKey), Vec<&ErpBlock>> = BTreeMap::new();
    for block in dataset.blocks() {
        groups.entry((block.split, target_key(block))).or_default().push(block);
    }
    let mut spans = Vec::new();
    let mut blocks = Vec::with_capacity(groups.len());
    for ((split, key), members) in groups {
        let mut start = 0;
        for m in &members {
            spans.push(RowSpan {
                source: m.key(),
                split,
                target: key.clone(),
                start,
                len: m.n_channels(),
            });
            start += m.n_channels();
        }
        let parts: Vec<&Mat> = members.iter().map(|b| &b.data).collect();
        blocks.push(ErpBlock::new(key.modality, key.subject, split, vstack(&parts)));
    }
    Ok((dataset.with_blocks(target, blocks)?, spans))
}

/// Concatenate all blocks of each split row-wise into one group block.
pub fn stack_group(dataset: &FusionDataset) -> Result<(FusionDataset, Vec<RowSpan>)> {
    if dataset.formulation() == Formulation::Group {
        return Err(Error::InvalidArgument("dataset is already in group formulation".into()));
    }
    stack_by(dataset, Formulation::Group, |_| BlockKey::new(GROUP_LABEL, GROUP_LABEL))
}

/// Concatenate subjects within each (modality, split).
pub fn stack_modalities(dataset: &FusionDataset) -> Result<(FusionDataset, Vec<RowSpan>)> {
    if dataset.formulation() != Formulation::MultimodalMultisubject {
        return Err(Error::InvalidArgument(
            "modality stacking needs a multimodal_multisubject dataset".into(),
        ));
    }
    stack_by(dataset, Formulation::Multimodal, |b| BlockKey::new(&b.modality, ALL_SUBJECTS))
}

/// Re-express a dataset in a coarser (or equal) formulation.
pub fn formulate(dataset: &FusionDataset, target: Formulation) -> Result<(FusionDataset, Vec<RowSpan>)> {
    let source = dataset.formulation();
    if target == source {
        let spans = dataset
            .blocks()
            .iter()
            .map(|b| RowSpan {
                source: b.key(),
                split: b.split,
                target: b.key(),
                start: 0,
                len: b.n_channels(),
            })
            .collect();
        return Ok((dataset.clone(), spans));
    }
    if target.granularity() > source.granularity() {
        return Err(Error::InvalidArgument(format!(
            "cannot refine a {source} dataset into {target}"
        )));
    }
    match target {
        Formulation::Group => stack_group(dataset),
        Formulation::Multimodal => stack_modalities(dataset),
        Formulation::MultimodalMultisubject => unreachable!("finest formulation handled above"),
    }
}

/// If the dataset has a test split but no validation split, relabel the
/// test blocks of the first half of subjects (sorted by id, rounded up) as
/// validation.
pub fn partition_heldout_by_subject(dataset: &FusionDataset) -> Result<FusionDataset> {
    if dataset.has_split(Split::Validation) || !dataset.has_split(Split::Test) {
        return Ok(dataset.clone());
    }
    let subjects = dataset.subjects(Split::Test);
    if subjects.len() < 2 {
        return Err(Error::InvalidDataset(
            "need at least two subjects in the test split to derive a validation split".into(),
        ));
    }
    let n_val = subjects.len().div_ceil(2);
    let val: BTreeSet<&String> = subjects[..n_val].iter().collect();
    let blocks = dataset
        .blocks()
        .iter()
        .cloned()
        .map(|mut b| {
            if b.split == Split::Test && val.contains(&b.subject) {
                b.split = Split::Validation;
            }
            b
        })
        .collect();
    dataset.with_blocks(dataset.formulation(), blocks)
}
