//! Ground-truth-known synthetic evoked responses.
//!
//! Every block is `X = W H + E`: a shared low-rank temporal profile matrix
//! `H` (one smooth bump per component and condition), block-specific
//! spatial loadings `W` blending a per-modality map with an individual map,
//! and Gaussian noise scaled to hit the requested signal-to-noise power ratio
//! exactly. The three splits are independent noise draws on one signal.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{save_dataset, write_csv_matrix, BlockKey, ConditionSegment, ErpBlock, Formulation, FusionDataset, Split};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, Mat};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_modalities: usize,
    /// One entry per modality, or a single entry reused for all of them.
    pub channels_per_modality: Vec<usize>,
    pub n_timepoints: usize,
    pub n_conditions: usize,
    pub k_true: usize,
    /// Signal-to-noise power ratio; `f64::INFINITY` gives noiseless data.
    pub snr: f64,
    /// 0 = identical maps within a modality, 1 = fully individual maps.
    pub heterogeneity: f64,
    pub seed: u64,
    /// Leading samples of each condition excluded from X̃.
    #[serde(default)]
    pub prestim_len: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 4,
            n_modalities: 2,
            channels_per_modality: vec![8, 12],
            n_timepoints: 60,
            n_conditions: 3,
            k_true: 3,
            snr: 4.0,
            heterogeneity: 0.5,
            seed: 0,
            prestim_len: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_subjects", self.n_subjects),
            ("n_modalities", self.n_modalities),
            ("n_timepoints", self.n_timepoints),
            ("n_conditions", self.n_conditions),
            ("k_true", self.k_true),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.channels_per_modality.is_empty() || self.channels_per_modality.contains(&0) {
            return Err(Error::InvalidArgument("channel counts must be positive".into()));
        }
        if self.channels_per_modality.len() != 1 && self.channels_per_modality.len() != self.n_modalities {
            return Err(Error::InvalidArgument(format!(
                "{} channel counts given for {} modalities",
                self.channels_per_modality.len(),
                self.n_modalities
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::InvalidArgument("snr must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.heterogeneity) {
            return Err(Error::InvalidArgument("heterogeneity must lie in [0, 1]".into()));
        }
        if self.prestim_len >= self.n_timepoints {
            return Err(Error::InvalidArgument("prestim_len must be below n_timepoints".into()));
        }
        Ok(())
    }

    fn channels(&self, modality: usize) -> usize {
        if self.channels_per_modality.len() == 1 {
            self.channels_per_modality[0]
        } else {
            self.channels_per_modality[modality]
        }
    }

    pub fn modality_label(&self, m: usize) -> String {
        format!("mod{m}")
    }

    pub fn subject_label(&self, b: usize) -> String {
        let width = (self.n_subjects.saturating_sub(1)).to_string().len().max(2);
        format!("s{b:0width$}")
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub dataset: FusionDataset,
    /// k_true × C·T temporal profiles.
    pub truth_h: Mat,
    /// Per-block spatial loadings, N_mb × k_true.
    pub truth_w: Vec<(BlockKey, Mat)>,
}

impl SyntheticData {
    /// Dataset files and manifest plus `truth_H.csv` and
    /// `truth_W_<modality>_<subject>.csv`. Returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let manifest = save_dataset(&self.dataset, dir)?;
        write_csv_matrix(&dir.join("truth_H.csv"), &self.truth_h)?;
        for (key, w) in &self.truth_w {
            write_csv_matrix(&dir.join(format!("truth_W_{}.csv", key.file_stem())), w)?;
        }
        Ok(manifest)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Mat {
    Mat::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn temporal_profiles(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Mat {
    let t_len = cfg.n_timepoints;
    let t = t_len as f64;
    let mut h = Mat::zeros(cfg.k_true, t_len * cfg.n_conditions);
    for k in 0..cfg.k_true {
        let center = rng.random_range(0.15 * t..=0.85 * t);
        let width = rng.random_range((t / 40.0).max(1.0)..=(t / 12.0).max(1.5));
        for c in 0..cfg.n_conditions {
            let amplitude = rng.random_range(0.5..=1.5);
            let shift = rng.random_range(-0.5..=0.5) * width;
            let mu = center + shift;
            for s in 0..t_len {
                let z = (s as f64 - mu) / width;
                h[(k, c * t_len + s)] = amplitude * (-0.5 * z * z).exp();
            }
        }
    }
    h
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let h = temporal_profiles(cfg, &mut rng);

    let shared: Vec<Mat> = (0..cfg.n_modalities)
        .map(|m| gaussian(&mut rng, cfg.channels(m), cfg.k_true))
        .collect();
    let het = cfg.heterogeneity;
    let mut truth_w = Vec::new();
    let mut signals = Vec::new();
    for m in 0..cfg.n_modalities {
        for b in 0..cfg.n_subjects {
            let individual = gaussian(&mut rng, cfg.channels(m), cfg.k_true);
            let w = &shared[m] * (1.0 - het) + individual * het;
            signals.push(&w * &h);
            truth_w.push((BlockKey::new(cfg.modality_label(m), cfg.subject_label(b)), w));
        }
    }

    let mut blocks = Vec::new();
    for split in Split::ALL {
        for ((key, _), signal) in truth_w.iter().zip(&signals) {
            let noise = gaussian(&mut rng, signal.nrows(), signal.ncols());
            let data = if cfg.snr.is_infinite() {
                signal.clone()
            } else {
                let scale = (frob_sq(signal) / (cfg.snr * frob_sq(&noise))).sqrt();
                signal + noise * scale
            };
            blocks.push(ErpBlock::new(&key.modality, &key.subject, split, data));
        }
    }

    let layout = (0..cfg.n_conditions)
        .map(|c| ConditionSegment {
            label: format!("c{c}"),
            len: cfg.n_timepoints,
        })
        .collect();
    let dataset = FusionDataset::new(Formulation::MultimodalMultisubject, layout, cfg.prestim_len, blocks)?;
    Ok(SyntheticData {
        dataset,
        truth_h: h,
        truth_w,
    })
}
