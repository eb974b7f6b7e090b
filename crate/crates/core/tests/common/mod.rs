#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cogede::linalg::{thin_svd, Mat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn randn(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Mat {
    Mat::from_fn(n, p, |_, _| StandardNormal.sample(rng))
}

/// K × P matrix with orthonormal rows, uniformly distributed.
pub fn random_row_orthonormal(rng: &mut ChaCha8Rng, k: usize, p: usize) -> Mat {
    let a = randn(rng, p, k);
    let q = a.qr().q();
    q.columns(0, k).transpose()
}

/// `||X||² − Σ_{i≤K} σ_i²`, the best rank-K approximation error.
pub fn pca_floor(x: &Mat, k: usize) -> f64 {
    let sv = thin_svd(x).singular_values;
    let total: f64 = sv.iter().map(|s| s * s).sum();
    total - sv.iter().take(k).map(|s| s * s).sum::<f64>()
}

/// Every file below `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cogede")
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cogede(args: &[&str], cwd: &Path) -> Run {
    let out = std::process::Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("COGEDE_LOG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}
