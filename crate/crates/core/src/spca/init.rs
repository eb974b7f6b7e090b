use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::decomp::{Generator, Problem};
use crate::error::{Error, Result};
use crate::linalg::{fix_column_signs, thin_svd, vstack, Mat};

/// First `k` right singular vectors of all blocks' X̃ stacked row-wise.
pub fn init_pca(problem: &Problem, k: usize) -> Result<Generator> {
    let parts: Vec<&Mat> = problem.blocks().iter().map(|b| &b.x_tilde).collect();
    let stacked = vstack(&parts);
    let available = stacked.nrows().min(stacked.ncols());
    if k == 0 || k > available {
        return Err(Error::InvalidArgument(format!(
            "K={k} but only {available} singular vectors are available"
        )));
    }
    let svd = thin_svd(&stacked);
    let mut g = svd.v_t.rows(0, k).transpose();
    fix_column_signs(&mut g);
    Ok(Generator::dense(g))
}

/// Standard-normal pre-images, deterministic per seed.
pub fn init_random(k: usize, p_tilde: usize, seed: u64) -> Generator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |r: &mut ChaCha8Rng| Mat::from_fn(p_tilde, k, |_, _| StandardNormal.sample(r));
    let pos = draw(&mut rng);
    let neg = draw(&mut rng);
    Generator::from_preimages(pos, neg)
}
