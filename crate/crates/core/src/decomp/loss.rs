use super::{softplus, Generator, MixingSet, PreImages, Problem, ProblemBlock, RegPair};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, Mat};

/// `X − X̃ G S` for one block.
pub fn residual(block: &ProblemBlock, g: &Mat, s: &Mat) -> Mat {
    &block.x - (&block.x_tilde * g) * s
}

fn check_shapes(problem: &Problem, g: &Mat, mixing: &MixingSet) -> Result<()> {
    if g.nrows() != problem.tilde_dim() {
        return Err(Error::Shape(format!(
            "G has {} rows, X̃ has {} columns",
            g.nrows(),
            problem.tilde_dim()
        )));
    }
    for block in problem.blocks() {
        let s = mixing
            .get(&block.key)
            .ok_or_else(|| Error::Shape(format!("no mixing matrix for block {}", block.key)))?;
        if s.shape() != (g.ncols(), problem.shared_dim()) {
            return Err(Error::Shape(format!(
                "S for {} is {}x{}, expected {}x{}",
                block.key,
                s.nrows(),
                s.ncols(),
                g.ncols(),
                problem.shared_dim()
            )));
        }
    }
    Ok(())
}

/// `Σ_blocks ||X − X̃ G S||_F²`.
pub fn sse(problem: &Problem, g: &Mat, mixing: &MixingSet) -> Result<f64> {
    check_shapes(problem, g, mixing)?;
    Ok(problem
        .blocks()
        .iter()
        .map(|b| frob_sq(&residual(b, g, mixing.get(&b.key).expect("checked"))))
        .sum())
}

/// `Σ_k ||G_k||²`.
pub fn l2_penalty(g: &Mat) -> f64 {
    frob_sq(g)
}

/// `Σ_k ||G_k||_1`.
pub fn l1_exact(g: &Mat) -> f64 {
    g.iter().map(|v| v.abs()).sum()
}

/// `Σ softplus(Gp) + softplus(Gn)`, an upper bound on `||G||_1`.
pub fn l1_surrogate(pre: &PreImages) -> f64 {
    pre.pos.iter().chain(pre.neg.iter()).map(|&v| softplus(v)).sum()
}

/// Regularized objective; the l1 term uses the softplus surrogate when the
/// generator carries pre-images.
pub fn spca_objective(problem: &Problem, generator: &Generator, mixing: &MixingSet, reg: RegPair) -> Result<f64> {
    let l1 = match &generator.pre {
        Some(pre) => l1_surrogate(pre),
        None => l1_exact(&generator.g),
    };
    let fit = sse(problem, &generator.g, mixing)?;
    Ok(fit + reg.lambda2 * l2_penalty(&generator.g) + reg.lambda1 * l1)
}

/// Regularized objective with the exact `||G||_1`.
pub fn spca_objective_exact(problem: &Problem, g: &Mat, mixing: &MixingSet, reg: RegPair) -> Result<f64> {
    let fit = sse(problem, g, mixing)?;
    Ok(fit + reg.lambda2 * l2_penalty(g) + reg.lambda1 * l1_exact(g))
}
