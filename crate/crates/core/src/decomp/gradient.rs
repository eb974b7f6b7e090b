use super::{procrustes_from_sources, residual, sigmoid, softplus_map, ConstraintKind, MixingSet, Problem, RegPair};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, Mat};

/// `∂/∂G Σ ||X − X̃ G S||²` at fixed S: `−2 Σ X̃^T (X − X̃GS) S^T`.
pub fn sse_gradient(problem: &Problem, g: &Mat, mixing: &MixingSet) -> Result<Mat> {
    let mut grad = Mat::zeros(g.nrows(), g.ncols());
    for block in problem.blocks() {
        let s = mixing
            .get(&block.key)
            .ok_or_else(|| Error::Shape(format!("no mixing matrix for block {}", block.key)))?;
        let r = residual(block, g, s);
        grad -= block.x_tilde.transpose() * (r * s.transpose()) * 2.0;
    }
    Ok(grad)
}

/// Gradient of the surrogate objective w.r.t. the pre-images with `S` held
/// fixed.
pub fn partial_gradient(
    problem: &Problem,
    pos: &Mat,
    neg: &Mat,
    mixing: &MixingSet,
    reg: RegPair,
) -> Result<(Mat, Mat)> {
    let g = softplus_map(pos, neg);
    let dsse = sse_gradient(problem, &g, mixing)?;
    Ok(preimage_gradient(&dsse, &g, pos, neg, reg))
}

/// Procrustes mixing, SSE and `∂SSE/∂G` at one generator, in a single pass
/// over the blocks.
#[derive(Clone, Debug)]
pub struct SseAtProcrustes {
    pub mixing: MixingSet,
    pub sse: f64,
    pub grad: Mat,
    pub degenerate: bool,
}

pub fn sse_at_procrustes(problem: &Problem, g: &Mat) -> Result<SseAtProcrustes> {
    let mut blocks = Vec::with_capacity(problem.blocks().len());
    let mut sse = 0.0;
    let mut grad = Mat::zeros(g.nrows(), g.ncols());
    let mut degenerate = false;
    for block in problem.blocks() {
        let sources = &block.x_tilde * g;
        let sol = procrustes_from_sources(&block.x, &sources)?;
        degenerate |= sol.degenerate;
        let r = &block.x - &sources * &sol.s;
        sse += frob_sq(&r);
        grad -= block.x_tilde.transpose() * (r * sol.s.transpose()) * 2.0;
        blocks.push((block.key.clone(), sol.s));
    }
    Ok(SseAtProcrustes {
        mixing: MixingSet {
            kind: ConstraintKind::OrthonormalRows,
            blocks,
        },
        sse,
        grad,
        degenerate,
    })
}

/// Total derivative of `(Gp, Gn) ↦ min_S objective`. Since the Procrustes
/// `S` minimizes the objective over the row-orthonormal set, this equals the
/// fixed-`S` partial at that `S`, provided the minimizer is unique.
pub fn envelope_gradient(problem: &Problem, pos: &Mat, neg: &Mat, reg: RegPair) -> Result<(Mat, Mat)> {
    let g = softplus_map(pos, neg);
    let eval = sse_at_procrustes(problem, &g)?;
    if eval.degenerate {
        return Err(Error::NonSmoothPoint(
            "Procrustes matrix has a zero singular value; the mixing minimizer is not unique".into(),
        ));
    }
    Ok(preimage_gradient(&eval.grad, &g, pos, neg, reg))
}

/// Chain `∂/∂G` of the SSE through the penalties and the softplus map.
pub(crate) fn preimage_gradient(dsse: &Mat, g: &Mat, pos: &Mat, neg: &Mat, reg: RegPair) -> (Mat, Mat) {
    let dg = dsse + g * (2.0 * reg.lambda2);
    let dpos = Mat::from_fn(g.nrows(), g.ncols(), |i, j| (dg[(i, j)] + reg.lambda1) * sigmoid(pos[(i, j)]));
    let dneg = Mat::from_fn(g.nrows(), g.ncols(), |i, j| (reg.lambda1 - dg[(i, j)]) * sigmoid(neg[(i, j)]));
    (dpos, dneg)
}
