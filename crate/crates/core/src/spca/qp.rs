use std::time::Instant;

use super::{elastic_net_cd_gram, initial_generator, FitConfig, FitResult, Method};
use crate::decomp::{
    l1_exact, l2_penalty, procrustes_from_sources, ConstraintKind, Generator, LossTrace, MixingSet, Problem,
};
use crate::error::{Error, Result};
use crate::linalg::{frob_sq, row_orthonormality_error, Mat};

/// Alternates the closed-form Procrustes mixing update with a per-component
/// elastic-net update of `G` on the stacked multi-block design, until the
/// relative-convergence rule fires or `max_iters` alternations ran.
///
/// For row-orthonormal `S`, `||X − X̃GS||² = ||X(I − SᵀS)||² + ||XSᵀ − X̃G||²`,
/// so with `S` fixed each column of `G` solves an elastic net with design
/// `[X̃₁; …; X̃_B]` and response `[X₁S₁ᵀe_k; …]`. Only the Gram form
/// `Σ X̃ᵀX̃`, `Σ X̃ᵀX Sᵀ` is formed.
pub fn fit_spca_qp(problem: &Problem, cfg: &FitConfig, start: Option<&Generator>) -> Result<FitResult> {
    cfg.check_problem(problem)?;
    let started = Instant::now();
    let mut g = match start {
        Some(gen) => gen.g.clone(),
        None => initial_generator(problem, cfg)?.g,
    };
    if g.shape() != (problem.tilde_dim(), cfg.k) {
        return Err(Error::Shape(format!(
            "initial G is {}x{}, expected {}x{}",
            g.nrows(),
            g.ncols(),
            problem.tilde_dim(),
            cfg.k
        )));
    }

    let p_tilde = problem.tilde_dim();
    let mut gram = Mat::zeros(p_tilde, p_tilde);
    let mut cross = Vec::with_capacity(problem.blocks().len());
    for block in problem.blocks() {
        gram += block.x_tilde.transpose() * &block.x_tilde;
        cross.push(block.x_tilde.transpose() * &block.x);
    }

    let reg = cfg.reg;
    let mut trace = LossTrace::default();
    let mut degenerate = false;
    let mut worst_constraint = 0.0f64;
    let mut converged = false;
    let mut mixing;
    let mut final_sse;
    loop {
        let iter_start = Instant::now();
        let mut blocks = Vec::with_capacity(problem.blocks().len());
        let mut fit = 0.0;
        for block in problem.blocks() {
            let sources = &block.x_tilde * &g;
            let sol = procrustes_from_sources(&block.x, &sources)?;
            degenerate |= sol.degenerate;
            worst_constraint = worst_constraint.max(row_orthonormality_error(&sol.s));
            fit += frob_sq(&(&block.x - &sources * &sol.s));
            blocks.push((block.key.clone(), sol.s));
        }
        mixing = MixingSet {
            kind: ConstraintKind::OrthonormalRows,
            blocks,
        };
        final_sse = fit;
        let objective = fit + reg.lambda2 * l2_penalty(&g) + reg.lambda1 * l1_exact(&g);
        trace.push(objective, iter_start.elapsed());
        if trace.converged(cfg.tol, cfg.window) {
            converged = true;
            break;
        }
        if trace.len() >= cfg.max_iters {
            break;
        }

        let mut rhs = Mat::zeros(p_tilde, cfg.k);
        for (c, (_, s)) in cross.iter().zip(&mixing.blocks) {
            rhs += c * s.transpose();
        }
        for k in 0..cfg.k {
            let sol = elastic_net_cd_gram(&gram, &rhs.column(k).clone_owned(), reg, &g.column(k).clone_owned());
            degenerate |= sol.degenerate;
            g.set_column(k, &sol.coef);
        }
        // the last trace entry's timing covers the whole alternation
        if let Some(d) = trace.durations.last_mut() {
            *d = iter_start.elapsed();
        }
    }

    let final_objective = *trace.values.last().expect("at least one iteration");
    Ok(FitResult {
        method: Method::SpcaQp,
        init: cfg.init,
        seed: cfg.seed,
        k: cfg.k,
        reg,
        generator: Generator::dense(g),
        mixing,
        iterations: trace.len(),
        trace,
        final_objective,
        final_objective_exact: final_objective,
        final_sse,
        converged,
        degenerate,
        max_constraint_violation: worst_constraint,
        adam: None,
        wall_time: started.elapsed(),
    })
}
