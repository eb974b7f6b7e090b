use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{FitConfig, FitResult, Init, Method};
use crate::decomp::{
    column_stochastic_error, softmax_cols, softmax_cols_backward, ConstraintKind, Generator, LossTrace, MixingSet,
    Problem, RegPair,
};
use crate::error::Result;
use crate::linalg::{frob_sq, Mat};
use crate::optim::Adam;

/// Archetypal analysis with a shared column-stochastic `G` (P̃ × K) and
/// per-block column-stochastic `S` (K × P), both through column softmax of
/// Gaussian-initialized logits, minimizing `Σ ||X − X̃GS||²` with Adam.
pub fn fit_aa_sgd(problem: &Problem, cfg: &FitConfig) -> Result<FitResult> {
    cfg.check_problem(problem)?;
    let started = Instant::now();
    let (p, p_tilde, k) = (problem.shared_dim(), problem.tilde_dim(), cfg.k);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut randn = |r: usize, c: usize| Mat::from_fn(r, c, |_, _| StandardNormal.sample(&mut rng));
    let mut logits: Vec<Mat> = Vec::with_capacity(1 + problem.blocks().len());
    logits.push(randn(p_tilde, k));
    for _ in problem.blocks() {
        logits.push(randn(k, p));
    }
    let shapes: Vec<(usize, usize)> = logits.iter().map(|m| m.shape()).collect();
    let mut adam = Adam::new(cfg.adam(), &shapes);

    let mut trace = LossTrace::default();
    let mut worst_constraint = 0.0f64;
    loop {
        let iter_start = Instant::now();
        let g = softmax_cols(&logits[0]);
        let s: Vec<Mat> = logits[1..].iter().map(softmax_cols).collect();
        worst_constraint = s
            .iter()
            .map(column_stochastic_error)
            .fold(worst_constraint.max(column_stochastic_error(&g)), f64::max);

        let mut fit = 0.0;
        let mut dg = Mat::zeros(p_tilde, k);
        let mut ds = Vec::with_capacity(s.len());
        for (block, s_b) in problem.blocks().iter().zip(&s) {
            let sources = &block.x_tilde * &g;
            let r = &block.x - &sources * s_b;
            fit += frob_sq(&r);
            dg -= block.x_tilde.transpose() * (&r * s_b.transpose()) * 2.0;
            ds.push(sources.transpose() * &r * -2.0);
        }
        trace.push(fit, iter_start.elapsed());
        let converged = trace.converged(cfg.tol, cfg.window);
        if converged || trace.len() >= cfg.max_iters {
            let mixing = MixingSet {
                kind: ConstraintKind::ColumnStochastic,
                blocks: problem.blocks().iter().map(|b| b.key.clone()).zip(s).collect(),
            };
            return Ok(FitResult {
                method: Method::Aa,
                init: Init::Random,
                seed: cfg.seed,
                k,
                reg: RegPair::NONE,
                generator: Generator::dense(g),
                mixing,
                iterations: trace.len(),
                trace,
                final_objective: fit,
                final_objective_exact: fit,
                final_sse: fit,
                converged,
                degenerate: false,
                max_constraint_violation: worst_constraint,
                adam: Some(adam.config()),
                wall_time: started.elapsed(),
            });
        }

        let mut grads = Vec::with_capacity(logits.len());
        grads.push(softmax_cols_backward(&g, &dg));
        for (s_b, ds_b) in s.iter().zip(&ds) {
            grads.push(softmax_cols_backward(s_b, ds_b));
        }
        let mut params: Vec<&mut Mat> = logits.iter_mut().collect();
        let grad_refs: Vec<&Mat> = grads.iter().collect();
        adam.step(&mut params, &grad_refs);
        if let Some(d) = trace.durations.last_mut() {
            *d = iter_start.elapsed();
        }
    }
}
