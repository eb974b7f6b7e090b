use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{initial_generator, FitConfig, FitResult, Method};
use crate::decomp::{
    l1_exact, l1_surrogate, l2_penalty, preimage_gradient, softplus_map, sse_at_procrustes, Generator, LossTrace,
    Problem,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::optim::Adam;

const JITTER: f64 = 1e-6;

/// Full-batch Adam on the softplus pre-images of `G`, re-solving every
/// block's Procrustes mixing at each step. The l1 term is the softplus
/// surrogate `Σ softplus(Gp) + softplus(Gn)`.
pub fn fit_spca_sgd(problem: &Problem, cfg: &FitConfig, start: Option<&Generator>) -> Result<FitResult> {
    cfg.check_problem(problem)?;
    let started = Instant::now();
    let gen = match start {
        Some(gen) => gen.clone(),
        None => initial_generator(problem, cfg)?,
    }
    .with_preimages();
    let mut pre = gen.pre.expect("pre-images attached");
    if pre.pos.shape() != (problem.tilde_dim(), cfg.k) {
        return Err(Error::Shape(format!(
            "initial G is {}x{}, expected {}x{}",
            pre.pos.nrows(),
            pre.pos.ncols(),
            problem.tilde_dim(),
            cfg.k
        )));
    }

    let reg = cfg.reg;
    let shape = pre.pos.shape();
    let mut adam = Adam::new(cfg.adam(), &[shape, shape]);
    let mut jittered = false;
    let mut trace = LossTrace::default();
    let mut worst_constraint = 0.0f64;
    loop {
        let iter_start = Instant::now();
        let g = softplus_map(&pre.pos, &pre.neg);
        let eval = sse_at_procrustes(problem, &g)?;
        if eval.degenerate {
            if jittered {
                return Err(Error::FitFailed(format!(
                    "degenerate Procrustes update at iteration {} after jitter retry",
                    trace.len()
                )));
            }
            jittered = true;
            log::debug!("degenerate Procrustes update at iteration {}, jittering", trace.len());
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
            let mut noise = |m: &mut Mat| m.apply(|v| *v += JITTER * Distribution::<f64>::sample(&StandardNormal, &mut rng));
            noise(&mut pre.pos);
            noise(&mut pre.neg);
            continue;
        }
        worst_constraint = worst_constraint.max(eval.mixing.constraint_error());
        let objective = eval.sse + reg.lambda2 * l2_penalty(&g) + reg.lambda1 * l1_surrogate(&pre);
        trace.push(objective, iter_start.elapsed());
        let converged = trace.converged(cfg.tol, cfg.window);
        if converged || trace.len() >= cfg.max_iters {
            let exact = eval.sse + reg.lambda2 * l2_penalty(&g) + reg.lambda1 * l1_exact(&g);
            return Ok(FitResult {
                method: Method::SpcaSgd,
                init: cfg.init,
                seed: cfg.seed,
                k: cfg.k,
                reg,
                generator: Generator {
                    g,
                    pre: Some(pre),
                },
                mixing: eval.mixing,
                iterations: trace.len(),
                trace,
                final_objective: objective,
                final_objective_exact: exact,
                final_sse: eval.sse,
                converged,
                degenerate: jittered,
                max_constraint_violation: worst_constraint,
                adam: Some(adam.config()),
                wall_time: started.elapsed(),
            });
        }
        let (dpos, dneg) = preimage_gradient(&eval.grad, &g, &pre.pos, &pre.neg, reg);
        adam.step(&mut [&mut pre.pos, &mut pre.neg], &[&dpos, &dneg]);
        if let Some(d) = trace.durations.last_mut() {
            *d = iter_start.elapsed();
        }
    }
}
