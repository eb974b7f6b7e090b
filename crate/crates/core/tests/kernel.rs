mod common;

use cogede::data::BlockKey;
use cogede::decomp::{
    envelope_gradient, l1_surrogate, l2_penalty, partial_gradient, procrustes_update, softplus_map, sse,
    sse_at_procrustes, ConstraintKind, MixingSet, PreImages, Problem, ProblemBlock, RegPair,
};
use cogede::linalg::{frob_sq, Mat};
use cogede::spca::{fit_spca_qp, FitConfig, Method};
use common::{randn, random_row_orthonormal, rng};
use rand::RngCore;

fn two_block_problem(seed: u64) -> Problem {
    let mut r = rng(seed);
    let blocks = (0..2)
        .map(|b| {
            let x = randn(&mut r, 4, 10);
            ProblemBlock {
                key: BlockKey::new("m", format!("s{b}")),
                x_tilde: x.clone(),
                x,
            }
        })
        .collect();
    Problem::new(blocks).unwrap()
}

fn value(problem: &Problem, pre: &PreImages, reg: RegPair) -> f64 {
    let g = softplus_map(&pre.pos, &pre.neg);
    let at = sse_at_procrustes(problem, &g).unwrap();
    at.sse + reg.lambda2 * l2_penalty(&g) + reg.lambda1 * l1_surrogate(pre)
}

#[test]
fn envelope_gradient_matches_central_differences_entrywise() {
    let problem = two_block_problem(1);
    let mut r = rng(2);
    let pre = PreImages {
        pos: randn(&mut r, 10, 2),
        neg: randn(&mut r, 10, 2),
    };
    let reg = RegPair::new(0.3, 0.2).unwrap();
    let (dpos, dneg) = envelope_gradient(&problem, &pre.pos, &pre.neg, reg).unwrap();
    let h = 1e-5;
    for which in 0..2 {
        for idx in 0..20 {
            let at = |delta: f64| {
                let mut q = pre.clone();
                let m = if which == 0 { &mut q.pos } else { &mut q.neg };
                m[idx] += delta;
                value(&problem, &q, reg)
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an = if which == 0 { dpos[idx] } else { dneg[idx] };
            let rel = (an - fd).abs() / fd.abs().max(1e-3);
            assert!(rel < 1e-4, "entry {which}/{idx}: analytic {an} vs fd {fd}");
        }
    }
}

#[test]
fn zero_generator_gradients_are_antisymmetric() {
    let problem = two_block_problem(3);
    let mut r = rng(4);
    let pre = randn(&mut r, 10, 2);
    let mixing = MixingSet {
        kind: ConstraintKind::OrthonormalRows,
        blocks: problem
            .blocks()
            .iter()
            .map(|b| (b.key.clone(), random_row_orthonormal(&mut r, 2, 10)))
            .collect(),
    };
    let (dpos, dneg) = partial_gradient(&problem, &pre, &pre, &mixing, RegPair::NONE).unwrap();
    assert_eq!(dpos, -dneg);
    // the procrustes point itself is degenerate at G = 0
    assert!(envelope_gradient(&problem, &pre, &pre, RegPair::NONE).is_err());
}

#[test]
fn stationary_at_exact_reconstruction() {
    let mut r = rng(5);
    let x = randn(&mut r, 3, 2) * randn(&mut r, 2, 8);
    let problem = Problem::single(x);
    let mut cfg = FitConfig::new(2, Method::SpcaQp);
    cfg.init = cogede::spca::Init::Pca;
    let fit = fit_spca_qp(&problem, &cfg, None).unwrap();
    let gen = fit.generator.with_preimages();
    let pre = gen.pre.unwrap();
    let (dpos, dneg) = envelope_gradient(&problem, &pre.pos, &pre.neg, RegPair::NONE).unwrap();
    let norm = (frob_sq(&dpos) + frob_sq(&dneg)).sqrt();
    assert!(norm < 1e-6, "gradient norm {norm}");
}

#[test]
fn procrustes_trace_beats_sampled_rotations() {
    let mut r = rng(6);
    let x = randn(&mut r, 6, 8);
    let g = randn(&mut r, 8, 2);
    let m = x.transpose() * &x * &g;
    let s = procrustes_update(&x, &x, &g).unwrap().s;
    let best = (&s * &m).trace();
    for _ in 0..10_000 {
        let other = random_row_orthonormal(&mut r, 2, 8);
        assert!((&other * &m).trace() <= best + 1e-12);
    }
}

#[test]
fn procrustes_sse_beats_sampled_mixings_per_block() {
    let mut r = rng(7);
    for _ in 0..10 {
        let problem = two_block_problem(r.next_u64());
        let g = randn(&mut r, 10, 3);
        let at = sse_at_procrustes(&problem, &g).unwrap();
        for _ in 0..1000 {
            let mixing = MixingSet {
                kind: ConstraintKind::OrthonormalRows,
                blocks: problem
                    .blocks()
                    .iter()
                    .map(|b| (b.key.clone(), random_row_orthonormal(&mut r, 3, 10)))
                    .collect(),
            };
            assert!(at.sse <= sse(&problem, &g, &mixing).unwrap() + 1e-9);
        }
    }
}

#[test]
fn uniform_scaling_of_generator_keeps_procrustes_solution() {
    let mut r = rng(8);
    let x = randn(&mut r, 6, 8);
    let g = randn(&mut r, 8, 2);
    let a = procrustes_update(&x, &x, &g).unwrap().s;
    let b = procrustes_update(&x, &x, &(&g * 5.0)).unwrap().s;
    assert!((a - b).amax() < 1e-12);
}

#[test]
fn column_scaling_keeps_solution_when_sources_are_orthogonal() {
    // with M = XᵀX̃G having orthogonal columns, M D = U (Σ D) Vᵀ keeps U Vᵀ
    let x = Mat::identity(4, 4);
    let g = Mat::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
    let mut scaled = g.clone();
    scaled.column_mut(1).scale_mut(7.0);
    let a = procrustes_update(&x, &x, &g).unwrap().s;
    let b = procrustes_update(&x, &x, &scaled).unwrap().s;
    assert!((a - b).amax() < 1e-12);
}

#[test]
fn full_mask_tilde_equals_plain_reconstruction() {
    let mut r = rng(9);
    let x = randn(&mut r, 5, 7);
    let g = randn(&mut r, 7, 2);
    let s = random_row_orthonormal(&mut r, 2, 7);
    let problem = Problem::single(x.clone());
    let mixing = MixingSet {
        kind: ConstraintKind::OrthonormalRows,
        blocks: vec![(BlockKey::new("x", "x"), s.clone())],
    };
    let direct = frob_sq(&(&x - &x * &g * &s));
    assert_eq!(sse(&problem, &g, &mixing).unwrap(), direct);
}
