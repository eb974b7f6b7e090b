mod common;

use cogede::data::{stack_group, synth_dataset, Formulation, Split, SynthConfig};
use cogede::decomp::{l1_exact, l1_surrogate, RegPair};
use cogede::selection::{
    anneal_grid, heldout_loss, run_chain, select_model, sweep_k, ChainSpec, EvalProblems, GridSpec,
};
use cogede::spca::{fit, FitConfig, Init, Method};

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 3,
        channels_per_modality: vec![5, 7],
        n_timepoints: 24,
        n_conditions: 2,
        seed,
        ..SynthConfig::default()
    }
}

fn group_eval(cfg: &SynthConfig) -> EvalProblems {
    let data = synth_dataset(cfg).unwrap();
    let (group, _) = stack_group(&data.dataset).unwrap();
    EvalProblems::new(&group, Formulation::Group).unwrap()
}

#[test]
fn default_grid_gives_49_rows_per_k_and_seed() {
    let eval = group_eval(&small(1));
    let base = FitConfig::new(2, Method::SpcaSgd);
    let table = anneal_grid(&eval, 2, &GridSpec::default(), &base, &[0]).unwrap();
    assert_eq!(table.rows.len(), 49);
    assert!(table.rows.iter().all(|r| r.metrics.is_some()));
    for r in table.completed() {
        let m = r.metrics.as_ref().unwrap();
        assert!(m.train_objective >= m.train_sse);
        assert!(m.validation_sse.is_finite() && m.validation_sse >= 0.0);
    }
}

#[test]
fn warm_start_objective_bookkeeping_is_exact() {
    let eval = group_eval(&small(2));
    for method in [Method::SpcaQp, Method::SpcaSgd] {
        let mut cfg = FitConfig::new(2, method);
        cfg.reg = RegPair::new(0.0, 1e-2).unwrap();
        let first = fit(&eval.train, &cfg, None).unwrap();
        cfg.reg.lambda1 = 1e-5;
        let warm = fit(&eval.train, &cfg, Some(&first.generator)).unwrap();
        let penalty = match &first.generator.pre {
            Some(pre) if method == Method::SpcaSgd => l1_surrogate(pre),
            _ => l1_exact(&first.generator.g),
        };
        assert_eq!(warm.trace.values[0], first.final_objective + 1e-5 * penalty, "{method}");
    }
}

#[test]
fn train_sse_grows_with_lasso_strength() {
    let eval = group_eval(&small(3));
    let chain = ChainSpec {
        formulation: Formulation::Group,
        method: Method::SpcaQp,
        k: 2,
        seed: 0,
        lambda2: 1e-1,
    };
    let lambda1s = GridSpec::default().lambda1_values;
    let rows = run_chain(&eval, &chain, &lambda1s, &FitConfig::new(2, Method::SpcaQp));
    let sses: Vec<f64> = rows.iter().map(|r| r.metrics.as_ref().unwrap().train_sse).collect();
    for w in sses.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-6), "{sses:?}");
    }
}

#[test]
fn heldout_on_training_data_equals_final_sse() {
    let eval = group_eval(&small(4));
    let mut cfg = FitConfig::new(3, Method::SpcaQp);
    cfg.reg = RegPair::new(1e-2, 1e-1).unwrap();
    let f = fit(&eval.train, &cfg, None).unwrap();
    let loss = heldout_loss(&eval.train, &eval.train, &f).unwrap();
    assert!((loss - f.final_sse).abs() <= 1e-9 * f.final_sse);
}

#[test]
fn fitted_model_beats_zero_generator_on_heldout_data() {
    for seed in 0..10 {
        let cfg = SynthConfig { seed, ..SynthConfig::default() };
        let data = synth_dataset(&cfg).unwrap();
        let eval = EvalProblems::new(&data.dataset, Formulation::MultimodalMultisubject).unwrap();
        let f = fit(&eval.train, &FitConfig::new(cfg.k_true, Method::SpcaSgd), None).unwrap();
        let test = eval.test.as_ref().unwrap();
        let loss = test.loss(&f).unwrap();
        assert!(loss < test.heldout.total_sum_squares(), "seed {seed}");
    }
}

#[test]
fn selected_pair_dominates_unregularized_on_validation() {
    let cfg = SynthConfig { snr: 0.5, ..small(5) };
    let eval = group_eval(&cfg);
    let base = FitConfig::new(2, Method::SpcaSgd);
    let grid = GridSpec {
        lambda1_values: vec![0.0, 1e-2, 1.0],
        lambda2_values: vec![0.0, 1e-1, 10.0],
        ..GridSpec::default()
    };
    let table = anneal_grid(&eval, 2, &grid, &base, &[0, 1]).unwrap();
    let best = select_model(&table.rows, 2).unwrap();
    let plain = table
        .rows
        .iter()
        .filter(|r| r.lambda1 == 0.0 && r.lambda2 == 0.0)
        .map(|r| r.validation_sse().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(best.validation_sse().unwrap() <= plain);
}

#[test]
fn annealing_is_bit_reproducible() {
    let eval = group_eval(&small(6));
    let mut base = FitConfig::new(2, Method::SpcaSgd);
    base.init = Init::Random;
    let grid = GridSpec {
        lambda1_values: vec![0.0, 1e-3, 1e-1],
        lambda2_values: vec![0.0, 1e-2],
        ..GridSpec::default()
    };
    let run = || {
        let mut t = anneal_grid(&eval, 2, &grid, &base, &[3, 4]).unwrap();
        for m in t.rows.iter_mut().filter_map(|r| r.metrics.as_mut()) {
            m.wall_time = 0.0;
        }
        t
    };
    assert_eq!(run(), run());
}

#[test]
fn impossible_fits_become_failed_rows() {
    let eval = group_eval(&small(7));
    let chain = ChainSpec {
        formulation: Formulation::Group,
        method: Method::SpcaQp,
        k: 500,
        seed: 0,
        lambda2: 0.0,
    };
    let rows = run_chain(&eval, &chain, &[0.0, 1e-3], &FitConfig::new(500, Method::SpcaQp));
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.metrics.is_none() && r.error.is_some()));
}

#[test]
fn sweep_summary_shape() {
    let data = synth_dataset(&small(8)).unwrap();
    let grid = GridSpec {
        lambda1_values: vec![0.0],
        lambda2_values: vec![0.0],
        k_values: vec![2, 3],
        n_inits: 10,
    };
    let out = sweep_k(
        &data.dataset,
        &grid,
        &[Method::SpcaSgd],
        &[Formulation::Group, Formulation::MultimodalMultisubject],
        &FitConfig::new(2, Method::SpcaSgd),
    )
    .unwrap();
    assert_eq!(out.summary.len(), 4);
    assert_eq!(out.table.rows.len(), 2 * 2 * 10);
    assert!(out.summary.iter().all(|s| s.n_seeds == 10));
}

#[test]
fn noiseless_group_test_loss_does_not_grow_with_k() {
    let cfg = SynthConfig {
        snr: f64::INFINITY,
        ..small(9)
    };
    let data = synth_dataset(&cfg).unwrap();
    let grid = GridSpec {
        lambda1_values: vec![0.0, 1e-3],
        lambda2_values: vec![0.0, 1e-3],
        k_values: vec![1, 2, 3, 4],
        n_inits: 2,
    };
    let out = sweep_k(
        &data.dataset,
        &grid,
        &[Method::SpcaSgd],
        &[Formulation::Group],
        &FitConfig::new(1, Method::SpcaSgd),
    )
    .unwrap();
    // K=4 exceeds the signal rank, so every fit there hits a degenerate SVD
    let failed: Vec<_> = out.table.rows.iter().filter(|r| r.metrics.is_none()).collect();
    assert!(failed.iter().all(|r| r.k == 4));
    let ks: Vec<usize> = out.summary.iter().map(|s| s.k).collect();
    assert!(ks.starts_with(&[1, 2, 3]), "{ks:?}");
    let means: Vec<f64> = out.summary.iter().map(|s| s.mean_test_sse).collect();
    for w in means.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-6, "{means:?}");
    }
}

#[test]
fn subject_partition_derives_validation_from_test() {
    let data = synth_dataset(&small(10)).unwrap();
    let blocks: Vec<_> = data
        .dataset
        .blocks()
        .iter()
        .filter(|b| b.split != Split::Validation)
        .cloned()
        .collect();
    let ds = data.dataset.with_blocks(data.dataset.formulation(), blocks).unwrap();
    let evals = cogede::selection::eval_problems(&ds, &[Formulation::Group, Formulation::MultimodalMultisubject]).unwrap();
    for e in &evals {
        let val = e.validation.as_ref().unwrap();
        let test = e.test.as_ref().unwrap();
        let rows = |p: &cogede::decomp::Problem| p.blocks().iter().map(|b| b.x.nrows()).sum::<usize>();
        // three subjects: two go to validation, one stays in test
        assert_eq!(rows(&val.heldout) + rows(&test.heldout), rows(&e.train));
        assert_eq!(rows(&val.heldout), rows(&val.train));
        let f = fit(&e.train, &FitConfig::new(2, Method::SpcaSgd), None).unwrap();
        assert!(val.loss(&f).unwrap() > 0.0);
    }
}
