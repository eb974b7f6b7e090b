use std::hint::black_box;

use cogede::data::{synth_dataset, Formulation, SynthConfig};
use cogede::par;
use cogede::selection::{chain_lambda1s, plan_chains, run_chain, EvalProblems, GridSpec};
use cogede::spca::{FitConfig, Method};
use criterion::{criterion_group, criterion_main, Criterion};

fn chains(c: &mut Criterion) {
    let cfg = SynthConfig {
        n_subjects: 3,
        channels_per_modality: vec![5, 7],
        n_timepoints: 24,
        n_conditions: 2,
        ..SynthConfig::default()
    };
    let data = synth_dataset(&cfg).unwrap();
    let eval = EvalProblems::new(&data.dataset, Formulation::MultimodalMultisubject).unwrap();
    let grid = GridSpec {
        lambda1_values: vec![0.0, 1e-2, 1e-1],
        lambda2_values: vec![0.0, 1e-1],
        k_values: vec![2],
        n_inits: 4,
    };
    let plan = plan_chains(&[Formulation::MultimodalMultisubject], &[Method::SpcaSgd], &grid, &grid.seeds(0));
    let base = FitConfig::new(2, Method::SpcaSgd);
    let lambda1s = chain_lambda1s(Method::SpcaSgd, &grid);
    let run = |chain: &_| run_chain(&eval, chain, &lambda1s, &base);

    let mut group = c.benchmark_group("grid_chains");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| par::map_seq(black_box(&plan), run)));
    group.bench_function("parallel", |b| b.iter(|| par::map(black_box(&plan), run)));
    group.finish();
}

criterion_group!(benches, chains);
criterion_main!(benches);
