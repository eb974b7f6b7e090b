//! Annealed regularization grids, held-out scoring, model selection and the
//! K sweep.

mod heldout;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::{partition_heldout_by_subject, Formulation, FusionDataset};
use crate::decomp::RegPair;
use crate::error::{Error, Result};
use crate::par;
use crate::spca::{fit, FitConfig, FitResult, Method};

pub use heldout::{heldout_loss, EvalProblems, HeldoutPair};

pub fn default_lambdas() -> Vec<f64> {
    vec![0.0, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lambda1_values: Vec<f64>,
    pub lambda2_values: Vec<f64>,
    pub k_values: Vec<usize>,
    pub n_inits: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            lambda1_values: default_lambdas(),
            lambda2_values: default_lambdas(),
            k_values: (2..=20).collect(),
            n_inits: 10,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, values) in [("lambda1", &self.lambda1_values), ("lambda2", &self.lambda2_values)] {
            if values.is_empty() {
                return Err(Error::InvalidArgument(format!("{name} grid is empty")));
            }
            if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidArgument(format!("{name} grid values must be finite and >= 0")));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("{name} grid must be strictly ascending")));
            }
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidArgument("K values must be positive".into()));
        }
        if self.n_inits == 0 {
            return Err(Error::InvalidArgument("n_inits must be at least 1".into()));
        }
        Ok(())
    }

    /// The shared initialization seeds `base, base+1, …`.
    pub fn seeds(&self, base: u64) -> Vec<u64> {
        (0..self.n_inits as u64).map(|i| base.wrapping_add(i)).collect()
    }
}

/// Losses of one completed fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    /// Objective with the exact l1 penalty.
    pub train_objective: f64,
    pub train_sse: f64,
    pub validation_sse: f64,
    pub test_sse: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds.
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub formulation: Formulation,
    pub method: Method,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub seed: u64,
    /// `None` for a failed fit, with the reason in `error`.
    pub metrics: Option<RowMetrics>,
    pub error: Option<String>,
}

impl SelectionRow {
    pub fn validation_sse(&self) -> Option<f64> {
        self.metrics.as_ref().map(|m| m.validation_sse)
    }

    pub fn test_sse(&self) -> Option<f64> {
        self.metrics.as_ref().and_then(|m| m.test_sse)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
}

impl SelectionTable {
    pub fn extend(&mut self, rows: impl IntoIterator<Item = SelectionRow>) {
        self.rows.extend(rows);
    }

    pub fn completed(&self) -> impl Iterator<Item = &SelectionRow> {
        self.rows.iter().filter(|r| r.metrics.is_some())
    }
}

/// One warm-started sequence of fits: ascending λ1 at fixed λ2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub formulation: Formulation,
    pub method: Method,
    pub k: usize,
    pub seed: u64,
    pub lambda2: f64,
}

impl ChainSpec {
    pub fn file_stem(&self) -> String {
        format!(
            "{}_{}_k{}_seed{}_l2_{}",
            self.formulation, self.method, self.k, self.seed, self.lambda2
        )
    }
}

/// λ1 values a chain visits: the grid for SPCA, only 0 for archetypal
/// analysis which has no penalty.
pub fn chain_lambda1s(method: Method, grid: &GridSpec) -> Vec<f64> {
    if method.is_spca() {
        grid.lambda1_values.clone()
    } else {
        vec![0.0]
    }
}

/// Every chain of a sweep, in output order.
pub fn plan_chains(formulations: &[Formulation], methods: &[Method], grid: &GridSpec, seeds: &[u64]) -> Vec<ChainSpec> {
    let mut chains = Vec::new();
    for &formulation in formulations {
        for &method in methods {
            let lambda2s = if method.is_spca() {
                grid.lambda2_values.clone()
            } else {
                vec![0.0]
            };
            for &k in &grid.k_values {
                for &seed in seeds {
                    for &lambda2 in &lambda2s {
                        chains.push(ChainSpec {
                            formulation,
                            method,
                            k,
                            seed,
                            lambda2,
                        });
                    }
                }
            }
        }
    }
    chains
}

fn score(eval: &EvalProblems, fit: &FitResult) -> Result<RowMetrics> {
    let validation = eval
        .validation
        .as_ref()
        .ok_or_else(|| Error::InvalidDataset("no validation split".into()))?;
    Ok(RowMetrics {
        train_objective: fit.final_objective_exact,
        train_sse: fit.final_sse,
        validation_sse: validation.loss(fit)?,
        test_sse: eval.test.as_ref().map(|t| t.loss(fit)).transpose()?,
        iterations: fit.iterations,
        converged: fit.converged,
        wall_time: fit.wall_time.as_secs_f64(),
    })
}

/// Runs one chain. The first λ1 starts from the configured initialization,
/// each later one from the previous solution (pre-images included). After a
/// failure the next fit restarts from the first solution of the chain.
pub fn run_chain(eval: &EvalProblems, chain: &ChainSpec, lambda1s: &[f64], base: &FitConfig) -> Vec<SelectionRow> {
    let mut rows = Vec::with_capacity(lambda1s.len());
    let mut first: Option<FitResult> = None;
    let mut previous: Option<FitResult> = None;
    for (i, &lambda1) in lambda1s.iter().enumerate() {
        let cfg = FitConfig {
            k: chain.k,
            reg: RegPair {
                lambda1,
                lambda2: chain.lambda2,
            },
            method: chain.method,
            seed: chain.seed,
            ..base.clone()
        };
        let start = previous.as_ref().or(first.as_ref()).map(|f| &f.generator);
        let outcome = fit(&eval.train, &cfg, start).and_then(|f| score(eval, &f).map(|m| (f, m)));
        let mut row = SelectionRow {
            formulation: chain.formulation,
            method: chain.method,
            k: chain.k,
            lambda1,
            lambda2: chain.lambda2,
            seed: chain.seed,
            metrics: None,
            error: None,
        };
        match outcome {
            Ok((f, metrics)) => {
                row.metrics = Some(metrics);
                if i == 0 {
                    first = Some(f.clone());
                }
                previous = Some(f);
            }
            Err(e) => {
                log::warn!("fit failed for {} at lambda1={lambda1}: {e}", chain.file_stem());
                row.error = Some(e.to_string());
                previous = None;
            }
        }
        rows.push(row);
    }
    rows
}

/// The full λ grid for one K, over `seeds`, with warm starts along λ1.
pub fn anneal_grid(
    eval: &EvalProblems,
    k: usize,
    grid: &GridSpec,
    base: &FitConfig,
    seeds: &[u64],
) -> Result<SelectionTable> {
    grid.validate()?;
    if eval.validation.is_none() {
        return Err(Error::InvalidDataset("annealing needs a validation split".into()));
    }
    let single = GridSpec {
        k_values: vec![k],
        ..grid.clone()
    };
    let chains = plan_chains(&[eval.formulation], &[base.method], &single, seeds);
    let lambda1s = chain_lambda1s(base.method, grid);
    let rows = par::map(&chains, |c| run_chain(eval, c, &lambda1s, base));
    Ok(SelectionTable {
        rows: rows.into_iter().flatten().collect(),
    })
}

fn preference(a: &SelectionRow, b: &SelectionRow) -> Ordering {
    let (va, vb) = (a.validation_sse().unwrap(), b.validation_sse().unwrap());
    va.total_cmp(&vb)
        .then(b.lambda1.total_cmp(&a.lambda1))
        .then(b.lambda2.total_cmp(&a.lambda2))
        .then(a.seed.cmp(&b.seed))
}

/// Lowest validation SSE among completed rows with this K; ties go to the
/// larger λ1, then the larger λ2, then the lower seed.
pub fn select_model(rows: &[SelectionRow], k: usize) -> Result<&SelectionRow> {
    rows.iter()
        .filter(|r| r.k == k && r.metrics.is_some())
        .min_by(|a, b| preference(a, b))
        .ok_or(Error::EmptyTable(k))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub formulation: Formulation,
    pub method: Method,
    pub k: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub n_seeds: usize,
    pub mean_test_sse: f64,
    /// Sample standard deviation; 0 for a single seed.
    pub sd_test_sse: f64,
}

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per (formulation, method, K): pick the λ pair on validation SSE, then
/// average the test SSE of that pair over all seeds. Groups where every fit
/// failed are skipped.
pub fn summarize(table: &SelectionTable) -> Result<Vec<SummaryRow>> {
    let mut groups: Vec<(Formulation, Method, usize)> = Vec::new();
    for r in &table.rows {
        let key = (r.formulation, r.method, r.k);
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for (formulation, method, k) in groups {
        let rows: Vec<SelectionRow> = table
            .rows
            .iter()
            .filter(|r| r.formulation == formulation && r.method == method && r.k == k)
            .cloned()
            .collect();
        let best = match select_model(&rows, k) {
            Ok(best) => best,
            Err(Error::EmptyTable(_)) => {
                log::warn!("every {formulation}/{method} fit at K={k} failed; left out of the summary");
                continue;
            }
            Err(e) => return Err(e),
        };
        let tests: Vec<f64> = rows
            .iter()
            .filter(|r| r.lambda1 == best.lambda1 && r.lambda2 == best.lambda2)
            .filter_map(|r| r.test_sse())
            .collect();
        if tests.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "no test losses for {formulation}/{method} K={k}"
            )));
        }
        let (mean, sd) = mean_sd(&tests);
        out.push(SummaryRow {
            formulation,
            method,
            k,
            lambda1: best.lambda1,
            lambda2: best.lambda2,
            n_seeds: tests.len(),
            mean_test_sse: mean,
            sd_test_sse: sd,
        });
    }
    Ok(out)
}

/// Builds the per-formulation problems of a dataset, deriving a validation
/// split from the test subjects when none is given.
pub fn eval_problems(dataset: &FusionDataset, formulations: &[Formulation]) -> Result<Vec<EvalProblems>> {
    let dataset = partition_heldout_by_subject(dataset)?;
    formulations.iter().map(|&f| EvalProblems::new(&dataset, f)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOutput {
    pub table: SelectionTable,
    pub summary: Vec<SummaryRow>,
}

/// Anneals every (formulation, method, K, seed) and summarizes test loss of
/// the validation-selected λ pair per K.
pub fn sweep_k(
    dataset: &FusionDataset,
    grid: &GridSpec,
    methods: &[Method],
    formulations: &[Formulation],
    base: &FitConfig,
) -> Result<SweepOutput> {
    grid.validate()?;
    let evals = eval_problems(dataset, formulations)?;
    for e in &evals {
        if e.validation.is_none() || e.test.is_none() {
            return Err(Error::InvalidDataset("the K sweep needs validation and test splits".into()));
        }
    }
    let seeds = grid.seeds(base.seed);
    let chains = plan_chains(formulations, methods, grid, &seeds);
    let rows = par::map(&chains, |c| {
        let eval = evals.iter().find(|e| e.formulation == c.formulation).expect("planned formulation");
        let cfg = FitConfig {
            method: c.method,
            ..base.clone()
        };
        run_chain(eval, c, &chain_lambda1s(c.method, grid), &cfg)
    });
    let table = SelectionTable {
        rows: rows.into_iter().flatten().collect(),
    };
    let summary = summarize(&table)?;
    Ok(SweepOutput { table, summary })
}
