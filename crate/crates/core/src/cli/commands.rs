use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::args::{CvArgs, FitArgs, Grid, Solver, SweepArgs, SynthArgs};
use super::{emit, CliError};
use crate::data::{formulate, load_dataset, synth_dataset, Formulation, FusionDataset, Split, SynthConfig};
use crate::decomp::{Problem, RegPair};
use crate::error::Error;
use crate::export::{write_fit, write_json, write_selection, write_summary};
use crate::par;
use crate::selection::{
    chain_lambda1s, eval_problems, plan_chains, run_chain, select_model, summarize, ChainSpec, EvalProblems,
    GridSpec, SelectionRow, SelectionTable,
};
use crate::spca::{self, FitConfig, Init, Method};

type CliResult<T> = Result<T, CliError>;

fn parse<T: FromStr<Err = Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(CliError::from)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

/// `"2..5"` (inclusive), `"2,3,5"` or `"4"`.
pub(crate) fn parse_k_values(s: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("invalid K specification '{s}'"));
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let lo: usize = a.trim().parse().map_err(|_| bad())?;
        let hi: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if lo > hi {
            return Err(bad());
        }
        (lo..=hi).collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn base_config(solver: &Solver, k: usize, method: Method) -> CliResult<FitConfig> {
    let cfg = FitConfig {
        init: parse::<Init>(&solver.init)?,
        seed: solver.seed,
        learning_rate: solver.learning_rate,
        max_iters: solver.max_iters,
        tol: solver.tol,
        window: solver.window,
        ..FitConfig::new(k, method)
    };
    cfg.validate()?;
    Ok(cfg)
}

fn make_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(Error::io(dir, e)))
}

pub(crate) fn synth(a: SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        n_subjects: a.subjects,
        n_modalities: a.modalities,
        channels_per_modality: a.channels,
        n_timepoints: a.timepoints,
        n_conditions: a.conditions,
        k_true: a.k_true,
        snr: a.snr,
        heterogeneity: a.heterogeneity,
        seed: a.seed,
        prestim_len: a.prestim,
    };
    cfg.validate()?;
    let data = synth_dataset(&cfg)?;
    let manifest = data.save(&a.common.out)?;
    emit(
        "synth",
        "ok",
        json!({ "blocks": data.dataset.blocks().len(), "P": data.dataset.shared_dim() }),
        json!({ "manifest": path_str(&manifest), "out": path_str(&a.common.out) }),
    );
    Ok(())
}

fn load_formulated(manifest: &Path, formulation: Option<&str>) -> CliResult<(FusionDataset, Formulation)> {
    let ds = load_dataset(manifest)?;
    let f = match formulation {
        Some(s) => parse::<Formulation>(s)?,
        None => ds.formulation(),
    };
    Ok((ds, f))
}

pub(crate) fn fit(a: FitArgs) -> CliResult<()> {
    let method = parse::<Method>(&a.method)?;
    let mut cfg = base_config(&a.solver, a.k, method)?;
    cfg.reg = RegPair::new(a.l1, a.l2)?;
    let (ds, f) = load_formulated(&a.manifest, a.formulation.as_deref())?;
    let (ds, _) = formulate(&ds, f)?;
    let problem = Problem::from_dataset(&ds, Split::Train)?;
    let result = spca::fit(&problem, &cfg, None)?;
    make_dir(&a.common.out)?;
    write_fit(&a.common.out, &result, &cfg, f, a.common.timings)?;
    emit(
        "fit",
        "ok",
        json!({
            "final_objective": result.final_objective,
            "final_objective_exact": result.final_objective_exact,
            "final_sse": result.final_sse,
            "iterations": result.iterations,
            "converged": result.converged,
            "wall_time": result.wall_time.as_secs_f64(),
        }),
        json!({ "out": path_str(&a.common.out) }),
    );
    Ok(())
}

fn grid_spec(g: &Grid) -> CliResult<GridSpec> {
    let spec = GridSpec {
        lambda1_values: g.l1_grid.clone(),
        lambda2_values: g.l2_grid.clone(),
        k_values: parse_k_values(&g.k)?,
        n_inits: g.seeds,
    };
    spec.validate()?;
    Ok(spec)
}

/// A finished chain as stored under `<out>/cells`.
#[derive(Serialize, Deserialize)]
struct Cell {
    settings: Value,
    chain: ChainSpec,
    rows: Vec<SelectionRow>,
}

fn settings_fingerprint(manifest: &Path, grid: &GridSpec, base: &FitConfig, timings: bool) -> Value {
    json!({
        "manifest": path_str(manifest),
        "lambda1_values": grid.lambda1_values,
        "init": base.init.as_str(),
        "learning_rate": base.learning_rate,
        "max_iters": base.max_iters,
        "tol": base.tol,
        "window": base.window,
        "timings": timings,
    })
}

fn load_cell(path: &Path, settings: &Value, chain: &ChainSpec) -> Option<Vec<SelectionRow>> {
    let text = fs::read_to_string(path).ok()?;
    let cell: Cell = serde_json::from_str(&text).ok()?;
    (cell.settings == *settings && cell.chain == *chain).then_some(cell.rows)
}

fn store_cell(path: &Path, cell: &Cell) -> Result<(), Error> {
    let tmp = path.with_extension("json.tmp");
    write_json(&tmp, cell)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct ChainRun<'a> {
    out: &'a Path,
    settings: Value,
    grid: &'a GridSpec,
    base: &'a FitConfig,
    resume: bool,
    jobs: usize,
    timings: bool,
}

impl ChainRun<'_> {
    /// Runs (or, with `resume`, reloads) every chain and merges the rows in
    /// plan order.
    fn run(&self, evals: &[EvalProblems], chains: &[ChainSpec]) -> CliResult<SelectionTable> {
        let cells = self.out.join("cells");
        make_dir(&cells)?;
        let results: Vec<Result<Vec<SelectionRow>, Error>> = par::with_jobs(self.jobs, || {
            par::map(chains, |chain| {
                let path: PathBuf = cells.join(format!("{}.json", chain.file_stem()));
                if self.resume {
                    if let Some(rows) = load_cell(&path, &self.settings, chain) {
                        log::info!("reusing {}", path.display());
                        return Ok(rows);
                    }
                }
                let eval = evals
                    .iter()
                    .find(|e| e.formulation == chain.formulation)
                    .expect("planned formulation");
                let cfg = FitConfig {
                    method: chain.method,
                    ..self.base.clone()
                };
                let mut rows = run_chain(eval, chain, &chain_lambda1s(chain.method, self.grid), &cfg);
                if !self.timings {
                    for m in rows.iter_mut().filter_map(|r| r.metrics.as_mut()) {
                        m.wall_time = 0.0;
                    }
                }
                store_cell(
                    &path,
                    &Cell {
                        settings: self.settings.clone(),
                        chain: chain.clone(),
                        rows: rows.clone(),
                    },
                )?;
                Ok(rows)
            })
        });
        let mut table = SelectionTable::default();
        for r in results {
            table.extend(r?);
        }
        Ok(table)
    }
}

pub(crate) fn cv(a: CvArgs) -> CliResult<()> {
    let method = parse::<Method>(&a.method)?;
    let grid = grid_spec(&a.grid)?;
    let base = base_config(&a.solver, 1, method)?;
    let (ds, f) = load_formulated(&a.manifest, a.formulation.as_deref())?;
    let evals = eval_problems(&ds, &[f])?;
    if evals[0].validation.is_none() {
        return Err(CliError::Runtime(Error::InvalidDataset(
            "cross-validation needs a validation split (or a test split to derive one)".into(),
        )));
    }
    make_dir(&a.common.out)?;
    let chains = plan_chains(&[f], &[method], &grid, &grid.seeds(a.solver.seed));
    let runner = ChainRun {
        out: &a.common.out,
        settings: settings_fingerprint(&a.manifest, &grid, &base, a.common.timings),
        grid: &grid,
        base: &base,
        resume: a.grid.resume,
        jobs: a.grid.jobs,
        timings: a.common.timings,
    };
    let table = runner.run(&evals, &chains)?;
    let selection = a.common.out.join("selection.csv");
    write_selection(&selection, &table, a.common.timings)?;
    for &k in &grid.k_values {
        let best = select_model(&table.rows, k)?;
        emit(
            "cv",
            "ok",
            json!({
                "formulation": f,
                "method": method,
                "K": k,
                "lambda1": best.lambda1,
                "lambda2": best.lambda2,
                "seed": best.seed,
                "validation_sse": best.validation_sse(),
            }),
            json!({ "selection": path_str(&selection) }),
        );
    }
    Ok(())
}

pub(crate) fn sweep(a: SweepArgs) -> CliResult<()> {
    let methods: Vec<Method> = a.method.iter().map(|m| parse(m)).collect::<CliResult<_>>()?;
    let formulations: Vec<Formulation> = a.formulations.iter().map(|f| parse(f)).collect::<CliResult<_>>()?;
    if methods.is_empty() || formulations.is_empty() {
        return Err(usage("need at least one method and one formulation"));
    }
    let grid = grid_spec(&a.grid)?;
    let base = base_config(&a.solver, 1, methods[0])?;
    let ds = load_dataset(&a.manifest)?;
    let evals = eval_problems(&ds, &formulations)?;
    if evals.iter().any(|e| e.validation.is_none() || e.test.is_none()) {
        return Err(CliError::Runtime(Error::InvalidDataset(
            "the K sweep needs train, validation and test splits".into(),
        )));
    }
    make_dir(&a.common.out)?;
    let chains = plan_chains(&formulations, &methods, &grid, &grid.seeds(a.solver.seed));
    let runner = ChainRun {
        out: &a.common.out,
        settings: settings_fingerprint(&a.manifest, &grid, &base, a.common.timings),
        grid: &grid,
        base: &base,
        resume: a.grid.resume,
        jobs: a.grid.jobs,
        timings: a.common.timings,
    };
    let table = runner.run(&evals, &chains)?;
    let summary = summarize(&table)?;
    let selection = a.common.out.join("selection.csv");
    let summary_path = a.common.out.join("summary.csv");
    write_selection(&selection, &table, a.common.timings)?;
    write_summary(&summary_path, &summary)?;
    let failed = table.rows.iter().filter(|r| r.metrics.is_none()).count();
    emit(
        "sweep",
        "ok",
        json!({ "fits": table.rows.len(), "failed": failed, "summary_rows": summary.len() }),
        json!({ "selection": path_str(&selection), "summary": path_str(&summary_path) }),
    );
    Ok(())
}
