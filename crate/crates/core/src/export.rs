//! On-disk forms of fit results and selection tables.
//!
//! Wall-clock quantities are only written when `timings` is set, so that
//! repeated runs produce identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::data::{write_csv_matrix, Formulation};
use crate::decomp::ConstraintKind;
use crate::error::{Error, Result};
use crate::selection::{SelectionTable, SummaryRow};
use crate::spca::{FitConfig, FitResult};

fn fmt(v: f64) -> String {
    v.to_string()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Io {
            path: path.to_path_buf(),
            source: std::io::Error::other(format!("{other:?}")),
        },
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `G.csv`, one `S_<modality>_<subject>.csv` per block, `trace.csv`
/// and `meta.json` into `dir`.
pub fn write_fit(
    dir: &Path,
    fit: &FitResult,
    cfg: &FitConfig,
    formulation: Formulation,
    timings: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let g_path = dir.join("G.csv");
    write_csv_matrix(&g_path, &fit.generator.g)?;
    written.push(g_path);
    for (key, s) in &fit.mixing.blocks {
        let path = dir.join(format!("S_{}.csv", key.file_stem()));
        write_csv_matrix(&path, s)?;
        written.push(path);
    }

    let trace_path = dir.join("trace.csv");
    let mut header = vec!["iteration", "objective"];
    if timings {
        header.push("seconds");
    }
    let rows = fit.trace.values.iter().zip(&fit.trace.durations).enumerate().map(|(i, (v, d))| {
        let mut row = vec![i.to_string(), fmt(*v)];
        if timings {
            row.push(fmt(d.as_secs_f64()));
        }
        row
    });
    write_rows(&trace_path, &header, rows)?;
    written.push(trace_path);

    let constraint_kind = match fit.mixing.kind {
        ConstraintKind::OrthonormalRows => "orthonormal_rows",
        ConstraintKind::ColumnStochastic => "column_stochastic",
    };
    let mut meta = json!({
        "method": fit.method,
        "formulation": formulation,
        "init": fit.init.as_str(),
        "seed": fit.seed,
        "K": fit.k,
        "lambda1": fit.reg.lambda1,
        "lambda2": fit.reg.lambda2,
        "learning_rate": cfg.learning_rate,
        "max_iters": cfg.max_iters,
        "tol": cfg.tol,
        "window": cfg.window,
        "adam": fit.adam.map(|a| json!({"beta1": a.beta1, "beta2": a.beta2, "eps": a.eps})),
        "constraint_kind": constraint_kind,
        "final_objective": fit.final_objective,
        "final_objective_exact": fit.final_objective_exact,
        "final_sse": fit.final_sse,
        "converged": fit.converged,
        "iterations": fit.iterations,
        "degenerate": fit.degenerate,
        "max_constraint_violation": fit.max_constraint_violation,
    });
    if timings {
        meta["wall_time_seconds"] = json!(fit.wall_time.as_secs_f64());
    }
    let meta_path = dir.join("meta.json");
    write_json(&meta_path, &meta)?;
    written.push(meta_path);
    Ok(written)
}

pub const SELECTION_HEADER: [&str; 15] = [
    "formulation",
    "method",
    "K",
    "lambda1",
    "lambda2",
    "seed",
    "status",
    "train_objective",
    "train_sse",
    "validation_sse",
    "test_sse",
    "iterations",
    "converged",
    "wall_time",
    "error",
];

/// One line per fit. Failed fits keep their key columns and leave the loss
/// columns empty.
pub fn write_selection(path: &Path, table: &SelectionTable, timings: bool) -> Result<()> {
    let rows = table.rows.iter().map(|r| {
        let mut row = vec![
            r.formulation.to_string(),
            r.method.to_string(),
            r.k.to_string(),
            fmt(r.lambda1),
            fmt(r.lambda2),
            r.seed.to_string(),
        ];
        match &r.metrics {
            Some(m) => row.extend([
                "ok".to_string(),
                fmt(m.train_objective),
                fmt(m.train_sse),
                fmt(m.validation_sse),
                m.test_sse.map(fmt).unwrap_or_default(),
                m.iterations.to_string(),
                m.converged.to_string(),
                fmt(if timings { m.wall_time } else { 0.0 }),
            ]),
            None => {
                row.push("failed".to_string());
                row.extend(std::iter::repeat_n(String::new(), 7));
            }
        }
        row.push(r.error.clone().unwrap_or_default());
        row
    });
    write_rows(path, &SELECTION_HEADER, rows)
}

pub fn write_summary(path: &Path, summary: &[SummaryRow]) -> Result<()> {
    let header = [
        "formulation",
        "method",
        "K",
        "lambda1",
        "lambda2",
        "n_seeds",
        "mean_test_sse",
        "sd_test_sse",
    ];
    let rows = summary.iter().map(|s| {
        vec![
            s.formulation.to_string(),
            s.method.to_string(),
            s.k.to_string(),
            fmt(s.lambda1),
            fmt(s.lambda2),
            s.n_seeds.to_string(),
            fmt(s.mean_test_sse),
            fmt(s.sd_test_sse),
        ]
    });
    write_rows(path, &header, rows)
}
