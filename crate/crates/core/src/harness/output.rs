//! Result tables and their CSV form.

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

/// One uniform level. Columns of a method that did not run stay empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UniformRow {
    pub level: usize,
    pub dofs: usize,
    pub h: f64,
    pub lambda_mlc: Option<f64>,
    pub err_lambda_mlc: Option<f64>,
    pub order_lambda_mlc: Option<f64>,
    pub h1_err_mlc: Option<f64>,
    pub order_h1_mlc: Option<f64>,
    pub l2_err_mlc: Option<f64>,
    pub vcycles: Option<usize>,
    pub scf_iters_mlc: Option<usize>,
    pub converged_mlc: Option<bool>,
    pub lambda_direct: Option<f64>,
    pub err_lambda_direct: Option<f64>,
    pub order_lambda_direct: Option<f64>,
    pub h1_err_direct: Option<f64>,
    pub order_h1_direct: Option<f64>,
    pub l2_err_direct: Option<f64>,
    pub scf_iters_direct: Option<usize>,
    pub converged_direct: Option<bool>,
    /// `|λ_mlc − λ_ref| / |λ_direct − λ_ref|`
    pub error_ratio: Option<f64>,
}

pub const UNIFORM_COLUMNS: [&str; 21] = [
    "level",
    "dofs",
    "h",
    "lambda_mlc",
    "err_lambda_mlc",
    "order_lambda_mlc",
    "h1_err_mlc",
    "order_h1_mlc",
    "l2_err_mlc",
    "vcycles",
    "scf_iters_mlc",
    "converged_mlc",
    "lambda_direct",
    "err_lambda_direct",
    "order_lambda_direct",
    "h1_err_direct",
    "order_h1_direct",
    "l2_err_direct",
    "scf_iters_direct",
    "converged_direct",
    "error_ratio",
];

/// One iteration of the adaptive loop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRow {
    pub iteration: usize,
    pub dofs: usize,
    pub triangles: usize,
    pub lambda: f64,
    pub err_lambda: Option<f64>,
    pub eta: f64,
    pub marked: usize,
    pub vcycles: usize,
    pub scf_iters: usize,
    pub converged: bool,
    /// Smallest diameter among triangles touching the reentrant corner.
    pub corner_min_diameter: Option<f64>,
    pub max_diameter: f64,
}

pub const ADAPTIVE_COLUMNS: [&str; 12] = [
    "iteration",
    "dofs",
    "triangles",
    "lambda",
    "err_lambda",
    "eta",
    "marked",
    "vcycles",
    "scf_iters",
    "converged",
    "corner_min_diameter",
    "max_diameter",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn to_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn uniform_csv(rows: &[UniformRow]) -> Result<String> {
    to_csv(
        &UNIFORM_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.level.to_string(),
                r.dofs.to_string(),
                fmt_f64(r.h),
                opt_f64(r.lambda_mlc),
                opt_f64(r.err_lambda_mlc),
                opt_f64(r.order_lambda_mlc),
                opt_f64(r.h1_err_mlc),
                opt_f64(r.order_h1_mlc),
                opt_f64(r.l2_err_mlc),
                opt(r.vcycles),
                opt(r.scf_iters_mlc),
                opt(r.converged_mlc),
                opt_f64(r.lambda_direct),
                opt_f64(r.err_lambda_direct),
                opt_f64(r.order_lambda_direct),
                opt_f64(r.h1_err_direct),
                opt_f64(r.order_h1_direct),
                opt_f64(r.l2_err_direct),
                opt(r.scf_iters_direct),
                opt(r.converged_direct),
                opt_f64(r.error_ratio),
            ]
        }),
    )
}

pub fn adaptive_csv(rows: &[AdaptiveRow]) -> Result<String> {
    to_csv(
        &ADAPTIVE_COLUMNS,
        rows.iter().map(|r| {
            vec![
                r.iteration.to_string(),
                r.dofs.to_string(),
                r.triangles.to_string(),
                fmt_f64(r.lambda),
                opt_f64(r.err_lambda),
                fmt_f64(r.eta),
                r.marked.to_string(),
                r.vcycles.to_string(),
                r.scf_iters.to_string(),
                r.converged.to_string(),
                opt_f64(r.corner_min_diameter),
                fmt_f64(r.max_diameter),
            ]
        }),
    )
}

/// `log(e_prev / e) / log(h_prev / h)`; `None` unless both errors are
/// positive and the mesh size changed.
pub fn observed_order(e_prev: f64, e: f64, h_prev: f64, h: f64) -> Option<f64> {
    (e_prev > 0.0 && e > 0.0 && h_prev > h && h > 0.0).then(|| (e_prev / e).ln() / (h_prev / h).ln())
}
