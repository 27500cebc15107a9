//! Fixed-schema CSV output.

use std::io::{self, Write};

use rlr_core::empirical::Stat;
use rlr_core::PriorKind;

use crate::run::CellResult;

pub const HEADER: &[&str] = &[
    "delta",
    "lambda",
    "kappa",
    "reg",
    "s",
    "th_alpha",
    "th_sigma2",
    "th_mse_raw",
    "th_mse_debiased",
    "th_e1",
    "th_e2",
    "th_residual",
    "emp_alpha_mean",
    "emp_alpha_se",
    "emp_sigma2_mean",
    "emp_sigma2_se",
    "emp_mse_mean",
    "emp_mse_se",
    "emp_e1_mean",
    "emp_e1_se",
    "emp_e2_mean",
    "emp_e2_se",
    "trials_converged",
    "runtime_ms",
    "status",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.filter(|x| x.is_finite()).map(num).unwrap_or_default()
}

fn push_stat(fields: &mut Vec<String>, stat: Option<Stat>) {
    fields.push(opt(stat.map(|s| s.mean)));
    fields.push(opt(stat.map(|s| s.se)));
}

pub fn row(cell: &CellResult, timing: bool) -> Vec<String> {
    let spec = &cell.spec;
    let s = match spec.prior.kind {
        PriorKind::Sparse { sparsity } => sparsity,
        PriorKind::Gaussian => 1.0,
    };
    let mut f = vec![
        num(spec.delta),
        num(spec.lambda),
        num(spec.kappa),
        spec.regularizer.name().to_string(),
        num(s),
    ];

    let theory = cell.theory.as_ref().ok();
    let support = theory.and_then(|t| t.support);
    f.push(opt(theory.map(|t| t.correlation)));
    f.push(opt(theory.map(|t| t.variance)));
    f.push(opt(theory.map(|t| t.mse_raw)));
    f.push(opt(theory.map(|t| t.mse_debiased)));
    f.push(opt(support.map(|s| s.e1)));
    f.push(opt(support.map(|s| s.e2)));
    f.push(opt(theory.map(|t| t.residual)));

    let summary = cell.empirical.as_ref().and_then(|e| e.as_ref().ok());
    push_stat(&mut f, summary.and_then(|s| s.alpha));
    push_stat(&mut f, summary.and_then(|s| s.sigma2));
    push_stat(&mut f, summary.and_then(|s| s.mse_raw));
    push_stat(&mut f, summary.and_then(|s| s.e1));
    push_stat(&mut f, summary.and_then(|s| s.e2));
    f.push(summary.map(|s| s.trials_converged.to_string()).unwrap_or_default());

    f.push(if timing { cell.runtime.as_millis().to_string() } else { String::new() });
    let flags = cell.flags();
    f.push(if flags.is_empty() { "ok".into() } else { flags.join(";") });
    f
}

pub fn write(out: &mut dyn Write, cells: &[CellResult], timing: bool) -> io::Result<()> {
    writeln!(out, "{}", HEADER.join(","))?;
    for cell in cells {
        writeln!(out, "{}", row(cell, timing).join(","))?;
    }
    out.flush()
}
