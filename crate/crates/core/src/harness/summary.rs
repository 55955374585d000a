use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::draws::fmt_f64;
use crate::error::Result;
use crate::estimators::Method;

use super::run::ResultRow;

/// Accuracy and cost of one method on one model at one α.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub model: String,
    pub d: usize,
    pub method: Method,
    pub alpha: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rmse: Option<f64>,
    pub mean_abs_error: Option<f64>,
    /// Sample standard deviation of log Ẑ across replications.
    pub sd_log_z: Option<f64>,
    pub mean_time_s: f64,
    pub rmse_x_time: Option<f64>,
    /// `ok`, `no_exact` when the model has no exact evidence, or `no_results`.
    pub status: String,
}

/// Groups by (model, d, method, α) in that order.
pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, Method, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.model.clone(), r.d, r.method, r.alpha.to_bits())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((model, d, method, alpha), rs)| {
            let ok: Vec<&&ResultRow> = rs.iter().filter(|r| r.is_ok()).collect();
            let n_ok = ok.len();
            let mean_time_s = if rs.is_empty() { 0.0 } else { rs.iter().map(|r| r.wall_time_s).sum::<f64>() / rs.len() as f64 };
            let errors: Vec<f64> = ok.iter().filter_map(|r| r.abs_error).collect();
            let logs: Vec<f64> = ok.iter().filter_map(|r| r.log_z_hat).collect();
            let sd_log_z = (logs.len() >= 2).then(|| {
                let m = logs.iter().sum::<f64>() / logs.len() as f64;
                (logs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (logs.len() - 1) as f64).sqrt()
            });
            let (rmse, mean_abs_error, status) = if n_ok == 0 {
                (None, None, "no_results")
            } else if errors.len() < n_ok {
                (None, None, "no_exact")
            } else {
                let n = errors.len() as f64;
                let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
                (Some(rmse), Some(errors.iter().sum::<f64>() / n), "ok")
            };
            SummaryRow {
                model,
                d,
                method,
                alpha: f64::from_bits(alpha),
                n_ok,
                n_failed: rs.len() - n_ok,
                rmse,
                mean_abs_error,
                sd_log_z,
                mean_time_s,
                rmse_x_time: rmse.map(|r| r * mean_time_s),
                status: status.to_string(),
            }
        })
        .collect()
}

pub const SUMMARY_COLUMNS: [&str; 12] = [
    "model",
    "d",
    "method",
    "alpha",
    "n_ok",
    "n_failed",
    "rmse",
    "mean_abs_error",
    "sd_log_z",
    "mean_time_s",
    "rmse_x_time",
    "status",
];

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], mut w: W) -> Result<()> {
    writeln!(w, "# ecmle summary: {}", SUMMARY_COLUMNS.join(","))?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(SUMMARY_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.model.clone(),
            r.d.to_string(),
            r.method.to_string(),
            fmt_f64(r.alpha),
            r.n_ok.to_string(),
            r.n_failed.to_string(),
            opt(r.rmse),
            opt(r.mean_abs_error),
            opt(r.sd_log_z),
            fmt_f64(r.mean_time_s),
            opt(r.rmse_x_time),
            r.status.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
