//! Report files: JSON for machines, CSV tables for plotting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::experiment::{ExperimentReport, Metrics, StructureRow};
use crate::error::Result;

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn metric_cells(m: Option<Metrics>) -> [String; 2] {
    [opt(m.and_then(|m| m.nmse)), opt(m.map(|m| m.mse))]
}

/// One row per horizon.
pub fn metrics_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(
        "horizon,belpm_nmse,belpm_mse,flp_nmse,flp_mse,slp_nmse,slp_mse,wknn_k,wknn_nmse,wknn_mse,error\n",
    );
    for r in &report.results {
        let [bn, bm] = metric_cells(r.belpm);
        let [fnm, fm] = metric_cells(r.flp);
        let [sn, sm] = metric_cells(r.slp);
        let [wn, wm] = metric_cells(r.wknn);
        let k = r.wknn_k.map(|k| k.to_string()).unwrap_or_default();
        let err = r
            .errors
            .iter()
            .map(|e| format!("{}: {}", e.stage, e.message).replace([',', '\n'], ";"))
            .collect::<Vec<_>>()
            .join(" | ");
        let _ = writeln!(out, "{},{bn},{bm},{fnm},{fm},{sn},{sm},{k},{wn},{wm},{err}", r.horizon);
    }
    out
}

/// One row per structure of a comparison sweep, headline metrics of the first horizon.
pub fn structures_csv(rows: &[StructureRow]) -> String {
    let mut out = String::from("k_a,k_o,belpm_nmse,wknn_nmse,error\n");
    for row in rows {
        let wknn = row.report.as_ref().and_then(|r| r.results.first()?.wknn?.nmse);
        let err = row.error.as_deref().unwrap_or_default().replace([',', '\n'], ";");
        let _ = writeln!(out, "{},{},{},{},{err}", row.k_a, row.k_o, opt(row.nmse()), opt(wknn));
    }
    out
}

/// Writes `report.json`, `metrics.csv`, `timing.json`, one `history_h{h}.csv`
/// per trained horizon and, when kept, `predictions_h{h}.csv`.
pub fn write_report(report: &ExperimentReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json()?)?;
    fs::write(dir.join("metrics.csv"), metrics_csv(report))?;
    fs::write(dir.join("timing.json"), report.timing_json()?)?;
    for r in &report.results {
        if let Some(h) = &r.history {
            fs::write(dir.join(format!("history_h{}.csv", r.horizon)), h.to_csv())?;
        }
        if let (Some(p), Some(t)) = (&r.predictions, &r.targets) {
            let mut out = String::from("index,prediction,target\n");
            for (i, (p, t)) in p.iter().zip(t).enumerate() {
                let _ = writeln!(out, "{i},{p},{t}");
            }
            fs::write(dir.join(format!("predictions_h{}.csv", r.horizon)), out)?;
        }
    }
    Ok(())
}
