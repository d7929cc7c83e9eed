//! The compression report: one row per variant with coefficient counts,
//! compression ratios, per-seed scores, and scores relative to the dense
//! baseline.

use crate::error::{HarnessError, Result};
use crate::run::RunSummary;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct VariantRow {
    pub variant: String,
    pub params_total: usize,
    pub head_params: usize,
    pub head_compression_ratio: f64,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
    pub steps_to_half_return: Vec<Option<usize>>,
    pub mean: f64,
    pub stddev: f64,
    /// Mean score over the dense baseline's mean, when a `dense` variant is
    /// present.
    pub relative_to_dense: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportTable {
    pub rows: Vec<VariantRow>,
    /// Run directories that could not be read, listed rather than fatal.
    pub missing: Vec<String>,
}

/// Collects summaries from finished run directories and groups them by
/// variant. Unreadable directories are listed in `missing` and the partial
/// table is still produced.
pub fn collect_report(run_dirs: &[std::path::PathBuf]) -> Result<ReportTable> {
    let mut by_variant: BTreeMap<String, Vec<RunSummary>> = BTreeMap::new();
    let mut missing = Vec::new();
    for dir in run_dirs {
        let path = dir.join("summary.json");
        match std::fs::read_to_string(&path)
            .map_err(HarnessError::from)
            .and_then(|raw| serde_json::from_str::<RunSummary>(&raw).map_err(HarnessError::from))
        {
            Ok(summary) => by_variant.entry(summary.variant.clone()).or_default().push(summary),
            Err(e) => missing.push(format!("{}: {e}", dir.display())),
        }
    }

    let mut rows: Vec<VariantRow> = Vec::new();
    for (variant, mut runs) in by_variant {
        runs.sort_by_key(|r| r.seed);
        let scores: Vec<f64> = runs.iter().map(|r| r.headline).collect();
        let mean = scores.iter().sum::<f64>() / scores.len() as f64;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scores.len() as f64;
        rows.push(VariantRow {
            variant,
            params_total: runs[0].params_total,
            head_params: runs[0].head_params,
            head_compression_ratio: runs[0].head_compression_ratio,
            seeds: runs.iter().map(|r| r.seed).collect(),
            scores,
            steps_to_half_return: runs.iter().map(|r| r.steps_to_half_return).collect(),
            mean,
            stddev: var.sqrt(),
        relative_to_dense: None,
        });
    }
    let dense_mean = rows.iter().find(|r| r.variant == "dense").map(|r| r.mean);
    if let Some(dense) = dense_mean {
        for row in &mut rows {
            row.relative_to_dense = Some(row.mean / dense);
        }
    }
    Ok(ReportTable { rows, missing })
}

/// Writes the table as CSV: per-variant rows, then a final relative-score
/// row normalizing each variant by the dense baseline.
pub fn write_report_csv(table: &ReportTable, out: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(out)?);
    writeln!(
        f,
        "variant,params_total,head_params,head_compression_ratio,seeds,scores,score_mean,score_stddev,steps_to_half_return"
    )?;
    for r in &table.rows {
        let seeds = join(&r.seeds, ";");
        let scores = join(&r.scores, ";");
        let halves = r
            .steps_to_half_return
            .iter()
            .map(|s| s.map_or("never".to_string(), |v| v.to_string()))
            .collect::<Vec<_>>()
            .join(";");
        writeln!(
            f,
            "{},{},{},{:.4},{},{},{},{},{}",
            r.variant,
            r.params_total,
            r.head_params,
            r.head_compression_ratio,
            seeds,
            scores,
            r.mean,
            r.stddev,
            halves
        )?;
    }
    // final row: scores normalized by the dense baseline
    let rel = table
        .rows
        .iter()
        .map(|r| match r.relative_to_dense {
            Some(v) => format!("{}={:.1}%", r.variant, 100.0 * v),
            None => format!("{}=n/a", r.variant),
        })
        .collect::<Vec<_>>()
        .join(";");
    writeln!(f, "relative_vs_dense,,,,,{rel},,,")?;
    for m in &table.missing {
        writeln!(f, "# missing: {m}")?;
    }
    f.flush()?;
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T], sep: &str) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(sep)
}
