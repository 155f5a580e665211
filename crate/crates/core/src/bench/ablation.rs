use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::dataset::TaskRecord;
use super::report::{format_percent, Counts, EMPTY_CELL};
use super::runner::{run_benchmark, ResultRecord, RunError, RunOptions};
use crate::search::{Method, SearchConfig, Searcher};

/// Accuracy of re-grounding at one crop size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropColumn {
    pub size: u32,
    pub counts: Counts,
}

/// Crop-size ablation for one grounder: one row, one column per size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropAblation {
    pub grounder: String,
    pub columns: Vec<CropColumn>,
}

impl CropAblation {
    /// Size with the highest accuracy; the first one on ties.
    pub fn argmax(&self) -> Option<u32> {
        let mut best: Option<(&CropColumn, Ratio<u64>)> = None;
        for c in &self.columns {
            let r = c.counts.ratio().unwrap_or_else(|| Ratio::from_integer(0));
            if best.is_none_or(|(_, b)| r > b) {
                best = Some((c, r));
            }
        }
        best.map(|(c, _)| c.size)
    }
}

/// Runs re-grounding once per crop size. Returns the table together with
/// every run's results.
pub fn ablate_reground(
    tasks: &[TaskRecord],
    image_root: &Path,
    searcher: &Searcher,
    sizes: &[u32],
    opts: &RunOptions,
) -> Result<(CropAblation, Vec<Vec<ResultRecord>>), RunError> {
    if sizes.is_empty() {
        return Err(RunError::Search(crate::search::SearchError::InvalidConfig(
            "no crop sizes given".into(),
        )));
    }
    let mut columns = Vec::new();
    let mut runs = Vec::new();
    for &size in sizes {
        let cfg = SearchConfig {
            crop_size: size as f64,
            ..searcher.config().clone()
        };
        let mut s = Searcher::new(searcher.backends().clone(), cfg)?;
        if !searcher.timing() {
            s = s.deterministic();
        }
        let mut o = opts.clone();
        if let Some(dir) = &opts.trace_dir {
            o.trace_dir = Some(dir.join(format!("crop_{}", size)));
        }
        let results = run_benchmark(tasks, image_root, Method::Reground, &s, &o)?;
        let mut counts = Counts::default();
        for r in &results {
            counts.add(r.correct);
        }
        columns.push(CropColumn { size, counts });
        runs.push(results);
    }
    Ok((
        CropAblation {
            grounder: searcher.backends().grounder.model().to_string(),
            columns,
        },
        runs,
    ))
}

fn shown(c: &Counts) -> String {
    c.ratio().map(format_percent).unwrap_or_else(|| EMPTY_CELL.to_string())
}

/// Markdown table with a "Crop Size" header and one row per ablation.
pub fn ablation_markdown(rows: &[&CropAblation]) -> String {
    let sizes: Vec<u32> = rows.first().map(|r| r.columns.iter().map(|c| c.size).collect()).unwrap_or_default();
    let mut out = String::from("| Crop Size |");
    for s in &sizes {
        out.push_str(&format!(" {} × {} |", s, s));
    }
    out.push_str("\n|---|");
    out.push_str(&"---|".repeat(sizes.len()));
    out.push('\n');
    for r in rows {
        out.push_str(&format!("| {} |", r.grounder));
        for c in &r.columns {
            out.push_str(&format!(" {} |", shown(&c.counts)));
        }
        out.push('\n');
    }
    out
}

pub fn ablation_csv(rows: &[&CropAblation]) -> String {
    let mut out = String::from("grounder,crop_size,correct,total,accuracy\n");
    for r in rows {
        for c in &r.columns {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.grounder,
                c.size,
                c.counts.correct,
                c.counts.total,
                shown(&c.counts)
            ));
        }
    }
    out
}
