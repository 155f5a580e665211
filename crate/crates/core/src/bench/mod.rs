//! Benchmark harness: manifests, center-in-box accuracy, reports.

mod ablation;
mod dataset;
mod report;
mod runner;
mod stats;

pub use self::ablation::{ablate_reground, ablation_csv, ablation_markdown, CropAblation, CropColumn};
pub use self::dataset::{
    application, check_dataset, dataset_digest, load_dataset, write_manifest, Application, DatasetError, Group,
    ManifestEntry, Platform, TaskRecord, UiType, APPLICATIONS,
};
pub use self::report::{
    aggregate, application_table, comparison_table, emit_report, format_percent, group_table, to_csv, to_json,
    to_markdown, Averaging, Counts, Report, ReportError, ReportFormat, ReportMeta, EMPTY_CELL,
};
pub use self::runner::{
    evaluate, results_from_jsonl, results_to_jsonl, run_benchmark, trace_file_name, ResultRecord, RunError,
    RunOptions,
};
pub use self::stats::{relative_area, target_size_stats, SizeBucket, SizeStats};

use crate::search::{Method, Searcher};

/// Report metadata for a run of `method` with `searcher` on `tasks`.
pub fn report_meta(method: Method, searcher: &Searcher, tasks: &[TaskRecord], averaging: Averaging) -> ReportMeta {
    let b = searcher.backends();
    ReportMeta {
        method: method.as_str().to_string(),
        variant: method.variant().map(|v| {
            serde_json::to_value(v)
                .ok()
                .and_then(|x| x.as_str().map(str::to_string))
                .unwrap_or_default()
        }),
        grounder: b.grounder.model().to_string(),
        planner: if method.needs_planner() {
            b.planner.as_ref().map(|p| p.model().to_string())
        } else {
            None
        },
        config_sha256: crate::search::config_digest(searcher.config()),
        dataset_sha256: dataset_digest(tasks),
        averaging,
    }
}
