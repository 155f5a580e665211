use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::TaskRecord;
use crate::backends::ImagePayload;
use crate::geometry::{contains, round_half_away};
use crate::search::{Method, SearchError, SearchTask, SearchTrace, Searcher, Termination};
use crate::{PixelBox, Point};

/// Center-in-box correctness with closed boundaries.
pub fn evaluate(prediction: Point, gt: &PixelBox) -> bool {
    contains(gt, prediction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub task_id: String,
    pub method: Method,
    /// Predicted click point, rounded to whole pixels.
    pub prediction: [i64; 2],
    pub correct: bool,
    pub termination: Termination,
    pub planner_calls: u32,
    pub grounder_calls: u32,
    /// Seconds; zero in deterministic runs.
    pub wall_time: f64,
}

impl ResultRecord {
    pub fn prediction_point(&self) -> Point {
        Point::new(self.prediction[0] as f64, self.prediction[1] as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per CPU. Forced to 1 when a backend is
    /// order-dependent.
    pub concurrency: usize,
    /// Directory receiving one trace file per task.
    pub trace_dir: Option<PathBuf>,
}

/// File name used for a task's trace.
pub fn trace_file_name(task_id: &str) -> String {
    let safe: String = task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect();
    format!("{}.jsonl", safe)
}

fn record_for(task: &TaskRecord, method: Method, trace: &SearchTrace, wall_time: f64) -> ResultRecord {
    let p = trace.final_prediction();
    let rounded = Point::new(round_half_away(p.x), round_half_away(p.y));
    ResultRecord {
        task_id: task.id.clone(),
        method,
        prediction: [rounded.x as i64, rounded.y as i64],
        correct: evaluate(rounded, &task.bbox),
        termination: trace.termination(),
        planner_calls: trace.header.planner_calls,
        grounder_calls: trace.header.grounder_calls,
        wall_time,
    }
}

fn run_one(
    task: &TaskRecord,
    image_root: &Path,
    method: Method,
    searcher: &Searcher,
    trace_dir: Option<&Path>,
) -> Result<ResultRecord, RunError> {
    let start = Instant::now();
    let image = match ImagePayload::open(&task.image_path(image_root)) {
        Ok(i) => i,
        Err(_) => {
            // Unreadable screenshot: counted as a failed task at the image center.
            let c = Point::new(task.img_size[0] as f64 / 2.0, task.img_size[1] as f64 / 2.0);
            let c = Point::new(round_half_away(c.x), round_half_away(c.y));
            return Ok(ResultRecord {
                task_id: task.id.clone(),
                method,
                prediction: [c.x as i64, c.y as i64],
                correct: evaluate(c, &task.bbox),
                termination: Termination::FallbackParseFailure,
                planner_calls: 0,
                grounder_calls: 0,
                wall_time: 0.0,
            });
        }
    };
    let st = SearchTask {
        id: &task.id,
        instruction: &task.instruction,
        image: &image,
        image_ref: Some(&task.img),
    };
    let trace = searcher.run(method, &st)?;
    if let Some(dir) = trace_dir {
        std::fs::write(dir.join(trace_file_name(&task.id)), trace.to_jsonl())
            .map_err(|e| RunError::Io(format!("writing trace for {}: {}", task.id, e)))?;
    }
    let wall = if searcher.timing() { start.elapsed().as_secs_f64() } else { 0.0 };
    Ok(record_for(task, method, &trace, wall))
}

/// Runs `method` on every task. Model failures become incorrect rows; only
/// configuration problems abort the run. Results are sorted by task id.
pub fn run_benchmark(
    tasks: &[TaskRecord],
    image_root: &Path,
    method: Method,
    searcher: &Searcher,
    opts: &RunOptions,
) -> Result<Vec<ResultRecord>, RunError> {
    if method.needs_planner() && searcher.backends().planner.is_none() {
        return Err(RunError::Search(SearchError::MissingPlanner(method)));
    }
    if let Some(dir) = &opts.trace_dir {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {}", dir.display(), e)))?;
    }
    let threads = if searcher.backends().concurrent() { opts.concurrency } else { 1 };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let trace_dir = opts.trace_dir.as_deref();
    let mut results = if threads == 1 {
        tasks
            .iter()
            .map(|t| run_one(t, image_root, method, searcher, trace_dir))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        pool.install(|| {
            tasks
                .par_iter()
                .map(|t| run_one(t, image_root, method, searcher, trace_dir))
                .collect::<Result<Vec<_>, _>>()
        })?
    };
    results.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(results)
}

pub fn results_to_jsonl(results: &[ResultRecord]) -> String {
    let mut out = String::new();
    for r in results {
        out.push_str(&serde_json::to_string(r).expect("result serializes"));
        out.push('\n');
    }
    out
}

pub fn results_from_jsonl(text: &str) -> Result<Vec<ResultRecord>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {}", i + 1, e)))
        .collect()
}
