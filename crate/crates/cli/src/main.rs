//! `seeker`: ground one instruction, run benchmarks, render traces.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 bad configuration or input,
//! 3 a model backend failed and no prediction could be produced.

mod config;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use seeker_core::backends::ImagePayload;
use seeker_core::bench::{
    ablate_reground, ablation_csv, ablation_markdown, aggregate, check_dataset, dataset_digest, emit_report,
    load_dataset, report_meta, results_to_jsonl, run_benchmark, target_size_stats, Averaging, ReportFormat,
    RunOptions, TaskRecord,
};
use seeker_core::fixtures::{self, Fixture};
use seeker_core::geometry::round_half_away;
use seeker_core::search::{config_digest, Action, FailureKind, SearchTask, SearchTrace, Termination};

use config::{resolve, Overrides, Resolved};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Backend(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Backend(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {}", path.display(), e))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Parser)]
#[command(name = "seeker", version, about = "Planner-guided GUI grounding on high-resolution screenshots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ground one instruction on one screenshot and print "x y".
    Ground {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        instruction: String,
        /// Write the search trace (JSON lines) here.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Benchmark runs and dataset checks.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Search trace tools.
    Trace {
        #[command(subcommand)]
        command: TraceCommand,
    },
    /// Write a scripted test dataset with a matching config file.
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        tasks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct DatasetArgs {
    /// Task manifest, one JSON object per line.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory the manifest's image paths are relative to.
    #[arg(long)]
    images: PathBuf,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Run one method over a dataset and write results and reports.
    Run {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also write one trace per task under OUT/traces.
        #[arg(long)]
        traces: bool,
        /// micro (pooled counts) or macro (mean of cells).
        #[arg(long, default_value = "micro", value_parser = parse_averaging)]
        averaging: Averaging,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-grounding accuracy for several crop sizes.
    AblateReground {
        #[command(flatten)]
        data: DatasetArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "512,768,1024,1280")]
        sizes: Vec<u32>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a manifest and its images; print size statistics.
    Validate {
        #[command(flatten)]
        data: DatasetArgs,
    },
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Draw every visited patch of a trace.
    Render {
        #[arg(long)]
        trace: PathBuf,
        /// Directory the trace's screenshot path is relative to.
        #[arg(long, default_value = ".")]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum FixtureKind {
    Synthetic,
    Explorer,
    CropAblation,
}

fn parse_averaging(s: &str) -> Result<Averaging, String> {
    match s {
        "micro" => Ok(Averaging::Micro),
        "macro" => Ok(Averaging::Macro),
        _ => Err(format!("unknown averaging `{}` (expected micro or macro)", s)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(e.code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ground {
            image,
            instruction,
            trace,
            overrides,
        } => ground(&image, &instruction, trace.as_deref(), &overrides),
        Command::Bench { command } => match command {
            BenchCommand::Run {
                data,
                out,
                traces,
                averaging,
                overrides,
            } => bench_run(&data, &out, traces, averaging, &overrides),
            BenchCommand::AblateReground {
                data,
                out,
                sizes,
                overrides,
            } => bench_ablate(&data, &out, &sizes, &overrides),
            BenchCommand::Validate { data } => bench_validate(&data),
        },
        Command::Trace {
            command: TraceCommand::Render { trace, images, out },
        } => trace_render(&trace, &images, &out),
        Command::Fixture { kind, out, tasks, seed } => fixture(kind, &out, tasks, seed),
    }
}

/// A backend failure that left only the sentinel prediction.
fn backend_failure(trace: &SearchTrace) -> Option<String> {
    if trace.termination() != Termination::FallbackParseFailure {
        return None;
    }
    trace
        .steps_of(Action::Fallback)
        .find(|s| s.payload.failure == Some(FailureKind::Backend))
        .map(|s| s.payload.error.clone().unwrap_or_else(|| "backend failure".into()))
}

fn ground(image: &Path, instruction: &str, trace_path: Option<&Path>, o: &Overrides) -> Result<(), CliError> {
    let r = resolve(o)?;
    let searcher = r.searcher()?;
    let payload = ImagePayload::open(image).map_err(|e| CliError::Config(e.to_string()))?;
    let image_ref = image.to_string_lossy();
    let task = SearchTask {
        id: "cli",
        instruction,
        image: &payload,
        image_ref: Some(&image_ref),
    };
    let trace = searcher
        .run(r.method, &task)
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(path) = trace_path {
        write(path, trace.to_jsonl())?;
    }
    if let Some(err) = backend_failure(&trace) {
        return Err(CliError::Backend(err));
    }
    let p = trace.final_prediction();
    println!("{} {}", round_half_away(p.x), round_half_away(p.y));
    Ok(())
}

fn load_tasks(data: &DatasetArgs) -> Result<Vec<TaskRecord>, CliError> {
    load_dataset(&data.manifest, &data.images).map_err(|e| CliError::Config(e.to_string()))
}

/// Everything needed to reproduce a run. Holds no timestamps, so identical
/// runs write identical files.
#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'static str,
    manifest: &'a Path,
    images: &'a Path,
    dataset_sha256: String,
    config_sha256: String,
    tasks: usize,
    averaging: Averaging,
    resolved: &'a Resolved,
}

fn bench_run(data: &DatasetArgs, out: &Path, traces: bool, averaging: Averaging, o: &Overrides) -> Result<(), CliError> {
    let r = resolve(o)?;
    let tasks = load_tasks(data)?;
    let searcher = r.searcher()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let opts = RunOptions {
        concurrency: r.concurrency,
        trace_dir: traces.then(|| out.join("traces")),
    };
    let results =
        run_benchmark(&tasks, &data.images, r.method, &searcher, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    let meta = report_meta(r.method, &searcher, &tasks, averaging);
    let report = aggregate(&results, &tasks, meta).map_err(|e| CliError::Config(e.to_string()))?;

    write(&out.join("results.jsonl"), results_to_jsonl(&results))?;
    for f in ReportFormat::ALL {
        write(&out.join(format!("report.{}", f.extension())), emit_report(&report, f))?;
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        manifest: &data.manifest,
        images: &data.images,
        dataset_sha256: dataset_digest(&tasks),
        config_sha256: config_digest(&r.search),
        tasks: tasks.len(),
        averaging,
        resolved: &r,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("run manifest serializes");
    write(&out.join("run.json"), json + "\n")?;

    let (text, icon, avg) = report.overall_triple();
    println!("{} {} {}", text, icon, avg);
    Ok(())
}

fn bench_ablate(data: &DatasetArgs, out: &Path, sizes: &[u32], o: &Overrides) -> Result<(), CliError> {
    let r = resolve(o)?;
    let tasks = load_tasks(data)?;
    let searcher = r.searcher()?;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let opts = RunOptions {
        concurrency: r.concurrency,
        trace_dir: None,
    };
    let (table, runs) =
        ablate_reground(&tasks, &data.images, &searcher, sizes, &opts).map_err(|e| CliError::Config(e.to_string()))?;
    for (size, results) in sizes.iter().zip(&runs) {
        write(&out.join(format!("results_{}.jsonl", size)), results_to_jsonl(results))?;
    }
    let md = ablation_markdown(&[&table]);
    write(&out.join("ablation.md"), &md)?;
    write(&out.join("ablation.csv"), ablation_csv(&[&table]))?;
    print!("{}", md);
    Ok(())
}

fn bench_validate(data: &DatasetArgs) -> Result<(), CliError> {
    let (tasks, errors) = check_dataset(&data.manifest, &data.images);
    for e in &errors {
        eprintln!("{}", e);
    }
    let stats = target_size_stats(&tasks);
    println!("valid tasks: {}", tasks.len());
    println!("invalid tasks: {}", errors.len());
    if !tasks.is_empty() {
        println!("relative target area, mean: {:.4}%", stats.mean_pct);
        println!("relative target area, median: {:.4}%", stats.median_pct);
        for b in &stats.histogram {
            println!("  [{}%, {}%): {}", b.lower_pct, b.upper_pct, b.count);
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{} invalid task(s)", errors.len())))
    }
}

fn trace_render(trace: &Path, images: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(trace).map_err(|e| CliError::Config(format!("{}: {}", trace.display(), e)))?;
    let parsed = SearchTrace::from_jsonl(&text).map_err(|e| CliError::Config(format!("{}: {}", trace.display(), e)))?;
    let written = render::render_trace(&parsed, images, out).map_err(io_err(out))?;
    println!("{}", out.join("index.md").display());
    eprintln!("{} image(s) written", written.len());
    Ok(())
}

fn config_toml(fx: &Fixture, dir: &Path, method: &str) -> String {
    let script = fx.script_path.strip_prefix(dir).unwrap_or(&fx.script_path);
    format!(
        "schema_version = {}\nmethod = \"{}\"\n\n[grounder]\nkind = \"scripted\"\nscript = \"{}\"\n\n[planner]\nkind = \"scripted\"\nscript = \"{}\"\n\n[run]\ndeterministic = true\n",
        config::SCHEMA_VERSION,
        method,
        script.display(),
        script.display()
    )
}

fn fixture(kind: FixtureKind, out: &Path, tasks: usize, seed: u64) -> Result<(), CliError> {
    let (fx, method) = match kind {
        FixtureKind::Synthetic => (fixtures::synthetic_benchmark(out, tasks, seed), "seeker"),
        FixtureKind::Explorer => (fixtures::explorer::write(out), "seeker"),
        FixtureKind::CropAblation => (fixtures::crop_ablation(out, tasks, seed), "reground"),
    };
    let fx = fx.map_err(io_err(out))?;
    let cfg = out.join("config.toml");
    write(&cfg, config_toml(&fx, out, method))?;
    println!("{}", cfg.display());
    eprintln!(
        "{} task(s); manifest {}, images {}",
        fx.tasks.len(),
        fx.manifest.display(),
        fx.image_root.display()
    );
    Ok(())
}
