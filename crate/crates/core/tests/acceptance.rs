//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seeker_core::backends::{
    parse_prediction, Cassette, CassetteMode, GroupPick, ImagePayload, OutputConvention, ReplySpec, Script,
    ScriptEntry, ScriptPurpose, ViewportMatch,
};
use seeker_core::bench::{
    ablate_reground, aggregate, check_dataset, load_dataset, report_meta, results_to_jsonl, run_benchmark,
    to_markdown, Averaging, DatasetError, RunOptions,
};
use seeker_core::fixtures::{self, explorer};
use seeker_core::geometry::{iou, nms, score_candidate, score_point_in_candidate};
use seeker_core::planner::{parse_position_inference, render_check_prompt, render_position_prompt, Verdict};
use seeker_core::search::{quadrants, Action, Method, SearchConfig, SearchTask, SearchTrace, Searcher, Termination};
use seeker_core::{PixelBox, Point, ScoreConfig};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {:?}, limit {:?}", elapsed, limit))
}

fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> PixelBox {
    PixelBox::new(x1, y1, x2, y2).unwrap()
}

fn centrality_scalars() -> Check {
    let start = Instant::now();
    let cfg = ScoreConfig::default();
    let cand = bx(100.0, 200.0, 500.0, 400.0);
    let center = score_point_in_candidate(&cand, Point::new(300.0, 300.0), &cfg).map_err(|e| e.to_string())?;
    ensure(center == 1.0, || format!("center score {}", center))?;
    let corner = score_point_in_candidate(&cand, Point::new(500.0, 400.0), &cfg).map_err(|e| e.to_string())?;
    ensure((corner - 0.062176).abs() <= 1e-6, || format!("corner score {}", corner))?;
    let outside = score_point_in_candidate(&cand, Point::new(500.5, 300.0), &cfg).map_err(|e| e.to_string())?;
    ensure(outside == 0.0, || format!("outside score {}", outside))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("center 1.0, corner {:.6}, outside 0", corner))
}

fn scale_translation_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = ScoreConfig::default();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (x, y) = (rng.gen_range(0.0..3000.0), rng.gen_range(0.0..2000.0));
        let (w, h) = (rng.gen_range(1.0..1500.0), rng.gen_range(1.0..1500.0));
        let cand = bx(x, y, x + w, y + h);
        let v = Point::new(rng.gen_range(x - 0.2 * w..x + 1.2 * w), rng.gen_range(y - 0.2 * h..y + 1.2 * h));
        let voter = bx(v.x - 5.0, v.y - 5.0, v.x + 5.0, v.y + 5.0);
        let s = rng.gen_range(0.1..10.0);
        let (tx, ty) = (rng.gen_range(-5000.0..5000.0), rng.gen_range(-5000.0..5000.0));
        let a = score_candidate(&cand, &[voter], &cfg).map_err(|e| e.to_string())?;
        let b = score_candidate(&cand.scale_translate(s, tx, ty), &[voter.scale_translate(s, tx, ty)], &cfg)
            .map_err(|e| e.to_string())?;
        // A voter on the closed boundary may move across it by rounding; skip
        // only those exact-boundary cases.
        let on_edge = v.x == cand.x1() || v.x == cand.x2() || v.y == cand.y1() || v.y == cand.y2();
        if !on_edge {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max difference {:e}", worst))?;
    Ok(format!("1000 triples, max difference {:e}", worst))
}

fn nms_properties() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = 0.5;
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..30);
        let set: Vec<(PixelBox, f64)> = (0..n)
            .map(|_| {
                let (x, y) = (rng.gen_range(0.0..800.0), rng.gen_range(0.0..800.0));
                let (w, h) = (rng.gen_range(1.0..300.0), rng.gen_range(1.0..300.0));
                (bx(x, y, x + w, y + h), (rng.gen_range(0..20) as f64) / 4.0)
            })
            .collect();
        let kept = nms(&set, t);
        if nms(&kept, t) != kept {
            violations += 1;
        }
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                if iou(&kept[i].0, &kept[j].0) > t {
                    violations += 1;
                }
            }
        }
        let top = set.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
        let first_top = set.iter().find(|s| s.1 == top).unwrap();
        if kept.first() != Some(first_top) {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{} violations", violations))?;
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok("1000 sets, 0 violations".into())
}

const PROSE: [&str; 8] = [
    "The target is located at",
    "I think the answer is",
    "Click here:",
    "coordinates",
    "Sure!",
    "the button",
    "final answer",
    "located in the toolbar",
];

fn prose(rng: &mut ChaCha8Rng) -> String {
    (0..rng.gen_range(0..4)).map(|_| PROSE[rng.gen_range(0..PROSE.len())]).collect::<Vec<_>>().join(" ")
}

fn parse_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut failures = Vec::new();
    for conv in OutputConvention::ALL {
        for _ in 0..500 {
            let (w, h) = (rng.gen_range(200u32..4000), rng.gen_range(200u32..3000));
            // Raw model numbers: whole pixels, 4-decimal fractions or integers in 0..=1000.
            let mut draw = |dim: u32| -> (String, f64) {
                match conv {
                    OutputConvention::PointAbsolute | OutputConvention::BoxAbsolute => {
                        let v = rng.gen_range(0..=dim);
                        (v.to_string(), v as f64)
                    }
                    OutputConvention::PointNormalizedUnit | OutputConvention::BoxNormalizedUnit => {
                        let v = rng.gen_range(0..=10000u32);
                        (format!("{}.{:04}", v / 10000, v % 10000), v as f64 / 10000.0 * dim as f64)
                    }
                    _ => {
                        let v = rng.gen_range(0..=1000u32);
                        (v.to_string(), v as f64 * dim as f64 / 1000.0)
                    }
                }
            };
            let (text, expected) = if conv.is_box() {
                let (a, ax) = draw(w);
                let (b, ay) = draw(h);
                let (c, bx_) = draw(w);
                let (d, by) = draw(h);
                let (x1, x2) = if ax <= bx_ { (a, c) } else { (c, a) };
                let (y1, y2) = if ay <= by { (b, d) } else { (d, b) };
                (
                    format!("[{}, {}, {}, {}]", x1, y1, x2, y2),
                    Point::new((ax + bx_) / 2.0, (ay + by) / 2.0),
                )
            } else {
                let (a, x) = draw(w);
                let (b, y) = draw(h);
                let wrapped = if rng.gen_bool(0.5) { format!("({}, {})", a, b) } else { format!("[{},{}]", a, b) };
                (wrapped, Point::new(x, y))
            };
            let reply = format!("{} {} {}", prose(&mut rng), text, prose(&mut rng));
            match parse_prediction(&reply, conv, (w, h), GroupPick::First) {
                Ok(p) if (p.point.x - expected.x).abs() <= 1e-6 && (p.point.y - expected.y).abs() <= 1e-6 => {}
                other => failures.push(format!("{}: `{}` -> {:?}, want {:?}", conv.as_str(), reply, other, expected)),
            }
        }
    }
    ensure(failures.is_empty(), || format!("{} failures, first: {}", failures.len(), failures[0]))?;
    Ok("6 conventions x 500 replies".into())
}

fn prompt_goldens() -> Check {
    let pos = render_position_prompt("Refresh the file explorer").map_err(|e| e.to_string())?;
    ensure(pos == include_str!("golden/position_inference_refresh.txt"), || "position prompt differs".into())?;
    let chk = render_check_prompt("Refresh the file explorer").map_err(|e| e.to_string())?;
    ensure(chk == include_str!("golden/result_check_refresh.txt"), || "check prompt differs".into())?;
    let example = pos
        .lines()
        .skip_while(|l| *l != "Example Output:")
        .nth(1)
        .ok_or("no example output in prompt")?;
    let p = parse_position_inference(example);
    ensure(
        p.elements == ["shortcut link"]
            && p.areas == ["Settings window", "tools panel"]
            && p.neighbors == ["Search button"],
        || format!("example parsed as {:?}", p),
    )?;
    Ok("both prompts byte-identical; example output parsed".into())
}

fn run(s: &Searcher, method: Method, image: &ImagePayload) -> Result<SearchTrace, String> {
    s.run(
        method,
        &SearchTask {
            id: explorer::TASK_ID,
            instruction: explorer::INSTRUCTION,
            image,
            image_ref: None,
        },
    )
    .map_err(|e| e.to_string())
}

fn explorer_scenario(dir: &Path) -> Check {
    let image = explorer::payload();
    let path = dir.join("explorer_cassette.jsonl");
    {
        let cassette = Arc::new(Cassette::open(&path, CassetteMode::Record).map_err(|e| e.to_string())?);
        let s = Searcher::new(fixtures::cassette_backends(explorer::script(), cassette), SearchConfig::default())
            .map_err(|e| e.to_string())?
            .deterministic();
        run(&s, Method::Seeker, &image)?;
        run(&s, Method::Reground, &image)?;
    }
    let start = Instant::now();
    let cassette = Arc::new(Cassette::open(&path, CassetteMode::Replay).map_err(|e| e.to_string())?);
    let s = Searcher::new(fixtures::cassette_backends(Script::default(), cassette), SearchConfig::default())
        .map_err(|e| e.to_string())?
        .deterministic();
    let seek = run(&s, Method::Seeker, &image)?;
    let reground = run(&s, Method::Reground, &image)?;
    let elapsed = start.elapsed();

    let gt = explorer::delete_button();
    let p = seek.final_prediction();
    ensure(gt.contains_point(p), || format!("seeker predicted {:?}, outside {:?}", p, gt))?;
    ensure(seek.termination() == Termination::Verified, || format!("termination {:?}", seek.termination()))?;
    ensure(seek.max_depth() <= 3, || format!("depth {}", seek.max_depth()))?;
    let descents: Vec<PixelBox> = seek.steps_of(Action::Descend).map(|s| s.payload.boxes[0]).collect();
    let window = explorer::explorer_window().center();
    let bar = explorer::action_bar().center();
    let order_ok = descents.len() >= 2 && descents[0].contains_point(window) && descents[1].contains_point(bar);
    ensure(order_ok, || format!("descents {:?}", descents))?;
    let verdicts: Vec<Option<Verdict>> = seek.steps_of(Action::Verify).map(|s| s.payload.verdict).collect();
    ensure(
        verdicts == [Some(Verdict::TargetElsewhere), Some(Verdict::IsTarget)],
        || format!("verdicts {:?}", verdicts),
    )?;
    let rp = reground.final_prediction();
    ensure(!gt.contains_point(rp), || format!("reground predicted {:?}, inside gt", rp))?;
    within(elapsed, Duration::from_secs(2))?;
    Ok(format!(
        "seeker ({}, {}) verified at depth {}; reground ({}, {}) outside gt; replay {:?}",
        p.x,
        p.y,
        seek.max_depth(),
        rp.x,
        rp.y,
        elapsed
    ))
}

/// Table header rows (everything up to and including the bold sub-header) of
/// every table in a markdown report, plus the column count of its data rows.
fn table_shape(md: &str) -> Vec<String> {
    let mut shape = Vec::new();
    for line in md.lines().filter(|l| l.starts_with('|')) {
        if line.starts_with("| Method") || line.starts_with("|---") || line.starts_with("|  | **") {
            shape.push(line.to_string());
        } else {
            shape.push(format!("data row with {} cells", line.matches('|').count() - 1));
        }
    }
    shape
}

fn synthetic_determinism(dir: &Path) -> Check {
    let fx = fixtures::synthetic_benchmark(&dir.join("synthetic"), 50, 2024).map_err(|e| e.to_string())?;
    let s = Searcher::new(fx.backends(), SearchConfig::default())
        .map_err(|e| e.to_string())?
        .deterministic();
    let mut outputs = Vec::new();
    let mut report = None;
    for concurrency in [1, 4] {
        let opts = RunOptions {
            concurrency,
            trace_dir: None,
        };
        let results = run_benchmark(&fx.tasks, &fx.image_root, Method::Seeker, &s, &opts).map_err(|e| e.to_string())?;
        let meta = report_meta(Method::Seeker, &s, &fx.tasks, Averaging::Micro);
        let r = aggregate(&results, &fx.tasks, meta).map_err(|e| e.to_string())?;
        outputs.push((results_to_jsonl(&results), to_markdown(&r)));
        report = Some(r);
    }
    ensure(outputs[0] == outputs[1], || "runs differ".into())?;
    let r = report.unwrap();
    let pooled = r
        .applications
        .iter()
        .fold((0, 0), |(c, t), a| (c + a.counts.correct, t + a.counts.total));
    let by_group = r.groups.iter().fold((0, 0), |(c, t), g| (c + g.all().correct, t + g.all().total));
    let overall = (r.overall().correct, r.overall().total);
    ensure(pooled == overall && by_group == overall && overall.1 == 50, || {
        format!("apps {:?}, groups {:?}, overall {:?}", pooled, by_group, overall)
    })?;
    let golden = include_str!("golden/report_fixed.md");
    let (a, b) = (table_shape(&outputs[0].1), table_shape(golden));
    ensure(a == b, || "report tables differ in shape from the golden report".into())?;
    let (t, i, avg) = r.overall_triple();
    Ok(format!("2 identical runs; overall text {} icon {} avg {} ({}/{})", t, i, avg, overall.0, overall.1))
}

fn crop_ablation(dir: &Path) -> Check {
    let fx = fixtures::crop_ablation(&dir.join("ablation"), 16, 77).map_err(|e| e.to_string())?;
    let s = Searcher::new(fx.backends(), SearchConfig::default())
        .map_err(|e| e.to_string())?
        .deterministic();
    let sizes = [512, 768, 1024, 1280];
    let (table, _) =
        ablate_reground(&fx.tasks, &fx.image_root, &s, &sizes, &RunOptions::default()).map_err(|e| e.to_string())?;
    let md = seeker_core::bench::ablation_markdown(&[&table]);
    let header = md.lines().next().unwrap_or_default();
    ensure(header.matches('|').count() == 6 && table.columns.len() == 4, || format!("header `{}`", header))?;
    ensure(table.argmax() == Some(1024), || format!("argmax {:?}", table.argmax()))?;
    let row = md.lines().nth(2).unwrap_or_default().to_string();
    Ok(format!("argmax 1024; {}", row))
}

fn pointing_at(p: Point) -> Script {
    Script {
        entries: vec![ScriptEntry {
            purpose: ScriptPurpose::Ground,
            instruction: Some("x".into()),
            viewport: ViewportMatch::Any,
            reply: ReplySpec::GlobalPoint(p),
        }],
        ..Default::default()
    }
}

fn baseline_geometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let image = ImagePayload::from_image(RgbImage::new(2000, 1000)).map_err(|e| e.to_string())?;
    let full = bx(0.0, 0.0, 2000.0, 1000.0);
    let mut violations = Vec::new();
    for _ in 0..200 {
        let p = Point::new(rng.gen_range(0..=2000) as f64, rng.gen_range(0..=1000) as f64);
        let s = Searcher::new(fixtures::scripted_backends(pointing_at(p)), SearchConfig::default())
            .map_err(|e| e.to_string())?
            .deterministic();
        let task = SearchTask {
            id: "g",
            instruction: "x",
            image: &image,
            image_ref: None,
        };
        let zoom = s.run(Method::Zoom, &task).map_err(|e| e.to_string())?;
        let vps: Vec<PixelBox> = zoom.steps_of(Action::DirectGround).map(|s| s.viewport).collect();
        if vps.len() != 3 || vps[0] != full {
            violations.push(format!("zoom at {:?}: {} patches", p, vps.len()));
        }
        for w in vps.windows(2) {
            if !quadrants(&w[0]).contains(&w[1]) || !w[1].contains_point(p) {
                violations.push(format!("zoom at {:?}: {:?} is not a quadrant of {:?}", p, w[1], w[0]));
            }
        }
        let narrow = s.run(Method::Narrow, &task).map_err(|e| e.to_string())?;
        let vps: Vec<PixelBox> = narrow.steps_of(Action::DirectGround).map(|s| s.viewport).collect();
        if vps.len() != 3 {
            violations.push(format!("narrow at {:?}: {} patches", p, vps.len()));
        }
        for w in vps.windows(2) {
            let (parent, child) = (w[0], w[1]);
            let half = child.width() == (parent.width() / 2.0).floor() && child.height() == (parent.height() / 2.0).floor();
            let inside = parent.intersection(&child) == Some(child);
            let c = child.center();
            let centered_x = (c.x - p.x).abs() <= 0.5 || child.x1() == parent.x1() || child.x2() == parent.x2();
            let centered_y = (c.y - p.y).abs() <= 0.5 || child.y1() == parent.y1() || child.y2() == parent.y2();
            if !(half && inside && centered_x && centered_y) {
                violations.push(format!("narrow at {:?}: {:?} inside {:?}", p, child, parent));
            }
        }
        for t in [&zoom, &narrow] {
            if t.final_prediction() != p {
                violations.push(format!("final {:?} != {:?}", t.final_prediction(), p));
            }
        }
    }
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok("200 positions, 3 iterations each, 0 violations".into())
}

const EXAMPLE_RECORD: &str = r#"{"id":"vscode_001","img":"vscode/001.png","bbox":[473,183,503,219],"ui_type":"icon","application":"VSC","group":"Development","platform":"macos","instruction":"Refresh the file explorer."}"#;

fn dataset_validator(dir: &Path) -> Check {
    let root = dir.join("dataset");
    std::fs::create_dir_all(root.join("vscode")).map_err(|e| e.to_string())?;
    RgbImage::new(1280, 800).save(root.join("vscode/001.png")).map_err(|e| e.to_string())?;
    let manifest = root.join("manifest.jsonl");
    let write = |lines: &[String]| std::fs::write(&manifest, lines.join("\n") + "\n").map_err(|e| e.to_string());

    write(&[EXAMPLE_RECORD.to_string()])?;
    let tasks = load_dataset(&manifest, &root).map_err(|e| e.to_string())?;
    ensure(tasks.len() == 1 && tasks[0].bbox == bx(473.0, 183.0, 503.0, 219.0), || format!("{:?}", tasks))?;

    write(&[EXAMPLE_RECORD.replace("[473,183,503,219]", "[503,183,473,219]")])?;
    let inverted = load_dataset(&manifest, &root);
    ensure(matches!(inverted, Err(DatasetError::Schema { .. })), || format!("inverted: {:?}", inverted))?;

    write(&[EXAMPLE_RECORD.to_string(), EXAMPLE_RECORD.to_string()])?;
    let dup = load_dataset(&manifest, &root);
    ensure(matches!(dup, Err(DatasetError::DuplicateId { .. })), || format!("duplicate: {:?}", dup))?;

    write(&[EXAMPLE_RECORD.replace("vscode/001.png", "vscode/404.png")])?;
    let (_, errors) = check_dataset(&manifest, &root);
    ensure(matches!(errors.as_slice(), [DatasetError::MissingImage { .. }]), || format!("missing: {:?}", errors))?;
    Ok("example loads; inverted, duplicate and missing-image variants rejected".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Check>)> = vec![
        ("AC-01", "centrality score scalars", Box::new(centrality_scalars)),
        ("AC-02", "scale-translation invariance", Box::new(scale_translation_invariance)),
        ("AC-03", "NMS properties", Box::new(nms_properties)),
        ("AC-04", "prediction parse round-trip", Box::new(parse_round_trip)),
        ("AC-05", "prompt goldens", Box::new(prompt_goldens)),
        ("AC-06", "explorer delete-button scenario", Box::new(|| explorer_scenario(d))),
        ("AC-07", "synthetic benchmark determinism", Box::new(|| synthetic_determinism(d))),
        ("AC-08", "re-grounding crop ablation", Box::new(|| crop_ablation(d))),
        ("AC-09", "baseline patch geometry", Box::new(baseline_geometry)),
        ("AC-10", "dataset validator", Box::new(|| dataset_validator(d))),
    ];
    let mut failed = 0;
    for (id, name, check) in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".into()));
        let ms = start.elapsed().as_millis();
        match outcome {
            Ok(detail) => println!("PASS {} {}: {} [{} ms]", id, name, detail, ms),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {}: {} [{} ms]", id, name, detail, ms);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
