use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn seeker(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seeker"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "status {:?}\nstderr: {}", o.status, String::from_utf8_lossy(&o.stderr));
    o
}

fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    assert_eq!(actual, std::fs::read_to_string(&path).unwrap(), "{}", name);
}

fn fixture(kind: &str, dir: &Path, extra: &[&str]) {
    let mut args = vec!["fixture", kind, "--out", "fx"];
    args.extend_from_slice(extra);
    ok(seeker(&args, dir));
}

fn bench_run(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "bench",
        "run",
        "--config",
        "fx/config.toml",
        "--manifest",
        "fx/manifest.jsonl",
        "--images",
        "fx/images",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    seeker(&args, dir)
}

fn read(p: PathBuf) -> String {
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {}", p.display(), e))
}

#[test]
fn synthetic_run_matches_golden_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("synthetic", d, &["--tasks", "10", "--seed", "1"]);
    let o = ok(bench_run(d, "out", &["--traces"]));
    assert_eq!(stdout(&o), "60.0 100.0 80.0\n");
    golden("synthetic_report.md", &read(d.join("out/report.md")));
    for f in ["results.jsonl", "report.csv", "report.json", "run.json"] {
        assert!(d.join("out").join(f).exists(), "{}", f);
    }
    assert_eq!(std::fs::read_dir(d.join("out/traces")).unwrap().count(), 10);
}

#[test]
fn repeated_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("synthetic", d, &["--tasks", "8", "--seed", "4"]);
    ok(bench_run(d, "a", &["--concurrency", "1"]));
    ok(bench_run(d, "b", &["--concurrency", "4"]));
    for f in ["results.jsonl", "report.md", "report.csv", "report.json"] {
        assert_eq!(read(d.join("a").join(f)), read(d.join("b").join(f)), "{}", f);
    }
}

#[test]
fn cassette_replay_reproduces_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("synthetic", d, &["--tasks", "6", "--seed", "2"]);
    ok(bench_run(d, "rec", &["--cassette-mode", "record", "--cassette", "calls.jsonl"]));
    // Replay must not reach the scripted backend: point it at an empty script.
    std::fs::write(d.join("empty.json"), "{}").unwrap();
    ok(bench_run(
        d,
        "rep",
        &["--cassette-mode", "replay", "--cassette", "calls.jsonl", "--script", "empty.json"],
    ));
    assert_eq!(read(d.join("rec/results.jsonl")), read(d.join("rep/results.jsonl")));

    let missing = bench_run(d, "x", &["--cassette-mode", "replay", "--cassette", "absent.jsonl"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn variant_is_recorded_in_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("synthetic", d, &["--tasks", "4"]);
    ok(bench_run(d, "out", &["--variant", "no_neighbors"]));
    let run: serde_json::Value = serde_json::from_str(&read(d.join("out/run.json"))).unwrap();
    assert_eq!(run["resolved"]["method"], "seeker-no-neighbors");
    assert!(read(d.join("out/report.md")).contains("- variant: no_neighbors"));
    let o = bench_run(d, "bad", &["--method", "zoom", "--variant", "no_neighbors"]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_direct_script(d: &Path) {
    image::RgbImage::new(400, 300).save(d.join("shot.png")).unwrap();
    std::fs::write(
        d.join("script.json"),
        r#"{"entries": [{"purpose": "ground", "reply": {"global_point": [110, 205]}}]}"#,
    )
    .unwrap();
}

#[test]
fn ground_prints_prediction_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_direct_script(d);
    let o = ok(seeker(
        &[
            "ground", "--method", "direct", "--script", "script.json", "--image", "shot.png", "--instruction", "save",
            "--trace", "t.jsonl",
        ],
        d,
    ));
    assert_eq!(stdout(&o), "110 205\n");
    let trace = read(d.join("t.jsonl"));
    assert!(trace.lines().next().unwrap().contains("\"method\":\"direct\""));
    assert_eq!(trace.lines().count(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_direct_script(d);
    let ground = |extra: &[&str]| {
        let mut args = vec!["ground", "--image", "shot.png", "--instruction", "save"];
        args.extend_from_slice(extra);
        seeker(&args, d)
    };
    // No grounder configured.
    assert_eq!(ground(&["--method", "direct"]).status.code(), Some(2));
    // Planner-guided search without a planner.
    std::fs::write(d.join("g.toml"), "schema_version = 1\n[grounder]\nkind = \"scripted\"\nscript = \"script.json\"\n")
        .unwrap();
    assert_eq!(ground(&["--config", "g.toml"]).status.code(), Some(2));
    // Unsupported schema version.
    std::fs::write(d.join("v.toml"), "schema_version = 2\n").unwrap();
    assert_eq!(ground(&["--config", "v.toml", "--method", "direct"]).status.code(), Some(2));
    // Unreadable screenshot.
    let o = seeker(
        &["ground", "--method", "direct", "--script", "script.json", "--image", "none.png", "--instruction", "x"],
        d,
    );
    assert_eq!(o.status.code(), Some(2));
    // The backend has no reply at all: nothing on stdout, exit 3.
    std::fs::write(d.join("empty.json"), "{}").unwrap();
    let o = ground(&["--method", "direct", "--script", "empty.json"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(o.stdout.is_empty());
    // An invalid dataset fails validation.
    std::fs::write(d.join("m.jsonl"), "{\"id\": 1}\n").unwrap();
    let o = seeker(&["bench", "validate", "--manifest", "m.jsonl", "--images", "."], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn render_writes_one_image_per_visited_patch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("explorer", d, &[]);
    let o = ok(seeker(
        &[
            "ground",
            "--config",
            "fx/config.toml",
            "--image",
            "fx/images/explorer_delete.png",
            "--instruction",
            "delete file or folder",
            "--trace",
            "t.jsonl",
        ],
        d,
    ));
    assert_eq!(stdout(&o), "2120 45\n");
    ok(seeker(&["trace", "render", "--trace", "t.jsonl", "--out", "r"], d));
    let mut names: Vec<String> = std::fs::read_dir(d.join("r"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        ["index.md", "step_009_descend.png", "step_011_verify.png", "step_012_descend.png", "step_014_verify.png"]
    );
    // The final prediction is drawn in pure red on the last check image.
    let img = image::open(d.join("r/step_014_verify.png")).unwrap().to_rgb8();
    assert!(img.pixels().any(|p| p.0 == [255, 0, 0]));

    // A trace with only its header renders an index and no images.
    let header = read(d.join("t.jsonl")).lines().next().unwrap().to_string();
    std::fs::write(d.join("h.jsonl"), header + "\n").unwrap();
    ok(seeker(&["trace", "render", "--trace", "h.jsonl", "--out", "h"], d));
    let entries: Vec<_> = std::fs::read_dir(d.join("h")).unwrap().collect();
    assert_eq!(entries.len(), 1);
    assert!(d.join("h/index.md").exists());
}

#[test]
fn crop_ablation_table() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture("crop-ablation", d, &["--tasks", "8"]);
    let o = ok(seeker(
        &[
            "bench",
            "ablate-reground",
            "--config",
            "fx/config.toml",
            "--manifest",
            "fx/manifest.jsonl",
            "--images",
            "fx/images",
            "--out",
            "out",
            "--sizes",
            "512,1024",
        ],
        d,
    ));
    assert_eq!(
        stdout(&o),
        "| Crop Size | 512 × 512 | 1024 × 1024 |\n|---|---|---|\n| scripted-grounder | 0.0 | 100.0 |\n"
    );
    assert!(d.join("out/results_512.jsonl").exists());
    assert!(d.join("out/ablation.csv").exists());
}
