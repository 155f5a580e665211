//! Small synthetic scenes with scripted models, for tests, demos and
//! offline benchmark runs.
//!
//! Every fixture is a set of flat-colored screenshots plus a [`Script`] that
//! both the grounder and the planner answer from. Nothing here needs a
//! network or a real model.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::backends::{
    Cassette, CassetteClient, ChatClient, Grounder, ImagePayload, NamedBox, OutputConvention, Planner, ReplySpec,
    SceneTask, Script, ScriptEntry, ScriptPurpose, ScriptedChat, ViewportMatch,
};
use crate::bench::{write_manifest, Group, Platform, TaskRecord, UiType, APPLICATIONS};
use crate::search::Backends;
use crate::{PixelBox, Point};

pub const SCRIPTED_GROUNDER: &str = "scripted-grounder";
pub const SCRIPTED_PLANNER: &str = "scripted-planner";

fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> PixelBox {
    PixelBox::new(x1, y1, x2, y2).expect("fixture box is valid")
}

/// Grounder and planner both backed by one scripted client.
pub fn scripted_backends(script: Script) -> Backends {
    let chat: Arc<dyn ChatClient> = Arc::new(ScriptedChat::new(script, OutputConvention::PointAbsolute));
    client_backends(chat)
}

/// Same as [`scripted_backends`], with every call going through `cassette`.
pub fn cassette_backends(script: Script, cassette: Arc<Cassette>) -> Backends {
    let inner: Arc<dyn ChatClient> = Arc::new(ScriptedChat::new(script, OutputConvention::PointAbsolute));
    client_backends(Arc::new(CassetteClient::new(inner, cassette)))
}

fn client_backends(chat: Arc<dyn ChatClient>) -> Backends {
    Backends::new(
        Grounder::new(chat.clone(), SCRIPTED_GROUNDER, OutputConvention::PointAbsolute),
        Some(Planner::new(chat, SCRIPTED_PLANNER)),
    )
}

fn fill(img: &mut RgbImage, b: &PixelBox, color: [u8; 3]) {
    let (w, h) = img.dimensions();
    let x1 = b.x1().max(0.0).floor() as u32;
    let y1 = b.y1().max(0.0).floor() as u32;
    let x2 = (b.x2().ceil() as u32).min(w);
    let y2 = (b.y2().ceil() as u32).min(h);
    for y in y1..y2 {
        for x in x1..x2 {
            img.put_pixel(x, y, Rgb(color));
        }
    }
}

/// File-explorer scene: the delete button sits in the top action bar, while a
/// file tab inside the Explorer window looks like a plausible answer.
pub mod explorer {
    use super::*;

    pub const WIDTH: u32 = 3840;
    pub const HEIGHT: u32 = 2160;
    pub const INSTRUCTION: &str = "delete file or folder";
    pub const TASK_ID: &str = "explorer_delete";

    pub fn explorer_window() -> PixelBox {
        bx(200.0, 600.0, 1200.0, 1500.0)
    }

    pub fn action_bar() -> PixelBox {
        bx(1700.0, 0.0, 2700.0, 90.0)
    }

    /// Ground-truth box of the delete button.
    pub fn delete_button() -> PixelBox {
        bx(2100.0, 25.0, 2140.0, 65.0)
    }

    /// File tab the unguided grounder points at.
    pub fn file_tab() -> Point {
        Point::new(360.0, 720.0)
    }

    pub fn image() -> RgbImage {
        let mut img = RgbImage::from_pixel(WIDTH, HEIGHT, Rgb([32, 34, 40]));
        fill(&mut img, &explorer_window(), [210, 214, 220]);
        fill(&mut img, &bx(220.0, 700.0, 500.0, 740.0), [90, 120, 200]);
        fill(&mut img, &action_bar(), [60, 64, 72]);
        fill(&mut img, &bx(1930.0, 25.0, 1970.0, 65.0), [120, 200, 120]);
        fill(&mut img, &delete_button(), [230, 80, 70]);
        img
    }

    pub fn payload() -> ImagePayload {
        ImagePayload::from_image(image()).expect("explorer image")
    }

    pub const POSITION_REPLY: &str = "The <element>delete button</element> is most likely in the \
<area>Explorer window</area>, in the <area>top action bar</area>, next to the <neighbor>Rename button</neighbor> \
and <neighbor>New folder button</neighbor>.";

    fn ground(instruction: &str, viewport: ViewportMatch, p: Point) -> ScriptEntry {
        ScriptEntry {
            purpose: ScriptPurpose::Ground,
            instruction: Some(instruction.into()),
            viewport,
            reply: ReplySpec::GlobalPoint(p),
        }
    }

    pub fn script() -> Script {
        let gt = delete_button().center();
        let full = bx(0.0, 0.0, WIDTH as f64, HEIGHT as f64);
        Script {
            entries: vec![
                ScriptEntry {
                    purpose: ScriptPurpose::PositionInference,
                    instruction: Some(INSTRUCTION.into()),
                    viewport: ViewportMatch::Any,
                    reply: ReplySpec::Text(POSITION_REPLY.into()),
                },
                ground("delete button", ViewportMatch::Any, file_tab()),
                ground("Explorer window", ViewportMatch::Any, Point::new(700.0, 1050.0)),
                ground("top action bar", ViewportMatch::Any, Point::new(2200.0, 45.0)),
                ground("Rename button", ViewportMatch::Any, Point::new(800.0, 1000.0)),
                ground("New folder button", ViewportMatch::Any, Point::new(1950.0, 45.0)),
                ground(INSTRUCTION, ViewportMatch::Exact(full), file_tab()),
                ground(INSTRUCTION, ViewportMatch::Contains(gt), gt),
                ground(INSTRUCTION, ViewportMatch::Any, file_tab()),
                ScriptEntry {
                    purpose: ScriptPurpose::ResultCheck,
                    instruction: Some(INSTRUCTION.into()),
                    viewport: ViewportMatch::Contains(gt),
                    reply: ReplySpec::Text(
                        "The red box frames the trash-can button in the toolbar.\n\
{\"result\": \"is_target\", \"new_instruction\": null}"
                            .into(),
                    ),
                },
                ScriptEntry {
                    purpose: ScriptPurpose::ResultCheck,
                    instruction: Some(INSTRUCTION.into()),
                    viewport: ViewportMatch::Any,
                    reply: ReplySpec::Text(
                        "The red box frames a file tab; the delete action is not here.\n\
{\"result\": \"target_elsewhere\", \"new_instruction\": null}"
                            .into(),
                    ),
                },
            ],
            ..Default::default()
        }
    }

    pub fn task() -> TaskRecord {
        TaskRecord {
            id: TASK_ID.into(),
            img: format!("{}.png", TASK_ID),
            img_size: [WIDTH, HEIGHT],
            instruction: INSTRUCTION.into(),
            instruction_secondary: None,
            bbox: delete_button(),
            ui_type: UiType::Icon,
            application: "Win".into(),
            group: Group::Os,
            platform: Platform::Windows,
        }
    }

    /// Writes the screenshot, a one-line manifest and the script to `dir`.
    pub fn write(dir: &Path) -> io::Result<Fixture> {
        let task = task();
        let mut images = vec![(task.img.clone(), image())];
        write_fixture(dir, vec![task], script(), &mut images)
    }
}

/// A fixture written to disk.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub tasks: Vec<TaskRecord>,
    pub script: Script,
    pub manifest: PathBuf,
    pub image_root: PathBuf,
    pub script_path: PathBuf,
}

impl Fixture {
    pub fn backends(&self) -> Backends {
        scripted_backends(self.script.clone())
    }
}

fn write_fixture(
    dir: &Path,
    tasks: Vec<TaskRecord>,
    script: Script,
    images: &mut [(String, RgbImage)],
) -> io::Result<Fixture> {
    let image_root = dir.join("images");
    std::fs::create_dir_all(&image_root)?;
    for (name, img) in images.iter() {
        img.save(image_root.join(name)).map_err(io::Error::other)?;
    }
    let manifest = dir.join("manifest.jsonl");
    write_manifest(&manifest, &tasks)?;
    let script_path = dir.join("script.json");
    let text = serde_json::to_string_pretty(&script).map_err(io::Error::other)?;
    std::fs::write(&script_path, text + "\n")?;
    Ok(Fixture {
        tasks,
        script,
        manifest,
        image_root,
        script_path,
    })
}

const NOUNS: [&str; 12] = [
    "export", "settings", "refresh", "bookmark", "undo", "layers", "filter", "zoom", "share", "search", "history",
    "help",
];
const VERBS: [&str; 4] = ["click the", "open the", "select the", "toggle the"];
const SIZES: [(u32, u32); 2] = [(1920, 1080), (2560, 1440)];

fn rand_box(rng: &mut ChaCha8Rng, w: f64, h: f64, bw: f64, bh: f64, margin: f64) -> PixelBox {
    let x = rng.gen_range(margin..(w - margin - bw)).round();
    let y = rng.gen_range(margin..(h - margin - bh)).round();
    bx(x, y, x + bw, y + bh)
}

fn color(rng: &mut ChaCha8Rng, lo: u8, hi: u8) -> [u8; 3] {
    [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)]
}

/// `n` tasks cycling through every application, with screenshots of
/// 1920×1080 or 2560×1440. Targets differ in how small a view the grounder
/// needs to resolve them, so methods that crop more aggressively solve more
/// of them.
pub fn synthetic_benchmark(dir: &Path, n: usize, seed: u64) -> io::Result<Fixture> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n);
    let mut scene = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for i in 0..n {
        let app = &APPLICATIONS[i % APPLICATIONS.len()];
        let (iw, ih) = SIZES[rng.gen_range(0..SIZES.len())];
        let (w, h) = (iw as f64, ih as f64);
        let ui_type = if i % 2 == 0 { UiType::Text } else { UiType::Icon };
        let (tw, th) = match ui_type {
            UiType::Text => (rng.gen_range(40.0..120.0f64).round(), rng.gen_range(14.0..28.0f64).round()),
            UiType::Icon => (rng.gen_range(14.0..40.0f64).round(), rng.gen_range(14.0..40.0f64).round()),
        };
        let target = rand_box(&mut rng, w, h, tw, th, 40.0);
        let area = bx(
            (target.x1() - rng.gen_range(80.0..500.0f64).round()).max(0.0),
            (target.y1() - rng.gen_range(60.0..300.0f64).round()).max(0.0),
            (target.x2() + rng.gen_range(80.0..500.0f64).round()).min(w),
            (target.y2() + rng.gen_range(60.0..300.0f64).round()).min(h),
        );
        let mut decoy = None;
        for _ in 0..20 {
            let dw = rng.gen_range(300.0..800.0f64).round();
            let dh = rng.gen_range(200.0..500.0f64).round();
            let d = rand_box(&mut rng, w, h, dw, dh, 0.0);
            if d.intersection(&target).is_none() {
                decoy = Some(d);
                break;
            }
        }
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let nx = target.center().x + side * rng.gen_range(60.0..160.0f64).round();
        let neighbor = bx(
            (nx - 20.0).clamp(0.0, w - 40.0),
            target.y1(),
            (nx + 20.0).clamp(40.0, w),
            target.y2(),
        );
        let lure = match decoy {
            Some(d) if rng.gen_bool(0.6) => d.center(),
            _ => loop {
                let p = Point::new(rng.gen_range(0.0..w).round(), rng.gen_range(0.0..h).round());
                if !area.contains_point(p) {
                    break p;
                }
            },
        };
        let max_resolvable = match rng.gen_range(0..100) {
            0..=29 => None,
            30..=74 => Some(1280.0),
            _ => Some(700.0),
        };

        let id = format!("syn_{:03}", i);
        let noun = NOUNS[rng.gen_range(0..NOUNS.len())];
        let kind = if ui_type == UiType::Text { "label" } else { "icon" };
        let element = format!("{} {} {}", noun, kind, i);
        let instruction = format!("{} {}", VERBS[rng.gen_range(0..VERBS.len())], element);
        let mut areas = vec![NamedBox {
            name: format!("{} panel {}", app.name, i),
            bbox: area,
        }];
        if let Some(d) = decoy {
            let named = NamedBox {
                name: format!("{} sidebar {}", app.name, i),
                bbox: d,
            };
            if rng.gen_bool(0.5) {
                areas.insert(0, named);
            } else {
                areas.push(named);
            }
        }
        let neighbors = vec![NamedBox {
            name: format!("{} button {}", NOUNS[(i + 5) % NOUNS.len()], i),
            bbox: neighbor,
        }];

        let mut img = RgbImage::from_pixel(iw, ih, Rgb(color(&mut rng, 20, 70)));
        for a in &areas {
            fill(&mut img, &a.bbox, color(&mut rng, 120, 220));
        }
        fill(&mut img, &neighbor, color(&mut rng, 60, 120));
        fill(&mut img, &target, color(&mut rng, 200, 255));

        let platform = match app.code {
            "Win" => Platform::Windows,
            "mac" => Platform::Macos,
            "Lnx" => Platform::Linux,
            _ => [Platform::Windows, Platform::Macos, Platform::Linux][rng.gen_range(0..3)],
        };
        let img_name = format!("{}.png", id);
        tasks.push(TaskRecord {
            id,
            img: img_name.clone(),
            img_size: [iw, ih],
            instruction: instruction.clone(),
            instruction_secondary: None,
            bbox: target,
            ui_type,
            application: app.code.into(),
            group: app.group,
            platform,
        });
        scene.push(SceneTask {
            instruction,
            target,
            lure: Some(lure),
            max_resolvable,
            min_context: None,
            element: Some(element),
            areas,
            neighbors,
        });
        images.push((img_name, img));
    }
    let script = Script {
        scene,
        ..Default::default()
    };
    write_fixture(dir, tasks, script, &mut images)
}

/// Crop-size fixture for re-grounding. Each 2560×1440 screenshot holds a
/// target and, on the same row 300 to 450 px away, a lure the grounder picks
/// on any view longer than 1100 px. A crop centered on the lure reaches the
/// target from 768 px on, and stays resolvable up to 1024 px.
pub fn crop_ablation(dir: &Path, n: usize, seed: u64) -> io::Result<Fixture> {
    const W: u32 = 2560;
    const H: u32 = 1440;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::with_capacity(n);
    let mut scene = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n);
    for i in 0..n {
        let app = &APPLICATIONS[(i * 7) % APPLICATIONS.len()];
        let t = Point::new(rng.gen_range(900.0..1660.0f64).round(), rng.gen_range(500.0..940.0f64).round());
        let target = bx(t.x - 12.0, t.y - 12.0, t.x + 12.0, t.y + 12.0);
        let d = rng.gen_range(300.0..=450.0f64).round();
        let lure = Point::new(if rng.gen_bool(0.5) { t.x + d } else { t.x - d }, t.y);
        let id = format!("crop_{:03}", i);
        let instruction = format!("press the {} button {}", NOUNS[i % NOUNS.len()], i);

        let mut img = RgbImage::from_pixel(W, H, Rgb(color(&mut rng, 20, 60)));
        fill(&mut img, &bx(lure.x - 12.0, lure.y - 12.0, lure.x + 12.0, lure.y + 12.0), [180, 180, 180]);
        fill(&mut img, &target, [240, 200, 60]);

        let img_name = format!("{}.png", id);
        tasks.push(TaskRecord {
            id,
            img: img_name.clone(),
            img_size: [W, H],
            instruction: instruction.clone(),
            instruction_secondary: None,
            bbox: target,
            ui_type: if i % 2 == 0 { UiType::Icon } else { UiType::Text },
            application: app.code.into(),
            group: app.group,
            platform: Platform::Windows,
        });
        scene.push(SceneTask {
            instruction,
            target,
            lure: Some(lure),
            max_resolvable: Some(1100.0),
            min_context: None,
            element: None,
            areas: Vec::new(),
            neighbors: Vec::new(),
        });
        images.push((img_name, img));
    }
    let script = Script {
        scene,
        ..Default::default()
    };
    write_fixture(dir, tasks, script, &mut images)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_is_seeded() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let fa = synthetic_benchmark(a.path(), 6, 7).unwrap();
        let fb = synthetic_benchmark(b.path(), 6, 7).unwrap();
        assert_eq!(fa.tasks, fb.tasks);
        assert_eq!(fa.script, fb.script);
        assert_eq!(
            std::fs::read(fa.image_root.join("syn_003.png")).unwrap(),
            std::fs::read(fb.image_root.join("syn_003.png")).unwrap()
        );
        let (tasks, errors) = crate::bench::check_dataset(&fa.manifest, &fa.image_root);
        assert!(errors.is_empty(), "{:?}", errors);
        assert_eq!(tasks, fa.tasks);
    }

    #[test]
    fn explorer_targets_are_distinct() {
        assert!(!explorer::delete_button().contains_point(explorer::file_tab()));
        assert!(explorer::action_bar().contains_point(explorer::delete_button().center()));
        assert!(explorer::explorer_window().contains_point(explorer::file_tab()));
    }
}
