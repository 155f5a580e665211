use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::PixelBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UiType {
    Text,
    Icon,
}

impl UiType {
    pub fn label(self) -> &'static str {
        match self {
            UiType::Text => "Text",
            UiType::Icon => "Icon",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Development,
    Creative,
    #[serde(rename = "CAD")]
    Cad,
    Scientific,
    Office,
    #[serde(rename = "OS")]
    Os,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::Development,
        Group::Creative,
        Group::Cad,
        Group::Scientific,
        Group::Office,
        Group::Os,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Group::Development => "Development",
            Group::Creative => "Creative",
            Group::Cad => "CAD",
            Group::Scientific => "Scientific",
            Group::Office => "Office",
            Group::Os => "OS",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Windows,
    Macos,
    Linux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Application {
    pub code: &'static str,
    pub name: &'static str,
    pub group: Group,
}

const fn app(code: &'static str, name: &'static str, group: Group) -> Application {
    Application { code, name, group }
}

/// Supported applications in report column order.
pub const APPLICATIONS: [Application; 26] = [
    app("VSC", "Visual Studio Code", Group::Development),
    app("PyC", "PyCharm", Group::Development),
    app("AS", "Android Studio", Group::Development),
    app("Qrs", "Quartus", Group::Development),
    app("VM", "VMware", Group::Development),
    app("PS", "Photoshop", Group::Creative),
    app("PR", "Premiere", Group::Creative),
    app("AI", "Adobe Illustrator", Group::Creative),
    app("Bl", "Blender", Group::Creative),
    app("FL", "FruitLoops Studio", Group::Creative),
    app("UE", "Unreal Engine", Group::Creative),
    app("DR", "DaVinci Resolve", Group::Creative),
    app("CAD", "AutoCAD", Group::Cad),
    app("SW", "SolidWorks", Group::Cad),
    app("Inv", "Inventor", Group::Cad),
    app("Vvd", "Vivado", Group::Cad),
    app("MAT", "MATLAB", Group::Scientific),
    app("Org", "Origin", Group::Scientific),
    app("Stt", "Stata", Group::Scientific),
    app("Evw", "EViews", Group::Scientific),
    app("Wrd", "Word", Group::Office),
    app("PPT", "PowerPoint", Group::Office),
    app("Exc", "Excel", Group::Office),
    app("Win", "Windows", Group::Os),
    app("mac", "macOS", Group::Os),
    app("Lnx", "Linux", Group::Os),
];

pub fn application(code: &str) -> Option<&'static Application> {
    APPLICATIONS.iter().find(|a| a.code == code)
}

/// One benchmark task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub id: String,
    /// Screenshot path relative to the image root.
    pub img: String,
    pub img_size: [u32; 2],
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_secondary: Option<String>,
    pub bbox: PixelBox,
    pub ui_type: UiType,
    pub application: String,
    pub group: Group,
    pub platform: Platform,
}

impl TaskRecord {
    pub fn image_path(&self, root: &Path) -> PathBuf {
        root.join(&self.img)
    }
}

/// A manifest line as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub img: String,
    pub bbox: [i64; 4],
    pub ui_type: UiType,
    pub application: String,
    pub group: Group,
    pub platform: Platform,
    pub instruction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction_secondary: Option<String>,
    /// Expected `[width, height]`; checked against the image when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub img_size: Option<[u32; 2]>,
}

impl ManifestEntry {
    pub fn from_task(t: &TaskRecord) -> Self {
        let b = &t.bbox;
        Self {
            id: t.id.clone(),
            img: t.img.clone(),
            bbox: [b.x1() as i64, b.y1() as i64, b.x2() as i64, b.y2() as i64],
            ui_type: t.ui_type,
            application: t.application.clone(),
            group: t.group,
            platform: t.platform,
            instruction: t.instruction.clone(),
            instruction_secondary: t.instruction_secondary.clone(),
            img_size: Some(t.img_size),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("line {line}{}: {message}", id.as_deref().map(|i| format!(" ({})", i)).unwrap_or_default())]
    Schema { line: usize, id: Option<String>, message: String },
    #[error("duplicate task id `{id}` (line {line})")]
    DuplicateId { line: usize, id: String },
    #[error("task `{id}`: image {path} cannot be read: {message}")]
    MissingImage { id: String, path: String, message: String },
    #[error("task `{id}`: ground-truth box {bbox:?} exceeds the {width}x{height} image")]
    GtOutOfBounds { id: String, bbox: [i64; 4], width: u32, height: u32 },
    #[error("{0}")]
    Io(String),
}

impl DatasetError {
    pub fn task_id(&self) -> Option<&str> {
        match self {
            DatasetError::Schema { id, .. } => id.as_deref(),
            DatasetError::DuplicateId { id, .. }
            | DatasetError::MissingImage { id, .. }
            | DatasetError::GtOutOfBounds { id, .. } => Some(id),
            DatasetError::Io(_) => None,
        }
    }
}

fn schema(line: usize, id: Option<&str>, message: impl Into<String>) -> DatasetError {
    DatasetError::Schema {
        line,
        id: id.map(str::to_string),
        message: message.into(),
    }
}

/// Checks one manifest entry without touching the image.
fn check_entry(line: usize, e: &ManifestEntry) -> Result<PixelBox, DatasetError> {
    let id = Some(e.id.as_str());
    if e.id.trim().is_empty() {
        return Err(schema(line, None, "empty id"));
    }
    if e.instruction.trim().is_empty() {
        return Err(schema(line, id, "empty instruction"));
    }
    let app = application(&e.application)
        .ok_or_else(|| schema(line, id, format!("unknown application code `{}`", e.application)))?;
    if app.group != e.group {
        return Err(schema(
            line,
            id,
            format!("application {} belongs to group {}, not {}", app.code, app.group, e.group),
        ));
    }
    let [x1, y1, x2, y2] = e.bbox;
    if x1 > x2 || y1 > y2 {
        return Err(schema(line, id, format!("bbox {:?} is not ordered as [x1, y1, x2, y2]", e.bbox)));
    }
    if x1 < 0 || y1 < 0 {
        return Err(schema(line, id, format!("bbox {:?} has negative coordinates", e.bbox)));
    }
    PixelBox::new(x1 as f64, y1 as f64, x2 as f64, y2 as f64).map_err(|err| schema(line, id, err.to_string()))
}

/// Parses and validates a manifest, reporting every problem found. Tasks
/// that passed all checks are returned alongside the errors.
pub fn check_dataset(manifest: &Path, image_root: &Path) -> (Vec<TaskRecord>, Vec<DatasetError>) {
    let text = match std::fs::read_to_string(manifest) {
        Ok(t) => t,
        Err(e) => return (Vec::new(), vec![DatasetError::Io(format!("{}: {}", manifest.display(), e))]),
    };
    let mut tasks = Vec::new();
    let mut errors = Vec::new();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let entry: ManifestEntry = match serde_json::from_str(raw) {
            Ok(e) => e,
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(raw)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|x| x.as_str()).map(str::to_string));
                errors.push(schema(line, id.as_deref(), e.to_string()));
                continue;
            }
        };
        if !ids.insert(entry.id.clone()) {
            errors.push(DatasetError::DuplicateId {
                line,
                id: entry.id.clone(),
            });
            continue;
        }
        let bbox = match check_entry(line, &entry) {
            Ok(b) => b,
            Err(e) => {
                errors.push(e);
                continue;
            }
        };
        let path = image_root.join(&entry.img);
        let (w, h) = match image::image_dimensions(&path) {
            Ok(d) => d,
            Err(e) => {
                errors.push(DatasetError::MissingImage {
                    id: entry.id.clone(),
                    path: path.display().to_string(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        if let Some([ew, eh]) = entry.img_size {
            if (ew, eh) != (w, h) {
                errors.push(schema(
                    line,
                    Some(&entry.id),
                    format!("img_size {}x{} does not match the image ({}x{})", ew, eh, w, h),
                ));
                continue;
            }
        }
        if bbox.x2() > w as f64 || bbox.y2() > h as f64 {
            errors.push(DatasetError::GtOutOfBounds {
                id: entry.id.clone(),
                bbox: entry.bbox,
                width: w,
                height: h,
            });
            continue;
        }
        tasks.push(TaskRecord {
            id: entry.id,
            img: entry.img,
            img_size: [w, h],
            instruction: entry.instruction,
            instruction_secondary: entry.instruction_secondary,
            bbox,
            ui_type: entry.ui_type,
            application: entry.application,
            group: entry.group,
            platform: entry.platform,
        });
    }
    (tasks, errors)
}

/// Loads a manifest, failing on the first invalid entry.
pub fn load_dataset(manifest: &Path, image_root: &Path) -> Result<Vec<TaskRecord>, DatasetError> {
    let (tasks, mut errors) = check_dataset(manifest, image_root);
    if errors.is_empty() {
        Ok(tasks)
    } else {
        Err(errors.remove(0))
    }
}

/// Writes tasks as a manifest, one JSON object per line.
pub fn write_manifest(path: &Path, tasks: &[TaskRecord]) -> std::io::Result<()> {
    let mut out = String::new();
    for t in tasks {
        out.push_str(&serde_json::to_string(&ManifestEntry::from_task(t)).expect("manifest entry serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Content digest of a task list, independent of input order.
pub fn dataset_digest(tasks: &[TaskRecord]) -> String {
    let mut sorted: Vec<&TaskRecord> = tasks.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut h = Sha256::new();
    for t in sorted {
        h.update(serde_json::to_string(t).expect("task serializes").as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}
