//! Deterministic stand-ins for grounder and planner models.
//!
//! A [`Script`] answers requests from three sources, tried in order:
//!
//! 1. `entries`: a table keyed by purpose, instruction and the request
//!    image's viewport; the first matching entry wins.
//! 2. `scene`: a description of what is on screen (target box, enclosing
//!    areas, neighbors). Grounding answers are derived from the requested
//!    viewport, position inference lists the visible areas, and result checks
//!    compare the most recent red mark with the target.
//! 3. `sequence`: replies served by call index. A script with a sequence is
//!    order-dependent and reports itself as non-concurrent.
//!
//! Replies expressed in global coordinates are converted to the request
//! image's local frame and formatted in the configured output convention.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::parse::{format_reply, OutputConvention};
use super::{BackendError, ChatClient, ChatRequest, ImagePayload, Purpose};
use crate::geometry::to_local;
use crate::{PixelBox, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptPurpose {
    Ground,
    PositionInference,
    ResultCheck,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewportMatch {
    #[default]
    Any,
    /// The request image covers exactly this global box.
    Exact(PixelBox),
    /// The request image covers this global point.
    Contains(Point),
}

impl ViewportMatch {
    fn matches(&self, image: &ImagePayload) -> bool {
        let bounds = image.viewport().bounds();
        match self {
            ViewportMatch::Any => true,
            ViewportMatch::Exact(b) => *b == bounds,
            ViewportMatch::Contains(p) => bounds.contains_point(*p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplySpec {
    /// Returned verbatim.
    Text(String),
    /// A point in original-screenshot pixels.
    GlobalPoint(Point),
    /// A box in original-screenshot pixels.
    GlobalBox(PixelBox),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub purpose: ScriptPurpose,
    /// `None` matches any instruction.
    #[serde(default)]
    pub instruction: Option<String>,
    #[serde(default)]
    pub viewport: ViewportMatch,
    pub reply: ReplySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedBox {
    pub name: String,
    pub bbox: PixelBox,
}

/// Ground truth of one task as a scripted model perceives it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTask {
    pub instruction: String,
    pub target: PixelBox,
    /// Where the grounder points when it cannot resolve the target.
    #[serde(default)]
    pub lure: Option<Point>,
    /// The target is only resolved when the image's longer side is at most this.
    #[serde(default)]
    pub max_resolvable: Option<f64>,
    /// The target is only resolved when the image's shorter side is at least this.
    #[serde(default)]
    pub min_context: Option<f64>,
    /// Name the planner uses for the target element; defaults to the instruction.
    #[serde(default)]
    pub element: Option<String>,
    #[serde(default)]
    pub areas: Vec<NamedBox>,
    #[serde(default)]
    pub neighbors: Vec<NamedBox>,
}

impl SceneTask {
    fn element_name(&self) -> &str {
        self.element.as_deref().unwrap_or(&self.instruction)
    }

    fn resolvable(&self, image: &ImagePayload) -> bool {
        let vp = image.viewport();
        let long = vp.width.max(vp.height);
        let short = vp.width.min(vp.height);
        self.max_resolvable.is_none_or(|m| long <= m) && self.min_context.is_none_or(|m| short >= m)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Script {
    #[serde(default)]
    pub entries: Vec<ScriptEntry>,
    #[serde(default)]
    pub scene: Vec<SceneTask>,
    #[serde(default)]
    pub sequence: Vec<String>,
}

pub struct ScriptedChat {
    script: Script,
    convention: OutputConvention,
    step: AtomicUsize,
}

impl ScriptedChat {
    /// `convention` is the format used for coordinate replies.
    pub fn new(script: Script, convention: OutputConvention) -> Self {
        Self {
            script,
            convention,
            step: AtomicUsize::new(0),
        }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    fn render(&self, reply: &ReplySpec, image: &ImagePayload) -> String {
        match reply {
            ReplySpec::Text(t) => t.clone(),
            ReplySpec::GlobalPoint(p) => self.point_reply(*p, image),
            ReplySpec::GlobalBox(b) => {
                let local = to_local(image.viewport(), b)
                    .unwrap_or_else(|_| PixelBox::at_point(image.center_local()));
                format_reply(self.convention, &local, image.size())
            }
        }
    }

    fn point_reply(&self, global: Point, image: &ImagePayload) -> String {
        let local = image.viewport().point_to_local(global);
        format_reply(self.convention, &PixelBox::at_point(local), image.size())
    }

    fn entry_reply(&self, purpose: ScriptPurpose, instruction: &str, image: &ImagePayload) -> Option<String> {
        self.script
            .entries
            .iter()
            .find(|e| {
                e.purpose == purpose
                    && e.instruction.as_deref().is_none_or(|i| i == instruction)
                    && e.viewport.matches(image)
            })
            .map(|e| self.render(&e.reply, image))
    }

    fn scene_reply(&self, purpose: ScriptPurpose, instruction: &str, image: &ImagePayload) -> Option<String> {
        let bounds = image.viewport().bounds();
        match purpose {
            ScriptPurpose::Ground => {
                if let Some(task) = self
                    .script
                    .scene
                    .iter()
                    .find(|t| t.instruction == instruction || t.element_name() == instruction)
                {
                    let target = task.target.center();
                    let p = if bounds.contains_point(target) && task.resolvable(image) {
                        target
                    } else if let Some(lure) = task.lure.filter(|l| bounds.contains_point(*l)) {
                        lure
                    } else {
                        bounds.center()
                    };
                    return Some(self.point_reply(p, image));
                }
                let named = self
                    .script
                    .scene
                    .iter()
                    .flat_map(|t| t.areas.iter().chain(t.neighbors.iter()))
                    .find(|n| n.name == instruction)?;
                let p = named
                    .bbox
                    .intersection(&bounds)
                    .map(|b| b.center())
                    .unwrap_or_else(|| bounds.center());
                Some(self.point_reply(p, image))
            }
            ScriptPurpose::PositionInference => {
                let task = self.script.scene.iter().find(|t| t.instruction == instruction)?;
                let visible = |n: &&NamedBox| n.bbox.intersection(&bounds).is_some_and(|b| !b.is_degenerate());
                let mut reply = format!("The <element>{}</element> is most likely to be found", task.element_name());
                let areas: Vec<_> = task.areas.iter().filter(visible).collect();
                let neighbors: Vec<_> = task.neighbors.iter().filter(visible).collect();
                for (i, a) in areas.iter().enumerate() {
                    reply.push_str(if i == 0 { " in the " } else { ", in the " });
                    reply.push_str(&format!("<area>{}</area>", a.name));
                }
                for (i, n) in neighbors.iter().enumerate() {
                    reply.push_str(if i == 0 { ", next to the " } else { " and the " });
                    reply.push_str(&format!("<neighbor>{}</neighbor>", n.name));
                }
                reply.push('.');
                Some(reply)
            }
            ScriptPurpose::ResultCheck => {
                let task = self.script.scene.iter().find(|t| t.instruction == instruction)?;
                let target = task.target.center();
                let marked = image
                    .marks()
                    .last()
                    .map(|m| m.translate(bounds.x1(), bounds.y1()));
                let verdict = if marked.is_some_and(|m| m.contains_point(target)) {
                    "is_target"
                } else if bounds.contains_point(target) {
                    "target_elsewhere"
                } else {
                    "target_not_found"
                };
                Some(format!(
                    "The marked region was compared with the instruction.\n{{\"result\": \"{}\", \"new_instruction\": null}}",
                    verdict
                ))
            }
        }
    }
}

impl ChatClient for ScriptedChat {
    fn chat(&self, req: &ChatRequest<'_>) -> Result<String, BackendError> {
        let (purpose, instruction) = match req.purpose {
            Purpose::Ground { instruction } => (Some(ScriptPurpose::Ground), instruction),
            Purpose::PositionInference { instruction } => (Some(ScriptPurpose::PositionInference), instruction),
            Purpose::ResultCheck { instruction } => (Some(ScriptPurpose::ResultCheck), instruction),
            Purpose::Other => (None, req.prompt),
        };
        if let Some(purpose) = purpose {
            if let Some(r) = self.entry_reply(purpose, instruction, req.image) {
                return Ok(r);
            }
            if let Some(r) = self.scene_reply(purpose, instruction, req.image) {
                return Ok(r);
            }
        }
        let i = self.step.fetch_add(1, Ordering::SeqCst);
        self.script.sequence.get(i).cloned().ok_or_else(|| {
            BackendError::ScriptMiss(format!(
                "{:?} `{}` at viewport {:?}",
                req.purpose,
                instruction,
                req.image.viewport().bounds()
            ))
        })
    }

    fn concurrent(&self) -> bool {
        self.script.sequence.is_empty()
    }
}
