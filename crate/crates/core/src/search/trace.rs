use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Method, SearchConfig};
use crate::planner::{PositionInference, Verdict};
use crate::{PixelBox, PixelViewport, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    PositionInference,
    GroundReference,
    Dilate,
    Score,
    Nms,
    Descend,
    DirectGround,
    Verify,
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Verified,
    DepthExhausted,
    CandidatesExhausted,
    PlannerNoTarget,
    FallbackParseFailure,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Verified => "verified",
            Termination::DepthExhausted => "depth_exhausted",
            Termination::CandidatesExhausted => "candidates_exhausted",
            Termination::PlannerNoTarget => "planner_no_target",
            Termination::FallbackParseFailure => "fallback_parse_failure",
        }
    }
}

/// Which kind of planner reference a grounded box came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Element,
    Area,
    Neighbor,
}

/// Classification of a failed model call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    /// The reply arrived but could not be parsed.
    Parse,
    /// The backend could not produce a reply (transport, cassette miss, script miss).
    Backend,
}

/// Action-specific data. Boxes and points are global pixels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<RefKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference: Option<PositionInference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Point>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<PixelBox>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_instruction: Option<String>,
    /// Candidates dropped by the per-level limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncated: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<FailureKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchStep {
    pub depth: u32,
    pub viewport: PixelBox,
    pub action: Action,
    pub payload: StepPayload,
    /// Seconds spent in this step; zero when timing is disabled.
    pub wall_time: f64,
}

/// First line of a serialized trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub task_id: String,
    pub method: Method,
    pub config: SearchConfig,
    pub instruction: String,
    /// Screenshot path as given by the caller (relative to an image root).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub image_sha256: String,
    pub image_size: [u32; 2],
    pub final_prediction: Point,
    pub termination: Termination,
    pub planner_calls: u32,
    pub grounder_calls: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub header: TraceHeader,
    pub steps: Vec<SearchStep>,
}

impl SearchTrace {
    pub fn final_prediction(&self) -> Point {
        self.header.final_prediction
    }

    pub fn termination(&self) -> Termination {
        self.header.termination
    }

    pub fn max_depth(&self) -> u32 {
        self.steps.iter().map(|s| s.depth).max().unwrap_or(0)
    }

    pub fn steps_of(&self, action: Action) -> impl Iterator<Item = &SearchStep> {
        self.steps.iter().filter(move |s| s.action == action)
    }

    /// JSON-lines: the header, then one step per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("trace header serializes");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&serde_json::to_string(s).expect("trace step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or("empty trace")?;
        let header: TraceHeader = serde_json::from_str(first).map_err(|e| format!("line 1: {}", e))?;
        let steps = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {}", i + 1, e)))
            .collect::<Result<Vec<SearchStep>, String>>()?;
        Ok(Self { header, steps })
    }
}

pub(crate) fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Collects steps and call counters while a search runs.
pub(crate) struct Recorder {
    timing: bool,
    last: Instant,
    pub steps: Vec<SearchStep>,
    pub planner_calls: u32,
    pub grounder_calls: u32,
}

impl Recorder {
    pub fn new(timing: bool) -> Self {
        Self {
            timing,
            last: Instant::now(),
            steps: Vec::new(),
            planner_calls: 0,
            grounder_calls: 0,
        }
    }

    pub fn push(&mut self, depth: u32, viewport: &PixelViewport, action: Action, payload: StepPayload) {
        let wall_time = if self.timing {
            let now = Instant::now();
            let dt = now.duration_since(self.last).as_secs_f64();
            self.last = now;
            dt
        } else {
            0.0
        };
        self.steps.push(SearchStep {
            depth,
            viewport: viewport.bounds(),
            action,
            payload,
            wall_time,
        });
    }
}
