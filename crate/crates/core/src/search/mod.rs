//! Grounding strategies.
//!
//! Every strategy takes a full screenshot plus an instruction and returns a
//! prediction in global pixels together with a [`SearchTrace`]. Model
//! failures never abort a search: they are recorded as fallback steps and the
//! strategy still emits a point inside the image.

mod baselines;
mod seeker;
mod trace;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::baselines::{centered_crop, narrow_patch, quadrant_for, quadrants, reground_crop};
pub use self::trace::{
    Action, FailureKind, RefKind, SearchStep, SearchTrace, StepPayload, Termination, TraceHeader,
};

use self::trace::{sha256_hex, Recorder};
use crate::backends::{BackendError, Grounder, GroundingOutcome, ImagePayload, Planner};
use crate::geometry::{count_votes, nms_indices, score_candidate};
use crate::planner::PromptTemplates;
use crate::{DilationConfig, PixelBox, Point, ScoreConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub max_depth: u32,
    /// Patches whose longer side is at most this are grounded directly.
    pub direct_ground_threshold: f64,
    pub score: ScoreConfig,
    pub dilation: DilationConfig,
    pub max_candidates_per_level: usize,
    /// Grounding rounds of iterative zooming and narrowing.
    pub iterations: u32,
    /// Square crop side for re-grounding.
    pub crop_size: f64,
    /// Minimum side of the red box drawn around a prediction for verification.
    pub mark_min_size: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            direct_ground_threshold: 1280.0,
            score: ScoreConfig::default(),
            dilation: DilationConfig::default(),
            max_candidates_per_level: 4,
            iterations: 3,
            crop_size: 1024.0,
            mark_min_size: 48.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::InvalidConfig(m.to_string()));
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if !(self.direct_ground_threshold > 0.0) {
            return bad("direct_ground_threshold must be > 0");
        }
        if self.iterations < 1 {
            return bad("iterations must be >= 1");
        }
        if !(self.crop_size > 0.0) {
            return bad("crop_size must be > 0");
        }
        if !(self.mark_min_size > 0.0) {
            return bad("mark_min_size must be > 0");
        }
        if self.max_candidates_per_level < 1 {
            return bad("max_candidates_per_level must be >= 1");
        }
        self.score.validate().map_err(|e| SearchError::InvalidConfig(e.to_string()))?;
        self.dilation.validate().map_err(|e| SearchError::InvalidConfig(e.to_string()))
    }
}

/// SHA-256 of the configuration's JSON form.
pub fn config_digest(cfg: &SearchConfig) -> String {
    sha256_hex(&serde_json::to_string(cfg).expect("config serializes"))
}

/// Ablated forms of the planner-guided search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Descend only into the best first-level candidate and ground there.
    NoRecursion,
    /// Neighbor references are not grounded and do not vote.
    NoNeighbors,
    /// Candidates are scored by the number of voter centers inside them.
    MajorityVote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Direct,
    Zoom,
    Narrow,
    Reground,
    Seeker,
    SeekerAblation(Variant),
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Direct,
        Method::Zoom,
        Method::Narrow,
        Method::Reground,
        Method::Seeker,
        Method::SeekerAblation(Variant::NoRecursion),
        Method::SeekerAblation(Variant::NoNeighbors),
        Method::SeekerAblation(Variant::MajorityVote),
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Zoom => "zoom",
            Method::Narrow => "narrow",
            Method::Reground => "reground",
            Method::Seeker => "seeker",
            Method::SeekerAblation(Variant::NoRecursion) => "seeker-no-recursion",
            Method::SeekerAblation(Variant::NoNeighbors) => "seeker-no-neighbors",
            Method::SeekerAblation(Variant::MajorityVote) => "seeker-majority-vote",
        }
    }

    pub fn needs_planner(self) -> bool {
        matches!(self, Method::Seeker | Method::SeekerAblation(_))
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::SeekerAblation(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown method `{}` (expected one of {})", s, names.join(", "))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error("method {0} needs a planner backend")]
    MissingPlanner(Method),
    #[error("instruction is empty")]
    EmptyInstruction,
}

/// Models used by a search.
#[derive(Clone)]
pub struct Backends {
    pub grounder: Grounder,
    pub planner: Option<Planner>,
    pub templates: PromptTemplates,
}

impl Backends {
    pub fn new(grounder: Grounder, planner: Option<Planner>) -> Self {
        Self {
            grounder,
            planner,
            templates: PromptTemplates::default(),
        }
    }

    pub fn with_templates(mut self, templates: PromptTemplates) -> Self {
        self.templates = templates;
        self
    }

    /// True when both models tolerate concurrent calls.
    pub fn concurrent(&self) -> bool {
        self.grounder.concurrent() && self.planner.as_ref().is_none_or(|p| p.concurrent())
    }
}

/// One grounding problem.
#[derive(Debug, Clone)]
pub struct SearchTask<'a> {
    pub id: &'a str,
    pub instruction: &'a str,
    /// The full screenshot.
    pub image: &'a ImagePayload,
    /// Screenshot reference recorded in the trace header.
    pub image_ref: Option<&'a str>,
}

/// Runs grounding strategies with a fixed set of models and settings.
#[derive(Clone)]
pub struct Searcher {
    backends: Backends,
    cfg: SearchConfig,
    timing: bool,
}

impl Searcher {
    pub fn new(backends: Backends, cfg: SearchConfig) -> Result<Self, SearchError> {
        cfg.validate()?;
        Ok(Self {
            backends,
            cfg,
            timing: true,
        })
    }

    /// Disables wall-clock measurements so traces are reproducible byte for byte.
    pub fn deterministic(mut self) -> Self {
        self.timing = false;
        self
    }

    pub fn config(&self) -> &SearchConfig {
        &self.cfg
    }

    pub fn backends(&self) -> &Backends {
        &self.backends
    }

    pub fn timing(&self) -> bool {
        self.timing
    }

    pub fn run(&self, method: Method, task: &SearchTask<'_>) -> Result<SearchTrace, SearchError> {
        if task.instruction.trim().is_empty() {
            return Err(SearchError::EmptyInstruction);
        }
        let mut cx = Context {
            backends: &self.backends,
            cfg: &self.cfg,
            task,
            rec: Recorder::new(self.timing),
        };
        let (prediction, termination) = match method {
            Method::Direct => baselines::direct(&mut cx),
            Method::Zoom => baselines::zoom(&mut cx),
            Method::Narrow => baselines::narrow(&mut cx),
            Method::Reground => baselines::reground(&mut cx, self.cfg.crop_size),
            Method::Seeker | Method::SeekerAblation(_) => {
                let planner = self.backends.planner.as_ref().ok_or(SearchError::MissingPlanner(method))?;
                seeker::run(&mut cx, planner, method.variant())
            }
        };
        // Every strategy already stays inside the image; clamp against float drift.
        let bounds = task.image.viewport().bounds();
        let prediction = Point::new(
            prediction.x.clamp(bounds.x1(), bounds.x2()),
            prediction.y.clamp(bounds.y1(), bounds.y2()),
        );
        let Context { rec, .. } = cx;
        Ok(SearchTrace {
            header: TraceHeader {
                task_id: task.id.to_string(),
                method,
                config: self.cfg.clone(),
                instruction: task.instruction.to_string(),
                image: task.image_ref.map(str::to_string),
                image_sha256: task.image.digest().to_string(),
                image_size: [task.image.width(), task.image.height()],
                final_prediction: prediction,
                termination,
                planner_calls: rec.planner_calls,
                grounder_calls: rec.grounder_calls,
            },
            steps: rec.steps,
        })
    }
}

/// Mutable state of one running search.
pub(crate) struct Context<'a> {
    pub backends: &'a Backends,
    pub cfg: &'a SearchConfig,
    pub task: &'a SearchTask<'a>,
    pub rec: Recorder,
}

impl Context<'_> {
    /// Grounds `instruction` on `patch`. Successes return the outcome with the
    /// prediction and box mapped to global pixels.
    pub fn ground(&mut self, instruction: &str, patch: &ImagePayload) -> Result<GroundingOutcome, BackendError> {
        self.rec.grounder_calls += 1;
        let mut out = self.backends.grounder.ground(instruction, patch)?;
        let vp = patch.viewport();
        out.prediction = vp.point_to_global(out.prediction);
        out.bbox = out.bbox.map(|b| crate::geometry::to_global(vp, &b));
        Ok(out)
    }

    /// Records a failed model call.
    pub fn record_failure(&mut self, depth: u32, patch: &ImagePayload, what: &str, err: &BackendError) {
        let failure = match err {
            BackendError::Parse { .. } => FailureKind::Parse,
            _ => FailureKind::Backend,
        };
        let reply = match err {
            BackendError::Parse { raw, .. } => Some(raw.clone()),
            _ => None,
        };
        self.rec.push(
            depth,
            patch.viewport(),
            Action::Fallback,
            StepPayload {
                image_sha256: Some(patch.digest().to_string()),
                reply,
                failure: Some(failure),
                error: Some(err.to_string()),
                note: Some(what.to_string()),
                ..Default::default()
            },
        );
    }

    /// Payload for a successful grounding call.
    pub fn ground_payload(&self, instruction: &str, patch: &ImagePayload, out: &GroundingOutcome) -> StepPayload {
        StepPayload {
            instruction: Some(instruction.to_string()),
            image_sha256: Some(patch.digest().to_string()),
            reply_sha256: Some(sha256_hex(&out.raw_text)),
            reply: Some(out.raw_text.clone()),
            point: Some(out.prediction),
            boxes: out.bbox.into_iter().collect(),
            note: out.overflow.then(|| "prediction clamped into image".to_string()),
            ..Default::default()
        }
    }

    /// Image-center prediction used when nothing could be grounded.
    pub fn sentinel(&mut self) -> (Point, Termination) {
        let image = self.task.image;
        let p = image.viewport().bounds().center();
        self.rec.push(
            0,
            image.viewport(),
            Action::Fallback,
            StepPayload {
                point: Some(p),
                note: Some("no usable grounding; predicting the image center".into()),
                ..Default::default()
            },
        );
        (p, Termination::FallbackParseFailure)
    }
}

/// Score of every candidate: summed centrality of the voter centers, or
/// with `majority_vote` the number of voter centers inside.
pub fn score_candidates(candidates: &[PixelBox], voters: &[PixelBox], cfg: &ScoreConfig, majority_vote: bool) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            if majority_vote {
                count_votes(c, voters)
            } else {
                score_candidate(c, voters, cfg).unwrap_or(0.0)
            }
        })
        .collect()
}

/// Visit order of scored candidates as `(index, score)` pairs: non-maximum
/// suppression, score descending, ties in input order, at most `limit`
/// entries.
pub fn rank_scored(candidates: &[PixelBox], scores: &[f64], iou_threshold: f64, limit: usize) -> Vec<(usize, f64)> {
    let scored: Vec<(PixelBox, f64)> = candidates.iter().copied().zip(scores.iter().copied()).collect();
    nms_indices(&scored, iou_threshold)
        .into_iter()
        .take(limit)
        .map(|i| (i, scored[i].1))
        .collect()
}

/// [`score_candidates`] followed by [`rank_scored`].
pub fn rank_candidates(
    candidates: &[PixelBox],
    voters: &[PixelBox],
    cfg: &ScoreConfig,
    majority_vote: bool,
    limit: usize,
) -> Vec<(usize, f64)> {
    let scores = score_candidates(candidates, voters, cfg, majority_vote);
    rank_scored(candidates, &scores, cfg.nms_iou_threshold, limit)
}
