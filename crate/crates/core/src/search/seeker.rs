//! Planner-guided recursive search.
//!
//! At each level the planner names areas and neighbors around the target,
//! the grounder locates every name, grounded areas are dilated into candidate
//! patches and ranked by how central the grounded boxes sit inside them, and
//! the search descends into candidates in rank order. Patches small enough
//! for the grounder are grounded directly and the planner verifies the
//! result on a copy with the prediction marked in red.

use super::trace::sha256_hex;
use super::{rank_scored, score_candidates, Action, Context, RefKind, StepPayload, Termination, Variant};
use crate::backends::{GroundingOutcome, ImagePayload, Planner, Purpose};
use crate::geometry::{dilate, to_local};
use crate::planner::{draw_mark, parse_check_result, parse_position_inference, Verdict};
use crate::{DilationConfig, PixelBox, Point};

/// A direct grounding made during the search.
struct Seen {
    point: Point,
    verdict: Option<Verdict>,
    score: f64,
}

struct Seeker<'c, 'a> {
    cx: &'c mut Context<'a>,
    planner: &'c Planner,
    variant: Option<Variant>,
    seen: Vec<Seen>,
    root_candidates: Vec<PixelBox>,
    root_no_target: bool,
}

pub(super) fn run(cx: &mut Context<'_>, planner: &Planner, variant: Option<Variant>) -> (Point, Termination) {
    let image = cx.task.image.clone();
    let mut s = Seeker {
        cx,
        planner,
        variant,
        seen: Vec::new(),
        root_candidates: Vec::new(),
        root_no_target: false,
    };
    if let Some(p) = s.visit(&image, 0, 0.0) {
        return (p, Termination::Verified);
    }
    if s.no_recursion() {
        return match s.seen.last() {
            Some(last) => (last.point, Termination::DepthExhausted),
            None => s.cx.sentinel(),
        };
    }
    s.fallback(&image)
}

impl Seeker<'_, '_> {
    fn no_recursion(&self) -> bool {
        self.variant == Some(Variant::NoRecursion)
    }

    fn visit(&mut self, patch: &ImagePayload, depth: u32, score: f64) -> Option<Point> {
        let small = patch.viewport().max_side() <= self.cx.cfg.direct_ground_threshold;
        if depth >= self.cx.cfg.max_depth || small {
            let verify = !self.no_recursion();
            return self.leaf(patch, depth, score, verify);
        }
        self.inner(patch, depth)
    }

    /// Grounds the task on `patch`, then (optionally) asks the planner to
    /// check the marked prediction. Returns the point once verified.
    fn leaf(&mut self, patch: &ImagePayload, depth: u32, score: f64, verify: bool) -> Option<Point> {
        let instruction = self.cx.task.instruction;
        let out = self.ground_task(instruction, patch, depth)?;
        if !verify {
            self.seen.push(Seen {
                point: out.prediction,
                verdict: None,
                score,
            });
            return None;
        }
        let (verdict, rewritten) = self.verify(patch, depth, &out);
        self.seen.push(Seen {
            point: out.prediction,
            verdict: Some(verdict),
            score,
        });
        if verdict == Verdict::IsTarget {
            return Some(out.prediction);
        }
        if let (Verdict::TargetElsewhere, Some(new_instruction)) = (verdict, rewritten) {
            let out = self.ground_task(&new_instruction, patch, depth)?;
            let (verdict, _) = self.verify(patch, depth, &out);
            self.seen.push(Seen {
                point: out.prediction,
                verdict: Some(verdict),
                score,
            });
            if verdict == Verdict::IsTarget {
                return Some(out.prediction);
            }
        }
        None
    }

    fn ground_task(&mut self, instruction: &str, patch: &ImagePayload, depth: u32) -> Option<GroundingOutcome> {
        match self.cx.ground(instruction, patch) {
            Ok(out) => {
                let payload = self.cx.ground_payload(instruction, patch, &out);
                self.cx.rec.push(depth, patch.viewport(), Action::DirectGround, payload);
                Some(out)
            }
            Err(e) => {
                self.cx.record_failure(depth, patch, "direct grounding failed", &e);
                None
            }
        }
    }

    /// Result check on a copy of `patch` with the prediction boxed in red.
    /// Unusable replies count as `target_not_found`.
    fn verify(&mut self, patch: &ImagePayload, depth: u32, out: &GroundingOutcome) -> (Verdict, Option<String>) {
        let vp = *patch.viewport();
        let global = out.bbox.unwrap_or_else(|| PixelBox::at_point(out.prediction));
        let local = to_local(&vp, &global).unwrap_or_else(|_| PixelBox::at_point(patch.center_local()));
        let mark_cfg = DilationConfig {
            min_size: self.cx.cfg.mark_min_size,
            max_ratio: f64::INFINITY,
        };
        let mark = dilate(&local, &mark_cfg, &patch.local_bounds()).unwrap_or(local);
        let marked = draw_mark(patch, &mark);
        let drawn = *marked.marks().last().expect("mark recorded");
        let mark_global = drawn.translate(vp.offset.x, vp.offset.y);

        let instruction = self.cx.task.instruction;
        let prompt = self
            .cx
            .backends
            .templates
            .render_check(instruction)
            .expect("instruction checked non-empty");
        self.cx.rec.planner_calls += 1;
        let reply = self
            .planner
            .complete(&prompt, &marked, Purpose::ResultCheck { instruction });
        let mut payload = StepPayload {
            instruction: Some(instruction.to_string()),
            image_sha256: Some(marked.digest().to_string()),
            prompt_sha256: Some(sha256_hex(&prompt)),
            point: Some(out.prediction),
            boxes: vec![mark_global],
            ..Default::default()
        };
        let (verdict, rewritten) = match reply {
            Err(e) => {
                payload.failure = Some(super::FailureKind::Backend);
                payload.error = Some(e.to_string());
                (Verdict::TargetNotFound, None)
            }
            Ok(text) => {
                payload.reply_sha256 = Some(sha256_hex(&text));
                let parsed = parse_check_result(&text);
                payload.reply = Some(text);
                match parsed {
                    Ok(v) => (v.result, v.new_instruction),
                    Err(e) => {
                        payload.failure = Some(super::FailureKind::Parse);
                        payload.error = Some(e.to_string());
                        (Verdict::TargetNotFound, None)
                    }
                }
            }
        };
        payload.verdict = Some(verdict);
        payload.new_instruction = rewritten.clone();
        self.cx.rec.push(depth, &vp, Action::Verify, payload);
        (verdict, rewritten)
    }

    fn inner(&mut self, patch: &ImagePayload, depth: u32) -> Option<Point> {
        let verify = !self.no_recursion();
        let instruction = self.cx.task.instruction;
        let vp = *patch.viewport();
        let bounds = vp.bounds();

        let prompt = self
            .cx
            .backends
            .templates
            .render_position(instruction)
            .expect("instruction checked non-empty");
        self.cx.rec.planner_calls += 1;
        let reply = match self
            .planner
            .complete(&prompt, patch, Purpose::PositionInference { instruction })
        {
            Ok(r) => r,
            Err(e) => {
                self.cx.record_failure(depth, patch, "position inference failed; grounding directly", &e);
                return self.leaf(patch, depth, 0.0, verify);
            }
        };
        let inference = parse_position_inference(&reply);
        self.cx.rec.push(
            depth,
            &vp,
            Action::PositionInference,
            StepPayload {
                instruction: Some(instruction.to_string()),
                image_sha256: Some(patch.digest().to_string()),
                prompt_sha256: Some(sha256_hex(&prompt)),
                reply_sha256: Some(sha256_hex(&reply)),
                reply: Some(reply.clone()),
                inference: Some(inference.clone()),
                ..Default::default()
            },
        );

        if inference.no_target {
            if depth == 0 {
                // The benchmark guarantees the target is on screen.
                self.root_no_target = true;
                self.note(depth, &vp, "planner reported no target; grounding directly");
                return self.leaf(patch, depth, 0.0, verify);
            }
            self.note(depth, &vp, "planner reported no target in this patch");
            return None;
        }
        if inference.malformed || inference.areas.is_empty() {
            self.note(depth, &vp, "no areas proposed; grounding directly");
            return self.leaf(patch, depth, 0.0, verify);
        }

        let mut refs: Vec<(&str, RefKind)> = Vec::new();
        refs.extend(inference.elements.iter().map(|r| (r.as_str(), RefKind::Element)));
        refs.extend(inference.areas.iter().map(|r| (r.as_str(), RefKind::Area)));
        if self.variant != Some(Variant::NoNeighbors) {
            refs.extend(inference.neighbors.iter().map(|r| (r.as_str(), RefKind::Neighbor)));
        }

        let mut voters = Vec::new();
        let mut seeds = Vec::new();
        for (name, kind) in refs {
            match self.cx.ground(name, patch) {
                Ok(out) => {
                    let voter = out.bbox.unwrap_or_else(|| PixelBox::at_point(out.prediction));
                    let mut payload = self.cx.ground_payload(name, patch, &out);
                    payload.instruction = None;
                    payload.reference = Some(name.to_string());
                    payload.kind = Some(kind);
                    payload.boxes = vec![voter];
                    self.cx.rec.push(depth, &vp, Action::GroundReference, payload);
                    voters.push(voter);
                    if kind == RefKind::Area {
                        seeds.push(voter);
                    }
                }
                Err(e) => self.cx.record_failure(depth, patch, &format!("grounding reference `{}` failed", name), &e),
            }
        }

        let dilated: Vec<PixelBox> = seeds
            .iter()
            .filter_map(|s| dilate(s, &self.cx.cfg.dilation, &bounds).ok())
            .collect();
        // Only patches strictly smaller than the current one keep the search narrowing.
        let candidates: Vec<PixelBox> = dilated
            .iter()
            .copied()
            .filter(|c| c.area() < bounds.area())
            .collect();
        let pruned = dilated.len() - candidates.len();
        self.cx.rec.push(
            depth,
            &vp,
            Action::Dilate,
            StepPayload {
                boxes: candidates.clone(),
                note: (pruned > 0).then(|| format!("{} candidate(s) cover the whole patch and were dropped", pruned)),
                ..Default::default()
            },
        );
        if candidates.is_empty() {
            self.note(depth, &vp, "no candidate areas; grounding directly");
            return self.leaf(patch, depth, 0.0, verify);
        }

        let majority = self.variant == Some(Variant::MajorityVote);
        let scores = score_candidates(&candidates, &voters, &self.cx.cfg.score, majority);
        let ranked = rank_scored(&candidates, &scores, self.cx.cfg.score.nms_iou_threshold, usize::MAX);
        self.cx.rec.push(
            depth,
            &vp,
            Action::Score,
            StepPayload {
                boxes: candidates.clone(),
                scores,
                ..Default::default()
            },
        );

        let limit = self.cx.cfg.max_candidates_per_level;
        let truncated = ranked.len().saturating_sub(limit);
        let visit: Vec<(PixelBox, f64)> = ranked.iter().take(limit).map(|&(i, s)| (candidates[i], s)).collect();
        self.cx.rec.push(
            depth,
            &vp,
            Action::Nms,
            StepPayload {
                boxes: visit.iter().map(|v| v.0).collect(),
                scores: visit.iter().map(|v| v.1).collect(),
                truncated: (truncated > 0).then_some(truncated),
                ..Default::default()
            },
        );
        if depth == 0 {
            self.root_candidates = visit.iter().map(|v| v.0).collect();
        }

        let take = if self.no_recursion() { 1 } else { visit.len() };
        for &(cand, score) in visit.iter().take(take) {
            self.cx.rec.push(
                depth,
                &vp,
                Action::Descend,
                StepPayload {
                    boxes: vec![cand],
                    scores: vec![score],
                    ..Default::default()
                },
            );
            let child = match patch.crop(&cand) {
                Ok(c) => c,
                Err(e) => {
                    self.cx.record_failure(depth, patch, "crop failed", &e);
                    continue;
                }
            };
            let found = if self.no_recursion() {
                self.leaf(&child, depth + 1, score, false)
            } else {
                self.visit(&child, depth + 1, score)
            };
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn note(&mut self, depth: u32, vp: &crate::PixelViewport, text: &str) {
        self.cx.rec.push(
            depth,
            vp,
            Action::Fallback,
            StepPayload {
                note: Some(text.to_string()),
                ..Default::default()
            },
        );
    }

    /// Prediction when nothing was verified: the best direct grounding (by
    /// verdict, then candidate score, then order), else a grounding inside the
    /// top root candidate, else the image center.
    fn fallback(&mut self, image: &ImagePayload) -> (Point, Termination) {
        let termination = if self.root_no_target {
            Termination::PlannerNoTarget
        } else {
            Termination::CandidatesExhausted
        };
        let mut best: Option<&Seen> = None;
        for s in &self.seen {
            let better = match best {
                None => true,
                Some(b) => {
                    let rank = |x: &Seen| x.verdict.map_or(0, |v| v.rank() + 1);
                    (rank(s), s.score) > (rank(b), b.score)
                }
            };
            if better {
                best = Some(s);
            }
        }
        if let Some(b) = best {
            let p = b.point;
            self.cx.rec.push(
                0,
                image.viewport(),
                Action::Fallback,
                StepPayload {
                    point: Some(p),
                    verdict: b.verdict,
                    note: Some("nothing verified; using the best direct grounding".into()),
                    ..Default::default()
                },
            );
            return (p, termination);
        }
        if let Some(top) = self.root_candidates.first().copied() {
            if let Ok(child) = image.crop(&top) {
                let depth = 1.min(self.cx.cfg.max_depth);
                if let Some(out) = self.ground_task(self.cx.task.instruction, &child, depth) {
                    return (out.prediction, termination);
                }
            }
        }
        self.cx.sentinel()
    }
}
