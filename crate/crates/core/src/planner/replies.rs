use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::PlannerError;

/// Parsed position-inference reply. Lists keep the planner's order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PositionInference {
    pub elements: Vec<String>,
    pub areas: Vec<String>,
    pub neighbors: Vec<String>,
    pub no_target: bool,
    /// Neither tags nor "No target" were found.
    pub malformed: bool,
}

impl PositionInference {
    pub fn is_empty(&self) -> bool {
        self.elements.is_empty() && self.areas.is_empty() && self.neighbors.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    IsTarget,
    TargetElsewhere,
    TargetNotFound,
}

impl Verdict {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "is_target" => Some(Verdict::IsTarget),
            "target_elsewhere" => Some(Verdict::TargetElsewhere),
            "target_not_found" => Some(Verdict::TargetNotFound),
            _ => None,
        }
    }

    /// Higher is more confident that the marked element is the target.
    pub fn rank(self) -> u8 {
        match self {
            Verdict::IsTarget => 2,
            Verdict::TargetElsewhere => 1,
            Verdict::TargetNotFound => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub result: Verdict,
    pub new_instruction: Option<String>,
}

fn tag_regex(tag: &str) -> Regex {
    Regex::new(&format!(r"(?is)<\s*{tag}\s*>(.*?)<\s*/\s*{tag}\s*>")).expect("valid regex")
}

struct TagPatterns {
    element: Regex,
    area: Regex,
    neighbor: Regex,
    any_span: Regex,
    any_tag: Regex,
    no_target: Regex,
}

fn patterns() -> &'static TagPatterns {
    static P: OnceLock<TagPatterns> = OnceLock::new();
    P.get_or_init(|| TagPatterns {
        element: tag_regex("element"),
        area: tag_regex("area"),
        neighbor: tag_regex("neighbor"),
        any_span: Regex::new(r"(?is)<\s*(?:element|area|neighbor)\s*>.*?<\s*/\s*(?:element|area|neighbor)\s*>")
            .expect("valid regex"),
        any_tag: Regex::new(r"(?i)<\s*/?\s*(?:element|area|neighbor)\s*>").expect("valid regex"),
        no_target: Regex::new(r"(?i)\bno\s+target\b").expect("valid regex"),
    })
}

fn spans(re: &Regex, reply: &str) -> Vec<String> {
    let strip = &patterns().any_tag;
    let mut out: Vec<String> = Vec::new();
    for cap in re.captures_iter(reply) {
        let text = strip.replace_all(&cap[1], "");
        let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
        if !text.is_empty() && !out.contains(&text) {
            out.push(text);
        }
    }
    out
}

/// Extracts `<element>`, `<area>` and `<neighbor>` references from a planner
/// reply. Never fails: a reply without tags or "No target" comes back empty
/// with `malformed` set.
pub fn parse_position_inference(reply: &str) -> PositionInference {
    let p = patterns();
    let inference = PositionInference {
        elements: spans(&p.element, reply),
        areas: spans(&p.area, reply),
        neighbors: spans(&p.neighbor, reply),
        no_target: false,
        malformed: false,
    };
    if !inference.is_empty() {
        return inference;
    }
    let untagged = p.any_span.replace_all(reply, " ");
    if p.no_target.is_match(&untagged) {
        PositionInference {
            no_target: true,
            ..Default::default()
        }
    } else {
        PositionInference {
            malformed: true,
            ..Default::default()
        }
    }
}

/// Top-level JSON objects embedded in `text`, in order.
fn json_objects(text: &str) -> Vec<serde_json::Map<String, Value>> {
    let mut out = Vec::new();
    let mut i = 0;
    while let Some(off) = text[i..].find('{') {
        let start = i + off;
        let mut stream = serde_json::Deserializer::from_str(&text[start..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(m))) => {
                out.push(m);
                i = start + stream.byte_offset();
            }
            _ => i = start + 1,
        }
    }
    out
}

/// Reads the verdict from the last JSON object in a result-check reply.
pub fn parse_check_result(reply: &str) -> Result<CheckVerdict, PlannerError> {
    let fail = |reason: &str| PlannerError::VerdictParse {
        raw: reply.to_string(),
        reason: reason.to_string(),
    };
    let obj = json_objects(reply).pop().ok_or_else(|| fail("no JSON object"))?;
    let result = obj
        .get("result")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("missing string field `result`"))?;
    let result = Verdict::parse(result.trim()).ok_or_else(|| fail("unknown result literal"))?;
    let new_instruction = match obj.get("new_instruction") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) if s.trim().is_empty() => None,
        Some(Value::String(s)) => Some(s.trim().to_string()),
        Some(_) => return Err(fail("`new_instruction` is not a string")),
    };
    Ok(CheckVerdict { result, new_instruction })
}
