//! Planner prompts, reply parsing and the red verification mark.

mod mark;
mod prompts;
mod replies;

use thiserror::Error;

pub use self::mark::{draw_mark, stroke_width, MARK_COLOR};
pub use self::prompts::{render_check_prompt, render_position_prompt, PromptTemplates, CHECK_FILE, POSITION_FILE};
pub use self::replies::{parse_check_result, parse_position_inference, CheckVerdict, PositionInference, Verdict};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("instruction is empty")]
    EmptyInstruction,
    #[error("prompt template: {0}")]
    Template(String),
    #[error("could not read verdict ({reason}): {raw:?}")]
    VerdictParse { raw: String, reason: String },
}
