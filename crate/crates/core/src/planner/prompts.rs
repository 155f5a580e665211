use std::path::Path;

use super::PlannerError;

const POSITION_INFERENCE: &str = include_str!("../../templates/position_inference.txt");
const RESULT_CHECK: &str = include_str!("../../templates/result_check.txt");

pub const PLACEHOLDER: &str = "{instruction}";
pub const POSITION_FILE: &str = "position_inference.txt";
pub const CHECK_FILE: &str = "result_check.txt";

/// The two planner prompt templates. Each holds exactly one `{instruction}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptTemplates {
    position: String,
    check: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        Self {
            position: POSITION_INFERENCE.to_string(),
            check: RESULT_CHECK.to_string(),
        }
    }
}

impl PromptTemplates {
    pub fn new(position: String, check: String) -> Result<Self, PlannerError> {
        for (name, t) in [(POSITION_FILE, &position), (CHECK_FILE, &check)] {
            let n = t.matches(PLACEHOLDER).count();
            if n != 1 {
                return Err(PlannerError::Template(format!(
                    "{} must contain {} exactly once (found {})",
                    name, PLACEHOLDER, n
                )));
            }
        }
        Ok(Self { position, check })
    }

    /// Loads overrides from `dir`; a missing file keeps the built-in template.
    pub fn from_dir(dir: &Path) -> Result<Self, PlannerError> {
        let load = |file: &str, fallback: &str| -> Result<String, PlannerError> {
            let p = dir.join(file);
            if p.exists() {
                std::fs::read_to_string(&p).map_err(|e| PlannerError::Template(format!("{}: {}", p.display(), e)))
            } else {
                Ok(fallback.to_string())
            }
        };
        Self::new(load(POSITION_FILE, POSITION_INFERENCE)?, load(CHECK_FILE, RESULT_CHECK)?)
    }

    pub fn position_template(&self) -> &str {
        &self.position
    }

    pub fn check_template(&self) -> &str {
        &self.check
    }

    pub fn render_position(&self, instruction: &str) -> Result<String, PlannerError> {
        substitute(&self.position, instruction)
    }

    pub fn render_check(&self, instruction: &str) -> Result<String, PlannerError> {
        substitute(&self.check, instruction)
    }
}

// Single pass: braces inside the instruction are never expanded.
fn substitute(template: &str, instruction: &str) -> Result<String, PlannerError> {
    if instruction.trim().is_empty() {
        return Err(PlannerError::EmptyInstruction);
    }
    Ok(template.replacen(PLACEHOLDER, instruction, 1))
}

/// Position-inference prompt with the built-in template.
pub fn render_position_prompt(instruction: &str) -> Result<String, PlannerError> {
    substitute(POSITION_INFERENCE, instruction)
}

/// Result-checking prompt with the built-in template.
pub fn render_check_prompt(instruction: &str) -> Result<String, PlannerError> {
    substitute(RESULT_CHECK, instruction)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_instruction_once() {
        let p = render_position_prompt("delete file or folder").unwrap();
        assert!(p.ends_with("Instruction:\ndelete file or folder\n"));
        assert_eq!(p.matches("delete file or folder").count(), 1);
        assert_eq!(p, render_position_prompt("delete file or folder").unwrap());
        assert_eq!(render_position_prompt(""), Err(PlannerError::EmptyInstruction));
    }

    #[test]
    fn check_prompt_fields_and_literal_braces() {
        let p = render_check_prompt("open {instruction} menu").unwrap();
        assert!(p.contains("\"result\""));
        assert!(p.contains("\"new_instruction\": (str, default null)"));
        assert!(p.ends_with("Here is my instruction:\nopen {instruction} menu\n"));
        assert_eq!(render_check_prompt("  "), Err(PlannerError::EmptyInstruction));
    }

    #[test]
    fn override_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(POSITION_FILE), "Find: {instruction}").unwrap();
        let t = PromptTemplates::from_dir(dir.path()).unwrap();
        assert_eq!(t.render_position("x").unwrap(), "Find: x");
        assert_eq!(t.check_template(), RESULT_CHECK);

        std::fs::write(dir.path().join(CHECK_FILE), "no placeholder").unwrap();
        assert!(matches!(PromptTemplates::from_dir(dir.path()), Err(PlannerError::Template(_))));
    }
}
