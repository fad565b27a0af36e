//! Command-line and HTTP front ends over the testpilot pipeline.

pub mod cli;
pub mod server;

/// Longest prompt accepted from either front end.
pub const MAX_PROMPT_BYTES: usize = 8 * 1024;

/// Checks a user prompt before a run is started.
pub fn check_prompt(prompt: &str) -> Result<&str, String> {
    let trimmed = prompt.trim();
    if trimmed.is_empty() {
        return Err("prompt must not be empty".into());
    }
    if prompt.len() > MAX_PROMPT_BYTES {
        return Err(format!("prompt is {} bytes; the limit is {MAX_PROMPT_BYTES}", prompt.len()));
    }
    Ok(trimmed)
}
