//! Prompt templates for the policy and simulation backends. The wording is
//! this crate's own; swap templates by building prompts with your own
//! functions and the same [`StoryState`] inputs.

use std::fmt::Write as _;

use crate::tree::{StoryConfig, StoryState};

fn render_bullets(bullets: &[String]) -> String {
    if bullets.is_empty() {
        return "(nothing yet)".to_string();
    }
    bullets
        .iter()
        .map(|b| format!("- {}", strip_marker(b)))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_history(history: &[String]) -> String {
    if history.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    for (i, h) in history.iter().enumerate() {
        let _ = writeln!(out, "{}. {}", i + 1, h);
    }
    out.trim_end().to_string()
}

/// Prompt asking the policy for the next plot direction. Also used as the
/// preference-pair context so the trainer sees what the policy saw.
pub fn policy_prompt(state: &StoryState, cfg: &StoryConfig) -> String {
    format!(
        "You are planning the plot of a short story told as {total} bullet points.\n\n\
         Story prompt:\n{prompt}\n\n\
         Plot so far ({done} of {total} bullets):\n{bullets}\n\n\
         Plot directions taken so far:\n{history}\n\n\
         Reason briefly about where the story should go, then answer with one \
         sentence describing the next plot development.",
        total = cfg.total_bullets,
        prompt = state.prompt.trim(),
        done = state.bullets.len(),
        bullets = render_bullets(&state.bullets),
        history = render_history(&state.cot_history),
    )
}

pub fn simulation_prompt(state: &StoryState, action: &str, cfg: &StoryConfig) -> String {
    format!(
        "You are writing a short story as a plot outline of {total} bullet points.\n\n\
         Story prompt:\n{prompt}\n\n\
         Plot so far:\n{bullets}\n\n\
         Earlier plot directions:\n{history}\n\n\
         Next plot direction:\n{action}\n\n\
         Write exactly {k} new bullet points that carry out the next plot direction. \
         Start every line with \"- \" and write nothing else.",
        total = cfg.total_bullets,
        prompt = state.prompt.trim(),
        bullets = render_bullets(&state.bullets),
        history = render_history(&state.cot_history),
        action = action.trim(),
        k = cfg.bullets_per_step,
    )
}

fn strip_marker(line: &str) -> &str {
    let t = line.trim();
    if let Some(rest) = t
        .strip_prefix("- ")
        .or_else(|| t.strip_prefix("* "))
        .or_else(|| t.strip_prefix("• "))
    {
        return rest.trim();
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix(". ").or_else(|| rest.strip_prefix(") ")) {
            return r.trim();
        }
    }
    t
}

fn is_marked(line: &str) -> bool {
    let t = line.trim();
    if t.starts_with("- ") || t.starts_with("* ") || t.starts_with("• ") {
        return true;
    }
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    digits > 0 && (t[digits..].starts_with(". ") || t[digits..].starts_with(") "))
}

/// The first `count` bullet lines of a simulator reply, markers stripped.
pub fn parse_bullets(reply: &str, count: usize) -> Option<Vec<String>> {
    let bullets: Vec<String> = reply
        .lines()
        .filter(|l| is_marked(l))
        .map(|l| strip_marker(l).to_string())
        .filter(|l| !l.is_empty())
        .take(count)
        .collect();
    (bullets.len() == count).then_some(bullets)
}

/// First non-empty line of a policy reply, markers stripped.
pub fn parse_action(reply: &str) -> Option<String> {
    reply
        .lines()
        .map(strip_marker)
        .find(|l| !l.is_empty())
        .map(str::to_string)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::NodeId;

    #[test]
    fn bullets_parsed() {
        let reply = "Here you go:\n- one\n* two\n3. three\n- four\n- five";
        assert_eq!(
            parse_bullets(reply, 4).unwrap(),
            vec!["one", "two", "three", "four"]
        );
        assert!(parse_bullets("- only one", 4).is_none());
    }

    #[test]
    fn action_parsed() {
        assert_eq!(
            parse_action("\n\n- The storm hits.\nmore").unwrap(),
            "The storm hits."
        );
        assert!(parse_action("  \n ").is_none());
    }

    #[test]
    fn prompts_mention_state() {
        let state = StoryState {
            id: NodeId(0),
            prompt: "A wind story".into(),
            bullets: vec!["- a kite".into()],
            cot_history: vec!["Introduce the kite".into()],
            depth: 1,
            evaluated_value: None,
        };
        let cfg = StoryConfig::default();
        let p = policy_prompt(&state, &cfg);
        assert!(p.contains("A wind story") && p.contains("- a kite") && p.contains("1. Introduce"));
        let s = simulation_prompt(&state, "Lose the kite", &cfg);
        assert!(s.contains("Lose the kite") && s.contains("exactly 4"));
    }
}
