//! Offline responders used with `--mock`.
//!
//! The judge responder answers the shipped templates with the deterministic
//! backends, so a mocked judge run agrees with a deterministic one. The
//! collection responder fabricates a short trace and output from the frame
//! references.

use serde_json::json;
use thoughtlens::contentfulness::MetaPatternSet;
use thoughtlens::extraction::{extract_items_deterministic_output, extract_items_deterministic_thought};
use thoughtlens::model::StructuredOutput;
use thoughtlens::similarity::lexical_similarity;
use thoughtlens_gateway::mock::MockProvider;
use thoughtlens_gateway::{CollectRequest, JudgeRequest, ProviderError, ProviderReply, Request, ThinkingBudget, Usage};

/// Text blocks delimited by `<<<` and `>>>` lines, in order.
fn blocks(prompt: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = prompt;
    while let Some(start) = rest.find("<<<\n") {
        let body = &rest[start + 4..];
        let Some(end) = body.find("\n>>>") else { break };
        out.push(&body[..end]);
        rest = &body[end + 4..];
    }
    out
}

fn judge(req: &JudgeRequest) -> Result<ProviderReply, ProviderError> {
    let patterns = MetaPatternSet::default_v1();
    let parts = blocks(&req.prompt);
    let bad = |why: &str| ProviderError::Status {
        status: 400,
        message: format!("mock judge: {why}"),
    };
    let body = match req.template.id.as_str() {
        "extract-items" => {
            let text = parts.first().ok_or_else(|| bad("no text block"))?;
            let set = match serde_json::from_str::<StructuredOutput>(text) {
                Ok(out) if req.prompt.contains("Source kind: output") => {
                    extract_items_deterministic_output(&out)
                }
                _ => extract_items_deterministic_thought(text, &patterns),
            };
            serde_json::to_string(&set.items).expect("strings encode")
        }
        "trace-similarity" => {
            let [a, b] = parts[..] else {
                return Err(bad("expected two traces"));
            };
            let (score, _) = lexical_similarity::<f64>(a, b, &patterns);
            json!({ "score": score }).to_string()
        }
        other => return Err(bad(&format!("unknown template {other}"))),
    };
    Ok(ProviderReply::text(body))
}

fn frame_words(frames: &[String]) -> Vec<String> {
    let mut words = Vec::new();
    for f in frames {
        let stem = f.rsplit('/').next().unwrap_or(f);
        let stem = stem.split('.').next().unwrap_or(stem);
        for w in stem.split(['_', '-']) {
            if w.chars().all(|c| c.is_ascii_alphabetic()) && !w.is_empty() && !words.iter().any(|x| x == w) {
                words.push(w.to_string());
            }
        }
    }
    words
}

fn collect(req: &CollectRequest) -> Result<ProviderReply, ProviderError> {
    let words = frame_words(&req.frames);
    let subject = words.first().cloned().unwrap_or_else(|| "scene".into());
    let thought = format!(
        "Let me look at the {} frames. The frames show {}.",
        req.frames.len(),
        if words.is_empty() { "a scene".to_string() } else { words.join(" and ") }
    );
    let output = json!({
        "subjects": [subject],
        "actions": ["appears"],
        "settings": ["frame"],
        "emotions": [],
    });
    let thought_tokens = (thought.split_whitespace().count() as u64 * 4).div_ceil(3);
    let thought_tokens = match req.budget {
        ThinkingBudget::Fixed(n) => thought_tokens.min(n as u64),
        ThinkingBudget::Dynamic => thought_tokens,
    };
    let input = 258 * req.frames.len() as u64 + req.prompt.split_whitespace().count() as u64;
    let output_tokens = output.to_string().len() as u64 / 4;
    Ok(ProviderReply {
        body: json!({ "thought": thought, "output": output.to_string() }).to_string(),
        usage: Some(Usage {
            thought: thought_tokens,
            input,
            output: output_tokens,
            total: thought_tokens + input + output_tokens,
        }),
    })
}

pub fn provider() -> MockProvider {
    MockProvider::new(|req| match req {
        Request::Judge(j) => judge(j),
        Request::Collect(c) => collect(c),
    })
}
