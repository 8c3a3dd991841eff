//! Versioned judge prompt templates and judge call settings.

use serde::{Deserialize, Serialize};
use thoughtlens_gateway::{DecodeParams, Gateway, GatewayError, JudgeRequest, Request, TemplateRef};

const EXTRACT_ITEMS_V1: &str = include_str!("../templates/extract_items_v1.txt");
const SIMILARITY_V1: &str = include_str!("../templates/similarity_v1.txt");

/// Model and decoding parameters for judge calls. Temperature defaults to 0
/// and is recorded alongside every judge-backed result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSettings {
    pub model_id: String,
    #[serde(default)]
    pub params: DecodeParams,
}

impl Default for JudgeSettings {
    fn default() -> Self {
        JudgeSettings {
            model_id: "judge".into(),
            params: DecodeParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub reference: TemplateRef,
    body: &'static str,
}

impl PromptTemplate {
    pub fn extract_items() -> Self {
        PromptTemplate {
            reference: TemplateRef::new("extract-items", "v1"),
            body: EXTRACT_ITEMS_V1,
        }
    }

    pub fn similarity() -> Self {
        PromptTemplate {
            reference: TemplateRef::new("trace-similarity", "v1"),
            body: SIMILARITY_V1,
        }
    }

    /// Substitutes `{{name}}` placeholders. Values are inserted verbatim.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = self.body.to_string();
        for (name, value) in vars {
            out = out.replace(&format!("{{{{{name}}}}}"), value);
        }
        out
    }

    pub(crate) fn call(
        &self,
        gateway: &Gateway,
        settings: &JudgeSettings,
        vars: &[(&str, &str)],
    ) -> Result<String, GatewayError> {
        let req = Request::Judge(JudgeRequest {
            template: self.reference.clone(),
            prompt: self.render(vars),
            model_id: settings.model_id.clone(),
            params: settings.params.clone(),
        });
        gateway.complete(&req).map(|r| r.body)
    }
}

/// Strips a surrounding Markdown code fence, if any.
pub fn strip_code_fence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_fills_every_placeholder() {
        let p = PromptTemplate::extract_items().render(&[("source_kind", "thought"), ("text", "A cat.")]);
        assert!(p.contains("Source kind: thought"));
        assert!(p.contains("A cat."));
        assert!(!p.contains("{{"));
        let s = PromptTemplate::similarity().render(&[("trace_a", "x"), ("trace_b", "y")]);
        assert!(!s.contains("{{"));
    }

    #[test]
    fn code_fences_are_removed() {
        assert_eq!(strip_code_fence("```json\n[\"a\"]\n```"), "[\"a\"]");
        assert_eq!(strip_code_fence("  [\"a\"] "), "[\"a\"]");
    }
}
