//! Parsing provider backed by a chat-completions endpoint.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{repair, IngestError, ParsingProvider, ProviderKind, Sample};

pub const SAMPLE_PROMPT: &str = "Textual data can be divided into a list of records, which are substrings and are semantic units. The following data may include incomplete records. Parse the given data and output all complete records you could find, return only a JSON array where all elements are enclosed in double quotes. Do not add any content before or after this JSON array. Data: <sampled_string>";

pub const PARSE_PROMPT: &str = "Textual data can be divided into a list of records, where each record can be further divided into several fields. Fields are substrings of a record and are semantic units. Delimiters (e.g., enter) should be preserved as individual fields so that a record can be retained by concatenating all fields. Parse the following data into records and fields, and output them as a JSON (format: [{\"fields\": [\"...\", ...], ..., ...], where each object represents a record). Data: <dataset>";

pub const SUBFIELD_PROMPT: &str = "Fields can be divided further into a list of subfields, which are semantic substrings of inputs. Split each field into subfields. Delimiters (e.g., enter) should be preserved as individual subfields so that a field can be retained by concatenating all subfields. In the following data, each line represents a field. Parse these fields into subfields, and output them as a JSON (format: [{\"subfields\": [\"...\", ...]}, ...], where each object represents a field). Data: <dataset>";

pub fn sample_prompt(sampled: &str) -> String {
    SAMPLE_PROMPT.replace("<sampled_string>", sampled)
}

pub fn parse_prompt(dataset: &str) -> String {
    PARSE_PROMPT.replace("<dataset>", dataset)
}

pub fn subfield_prompt(dataset: &str) -> String {
    SUBFIELD_PROMPT.replace("<dataset>", dataset)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

/// Sends one chat request and returns the assistant message text.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, IngestError>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl LlmConfig {
    /// Reads `TEXTPROF_LLM_ENDPOINT`, `TEXTPROF_LLM_MODEL`, `TEXTPROF_LLM_API_KEY`
    /// (falling back to `OPENAI_API_KEY`) and `TEXTPROF_LLM_TIMEOUT_SECS`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        LlmConfig {
            endpoint: var("TEXTPROF_LLM_ENDPOINT")
                .unwrap_or_else(|| "https://api.openai.com/v1/chat/completions".to_string()),
            model: var("TEXTPROF_LLM_MODEL").unwrap_or_else(|| "gpt-4o".to_string()),
            api_key: var("TEXTPROF_LLM_API_KEY").or_else(|| var("OPENAI_API_KEY")),
            timeout: Duration::from_secs(
                var("TEXTPROF_LLM_TIMEOUT_SECS").and_then(|v| v.parse().ok()).unwrap_or(120),
            ),
        }
    }
}

pub struct HttpTransport {
    config: LlmConfig,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).build().new_agent();
        HttpTransport { config, agent }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, IngestError> {
        let mut req = self.agent.post(&self.config.endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| IngestError::Provider(e.to_string()))?;
        let body: Value = resp.body_mut().read_json().map_err(|e| IngestError::Provider(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| IngestError::Provider("response lacks choices[0].message.content".to_string()))
    }
}

pub struct LanguageModelProvider {
    transport: Box<dyn ChatTransport>,
    model: String,
}

impl LanguageModelProvider {
    pub fn new(transport: Box<dyn ChatTransport>, model: impl Into<String>) -> Self {
        LanguageModelProvider { transport, model: model.into() }
    }

    pub fn from_env() -> Self {
        let config = LlmConfig::from_env();
        let model = config.model.clone();
        LanguageModelProvider::new(Box::new(HttpTransport::new(config)), model)
    }

    /// Sends the prompt and parses the reply, asking a second time if the
    /// first reply is not usable JSON.
    fn ask<T>(&self, prompt: String, decode: impl Fn(&Value) -> Option<T>) -> Result<T, IngestError> {
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage { role: "user".to_string(), content: prompt }],
            temperature: 0.0,
        };
        let mut last = String::new();
        for _ in 0..2 {
            let reply = self.transport.complete(&request)?;
            if let Some(v) = serde_json::from_str::<Value>(strip_fences(&reply)).ok().as_ref().and_then(&decode) {
                return Ok(v);
            }
            last = reply;
        }
        Err(IngestError::MalformedResponse(truncate(&last, 200)))
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

/// Removes a surrounding Markdown code fence, if any.
pub fn strip_fences(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.find('\n').map_or("", |i| &rest[i + 1..]);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

fn string_array(v: &Value) -> Option<Vec<String>> {
    v.as_array()?.iter().map(|x| x.as_str().map(str::to_string)).collect()
}

fn keyed_arrays(v: &Value, key: &str) -> Option<Vec<Vec<String>>> {
    v.as_array()?.iter().map(|o| string_array(o.get(key)?)).collect()
}

/// Splits a flat list of pieces covering `records.concat()` back into
/// per-record lists, cutting any piece that straddles a record boundary.
fn split_at_boundaries(records: &[&str], pieces: Vec<String>) -> Vec<Vec<String>> {
    let mut out: Vec<Vec<String>> = vec![Vec::new(); records.len()];
    let mut r = 0;
    let mut left = records.first().map_or(0, |x| x.len());
    for piece in pieces {
        let mut piece = piece.as_str();
        while !piece.is_empty() {
            while left == 0 && r + 1 < records.len() {
                r += 1;
                left = records[r].len();
            }
            let take = piece.len().min(left);
            let mut cut = take;
            while !piece.is_char_boundary(cut) {
                cut -= 1;
            }
            let cut = if cut == 0 { take } else { cut };
            out[r].push(piece[..cut].to_string());
            piece = &piece[cut..];
            left -= cut;
        }
    }
    out
}

impl ParsingProvider for LanguageModelProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::LanguageModel
    }

    fn complete_records(&self, samples: &[Sample]) -> Result<Vec<String>, IngestError> {
        let mut out = Vec::new();
        for s in samples {
            let records = self.ask(sample_prompt(&s.text), string_array)?;
            for rec in records {
                // records keep the line break that ends them in the source
                let with_break = format!("{rec}\n");
                out.push(if s.text.contains(&with_break) { with_break } else { rec });
            }
        }
        Ok(out)
    }

    fn records_to_fields(&self, records: &[&str]) -> Result<Vec<Vec<String>>, IngestError> {
        let joined: String = records.concat();
        let parsed = self.ask(parse_prompt(&joined), |v| keyed_arrays(v, "fields"))?;
        let flat: Vec<String> = parsed.into_iter().flatten().collect();
        let anchored = repair(&joined, &flat)?;
        Ok(split_at_boundaries(records, anchored.parts))
    }

    fn fields_to_subfields(&self, fields: &[&str]) -> Result<Vec<Vec<String>>, IngestError> {
        let joined = fields.join("\n");
        let parsed = self.ask(subfield_prompt(&joined), |v| keyed_arrays(v, "subfields"))?;
        if parsed.len() != fields.len() {
            return Err(IngestError::MalformedResponse(format!(
                "{} subfield lists for {} fields",
                parsed.len(),
                fields.len()
            )));
        }
        Ok(parsed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    struct Canned(Mutex<Vec<String>>);

    impl ChatTransport for Canned {
        fn complete(&self, _: &ChatRequest) -> Result<String, IngestError> {
            Ok(self.0.lock().unwrap().remove(0))
        }
    }

    fn provider(replies: &[&str]) -> LanguageModelProvider {
        let replies = replies.iter().map(|s| s.to_string()).collect();
        LanguageModelProvider::new(Box::new(Canned(Mutex::new(replies))), "m")
    }

    #[test]
    fn fences_are_stripped() {
        assert_eq!(strip_fences("```json\n[\"a\"]\n```"), "[\"a\"]");
        assert_eq!(strip_fences("  [1] "), "[1]");
    }

    #[test]
    fn prose_twice_is_malformed() {
        let p = provider(&["Sure! Here are the records.", "I cannot do that."]);
        let s = Sample { span: crate::model::Span::new(0, 1), text: "x".into(), starts_at_boundary: true, reaches_end: true };
        assert!(matches!(p.complete_records(&[s]), Err(IngestError::MalformedResponse(_))));
    }

    #[test]
    fn retry_recovers() {
        let p = provider(&["nope", "```\n[\"x\"]\n```"]);
        let s = Sample { span: crate::model::Span::new(0, 1), text: "x".into(), starts_at_boundary: true, reaches_end: true };
        assert_eq!(p.complete_records(&[s]).unwrap(), vec!["x".to_string()]);
    }

    #[test]
    fn fields_are_split_back_per_record() {
        let p = provider(&[r#"[{"fields":["a",",","b","\n"]},{"fields":["c","d"]}]"#]);
        let got = p.records_to_fields(&["a,b\n", "c,d"]).unwrap();
        assert_eq!(got[0], vec!["a", ",", "b", "\n"]);
        assert_eq!(got[1], vec!["c", ",", "d"]);
    }

    #[test]
    fn prompts_substitute_placeholders() {
        assert!(sample_prompt("DATA").ends_with("Data: DATA"));
        assert!(parse_prompt("X").contains("[{\"fields\": [\"...\", ...], ..., ...]"));
        assert!(subfield_prompt("Y").ends_with("Data: Y"));
    }
}
