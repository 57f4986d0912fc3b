//! Sampling and parsing: turns raw text into record strings and field lists
//! through a [`ParsingProvider`].

pub mod heuristic;
pub mod llm;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Span;

pub use heuristic::HeuristicProvider;
pub use llm::{ChatTransport, HttpTransport, LanguageModelProvider, LlmConfig};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("provider error: {0}")]
    Provider(String),
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("cannot anchor {piece:?} into {source_text:?}")]
    IrreparableParse { source_text: String, piece: String },
}

pub const DEFAULT_MAX_SAMPLE_CHARS: usize = 4000;
pub const DEFAULT_SAMPLE_COUNT: usize = 8;

/// A substring drawn from the dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sample {
    pub span: Span,
    pub text: String,
    /// The substring starts at the beginning of the content or right after a line break.
    pub starts_at_boundary: bool,
    /// The substring runs to the end of the content.
    pub reaches_end: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampleSet {
    pub records: Vec<String>,
    pub source_intervals: Vec<Span>,
    pub user_edited: bool,
}

/// Draws `k` substrings of `max_chars / k` characters, one from each of `k`
/// equal regions of the content. Content no longer than `max_chars` is
/// returned whole.
pub fn sample_dataset(content: &str, max_chars: usize, k: usize, seed: u64) -> Vec<Sample> {
    let chars: Vec<char> = content.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let make = |start: usize, end: usize| Sample {
        span: Span::new(start, end),
        text: chars[start..end].iter().collect(),
        starts_at_boundary: start == 0 || chars[start - 1] == '\n',
        reaches_end: end == n,
    };
    if n <= max_chars {
        return vec![make(0, n)];
    }
    let k = k.clamp(1, max_chars.max(1));
    let piece = max_chars / k;
    let region = n / k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k)
        .map(|i| {
            let lo = i * region;
            let hi = if i + 1 == k { n } else { (i + 1) * region };
            let slack = (hi - lo).saturating_sub(piece);
            let start = lo + rng.random_range(0..=slack);
            make(start, (start + piece).min(n))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProviderKind {
    LanguageModel,
    Heuristic,
}

/// Source of record and field segmentations. Outputs are raw proposals;
/// callers repair them against the source text.
pub trait ParsingProvider: Send + Sync {
    fn kind(&self) -> ProviderKind;

    /// Complete records found in the samples.
    fn complete_records(&self, samples: &[Sample]) -> Result<Vec<String>, IngestError>;

    /// Proposed field list for each record.
    fn records_to_fields(&self, records: &[&str]) -> Result<Vec<Vec<String>>, IngestError>;

    /// Proposed subfield list for each field.
    fn fields_to_subfields(&self, fields: &[&str]) -> Result<Vec<Vec<String>>, IngestError>;
}

/// A segmentation whose pieces concatenate to the source string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub parts: Vec<String>,
    /// The provider output had to be repaired.
    pub repaired: bool,
}

/// Anchors proposed pieces into `source` from left to right. Skipped
/// characters become gap pieces and mark the result as repaired.
pub fn repair(source: &str, proposed: &[String]) -> Result<Segmentation, IngestError> {
    let mut parts = Vec::with_capacity(proposed.len());
    let mut repaired = false;
    let mut cursor = 0;
    for piece in proposed {
        if piece.is_empty() {
            repaired = true;
            continue;
        }
        let rest = &source[cursor..];
        let (at, text) = match rest.find(piece.as_str()) {
            Some(at) => (at, piece.as_str()),
            None => {
                let trimmed = piece.trim();
                match (!trimmed.is_empty()).then(|| rest.find(trimmed)).flatten() {
                    Some(at) => {
                        repaired = true;
                        (at, trimmed)
                    }
                    None => {
                        return Err(IngestError::IrreparableParse {
                            source_text: source.to_string(),
                            piece: piece.clone(),
                        })
                    }
                }
            }
        };
        if at > 0 {
            parts.push(rest[..at].to_string());
            repaired = true;
        }
        parts.push(text.to_string());
        cursor += at + text.len();
    }
    if cursor < source.len() {
        parts.push(source[cursor..].to_string());
        repaired = true;
    }
    Ok(Segmentation { parts, repaired })
}

/// Keeps the records that occur verbatim in some sample.
pub fn extract_complete_records(samples: &[Sample], provider: &dyn ParsingProvider) -> Result<SampleSet, IngestError> {
    let proposed = provider.complete_records(samples)?;
    let mut set = SampleSet::default();
    for record in proposed {
        if record.is_empty() {
            continue;
        }
        let hit = samples.iter().find_map(|s| {
            s.text.find(&record).map(|b| {
                let start = s.span.start + s.text[..b].chars().count();
                Span::new(start, start + record.chars().count())
            })
        });
        if let Some(span) = hit {
            set.records.push(record);
            set.source_intervals.push(span);
        }
    }
    Ok(set)
}

pub fn parse_records_to_fields(records: &[&str], provider: &dyn ParsingProvider) -> Result<Vec<Segmentation>, IngestError> {
    let proposed = provider.records_to_fields(records)?;
    if proposed.len() != records.len() {
        return Err(IngestError::MalformedResponse(format!(
            "{} field lists for {} records",
            proposed.len(),
            records.len()
        )));
    }
    records.iter().zip(&proposed).map(|(r, p)| repair(r, p)).collect()
}

pub fn parse_fields_to_subfields(fields: &[&str], provider: &dyn ParsingProvider) -> Result<Vec<Segmentation>, IngestError> {
    let proposed = provider.fields_to_subfields(fields)?;
    if proposed.len() != fields.len() {
        return Err(IngestError::MalformedResponse(format!(
            "{} subfield lists for {} fields",
            proposed.len(),
            fields.len()
        )));
    }
    fields.iter().zip(&proposed).map(|(f, p)| repair(f, p)).collect()
}
