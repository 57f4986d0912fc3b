//! Promotion of sample structure to the whole text: every sample record
//! shape becomes a template, and the text is consumed left to right by the
//! locally best fuzzy template match.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::model::{ClusterId, Field, Record, Span};
use crate::pattern::{self, Matcher, SyntacticPattern};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchConfig {
    pub alpha: f64,
    pub max_edits: u32,
    /// Start-position search window; defaults to four times the longest
    /// template source record, capped at 4096 characters.
    pub lookahead: Option<usize>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { alpha: 0.01, max_edits: 3, lookahead: None }
    }
}

pub const LOOKAHEAD_CAP: usize = 4096;

pub fn objective(mf: usize, uc: usize, alpha: f64) -> f64 {
    mf as f64 - alpha * uc as f64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", from = "TemplateRepr")]
pub struct StructuralTemplate {
    pub id: usize,
    pub field_patterns: Vec<SyntacticPattern>,
    /// Index of the first sample record with this shape.
    pub source_record: usize,
    /// Longest sample record (in characters) with this shape.
    pub source_len: usize,
    #[serde(skip)]
    matchers: Vec<Matcher>,
    #[serde(skip)]
    bounded: Vec<Option<usize>>,
    #[serde(skip)]
    exact: Vec<bool>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct TemplateRepr {
    id: usize,
    field_patterns: Vec<SyntacticPattern>,
    source_record: usize,
    source_len: usize,
}

impl From<TemplateRepr> for StructuralTemplate {
    fn from(r: TemplateRepr) -> Self {
        StructuralTemplate::new(r.id, r.field_patterns, r.source_record, r.source_len)
    }
}

impl PartialEq for StructuralTemplate {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.field_patterns == other.field_patterns
            && self.source_record == other.source_record
            && self.source_len == other.source_len
    }
}

impl StructuralTemplate {
    pub fn new(id: usize, field_patterns: Vec<SyntacticPattern>, source_record: usize, source_len: usize) -> Self {
        assert!(!field_patterns.is_empty(), "template without fields");
        let matchers = field_patterns.iter().map(Matcher::new).collect();
        let bounded = field_patterns.iter().map(fixed_len).collect();
        let exact = field_patterns.iter().map(delimiter_only).collect();
        StructuralTemplate { id, field_patterns, source_record, source_len, matchers, bounded, exact }
    }

    pub fn field_count(&self) -> usize {
        self.field_patterns.len()
    }
}

fn fixed_len(p: &SyntacticPattern) -> Option<usize> {
    use pattern::{Repeat, TokenClass};
    let mut total = 0;
    for t in &p.tokens {
        let unit = match &t.class {
            TokenClass::Literal { value } => value.chars().count(),
            TokenClass::OneOf { values } => values.iter().map(|v| v.chars().count()).max().unwrap_or(0),
            _ => 1,
        };
        match t.repeat {
            Repeat::Exactly(n) => total += unit * n,
            Repeat::Plus => return None,
        }
    }
    Some(total)
}

/// Delimiter slots match without edits, so that a fuzzy match cannot turn
/// a line break into a data character.
fn delimiter_only(p: &SyntacticPattern) -> bool {
    use pattern::TokenClass;
    !p.tokens.is_empty()
        && p.tokens.iter().all(|t| match &t.class {
            TokenClass::Literal { value } => is_delimiter(value),
            TokenClass::OneOf { values } => values.iter().all(|v| is_delimiter(v)),
            _ => false,
        })
}

/// A field that is only punctuation or whitespace is a delimiter and stays
/// literal in the template shape.
pub fn is_delimiter(text: &str) -> bool {
    !text.is_empty() && text.chars().all(|c| !c.is_alphanumeric())
}

/// One template per distinct delimiter skeleton, numbered by first appearance.
/// Non-delimiter slots get a pattern inferred over all records of the shape.
pub fn build_templates(sample: &[Vec<String>]) -> Vec<StructuralTemplate> {
    let mut index: HashMap<Vec<Option<&str>>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (r, fields) in sample.iter().enumerate() {
        if fields.is_empty() {
            continue;
        }
        let skeleton: Vec<Option<&str>> =
            fields.iter().map(|f| is_delimiter(f).then_some(f.as_str())).collect();
        let next = groups.len();
        let g = *index.entry(skeleton).or_insert(next);
        if g == next {
            groups.push(Vec::new());
        }
        groups[g].push(r);
    }
    groups
        .iter()
        .enumerate()
        .map(|(id, members)| {
            let first = &sample[members[0]];
            let patterns = (0..first.len())
                .map(|i| {
                    if is_delimiter(&first[i]) {
                        SyntacticPattern::literal(&first[i])
                    } else {
                        let vals: Vec<&str> = members.iter().map(|&r| sample[r][i].as_str()).collect();
                        pattern::infer(&vals)
                    }
                })
                .collect();
            let longest = members.iter().map(|&r| sample[r].iter().map(|f| f.chars().count()).sum()).max().unwrap_or(0);
            StructuralTemplate::new(id, patterns, members[0], longest)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchResult {
    pub template_id: usize,
    pub record_span: Span,
    /// Absolute spans tiling `record_span`.
    pub field_spans: Vec<Span>,
    pub edits_per_field: Vec<u32>,
    /// First template field covered; non-zero only for partial matches.
    pub first_field: usize,
    /// Matched field count; equals the number of field spans.
    pub matched_fields: usize,
    pub objective_contribution: f64,
}

impl MatchResult {
    pub fn total_edits(&self) -> u32 {
        self.edits_per_field.iter().sum()
    }

    pub fn to_record(&self) -> Record {
        let base = self.record_span.start;
        Record {
            span: self.record_span,
            fields: self
                .field_spans
                .iter()
                .map(|s| Field::new(Span::new(s.start - base, s.end - base)))
                .collect(),
            cluster: ClusterId::Unassigned,
        }
    }
}

/// Memoized per-field match ends for one text.
struct Scanner<'a> {
    text: &'a [char],
    config: &'a MatchConfig,
    window: usize,
    cache: HashMap<(usize, usize, usize), Vec<(usize, u32)>>,
}

impl<'a> Scanner<'a> {
    fn field_ends(&mut self, t: &StructuralTemplate, f: usize, at: usize) -> Vec<(usize, u32)> {
        let key = (t.id, f, at);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let k = if t.exact[f] { 0 } else { self.config.max_edits };
        let max_len = match t.bounded[f] {
            Some(n) => n + k as usize,
            None => self.window,
        };
        let ends: Vec<(usize, u32)> =
            t.matchers[f].match_prefixes(self.text, at, max_len, k).into_iter().filter(|&(e, _)| e > at).collect();
        self.cache.insert(key, ends.clone());
        ends
    }

    /// Best contiguous match of fields `from..to` starting at `s`: fewest
    /// total edits, then longest span. `exact` forbids any edit.
    fn chain(&mut self, t: &StructuralTemplate, from: usize, to: usize, s: usize, exact: bool) -> Option<(Vec<Span>, Vec<u32>)> {
        // layer maps end position -> (total edits, previous end, field edits)
        let mut layers: Vec<HashMap<usize, (u32, usize, u32)>> = Vec::with_capacity(to - from);
        let mut frontier: Vec<(usize, u32)> = vec![(s, 0)];
        for f in from..to {
            let mut layer: HashMap<usize, (u32, usize, u32)> = HashMap::new();
            for &(p, cost) in &frontier {
                for (e, c) in self.field_ends(t, f, p) {
                    if exact && c > 0 {
                        continue;
                    }
                    let total = cost + c;
                    let better = layer.get(&e).is_none_or(|&(old, prev, _)| total < old || (total == old && p < prev));
                    if better {
                        layer.insert(e, (total, p, c));
                    }
                }
            }
            if layer.is_empty() {
                return None;
            }
            frontier = layer.iter().map(|(&e, &(c, _, _))| (e, c)).collect();
            frontier.sort_unstable();
            layers.push(layer);
        }
        let last = layers.last()?;
        let (&end, _) = last.iter().min_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(a.0)))?;
        let mut spans = Vec::with_capacity(to - from);
        let mut edits = Vec::with_capacity(to - from);
        let mut e = end;
        for layer in layers.iter().rev() {
            let (_, prev, c) = layer[&e];
            spans.push(Span::new(prev, e));
            edits.push(c);
            e = prev;
        }
        spans.reverse();
        edits.reverse();
        Some((spans, edits))
    }

    /// Full fuzzy match of a template at `s`, or else its longest exact
    /// contiguous run of at least half its fields.
    fn match_at(&mut self, t: &StructuralTemplate, s: usize) -> Option<MatchResult> {
        let n = t.field_count();
        let make = |spans: Vec<Span>, edits: Vec<u32>, first: usize| MatchResult {
            template_id: t.id,
            record_span: Span::new(spans[0].start, spans.last().unwrap().end),
            matched_fields: spans.len(),
            field_spans: spans,
            edits_per_field: edits,
            first_field: first,
            objective_contribution: 0.0,
        };
        if let Some((spans, edits)) = self.chain(t, 0, n, s, false) {
            return Some(make(spans, edits, 0));
        }
        let min = n.div_ceil(2);
        for len in (min.max(1)..n).rev() {
            for from in 0..=n - len {
                if let Some((spans, edits)) = self.chain(t, from, from + len, s, true) {
                    return Some(make(spans, edits, from));
                }
            }
        }
        None
    }
}

/// Fuzzy match of one template at the earliest start at or after `pos`.
pub fn fuzzy_match_template(
    template: &StructuralTemplate,
    text: &str,
    pos: usize,
    config: &MatchConfig,
) -> Option<MatchResult> {
    let chars: Vec<char> = text.chars().collect();
    let mut scanner = Scanner { text: &chars, config, window: chars.len().max(1), cache: HashMap::new() };
    (pos..chars.len()).find_map(|s| {
        let n = template.field_count();
        scanner.chain(template, 0, n, s, false).map(|(spans, edits)| MatchResult {
            template_id: template.id,
            record_span: Span::new(spans[0].start, spans.last().unwrap().end),
            matched_fields: n,
            field_spans: spans,
            edits_per_field: edits,
            first_field: 0,
            objective_contribution: 0.0,
        })
    })
}

pub fn lookahead(templates: &[StructuralTemplate], config: &MatchConfig) -> usize {
    config
        .lookahead
        .unwrap_or_else(|| (4 * templates.iter().map(|t| t.source_len).max().unwrap_or(1)).min(LOOKAHEAD_CAP))
        .max(1)
}

/// Locally best match starting in `[pos, pos + lookahead)`.
///
/// A start is scored `matched fields - alpha * (skipped chars + edits)`.
/// Starts at or past the end of an already found candidate are not
/// considered, so a complete record is never skipped over. Returns the match
/// (if any) and the position where scanning resumes.
fn find_locally_optimal(scanner: &mut Scanner<'_>, templates: &[StructuralTemplate], pos: usize) -> (Option<MatchResult>, usize) {
    let alpha = scanner.config.alpha;
    let len = scanner.text.len();
    let limit = (pos + scanner.window).min(len);
    let f_max = templates.iter().map(|t| t.field_count()).max().unwrap_or(0) as f64;
    let mut best: Option<MatchResult> = None;
    let mut e_min = usize::MAX;
    for s in pos..limit {
        if s >= e_min {
            break;
        }
        let skip_cost = alpha * (s - pos) as f64;
        if let Some(b) = &best {
            if b.objective_contribution > f_max - skip_cost + 1e-9 {
                break;
            }
        }
        for t in templates {
            let Some(mut m) = scanner.match_at(t, s) else { continue };
            e_min = e_min.min(m.record_span.end);
            m.objective_contribution = m.matched_fields as f64 - skip_cost - alpha * m.total_edits() as f64;
            let replace = match &best {
                None => true,
                Some(b) => {
                    let (ms, bs) = (m.objective_contribution, b.objective_contribution);
                    if (ms - bs).abs() > 1e-9 {
                        ms > bs
                    } else if m.total_edits() != b.total_edits() {
                        m.total_edits() < b.total_edits()
                    } else if m.record_span.len() != b.record_span.len() {
                        m.record_span.len() > b.record_span.len()
                    } else {
                        m.template_id < b.template_id
                    }
                }
            };
            if replace {
                best = Some(m);
            }
        }
    }
    match best {
        Some(m) => {
            let next = m.record_span.end;
            (Some(m), next)
        }
        None => (None, limit),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchOutcome {
    pub matches: Vec<MatchResult>,
    pub residue: Vec<Span>,
    pub mf: usize,
    pub uc: usize,
    pub alpha: f64,
    pub f: f64,
}

/// Consumes the whole text with repeated locally optimal matches.
pub fn parse_remaining(templates: &[StructuralTemplate], text: &str, config: &MatchConfig) -> MatchOutcome {
    let chars: Vec<char> = text.chars().collect();
    parse_chars(templates, &chars, config)
}

pub fn parse_chars(templates: &[StructuralTemplate], chars: &[char], config: &MatchConfig) -> MatchOutcome {
    let window = lookahead(templates, config);
    let mut scanner = Scanner { text: chars, config, window, cache: HashMap::new() };
    let mut matches = Vec::new();
    let mut residue: Vec<Span> = Vec::new();
    let mut pos = 0;
    let push_residue = |residue: &mut Vec<Span>, a: usize, b: usize| {
        if b > a {
            match residue.last_mut() {
                Some(last) if last.end == a => last.end = b,
                _ => residue.push(Span::new(a, b)),
            }
        }
    };
    while pos < chars.len() {
        if templates.is_empty() {
            push_residue(&mut residue, pos, chars.len());
            break;
        }
        let (m, next) = find_locally_optimal(&mut scanner, templates, pos);
        match m {
            Some(m) => {
                push_residue(&mut residue, pos, m.record_span.start);
                matches.push(m);
            }
            None => push_residue(&mut residue, pos, next),
        }
        pos = next;
        // entries behind the cursor are never read again
        if scanner.cache.len() > 1 << 16 {
            scanner.cache.retain(|&(_, _, at), _| at >= pos);
        }
    }
    let mf = matches.iter().map(|m| m.matched_fields).sum();
    let uc = residue.iter().map(Span::len).sum();
    MatchOutcome { matches, residue, mf, uc, alpha: config.alpha, f: objective(mf, uc, config.alpha) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{Repeat, Token, TokenClass};

    fn date_template() -> StructuralTemplate {
        let d = |n| SyntacticPattern { tokens: vec![Token::new(TokenClass::Digit, Repeat::Exactly(n))] };
        StructuralTemplate::new(0, vec![d(4), SyntacticPattern::literal("-"), d(2)], 0, 7)
    }

    #[test]
    fn objective_formula() {
        assert!((objective(12, 40, 0.01) - 11.6).abs() < 1e-12);
        assert_eq!(objective(0, 0, 0.01), 0.0);
        assert!((objective(5, 100, 0.01) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn exact_and_fuzzy_template_match() {
        let t = date_template();
        let cfg = MatchConfig::default();
        let m = fuzzy_match_template(&t, "2021-07", 0, &cfg).unwrap();
        assert_eq!(m.edits_per_field, vec![0, 0, 0]);
        let m = fuzzy_match_template(&t, "2021-7", 0, &cfg).unwrap();
        assert_eq!(m.record_span, Span::new(0, 6));
        assert!(fuzzy_match_template(&t, "2021_07", 0, &cfg).is_none());
        assert_eq!(m.total_edits(), 1);
        assert!(fuzzy_match_template(&t, "hello world", 0, &cfg).is_none());
    }

    #[test]
    fn skips_leading_noise() {
        let t = date_template();
        let text = "##########2021-07";
        let out = parse_remaining(&[t], text, &MatchConfig::default());
        assert_eq!(out.matches.len(), 1);
        assert_eq!(out.residue, vec![Span::new(0, 10)]);
        assert!((out.matches[0].objective_contribution - (3.0 - 0.1)).abs() < 1e-9);
    }

    #[test]
    fn templates_from_sample_group_by_skeleton() {
        let sample = vec![
            vec!["a".to_string(), ",".into(), "1".into(), "\n".into()],
            vec!["bb".to_string(), ",".into(), "22".into(), "\n".into()],
            vec!["x".to_string(), "\n".into()],
        ];
        let ts = build_templates(&sample);
        assert_eq!(ts.len(), 2);
        assert_eq!(ts[0].field_count(), 4);
        assert_eq!(ts[0].source_len, 6);
        assert!(ts[0].field_patterns[0].matches("abc"));
    }

    #[test]
    fn empty_text() {
        let out = parse_remaining(&[date_template()], "", &MatchConfig::default());
        assert!(out.matches.is_empty() && out.residue.is_empty());
    }

    #[test]
    fn trailing_record_without_line_break_matches_partially() {
        let sample = vec![
            vec!["ab".to_string(), ",".into(), "12".into(), "\n".into()],
            vec!["cd".to_string(), ",".into(), "34".into(), "\n".into()],
        ];
        let ts = build_templates(&sample);
        let out = parse_remaining(&ts, "gh,56\nef,5x", &MatchConfig::default());
        assert_eq!(out.matches.len(), 2);
        assert_eq!(out.matches[1].matched_fields, 2);
        assert_eq!(out.matches[1].record_span, Span::new(6, 9));
        assert_eq!(out.residue, vec![Span::new(9, 11)]);
    }
}
