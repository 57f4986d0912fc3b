//! Deterministic parsing provider that needs no network access.
//!
//! Records are lines unless the text shows a stronger block structure
//! (repeated separator lines, blank-line separated blocks, repeating
//! key-value blocks, or indented continuation lines). Fields are split on
//! the delimiter whose per-line count is most consistent.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;

use super::{IngestError, ParsingProvider, ProviderKind, Sample};
use crate::pattern::RunKind;

/// How the text is divided into records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RecordMode {
    Line,
    /// Records end with a repeated separator line such as `----`.
    Separator(String),
    BlankLine,
    /// Records start at every line with this key.
    KeyValue(String),
    /// Records start at flush lines beginning with this kind of character;
    /// all other lines continue the previous record.
    Continuation(RunKind),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Delimiter {
    Char(char),
    /// Runs of spaces; at most `max_split` per line, the rest stays in one tail field.
    Spaces { max_split: usize },
    /// `key: value` lines.
    KeyValue,
    None,
}

pub const DELIMITER_CANDIDATES: [char; 4] = ['\t', ',', ';', '|'];

static KV_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z][A-Za-z0-9_-]*(?: [A-Za-z][A-Za-z0-9_-]*){0,3}) ?[:=](?: |$)").unwrap());

#[derive(Clone, Debug, Default)]
pub struct HeuristicProvider;

impl HeuristicProvider {
    pub fn new() -> Self {
        HeuristicProvider
    }
}

/// Lines with their trailing line break.
fn lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

fn body(line: &str) -> &str {
    line.strip_suffix('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).unwrap_or(line)
}

fn is_blank(line: &str) -> bool {
    body(line).trim().is_empty()
}

fn is_separator_line(line: &str) -> bool {
    let b = body(line).trim_end();
    b.chars().count() >= 2 && b.chars().all(|c| !c.is_alphanumeric() && !c.is_whitespace())
}

fn kv_key(line: &str) -> Option<&str> {
    KV_LINE.captures(body(line)).map(|c| c.get(1).unwrap().as_str())
}

fn first_kind(line: &str) -> Option<RunKind> {
    line.trim_start().chars().next().filter(|c| *c != '\n').map(|c| {
        if c.is_ascii_digit() {
            RunKind::Digit
        } else if c.is_alphabetic() {
            RunKind::Letter
        } else {
            RunKind::Other(c)
        }
    })
}

pub fn detect_record_mode(text: &str) -> RecordMode {
    let ls = lines(text);
    let content: Vec<&str> = ls.iter().copied().filter(|l| !is_blank(l)).collect();
    if content.len() < 2 {
        return RecordMode::Line;
    }

    let mut seps: HashMap<&str, usize> = HashMap::new();
    let mut sep_lines = 0;
    for l in &content {
        if is_separator_line(l) {
            *seps.entry(body(l).trim_end()).or_default() += 1;
            sep_lines += 1;
        }
    }
    if let Some((sep, n)) = seps.into_iter().max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0))) {
        // a real separator is one fixed line, not assorted punctuation noise
        if n >= 2 && n * 2 <= content.len() && n * 5 >= sep_lines * 4 {
            return RecordMode::Separator(sep.to_string());
        }
    }

    let blocks = blank_blocks(&ls);
    if blocks.len() >= 2 {
        let multi = blocks.iter().filter(|b| b.len() > 1).count();
        if multi * 2 >= blocks.len() {
            return RecordMode::BlankLine;
        }
    }

    let keys: Vec<Option<&str>> = content.iter().map(|l| kv_key(l)).collect();
    let kv_lines = keys.iter().flatten().count();
    if kv_lines * 5 >= content.len() * 4 {
        if let Some(first) = keys.iter().flatten().next() {
            let starts = keys.iter().filter(|k| **k == Some(*first)).count();
            let mut shapes: HashMap<Vec<Option<&str>>, usize> = HashMap::new();
            let mut cur: Vec<Option<&str>> = Vec::new();
            for k in &keys {
                if *k == Some(*first) && !cur.is_empty() {
                    *shapes.entry(std::mem::take(&mut cur)).or_default() += 1;
                }
                cur.push(*k);
            }
            *shapes.entry(cur).or_default() += 1;
            let top = shapes.values().copied().max().unwrap_or(0);
            if starts >= 2 && shapes.keys().any(|s| s.len() > 1) && top * 5 >= starts * 3 {
                return RecordMode::KeyValue(first.to_string());
            }
        }
    }

    let mut kinds: HashMap<RunKind, usize> = HashMap::new();
    let flush: Vec<&str> = content.iter().copied().filter(|l| !l.starts_with([' ', '\t'])).collect();
    for l in &flush {
        if let Some(k) = first_kind(l) {
            *kinds.entry(k).or_default() += 1;
        }
    }
    if let Some((&dominant, &count)) = kinds.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0))) {
        let continuation = content
            .iter()
            .skip(1)
            .filter(|l| l.starts_with([' ', '\t']) && first_kind(l) != Some(dominant))
            .count();
        if flush.len() >= 2 && count * 5 >= flush.len() * 4 && continuation > 0 && continuation * 2 <= content.len() {
            return RecordMode::Continuation(dominant);
        }
    }
    RecordMode::Line
}

fn blank_blocks<'a>(ls: &[&'a str]) -> Vec<Vec<&'a str>> {
    let mut blocks = Vec::new();
    let mut cur = Vec::new();
    for l in ls {
        if is_blank(l) {
            if !cur.is_empty() {
                blocks.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(*l);
        }
    }
    if !cur.is_empty() {
        blocks.push(cur);
    }
    blocks
}

/// Byte ranges of the records of `text` under `mode`. Text outside the
/// ranges (blank lines, stray leading lines) belongs to no record.
pub fn split_records(text: &str, mode: &RecordMode) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut offset = 0;
    let mut open: Option<usize> = None;
    let ls = lines(text);
    let close = |out: &mut Vec<(usize, usize)>, open: &mut Option<usize>, end: usize| {
        if let Some(s) = open.take() {
            if end > s {
                out.push((s, end));
            }
        }
    };
    for (i, l) in ls.iter().enumerate() {
        let start = offset;
        let end = offset + l.len();
        offset = end;
        match mode {
            RecordMode::Line => {
                if !is_blank(l) {
                    out.push((start, end));
                }
            }
            RecordMode::Separator(sep) => {
                if open.is_none() && !is_blank(l) {
                    open = Some(start);
                }
                if body(l).trim_end() == sep {
                    close(&mut out, &mut open, end);
                }
            }
            RecordMode::BlankLine => {
                if is_blank(l) {
                    // blank lines stay with the record they follow
                    if open.is_some() {
                        let next_blank = ls.get(i + 1).is_none_or(|n| is_blank(n));
                        if !next_blank {
                            close(&mut out, &mut open, end);
                        }
                    }
                } else if open.is_none() {
                    open = Some(start);
                }
            }
            RecordMode::KeyValue(key) => {
                if kv_key(l) == Some(key.as_str()) {
                    close(&mut out, &mut open, start);
                    open = Some(start);
                } else if is_blank(l) && open.is_none() {
                    continue;
                }
            }
            RecordMode::Continuation(kind) => {
                if is_blank(l) {
                    continue;
                }
                let starts = !l.starts_with([' ', '\t']) && first_kind(l) == Some(*kind);
                if starts || open.is_none() {
                    close(&mut out, &mut open, start);
                    open = Some(start);
                }
            }
        }
    }
    close(&mut out, &mut open, text.len());
    out
}

/// Splits a line body (without its line break) on a character delimiter,
/// ignoring delimiters inside double quotes. Adjacent spaces join the
/// delimiter field, except around tabs.
fn split_on_char(line: &str, delim: char) -> Vec<String> {
    let mut parts = Vec::new();
    let mut in_quotes = false;
    let mut field_start = 0;
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (b, c) = chars[i];
        if c == '"' {
            in_quotes = !in_quotes;
        } else if c == delim && !in_quotes {
            let mut ds = b;
            let mut de = b + c.len_utf8();
            if delim != '\t' {
                while ds > field_start && line[..ds].ends_with(' ') {
                    ds -= 1;
                }
                let mut j = i + 1;
                while j < chars.len() && chars[j].1 == ' ' {
                    de += 1;
                    j += 1;
                }
                i = j - 1;
            }
            if ds > field_start {
                parts.push(line[field_start..ds].to_string());
            }
            parts.push(line[ds..de].to_string());
            field_start = de;
        }
        i += 1;
    }
    if field_start < line.len() {
        parts.push(line[field_start..].to_string());
    }
    parts
}

fn split_on_spaces(line: &str, max_split: usize) -> Vec<String> {
    let mut parts = Vec::new();
    let mut splits = 0;
    let mut field_start = 0;
    let mut run_start: Option<usize> = None;
    for (b, c) in line.char_indices() {
        if splits >= max_split {
            break;
        }
        if c == ' ' {
            run_start.get_or_insert(b);
        } else if let Some(rs) = run_start.take() {
            if rs > field_start {
                parts.push(line[field_start..rs].to_string());
            }
            parts.push(line[rs..b].to_string());
            field_start = b;
            splits += 1;
        }
    }
    if let Some(rs) = run_start {
        // trailing spaces after the last split
        if splits < max_split {
            if rs > field_start {
                parts.push(line[field_start..rs].to_string());
            }
            parts.push(line[rs..].to_string());
            return parts;
        }
    }
    if field_start < line.len() {
        parts.push(line[field_start..].to_string());
    }
    parts
}

fn split_key_value(line: &str) -> Vec<String> {
    match KV_LINE.captures(line) {
        Some(c) => {
            let key = c.get(1).unwrap();
            let whole = c.get(0).unwrap();
            let mut parts = vec![key.as_str().to_string(), line[key.end()..whole.end()].to_string()];
            if whole.end() < line.len() {
                parts.push(line[whole.end()..].to_string());
            }
            parts
        }
        None if line.is_empty() => Vec::new(),
        None => vec![line.to_string()],
    }
}

fn count_char(line: &str, delim: char) -> usize {
    let mut in_quotes = false;
    let mut n = 0;
    for c in line.chars() {
        if c == '"' {
            in_quotes = !in_quotes;
        } else if c == delim && !in_quotes {
            n += 1;
        }
    }
    n
}

fn space_runs(line: &str) -> usize {
    let mut n = 0;
    let mut prev_space = false;
    for c in line.trim_end_matches(' ').chars() {
        if c == ' ' && !prev_space {
            n += 1;
        }
        prev_space = c == ' ';
    }
    n
}

/// Coverage times modal consistency of per-line delimiter counts.
pub fn delimiter_score(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let n = counts.len() as f64;
    let coverage = counts.iter().filter(|&&c| c > 0).count() as f64 / n;
    let mut freq: HashMap<usize, usize> = HashMap::new();
    for &c in counts.iter().filter(|&&c| c > 0) {
        *freq.entry(c).or_default() += 1;
    }
    let modal = freq.values().copied().max().unwrap_or(0) as f64;
    coverage * (modal / n)
}

/// Chooses the field delimiter for a set of line bodies.
pub fn choose_delimiter(line_bodies: &[&str]) -> Delimiter {
    let bodies: Vec<&str> = line_bodies.iter().copied().filter(|l| !l.trim().is_empty()).collect();
    if bodies.is_empty() {
        return Delimiter::None;
    }
    let kv = bodies.iter().filter(|l| KV_LINE.is_match(l)).count();
    if kv * 5 >= bodies.len() * 4 && bodies.iter().all(|l| count_char(l, '\t') == 0) {
        return Delimiter::KeyValue;
    }
    let mut best = (0.0, Delimiter::None);
    for d in DELIMITER_CANDIDATES {
        let counts: Vec<usize> = bodies.iter().map(|l| count_char(l, d)).collect();
        let s = delimiter_score(&counts);
        if s > best.0 {
            best = (s, Delimiter::Char(d));
        }
    }
    let runs: Vec<usize> = bodies.iter().map(|l| space_runs(l)).collect();
    let s = delimiter_score(&runs);
    if s > best.0 {
        let mut sorted = runs.clone();
        sorted.sort_unstable();
        let max_split = sorted[(sorted.len() - 1) / 10].max(1);
        best = (s, Delimiter::Spaces { max_split });
    }
    best.1
}

/// Splits a record into fields; every line break is its own field.
pub fn split_fields(record: &str, delimiter: Delimiter) -> Vec<String> {
    let mut out = Vec::new();
    for line in lines(record) {
        let (b, brk) = match line.strip_suffix('\n') {
            Some(b) => (b, "\n"),
            None => (line, ""),
        };
        let (b, cr) = match b.strip_suffix('\r') {
            Some(x) => (x, "\r"),
            None => (b, ""),
        };
        let mut parts = match delimiter {
            Delimiter::Char(d) => split_on_char(b, d),
            Delimiter::Spaces { max_split } => split_on_spaces(b, max_split),
            Delimiter::KeyValue => split_key_value(b),
            Delimiter::None if b.is_empty() => Vec::new(),
            Delimiter::None => vec![b.to_string()],
        };
        let brk = format!("{cr}{brk}");
        if !brk.is_empty() {
            parts.push(brk);
        }
        out.extend(parts);
    }
    out
}

static LIST_SEP: LazyLock<Regex> = LazyLock::new(|| Regex::new(r", and |, | and |; ").unwrap());

/// List-aware split of one field: separators of an enumeration if present,
/// otherwise maximal digit runs, letter runs and single other characters.
pub fn split_subfields(field: &str) -> Vec<String> {
    if LIST_SEP.is_match(field) {
        let mut out = Vec::new();
        let mut last = 0;
        for m in LIST_SEP.find_iter(field) {
            if m.start() > last {
                out.push(field[last..m.start()].to_string());
            }
            out.push(m.as_str().to_string());
            last = m.end();
        }
        if last < field.len() {
            out.push(field[last..].to_string());
        }
        return out;
    }
    crate::pattern::tokenize(field).into_iter().map(|r| r.text.to_string()).collect()
}

/// Whole-text parse: record strings with their field lists.
pub fn heuristic_parse(text: &str) -> Vec<(String, Vec<String>)> {
    let mode = detect_record_mode(text);
    let records: Vec<&str> = split_records(text, &mode).into_iter().map(|(s, e)| &text[s..e]).collect();
    let delimiter = choose_delimiter(&all_line_bodies(&records));
    records.into_iter().map(|r| (r.to_string(), split_fields(r, delimiter))).collect()
}

fn all_line_bodies<'a>(records: &[&'a str]) -> Vec<&'a str> {
    records.iter().flat_map(|r| lines(r)).map(body).collect()
}

fn line_mode(mode: &RecordMode) -> bool {
    matches!(mode, RecordMode::Line)
}

impl ParsingProvider for HeuristicProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Heuristic
    }

    fn complete_records(&self, samples: &[Sample]) -> Result<Vec<String>, IngestError> {
        if samples.is_empty() {
            return Ok(Vec::new());
        }
        // one record mode for all samples, learned from their whole lines
        let joined: String = samples.iter().map(trim_to_lines).collect();
        let mode = detect_record_mode(&joined);
        let mut out = Vec::new();
        for s in samples {
            let text = trim_to_lines(s);
            let mut recs: Vec<&str> = split_records(text, &mode).into_iter().map(|(a, b)| &text[a..b]).collect();
            if line_mode(&mode) {
                if !s.reaches_end && recs.last().is_some_and(|r| !r.ends_with('\n')) {
                    recs.pop();
                }
            } else {
                if !s.reaches_end && !recs.is_empty() {
                    recs.pop();
                }
                if s.span.start != 0 && !recs.is_empty() {
                    recs.remove(0);
                }
            }
            // a line of bare punctuation is noise, not a record
            out.extend(recs.into_iter().filter(|r| r.chars().any(char::is_alphanumeric)).map(str::to_string));
        }
        Ok(out)
    }

    fn records_to_fields(&self, records: &[&str]) -> Result<Vec<Vec<String>>, IngestError> {
        let delimiter = choose_delimiter(&all_line_bodies(records));
        Ok(records.iter().map(|r| split_fields(r, delimiter)).collect())
    }

    fn fields_to_subfields(&self, fields: &[&str]) -> Result<Vec<Vec<String>>, IngestError> {
        Ok(fields.iter().map(|f| split_subfields(f)).collect())
    }
}

/// Drops a partial first line and a partial last line.
fn trim_to_lines(sample: &Sample) -> &str {
    let mut text = sample.text.as_str();
    if !sample.starts_at_boundary {
        text = match text.find('\n') {
            Some(i) => &text[i + 1..],
            None => "",
        };
    }
    if !sample.reaches_end {
        text = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn tiny_csv() {
        let parsed = heuristic_parse("a,b\nc,d");
        assert_eq!(parsed.len(), 2);
        assert_eq!(parsed[0], ("a,b\n".to_string(), s(&["a", ",", "b", "\n"])));
        assert_eq!(parsed[1], ("c,d".to_string(), s(&["c", ",", "d"])));
    }

    #[test]
    fn plain_sentence_splits_on_spaces() {
        let parsed = heuristic_parse("no delimiters here");
        assert_eq!(parsed, vec![("no delimiters here".to_string(), s(&["no", " ", "delimiters", " ", "here"]))]);
        assert!(heuristic_parse("").is_empty());
    }

    #[test]
    fn quoted_commas_stay_inside_fields() {
        let f = split_fields("\"Smith, J\",42\n", Delimiter::Char(','));
        assert_eq!(f, s(&["\"Smith, J\"", ",", "42", "\n"]));
    }

    #[test]
    fn comma_delimiter_absorbs_spaces() {
        assert_eq!(split_fields("a, b", Delimiter::Char(',')), s(&["a", ", ", "b"]));
        assert_eq!(split_fields("a\t\tb", Delimiter::Char('\t')), s(&["a", "\t", "\t", "b"]));
    }

    #[test]
    fn spaces_respect_max_split() {
        let f = split_fields("2024-01-01 INFO started the server\n", Delimiter::Spaces { max_split: 2 });
        assert_eq!(f, s(&["2024-01-01", " ", "INFO", " ", "started the server", "\n"]));
    }

    #[test]
    fn blank_line_blocks() {
        let text = "a: 1\nb: 2\n\na: 3\nb: 4\n";
        assert_eq!(detect_record_mode(text), RecordMode::BlankLine);
        let recs: Vec<&str> = split_records(text, &RecordMode::BlankLine).into_iter().map(|(x, y)| &text[x..y]).collect();
        assert_eq!(recs, vec!["a: 1\nb: 2\n\n", "a: 3\nb: 4\n"]);
        assert_eq!(split_fields(recs[0], Delimiter::KeyValue), s(&["a", ": ", "1", "\n", "b", ": ", "2", "\n", "\n"]));
    }

    #[test]
    fn key_value_sentinel() {
        let text = "Name: x\nAge: 1\nName: y\nAge: 2\n";
        assert_eq!(detect_record_mode(text), RecordMode::KeyValue("Name".into()));
        let recs = split_records(text, &detect_record_mode(text));
        assert_eq!(recs, vec![(0, 15), (15, 30)]);
    }

    #[test]
    fn continuation_lines() {
        let text = "2024 ERROR boom\n  at a.b\n  at c.d\n2024 INFO ok\n";
        let mode = detect_record_mode(text);
        assert_eq!(mode, RecordMode::Continuation(RunKind::Digit));
        assert_eq!(split_records(text, &mode).len(), 2);
        // a flush line of another kind continues the record
        let text = "2024 ERROR boom\njava.Oops: x\n\tat a.b\n2024 INFO ok\n2024 INFO ok\n2024 INFO ok\n";
        let mode = detect_record_mode(text);
        assert_eq!(split_records(text, &mode), vec![(0, 37), (37, 50), (50, 63), (63, 76)]);
    }

    #[test]
    fn varied_punctuation_lines_are_not_separators() {
        let text = "a 1\n~~~\nb 2\nc 3\n~~~~~\nd 4\n~~~\ne 5\n~~\nf 6\n~~~~~~\ng 7\n";
        assert_eq!(detect_record_mode(text), RecordMode::Line);
    }

    #[test]
    fn separator_lines() {
        let text = "x 1\ny 2\n---\nx 3\ny 4\n---\n";
        assert_eq!(detect_record_mode(text), RecordMode::Separator("---".into()));
        assert_eq!(split_records(text, &detect_record_mode(text)).len(), 2);
    }

    #[test]
    fn subfields() {
        assert_eq!(split_subfields("2012-06-01"), s(&["2012", "-", "06", "-", "01"]));
        assert_eq!(split_subfields("A. Smith, B. Jones"), s(&["A. Smith", ", ", "B. Jones"]));
        assert_eq!(split_subfields("x"), s(&["x"]));
    }

    #[test]
    fn tab_wins_over_spaces_for_mixed_citations() {
        let lines = ["[1]\tGoogle Web Tables.\thttp://a.b/c", "[2]\tSome other title here\thttp://x.y"];
        assert_eq!(choose_delimiter(&lines), Delimiter::Char('\t'));
    }

    #[test]
    fn completes_cut_samples() {
        let sample = Sample {
            span: crate::model::Span::new(5, 25),
            text: "ne 1\nline 2\nline 3\nli".to_string(),
            starts_at_boundary: false,
            reaches_end: false,
        };
        let recs = HeuristicProvider.complete_records(&[sample]).unwrap();
        assert_eq!(recs, s(&["line 2\n", "line 3\n"]));
    }
}
