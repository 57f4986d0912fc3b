//! Token-class syntactic patterns: inference from example strings, exact
//! matching, and bounded-edit approximate matching.
//!
//! Values are tokenized into maximal runs of ASCII digits, maximal runs of
//! alphabetic characters, and single other characters. A pattern is a
//! sequence of generalized tokens over those runs.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenClass {
    /// One ASCII digit.
    Digit,
    /// One alphabetic character.
    Letter,
    /// Any character except a newline.
    Any,
    Literal { value: String },
    /// One of a closed set of strings; may contain `""`, which makes the token optional.
    OneOf { values: BTreeSet<String> },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Repeat {
    Exactly(usize),
    Plus,
}

impl Serialize for Repeat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Repeat::Exactly(n) => s.serialize_u64(*n as u64),
            Repeat::Plus => s.serialize_str("PLUS"),
        }
    }
}

impl<'de> Deserialize<'de> for Repeat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            N(usize),
            S(String),
        }
        match Repr::deserialize(d)? {
            Repr::N(0) => Err(serde::de::Error::custom("repeat count must be at least 1")),
            Repr::N(n) => Ok(Repeat::Exactly(n)),
            Repr::S(s) if s == "PLUS" => Ok(Repeat::Plus),
            Repr::S(s) => Err(serde::de::Error::custom(format!("unknown repeat \"{s}\""))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token {
    #[serde(flatten)]
    pub class: TokenClass,
    pub repeat: Repeat,
}

impl Token {
    pub fn new(class: TokenClass, repeat: Repeat) -> Self {
        Token { class, repeat }
    }

    pub fn literal(text: impl Into<String>) -> Self {
        Token::new(TokenClass::Literal { value: text.into() }, Repeat::Exactly(1))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SyntacticPattern {
    pub tokens: Vec<Token>,
}

/// Kind of a maximal run produced by [`tokenize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunKind {
    Digit,
    Letter,
    Other(char),
}

impl RunKind {
    fn of(c: char) -> RunKind {
        if c.is_ascii_digit() {
            RunKind::Digit
        } else if c.is_alphabetic() {
            RunKind::Letter
        } else {
            RunKind::Other(c)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Run<'a> {
    pub kind: RunKind,
    pub text: &'a str,
}

impl Run<'_> {
    fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

pub fn tokenize(value: &str) -> Vec<Run<'_>> {
    let mut runs: Vec<Run<'_>> = Vec::new();
    let mut start = 0;
    let mut current: Option<RunKind> = None;
    for (i, c) in value.char_indices() {
        let kind = RunKind::of(c);
        match current {
            Some(k) if k == kind && !matches!(k, RunKind::Other(_)) => {}
            Some(k) => {
                runs.push(Run { kind: k, text: &value[start..i] });
                start = i;
                current = Some(kind);
            }
            None => current = Some(kind),
        }
    }
    if let Some(k) = current {
        runs.push(Run { kind: k, text: &value[start..] });
    }
    runs
}

/// Class sequence of a value, ignoring run lengths. Two values share a
/// signature exactly when they fall into the same field cluster.
pub fn signature(value: &str) -> Vec<RunKind> {
    tokenize(value).into_iter().map(|r| r.kind).collect()
}

/// Generalize a set of example strings into a pattern that matches all of them.
pub fn infer(values: &[&str]) -> SyntacticPattern {
    let distinct: BTreeSet<&str> = values.iter().copied().collect();
    let values: Vec<&str> = distinct.into_iter().collect();
    if values.is_empty() || values.iter().all(|v| v.is_empty()) {
        return SyntacticPattern::default();
    }
    let runs: Vec<Vec<Run<'_>>> = values.iter().map(|v| tokenize(v)).collect();
    let mut tokens = Vec::new();
    let first_sig: Vec<RunKind> = runs[0].iter().map(|r| r.kind).collect();
    if runs.iter().all(|r| r.iter().map(|x| x.kind).eq(first_sig.iter().copied())) {
        positionwise(&runs, &mut tokens);
    } else {
        unify_mixed(&values, &runs, &mut tokens);
    }
    SyntacticPattern { tokens: merge_literals(tokens) }
}

fn positionwise(runs: &[Vec<Run<'_>>], out: &mut Vec<Token>) {
    let width = runs[0].len();
    for pos in 0..width {
        let column: Vec<&Run<'_>> = runs.iter().map(|r| &r[pos]).collect();
        out.push(unify_column(&column));
    }
}

fn unify_column(column: &[&Run<'_>]) -> Token {
    let text = column[0].text;
    if column.iter().all(|r| r.text == text) {
        return Token::literal(text);
    }
    let class = match column[0].kind {
        RunKind::Digit => TokenClass::Digit,
        RunKind::Letter => TokenClass::Letter,
        // equal kinds of single other characters always have equal text
        RunKind::Other(_) => unreachable!("distinct texts for a single-character run"),
    };
    let len = column[0].char_len();
    let repeat = if column.iter().all(|r| r.char_len() == len) {
        Repeat::Exactly(len)
    } else {
        Repeat::Plus
    };
    Token::new(class, repeat)
}

fn common_len<'a>(runs: &[Vec<Run<'a>>], from_end: bool, limit: usize) -> usize {
    let mut n = 0;
    while n < limit {
        let kind_at = |r: &Vec<Run<'a>>| {
            let i = if from_end { r.len() - 1 - n } else { n };
            r[i].kind
        };
        let k = kind_at(&runs[0]);
        if runs.iter().all(|r| kind_at(r) == k) {
            n += 1;
        } else {
            break;
        }
    }
    n
}

fn unify_mixed(values: &[&str], runs: &[Vec<Run<'_>>], out: &mut Vec<Token>) {
    let min_runs = runs.iter().map(Vec::len).min().unwrap_or(0);
    let mut pre = common_len(runs, false, min_runs);
    let mut suf = common_len(runs, true, min_runs - pre);
    loop {
        let middles: Vec<String> = runs
            .iter()
            .map(|r| r[pre..r.len() - suf].iter().map(|x| x.text).collect())
            .collect();
        let distinct: BTreeSet<String> = middles.iter().cloned().collect();
        let any_empty = middles.iter().any(String::is_empty);
        let middle = if !any_empty {
            Some(middle_token(&middles, &distinct))
        } else if distinct.len() <= 4 {
            Some(vec![Token::new(TokenClass::OneOf { values: distinct }, Repeat::Exactly(1))])
        } else if pre > 0 || suf > 0 {
            if pre >= suf {
                pre -= 1;
            } else {
                suf -= 1;
            }
            None
        } else {
            let all = values.iter().map(|v| v.to_string()).collect();
            Some(vec![Token::new(TokenClass::OneOf { values: all }, Repeat::Exactly(1))])
        };
        if let Some(middle) = middle {
            let heads: Vec<Vec<Run<'_>>> = runs.iter().map(|r| r[..pre].to_vec()).collect();
            let tails: Vec<Vec<Run<'_>>> = runs.iter().map(|r| r[r.len() - suf..].to_vec()).collect();
            if pre > 0 {
                positionwise(&heads, out);
            }
            out.extend(middle);
            if suf > 0 {
                positionwise(&tails, out);
            }
            return;
        }
    }
}

fn middle_token(middles: &[String], distinct: &BTreeSet<String>) -> Vec<Token> {
    let runs: Vec<Vec<Run<'_>>> = middles.iter().map(|m| tokenize(m)).collect();
    let sig: Vec<RunKind> = runs[0].iter().map(|r| r.kind).collect();
    if runs.iter().all(|r| r.iter().map(|x| x.kind).eq(sig.iter().copied())) {
        let mut out = Vec::new();
        positionwise(&runs, &mut out);
        return out;
    }
    if distinct.len() <= 4 || middles.iter().any(|m| m.contains('\n')) {
        return vec![Token::new(TokenClass::OneOf { values: distinct.clone() }, Repeat::Exactly(1))];
    }
    vec![Token::new(TokenClass::Any, Repeat::Plus)]
}

fn merge_literals(tokens: Vec<Token>) -> Vec<Token> {
    let mut out: Vec<Token> = Vec::with_capacity(tokens.len());
    for t in tokens {
        if let (Some(prev), TokenClass::Literal { value }) = (out.last_mut(), &t.class) {
            if prev.repeat == Repeat::Exactly(1) && t.repeat == Repeat::Exactly(1) {
                if let TokenClass::Literal { value: pv } = &mut prev.class {
                    pv.push_str(value);
                    continue;
                }
            }
        }
        out.push(t);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pred {
    Digit,
    Letter,
    AnyNoNewline,
    Char(char),
}

impl Pred {
    fn accepts(self, c: char) -> bool {
        match self {
            Pred::Digit => c.is_ascii_digit(),
            Pred::Letter => c.is_alphabetic(),
            Pred::AnyNoNewline => c != '\n',
            Pred::Char(x) => x == c,
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Edge {
    Consume(Pred, usize),
    Eps(usize),
}

/// An epsilon-NFA compiled from a pattern, used for approximate matching.
#[derive(Clone, Debug)]
pub struct Matcher {
    edges: Vec<Vec<Edge>>,
    accept: usize,
}

const INF: u32 = u32::MAX / 2;

impl Matcher {
    pub fn new(pattern: &SyntacticPattern) -> Self {
        let mut m = Matcher { edges: vec![Vec::new()], accept: 0 };
        let mut cur = 0;
        for token in &pattern.tokens {
            cur = m.add_token(cur, token);
        }
        m.accept = cur;
        m
    }

    fn node(&mut self) -> usize {
        self.edges.push(Vec::new());
        self.edges.len() - 1
    }

    fn add_unit(&mut self, from: usize, class: &TokenClass) -> usize {
        match class {
            TokenClass::Digit => self.add_pred(from, Pred::Digit),
            TokenClass::Letter => self.add_pred(from, Pred::Letter),
            TokenClass::Any => self.add_pred(from, Pred::AnyNoNewline),
            TokenClass::Literal { value } => value.chars().fold(from, |n, c| self.add_pred(n, Pred::Char(c))),
            TokenClass::OneOf { values } => {
                let end = self.node();
                for v in values {
                    let last = v.chars().fold(from, |n, c| self.add_pred(n, Pred::Char(c)));
                    self.edges[last].push(Edge::Eps(end));
                }
                end
            }
        }
    }

    fn add_pred(&mut self, from: usize, pred: Pred) -> usize {
        let to = self.node();
        self.edges[from].push(Edge::Consume(pred, to));
        to
    }

    fn add_token(&mut self, from: usize, token: &Token) -> usize {
        match token.repeat {
            Repeat::Exactly(n) => (0..n).fold(from, |cur, _| self.add_unit(cur, &token.class)),
            Repeat::Plus => {
                // entry node keeps the loop from leaking back into earlier tokens
                let entry = self.node();
                self.edges[from].push(Edge::Eps(entry));
                let end = self.add_unit(entry, &token.class);
                self.edges[end].push(Edge::Eps(entry));
                let exit = self.node();
                self.edges[end].push(Edge::Eps(exit));
                exit
            }
        }
    }

    pub fn state_count(&self) -> usize {
        self.edges.len()
    }

    /// Relax epsilon edges (cost 0) and pattern-character deletions (cost 1) to a fixpoint.
    fn close(&self, costs: &mut [u32]) {
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..costs.len() {
                let c = costs[s];
                if c >= INF {
                    continue;
                }
                for e in &self.edges[s] {
                    let (to, nc) = match *e {
                        Edge::Eps(to) => (to, c),
                        Edge::Consume(_, to) => (to, c + 1),
                    };
                    if nc < costs[to] {
                        costs[to] = nc;
                        changed = true;
                    }
                }
            }
        }
    }

    /// Minimum edit cost of matching `text[start..end]` for every `end` in
    /// `start..=start + max_len` whose cost is at most `max_edits`.
    pub fn match_prefixes(&self, text: &[char], start: usize, max_len: usize, max_edits: u32) -> Vec<(usize, u32)> {
        let n = self.edges.len();
        let mut costs = vec![INF; n];
        costs[0] = 0;
        self.close(&mut costs);
        let mut out = Vec::new();
        let limit = text.len().min(start + max_len);
        let mut pos = start;
        loop {
            if costs[self.accept] <= max_edits {
                out.push((pos, costs[self.accept]));
            }
            if pos >= limit || costs.iter().all(|&c| c > max_edits) {
                break;
            }
            let ch = text[pos];
            // line breaks are never absorbed by an edit
            let editable = !matches!(ch, '\n' | '\r');
            let mut next = vec![INF; n];
            for s in 0..n {
                let c = costs[s];
                if c > max_edits {
                    continue;
                }
                // extra text character
                if editable {
                    next[s] = next[s].min(c + 1);
                }
                for e in &self.edges[s] {
                    if let Edge::Consume(p, to) = *e {
                        let nc = match (p.accepts(ch), editable) {
                            (true, _) => c,
                            (false, true) => c + 1,
                            (false, false) => continue,
                        };
                        if nc < next[to] {
                            next[to] = nc;
                        }
                    }
                }
            }
            self.close(&mut next);
            costs = next;
            pos += 1;
        }
        out
    }

    /// Minimum edits to turn `text` into some string of the pattern language,
    /// or `None` when that exceeds `max_edits`.
    pub fn distance(&self, text: &str, max_edits: u32) -> Option<u32> {
        let chars: Vec<char> = text.chars().collect();
        self.match_prefixes(&chars, 0, chars.len(), max_edits)
            .into_iter()
            .find(|&(end, _)| end == chars.len())
            .map(|(_, c)| c)
    }
}

impl SyntacticPattern {
    pub fn literal(text: &str) -> Self {
        if text.is_empty() {
            return SyntacticPattern::default();
        }
        SyntacticPattern { tokens: vec![Token::literal(text)] }
    }

    pub fn matcher(&self) -> Matcher {
        Matcher::new(self)
    }

    pub fn matches(&self, text: &str) -> bool {
        self.matcher().distance(text, 0) == Some(0)
    }

    /// True when the pattern is a single literal, such as a delimiter.
    pub fn as_literal(&self) -> Option<&str> {
        match self.tokens.as_slice() {
            [Token { class: TokenClass::Literal { value }, repeat: Repeat::Exactly(1) }] => Some(value),
            [] => Some(""),
            _ => None,
        }
    }

    /// Anchored regular expression accepting the same language.
    pub fn to_regex(&self) -> String {
        let mut out = String::from("^");
        for t in &self.tokens {
            let unit = match &t.class {
                TokenClass::Digit => "[0-9]".to_string(),
                TokenClass::Letter => r"\p{Alphabetic}".to_string(),
                TokenClass::Any => r"[^\n]".to_string(),
                TokenClass::Literal { value } => format!("(?:{})", regex::escape(value)),
                TokenClass::OneOf { values } => {
                    let alts: Vec<String> = values.iter().map(|v| regex::escape(v)).collect();
                    format!("(?:{})", alts.join("|"))
                }
            };
            out.push_str(&unit);
            match t.repeat {
                Repeat::Exactly(1) => {}
                Repeat::Exactly(n) => out.push_str(&format!("{{{n}}}")),
                Repeat::Plus => out.push('+'),
            }
        }
        out.push('$');
        out
    }
}

impl fmt::Display for SyntacticPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            match &t.class {
                TokenClass::Digit => write!(f, "<D>")?,
                TokenClass::Letter => write!(f, "<L>")?,
                TokenClass::Any => write!(f, "<*>")?,
                TokenClass::Literal { value } => write!(f, "{value:?}")?,
                TokenClass::OneOf { values } => {
                    let v: Vec<String> = values.iter().map(|s| format!("{s:?}")).collect();
                    write!(f, "{{{}}}", v.join("|"))?
                }
            }
            match t.repeat {
                Repeat::Exactly(1) => {}
                Repeat::Exactly(n) => write!(f, "{n}")?,
                Repeat::Plus => write!(f, "+")?,
            }
        }
        Ok(())
    }
}
