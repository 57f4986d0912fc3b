//! Pure op evaluation over a parsed dataset.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::op::{Case, CellSelector, CombineInto, Position, Predicate, RecordSet, Transform, WrangleOp};
use super::WrangleError;
use crate::align;
use crate::ingest::heuristic::split_subfields;
use crate::model::{ClusterId, ParsedDataset, Segment};
use crate::profile::{Analysis, SchemaOverride};

/// A dataset in position order; records remember the id they had before the op.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Item {
    Residue(String),
    Record { origin: Option<usize>, fields: Vec<String> },
}

pub(crate) fn items(parsed: &ParsedDataset) -> Vec<Item> {
    let mut next = 0;
    parsed
        .segments()
        .into_iter()
        .map(|s| match s {
            Segment::Residue(t) => Item::Residue(t),
            Segment::Record(fields) => {
                next += 1;
                Item::Record { origin: Some(next - 1), fields }
            }
        })
        .collect()
}

pub(crate) fn to_segments(items: &[Item]) -> Vec<Segment> {
    items
        .iter()
        .map(|i| match i {
            Item::Residue(t) => Segment::Residue(t.clone()),
            Item::Record { fields, .. } => Segment::Record(fields.clone()),
        })
        .collect()
}

/// Item index of every record, by record id.
fn record_slots(items: &[Item]) -> Vec<usize> {
    items.iter().enumerate().filter(|(_, i)| matches!(i, Item::Record { .. })).map(|(k, _)| k).collect()
}

fn fields_mut(item: &mut Item) -> &mut Vec<String> {
    match item {
        Item::Record { fields, .. } => fields,
        Item::Residue(_) => unreachable!("record slot holds residue"),
    }
}

fn invalid(msg: impl Into<String>) -> WrangleError {
    WrangleError::InvalidOp(msg.into())
}

/// A resolved cell: record id and, for column selectors, field index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub record: usize,
    pub field: Option<usize>,
}

type CellTest = Box<dyn Fn(&str) -> bool>;

pub(crate) fn compile_predicate(p: &Predicate) -> Result<CellTest, WrangleError> {
    Ok(match p.clone() {
        Predicate::Equals(v) => Box::new(move |t| t == v),
        Predicate::Matches(r) => {
            let re = Regex::new(&format!("^(?:{r})$")).map_err(|e| invalid(format!("bad predicate regex: {e}")))?;
            Box::new(move |t| re.is_match(t))
        }
        Predicate::InSet(vs) => {
            let set: HashSet<String> = vs.into_iter().collect();
            Box::new(move |t| set.contains(t))
        }
    })
}

/// Resolves a selector to cells in record order.
pub fn resolve(analysis: &Analysis, sel: &CellSelector) -> Result<Vec<Cell>, WrangleError> {
    let parsed = &analysis.parsed;
    let ds = &parsed.dataset;
    let n = parsed.records.len();
    let wanted: Vec<bool> = match &sel.records {
        RecordSet::All => vec![true; n],
        RecordSet::Duplicates => {
            let mut seen = HashSet::new();
            parsed.records.iter().map(|r| !seen.insert(r.text(ds))).collect()
        }
        RecordSet::Cluster(c) => parsed.records.iter().map(|r| r.cluster == ClusterId::Id(*c)).collect(),
        RecordSet::Ids(ids) => {
            let mut v = vec![false; n];
            for &i in ids {
                *v.get_mut(i).ok_or_else(|| invalid(format!("record {i} out of range")))? = true;
            }
            v
        }
    };
    let pred = sel.predicate.as_ref().map(compile_predicate).transpose()?;
    let mut field_of: Vec<Option<usize>> = vec![None; n];
    if let Some(c) = sel.column {
        if c >= analysis.table.column_count() {
            return Err(invalid(format!("column {c} out of range")));
        }
        for (&r, cells) in analysis.table.rows.iter().zip(&analysis.table.occupancy) {
            field_of[r] = cells[c];
        }
    }
    let mut out = Vec::new();
    for (r, record) in parsed.records.iter().enumerate() {
        if !wanted[r] {
            continue;
        }
        let field = match (sel.column, sel.field) {
            (Some(_), _) => match field_of[r] {
                Some(f) => Some(f),
                None => continue,
            },
            (None, Some(f)) if f < record.fields.len() => Some(f),
            (None, Some(_)) => continue,
            (None, None) => None,
        };
        let text = match field {
            Some(f) => record.field_text(ds, f),
            None => record.text(ds),
        };
        if pred.as_ref().is_none_or(|p| p(text)) {
            out.push(Cell { record: r, field });
        }
    }
    Ok(out)
}

fn require_cells(sel: &CellSelector, kind: &str) -> Result<(), WrangleError> {
    if !sel.targets_cells() {
        return Err(invalid(format!("{kind} needs a column or field position")));
    }
    Ok(())
}

fn nonempty(cells: Vec<Cell>) -> Result<Vec<Cell>, WrangleError> {
    if cells.is_empty() {
        return Err(invalid("selector matches no cells"));
    }
    Ok(cells)
}

const DATE_FORMATS: &[&str] = &[
    "%B %d, %Y",
    "%b %d, %Y",
    "%b. %d, %Y",
    "%d %B %Y",
    "%d %b %Y",
    "%Y-%m-%d",
    "%Y/%m/%d",
    "%m/%d/%Y",
    "%d.%m.%Y",
    "%Y.%m.%d",
    "%B %d %Y",
];

pub fn parse_date(text: &str) -> Option<chrono::NaiveDate> {
    DATE_FORMATS.iter().find_map(|f| chrono::NaiveDate::parse_from_str(text, f).ok())
}

fn title_case(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut start = true;
    for c in s.chars() {
        if c.is_alphanumeric() {
            if start {
                out.extend(c.to_uppercase());
            } else {
                out.extend(c.to_lowercase());
            }
            start = false;
        } else {
            out.push(c);
            start = true;
        }
    }
    out
}

/// Compiled form of a [`Transform`].
pub struct CompiledTransform {
    t: Transform,
    re: Option<Regex>,
}

impl CompiledTransform {
    pub fn new(t: &Transform) -> Result<Self, WrangleError> {
        let re = match t {
            Transform::Replace { find, regex: true, .. } => {
                Some(Regex::new(find).map_err(|e| invalid(format!("bad regex: {e}")))?)
            }
            Transform::Replace { find, .. } if find.is_empty() => return Err(invalid("empty find string")),
            Transform::StandardizeDate { format } => {
                if chrono::format::StrftimeItems::new(format).any(|i| matches!(i, chrono::format::Item::Error)) {
                    return Err(invalid(format!("bad date format {format:?}")));
                }
                None
            }
            _ => None,
        };
        Ok(CompiledTransform { t: t.clone(), re })
    }

    pub fn apply(&self, text: &str) -> String {
        match &self.t {
            Transform::Set { value } => value.clone(),
            Transform::Replace { find, with, .. } => match &self.re {
                Some(re) => re.replace_all(text, with.as_str()).into_owned(),
                None => text.replace(find.as_str(), with),
            },
            Transform::Case { to: Case::Upper } => text.to_uppercase(),
            Transform::Case { to: Case::Lower } => text.to_lowercase(),
            Transform::Case { to: Case::Title } => title_case(text),
            Transform::Substring { start, end } => {
                let n = text.chars().count();
                let e = end.unwrap_or(n).min(n);
                text.chars().skip(*start).take(e.saturating_sub(*start)).collect()
            }
            Transform::StandardizeDate { format } => {
                let core = text.trim();
                match parse_date(core) {
                    Some(d) => {
                        let lead = &text[..text.len() - text.trim_start().len()];
                        let trail = &text[text.trim_end().len()..];
                        format!("{lead}{}{trail}", d.format(format))
                    }
                    None => text.to_string(),
                }
            }
            Transform::Trim => text.trim().to_string(),
        }
    }
}

/// Splits `text` at every match of `re`, keeping matches as their own parts.
pub fn separate(text: &str, re: &Regex) -> Vec<String> {
    let mut out = Vec::new();
    let mut last = 0;
    for m in re.find_iter(text) {
        if m.start() > last {
            out.push(text[last..m.start()].to_string());
        }
        if !m.as_str().is_empty() {
            out.push(m.as_str().to_string());
        }
        last = m.end();
    }
    if last < text.len() {
        out.push(text[last..].to_string());
    }
    out
}

/// Subfields of the selected cells with their subfield cluster ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubfieldClusters {
    pub patterns: Vec<crate::pattern::SyntacticPattern>,
    /// Per occupied cell: record id, subfield texts and their cluster ids.
    pub cells: Vec<SubfieldCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubfieldCell {
    pub record: usize,
    pub field: usize,
    pub parts: Vec<String>,
    pub clusters: Vec<usize>,
}

pub fn subfield_clusters(analysis: &Analysis, target: &CellSelector) -> Result<SubfieldClusters, WrangleError> {
    require_cells(target, "subfield listing")?;
    let cells = resolve(analysis, target)?;
    let ds = &analysis.parsed.dataset;
    let parts: Vec<Vec<String>> = cells
        .iter()
        .map(|c| split_subfields(analysis.parsed.records[c.record].field_text(ds, c.field.expect("column cell"))))
        .collect();
    let flat: Vec<&str> = parts.iter().flatten().map(String::as_str).collect();
    let (ids, patterns) = align::cluster_fields(&flat);
    let mut it = ids.into_iter();
    let cells = cells
        .iter()
        .zip(parts)
        .map(|(c, p)| SubfieldCell { record: c.record, field: c.field.expect("cell"), clusters: it.by_ref().take(p.len()).collect(), parts: p })
        .collect();
    Ok(SubfieldClusters { patterns, cells })
}

/// Result of evaluating an op: the new item list plus override changes.
pub(crate) struct Evaluated {
    pub items: Vec<Item>,
    pub overrides: Vec<SchemaOverride>,
}

pub(crate) fn evaluate(
    analysis: &Analysis,
    overrides: &[SchemaOverride],
    op: &WrangleOp,
) -> Result<Evaluated, WrangleError> {
    let mut items = items(&analysis.parsed);
    let slots = record_slots(&items);
    let mut overrides = overrides.to_vec();
    match op {
        WrangleOp::Add { target, value, position } => {
            if value.is_empty() {
                return Err(invalid("ADD needs a non-empty value"));
            }
            for c in nonempty(resolve(analysis, target)?)? {
                let fields = fields_mut(&mut items[slots[c.record]]);
                let at = match (c.field, position) {
                    (Some(f), Position::Before) => f,
                    (Some(f), Position::After) => f + 1,
                    (None, Position::Before) => 0,
                    (None, Position::After) => {
                        let n = fields.len();
                        if n > 1 && fields[n - 1].trim().is_empty() && fields[n - 1].contains('\n') {
                            n - 1
                        } else {
                            n
                        }
                    }
                };
                fields.insert(at, value.clone());
            }
        }
        WrangleOp::Delete { target } => {
            let cells = nonempty(resolve(analysis, target)?)?;
            remove_cells(&mut items, &slots, &cells);
        }
        WrangleOp::Filter { target } => {
            let keep: BTreeSet<usize> = nonempty(resolve(analysis, target)?)?.iter().map(|c| c.record).collect();
            let drop: Vec<Cell> =
                (0..slots.len()).filter(|r| !keep.contains(r)).map(|r| Cell { record: r, field: None }).collect();
            remove_cells(&mut items, &slots, &drop);
        }
        WrangleOp::Replace { target, transform } => {
            let t = CompiledTransform::new(transform)?;
            for c in nonempty(resolve(analysis, target)?)? {
                let fields = fields_mut(&mut items[slots[c.record]]);
                match c.field {
                    Some(f) => fields[f] = t.apply(&fields[f]),
                    None => fields.iter_mut().for_each(|x| *x = t.apply(x)),
                }
            }
        }
        WrangleOp::Separate { target, pattern } => {
            require_cells(target, "SEPARATE")?;
            let re = Regex::new(pattern).map_err(|e| invalid(format!("bad regex: {e}")))?;
            for c in nonempty(resolve(analysis, target)?)? {
                let f = c.field.expect("column cell");
                let fields = fields_mut(&mut items[slots[c.record]]);
                let parts = separate(&fields[f], &re);
                fields.splice(f..=f, parts);
            }
        }
        WrangleOp::Combine { target, columns, into: CombineInto::Cell } => {
            if columns.len() < 2 {
                return Err(invalid("COMBINE into CELL needs at least two columns"));
            }
            let mut per_record: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &col in columns {
                let sel = CellSelector { column: Some(col), field: None, ..target.clone() };
                for c in resolve(analysis, &sel)? {
                    per_record.entry(c.record).or_default().push(c.field.expect("column cell"));
                }
            }
            let mut touched = false;
            for (r, fs) in per_record {
                let (lo, hi) = (*fs.iter().min().unwrap(), *fs.iter().max().unwrap());
                if lo == hi {
                    continue;
                }
                let fields = fields_mut(&mut items[slots[r]]);
                let joined: String = fields[lo..=hi].concat();
                fields.splice(lo..=hi, [joined]);
                touched = true;
            }
            if !touched {
                return Err(invalid("no record holds two of the combined columns"));
            }
        }
        WrangleOp::Combine { target, into: CombineInto::Record, .. } => {
            let selected: BTreeSet<usize> = resolve(analysis, target)?.iter().map(|c| c.record).collect();
            let mut runs: Vec<Vec<usize>> = Vec::new();
            for &r in &selected {
                match runs.last_mut() {
                    Some(run) if *run.last().unwrap() + 1 == r => run.push(r),
                    _ => runs.push(vec![r]),
                }
            }
            runs.retain(|run| run.len() > 1);
            if runs.is_empty() {
                return Err(invalid("COMBINE into RECORD needs consecutive selected records"));
            }
            // later runs first so that earlier item indices stay valid
            for run in runs.iter().rev() {
                let (a, b) = (slots[run[0]], slots[*run.last().unwrap()]);
                let mut merged = Vec::new();
                for item in &items[a..=b] {
                    match item {
                        Item::Residue(t) => merged.push(t.clone()),
                        Item::Record { fields, .. } => merged.extend(fields.iter().cloned()),
                    }
                }
                items.splice(a..=b, [Item::Record { origin: Some(run[0]), fields: merged }]);
            }
        }
        WrangleOp::SchemaEdit { column, pattern } => {
            let col = analysis.table.columns.get(*column).ok_or_else(|| invalid(format!("column {column} out of range")))?;
            let key = analysis.field_clusters[col.field_cluster].key.clone();
            overrides.retain(|o| o.signature != key);
            overrides.push(SchemaOverride { signature: key, pattern: pattern.clone() });
        }
        WrangleOp::Fold { target, group, drop } => {
            require_cells(target, "FOLD")?;
            if group.is_empty() {
                return Err(invalid("FOLD needs at least one group cluster"));
            }
            let subs = subfield_clusters(analysis, target)?;
            if subs.cells.is_empty() {
                return Err(invalid("selector matches no cells"));
            }
            let group: BTreeSet<usize> = group.iter().copied().collect();
            let drop: BTreeSet<usize> = drop.iter().copied().collect();
            if let Some(c) = group.intersection(&drop).next() {
                return Err(invalid(format!("subfield cluster {c} is both grouped and dropped")));
            }
            // later records first so that earlier item indices stay valid
            for cell in subs.cells.iter().rev() {
                let instances: Vec<usize> = (0..cell.parts.len()).filter(|&i| group.contains(&cell.clusters[i])).collect();
                if instances.is_empty() {
                    continue;
                }
                let slot = slots[cell.record];
                let f = cell.field;
                let base = fields_mut(&mut items[slot]).clone();
                let copies = instances.iter().map(|&keep| {
                    let text: String = (0..cell.parts.len())
                        .filter(|&i| {
                            let c = cell.clusters[i];
                            if group.contains(&c) {
                                i == keep
                            } else {
                                !drop.contains(&c)
                            }
                        })
                        .map(|i| cell.parts[i].as_str())
                        .collect();
                    let mut fields = base.clone();
                    fields[f] = text;
                    Item::Record { origin: Some(cell.record), fields }
                });
                let copies: Vec<Item> = copies.collect();
                items.splice(slot..=slot, copies);
            }
        }
        WrangleOp::Reorder { order } => {
            let n = slots.len();
            let mut seen = vec![false; n];
            if order.len() != n || order.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err(invalid("REORDER needs a permutation of all record ids"));
            }
            let old: Vec<Item> = slots.iter().map(|&s| items[s].clone()).collect();
            for (slot, &from) in slots.iter().zip(order) {
                items[*slot] = old[from].clone();
            }
        }
        WrangleOp::EditRecord { edits } => {
            if edits.is_empty() {
                return Err(invalid("EDIT_RECORD needs at least one edit"));
            }
            for e in edits {
                let slot = *slots.get(e.record).ok_or_else(|| invalid(format!("record {} out of range", e.record)))?;
                *fields_mut(&mut items[slot]) = e.fields.clone();
            }
        }
    }
    // records left without text disappear
    items.retain(|i| match i {
        Item::Record { fields, .. } => fields.iter().any(|f| !f.is_empty()),
        Item::Residue(t) => !t.is_empty(),
    });
    Ok(Evaluated { items, overrides })
}

fn remove_cells(items: &mut [Item], slots: &[usize], cells: &[Cell]) {
    let mut by_record: BTreeMap<usize, Vec<Option<usize>>> = BTreeMap::new();
    for c in cells {
        by_record.entry(c.record).or_default().push(c.field);
    }
    for (r, fs) in by_record {
        let fields = fields_mut(&mut items[slots[r]]);
        if fs.iter().any(Option::is_none) {
            fields.clear();
            continue;
        }
        let mut fs: Vec<usize> = fs.into_iter().flatten().collect();
        fs.sort_unstable();
        for f in fs.into_iter().rev() {
            fields.remove(f);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RecordText {
    pub text: String,
    pub fields: Vec<String>,
}

impl RecordText {
    fn new(fields: &[String]) -> Self {
        RecordText { text: fields.concat(), fields: fields.to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffEntry {
    /// Record id before the op; absent for inserted records.
    pub record_id: Option<usize>,
    pub before: Option<RecordText>,
    /// Records emitted in its place; empty when deleted.
    pub after: Vec<RecordText>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FlaggedCell {
    pub record: usize,
    pub field: usize,
    pub text: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiffPreview {
    pub entries: Vec<DiffEntry>,
    pub records_added: usize,
    pub records_removed: usize,
    /// Records kept their texts but changed position.
    pub reordered: bool,
    /// Cells that fail a user-edited column pattern after the op.
    pub flagged: Vec<FlaggedCell>,
}

impl DiffPreview {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && !self.reordered && self.flagged.is_empty()
    }
}

pub(crate) fn diff(before: &[Item], after: &[Item]) -> DiffPreview {
    let old: Vec<&Vec<String>> = before
        .iter()
        .filter_map(|i| match i {
            Item::Record { fields, .. } => Some(fields),
            _ => None,
        })
        .collect();
    let mut outputs: Vec<Vec<&Vec<String>>> = vec![Vec::new(); old.len()];
    let mut inserted = Vec::new();
    let mut origins = Vec::new();
    for i in after {
        if let Item::Record { origin, fields } = i {
            match origin {
                Some(o) => {
                    outputs[*o].push(fields);
                    origins.push(*o);
                }
                None => inserted.push(fields),
            }
        }
    }
    let mut p = DiffPreview::default();
    for (id, (b, outs)) in old.iter().zip(&outputs).enumerate() {
        if outs.len() == 1 && outs[0] == *b {
            continue;
        }
        if outs.is_empty() {
            p.records_removed += 1;
        } else {
            p.records_added += outs.len() - 1;
        }
        p.entries.push(DiffEntry {
            record_id: Some(id),
            before: Some(RecordText::new(b)),
            after: outs.iter().map(|f| RecordText::new(f)).collect(),
        });
    }
    for f in inserted {
        p.records_added += 1;
        p.entries.push(DiffEntry { record_id: None, before: None, after: vec![RecordText::new(f)] });
    }
    origins.dedup();
    p.reordered = origins.windows(2).any(|w| w[0] > w[1]);
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transforms() {
        let t = |t: Transform, s: &str| CompiledTransform::new(&t).unwrap().apply(s);
        assert_eq!(t(Transform::StandardizeDate { format: "%Y-%m-%d".into() }, " June 1, 2012"), " 2012-06-01");
        assert_eq!(t(Transform::StandardizeDate { format: "%Y-%m-%d".into() }, "soon"), "soon");
        assert_eq!(t(Transform::Case { to: Case::Title }, "hello wORLD"), "Hello World");
        assert_eq!(t(Transform::Substring { start: 1, end: Some(3) }, "abcdef"), "bc");
        assert_eq!(t(Transform::Replace { find: r"\d".into(), with: "#".into(), regex: true }, "a1b22"), "a#b##");
        assert!(CompiledTransform::new(&Transform::Replace { find: "(".into(), with: "".into(), regex: true }).is_err());
    }

    #[test]
    fn separate_keeps_matches() {
        let re = Regex::new("-").unwrap();
        assert_eq!(separate("a-b-", &re), vec!["a", "-", "b", "-"]);
        assert_eq!(separate("ab", &re), vec!["ab"]);
    }

    #[test]
    fn dates_in_several_shapes() {
        let d = chrono::NaiveDate::from_ymd_opt(2012, 6, 1).unwrap();
        for s in ["June 1, 2012", "Jun 1, 2012", "1 June 2012", "2012-06-01", "06/01/2012", "2012/06/01"] {
            assert_eq!(parse_date(s), Some(d), "{s}");
        }
    }
}
