//! Column-level mining: pairwise field similarity, shared affixes, special
//! formats, value distributions and a dataset complexity score.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    if a == b {
        return 0;
    }
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if ca == cb { diag } else { 1 + diag.min(above).min(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

/// Normalized agreement of two values: 1 for identical strings, 0 for
/// completely different ones. Two empty strings count as identical.
pub fn pair_term(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / longest as f64
}

/// Similarity of two columns given their per-record values (`None` = cell empty).
///
/// Averages `term` over the records holding both columns and scales by the
/// base-10 log of that support, so only repeated agreement scores high.
pub fn field_similarity_with(
    a: &[Option<&str>],
    b: &[Option<&str>],
    term: impl Fn(&str, &str) -> f64,
) -> (f64, usize) {
    let pairs: Vec<(&str, &str)> = a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).collect();
    let support = pairs.len();
    if support <= 1 {
        return (0.0, support);
    }
    let total: f64 = pairs.iter().map(|(x, y)| term(x, y)).sum();
    let alpha = (support as f64).log10();
    (alpha / support as f64 * total, support)
}

pub fn field_similarity(a: &[Option<&str>], b: &[Option<&str>]) -> (f64, usize) {
    field_similarity_with(a, b, pair_term)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimilarityMatrix {
    pub scores: Vec<Vec<f64>>,
    pub support_counts: Vec<Vec<usize>>,
    /// Largest off-diagonal score, used to map scores onto opacity.
    pub max_score: f64,
}

impl SimilarityMatrix {
    /// `columns[c][row]` is the value of column `c` in table row `row`.
    pub fn compute(columns: &[Vec<Option<&str>>]) -> Self {
        let m = columns.len();
        let mut scores = vec![vec![0.0; m]; m];
        let mut support_counts = vec![vec![0; m]; m];
        let mut max_score: f64 = 0.0;
        for i in 0..m {
            for j in i..m {
                let (s, n) = if i == j {
                    let n = columns[i].iter().flatten().count();
                    (if n <= 1 { 0.0 } else { (n as f64).log10() }, n)
                } else {
                    field_similarity(&columns[i], &columns[j])
                };
                scores[i][j] = s;
                scores[j][i] = s;
                support_counts[i][j] = n;
                support_counts[j][i] = n;
                if i != j {
                    max_score = max_score.max(s);
                }
            }
        }
        SimilarityMatrix { scores, support_counts, max_score }
    }

    pub fn opacity(&self, i: usize, j: usize) -> f64 {
        if self.max_score <= 0.0 {
            0.0
        } else {
            (self.scores[i][j] / self.max_score).min(1.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affix {
    pub text: String,
    pub support: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffixReport {
    pub prefix: Option<Affix>,
    pub suffix: Option<Affix>,
}

pub const DEFAULT_MIN_SUPPORT: f64 = 0.8;

pub fn mine_affixes(values: &[&str], min_support: f64) -> AffixReport {
    if values.is_empty() {
        return AffixReport::default();
    }
    let chars: Vec<Vec<char>> = values.iter().map(|v| v.chars().collect()).collect();
    let prefix = longest_affix(&chars, min_support, |c, n| c[..n].iter().collect());
    let suffix = longest_affix(&chars, min_support, |c, n| c[c.len() - n..].iter().collect());
    AffixReport { prefix, suffix }
}

fn longest_affix(values: &[Vec<char>], min_support: f64, cut: impl Fn(&[char], usize) -> String) -> Option<Affix> {
    let n = values.len() as f64;
    let mut best = None;
    let mut len = 2;
    loop {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for v in values.iter().filter(|v| v.len() >= len) {
            *counts.entry(cut(v, len)).or_default() += 1;
        }
        // a longer affix can only be shared by a subset of a shorter one's values
        let winner = counts
            .into_iter()
            .filter(|(_, c)| *c as f64 / n >= min_support)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)));
        match winner {
            Some((text, c)) => best = Some(Affix { text, support: c as f64 / n }),
            None => return best,
        }
        len += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Format {
    Json,
    Csv,
    Url,
    Doi,
    Isbn,
    Date,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormatLabel {
    pub label: Format,
    pub coverage: f64,
}

pub const FORMAT_COVERAGE: f64 = 0.95;

static URL_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:https?|ftp)://[^\s/?#.][^\s]*$").unwrap());
static DOI_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:doi:\s*|https?://(?:dx\.)?doi\.org/)?10\.\d{4,9}/\S+$").unwrap());
static ISBN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:ISBN(?:-1[03])?:?\s*)?([0-9][0-9\- ]{8,15}[0-9X])$").unwrap());
const MONTHS: &str = "Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Sept|Oct|Nov|Dec";
static DATE_RES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"^\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}(?::\d{2}(?:[.,]\d+)?)?(?:Z|[+-]\d{2}:?\d{2})?)?$".to_string(),
        r"^\d{4}/\d{1,2}/\d{1,2}$".to_string(),
        r"^\d{1,2}/\d{1,2}/\d{2,4}$".to_string(),
        r"^\d{1,2}\.\d{1,2}\.\d{4}$".to_string(),
        format!(r"^(?:{MONTHS})[a-z]*\.? \d{{1,2}}, \d{{4}}$"),
        format!(r"^\d{{1,2}} (?:{MONTHS})[a-z]*\.? \d{{4}}$"),
        format!(r"^(?:{MONTHS})[a-z]*\.? \d{{4}}$"),
        format!(r"^(?:{MONTHS}) +\d{{1,2}} \d{{2}}:\d{{2}}:\d{{2}}$"),
        r"^\d{1,2}/(?:Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec)/\d{4}:\d{2}:\d{2}:\d{2}(?: [+-]\d{4})?$".to_string(),
    ]
    .iter()
    .map(|p| Regex::new(p).unwrap())
    .collect()
});

fn isbn_checksum(digits: &[u32]) -> bool {
    match digits.len() {
        10 => digits.iter().enumerate().map(|(i, d)| (10 - i as u32) * d).sum::<u32>() % 11 == 0,
        13 => {
            digits.iter().enumerate().map(|(i, d)| if i % 2 == 0 { *d } else { 3 * d }).sum::<u32>() % 10 == 0
        }
        _ => false,
    }
}

pub fn is_json(v: &str) -> bool {
    let t = v.trim();
    (t.starts_with('{') || t.starts_with('['))
        && serde_json::from_str::<serde_json::Value>(t).is_ok_and(|j| j.is_object() || j.is_array())
}

pub fn is_csv(v: &str) -> bool {
    if !v.contains(',') || v.contains('\n') {
        return false;
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(v.as_bytes());
    let mut records = reader.records();
    match (records.next(), records.next()) {
        (Some(Ok(rec)), None) => rec.len() >= 2 && rec.iter().all(|f| !f.trim().is_empty()),
        _ => false,
    }
}

pub fn is_url(v: &str) -> bool {
    URL_RE.is_match(v.trim())
}

pub fn is_doi(v: &str) -> bool {
    DOI_RE.is_match(v.trim())
}

pub fn is_isbn(v: &str) -> bool {
    let Some(caps) = ISBN_RE.captures(v.trim()) else {
        return false;
    };
    let digits: Vec<u32> = caps[1]
        .chars()
        .filter(|c| !matches!(c, '-' | ' '))
        .map(|c| if c == 'X' || c == 'x' { 10 } else { c.to_digit(10).unwrap_or(99) })
        .collect();
    // X is only valid as the ISBN-10 check digit
    let x_ok = digits.iter().rev().skip(1).all(|&d| d < 10) && (digits.len() == 10 || digits.last() < Some(&10));
    x_ok && isbn_checksum(&digits)
}

pub fn is_date(v: &str) -> bool {
    let t = v.trim();
    DATE_RES.iter().any(|re| re.is_match(t))
}

pub type Detector = fn(&str) -> bool;

/// Detectors in priority order.
pub const DETECTORS: [(Format, Detector); 6] = [
    (Format::Json, is_json),
    (Format::Csv, is_csv),
    (Format::Url, is_url),
    (Format::Doi, is_doi),
    (Format::Isbn, is_isbn),
    (Format::Date, is_date),
];

pub fn detect_format(values: &[&str]) -> FormatLabel {
    let present: Vec<&str> = values.iter().copied().filter(|v| !v.trim().is_empty()).collect();
    if present.is_empty() {
        return FormatLabel { label: Format::None, coverage: 0.0 };
    }
    for (format, detector) in DETECTORS {
        let hits = present.iter().filter(|v| detector(v)).count();
        let coverage = hits as f64 / present.len() as f64;
        if coverage >= FORMAT_COVERAGE {
            return FormatLabel { label: format, coverage };
        }
    }
    FormatLabel { label: Format::None, coverage: 0.0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub value: String,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Distribution {
    Empty,
    Histogram { bins: Vec<Bin> },
    Bars { bars: Vec<Bar> },
}

fn parse_number(v: &str) -> Option<f64> {
    v.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

pub fn sturges_bins(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (n as f64).log2().ceil() as usize + 1
    }
}

pub fn value_distribution(values: &[&str]) -> Distribution {
    let present: Vec<&str> = values.iter().copied().filter(|v| !v.trim().is_empty()).collect();
    if present.is_empty() {
        return Distribution::Empty;
    }
    let numbers: Vec<f64> = present.iter().filter_map(|v| parse_number(v)).collect();
    if numbers.len() as f64 >= 0.95 * present.len() as f64 {
        return Distribution::Histogram { bins: histogram(&numbers) };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for v in &present {
        *counts.entry(v).or_default() += 1;
    }
    let mut bars: Vec<Bar> = counts.into_iter().map(|(v, c)| Bar { value: v.to_string(), count: c }).collect();
    bars.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.value.cmp(&b.value)));
    Distribution::Bars { bars }
}

fn histogram(numbers: &[f64]) -> Vec<Bin> {
    let lo = numbers.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = numbers.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![Bin { lo, hi, count: numbers.len() }];
    }
    let k = sturges_bins(numbers.len());
    let width = (hi - lo) / k as f64;
    let mut bins: Vec<Bin> = (0..k)
        .map(|i| Bin {
            lo: lo + width * i as f64,
            hi: if i + 1 == k { hi } else { lo + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &x in numbers {
        let i = (((x - lo) / width) as usize).min(k - 1);
        bins[i].count += 1;
    }
    bins
}

/// Raw measurements entering the complexity score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplexityInputs {
    pub avg_record_len: f64,
    pub field_clusters: usize,
    pub size: usize,
}

/// Min and max of each measurement over a corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CorpusBounds {
    pub avg_record_len: (f64, f64),
    pub field_clusters: (f64, f64),
    pub size: (f64, f64),
}

impl CorpusBounds {
    pub fn from_inputs(inputs: &[ComplexityInputs]) -> Option<Self> {
        if inputs.is_empty() {
            return None;
        }
        let range = |f: &dyn Fn(&ComplexityInputs) -> f64| {
            inputs.iter().map(f).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        Some(CorpusBounds {
            avg_record_len: range(&|i| i.avg_record_len),
            field_clusters: range(&|i| i.field_clusters as f64),
            size: range(&|i| i.size as f64),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub value: f64,
    /// False when no corpus bounds were available and `value` is the raw product.
    pub normalized: bool,
}

fn min_max(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        1.0
    } else {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    }
}

pub fn structural_complexity(inputs: &ComplexityInputs, bounds: Option<&CorpusBounds>) -> Complexity {
    match bounds {
        Some(b) => Complexity {
            value: min_max(inputs.avg_record_len, b.avg_record_len)
                * min_max(inputs.field_clusters as f64, b.field_clusters)
                * min_max(inputs.size as f64, b.size),
            normalized: true,
        },
        None => Complexity {
            value: inputs.avg_record_len * inputs.field_clusters as f64 * inputs.size as f64,
            normalized: false,
        },
    }
}
