//! Dictionary-based comparability between two texts written in different
//! languages.
//!
//! Three measures are provided. [`c_lg`] counts dictionary entries of each side
//! that have at least one translation on the other side. [`c_va1`] and
//! [`c_va2`] weight each entry by its term frequency divided by its number of
//! translations, and differ only in how the two sides are combined: a mean of
//! the two per-side ratios, or one pooled ratio.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Partition;
use crate::matrix::ComparabilityMatrix;

/// Which side of the dictionary a term belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Terms of the first language, translated into the second.
    Forward,
    /// Terms of the second language, translated into the first.
    Reverse,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Forward => Direction::Reverse,
            Direction::Reverse => Direction::Forward,
        }
    }
}

/// Bilingual translation dictionary with a forward and a reverse index.
///
/// The reverse index is kept as the exact transpose of the forward relation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BilingualDictionary {
    forward: HashMap<String, BTreeSet<String>>,
    reverse: HashMap<String, BTreeSet<String>>,
    languages: Option<(String, String)>,
}

impl BilingualDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: AsRef<str>,
        B: AsRef<str>,
    {
        let mut dict = Self::new();
        for (a, b) in pairs {
            dict.insert(a.as_ref(), b.as_ref());
        }
        dict
    }

    /// Adds one translation pair. Terms are case-folded; duplicates are ignored.
    pub fn insert(&mut self, term1: &str, term2: &str) {
        let (a, b) = (term1.trim().to_lowercase(), term2.trim().to_lowercase());
        if a.is_empty() || b.is_empty() {
            return;
        }
        self.forward.entry(a.clone()).or_default().insert(b.clone());
        self.reverse.entry(b).or_default().insert(a);
    }

    /// Declared `(language1, language2)` tags, if the source carried them.
    pub fn languages(&self) -> Option<(&str, &str)> {
        self.languages.as_ref().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn set_languages(&mut self, lang1: &str, lang2: &str) {
        self.languages = Some((lang1.to_string(), lang2.to_string()));
    }

    /// The same dictionary read from the second language's side.
    pub fn reversed(&self) -> Self {
        BilingualDictionary {
            forward: self.reverse.clone(),
            reverse: self.forward.clone(),
            languages: self.languages.as_ref().map(|(a, b)| (b.clone(), a.clone())),
        }
    }

    fn index(&self, direction: Direction) -> &HashMap<String, BTreeSet<String>> {
        match direction {
            Direction::Forward => &self.forward,
            Direction::Reverse => &self.reverse,
        }
    }

    pub fn translations(&self, term: &str, direction: Direction) -> Option<&BTreeSet<String>> {
        self.index(direction).get(term)
    }

    pub fn contains(&self, term: &str, direction: Direction) -> bool {
        self.index(direction).contains_key(term)
    }

    /// Number of distinct translations of `term` (0 if not an entry).
    pub fn tau(&self, term: &str, direction: Direction) -> usize {
        self.translations(term, direction).map_or(0, BTreeSet::len)
    }

    /// Number of distinct translation pairs.
    pub fn pair_count(&self) -> usize {
        self.forward.values().map(BTreeSet::len).sum()
    }

    pub fn entry_count(&self, direction: Direction) -> usize {
        self.index(direction).len()
    }

    /// Reads `term1<TAB>term2` lines. Blank lines and `#` comments are skipped;
    /// a comment of the form `# languages: en fr` declares the language pair.
    pub fn read_tsv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut dict = Self::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = n as u64 + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(langs) = comment.trim().strip_prefix("languages:") {
                    let tags: Vec<&str> = langs.split_whitespace().collect();
                    if tags.len() != 2 {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            "languages header needs exactly two tags",
                        ));
                    }
                    dict.set_languages(tags[0], tags[1]);
                }
                continue;
            }
            let mut fields = line.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => dict.insert(a, b),
                _ => {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        "expected exactly two non-empty tab-separated terms",
                    ))
                }
            }
        }
        Ok(dict)
    }

    /// Writes the dictionary in the format accepted by [`read_tsv`](Self::read_tsv),
    /// sorted for reproducibility.
    pub fn write_tsv<W: std::io::Write>(&self, mut writer: W) -> Result<()> {
        if let Some((a, b)) = self.languages() {
            writeln!(writer, "# languages: {a} {b}")?;
        }
        let sorted: BTreeMap<_, _> = self.forward.iter().collect();
        for (a, targets) in sorted {
            for b in targets {
                writeln!(writer, "{a}\t{b}")?;
            }
        }
        Ok(())
    }
}

/// Distinct terms of a text with their occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconView {
    tf: BTreeMap<String, u64>,
}

impl LexiconView {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tf = BTreeMap::new();
        for t in tokens {
            *tf.entry(t.as_ref().to_string()).or_insert(0) += 1;
        }
        LexiconView { tf }
    }

    /// Builds a view from explicit counts; zero counts are dropped.
    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut tf = BTreeMap::new();
        for (t, c) in counts {
            if c > 0 {
                *tf.entry(t.as_ref().to_string()).or_insert(0) += c;
            }
        }
        LexiconView { tf }
    }

    pub fn contains(&self, term: &str) -> bool {
        self.tf.contains_key(term)
    }

    pub fn tf(&self, term: &str) -> u64 {
        self.tf.get(term).copied().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.tf.keys().map(String::as_str)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&str, u64)> {
        self.tf.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tf.is_empty()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> Self {
        LexiconView::from_counts(self.counts().map(|(t, c)| (t, c * factor)))
    }
}

/// Whether at least one translation of `term` occurs in `other`.
///
/// Terms that are not dictionary entries in `direction` never have a
/// translation, so they yield `false`.
pub fn sigma(term: &str, dict: &BilingualDictionary, other: &LexiconView, direction: Direction) -> bool {
    dict.translations(term, direction)
        .is_some_and(|ts| ts.iter().any(|t| other.contains(t)))
}

fn entries<'a>(
    lex: &'a LexiconView,
    dict: &'a BilingualDictionary,
    direction: Direction,
) -> impl Iterator<Item = (&'a str, u64)> + 'a {
    lex.counts().filter(move |(t, _)| dict.contains(t, direction))
}

/// Binary connection counts for one side: (entries with a translation hit, entries).
fn binary_side(lex: &LexiconView, other: &LexiconView, dict: &BilingualDictionary, direction: Direction) -> (u64, u64) {
    entries(lex, dict, direction).fold((0, 0), |(hits, total), (t, _)| {
        (hits + u64::from(sigma(t, dict, other, direction)), total + 1)
    })
}

/// Frequency-weighted coverage of one side against the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    /// Weighted mass of entries with a translation on the other side.
    pub conditional: f64,
    /// Weighted mass of all entries.
    pub total: f64,
}

/// Sums `tf(w)/τ(w)` over the dictionary entries of `lex`, once restricted to
/// entries with a translation in `other` and once unrestricted.
pub fn weighted_coverage(
    lex: &LexiconView,
    dict: &BilingualDictionary,
    other: &LexiconView,
    direction: Direction,
) -> Coverage {
    let mut conditional = 0.0;
    let mut total = 0.0;
    for (t, tf) in entries(lex, dict, direction) {
        let w = tf as f64 / dict.tau(t, direction) as f64;
        total += w;
        if sigma(t, dict, other, direction) {
            conditional += w;
        }
    }
    Coverage { conditional, total }
}

fn c_lg_raw(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> Option<f64> {
    let (hits_a, n_a) = binary_side(a, b, dict, Direction::Forward);
    let (hits_b, n_b) = binary_side(b, a, dict, Direction::Reverse);
    let denom = n_a + n_b;
    (denom > 0).then(|| (hits_a + hits_b) as f64 / denom as f64)
}

fn coverages(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> (Coverage, Coverage) {
    (
        weighted_coverage(a, dict, b, Direction::Forward),
        weighted_coverage(b, dict, a, Direction::Reverse),
    )
}

fn c_va1_raw(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> Option<f64> {
    let (ca, cb) = coverages(a, b, dict);
    if !(ca.total > 0.0 && cb.total > 0.0) {
        return None;
    }
    if ca.total == cb.total {
        // Same value as the pooled ratio; computed identically so the two agree exactly.
        return Some((ca.conditional + cb.conditional) / (ca.total + cb.total));
    }
    Some(0.5 * (ca.conditional / ca.total + cb.conditional / cb.total))
}

fn c_va2_raw(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> Option<f64> {
    let (ca, cb) = coverages(a, b, dict);
    let total = ca.total + cb.total;
    (total > 0.0).then(|| (ca.conditional + cb.conditional) / total)
}

/// Share of dictionary entries, over both sides, that have a translation on
/// the other side. Term frequencies are ignored.
///
/// Returns 0 (and logs a warning) when neither text contains a dictionary entry.
pub fn c_lg(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> f64 {
    Measure::Lg.score(a, b, dict)
}

/// Mean of the two per-side weighted coverage ratios. Returns 0 with a warning
/// when either side has no dictionary entry.
pub fn c_va1(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> f64 {
    Measure::Va1.score(a, b, dict)
}

/// Pooled weighted coverage ratio over both sides. Returns 0 with a warning
/// when neither side has a dictionary entry.
pub fn c_va2(a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> f64 {
    Measure::Va2.score(a, b, dict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    Lg,
    Va1,
    Va2,
}

impl Measure {
    /// The measure value, or `None` when its denominator vanishes.
    pub fn try_score(self, a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> Option<f64> {
        match self {
            Measure::Lg => c_lg_raw(a, b, dict),
            Measure::Va1 => c_va1_raw(a, b, dict),
            Measure::Va2 => c_va2_raw(a, b, dict),
        }
    }

    pub fn score(self, a: &LexiconView, b: &LexiconView, dict: &BilingualDictionary) -> f64 {
        self.try_score(a, b, dict).unwrap_or_else(|| {
            warn!("{self}: degenerate denominator (no usable dictionary entries), scoring 0");
            0.0
        })
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::Lg => "lg",
            Measure::Va1 => "va1",
            Measure::Va2 => "va2",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lg" => Ok(Measure::Lg),
            "va1" => Ok(Measure::Va1),
            "va2" => Ok(Measure::Va2),
            other => Err(Error::InvalidParameter(format!("unknown measure {other:?}"))),
        }
    }
}

/// Applies `measure` to every (row document, column document) pair.
///
/// Degenerate cells score 0; a single warning reports how many occurred.
pub fn pairwise_comparability(
    docs_a: &[(String, LexiconView)],
    docs_b: &[(String, LexiconView)],
    dict: &BilingualDictionary,
    measure: Measure,
) -> Result<ComparabilityMatrix> {
    if docs_a.is_empty() || docs_b.is_empty() {
        return Err(Error::InvalidInput(
            "pairwise comparability needs documents on both sides".into(),
        ));
    }
    let rows: Vec<(Vec<f64>, usize)> = docs_a
        .par_iter()
        .map(|(_, a)| {
            let mut degenerate = 0;
            let row = docs_b
                .iter()
                .map(|(_, b)| {
                    measure.try_score(a, b, dict).unwrap_or_else(|| {
                        degenerate += 1;
                        0.0
                    })
                })
                .collect();
            (row, degenerate)
        })
        .collect();
    let degenerate: usize = rows.iter().map(|(_, d)| d).sum();
    if degenerate > 0 {
        warn!("{measure}: {degenerate} document pair(s) had no usable dictionary entries and scored 0");
    }
    ComparabilityMatrix::from_values(
        docs_a.iter().map(|(id, _)| id.clone()).collect(),
        docs_b.iter().map(|(id, _)| id.clone()).collect(),
        rows.into_iter().flat_map(|(r, _)| r).collect(),
    )
}

/// Mean comparability of every (row cluster, column cluster) block.
///
/// Blocks involving an empty cluster are `None`.
pub fn cluster_comparability(
    c: &ComparabilityMatrix,
    rows: &Partition,
    cols: &Partition,
) -> Result<Vec<Vec<Option<f64>>>> {
    if rows.len() != c.rows() || cols.len() != c.cols() {
        return Err(Error::DimensionMismatch {
            left: "comparability matrix".into(),
            left_dims: format!("{}x{}", c.rows(), c.cols()),
            right: "partitions".into(),
            right_dims: format!("{}x{}", rows.len(), cols.len()),
        });
    }
    let mut sums = vec![vec![0.0; cols.k()]; rows.k()];
    for i in 0..c.rows() {
        let k = rows.assignment()[i];
        for j in 0..c.cols() {
            sums[k][cols.assignment()[j]] += c.get(i, j);
        }
    }
    let row_sizes = rows.cluster_sizes();
    let col_sizes = cols.cluster_sizes();
    let blocks = sums
        .into_iter()
        .enumerate()
        .map(|(k, row)| {
            row.into_iter()
                .enumerate()
                .map(|(l, s)| {
                    let cells = row_sizes[k] * col_sizes[l];
                    (cells > 0).then(|| s / cells as f64)
                })
                .collect()
        })
        .collect();
    Ok(blocks)
}
