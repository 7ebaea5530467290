//! Documents and corpora: token normalization, tf-idf weighting, cosine
//! similarity, corpus refinement by neighbor counts, and noise injection.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{BufRead, BufReader, Read, Write};

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::comparability::LexiconView;
use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub language: String,
    pub label: Option<String>,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, language: impl Into<String>, label: Option<&str>, tokens: Vec<String>) -> Self {
        Document {
            id: id.into(),
            language: language.into(),
            label: label.map(str::to_string),
            tokens,
        }
    }

    pub fn lexicon(&self) -> LexiconView {
        LexiconView::from_tokens(&self.tokens)
    }
}

/// Same-language documents with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    language: String,
    documents: Vec<Document>,
}

impl Corpus {
    pub fn new(language: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        let language = language.into();
        let mut seen = HashSet::new();
        for d in &documents {
            if d.language != language {
                return Err(Error::LanguageMismatch(format!(
                    "document {} is {:?}, corpus is {:?}",
                    d.id, d.language, language
                )));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate document id {:?}", d.id)));
            }
        }
        Ok(Corpus { language, documents })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.id.clone()).collect()
    }

    /// Class label of every document; unlabeled documents get an empty label.
    pub fn labels(&self) -> Vec<String> {
        self.documents
            .iter()
            .map(|d| d.label.clone().unwrap_or_default())
            .collect()
    }

    /// Union of all document terms.
    pub fn lexicon(&self) -> BTreeSet<String> {
        self.documents.iter().flat_map(|d| d.tokens.iter().cloned()).collect()
    }

    pub fn lexicons(&self) -> Vec<(String, LexiconView)> {
        self.documents.iter().map(|d| (d.id.clone(), d.lexicon())).collect()
    }

    /// The documents with the given ids, in the given order.
    pub fn select(&self, ids: &[String]) -> Result<Corpus> {
        let by_id: BTreeMap<&str, &Document> = self.documents.iter().map(|d| (d.id.as_str(), d)).collect();
        let docs = ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|&d| d.clone())
                    .ok_or_else(|| Error::InvalidInput(format!("unknown document id {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(self.language.clone(), docs)
    }

    /// Documents grouped by label, labels in sorted order; unlabeled documents are left out.
    pub fn classes(&self) -> BTreeMap<String, Vec<usize>> {
        let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, d) in self.documents.iter().enumerate() {
            if let Some(l) = &d.label {
                classes.entry(l.clone()).or_default().push(i);
            }
        }
        classes
    }

    /// Reads `id<TAB>language<TAB>label<TAB>tokens` records. The label may be
    /// empty; tokens are whitespace-separated. Blank lines and `#` lines are skipped.
    pub fn read_tsv<R: Read>(reader: R, source_name: &str) -> Result<Corpus> {
        let mut docs = Vec::new();
        let mut language: Option<(String, u64)> = None;
        let mut seen = HashSet::new();
        for (n, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = n as u64 + 1;
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            if fields.len() < 3 {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("expected id, language, label and tokens fields, found {}", fields.len()),
                ));
            }
            let id = fields[0].trim();
            let lang = fields[1].trim();
            if id.is_empty() || lang.is_empty() {
                return Err(Error::parse(source_name, line_no, "empty id or language"));
            }
            match &language {
                None => language = Some((lang.to_string(), line_no)),
                Some((l, first)) if l != lang => {
                    return Err(Error::LanguageMismatch(format!(
                        "{source_name}: line {line_no} is {lang:?} but line {first} is {l:?}"
                    )))
                }
                _ => {}
            }
            if !seen.insert(id.to_string()) {
                return Err(Error::parse(
                    source_name,
                    line_no,
                    format!("duplicate document id {id:?}"),
                ));
            }
            let label = Some(fields[2].trim()).filter(|l| !l.is_empty());
            let tokens: Vec<String> = fields
                .get(3)
                .map_or_else(Vec::new, |t| t.split_whitespace().map(str::to_string).collect());
            docs.push(Document::new(id, lang, label, tokens));
        }
        let Some((language, _)) = language else {
            return Err(Error::parse(source_name, 1, "corpus file contains no documents"));
        };
        Corpus::new(language, docs)
    }

    pub fn write_tsv<W: Write>(&self, mut writer: W) -> Result<()> {
        for d in &self.documents {
            writeln!(
                writer,
                "{}\t{}\t{}\t{}",
                d.id,
                d.language,
                d.label.as_deref().unwrap_or(""),
                d.tokens.join(" ")
            )?;
        }
        Ok(())
    }

    /// Applies [`normalize_tokens`] to every document.
    pub fn normalized(&self, stoplist: &Stoplist) -> Corpus {
        let documents = self
            .documents
            .iter()
            .map(|d| Document {
                tokens: normalize_tokens(&d.tokens, stoplist),
                ..d.clone()
            })
            .collect();
        Corpus {
            language: self.language.clone(),
            documents,
        }
    }
}

/// Case-folded set of words to discard.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Stoplist(
            words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut words = Vec::new();
        for line in BufReader::new(reader).lines() {
            let line = line?;
            let w = line.trim();
            if !w.is_empty() && !w.starts_with('#') {
                words.push(w.to_string());
            }
        }
        Ok(Stoplist::new(words))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

/// Lower-cases tokens and drops stop words and tokens without any
/// alphanumeric character.
pub fn normalize_tokens<S: AsRef<str>>(raw: &[S], stoplist: &Stoplist) -> Vec<String> {
    raw.iter()
        .map(|t| t.as_ref().to_lowercase())
        .filter(|t| t.chars().any(char::is_alphanumeric) && !stoplist.contains(t))
        .collect()
}

/// Sparse non-negative term weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightedVector(BTreeMap<String, f64>);

impl WeightedVector {
    pub fn from_weights<I, S>(weights: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        WeightedVector(
            weights
                .into_iter()
                .filter(|(_, w)| *w != 0.0)
                .map(|(t, w)| (t.into(), w))
                .collect(),
        )
    }

    pub fn get(&self, term: &str) -> f64 {
        self.0.get(term).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn dot(&self, other: &WeightedVector) -> f64 {
        let (small, large) = if self.len() <= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        small.iter().map(|(t, w)| w * large.get(t)).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.values().map(|w| w * w).sum()
    }
}

/// `tf(w, d) · ln(N / df(w))` for every document, with idf estimated on the
/// corpus itself. Terms present in every document weigh 0 and are omitted.
pub fn tfidf_vectors(corpus: &Corpus) -> Result<Vec<WeightedVector>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("tf-idf needs a non-empty corpus".into()));
    }
    let n = corpus.len() as f64;
    let lexicons: Vec<LexiconView> = corpus.documents().iter().map(Document::lexicon).collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for lex in &lexicons {
        for t in lex.terms() {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let empty: Vec<&str> = corpus
        .documents()
        .iter()
        .zip(&lexicons)
        .filter(|(_, l)| l.is_empty())
        .map(|(d, _)| d.id.as_str())
        .collect();
    if !empty.is_empty() {
        warn!("{} empty document(s): {}", empty.len(), empty.join(", "));
    }
    Ok(lexicons
        .iter()
        .map(|lex| WeightedVector::from_weights(lex.counts().map(|(t, tf)| (t, tf as f64 * (n / df[t] as f64).ln()))))
        .collect())
}

/// Cosine similarity between all pairs of vectors.
///
/// A zero vector has self-similarity 1 and similarity 0 to everything else;
/// such vectors are reported in a warning.
pub fn cosine_similarity_matrix(ids: Vec<String>, vectors: &[WeightedVector]) -> Result<SimilarityMatrix> {
    if vectors.is_empty() || ids.len() != vectors.len() {
        return Err(Error::InvalidInput(format!(
            "cosine similarity needs a non-empty, id-aligned vector list ({} ids, {} vectors)",
            ids.len(),
            vectors.len()
        )));
    }
    let norms: Vec<f64> = vectors.iter().map(WeightedVector::squared_norm).collect();
    let zero: Vec<&str> = ids
        .iter()
        .zip(&norms)
        .filter(|(_, &n)| n == 0.0)
        .map(|(id, _)| id.as_str())
        .collect();
    if !zero.is_empty() {
        warn!("{} zero-norm vector(s): {}", zero.len(), zero.join(", "));
    }
    SimilarityMatrix::from_upper(ids, |i, j| {
        if i == j {
            1.0
        } else if norms[i] == 0.0 || norms[j] == 0.0 {
            0.0
        } else {
            (vectors[i].dot(&vectors[j]) / (norms[i] * norms[j]).sqrt()).min(1.0)
        }
    })
}

/// tf-idf cosine similarity over a corpus.
pub fn native_similarity(corpus: &Corpus) -> Result<SimilarityMatrix> {
    cosine_similarity_matrix(corpus.ids(), &tfidf_vectors(corpus)?)
}

/// Ranks documents by how many other documents reach `threshold` similarity
/// with them (descending, ties by ascending id) and keeps the first `top_n`.
pub fn refine_corpus(sim: &SimilarityMatrix, threshold: f64, top_n: usize) -> Result<Vec<String>> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold must lie in [-1, 1], got {threshold}"
        )));
    }
    if top_n == 0 {
        return Err(Error::InvalidParameter("top_n must be at least 1".into()));
    }
    let n = sim.len();
    let mut ranked: Vec<(usize, &str)> = (0..n)
        .map(|i| {
            let count = (0..n).filter(|&j| j != i && sim.get(i, j) >= threshold).count();
            (count, sim.ids()[i].as_str())
        })
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    Ok(ranked.into_iter().take(top_n).map(|(_, id)| id.to_string()).collect())
}

/// Adds, to every class of `selected`, `round(fraction · class size)` documents
/// drawn uniformly without replacement from `pool` and relabeled with that class.
///
/// Classes are filled in sorted label order from one seeded stream, so the
/// output depends only on the inputs and `seed`.
pub fn inject_noise(selected: &Corpus, pool: &Corpus, fraction: f64, seed: u64) -> Result<Corpus> {
    if !(fraction.is_finite() && fraction >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise fraction must be non-negative, got {fraction}"
        )));
    }
    if pool.language() != selected.language() && !pool.is_empty() {
        return Err(Error::LanguageMismatch(format!(
            "noise pool is {:?}, corpus is {:?}",
            pool.language(),
            selected.language()
        )));
    }
    let selected_ids: HashSet<&str> = selected.documents().iter().map(|d| d.id.as_str()).collect();
    if let Some(d) = pool.documents().iter().find(|d| selected_ids.contains(d.id.as_str())) {
        return Err(Error::InvalidInput(format!(
            "pool document {:?} is already selected",
            d.id
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut remaining: Vec<&Document> = pool.documents().iter().collect();
    remaining.shuffle(&mut rng);
    let mut docs = selected.documents().to_vec();
    for (label, members) in selected.classes() {
        let wanted = (fraction * members.len() as f64).round() as usize;
        if wanted > remaining.len() {
            warn!(
                "noise pool exhausted: class {label:?} wanted {wanted} document(s), {} left",
                remaining.len()
            );
        }
        let take = wanted.min(remaining.len());
        for d in remaining.drain(..take) {
            docs.push(Document {
                label: Some(label.clone()),
                ..d.clone()
            });
        }
    }
    Corpus::new(selected.language().to_string(), docs)
}

/// Builds the experiment corpus from a labeled raw corpus: tf-idf cosine over
/// the whole corpus, per class the `top_n` documents from [`refine_corpus`],
/// then noise drawn from every document that was not kept.
pub fn prepare_corpus(raw: &Corpus, threshold: f64, top_n: usize, fraction: f64, seed: u64) -> Result<Corpus> {
    let sim = native_similarity(raw)?;
    let mut kept = Vec::new();
    for members in raw.classes().values() {
        kept.extend(refine_corpus(&sim.submatrix(members), threshold, top_n)?);
    }
    let kept_set: HashSet<&str> = kept.iter().map(String::as_str).collect();
    let rest: Vec<String> = raw
        .ids()
        .into_iter()
        .filter(|id| !kept_set.contains(id.as_str()))
        .collect();
    let selected = raw.select(&kept)?;
    inject_noise(&selected, &raw.select(&rest)?, fraction, seed)
}
