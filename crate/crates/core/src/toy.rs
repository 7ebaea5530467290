//! Small constructed bilingual corpus for desk-scale text experiments.
//!
//! Each class has a topic vocabulary in both languages, linked one to one by the
//! dictionary together with a shared general vocabulary. Documents are short
//! bags of words mixing their own topic, other topics, general words and words
//! the dictionary does not cover. The raw corpus then goes through
//! [`prepare_corpus`], so every class ends up with some mislabeled documents.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::comparability::BilingualDictionary;
use crate::error::{Error, Result};
use crate::synthetic::derive_seed;
use crate::text::{prepare_corpus, Corpus, Document};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyConfig {
    pub languages: (String, String),
    pub classes: usize,
    /// Documents kept per class and language before noise is added.
    pub docs_per_class: usize,
    /// Raw documents generated per class and language.
    pub candidates_per_class: usize,
    pub topic_words: usize,
    pub general_words: usize,
    /// Words per language outside the dictionary.
    pub private_words: usize,
    pub doc_length: (usize, usize),
    /// Token source probabilities: own topic, another class's topic, general.
    /// The remainder goes to private words.
    pub topic_rate: f64,
    pub leak_rate: f64,
    pub general_rate: f64,
    pub threshold: f64,
    pub noise_fraction: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            languages: ("en".into(), "fr".into()),
            classes: 4,
            docs_per_class: 25,
            candidates_per_class: 40,
            topic_words: 40,
            general_words: 40,
            private_words: 200,
            doc_length: (15, 30),
            topic_rate: 0.25,
            leak_rate: 0.1,
            general_rate: 0.1,
            threshold: 0.1,
            noise_fraction: 0.3,
        }
    }
}

impl ToyConfig {
    /// Dictionary size: every topic word plus every general word.
    pub fn dictionary_size(&self) -> usize {
        self.classes * self.topic_words + self.general_words
    }

    fn validate(&self) -> Result<()> {
        let rates = [self.topic_rate, self.leak_rate, self.general_rate];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) || rates.iter().sum::<f64>() > 1.0 {
            return Err(Error::InvalidParameter(
                "token rates must be probabilities summing to at most 1".into(),
            ));
        }
        if self.classes < 2 || self.topic_words == 0 || self.general_words == 0 || self.private_words == 0 {
            return Err(Error::InvalidParameter(
                "toy corpus needs two classes and non-empty vocabularies".into(),
            ));
        }
        if self.docs_per_class == 0 || self.candidates_per_class < self.docs_per_class {
            return Err(Error::InvalidParameter(format!(
                "need at least {} candidates per class, got {}",
                self.docs_per_class, self.candidates_per_class
            )));
        }
        if self.doc_length.0 == 0 || self.doc_length.0 > self.doc_length.1 {
            return Err(Error::InvalidParameter(format!(
                "bad document length range {:?}",
                self.doc_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyCorpus {
    pub corpus_a: Corpus,
    pub corpus_b: Corpus,
    pub dictionary: BilingualDictionary,
}

fn topic_word(lang: &str, class: usize, i: usize) -> String {
    format!("{lang}t{class}w{i}")
}

fn general_word(lang: &str, i: usize) -> String {
    format!("{lang}g{i}")
}

fn private_word(lang: &str, i: usize) -> String {
    format!("{lang}p{i}")
}

pub fn toy_dictionary(config: &ToyConfig) -> BilingualDictionary {
    let (a, b) = (&config.languages.0, &config.languages.1);
    let mut pairs = Vec::new();
    for c in 0..config.classes {
        for i in 0..config.topic_words {
            pairs.push((topic_word(a, c, i), topic_word(b, c, i)));
        }
    }
    for i in 0..config.general_words {
        pairs.push((general_word(a, i), general_word(b, i)));
    }
    let mut dict = BilingualDictionary::from_pairs(pairs);
    dict.set_languages(a, b);
    dict
}

fn class_name(c: usize) -> String {
    format!("topic{c}")
}

fn raw_corpus(config: &ToyConfig, lang: &str, rng: &mut ChaCha8Rng) -> Result<Corpus> {
    // Zipf-like word frequencies inside each vocabulary.
    let zipf = |n: usize| WeightedIndex::new((1..=n).map(|r| 1.0 / r as f64)).expect("non-empty vocabulary");
    let topic = zipf(config.topic_words);
    let general = zipf(config.general_words);
    let private = zipf(config.private_words);
    let mut docs = Vec::new();
    for c in 0..config.classes {
        for d in 0..config.candidates_per_class {
            let len = rng.random_range(config.doc_length.0..=config.doc_length.1);
            let tokens = (0..len)
                .map(|_| {
                    let r: f64 = rng.random();
                    if r < config.topic_rate {
                        topic_word(lang, c, topic.sample(rng))
                    } else if r < config.topic_rate + config.leak_rate {
                        let other = (c + rng.random_range(1..config.classes)) % config.classes;
                        topic_word(lang, other, topic.sample(rng))
                    } else if r < config.topic_rate + config.leak_rate + config.general_rate {
                        general_word(lang, general.sample(rng))
                    } else {
                        private_word(lang, private.sample(rng))
                    }
                })
                .collect();
            docs.push(Document::new(
                format!("{lang}{c}-{d}"),
                lang,
                Some(&class_name(c)),
                tokens,
            ));
        }
    }
    Corpus::new(lang, docs)
}

/// Generates the raw corpora, refines each class to `docs_per_class`
/// documents and injects `noise_fraction` noise. Deterministic per seed.
pub fn generate_toy(seed: u64, config: &ToyConfig) -> Result<ToyCorpus> {
    config.validate()?;
    let mut sides = Vec::new();
    for (i, lang) in [&config.languages.0, &config.languages.1].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2 * i as u64));
        let raw = raw_corpus(config, lang, &mut rng)?;
        sides.push(prepare_corpus(
            &raw,
            config.threshold,
            config.docs_per_class,
            config.noise_fraction,
            derive_seed(seed, 2 * i as u64 + 1),
        )?);
    }
    let corpus_b = sides.pop().expect("two sides");
    let corpus_a = sides.pop().expect("two sides");
    Ok(ToyCorpus {
        corpus_a,
        corpus_b,
        dictionary: toy_dictionary(config),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_matches_config() {
        let config = ToyConfig::default();
        let toy = generate_toy(1, &config).unwrap();
        assert_eq!(toy.dictionary.pair_count(), 200);
        assert_eq!(toy.dictionary.languages(), Some(("en", "fr")));
        for corpus in [&toy.corpus_a, &toy.corpus_b] {
            let classes = corpus.classes();
            assert_eq!(classes.len(), 4);
            for members in classes.values() {
                // 25 kept plus round(0.3 · 25) injected.
                assert_eq!(members.len(), 33);
            }
        }
        assert_eq!(toy.corpus_a.language(), "en");
        assert_eq!(toy.corpus_b.language(), "fr");
    }

    #[test]
    fn deterministic_per_seed() {
        let config = ToyConfig::default();
        assert_eq!(generate_toy(8, &config).unwrap(), generate_toy(8, &config).unwrap());
        assert_ne!(
            generate_toy(8, &config).unwrap().corpus_a,
            generate_toy(9, &config).unwrap().corpus_a
        );
    }

    #[test]
    fn noise_documents_come_from_other_or_same_classes() {
        let toy = generate_toy(2, &ToyConfig::default()).unwrap();
        let mislabeled = toy
            .corpus_a
            .documents()
            .iter()
            .filter(|d| {
                let origin = d.id[2..].split('-').next().unwrap();
                d.label.as_deref() != Some(&class_name(origin.parse().unwrap()))
            })
            .count();
        assert!(mislabeled > 0 && mislabeled <= 32);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = ToyConfig {
            topic_rate: 0.8,
            general_rate: 0.5,
            ..Default::default()
        };
        assert!(generate_toy(0, &bad).is_err());
        let bad = ToyConfig {
            candidates_per_class: 10,
            ..Default::default()
        };
        assert!(generate_toy(0, &bad).is_err());
    }
}
