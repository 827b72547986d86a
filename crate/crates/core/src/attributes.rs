//! Per-word attributes measured against a training corpus.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{extract_spans, LabelSeq, Sentence, Span, Tag};
use crate::{Error, Result};

/// Occurrence counts of words, characters and their labels in a training set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainingStats {
    pub word_label_counts: HashMap<(String, LabelSeq), u64>,
    pub word_counts: HashMap<String, u64>,
    pub char_label_counts: HashMap<(char, Tag), u64>,
    pub char_counts: HashMap<char, u64>,
    pub total_word_tokens: u64,
    pub total_char_tokens: u64,
    pub vocabulary: HashSet<String>,
}

impl TrainingStats {
    /// Stats with no observations; the identity of [`TrainingStats::merge`].
    pub fn empty() -> Self {
        TrainingStats::default()
    }

    pub fn build(train: &[Sentence]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        let mut stats = TrainingStats::empty();
        for s in train {
            stats.add_sentence(s);
        }
        Ok(stats)
    }

    pub fn add_sentence(&mut self, sentence: &Sentence) {
        for span in extract_spans(sentence, 0) {
            self.add_word(&span.text, &span.labels, 1);
        }
    }

    /// Record `count` occurrences of `word` carrying `labels`.
    pub fn add_word(&mut self, word: &str, labels: &LabelSeq, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .word_label_counts
            .entry((word.to_string(), labels.clone()))
            .or_insert(0) += count;
        *self.word_counts.entry(word.to_string()).or_insert(0) += count;
        self.vocabulary.insert(word.to_string());
        self.total_word_tokens += count;
        for (c, &t) in word.chars().zip(labels.tags()) {
            *self.char_label_counts.entry((c, t)).or_insert(0) += count;
            *self.char_counts.entry(c).or_insert(0) += count;
            self.total_char_tokens += count;
        }
    }

    /// Pointwise sum of all counts, union of vocabularies.
    pub fn merge(&self, other: &TrainingStats) -> TrainingStats {
        let mut out = self.clone();
        out.absorb(other);
        out
    }

    pub fn absorb(&mut self, other: &TrainingStats) {
        for (k, v) in &other.word_label_counts {
            *self.word_label_counts.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.word_counts {
            *self.word_counts.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.char_label_counts {
            *self.char_label_counts.entry(*k).or_insert(0) += v;
        }
        for (k, v) in &other.char_counts {
            *self.char_counts.entry(*k).or_insert(0) += v;
        }
        self.vocabulary.extend(other.vocabulary.iter().cloned());
        self.total_word_tokens += other.total_word_tokens;
        self.total_char_tokens += other.total_char_tokens;
    }

    pub fn word_count(&self, word: &str) -> u64 {
        self.word_counts.get(word).copied().unwrap_or(0)
    }

    pub fn char_count(&self, c: char) -> u64 {
        self.char_counts.get(&c).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocabulary.contains(word)
    }
}

/// Label consistency of a word: the share of its training occurrences that
/// carry `labels`, or 0 for a word never seen in training.
pub fn psi_word(word: &str, labels: &LabelSeq, stats: &TrainingStats) -> f64 {
    let total = stats.word_count(word);
    if total == 0 {
        return 0.0;
    }
    let with_label = stats
        .word_label_counts
        .get(&(word.to_string(), labels.clone()))
        .copied()
        .unwrap_or(0);
    with_label as f64 / total as f64
}

/// Character-level counterpart of [`psi_word`].
pub fn psi_char(c: char, tag: Tag, stats: &TrainingStats) -> f64 {
    let total = stats.char_count(c);
    if total == 0 {
        return 0.0;
    }
    let with_tag = stats.char_label_counts.get(&(c, tag)).copied().unwrap_or(0);
    with_tag as f64 / total as f64
}

/// The seven word attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attribute {
    #[serde(rename = "wLen")]
    WLen,
    #[serde(rename = "sLen")]
    SLen,
    #[serde(rename = "oDen")]
    ODen,
    #[serde(rename = "wFre")]
    WFre,
    #[serde(rename = "cFre")]
    CFre,
    #[serde(rename = "wCon")]
    WCon,
    #[serde(rename = "cCon")]
    CCon,
}

impl Attribute {
    pub const ALL: [Attribute; 7] = [
        Attribute::WLen,
        Attribute::SLen,
        Attribute::ODen,
        Attribute::WFre,
        Attribute::CFre,
        Attribute::WCon,
        Attribute::CCon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::WLen => "wLen",
            Attribute::SLen => "sLen",
            Attribute::ODen => "oDen",
            Attribute::WFre => "wFre",
            Attribute::CFre => "cFre",
            Attribute::WCon => "wCon",
            Attribute::CCon => "cCon",
        }
    }

    /// Integer-valued attributes get integer bucket boundaries.
    pub fn is_integer(self) -> bool {
        matches!(self, Attribute::WLen | Attribute::SLen)
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown attribute {s:?}")))
    }
}

/// Unit in which the sentence-length attribute is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlenUnit {
    #[default]
    Char,
    Word,
}

impl FromStr for SlenUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(SlenUnit::Char),
            "word" => Ok(SlenUnit::Word),
            _ => Err(Error::invalid(format!("unknown sLen unit {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttributeVector {
    #[serde(rename = "wLen")]
    pub w_len: usize,
    #[serde(rename = "sLen")]
    pub s_len: usize,
    #[serde(rename = "oDen")]
    pub o_den: f64,
    #[serde(rename = "wFre")]
    pub w_fre: f64,
    #[serde(rename = "cFre")]
    pub c_fre: f64,
    #[serde(rename = "wCon")]
    pub w_con: f64,
    #[serde(rename = "cCon")]
    pub c_con: f64,
}

impl AttributeVector {
    pub fn get(&self, attribute: Attribute) -> f64 {
        match attribute {
            Attribute::WLen => self.w_len as f64,
            Attribute::SLen => self.s_len as f64,
            Attribute::ODen => self.o_den,
            Attribute::WFre => self.w_fre,
            Attribute::CFre => self.c_fre,
            Attribute::WCon => self.w_con,
            Attribute::CCon => self.c_con,
        }
    }
}

/// Share of the sentence's words that are absent from the training vocabulary.
pub fn oov_density(sentence: &Sentence, stats: &TrainingStats) -> f64 {
    let oov = sentence.word_strings().filter(|w| !stats.contains(w)).count();
    oov as f64 / sentence.word_count() as f64
}

/// Attributes of one span. `sentence` supplies the sentence-level context
/// (length and OOV density) and must contain the span's characters.
pub fn attribute_vector(span: &Span, sentence: &Sentence, stats: &TrainingStats, unit: SlenUnit) -> AttributeVector {
    let o_den = oov_density(sentence, stats);
    attribute_vector_with_density(span, sentence, stats, unit, o_den)
}

fn attribute_vector_with_density(
    span: &Span,
    sentence: &Sentence,
    stats: &TrainingStats,
    unit: SlenUnit,
    o_den: f64,
) -> AttributeVector {
    let w_len = span.len();
    let s_len = match unit {
        SlenUnit::Char => sentence.char_len(),
        SlenUnit::Word => sentence.word_count(),
    };
    let w_fre = if stats.total_word_tokens == 0 {
        0.0
    } else {
        stats.word_count(&span.text) as f64 / stats.total_word_tokens as f64
    };
    let chars: Vec<char> = span.text.chars().collect();
    let n = chars.len() as f64;
    let c_fre = if stats.total_char_tokens == 0 {
        0.0
    } else {
        chars
            .iter()
            .map(|&c| stats.char_count(c) as f64 / stats.total_char_tokens as f64)
            .sum::<f64>()
            / n
    };
    let c_con = chars
        .iter()
        .zip(span.labels.tags())
        .map(|(&c, &t)| psi_char(c, t, stats))
        .sum::<f64>()
        / n;
    AttributeVector {
        w_len,
        s_len,
        o_den,
        w_fre,
        c_fre,
        w_con: psi_word(&span.text, &span.labels, stats),
        c_con,
    }
}

/// Attributes of every span of `spans`, whose sentence indices point into
/// `context`. The OOV density is computed once per sentence.
pub fn attribute_vectors(
    spans: &[Span],
    context: &[Sentence],
    stats: &TrainingStats,
    unit: SlenUnit,
) -> Vec<AttributeVector> {
    let densities: Vec<f64> = context.iter().map(|s| oov_density(s, stats)).collect();
    spans
        .iter()
        .map(|span| {
            let i = span.sentence_index;
            attribute_vector_with_density(span, &context[i], stats, unit, densities[i])
        })
        .collect()
}
